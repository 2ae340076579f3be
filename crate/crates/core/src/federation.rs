//! Ground-station and satellite model state, asynchronous (FedSat) and
//! synchronous (FedAvg) aggregation, and staleness bookkeeping.

use crate::error::{Error, Result};
use crate::learning::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub global: ModelParams,
    /// Global epoch n.
    pub epoch: u64,
    /// α_k = D_k / D.
    pub weights: Vec<f64>,
    pub last_upload: Vec<Option<ModelParams>>,
}

impl ServerState {
    pub fn new(initial: ModelParams, dataset_sizes: &[usize]) -> Result<Self> {
        let total: usize = dataset_sizes.iter().sum();
        if dataset_sizes.contains(&0) {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            global: initial,
            epoch: 0,
            weights: dataset_sizes
                .iter()
                .map(|&d| d as f64 / total as f64)
                .collect(),
            last_upload: vec![None; dataset_sizes.len()],
        })
    }

    pub fn satellite_count(&self) -> usize {
        self.weights.len()
    }

    fn check(&self, satellite: usize, params: &ModelParams) -> Result<()> {
        if satellite >= self.weights.len() {
            return Err(Error::UnknownSatellite(satellite));
        }
        if params.dim() != self.global.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.global.dim(),
                found: params.dim(),
            });
        }
        Ok(())
    }

    /// w^{n+1} = w^n − α_k (w_k^{prev} − w_k^{new}).
    pub fn fedsat_aggregate(&mut self, msg: &UpdateMessage) -> Result<()> {
        self.check(msg.satellite, &msg.previous)?;
        self.check(msg.satellite, &msg.updated)?;
        let alpha = self.weights[msg.satellite];
        for ((w, old), new) in self
            .global
            .values
            .iter_mut()
            .zip(&msg.previous.values)
            .zip(&msg.updated.values)
        {
            *w -= alpha * (old - new);
        }
        self.epoch += 1;
        self.last_upload[msg.satellite] = Some(msg.updated.clone());
        Ok(())
    }

    /// Synchronous barrier: w^{n+1} = Σ α_k w_k. Needs one update per satellite.
    pub fn fedavg_sync_aggregate(&mut self, updates: &[Option<ModelParams>]) -> Result<()> {
        let present = updates.iter().filter(|u| u.is_some()).count();
        if updates.len() != self.weights.len() || present != self.weights.len() {
            return Err(Error::MissingUpdates {
                expected: self.weights.len(),
                found: present,
            });
        }
        let mut next = vec![0.0; self.global.dim()];
        for (k, update) in updates.iter().enumerate() {
            let update = update.as_ref().expect("checked above");
            self.check(k, update)?;
            for (acc, v) in next.iter_mut().zip(&update.values) {
                *acc += self.weights[k] * v;
            }
        }
        self.global = ModelParams::new(next);
        self.epoch += 1;
        for (slot, update) in self.last_upload.iter_mut().zip(updates) {
            *slot = update.clone();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClientState {
    pub satellite: usize,
    /// Completed (uploaded) local updates n_k.
    pub local_epoch: u64,
    pub cached_global: Option<ModelParams>,
    pub download_time: f64,
    pub download_epoch: u64,
    /// w_k^{n_k − 1, I}; initialised to the first downloaded global model.
    pub previous: Option<ModelParams>,
    pub trained: Option<ModelParams>,
}

impl ClientState {
    pub fn new(satellite: usize) -> Self {
        Self { satellite, ..Self::default() }
    }

    pub fn receive_global(&mut self, server: &ServerState, now: f64) {
        self.cached_global = Some(server.global.clone());
        self.download_time = now;
        self.download_epoch = server.epoch;
        if self.previous.is_none() {
            self.previous = Some(server.global.clone());
        }
    }

    /// Packages the trained model for upload and advances `previous`.
    pub fn take_update(&mut self) -> Result<UpdateMessage> {
        let updated = self
            .trained
            .take()
            .ok_or_else(|| Error::Internal(format!("satellite {} uploads without a trained model", self.satellite)))?;
        let previous = self
            .previous
            .replace(updated.clone())
            .ok_or_else(|| Error::Internal(format!("satellite {} never downloaded", self.satellite)))?;
        self.local_epoch += 1;
        Ok(UpdateMessage {
            satellite: self.satellite,
            previous,
            updated,
            download_time: self.download_time,
            download_epoch: self.download_epoch,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateMessage {
    pub satellite: usize,
    pub previous: ModelParams,
    pub updated: ModelParams,
    pub download_time: f64,
    pub download_epoch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StalenessRecord {
    pub satellite: usize,
    pub time: f64,
    /// Global epochs applied between download and this upload.
    pub epoch_staleness: u64,
    pub time_staleness: f64,
}

/// Staleness of `msg` against the server's current epoch, taken before aggregation.
pub fn record_staleness(msg: &UpdateMessage, now: f64, server: &ServerState) -> StalenessRecord {
    StalenessRecord {
        satellite: msg.satellite,
        time: now,
        epoch_staleness: server.epoch.saturating_sub(msg.download_epoch),
        time_staleness: (now - msg.download_time).max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: &[f64]) -> ModelParams {
        ModelParams::new(v.to_vec())
    }

    fn msg(k: usize, old: &[f64], new: &[f64]) -> UpdateMessage {
        UpdateMessage {
            satellite: k,
            previous: p(old),
            updated: p(new),
            download_time: 0.0,
            download_epoch: 0,
        }
    }

    #[test]
    fn zero_delta_is_identity() {
        let mut s = ServerState::new(p(&[1.0, -2.0]), &[3, 5]).unwrap();
        s.fedsat_aggregate(&msg(1, &[4.0, 4.0], &[4.0, 4.0])).unwrap();
        assert_eq!(s.global, p(&[1.0, -2.0]));
        assert_eq!(s.epoch, 1);
    }

    #[test]
    fn single_satellite_takes_its_model() {
        let mut s = ServerState::new(p(&[0.3, 0.7]), &[10]).unwrap();
        s.fedsat_aggregate(&msg(0, &[0.3, 0.7], &[1.5, -2.0])).unwrap();
        assert_eq!(s.global, p(&[1.5, -2.0]));
    }

    #[test]
    fn half_weight_hand_example() {
        let mut s = ServerState::new(p(&[1.0, 1.0]), &[4, 4]).unwrap();
        assert_eq!(s.weights, vec![0.5, 0.5]);
        s.fedsat_aggregate(&msg(0, &[1.0, 1.0], &[0.0, 0.0])).unwrap();
        assert_eq!(s.global, p(&[0.5, 0.5]));
        assert_eq!(s.last_upload[0], Some(p(&[0.0, 0.0])));
    }

    #[test]
    fn aggregation_rejects_bad_input() {
        let mut s = ServerState::new(p(&[1.0, 1.0]), &[4, 4]).unwrap();
        assert_eq!(s.fedsat_aggregate(&msg(2, &[0.0, 0.0], &[0.0, 0.0])), Err(Error::UnknownSatellite(2)));
        assert!(matches!(
            s.fedsat_aggregate(&msg(0, &[0.0], &[0.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert_eq!(s.epoch, 0);
    }

    #[test]
    fn sync_average() {
        let mut s = ServerState::new(p(&[9.0, 9.0]), &[1, 1]).unwrap();
        s.fedavg_sync_aggregate(&[Some(p(&[0.0, 0.0])), Some(p(&[2.0, 2.0]))]).unwrap();
        assert_eq!(s.global, p(&[1.0, 1.0]));

        let mut s = ServerState::new(p(&[0.0]), &[1, 3]).unwrap();
        s.fedavg_sync_aggregate(&[Some(p(&[4.0])), Some(p(&[0.0]))]).unwrap();
        assert_eq!(s.global, p(&[1.0]));

        let mut s = ServerState::new(p(&[0.0]), &[2, 2, 2]).unwrap();
        s.fedavg_sync_aggregate(&[Some(p(&[0.25])), Some(p(&[0.25])), Some(p(&[0.25]))]).unwrap();
        assert!((s.global.values[0] - 0.25).abs() < 1e-15);
        assert_eq!(
            s.fedavg_sync_aggregate(&[Some(p(&[1.0])), None, Some(p(&[1.0]))]),
            Err(Error::MissingUpdates { expected: 3, found: 2 })
        );
    }

    #[test]
    fn staleness_from_client_flow() {
        let mut server = ServerState::new(p(&[0.0]), &[1, 1]).unwrap();
        let mut client = ClientState::new(0);
        client.receive_global(&server, 100.0);
        client.trained = Some(p(&[1.0]));
        let m = client.take_update().unwrap();
        let rec = record_staleness(&m, 130.0, &server);
        assert_eq!(rec.epoch_staleness, 0);
        assert_eq!(rec.time_staleness, 30.0);
        assert_eq!(m.previous, p(&[0.0]));
        assert_eq!(client.previous, Some(p(&[1.0])));
        assert_eq!(client.local_epoch, 1);

        server.fedsat_aggregate(&msg(1, &[0.0], &[2.0])).unwrap();
        let rec = record_staleness(&m, 200.0, &server);
        assert_eq!(rec.epoch_staleness, 1);
    }

    #[test]
    fn upload_without_training_is_internal_error() {
        let mut client = ClientState::new(3);
        assert!(matches!(client.take_update(), Err(Error::Internal(_))));
    }

    proptest! {
        #[test]
        fn delta_then_negated_delta_restores(
            w in proptest::collection::vec(-10.0..10.0f64, 4),
            a in proptest::collection::vec(-10.0..10.0f64, 4),
            b in proptest::collection::vec(-10.0..10.0f64, 4),
        ) {
            // α = 1 keeps the arithmetic exact in either order
            let mut s = ServerState::new(p(&w), &[5]).unwrap();
            s.fedsat_aggregate(&msg(0, &a, &b)).unwrap();
            s.fedsat_aggregate(&msg(0, &b, &a)).unwrap();
            prop_assert_eq!(s.global.dim(), 4);
            prop_assert_eq!(s.epoch, 2);
            for (x, y) in s.global.values.iter().zip(&w) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
