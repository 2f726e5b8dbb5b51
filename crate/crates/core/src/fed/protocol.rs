use std::sync::Mutex;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, StreamTag};
use crate::synthdata::DatasetSplit;

/// Union of every client's unlabelled test features in a seeded uniformly
/// random order. Nothing in the output identifies the contributing client.
pub fn broadcast_shuffled_pool(clients: &[DatasetSplit], seed: u64) -> Result<Vec<Vec<f64>>> {
    let n_te = clients
        .first()
        .map(|c| c.test_pool.len())
        .ok_or_else(|| Error::Protocol("no clients to pool".into()))?;
    if let Some(c) = clients.iter().find(|c| c.test_pool.len() != n_te) {
        return Err(Error::Protocol(format!(
            "client {} contributes {} pool samples, expected {n_te}",
            c.client_id,
            c.test_pool.len()
        )));
    }
    let mut pool: Vec<Vec<f64>> = clients.iter().flat_map(|c| c.test_pool.iter().cloned()).collect();
    pool.shuffle(&mut rng::stream(seed, StreamTag::Shuffle, 0));
    Ok(pool)
}

/// Records which clients' data reached which client during ratio assignment.
#[derive(Debug, Default)]
pub struct DataFlowAudit {
    flows: Mutex<Vec<(usize, usize)>>,
}

impl DataFlowAudit {
    pub fn new() -> Self {
        Self::default()
    }

    /// `receiver` consumed data (or statistics of data) owned by `origins`.
    pub fn record(&self, receiver: usize, origins: impl IntoIterator<Item = usize>) {
        let mut f = self.flows.lock().expect("audit lock poisoned");
        f.extend(origins.into_iter().map(|o| (receiver, o)));
    }

    pub fn flows(&self) -> Vec<(usize, usize)> {
        self.flows.lock().expect("audit lock poisoned").clone()
    }

    pub fn cross_client(&self) -> usize {
        self.flows().iter().filter(|(r, o)| r != o).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{Label, LabeledSample};

    fn client(id: usize, n_te: usize) -> DatasetSplit {
        DatasetSplit {
            client_id: id,
            train: vec![LabeledSample::new(vec![0.0], Label::Class(0))],
            test_pool: (0..n_te).map(|i| vec![(id * 100 + i) as f64]).collect(),
            test_eval: vec![],
        }
    }

    fn sorted(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        v.sort_by(|a, b| a[0].total_cmp(&b[0]));
        v
    }

    #[test]
    fn pool_is_a_permutation_of_the_union() {
        let cs: Vec<_> = (0..3).map(|k| client(k, 5)).collect();
        let union: Vec<Vec<f64>> = cs.iter().flat_map(|c| c.test_pool.clone()).collect();
        let p = broadcast_shuffled_pool(&cs, 4).unwrap();
        assert_eq!(p.len(), 15);
        assert_eq!(sorted(p.clone()), sorted(union.clone()));
        assert_eq!(p, broadcast_shuffled_pool(&cs, 4).unwrap());
        // Content invariance across seeds; order varies.
        let q = broadcast_shuffled_pool(&cs, 5).unwrap();
        assert_eq!(sorted(q.clone()), sorted(p.clone()));
        let identity = (0..100).filter(|s| broadcast_shuffled_pool(&cs, *s).unwrap() == union).count();
        assert_eq!(identity, 0);
    }

    #[test]
    fn unequal_contributions_rejected() {
        let cs = vec![client(0, 5), client(1, 4)];
        assert!(matches!(broadcast_shuffled_pool(&cs, 0), Err(Error::Protocol(_))));
    }

    #[test]
    fn audit_counts_cross_flows() {
        let a = DataFlowAudit::new();
        a.record(0, [0]);
        a.record(1, [0, 1, 2]);
        assert_eq!(a.cross_client(), 2);
    }
}
