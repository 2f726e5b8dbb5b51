use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BaseGenerator, ClassProportions, DatasetSplit, Label, LabeledSample};
use crate::error::{Error, Result};
use crate::rng::{self, StreamTag};

/// Per-class sample counts for one client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientCounts {
    pub train: Vec<usize>,
    pub test_pool: Vec<usize>,
    /// Held-out labelled test data; may be all zero.
    #[serde(default)]
    pub test_eval: Vec<usize>,
}

impl ClientCounts {
    /// Evaluation counts default to a copy of the pool counts.
    pub fn new(train: Vec<usize>, test_pool: Vec<usize>) -> Self {
        let test_eval = test_pool.clone();
        Self { train, test_pool, test_eval }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CountTable {
    pub clients: Vec<ClientCounts>,
}

impl CountTable {
    pub fn new(clients: Vec<ClientCounts>) -> Self {
        Self { clients }
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn num_classes(&self) -> usize {
        self.clients.first().map_or(0, |c| c.train.len())
    }

    /// Unlabelled pool size contributed by every client.
    pub fn n_test(&self) -> usize {
        self.clients.first().map_or(0, |c| c.test_pool.iter().sum())
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.clients.is_empty() {
            return Err(Error::Configuration("scenario needs at least one client".into()));
        }
        let n_te = self.n_test();
        for (k, c) in self.clients.iter().enumerate() {
            let eval_ok = c.test_eval.is_empty() || c.test_eval.len() == num_classes;
            if c.train.len() != num_classes || c.test_pool.len() != num_classes || !eval_ok {
                return Err(Error::Configuration(format!(
                    "client {k}: count rows must have {num_classes} entries"
                )));
            }
            if c.train.iter().all(|&n| n == 0) {
                return Err(Error::Configuration(format!("client {k}: empty train split")));
            }
            let pool: usize = c.test_pool.iter().sum();
            if pool == 0 {
                return Err(Error::Configuration(format!("client {k}: empty test pool")));
            }
            if pool != n_te {
                return Err(Error::Protocol(format!(
                    "client {k} contributes {pool} pool samples, client 0 contributes {n_te}"
                )));
            }
        }
        Ok(())
    }

    /// Multiply every count by `factor`, rounding to nearest and keeping
    /// nonzero entries nonzero.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: &[usize]| -> Vec<usize> {
            v.iter()
                .map(|&n| if n == 0 { 0 } else { ((n as f64 * factor).round() as usize).max(1) })
                .collect()
        };
        Self::new(
            self.clients
                .iter()
                .map(|c| ClientCounts {
                    train: s(&c.train),
                    test_pool: s(&c.test_pool),
                    test_eval: s(&c.test_eval),
                })
                .collect(),
        )
    }
}

/// Five clients, ten classes: client k holds 34 examples of every class plus
/// 5862 of class 5+k, and its test data is 977 of class k with 5 of each
/// other class.
pub fn fashion_mnist_five_client_counts() -> CountTable {
    let clients = (0..5)
        .map(|k| {
            let mut train = vec![34; 10];
            train[5 + k] = 5862;
            let mut test = vec![5; 10];
            test[k] = 977;
            ClientCounts::new(train, test)
        })
        .collect();
    CountTable::new(clients)
}

/// Two clients, ten classes, opposite skews between train and test.
pub fn two_client_fashion_mnist_counts() -> CountTable {
    let half = |a: usize, b: usize| [vec![a; 5], vec![b; 5]].concat();
    CountTable::new(vec![
        ClientCounts::new(vec![100; 10], half(9, 990)),
        ClientCounts::new(half(39, 3986), half(990, 9)),
    ])
}

/// Single client whose train and test label distributions are
/// `(1/20 x5, 1 x5)` and `(1 x5, 1/20 x5)`, giving a maximal ratio of 20.
/// `per_major_class` must be a multiple of 20.
pub fn ratio_twenty_counts(per_major_class: usize) -> Result<CountTable> {
    if per_major_class == 0 || !per_major_class.is_multiple_of(20) {
        return Err(Error::InvalidArgument(
            "per_major_class must be a positive multiple of 20".into(),
        ));
    }
    let minor = per_major_class / 20;
    let train = [vec![minor; 5], vec![per_major_class; 5]].concat();
    let test = [vec![per_major_class; 5], vec![minor; 5]].concat();
    Ok(CountTable::new(vec![ClientCounts::new(train, test)]))
}

/// A fully specified multi-client target-shift experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftScenario {
    pub counts: CountTable,
    pub generator: BaseGenerator,
    pub seed: u64,
}

impl ShiftScenario {
    pub fn new(counts: CountTable, generator: BaseGenerator, seed: u64) -> Result<Self> {
        generator.validate()?;
        counts.validate(generator.num_classes())?;
        Ok(Self { counts, generator, seed })
    }

    pub fn num_clients(&self) -> usize {
        self.counts.num_clients()
    }

    pub fn num_classes(&self) -> usize {
        self.generator.num_classes()
    }

    pub fn train_proportions(&self, k: usize) -> Result<ClassProportions> {
        ClassProportions::from_counts(&self.client(k)?.train)
    }

    pub fn test_proportions(&self, k: usize) -> Result<ClassProportions> {
        ClassProportions::from_counts(&self.client(k)?.test_pool)
    }

    fn client(&self, k: usize) -> Result<&ClientCounts> {
        self.counts
            .clients
            .get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("no client {k}")))
    }

    pub fn generate(&self) -> Result<Vec<DatasetSplit>> {
        make_target_shift_scenario(&self.counts, &self.generator, self.seed)
    }
}

/// Build every client's splits with exactly the requested per-class counts.
///
/// Each class gets one pool, sized to the total demand and drawn from its own
/// stream, which is then split by [`allocate_from_pools`].
pub fn make_target_shift_scenario(
    counts: &CountTable,
    generator: &BaseGenerator,
    seed: u64,
) -> Result<Vec<DatasetSplit>> {
    generator.validate()?;
    let num_classes = generator.num_classes();
    counts.validate(num_classes)?;

    let demand = |c: usize| -> usize {
        counts
            .clients
            .iter()
            .map(|cl| cl.train[c] + cl.test_pool[c] + cl.test_eval.get(c).copied().unwrap_or(0))
            .sum()
    };

    let pools: Vec<Vec<Vec<f64>>> = (0..num_classes)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, StreamTag::ClassPool, c as u64);
            generator.sample_class(c, demand(c), &mut rng)
        })
        .collect::<Result<_>>()?;
    allocate_from_pools(counts, &pools, seed)
}

/// Subsample every client's splits without replacement from fixed per-class
/// pools (`pools[c]` holds the features of class c).
pub fn allocate_from_pools(
    counts: &CountTable,
    pools: &[Vec<Vec<f64>>],
    seed: u64,
) -> Result<Vec<DatasetSplit>> {
    let num_classes = pools.len();
    counts.validate(num_classes)?;

    let orders: Vec<Vec<usize>> = (0..num_classes)
        .map(|c| {
            let mut idx: Vec<usize> = (0..pools[c].len()).collect();
            idx.shuffle(&mut rng::stream(seed, StreamTag::Allocation, c as u64));
            idx
        })
        .collect();
    let mut cursors = vec![0usize; num_classes];
    let mut take = |c: usize, n: usize| -> Result<Vec<&Vec<f64>>> {
        let start = cursors[c];
        let available = orders[c].len() - start;
        if n > available {
            return Err(Error::InsufficientData { class: c, requested: n, available });
        }
        cursors[c] += n;
        Ok(orders[c][start..start + n].iter().map(|&i| &pools[c][i]).collect())
    };

    let mut splits = Vec::with_capacity(counts.num_clients());
    for (k, cl) in counts.clients.iter().enumerate() {
        let mut train = Vec::new();
        let mut test_pool = Vec::new();
        let mut test_eval = Vec::new();
        for c in 0..num_classes {
            train.extend(take(c, cl.train[c])?.into_iter().map(|x| labeled(x, c)));
            test_pool.extend(take(c, cl.test_pool[c])?.into_iter().cloned());
            let n_eval = cl.test_eval.get(c).copied().unwrap_or(0);
            test_eval.extend(take(c, n_eval)?.into_iter().map(|x| labeled(x, c)));
        }
        // Class-major order would leak labels through position.
        let mut rng = rng::stream(seed, StreamTag::Client, k as u64);
        train.shuffle(&mut rng);
        test_pool.shuffle(&mut rng);
        test_eval.shuffle(&mut rng);
        splits.push(DatasetSplit { client_id: k, train, test_pool, test_eval });
    }
    Ok(splits)
}

fn labeled(x: &[f64], c: usize) -> LabeledSample {
    LabeledSample::new(x.to_vec(), Label::Class(c))
}

/// `q_te(label) / q_tr(label)`, the density ratio at any point of class
/// `label` when class regions do not overlap.
pub fn exact_ratio_target_shift(
    q_tr: &ClassProportions,
    q_te: &ClassProportions,
    label: usize,
) -> Result<f64> {
    let p = q_tr.prob(label);
    if p <= 0.0 {
        return Err(Error::UndefinedRatio { label });
    }
    Ok(q_te.prob(label) / p)
}

/// `sum_l p_l^te(label) / p_k^tr(label)`.
pub fn exact_combined_ratio(k: usize, scenario: &ShiftScenario, label: usize) -> Result<f64> {
    let p = scenario.train_proportions(k)?.prob(label);
    if p <= 0.0 {
        return Err(Error::UndefinedRatio { label });
    }
    let mut num = 0.0;
    for l in 0..scenario.num_clients() {
        num += scenario.test_proportions(l)?.prob(label);
    }
    Ok(num / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::GaussianClusters;
    use approx::assert_relative_eq;

    fn gen10() -> BaseGenerator {
        BaseGenerator::GaussianClusters(GaussianClusters::new(4, 10))
    }

    fn class_counts(xs: &[LabeledSample], classes: usize) -> Vec<usize> {
        let mut out = vec![0; classes];
        for s in xs {
            out[s.label.class().unwrap()] += 1;
        }
        out
    }

    #[test]
    fn five_client_table_sizes() {
        let table = fashion_mnist_five_client_counts().scaled(0.1);
        let splits = make_target_shift_scenario(&table, &gen10(), 1).unwrap();
        assert_eq!(splits.len(), 5);
        for (k, s) in splits.iter().enumerate() {
            assert_eq!(class_counts(&s.train, 10), table.clients[k].train);
            assert_eq!(class_counts(&s.test_eval, 10), table.clients[k].test_eval);
            assert_eq!(s.test_pool.len(), table.n_test());
        }
        let full = fashion_mnist_five_client_counts();
        assert_eq!(full.clients[2].train[7], 5862);
        assert_eq!(full.clients[2].test_pool[2], 977);
        assert_eq!(full.n_test(), 977 + 9 * 5);
        assert_eq!(full.clients[0].train.iter().sum::<usize>(), 34 * 9 + 5862);
    }

    #[test]
    fn two_client_table_sizes() {
        let table = two_client_fashion_mnist_counts();
        table.validate(10).unwrap();
        assert_eq!(table.n_test(), 9 * 5 + 990 * 5);
        assert_eq!(table.clients[1].train.iter().sum::<usize>(), 39 * 5 + 3986 * 5);
        let small = table.scaled(0.05);
        let splits = make_target_shift_scenario(&small, &gen10(), 2).unwrap();
        assert_eq!(class_counts(&splits[1].train, 10), small.clients[1].train);
    }

    #[test]
    fn insufficient_pool_is_an_error() {
        let table = CountTable::new(vec![ClientCounts::new(vec![2, 1], vec![1, 1])]);
        let pools = vec![vec![vec![0.0]; 3], vec![vec![1.0]; 3]];
        assert_eq!(
            allocate_from_pools(&table, &pools, 0),
            Err(Error::InsufficientData { class: 0, requested: 1, available: 0 })
        );
        let splits = allocate_from_pools(&table.scaled(0.5), &pools, 0).unwrap();
        assert_eq!(splits[0].train.len(), 2);
    }

    #[test]
    fn unequal_pools_rejected() {
        let table = CountTable::new(vec![
            ClientCounts::new(vec![1, 1], vec![1, 1]),
            ClientCounts::new(vec![1, 1], vec![1, 2]),
        ]);
        assert!(matches!(table.validate(2), Err(Error::Protocol(_))));
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let table = fashion_mnist_five_client_counts().scaled(0.02);
        let a = make_target_shift_scenario(&table, &gen10(), 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| make_target_shift_scenario(&table, &gen10(), 9).unwrap());
        assert_eq!(a, b);
        let c = make_target_shift_scenario(&table, &gen10(), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ratio_twenty_fixture() {
        let q_tr = ClassProportions::new(&[[0.05; 5], [1.0; 5]].concat()).unwrap();
        let q_te = ClassProportions::new(&[[1.0; 5], [0.05; 5]].concat()).unwrap();
        assert_relative_eq!(exact_ratio_target_shift(&q_tr, &q_te, 0).unwrap(), 20.0, max_relative = 1e-12);
        assert_relative_eq!(exact_ratio_target_shift(&q_tr, &q_te, 5).unwrap(), 0.05, max_relative = 1e-12);
        assert_eq!(exact_ratio_target_shift(&q_tr, &q_tr, 3).unwrap(), 1.0);

        let sc = ShiftScenario::new(ratio_twenty_counts(100).unwrap(), gen10(), 0).unwrap();
        assert_relative_eq!(exact_combined_ratio(0, &sc, 0).unwrap(), 20.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_train_mass_is_undefined() {
        let q_tr = ClassProportions::new(&[1.0, 0.0]).unwrap();
        assert_eq!(
            exact_ratio_target_shift(&q_tr, &q_tr, 1),
            Err(Error::UndefinedRatio { label: 1 })
        );
    }

    #[test]
    fn combined_ratio_identities() {
        let g = BaseGenerator::OneHot { num_classes: 3 };
        // All test distributions equal client 0's train distribution.
        let same = CountTable::new(vec![
            ClientCounts::new(vec![2, 3, 5], vec![2, 3, 5]),
            ClientCounts::new(vec![1, 1, 1], vec![2, 3, 5]),
            ClientCounts::new(vec![4, 1, 1], vec![2, 3, 5]),
        ]);
        let sc = ShiftScenario::new(same, g.clone(), 0).unwrap();
        for y in 0..3 {
            assert_relative_eq!(exact_combined_ratio(0, &sc, y).unwrap(), 3.0, max_relative = 1e-12);
        }

        // K = 2, shared test distribution q, train distribution p: 2 q/p.
        let two = CountTable::new(vec![
            ClientCounts::new(vec![1, 3, 6], vec![5, 3, 2]),
            ClientCounts::new(vec![7, 2, 1], vec![5, 3, 2]),
        ]);
        let sc = ShiftScenario::new(two, g, 0).unwrap();
        let p = [0.1, 0.3, 0.6];
        let q = [0.5, 0.3, 0.2];
        for y in 0..3 {
            assert_relative_eq!(
                exact_combined_ratio(0, &sc, y).unwrap(),
                2.0 * q[y] / p[y],
                max_relative = 1e-12
            );
            // Oracle consistency: the combined ratio is the sum of pairwise ratios.
            let pair_sum: f64 = (0..2)
                .map(|l| {
                    exact_ratio_target_shift(
                        &sc.train_proportions(0).unwrap(),
                        &sc.test_proportions(l).unwrap(),
                        y,
                    )
                    .unwrap()
                })
                .sum();
            assert_relative_eq!(exact_combined_ratio(0, &sc, y).unwrap(), pair_sum, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_client_reduces_to_pairwise() {
        let table = CountTable::new(vec![ClientCounts::new(vec![3, 1], vec![1, 3])]);
        let sc = ShiftScenario::new(table, BaseGenerator::OneHot { num_classes: 2 }, 0).unwrap();
        for y in 0..2 {
            let pair = exact_ratio_target_shift(
                &sc.train_proportions(0).unwrap(),
                &sc.test_proportions(0).unwrap(),
                y,
            )
            .unwrap();
            assert_eq!(exact_combined_ratio(0, &sc, y).unwrap(), pair);
        }
    }
}
