use fedshift::fed::TrainingSummary;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; absent for a single seed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() >= 2)
            .then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt());
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    #[serde(flatten)]
    pub summary: TrainingSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAggregate {
    pub mode: String,
    pub average: Stat,
    pub worst: Stat,
    pub best: Stat,
    pub per_client_accuracy: Vec<Stat>,
    pub runs: Vec<RunSummary>,
}

impl ModeAggregate {
    pub fn new(mode: String, runs: Vec<RunSummary>) -> Self {
        let pick = |f: fn(&TrainingSummary) -> f64| -> Vec<f64> { runs.iter().map(|r| f(&r.summary)).collect() };
        let clients = runs.first().map_or(0, |r| r.summary.per_client_accuracy.len());
        let per_client_accuracy = (0..clients)
            .map(|k| Stat::of(&runs.iter().map(|r| r.summary.per_client_accuracy[k]).collect::<Vec<_>>()))
            .collect();
        Self {
            average: Stat::of(&pick(|s| s.average)),
            worst: Stat::of(&pick(|s| s.worst)),
            best: Stat::of(&pick(|s| s.best)),
            per_client_accuracy,
            mode,
            runs,
        }
    }
}

/// Aggregate written at the experiment root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub experiment: String,
    pub seeds: Vec<u64>,
    pub modes: Vec<ModeAggregate>,
}

impl ResultSummary {
    /// Columns `mode,seeds,average_mean,average_std,worst_mean,worst_std,best_mean,best_std`.
    pub fn to_csv(&self) -> String {
        let cell = |s: &Stat| format!("{},{}", s.mean, s.std.map(|v| v.to_string()).unwrap_or_default());
        let mut out = String::from("mode,seeds,average_mean,average_std,worst_mean,worst_std,best_mean,best_std\n");
        for m in &self.modes {
            out += &format!(
                "{},{},{},{},{}\n",
                m.mode,
                m.runs.len(),
                cell(&m.average),
                cell(&m.worst),
                cell(&m.best)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn std_needs_two_values() {
        assert_eq!(Stat::of(&[0.5]), Stat { mean: 0.5, std: None });
        let s = Stat::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, Some(2f64.sqrt()));
        let json = serde_json::to_string(&Stat::of(&[0.25])).unwrap();
        assert_eq!(json, r#"{"mean":0.25}"#);
    }
}
