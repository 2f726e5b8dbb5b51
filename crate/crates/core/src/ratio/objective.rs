use super::model::{RatioFunction, RatioModel};
use super::variant::BregmanVariant;
use crate::error::{Error, Result};

/// The two pieces of the batched nnBD objective for one client.
#[derive(Debug, Clone, PartialEq)]
pub struct NnbdParts {
    /// `mean_tr ell1 - K C mean_te ell1`; the part under the ReLU.
    pub bracket: f64,
    /// `K mean_te ell2`.
    pub ell2_term: f64,
}

impl NnbdParts {
    pub fn value(&self) -> f64 {
        self.bracket.max(0.0) + self.ell2_term
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnbdGrad {
    pub parts: NnbdParts,
    pub d_bracket: Vec<f64>,
    pub d_ell2_term: Vec<f64>,
}

impl NnbdGrad {
    /// Gradient of `value()`, taking the right derivative at bracket = 0.
    pub fn d_value(&self) -> Vec<f64> {
        let on = self.parts.bracket >= 0.0;
        self.d_bracket
            .iter()
            .zip(&self.d_ell2_term)
            .map(|(b, l)| if on { b + l } else { *l })
            .collect()
    }
}

fn check_batches(train: &[Vec<f64>], test: &[Vec<f64>], k: usize) -> Result<()> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument("nnBD batches must be nonempty".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("num_clients must be at least 1".into()));
    }
    Ok(())
}

/// Batched nnBD objective: `ReLU(bracket) + K mean_te ell2(r, C)`. The test
/// batch is drawn from the pooled set, so the factor K stands in for the sum
/// over clients.
pub fn nnbd_objective(
    variant: BregmanVariant,
    model: &dyn RatioFunction,
    c: f64,
    num_clients: usize,
    train: &[Vec<f64>],
    test: &[Vec<f64>],
) -> Result<NnbdParts> {
    check_batches(train, test, num_clients)?;
    let k = num_clients as f64;
    let mut tr = 0.0;
    for x in train {
        tr += variant.ell1(model.ratio(x), c)?;
    }
    let (mut te1, mut te2) = (0.0, 0.0);
    for x in test {
        let r = model.ratio(x);
        te1 += variant.ell1(r, c)?;
        te2 += variant.ell2(r, c)?;
    }
    let nt = test.len() as f64;
    Ok(NnbdParts {
        bracket: tr / train.len() as f64 - k * c * te1 / nt,
        ell2_term: k * te2 / nt,
    })
}

/// Objective pieces together with their parameter gradients.
pub fn nnbd_gradient(
    variant: BregmanVariant,
    model: &RatioModel,
    c: f64,
    num_clients: usize,
    train: &[Vec<f64>],
    test: &[Vec<f64>],
) -> Result<NnbdGrad> {
    check_batches(train, test, num_clients)?;
    let k = num_clients as f64;
    let np = model.params.len();
    let mut d_bracket = vec![0.0; np];
    let mut d_ell2_term = vec![0.0; np];
    let (ntr, nte) = (train.len() as f64, test.len() as f64);

    let mut tr = 0.0;
    for x in train {
        let r = model.eval(x);
        tr += variant.ell1(r, c)?;
        model.accumulate_grad(x, variant.d_ell1(r, c)? / ntr, &mut d_bracket);
    }
    let (mut te1, mut te2) = (0.0, 0.0);
    for x in test {
        let r = model.eval(x);
        te1 += variant.ell1(r, c)?;
        te2 += variant.ell2(r, c)?;
        model.accumulate_grad(x, -k * c * variant.d_ell1(r, c)? / nte, &mut d_bracket);
        model.accumulate_grad(x, k * variant.d_ell2(r, c)? / nte, &mut d_ell2_term);
    }
    Ok(NnbdGrad {
        parts: NnbdParts {
            bracket: tr / ntr - k * c * te1 / nte,
            ell2_term: k * te2 / nte,
        },
        d_bracket,
        d_ell2_term,
    })
}

/// Plug-in BD risk `mean_tr ell1 - C K mean_te ell1 + K mean_te ell2`, with no
/// ReLU.
pub fn empirical_bd_risk(
    variant: BregmanVariant,
    model: &dyn RatioFunction,
    c: f64,
    num_clients: usize,
    train: &[Vec<f64>],
    pooled: &[Vec<f64>],
) -> Result<f64> {
    let p = nnbd_objective(variant, model, c, num_clients, train, pooled)?;
    Ok(p.bracket + p.ell2_term)
}
