use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bregman generator used for density-ratio matching.
///
/// `ell1`/`ell2` are the per-variant objective pieces actually optimised. They
/// drop additive constants relative to the generic `f'(z) z - f(z)` and
/// `C ell1 - f'(z)` forms; for LSIF the generic `ell1` is `(z^2 - 1)/2`.
/// The constant `c` is only read by PU, whose `f` itself depends on it, and
/// by every `ell2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BregmanVariant {
    Lsif,
    Ukl,
    Lr,
    Pu,
}

impl BregmanVariant {
    pub const ALL: [BregmanVariant; 4] = [Self::Lsif, Self::Ukl, Self::Lr, Self::Pu];

    pub fn name(self) -> &'static str {
        match self {
            Self::Lsif => "LSIF",
            Self::Ukl => "UKL",
            Self::Lr => "LR",
            Self::Pu => "PU",
        }
    }

    /// Largest admissible model output, or `None` if unbounded above.
    pub fn upper_bound(self) -> Option<f64> {
        match self {
            Self::Pu => Some(1.0),
            _ => None,
        }
    }

    pub fn in_domain(self, z: f64) -> bool {
        z.is_finite()
            && match self {
                Self::Lsif => z >= 0.0,
                Self::Ukl | Self::Lr => z > 0.0,
                Self::Pu => z > 0.0 && z < 1.0,
            }
    }

    fn check(self, z: f64) -> Result<()> {
        if self.in_domain(z) {
            Ok(())
        } else {
            Err(Error::Domain { variant: self.name(), z })
        }
    }

    pub fn ell1(self, z: f64, c: f64) -> Result<f64> {
        self.check(z)?;
        Ok(match self {
            Self::Lsif => 0.5 * z * z,
            Self::Ukl => z,
            Self::Lr => z.ln_1p(),
            Self::Pu => -c * (-z).ln_1p(),
        })
    }

    pub fn ell2(self, z: f64, c: f64) -> Result<f64> {
        self.check(z)?;
        Ok(match self {
            Self::Lsif => 0.5 * c * z * z - z,
            Self::Ukl => c * z - z.ln(),
            Self::Lr => c * z.ln_1p() - (z / (z + 1.0)).ln(),
            Self::Pu => -c * z.ln() + (c - c * c) * (-z).ln_1p(),
        })
    }

    pub fn d_ell1(self, z: f64, c: f64) -> Result<f64> {
        self.check(z)?;
        Ok(match self {
            Self::Lsif => z,
            Self::Ukl => 1.0,
            Self::Lr => 1.0 / (z + 1.0),
            Self::Pu => c / (1.0 - z),
        })
    }

    pub fn d_ell2(self, z: f64, c: f64) -> Result<f64> {
        self.check(z)?;
        Ok(match self {
            Self::Lsif => c * z - 1.0,
            Self::Ukl => c - 1.0 / z,
            Self::Lr => c / (z + 1.0) - 1.0 / z + 1.0 / (z + 1.0),
            Self::Pu => -c / z - (c - c * c) / (1.0 - z),
        })
    }

    /// The convex generator f.
    pub fn f(self, z: f64, c: f64) -> Result<f64> {
        self.check(z)?;
        Ok(match self {
            Self::Lsif => 0.5 * (z - 1.0) * (z - 1.0),
            Self::Ukl => z * z.ln() - z,
            Self::Lr => z * z.ln() - (z + 1.0) * z.ln_1p(),
            Self::Pu => c * (-z).ln_1p() + c * z * (z.ln() - (-z).ln_1p()),
        })
    }

    pub fn f_prime(self, z: f64, c: f64) -> Result<f64> {
        self.check(z)?;
        Ok(match self {
            Self::Lsif => z - 1.0,
            Self::Ukl => z.ln(),
            Self::Lr => (z / (z + 1.0)).ln(),
            Self::Pu => c * (z / (1.0 - z)).ln(),
        })
    }

    pub fn generic_ell1(self, z: f64, c: f64) -> Result<f64> {
        Ok(self.f_prime(z, c)? * z - self.f(z, c)?)
    }

    pub fn generic_ell2(self, z: f64, c: f64) -> Result<f64> {
        Ok(c * self.generic_ell1(z, c)? - self.f_prime(z, c)?)
    }
}

impl std::fmt::Display for BregmanVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BregmanVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LSIF" => Ok(Self::Lsif),
            "UKL" => Ok(Self::Ukl),
            "LR" => Ok(Self::Lr),
            "PU" => Ok(Self::Pu),
            _ => Err(Error::Configuration(format!("unknown Bregman variant {s:?}"))),
        }
    }
}
