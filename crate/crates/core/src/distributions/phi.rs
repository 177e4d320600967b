use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The increasing weight functions accepted by the psi-moment series.
///
/// Only these shapes are allowed so that every tail bound stays analyzable:
/// each member is dominated by a constant times a power `x^p` with
/// `p <= 1`, see [`Phi::power_majorant`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Phi {
    Zero,
    /// `x^delta`
    Power { delta: f64 },
    /// `log^gamma(1 + x)`
    LogPower { gamma: f64 },
    /// `x^delta * log^gamma(1 + x)`
    PowerLog { delta: f64, gamma: f64 },
}

impl Phi {
    pub fn identity() -> Self {
        Phi::Power { delta: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Phi::Zero => true,
            Phi::Power { delta } => delta > 0.0 && delta <= 1.0,
            Phi::LogPower { gamma } => gamma > 0.0 && gamma.is_finite(),
            Phi::PowerLog { delta, gamma } => delta > 0.0 && delta < 1.0 && gamma > 0.0 && gamma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("phi outside the supported catalog: {self:?}")))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Phi::Zero => 0.0,
            Phi::Power { delta } => x.powf(delta),
            Phi::LogPower { gamma } => x.ln_1p().powf(gamma),
            Phi::PowerLog { delta, gamma } => x.powf(delta) * x.ln_1p().powf(gamma),
        }
    }

    /// Growth at infinity as `(power, log_power)`: `phi(x) = O(x^power log^log_power x)`.
    pub fn growth(&self) -> (f64, f64) {
        match *self {
            Phi::Zero => (0.0, 0.0),
            Phi::Power { delta } => (delta, 0.0),
            Phi::LogPower { gamma } => (0.0, gamma),
            Phi::PowerLog { delta, gamma } => (delta, gamma),
        }
    }

    /// `(constant, p)` with `phi(x) <= constant * x^p` for all `x >= 0` and
    /// `0 < p <= 1`. Uses `log(1 + y) <= y^eta / eta` for `eta` in `(0, 1]`.
    /// `eta` is the largest candidate for which the resulting power stays at
    /// most `max_power`, so callers can ask for a majorant whose moment is
    /// finite.
    pub fn power_majorant(&self, max_power: f64) -> Option<(f64, f64)> {
        match *self {
            Phi::Zero => Some((0.0, 1.0)),
            Phi::Power { delta } => (delta <= max_power).then_some((1.0, delta)),
            Phi::LogPower { gamma } => {
                let eta = (max_power / gamma).min(1.0);
                (eta > 0.0).then(|| (eta.powf(-gamma), eta * gamma))
            }
            Phi::PowerLog { delta, gamma } => {
                let room = max_power - delta;
                if room <= 0.0 {
                    return None;
                }
                let eta = (room / gamma).min(1.0);
                Some((eta.powf(-gamma), delta + eta * gamma))
            }
        }
    }
}
