use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::DeviceId;
use crate::rng::mix64;

/// Law of an infection or patching time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeDistribution {
    Dirac { tau: f64 },
    Uniform { a: f64, b: f64 },
    ShiftedExponential { shift: f64, rate: f64 },
}

impl TimeDistribution {
    pub fn exponential(rate: f64) -> Self {
        TimeDistribution::ShiftedExponential { shift: 0.0, rate }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        let ok = match *self {
            TimeDistribution::Dirac { tau } => tau > 0.0 && tau.is_finite(),
            TimeDistribution::Uniform { a, b } => a >= 0.0 && a <= b && b > 0.0 && b.is_finite(),
            TimeDistribution::ShiftedExponential { shift, rate } => {
                shift >= 0.0 && shift.is_finite() && rate > 0.0 && rate.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                name,
                format!("support must lie in (0, inf): {self:?}"),
            ))
        }
    }

    /// Inverse distribution function at `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            TimeDistribution::Dirac { tau } => tau,
            TimeDistribution::Uniform { a, b } => a + (b - a) * u,
            TimeDistribution::ShiftedExponential { shift, rate } => shift - (-u).ln_1p() / rate,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            TimeDistribution::Dirac { tau } => *tau,
            _ => self.quantile(rng.random::<f64>()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TimeDistribution::Dirac { tau } => tau,
            TimeDistribution::Uniform { a, b } => (a + b) / 2.0,
            TimeDistribution::ShiftedExponential { shift, rate } => shift + 1.0 / rate,
        }
    }

    /// Smallest point of the support.
    pub fn min(&self) -> f64 {
        match *self {
            TimeDistribution::Dirac { tau } => tau,
            TimeDistribution::Uniform { a, .. } => a,
            TimeDistribution::ShiftedExponential { shift, .. } => shift,
        }
    }

    /// Law of `x / b` for `x` drawn from `self`.
    pub fn scaled(&self, b: f64) -> Result<TimeDistribution> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::invalid("b", format!("must be positive, got {b}")));
        }
        Ok(match *self {
            TimeDistribution::Dirac { tau } => TimeDistribution::Dirac { tau: tau / b },
            TimeDistribution::Uniform { a, b: hi } => TimeDistribution::Uniform {
                a: a / b,
                b: hi / b,
            },
            TimeDistribution::ShiftedExponential { shift, rate } => {
                TimeDistribution::ShiftedExponential {
                    shift: shift / b,
                    rate: rate * b,
                }
            }
        })
    }
}

/// Uniform in `[0, 1)` from a 64-bit hash.
fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Infection and patching times per ordered pair `(source, target)`,
/// fixed for the whole run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimerTable {
    infection: HashMap<(DeviceId, DeviceId), f64>,
    patch: HashMap<(DeviceId, DeviceId), f64>,
}

impl TimerTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, source: DeviceId, target: DeviceId, infection: f64, patch: f64) {
        self.infection.insert((source, target), infection);
        self.patch.insert((source, target), patch);
    }

    pub fn infection(&self, source: DeviceId, target: DeviceId) -> Result<f64> {
        self.infection
            .get(&(source, target))
            .copied()
            .ok_or(Error::MissingTimer(source, target))
    }

    pub fn patch(&self, source: DeviceId, target: DeviceId) -> Result<f64> {
        self.patch
            .get(&(source, target))
            .copied()
            .ok_or(Error::MissingTimer(source, target))
    }

    pub fn len(&self) -> usize {
        self.infection.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infection.is_empty()
    }

    /// Every ordered pair with timers, sorted.
    pub fn pairs(&self) -> Vec<(DeviceId, DeviceId)> {
        let mut p: Vec<_> = self.infection.keys().copied().collect();
        p.sort_unstable();
        p
    }
}

const INFECTION_KEY: u64 = 0x1f;
const PATCH_KEY: u64 = 0x2f;

fn pair_unit(key: u64, stream: u64, source: DeviceId, target: DeviceId) -> f64 {
    let pair = ((source as u64) << 32) | target as u64;
    unit_from_bits(mix64(mix64(key ^ stream) ^ mix64(pair)))
}

/// Draw `rho_i` and `rho_w` for both orientations of every listed pair.
/// A single key is taken from `rng` and each timer is a function of that
/// key and its ordered pair, so the value for a pair does not depend on
/// which other pairs are listed.
pub fn draw_pair_timers<R: Rng + ?Sized>(
    pairs: &[(DeviceId, DeviceId)],
    rho_i: &TimeDistribution,
    rho_w: &TimeDistribution,
    rng: &mut R,
) -> TimerTable {
    let key: u64 = rng.random();
    let mut table = TimerTable::new();
    for &(i, j) in pairs {
        for (s, t) in [(i, j), (j, i)] {
            table.set(
                s,
                t,
                rho_i.quantile(pair_unit(key, INFECTION_KEY, s, t)),
                rho_w.quantile(pair_unit(key, PATCH_KEY, s, t)),
            );
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{ReplicaSeed, Substream};

    #[test]
    fn dirac_timers_are_constant() {
        let mut rng = ReplicaSeed::new(1, 0, 0).stream(Substream::TimersInfection);
        let d = TimeDistribution::Dirac { tau: 1.5 };
        let t = draw_pair_timers(&[(0, 1), (1, 2)], &d, &d, &mut rng);
        for (s, g) in t.pairs() {
            assert_eq!(t.infection(s, g).unwrap(), 1.5);
            assert_eq!(t.patch(s, g).unwrap(), 1.5);
        }
        assert!(matches!(t.infection(0, 2), Err(Error::MissingTimer(0, 2))));
    }

    #[test]
    fn scaling() {
        let d = TimeDistribution::Dirac { tau: 3.0 };
        assert_eq!(d.scaled(2.0).unwrap(), TimeDistribution::Dirac { tau: 1.5 });
        assert_eq!(d.scaled(1.0).unwrap(), d);
        assert!(d.scaled(0.0).is_err());
        let e = TimeDistribution::ShiftedExponential {
            shift: 1.0,
            rate: 2.0,
        };
        assert_eq!(e.scaled(2.0).unwrap().min(), 0.5);
        assert_eq!(e.scaled(2.0).unwrap().mean(), 0.75);
    }

    #[test]
    fn validation() {
        assert!(TimeDistribution::Dirac { tau: 0.0 }.validate("t").is_err());
        assert!(TimeDistribution::Uniform { a: 2.0, b: 1.0 }
            .validate("t")
            .is_err());
        assert!(TimeDistribution::exponential(1.0).validate("t").is_ok());
    }
}
