//! Reference signals evaluated at integer update indices `tau`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSignal {
    /// `amplitude * sin(tau * rate_over_pi / pi)`.
    Sinusoid {
        amplitude: f64,
        rate_over_pi: f64,
    },
    Constant {
        value: f64,
    },
    /// `values[tau]`; queries past the end are a range error.
    Table {
        values: Vec<f64>,
    },
    Ramp {
        slope: f64,
        intercept: f64,
    },
}

impl ReferenceSignal {
    pub fn eval(&self, tau: u64) -> Result<f64> {
        Ok(match self {
            ReferenceSignal::Sinusoid {
                amplitude,
                rate_over_pi,
            } => amplitude * (tau as f64 * rate_over_pi / PI).sin(),
            ReferenceSignal::Constant { value } => *value,
            ReferenceSignal::Table { values } => *values.get(tau as usize).ok_or(Error::Range {
                tau,
                len: values.len(),
            })?,
            ReferenceSignal::Ramp { slope, intercept } => slope * tau as f64 + intercept,
        })
    }

    /// Largest `|f(tau+1) - f(tau)|` for `tau` in `[0, tau_max)`, by scan.
    /// Table signals only scan as far as they are defined.
    pub fn max_step(&self, tau_max: u64) -> f64 {
        let tau_max = match self {
            ReferenceSignal::Table { values } => tau_max.min(values.len().saturating_sub(1) as u64),
            _ => tau_max,
        };
        let mut best = 0.0f64;
        let mut prev = match self.eval(0) {
            Ok(v) => v,
            Err(_) => return 0.0,
        };
        for tau in 1..=tau_max {
            let next = self.eval(tau).expect("tau within table bounds");
            best = best.max((next - prev).abs());
            prev = next;
        }
        best
    }

    /// Closed-form supremum of the increment over all `tau`, where one is
    /// known. For a sinusoid this is `2|A| sin(w/2)` with `w` clamped to
    /// `pi` (increments cannot exceed `2|A|`).
    pub fn max_step_closed_form(&self) -> Option<f64> {
        match self {
            ReferenceSignal::Sinusoid {
                amplitude,
                rate_over_pi,
            } => {
                let w = (rate_over_pi / PI).abs() % (2.0 * PI);
                let w = if w > PI { 2.0 * PI - w } else { w };
                Some(2.0 * amplitude.abs() * (w / 2.0).sin())
            }
            ReferenceSignal::Constant { .. } => Some(0.0),
            ReferenceSignal::Ramp { slope, .. } => Some(slope.abs()),
            ReferenceSignal::Table { .. } => None,
        }
    }

    /// Margin `epsilon = u_max - max_step` for the bounded-input convergence
    /// guarantee. `None` when the margin is not strictly positive.
    pub fn input_margin(&self, u_max: f64, tau_max: u64) -> Option<f64> {
        let eps = u_max - self.max_step(tau_max);
        (eps > 0.0).then_some(eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim_sine() -> ReferenceSignal {
        ReferenceSignal::Sinusoid {
            amplitude: 10.0,
            rate_over_pi: 1.0,
        }
    }

    #[test]
    fn eval_examples() {
        assert_eq!(sim_sine().eval(0).unwrap(), 0.0);
        assert_eq!(
            ReferenceSignal::Constant { value: 3.5 }.eval(77).unwrap(),
            3.5
        );
        // 10 * sin(5 / pi), evaluated independently.
        assert!((sim_sine().eval(5).unwrap() - 9.997846620634563).abs() < 1e-12);
    }

    #[test]
    fn table_overrun() {
        let sig = ReferenceSignal::Table {
            values: vec![1.0, 2.0],
        };
        assert_eq!(sig.eval(1).unwrap(), 2.0);
        assert!(matches!(sig.eval(2), Err(Error::Range { tau: 2, len: 2 })));
        assert_eq!(sig.max_step(100), 1.0);
    }

    #[test]
    fn max_step_examples() {
        assert_eq!(ReferenceSignal::Constant { value: 1.0 }.max_step(50), 0.0);
        let ramp = ReferenceSignal::Ramp {
            slope: 2.0,
            intercept: -1.0,
        };
        assert_eq!(ramp.max_step(50), 2.0);
        // Scan oracle over tau < 1000: 3.169625834795835; sup is 20 sin(1/(2 pi)).
        let scanned = sim_sine().max_step(1000);
        assert!((scanned - 3.169625834795835).abs() < 1e-12);
        let closed = sim_sine().max_step_closed_form().unwrap();
        assert!((closed - 3.1696777318320972).abs() < 1e-12);
        assert!(scanned <= closed);
    }

    #[test]
    fn margin_examples() {
        assert_eq!(
            ReferenceSignal::Constant { value: 0.0 }.input_margin(1.0, 10),
            Some(1.0)
        );
        let ramp = ReferenceSignal::Ramp {
            slope: 5.0,
            intercept: 0.0,
        };
        assert_eq!(ramp.input_margin(5.0, 10), None);
        let eps = sim_sine().input_margin(10.1, 1000).unwrap();
        assert!((eps - 6.930374165204165).abs() < 1e-12);
    }
}
