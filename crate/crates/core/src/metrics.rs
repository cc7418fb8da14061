//! Tracking error, spread functional and the finite-time bound for the
//! bounded-input branch, all computed from traces.

use serde::Serialize;

use crate::engine::{Scenario, Trace};
use crate::error::{Error, Result};

/// Absolute tolerance for exact-tracking assertions.
pub const EXACT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricSeries {
    pub t: Vec<i64>,
    /// Max distance between a normal follower and the normal leaders.
    pub e: Vec<f64>,
    /// `(tau, V)` at update instants `t0 + tau*eta`.
    pub v: Vec<(u64, f64)>,
    /// Min and max over normal followers and the normal-leader value.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub convergence_time: Option<i64>,
    pub bound_periods: Option<u64>,
}

impl MetricSeries {
    pub fn from_trace(tr: &Trace) -> Result<Self> {
        let e = error_series(tr)?;
        let (lower, upper) = envelopes(tr)?;
        let bound_periods = match tr.scenario.params.u_max {
            Some(_) => finite_time_bound(&tr.scenario)?,
            None => None,
        };
        Ok(MetricSeries {
            t: tr.snapshots.iter().map(|s| s.t).collect(),
            convergence_time: convergence_time(tr, &e, EXACT_TOL),
            v: lyapunov_series(tr)?,
            e,
            lower,
            upper,
            bound_periods,
        })
    }
}

fn normal_sets(sc: &Scenario) -> Result<(Vec<usize>, Vec<usize>)> {
    let leaders = sc.normal_leaders();
    let followers = sc.normal_followers();
    if leaders.is_empty() {
        return Err(Error::UndefinedMetric("no normally behaving leaders"));
    }
    if followers.is_empty() {
        return Err(Error::UndefinedMetric("no normally behaving followers"));
    }
    Ok((leaders, followers))
}

/// `e(t) = max |x_i(t) - x_l(t)|` over normal followers `i` and normal
/// leaders `l`, for every snapshot.
pub fn error_series(tr: &Trace) -> Result<Vec<f64>> {
    let (leaders, followers) = normal_sets(&tr.scenario)?;
    Ok(tr
        .snapshots
        .iter()
        .map(|s| {
            followers
                .iter()
                .flat_map(|&i| leaders.iter().map(move |&l| (s.x[i] - s.x[l]).abs()))
                .fold(0.0, f64::max)
        })
        .collect())
}

fn spread(x: &[f64], leader: usize, followers: &[usize]) -> (f64, f64) {
    followers
        .iter()
        .map(|&i| x[i])
        .fold((x[leader], x[leader]), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn envelopes(tr: &Trace) -> Result<(Vec<f64>, Vec<f64>)> {
    let (leaders, followers) = normal_sets(&tr.scenario)?;
    Ok(tr
        .snapshots
        .iter()
        .map(|s| spread(&s.x, leaders[0], &followers))
        .unzip())
}

/// `V = M - m` at each update instant `t0 + tau*eta` covered by the trace,
/// with `m`, `M` taken over normal followers and the normal-leader value.
pub fn lyapunov_series(tr: &Trace) -> Result<Vec<(u64, f64)>> {
    let (leaders, followers) = normal_sets(&tr.scenario)?;
    let eta = tr.scenario.params.eta as usize;
    Ok(tr
        .snapshots
        .iter()
        .step_by(eta)
        .enumerate()
        .map(|(tau, s)| {
            let (lo, hi) = spread(&s.x, leaders[0], &followers);
            (tau as u64, hi - lo)
        })
        .collect())
}

/// `ceil(v0 / epsilon) + 1`.
pub fn bound_from(v0: f64, epsilon: f64) -> u64 {
    (v0 / epsilon).ceil() as u64 + 1
}

/// Number of periods `T` after which the bounded branch tracks exactly,
/// evaluated from the scenario's initial states. `None` when the reference
/// steps leave no positive margin under the input bound.
pub fn finite_time_bound(sc: &Scenario) -> Result<Option<u64>> {
    let u = sc
        .params
        .u_max
        .ok_or_else(|| Error::InvalidArgument("finite-time bound needs bounded inputs".into()))?;
    let (leaders, followers) = normal_sets(sc)?;
    let Some(eps) = sc.signal.input_margin(u, sc.tau_max()) else {
        return Ok(None);
    };
    let x0 = sc.initial_states()?;
    let (lo, hi) = spread(&x0, leaders[0], &followers);
    Ok(Some(bound_from(hi - lo, eps)))
}

/// Least `t` after which `e` stays within `tol` through the end of the trace.
pub fn convergence_time(tr: &Trace, e: &[f64], tol: f64) -> Option<i64> {
    let last_bad = e.iter().rposition(|&v| v > tol);
    match last_bad {
        None => tr.snapshots.first().map(|s| s.t),
        Some(k) if k + 1 < e.len() => Some(tr.snapshots[k + 1].t),
        Some(_) => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Monotonicity {
    pub holds: bool,
    /// First `t` with `e(t+1) > e(t) + tol`.
    pub first_violation: Option<i64>,
}

pub fn monotonicity_check(tr: &Trace, tol: f64) -> Result<Monotonicity> {
    let e = error_series(tr)?;
    let first = e
        .windows(2)
        .position(|w| w[1] > w[0] + tol)
        .map(|k| tr.snapshots[k].t);
    Ok(Monotonicity {
        holds: first.is_none(),
        first_violation: first,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::engine::{run, InitialStates, Snapshot};
    use crate::graph::{agent_set, AgentId, Digraph};
    use crate::protocol::{Misbehavior, ProtocolParams};
    use crate::signal::ReferenceSignal;

    fn line_scenario(initial: Vec<f64>, u_max: Option<f64>) -> Scenario {
        Scenario {
            graph: Digraph::from_edges(3, [(0, 1), (0, 2)]).unwrap(),
            leaders: agent_set([0]),
            adversaries: BTreeMap::new(),
            params: ProtocolParams {
                f: 0,
                eta: 3,
                t0: 0,
                u_max,
            },
            signal: ReferenceSignal::Constant { value: 2.0 },
            initial: InitialStates::Explicit { values: initial },
            horizon: 30,
            seed: 0,
        }
    }

    fn with_states(sc: Scenario, xs: Vec<Vec<f64>>) -> Trace {
        let mut tr = run(&sc).unwrap();
        tr.snapshots = xs
            .into_iter()
            .enumerate()
            .map(|(t, x)| Snapshot {
                t: t as i64,
                u: vec![0.0; x.len()],
                in_c: vec![false; x.len()],
                accepted: vec![None; x.len()],
                x,
            })
            .collect();
        tr
    }

    #[test]
    fn error_examples() {
        let sc = line_scenario(vec![0.0, 0.0], None);
        let tr = with_states(sc, vec![vec![2.0, 2.0, 2.0], vec![2.0, 5.0, 2.0]]);
        assert_eq!(error_series(&tr).unwrap(), vec![0.0, 3.0]);
    }

    #[test]
    fn spread_example() {
        let sc = line_scenario(vec![0.0, 0.0], None);
        // Followers at -1 and 0, leader at 3.
        let tr = with_states(sc, vec![vec![3.0, -1.0, 0.0]]);
        assert_eq!(lyapunov_series(&tr).unwrap(), vec![(0, 4.0)]);
    }

    #[test]
    fn undefined_without_normal_followers() {
        let mut sc = line_scenario(vec![0.0, 0.0], None);
        for i in [1, 2] {
            sc.adversaries
                .insert(AgentId(i), Misbehavior::FaultyFixed { value: 1.0 });
        }
        let tr = run(&sc).unwrap();
        assert!(matches!(error_series(&tr), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(bound_from(0.0, 0.5), 1);
        assert_eq!(bound_from(10.0, 4.0), 4);
        assert_eq!(bound_from(8.0, 4.0), 3);
    }

    #[test]
    fn bound_from_scenario() {
        let sc = line_scenario(vec![-3.0, 7.0], Some(1.5));
        // V0 = 7 - (-3) = 10 with leader at 2, epsilon = 1.5.
        assert_eq!(finite_time_bound(&sc).unwrap(), Some(8));
        let mut sc = sc;
        sc.signal = ReferenceSignal::Ramp {
            slope: 1.5,
            intercept: 0.0,
        };
        assert_eq!(finite_time_bound(&sc).unwrap(), None);
        assert!(finite_time_bound(&line_scenario(vec![0.0, 0.0], None)).is_err());
    }

    #[test]
    fn bounded_line_converges_within_bound() {
        let sc = line_scenario(vec![-3.0, 7.0], Some(1.5));
        let tr = run(&sc).unwrap();
        let m = MetricSeries::from_trace(&tr).unwrap();
        let bound = m.bound_periods.unwrap() as i64 * 3;
        assert!(m.convergence_time.unwrap() <= bound);
        assert!(monotonicity_check(&tr, EXACT_TOL).unwrap().holds);
        for (tau, v) in &m.v {
            let e = m.e[*tau as usize * 3];
            assert_eq!(*v <= EXACT_TOL, e <= EXACT_TOL);
        }
    }

    #[test]
    fn monotonicity_reports_first_violation() {
        let sc = line_scenario(vec![0.0, 0.0], None);
        let tr = with_states(
            sc,
            vec![
                vec![2.0, 4.0, 2.0],
                vec![2.0, 3.0, 2.0],
                vec![2.0, 6.0, 2.0],
            ],
        );
        let m = monotonicity_check(&tr, EXACT_TOL).unwrap();
        assert!(!m.holds);
        assert_eq!(m.first_violation, Some(1));
    }

    #[test]
    fn converged_constant_trace() {
        let sc = line_scenario(vec![2.0, 2.0], None);
        let tr = run(&sc).unwrap();
        assert!(monotonicity_check(&tr, EXACT_TOL).unwrap().holds);
        let e = error_series(&tr).unwrap();
        assert_eq!(convergence_time(&tr, &e, EXACT_TOL), Some(0));
    }
}
