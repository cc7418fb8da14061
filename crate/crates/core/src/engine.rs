//! Synchronous round scheduler and trace capture.
//!
//! Each step `t` runs, in order: record `x(t)`; normal leaders broadcast
//! `f(tau')`; normal followers read the messages sent at `t - 1` and may
//! latch; latched followers relay; misbehaving agents send; finally every
//! agent computes `x(t + 1)`. Messages sent at `t` are read at `t + 1`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, AgentId, AgentSet, Digraph};
use crate::protocol::{
    AgentState, Behavior, Message, Misbehavior, ProtocolParams, Role, Violation,
};
use crate::rng::{agent_stream, init_stream};
use crate::signal::ReferenceSignal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStates {
    /// Non-leaders draw uniformly on `[lo, hi]`, in id order, from the init stream.
    Uniform { lo: f64, hi: f64 },
    /// One value per non-leader, in id order.
    Explicit { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub graph: Digraph,
    pub leaders: AgentSet,
    pub adversaries: BTreeMap<AgentId, Misbehavior>,
    pub params: ProtocolParams,
    pub signal: ReferenceSignal,
    pub initial: InitialStates,
    pub horizon: u64,
    pub seed: u64,
}

impl Scenario {
    /// Structural checks: valid indices, a leader/follower partition, sane
    /// parameters. Hypothesis checks live in [`validate`].
    pub fn check(&self) -> Result<()> {
        let n = self.graph.n();
        for &l in &self.leaders {
            if l.0 >= n {
                return Err(Error::schema(
                    "roles.leaders",
                    format!("agent {l} out of range (n = {n})"),
                ));
            }
        }
        for (a, m) in &self.adversaries {
            if a.0 >= n {
                return Err(Error::schema(
                    "adversaries",
                    format!("agent {a} out of range (n = {n})"),
                ));
            }
            m.validate()
                .map_err(|e| Error::schema(format!("adversaries.{a}"), e.to_string()))?;
        }
        self.params
            .validate()
            .map_err(|e| Error::schema("params", e.to_string()))?;
        if self.horizon < self.params.eta {
            return Err(Error::schema(
                "horizon",
                format!(
                    "horizon {} shorter than eta {}",
                    self.horizon, self.params.eta
                ),
            ));
        }
        match &self.initial {
            InitialStates::Uniform { lo, hi }
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) =>
            {
                return Err(Error::schema(
                    "initial",
                    format!("bad interval [{lo}, {hi}]"),
                ));
            }
            InitialStates::Explicit { values } if values.len() != self.followers().len() => {
                return Err(Error::schema(
                    "initial.values",
                    format!(
                        "expected {} follower values, got {}",
                        self.followers().len(),
                        values.len()
                    ),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn followers(&self) -> AgentSet {
        self.graph
            .agents()
            .filter(|a| !self.leaders.contains(a))
            .collect()
    }

    pub fn adversary_set(&self) -> AgentSet {
        self.adversaries.keys().copied().collect()
    }

    pub fn role(&self, a: AgentId) -> Role {
        if self.leaders.contains(&a) {
            Role::Leader
        } else {
            Role::Follower
        }
    }

    pub fn behavior(&self, a: AgentId) -> Behavior {
        match (self.adversaries.get(&a), self.role(a)) {
            (Some(m), _) => Behavior::Misbehaving(m.clone()),
            (None, Role::Leader) => Behavior::NormalLeader,
            (None, Role::Follower) => Behavior::NormalFollower,
        }
    }

    pub fn normal_leaders(&self) -> Vec<usize> {
        self.leaders
            .iter()
            .filter(|a| !self.adversaries.contains_key(a))
            .map(|a| a.0)
            .collect()
    }

    pub fn normal_followers(&self) -> Vec<usize> {
        self.followers()
            .into_iter()
            .filter(|a| !self.adversaries.contains_key(a))
            .map(|a| a.0)
            .collect()
    }

    /// `x(t0)` for every agent. Leaders, misbehaving or not, start at `f(0)`.
    pub fn initial_states(&self) -> Result<Vec<f64>> {
        let start = self.signal.eval(0)?;
        let mut x = vec![start; self.n()];
        match &self.initial {
            InitialStates::Uniform { lo, hi } => {
                use rand::Rng;
                let mut rng = init_stream(self.seed);
                for a in self.followers() {
                    x[a.0] = rng.random_range(*lo..=*hi);
                }
            }
            InitialStates::Explicit { values } => {
                for (a, &v) in self.followers().into_iter().zip(values) {
                    x[a.0] = v;
                }
            }
        }
        Ok(x)
    }

    /// Largest reference index the run evaluates.
    pub fn tau_max(&self) -> u64 {
        (self.horizon - 1) / self.params.eta + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// Strong (2F+1)-robustness w.r.t. the leader set.
    Robustness,
    /// Misbehaving set is F-local.
    FLocal,
    /// eta > |S_f|.
    CommunicationRate,
    /// Bounded inputs only: reference increments stay below the bound by a
    /// positive margin.
    InputMargin,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::Robustness => "strong (2F+1)-robustness w.r.t. leaders",
            Hypothesis::FLocal => "misbehaving set is F-local",
            Hypothesis::CommunicationRate => "eta > |S_f|",
            Hypothesis::InputMargin => "reference step margin epsilon > 0",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
    /// Margin for the bounded branch when it is positive.
    pub epsilon: Option<f64>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn passed(&self, h: Hypothesis) -> Option<bool> {
        self.checks
            .iter()
            .find(|c| c.hypothesis == h)
            .map(|c| c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {}: {}",
                if c.passed { "pass" } else { "FAIL" },
                c.hypothesis,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Checks the convergence hypotheses. Failures are reported, not raised.
pub fn validate(sc: &Scenario) -> Result<ValidationReport> {
    sc.check()?;
    let f = sc.params.f;
    let r = 2 * f + 1;
    let mut checks = Vec::new();

    let robust = if sc.leaders.is_empty() {
        HypothesisCheck {
            hypothesis: Hypothesis::Robustness,
            passed: false,
            detail: "leader set is empty".into(),
        }
    } else {
        let cert = graph::strongly_robust_wrt(&sc.graph, &sc.leaders, r)?;
        HypothesisCheck {
            hypothesis: Hypothesis::Robustness,
            passed: cert.holds,
            detail: if cert.holds {
                format!("r = {r} holds after {} peeling rounds", cert.rounds())
            } else {
                format!("r = {r} fails, stalled set {:?}", ids(&cert.witness))
            },
        }
    };
    checks.push(robust);

    let adversaries = sc.adversary_set();
    let local = graph::f_local_violation(&sc.graph, &adversaries, f)?;
    checks.push(HypothesisCheck {
        hypothesis: Hypothesis::FLocal,
        passed: local.is_none(),
        detail: match local {
            None => format!("{} misbehaving agents, F = {f}", adversaries.len()),
            Some((i, count)) => format!("agent {i} has {count} misbehaving in-neighbors > F = {f}"),
        },
    });

    let followers = sc.followers().len() as u64;
    checks.push(HypothesisCheck {
        hypothesis: Hypothesis::CommunicationRate,
        passed: sc.params.eta > followers,
        detail: format!("eta = {}, |S_f| = {followers}", sc.params.eta),
    });

    let mut epsilon = None;
    if let Some(u) = sc.params.u_max {
        let step = sc.signal.max_step(sc.tau_max());
        epsilon = sc.signal.input_margin(u, sc.tau_max());
        checks.push(HypothesisCheck {
            hypothesis: Hypothesis::InputMargin,
            passed: epsilon.is_some(),
            detail: format!("u_max = {u}, max reference step = {step}"),
        });
    }

    Ok(ValidationReport { checks, epsilon })
}

fn ids(set: &AgentSet) -> Vec<usize> {
    set.iter().map(|a| a.0).collect()
}

/// States, inputs and latches at one step. `x` is `x(t)`; `u` and the latch
/// are their values after the step's communication phases.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: i64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub in_c: Vec<bool>,
    pub accepted: Vec<Option<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Acceptance {
    pub t: i64,
    pub agent: usize,
    pub value: f64,
    /// Reference index announced in this period.
    pub period: u64,
    /// Step within the period, in `[1, eta)`.
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Round {
    pub t: i64,
    pub messages: Vec<Message>,
    pub acceptances: Vec<Acceptance>,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub scenario: Scenario,
    pub report: ValidationReport,
    /// `horizon + 1` snapshots, `t0 ..= t0 + horizon`.
    pub snapshots: Vec<Snapshot>,
    /// `horizon` rounds, `t0 .. t0 + horizon`.
    pub rounds: Vec<Round>,
}

impl Trace {
    pub fn roles(&self) -> Vec<Role> {
        self.scenario
            .graph
            .agents()
            .map(|a| self.scenario.role(a))
            .collect()
    }

    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.rounds.iter().flat_map(|r| r.violations.iter())
    }

    pub fn acceptances(&self) -> impl Iterator<Item = &Acceptance> {
        self.rounds.iter().flat_map(|r| r.acceptances.iter())
    }

    /// Equality with floats compared by bit pattern.
    pub fn bitwise_eq(&self, other: &Trace) -> bool {
        fn same(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        fn same_opt(a: &[Option<f64>], b: &[Option<f64>]) -> bool {
            a.len() == b.len()
                && a.iter()
                    .zip(b)
                    .all(|(x, y)| x.map(f64::to_bits) == y.map(f64::to_bits))
        }
        self.snapshots.len() == other.snapshots.len()
            && self.rounds.len() == other.rounds.len()
            && self.snapshots.iter().zip(&other.snapshots).all(|(a, b)| {
                a.t == b.t
                    && same(&a.x, &b.x)
                    && same(&a.u, &b.u)
                    && a.in_c == b.in_c
                    && same_opt(&a.accepted, &b.accepted)
            })
            && self.rounds.iter().zip(&other.rounds).all(|(a, b)| {
                a.t == b.t
                    && a.messages.len() == b.messages.len()
                    && a.messages.iter().zip(&b.messages).all(|(m, k)| {
                        m.t == k.t
                            && m.sender == k.sender
                            && m.receiver == k.receiver
                            && m.value.to_bits() == k.value.to_bits()
                    })
                    && a.acceptances == b.acceptances
                    && a.violations == b.violations
            })
    }
}

/// Simulates `sc.horizon` steps from `t0`.
pub fn run(sc: &Scenario) -> Result<Trace> {
    let report = validate(sc)?;
    let n = sc.n();
    let p = &sc.params;
    let x0 = sc.initial_states()?;

    let mut agents: Vec<AgentState> = sc
        .graph
        .agents()
        .map(|a| AgentState::new(a, sc.role(a), sc.behavior(a), x0[a.0]))
        .collect();
    let mut streams: Vec<_> = agents
        .iter()
        .map(|a| (!a.behavior.is_normal()).then(|| agent_stream(sc.seed, a.id.0)))
        .collect();

    let mut snapshots = Vec::with_capacity(sc.horizon as usize + 1);
    let mut rounds = Vec::with_capacity(sc.horizon as usize);
    let mut inbox: Vec<Vec<Message>> = vec![Vec::new(); n];

    for step in 0..sc.horizon {
        let t = p.t0 + step as i64;
        let x_now: Vec<f64> = agents.iter().map(|a| a.x).collect();
        let mut messages = Vec::new();
        let mut acceptances = Vec::new();
        let mut violations = Vec::new();
        let send = |messages: &mut Vec<Message>, sender: usize, receiver: usize, value: f64| {
            messages.push(Message {
                t,
                sender,
                receiver,
                value,
            })
        };

        // Leaders announce the next reference value. Their state for t+1 is
        // set here too; x(t) was captured above.
        for a in agents
            .iter_mut()
            .filter(|a| a.behavior == Behavior::NormalLeader)
        {
            let value = a.leader_step(t, p, &sc.signal)?;
            for &j in sc.graph.out_slice(a.id.0) {
                send(&mut messages, a.id.0, j, value);
            }
        }

        for a in agents
            .iter_mut()
            .filter(|a| a.behavior == Behavior::NormalFollower)
        {
            let outcome = a.follower_receive(&inbox[a.id.0], t, p);
            if let Some(value) = outcome.accepted {
                acceptances.push(Acceptance {
                    t,
                    agent: a.id.0,
                    value,
                    period: p.next_update_index(t),
                    offset: p.offset(t),
                });
            }
            violations.extend(outcome.violations);
        }

        for a in agents
            .iter()
            .filter(|a| a.behavior == Behavior::NormalFollower)
        {
            if let Some(value) = a.follower_broadcast() {
                for &j in sc.graph.out_slice(a.id.0) {
                    send(&mut messages, a.id.0, j, value);
                }
            }
        }

        for a in agents.iter_mut().filter(|a| !a.behavior.is_normal()) {
            let rng = streams[a.id.0]
                .as_mut()
                .expect("misbehaving agents own a stream");
            for (j, value) in a.adversary_step(t, p, sc.graph.out_slice(a.id.0), rng) {
                send(&mut messages, a.id.0, j, value);
            }
        }

        snapshots.push(Snapshot {
            t,
            x: x_now,
            u: agents.iter().map(|a| a.u).collect(),
            in_c: agents.iter().map(|a| a.in_c).collect(),
            accepted: agents.iter().map(|a| a.accepted).collect(),
        });

        for a in agents
            .iter_mut()
            .filter(|a| a.behavior == Behavior::NormalFollower)
        {
            a.follower_state_update(t, p);
        }

        for b in inbox.iter_mut() {
            b.clear();
        }
        for m in &messages {
            inbox[m.receiver].push(*m);
        }
        rounds.push(Round {
            t,
            messages,
            acceptances,
            violations,
        });
    }

    snapshots.push(Snapshot {
        t: p.t0 + sc.horizon as i64,
        x: agents.iter().map(|a| a.x).collect(),
        u: agents.iter().map(|a| a.u).collect(),
        in_c: agents.iter().map(|a| a.in_c).collect(),
        accepted: agents.iter().map(|a| a.accepted).collect(),
    });

    Ok(Trace {
        scenario: sc.clone(),
        report,
        snapshots,
        rounds,
    })
}

/// Runs the scenario twice and compares the traces bit for bit.
pub fn replay_check(sc: &Scenario) -> Result<bool> {
    Ok(run(sc)?.bitwise_eq(&run(sc)?))
}
