//! Per-agent transition rules for the multi-source resilient propagation
//! protocol.
//!
//! Time is split into periods of `eta` communication steps. Within period
//! `tau` (steps `t0 + (tau-1)*eta .. t0 + tau*eta`) normal leaders broadcast
//! the next reference value `f(tau)`; a normal follower accepts a value once
//! it hears it from at least `f + 1` distinct in-neighbors, sets its input
//! toward it and relays it for the rest of the period. States only move on
//! the last step of a period.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AgentId;
use crate::rng::Stream;
use crate::signal::ReferenceSignal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Leader,
    Follower,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Leader => "leader",
            Role::Follower => "follower",
        }
    }
}

/// Where a misbehaving agent gets its values from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueSource {
    /// Fresh uniform draw on `[lo, hi]` from the agent's own stream.
    Uniform { lo: f64, hi: f64 },
    /// `values[(t - t0) mod len]`.
    Table { values: Vec<f64> },
}

impl Default for ValueSource {
    fn default() -> Self {
        ValueSource::Uniform {
            lo: -50.0,
            hi: 50.0,
        }
    }
}

impl ValueSource {
    pub fn validate(&self) -> Result<()> {
        match self {
            ValueSource::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                Err(Error::InvalidArgument(format!(
                    "bad uniform interval [{lo}, {hi}]"
                )))
            }
            ValueSource::Table { values } if values.is_empty() => {
                Err(Error::InvalidArgument("value table is empty".into()))
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, step: u64, rng: &mut Stream) -> f64 {
        match self {
            ValueSource::Uniform { lo, hi } => rng.random_range(*lo..=*hi),
            ValueSource::Table { values } => values[(step % values.len() as u64) as usize],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Misbehavior {
    /// One value per step, identical on every outgoing link; state follows it.
    Malicious { source: ValueSource },
    /// Independent value per outgoing link per step.
    Byzantine { source: ValueSource },
    /// Stuck at a constant, which it also sends.
    FaultyFixed { value: f64 },
    /// State overwritten from the source off-protocol; broadcasts that state.
    StateHijack { source: ValueSource },
}

impl Misbehavior {
    pub fn tag(&self) -> &'static str {
        match self {
            Misbehavior::Malicious { .. } => "malicious",
            Misbehavior::Byzantine { .. } => "byzantine",
            Misbehavior::FaultyFixed { .. } => "faulty_fixed",
            Misbehavior::StateHijack { .. } => "state_hijack",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Misbehavior::Malicious { source }
            | Misbehavior::Byzantine { source }
            | Misbehavior::StateHijack { source } => source.validate(),
            Misbehavior::FaultyFixed { value } if !value.is_finite() => {
                Err(Error::InvalidArgument("faulty value must be finite".into()))
            }
            Misbehavior::FaultyFixed { .. } => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Behavior {
    NormalLeader,
    NormalFollower,
    Misbehaving(Misbehavior),
}

impl Behavior {
    pub fn tag(&self) -> &'static str {
        match self {
            Behavior::NormalLeader => "normal_leader",
            Behavior::NormalFollower => "normal_follower",
            Behavior::Misbehaving(m) => m.tag(),
        }
    }

    pub fn is_normal(&self) -> bool {
        !matches!(self, Behavior::Misbehaving(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    /// Tolerated number of misbehaving in-neighbors.
    pub f: usize,
    /// Communication steps per state update.
    pub eta: u64,
    #[serde(default)]
    pub t0: i64,
    /// Input bound; `None` runs the unbounded branch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if self.eta < 1 {
            return Err(Error::InvalidArgument("eta must be at least 1".into()));
        }
        if let Some(u) = self.u_max {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "input bound must be positive, got {u}"
                )));
            }
        }
        Ok(())
    }

    fn elapsed(&self, t: i64) -> u64 {
        debug_assert!(t >= self.t0, "time {t} precedes t0 {}", self.t0);
        (t - self.t0) as u64
    }

    /// Position of `t` inside its period, in `[0, eta)`.
    #[inline]
    pub fn offset(&self, t: i64) -> u64 {
        self.elapsed(t) % self.eta
    }

    /// Index `tau'` of the next state update, `floor((t - t0) / eta) + 1`.
    #[inline]
    pub fn next_update_index(&self, t: i64) -> u64 {
        self.elapsed(t) / self.eta + 1
    }

    /// True on `t - t0 = tau*eta - 1`, the only step whose input moves state.
    #[inline]
    pub fn is_update_step(&self, t: i64) -> bool {
        self.offset(t) == self.eta - 1
    }

    #[inline]
    pub fn threshold(&self) -> usize {
        self.f + 1
    }

    /// Control input toward `target` from `x`, saturated when bounded.
    pub fn input_toward(&self, target: f64, x: f64) -> f64 {
        let d = target - x;
        match self.u_max {
            None => d,
            // Same value as d*u/max(u,|d|), without the rounding of the
            // multiply-divide: exactly d inside the bound, exactly ±u outside.
            Some(u) if d.abs() <= u => d,
            Some(u) => u.copysign(d),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Message {
    pub t: i64,
    pub sender: usize,
    pub receiver: usize,
    pub value: f64,
}

/// Something that cannot happen when the convergence hypotheses hold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Violation {
    /// Several distinct values reached the acceptance threshold at once; the
    /// smallest was taken.
    MultipleCandidates { agent: usize, values: Vec<f64> },
    /// A qualifying value differed from the one already latched this period.
    LatchConflict {
        agent: usize,
        latched: f64,
        offered: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReceiveOutcome {
    /// Value newly latched at this step.
    pub accepted: Option<f64>,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub id: AgentId,
    pub role: Role,
    pub x: f64,
    pub u: f64,
    pub accepted: Option<f64>,
    pub in_c: bool,
    pub behavior: Behavior,
}

impl AgentState {
    pub fn new(id: AgentId, role: Role, behavior: Behavior, x: f64) -> Self {
        AgentState {
            id,
            role,
            x,
            u: 0.0,
            accepted: None,
            in_c: false,
            behavior,
        }
    }

    /// Normal leader at step `t`: returns the broadcast `f(tau')` and moves
    /// the state to `f(tau)` when `t` is the last step of period `tau`.
    pub fn leader_step(
        &mut self,
        t: i64,
        p: &ProtocolParams,
        sig: &ReferenceSignal,
    ) -> Result<f64> {
        assert!(
            self.behavior == Behavior::NormalLeader,
            "leader_step on {} agent {}",
            self.behavior.tag(),
            self.id
        );
        let tau_next = p.next_update_index(t);
        let broadcast = sig.eval(tau_next)?;
        if p.is_update_step(t) {
            self.x = broadcast;
        }
        Ok(broadcast)
    }

    /// Normal follower reading the inbox delivered from step `t - 1`.
    ///
    /// Acceptance is only evaluated from the second step of a period on. The
    /// first acceptance in a period latches; later qualifying values are
    /// ignored, with a [`Violation`] recorded if they differ.
    pub fn follower_receive(
        &mut self,
        inbox: &[Message],
        t: i64,
        p: &ProtocolParams,
    ) -> ReceiveOutcome {
        assert!(
            self.behavior == Behavior::NormalFollower,
            "follower_receive on {} agent {}",
            self.behavior.tag(),
            self.id
        );
        let mut outcome = ReceiveOutcome::default();
        if p.offset(t) == 0 {
            return outcome;
        }
        debug_assert!(inbox
            .iter()
            .all(|m| m.t == t - 1 && m.receiver == self.id.0));

        let mut support: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for m in inbox {
            let senders = support.entry(m.value.to_bits()).or_default();
            if !senders.contains(&m.sender) {
                senders.push(m.sender);
            }
        }
        let mut candidates: Vec<f64> = support
            .into_iter()
            .filter(|(_, senders)| senders.len() >= p.threshold())
            .map(|(bits, _)| f64::from_bits(bits))
            .collect();
        if candidates.is_empty() {
            return outcome;
        }
        candidates.sort_by(f64::total_cmp);
        if candidates.len() > 1 {
            outcome.violations.push(Violation::MultipleCandidates {
                agent: self.id.0,
                values: candidates.clone(),
            });
        }
        let c = candidates[0];

        match self.accepted {
            Some(latched) => {
                if latched.to_bits() != c.to_bits() {
                    outcome.violations.push(Violation::LatchConflict {
                        agent: self.id.0,
                        latched,
                        offered: c,
                    });
                }
            }
            None => {
                self.accepted = Some(c);
                self.in_c = true;
                self.u = p.input_toward(c, self.x);
                outcome.accepted = Some(c);
            }
        }
        outcome
    }

    /// Value a normal follower relays at this step, if it holds one.
    pub fn follower_broadcast(&self) -> Option<f64> {
        if self.in_c {
            self.accepted
        } else {
            None
        }
    }

    /// Applies the follower dynamics for step `t`, producing `x(t+1)`. On the
    /// update step the state moves by the held input and the latch clears
    /// ready for the next period; `u` is held across the boundary.
    pub fn follower_state_update(&mut self, t: i64, p: &ProtocolParams) {
        if p.is_update_step(t) {
            self.x += self.u;
            self.accepted = None;
            self.in_c = false;
        }
    }

    /// Misbehaving agent at step `t`: returns `(receiver, value)` for each
    /// out-neighbor in `receivers` and sets its own state for `t + 1`.
    pub fn adversary_step(
        &mut self,
        t: i64,
        p: &ProtocolParams,
        receivers: &[usize],
        rng: &mut Stream,
    ) -> Vec<(usize, f64)> {
        let Behavior::Misbehaving(m) = &self.behavior else {
            panic!("adversary_step on normal agent {}", self.id);
        };
        let step = (t - p.t0) as u64;
        match m {
            Misbehavior::Malicious { source } => {
                let v = source.draw(step, rng);
                self.x = v;
                receivers.iter().map(|&r| (r, v)).collect()
            }
            Misbehavior::Byzantine { source } => {
                let out: Vec<(usize, f64)> = receivers
                    .iter()
                    .map(|&r| (r, source.draw(step, rng)))
                    .collect();
                self.x = match out.first() {
                    Some(&(_, v)) => v,
                    None => source.draw(step, rng),
                };
                out
            }
            Misbehavior::FaultyFixed { value } => {
                self.x = *value;
                receivers.iter().map(|&r| (r, *value)).collect()
            }
            Misbehavior::StateHijack { source } => {
                self.x = source.draw(step, rng);
                receivers.iter().map(|&r| (r, self.x)).collect()
            }
        }
    }
}
