#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use msrpa::engine::{self, InitialStates, Scenario, Trace};
use msrpa::graph::{self, AgentId, AgentSet, Digraph};
use msrpa::protocol::{Misbehavior, ProtocolParams, ValueSource};
use msrpa::scenario_file::load_scenario;
use msrpa::ReferenceSignal;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn bundled(name: &str) -> Scenario {
    load_scenario(Path::new(name)).unwrap().scenario
}

/// Random scenario that passes every hypothesis check and has at least one
/// normal leader and one normal follower. Graphs are undirected
/// circulants (leaders on a consecutive block) or dense random digraphs;
/// adversaries are an F-local mix of malicious and byzantine agents, some of
/// which collude on a shared false value.
pub fn random_valid_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe);
    loop {
        let sc = random_candidate(&mut rng, seed);
        if let Ok(report) = engine::validate(&sc) {
            let populated = !sc.normal_leaders().is_empty() && !sc.normal_followers().is_empty();
            if report.all_passed() && populated {
                return sc;
            }
        }
    }
}

/// One unfiltered draw from the same generator; may violate any hypothesis.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe);
    random_candidate(&mut rng, seed)
}

fn random_candidate(rng: &mut ChaCha8Rng, seed: u64) -> Scenario {
    let f = rng.random_range(1..=2usize);
    let r = 2 * f + 1;
    let (graph, leaders) = if rng.random_bool(0.6) {
        let n = rng.random_range(2 * r + 1..=16);
        let k = rng.random_range(r..=(n - 1) / 2);
        let g = graph::k_circulant(n, k, true).unwrap();
        let start = rng.random_range(0..n);
        let size = rng.random_range(r..=k);
        let leaders: AgentSet = (0..size).map(|m| AgentId((start + m) % n)).collect();
        (g, leaders)
    } else {
        let n = rng.random_range(r + 2..=12);
        let g = Digraph::gnp(n, rng.random_range(0.75..0.95), rng.random());
        let size = rng.random_range(r..=n - 1);
        let all: Vec<usize> = (0..n).collect();
        let leaders: AgentSet = all
            .choose_multiple(rng, size)
            .map(|&i| AgentId(i))
            .collect();
        (g, leaders)
    };
    let n = graph.n();

    let count = rng.random_range(0..=2 * f);
    let all: Vec<usize> = (0..n).collect();
    let picked: Vec<usize> = all.choose_multiple(rng, count).copied().collect();
    let lie: f64 = rng.random_range(-30.0..30.0);
    let adversaries: BTreeMap<AgentId, Misbehavior> = picked
        .into_iter()
        .map(|i| {
            let m = match rng.random_range(0..3) {
                0 => Misbehavior::Malicious {
                    source: ValueSource::default(),
                },
                1 => Misbehavior::Byzantine {
                    source: ValueSource::default(),
                },
                _ => Misbehavior::Malicious {
                    source: ValueSource::Table { values: vec![lie] },
                },
            };
            (AgentId(i), m)
        })
        .collect();

    let followers = n - leaders.len();
    let eta = followers as u64 + 1 + rng.random_range(0..3);
    let signal = ReferenceSignal::Sinusoid {
        amplitude: rng.random_range(1.0..20.0),
        rate_over_pi: rng.random_range(0.3..2.0),
    };
    let u_max = rng
        .random_bool(0.5)
        .then(|| signal.max_step_closed_form().unwrap() + rng.random_range(0.5..5.0));
    Scenario {
        graph,
        leaders,
        adversaries,
        params: ProtocolParams {
            f,
            eta,
            t0: rng.random_range(-5..5),
            u_max,
        },
        signal,
        initial: InitialStates::Uniform {
            lo: -25.0,
            hi: 25.0,
        },
        horizon: 12 * eta,
        seed,
    }
}

/// Wavefront check on a validate-passing trace. Returns the
/// largest acceptance offset seen, or a description of the first breach.
pub fn wavefront(tr: &Trace) -> Result<u64, String> {
    let sc = &tr.scenario;
    let p = &sc.params;
    let followers = sc.normal_followers();
    let periods = sc.horizon / p.eta;
    let mut latest = 0;
    for tau in 1..=periods {
        let start = p.t0 + ((tau - 1) * p.eta) as i64;
        for &i in &followers {
            let acc = tr
                .acceptances()
                .find(|a| a.agent == i && a.period == tau)
                .ok_or_else(|| format!("agent {i} never latched in period {tau}"))?;
            if acc.t < start || acc.offset >= p.eta {
                return Err(format!("agent {i} latched outside period {tau}"));
            }
            latest = latest.max(acc.offset);
        }
        if latest > followers.len() as u64 {
            return Err(format!(
                "period {tau}: latest latch offset {latest} > |S_f^N| = {}",
                followers.len()
            ));
        }
        // Input in force on the update step is the step toward f(tau).
        let update = &tr.snapshots[(tau * p.eta - 1) as usize];
        let target = sc.signal.eval(tau).unwrap();
        for &i in &followers {
            let want = p.input_toward(target, update.x[i]);
            if update.u[i] != want {
                return Err(format!(
                    "period {tau}: agent {i} holds u = {}, expected {want}",
                    update.u[i]
                ));
            }
        }
    }
    Ok(latest)
}

/// Every acceptance latches the reference value of its own period.
pub fn threshold_safe(tr: &Trace) -> Result<(), String> {
    let sc = &tr.scenario;
    if let Some(v) = tr.violations().next() {
        return Err(format!("assumption violation: {v:?}"));
    }
    for a in tr.acceptances() {
        let want = sc.signal.eval(a.period).unwrap();
        if a.value.to_bits() != want.to_bits() {
            return Err(format!(
                "agent {} latched {} at t={}, expected f({}) = {want}",
                a.agent, a.value, a.t, a.period
            ));
        }
    }
    Ok(())
}
