//! Browser-facing bindings: a thin string-in, JSON-out layer over the core
//! library, compiled to WebAssembly for the demo page in `www/`.
//!
//! Build with `wasm-pack build crates/web --target web --out-dir www/pkg`
//! and serve `crates/web/www`. The crate also compiles natively so the
//! bindings stay under ordinary `cargo test`.

use relent::game::{
    is_dominant, is_ess, is_symmetric_nash, is_thomas_ess, replicator_field, FitnessModel,
    GameMatrix, VerdictStatus, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_TOL,
};
use relent::info::{population_relative_information_raw, relative_information_raw, ProbDist};
use relent::markov::{hamiltonian, master_field, steady_states, MarkovProcess};
use relent::ode::{integrate, IntegratorConfig, Monitor};
use relent::output::trajectory_json;
use relent::reaction::{conservation_laws, rate_field, ReactionNetwork};
use wasm_bindgen::prelude::wasm_bindgen;

fn parse_csv(text: &str, what: &str) -> Result<Vec<f64>, String> {
    let values: Result<Vec<f64>, _> =
        text.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("{what} must be a comma-separated list of numbers")),
    }
}

fn check_dim(got: usize, expected: usize, what: &str) -> Result<(), String> {
    if got == expected {
        Ok(())
    } else {
        Err(format!("{what} has {got} entries but the model needs {expected}"))
    }
}

fn json_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "\"nan\"".to_string()
    } else if x > 0.0 {
        "\"inf\"".to_string()
    } else {
        "\"-inf\"".to_string()
    }
}

fn json_numbers(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|&v| json_f64(v)).collect();
    format!("[{}]", parts.join(","))
}

fn json_strings(values: &[String]) -> String {
    let parts: Vec<String> = values.iter().map(|s| format!("{s:?}")).collect();
    format!("[{}]", parts.join(","))
}

/// Integrates a model over `[0, t_end]` and returns the trajectory as JSON
/// with `times`, per-component `states`, and derived `channels`.
///
/// `kind` selects the format and its dynamics: `mat` runs the replicator
/// flow of a payoff matrix, `mk` the master equation of a Markov process,
/// `rn` the mass-action rate equation of a reaction network. A nonempty
/// `reference_csv` adds the two divergence channels against that point;
/// reaction networks also report one channel per conservation law.
#[wasm_bindgen]
pub fn simulate(
    kind: &str,
    model_text: &str,
    initial_csv: &str,
    t_end: f64,
    reference_csv: &str,
) -> Result<String, String> {
    let config = IntegratorConfig::default();
    let initial = parse_csv(initial_csv, "initial state")?;
    let reference = if reference_csv.trim().is_empty() {
        None
    } else {
        Some(parse_csv(reference_csv, "reference state")?)
    };

    let (traj, names) = match kind {
        "mat" => {
            let a = GameMatrix::parse(model_text).map_err(|e| e.to_string())?;
            check_dim(initial.len(), a.n(), "initial state")?;
            let p0 = ProbDist::new(initial).map_err(|e| e.to_string())?;
            let mut monitors = Vec::new();
            if let Some(q) = &reference {
                check_dim(q.len(), a.n(), "reference state")?;
                let q = ProbDist::new(q.clone()).map_err(|e| e.to_string())?;
                monitors.extend(divergence_monitors(q.weights().to_vec(), false));
            }
            let names: Vec<String> = (0..a.n()).map(|i| format!("s{i}")).collect();
            let model = FitnessModel::linear(a);
            let traj = integrate(replicator_field(&model), p0.weights(), t_end, &config, &monitors)
                .map_err(|e| e.to_string())?;
            (traj, names)
        }
        "mk" => {
            let process = MarkovProcess::parse(model_text).map_err(|e| e.to_string())?;
            check_dim(initial.len(), process.n(), "initial state")?;
            let p0 = ProbDist::new(initial).map_err(|e| e.to_string())?;
            let mut monitors = Vec::new();
            if let Some(q) = &reference {
                check_dim(q.len(), process.n(), "reference state")?;
                let q = ProbDist::new(q.clone()).map_err(|e| e.to_string())?;
                monitors.extend(divergence_monitors(q.weights().to_vec(), false));
            }
            let h = hamiltonian(&process);
            let traj = integrate(master_field(&h), p0.weights(), t_end, &config, &monitors)
                .map_err(|e| e.to_string())?;
            (traj, process.states().to_vec())
        }
        "rn" => {
            let network = ReactionNetwork::parse(model_text).map_err(|e| e.to_string())?.network;
            check_dim(initial.len(), network.k(), "initial state")?;
            let mut monitors = Vec::new();
            if let Some(q) = &reference {
                check_dim(q.len(), network.k(), "reference state")?;
                monitors.extend(divergence_monitors(q.clone(), true));
            }
            for (index, law) in conservation_laws(&network, 1e-10).into_iter().enumerate() {
                let coefficients: Vec<f64> = law.iter().copied().collect();
                monitors.push(Monitor::new(format!("conserved_{index}"), move |p: &[f64]| {
                    p.iter().zip(&coefficients).map(|(a, b)| a * b).sum()
                }));
            }
            let traj = integrate(rate_field(&network), &initial, t_end, &config, &monitors)
                .map_err(|e| e.to_string())?;
            (traj, network.species().to_vec())
        }
        other => return Err(format!("unknown model kind `{other}`; expected mat, mk, or rn")),
    };
    Ok(trajectory_json(&traj, &names))
}

fn divergence_monitors(reference: Vec<f64>, population: bool) -> Vec<Monitor> {
    let forward = reference.clone();
    let backward = reference;
    if population {
        vec![
            Monitor::new("I(ref,state)", move |p: &[f64]| {
                population_relative_information_raw(&forward, p)
            }),
            Monitor::new("I(state,ref)", move |p: &[f64]| {
                population_relative_information_raw(p, &backward)
            }),
        ]
    } else {
        vec![
            Monitor::new("I(ref,state)", move |p: &[f64]| relative_information_raw(&forward, p)),
            Monitor::new("I(state,ref)", move |p: &[f64]| relative_information_raw(p, &backward)),
        ]
    }
}

/// Runs one of the game-theoretic checks (`nash`, `ess`, `dominant`,
/// `thomas`) of a strategy against a payoff matrix, returning a JSON
/// verdict with `status`, `margin`, and an optional counterexample
/// `witness`.
#[wasm_bindgen]
pub fn analyze_strategy(
    matrix_text: &str,
    strategy_csv: &str,
    check: &str,
) -> Result<String, String> {
    let a = GameMatrix::parse(matrix_text).map_err(|e| e.to_string())?;
    let values = parse_csv(strategy_csv, "strategy")?;
    check_dim(values.len(), a.n(), "strategy")?;
    let q = ProbDist::new(values).map_err(|e| e.to_string())?;
    let verdict = match check {
        "nash" => is_symmetric_nash(&q, &a, DEFAULT_TOL),
        "ess" => is_ess(&q, &a, DEFAULT_TOL, DEFAULT_SAMPLES, DEFAULT_SEED),
        "dominant" => is_dominant(&q, &a, DEFAULT_TOL, DEFAULT_SAMPLES, DEFAULT_SEED),
        "thomas" => is_thomas_ess(&q, &a, DEFAULT_TOL, DEFAULT_SAMPLES, DEFAULT_SEED),
        other => return Err(format!("unknown check `{other}`; expected nash, ess, dominant, or thomas")),
    };
    let status = match verdict.status {
        VerdictStatus::Holds => "holds",
        VerdictStatus::Fails => "fails",
        VerdictStatus::Inconclusive => "inconclusive",
    };
    let witness = match &verdict.witness {
        Some(w) => json_numbers(w.weights()),
        None => "null".to_string(),
    };
    Ok(format!(
        "{{\"check\":{check:?},\"status\":{status:?},\"margin\":{},\"witness\":{witness}}}",
        json_f64(verdict.margin)
    ))
}

/// Lists the steady states of a Markov process, one per terminal strongly
/// connected component, as JSON with the state names and one distribution
/// per steady state.
#[wasm_bindgen]
pub fn markov_steady_states(model_text: &str) -> Result<String, String> {
    let process = MarkovProcess::parse(model_text).map_err(|e| e.to_string())?;
    let list = steady_states(&process, 1e-9);
    let entries: Vec<String> = list.iter().map(|q| json_numbers(q.weights())).collect();
    Ok(format!(
        "{{\"states\":{},\"steady_states\":[{}]}}",
        json_strings(process.states()),
        entries.join(",")
    ))
}
