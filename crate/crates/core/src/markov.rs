//! Continuous-time Markov processes on finite state spaces: generator
//! ("Hamiltonian") construction, the master equation `dp/dt = Hp`, exact
//! propagators, steady states, and the Boltzmann / free-energy apparatus.
//!
//! Free energy here is `F(p) = <E>_p - T S(p)` with `T = 1/beta` and `S` the
//! Shannon entropy; when the energies are read off a steady state `q`, the
//! identity `F(p) - F(q) = T I(p, q)` turns the H-theorem (relative
//! information never increases under the master equation) into the statement
//! that free energy never increases.
//!
//! Everything works with a constant generator. Time-dependent generators can
//! still be integrated by writing the field closure by hand (capture `t`);
//! only [`propagator`] genuinely requires a constant matrix.

use crate::info::{shannon_entropy, ProbDist};
use crate::linalg::{matrix_exp, nullspace};
use crate::parse::{strip_comment, ParseError};
use nalgebra::{DMatrix, DVector};
use petgraph::graph::DiGraph;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarkovError {
    #[error("a process needs at least one state")]
    NoStates,
    #[error("invalid state name `{name}`: {reason}")]
    BadStateName { name: String, reason: &'static str },
    #[error("duplicate state name `{name}`")]
    DuplicateState { name: String },
    #[error("transition endpoint {index} is out of range for {n} states")]
    StateOutOfRange { index: usize, n: usize },
    #[error("self-loop on state `{name}` (self-loops do not affect the dynamics)")]
    SelfLoop { name: String },
    #[error("transition rate {rate} must be positive and finite")]
    BadRate { rate: f64 },
    #[error("matrix is not a generator: {reason}")]
    NotStochastic { reason: String },
    #[error("state `{name}` has zero steady-state probability, so its energy is infinite")]
    InfiniteEnergy { name: String },
    #[error("inverse temperature must be positive and finite, got {beta}")]
    BadBeta { beta: f64 },
    #[error("energies must be finite")]
    NonFiniteEnergy,
    #[error("time must be nonnegative and finite, got {t}")]
    InvalidTime { t: f64 },
    #[error("ground state index {index} is out of range for {n} states")]
    GroundOutOfRange { index: usize, n: usize },
}

/// A labelled transition `from -> to` with a positive rate constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// A finite-state continuous-time Markov process: named states plus rated
/// transitions. Parallel transitions between the same pair are allowed and
/// their rates add in the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovProcess {
    states: Vec<String>,
    transitions: Vec<Transition>,
}

fn validate_state_name(name: &str) -> Result<(), MarkovError> {
    let bad = |reason| Err(MarkovError::BadStateName { name: name.to_string(), reason });
    if name.is_empty() {
        return bad("empty");
    }
    if name.chars().any(char::is_whitespace) {
        return bad("contains whitespace");
    }
    if name.contains('#') || name.contains(':') {
        return bad("contains a reserved character (`#` or `:`)");
    }
    if name.contains("->") {
        return bad("contains the arrow separator `->`");
    }
    Ok(())
}

impl MarkovProcess {
    pub fn new(states: Vec<String>, transitions: Vec<Transition>) -> Result<Self, MarkovError> {
        if states.is_empty() {
            return Err(MarkovError::NoStates);
        }
        let mut seen = std::collections::HashSet::new();
        for name in &states {
            validate_state_name(name)?;
            if !seen.insert(name.as_str()) {
                return Err(MarkovError::DuplicateState { name: name.clone() });
            }
        }
        let n = states.len();
        for t in &transitions {
            for index in [t.from, t.to] {
                if index >= n {
                    return Err(MarkovError::StateOutOfRange { index, n });
                }
            }
            if t.from == t.to {
                return Err(MarkovError::SelfLoop { name: states[t.from].clone() });
            }
            if !(t.rate.is_finite() && t.rate > 0.0) {
                return Err(MarkovError::BadRate { rate: t.rate });
            }
        }
        Ok(Self { states, transitions })
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    /// Parses the text format: a `states: s1 s2 ...` line followed by
    /// transition lines `from -> to : rate`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let col_at = |payload: &str, byte: usize| payload[..byte].chars().count() + 1;
        let mut states: Option<Vec<String>> = None;
        let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
        let mut transitions = Vec::new();

        for (line_idx, raw) in text.lines().enumerate() {
            let line_no = line_idx + 1;
            let payload = strip_comment(raw);
            if payload.trim().is_empty() {
                continue;
            }
            if states.is_none() {
                let trimmed = payload.trim_start();
                let offset = payload.len() - trimmed.len();
                let Some(rest) = trimmed.strip_prefix("states:") else {
                    return Err(ParseError::new(
                        line_no,
                        col_at(payload, offset),
                        "expected a `states: name name ...` line before any transitions",
                    ));
                };
                let mut names = Vec::new();
                let base = offset + "states:".len();
                let mut cursor = 0;
                for tok in rest.split_whitespace() {
                    let at = rest[cursor..].find(tok).expect("token came from this slice") + cursor;
                    cursor = at + tok.len();
                    let col = col_at(payload, base + at);
                    validate_state_name(tok).map_err(|e| ParseError::new(line_no, col, e.to_string()))?;
                    if index.insert(tok.to_string(), names.len()).is_some() {
                        return Err(ParseError::new(line_no, col, format!("duplicate state name `{tok}`")));
                    }
                    names.push(tok.to_string());
                }
                if names.is_empty() {
                    return Err(ParseError::new(line_no, col_at(payload, offset), "`states:` line names no states"));
                }
                states = Some(names);
                continue;
            }

            let arrow = payload.find("->").ok_or_else(|| {
                ParseError::new(line_no, 1, "expected a transition `from -> to : rate`")
            })?;
            let left = &payload[..arrow];
            let after = &payload[arrow + 2..];
            let colon_rel = after.find(':').ok_or_else(|| {
                ParseError::new(line_no, col_at(payload, payload.len()), "missing `: rate` after the target state")
            })?;
            let mid = &after[..colon_rel];
            let rate_str = &after[colon_rel + 1..];

            let lookup = |piece: &str, start: usize| -> Result<usize, ParseError> {
                let name = piece.trim();
                let col = col_at(payload, start + (piece.len() - piece.trim_start().len()));
                if name.is_empty() || name.split_whitespace().count() != 1 {
                    return Err(ParseError::new(line_no, col, "expected a single state name"));
                }
                index
                    .get(name)
                    .copied()
                    .ok_or_else(|| ParseError::new(line_no, col, format!("unknown state `{name}`")))
            };
            let from = lookup(left, 0)?;
            let to = lookup(mid, arrow + 2)?;
            if from == to {
                return Err(ParseError::new(
                    line_no,
                    1,
                    format!("self-loop on state `{}` is not allowed", states.as_ref().unwrap()[from]),
                ));
            }
            let rate_trim = rate_str.trim();
            let rate_col = col_at(
                payload,
                arrow + 2 + colon_rel + 1 + (rate_str.len() - rate_str.trim_start().len()),
            );
            let rate: f64 = rate_trim
                .parse()
                .map_err(|_| ParseError::new(line_no, rate_col, format!("expected a rate, got `{rate_trim}`")))?;
            if !(rate.is_finite() && rate > 0.0) {
                return Err(ParseError::new(line_no, rate_col, "rates must be positive and finite"));
            }
            transitions.push(Transition { from, to, rate });
        }

        let states = states.ok_or_else(|| ParseError::new(1, 1, "missing `states:` line"))?;
        Ok(Self::new(states, transitions).expect("validated during parsing"))
    }

    /// Inverse of [`MarkovProcess::parse`]; round-trips bit-exactly.
    pub fn serialize(&self) -> String {
        let mut out = String::from("states:");
        for s in &self.states {
            out.push(' ');
            out.push_str(s);
        }
        out.push('\n');
        for t in &self.transitions {
            out.push_str(&format!("{} -> {} : {}\n", self.states[t.from], self.states[t.to], t.rate));
        }
        out
    }
}

/// The infinitesimal generator: off-diagonal entries nonnegative, every
/// column summing to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    matrix: DMatrix<f64>,
}

impl Hamiltonian {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, MarkovError> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(MarkovError::NotStochastic {
                reason: format!("matrix is {}x{}, need square and nonempty", matrix.nrows(), matrix.ncols()),
            });
        }
        let n = matrix.nrows();
        for j in 0..n {
            let mut sum = 0.0;
            for i in 0..n {
                let v = matrix[(i, j)];
                if !v.is_finite() {
                    return Err(MarkovError::NotStochastic { reason: format!("entry ({i},{j}) is not finite") });
                }
                if i != j && v < 0.0 {
                    return Err(MarkovError::NotStochastic {
                        reason: format!("off-diagonal entry ({i},{j}) = {v} is negative"),
                    });
                }
                sum += v;
            }
            if sum.abs() > 1e-12 {
                return Err(MarkovError::NotStochastic { reason: format!("column {j} sums to {sum}, not 0") });
            }
        }
        Ok(Self { matrix })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Builds the generator of a process: `H[t][s] += r` and `H[s][s] -= r` for
/// each transition `s -> t` with rate `r`.
pub fn hamiltonian(process: &MarkovProcess) -> Hamiltonian {
    let n = process.n();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for t in process.transitions() {
        m[(t.to, t.from)] += t.rate;
        m[(t.from, t.from)] -= t.rate;
    }
    Hamiltonian::new(m).expect("generator built from a valid process")
}

/// The master-equation field `dp/dt = Hp`. Column sums of zero make the
/// total probability an exact invariant of the flow.
pub fn master_field(h: &Hamiltonian) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
    move |_t, p, out| {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = p.iter().enumerate().map(|(j, &pj)| h.matrix[(i, j)] * pj).sum();
        }
    }
}

/// The propagator `exp(tH)`: a stochastic matrix mapping `p(0)` to `p(t)`.
/// Entries that come out of the exponential as tiny negatives (within 1e-12)
/// are clamped to zero.
pub fn propagator(h: &Hamiltonian, t: f64) -> Result<DMatrix<f64>, MarkovError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(MarkovError::InvalidTime { t });
    }
    let mut g = matrix_exp(&h.matrix, t).map_err(|e| MarkovError::NotStochastic { reason: e.to_string() })?;
    for v in g.iter_mut() {
        if *v < 0.0 {
            debug_assert!(*v >= -1e-12, "propagator entry {v} below clamp tolerance");
            *v = 0.0;
        }
    }
    Ok(g)
}

/// Steady state of an irreducible generator: the (unique) probability
/// vector in its nullspace.
fn irreducible_steady_state(h_sub: &DMatrix<f64>) -> DVector<f64> {
    let m = h_sub.nrows();
    if m == 1 {
        return DVector::from_element(1, 1.0);
    }
    let basis = nullspace(h_sub, 1e-10).expect("restricted generator is square and finite");
    let best = basis
        .iter()
        .max_by(|a, b| a.sum().abs().total_cmp(&b.sum().abs()))
        .filter(|v| v.sum().abs() > 1e-9)
        .cloned();
    let mut q = match best {
        Some(v) => {
            let total = v.sum();
            v / total
        }
        None => {
            // Defensive fallback: least-squares solve of Hq = 0, sum(q) = 1.
            let mut aug = DMatrix::<f64>::zeros(m + 1, m);
            aug.view_mut((0, 0), (m, m)).copy_from(h_sub);
            for j in 0..m {
                aug[(m, j)] = 1.0;
            }
            let mut rhs = DVector::<f64>::zeros(m + 1);
            rhs[m] = 1.0;
            aug.svd(true, true).solve(&rhs, 1e-12).expect("augmented steady-state system")
        }
    };
    for v in q.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total = q.sum();
    q / total
}

/// One steady state per terminal strongly connected component of the
/// transition graph, each supported on its component and normalized to total
/// probability one. Components are reported in order of their smallest state
/// index. Every returned `q` satisfies `|Hq|_inf < tol`.
pub fn steady_states(process: &MarkovProcess, tol: f64) -> Vec<ProbDist> {
    assert!(tol > 0.0, "tolerance must be positive");
    let n = process.n();
    let h = hamiltonian(process);

    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for t in process.transitions() {
        graph.update_edge(nodes[t.from], nodes[t.to], ());
    }
    let sccs = petgraph::algo::tarjan_scc(&graph);
    let mut component_of = vec![0usize; n];
    for (id, scc) in sccs.iter().enumerate() {
        for node in scc {
            component_of[node.index()] = id;
        }
    }
    let mut terminal: Vec<Vec<usize>> = Vec::new();
    for (id, scc) in sccs.iter().enumerate() {
        let escapes = process
            .transitions()
            .iter()
            .any(|t| component_of[t.from] == id && component_of[t.to] != id);
        if !escapes {
            let mut members: Vec<usize> = scc.iter().map(|node| node.index()).collect();
            members.sort_unstable();
            terminal.push(members);
        }
    }
    terminal.sort_by_key(|members| members[0]);

    let mut out = Vec::with_capacity(terminal.len());
    for members in terminal {
        let m = members.len();
        let h_sub = DMatrix::from_fn(m, m, |i, j| h.matrix[(members[i], members[j])]);
        let q_sub = irreducible_steady_state(&h_sub);
        let mut full = vec![0.0; n];
        for (k, &state) in members.iter().enumerate() {
            full[state] = q_sub[k];
        }
        let residual = {
            let qv = DVector::from_column_slice(&full);
            (&h.matrix * qv).amax()
        };
        debug_assert!(residual < tol, "steady-state residual {residual} exceeds {tol}");
        out.push(ProbDist::new(full).expect("steady state is a distribution"));
    }
    out
}

/// Inverse temperature, energies, and the partition function
/// `Z = sum_i exp(-beta E_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    beta: f64,
    energies: Vec<f64>,
    partition: f64,
}

impl EnergyModel {
    pub fn new(beta: f64, energies: Vec<f64>) -> Result<Self, MarkovError> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(MarkovError::BadBeta { beta });
        }
        if energies.is_empty() || energies.iter().any(|e| !e.is_finite()) {
            return Err(MarkovError::NonFiniteEnergy);
        }
        let partition = energies.iter().map(|e| (-beta * e).exp()).sum();
        Ok(Self { beta, energies, partition })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn partition(&self) -> f64 {
        self.partition
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

/// Reads energies off a fully supported steady state via
/// `E_i = -(1/beta) ln(q_i / q_ground)`, so the ground state has energy
/// exactly zero. With `ground = None` the most probable state is used,
/// which makes every energy nonnegative.
pub fn energies_from_steady_state(
    q: &ProbDist,
    beta: f64,
    ground: Option<usize>,
    names: &[String],
) -> Result<EnergyModel, MarkovError> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(MarkovError::BadBeta { beta });
    }
    let n = q.len();
    assert_eq!(names.len(), n, "state-name count must match the distribution");
    for (i, &w) in q.weights().iter().enumerate() {
        if w <= 0.0 {
            return Err(MarkovError::InfiniteEnergy { name: names[i].clone() });
        }
    }
    let ground = match ground {
        Some(g) if g >= n => return Err(MarkovError::GroundOutOfRange { index: g, n }),
        Some(g) => g,
        None => {
            let mut best = 0;
            for i in 1..n {
                if q.weights()[i] > q.weights()[best] {
                    best = i;
                }
            }
            best
        }
    };
    let q_ground = q.weights()[ground];
    let energies: Vec<f64> = q
        .weights()
        .iter()
        .enumerate()
        .map(|(i, &w)| if i == ground { 0.0 } else { -(w / q_ground).ln() / beta })
        .collect();
    EnergyModel::new(beta, energies)
}

/// The Boltzmann distribution `q_i = exp(-beta E_i) / Z`. The exponent is
/// shifted by its maximum before exponentiating, so arbitrarily low energies
/// cannot overflow.
pub fn boltzmann_distribution(energies: &[f64], beta: f64) -> ProbDist {
    assert!(beta.is_finite() && beta > 0.0, "inverse temperature must be positive");
    assert!(!energies.is_empty(), "need at least one energy level");
    assert!(energies.iter().all(|e| e.is_finite()), "energies must be finite");
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = energies.iter().map(|e| (-beta * (e - e_min)).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    ProbDist::new(weights).expect("Boltzmann weights are positive")
}

/// Free energy `F(p) = <E>_p - T S(p)` with `T = 1/beta`.
///
/// When the model's energies come from a steady state `q`,
/// `F(q) = -T ln Z` and `F(p) - F(q) = T I(p, q)`.
pub fn free_energy(p: &ProbDist, model: &EnergyModel) -> f64 {
    assert_eq!(p.len(), model.len(), "distribution and energy dimensions must match");
    let mean_energy: f64 = p.weights().iter().zip(model.energies()).map(|(w, e)| w * e).sum();
    mean_energy - model.temperature() * shannon_entropy(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::relative_information_raw;
    use crate::ode::{integrate, IntegratorConfig, Monitor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn two_state(a: f64, b: f64) -> MarkovProcess {
        MarkovProcess::new(
            names(&["up", "down"]),
            vec![Transition { from: 0, to: 1, rate: a }, Transition { from: 1, to: 0, rate: b }],
        )
        .unwrap()
    }

    fn random_process(rng: &mut ChaCha8Rng) -> MarkovProcess {
        let n = rng.gen_range(2..=8);
        let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let mut transitions = Vec::new();
        for from in 0..n {
            for to in 0..n {
                if from != to && rng.gen_bool(0.5) {
                    transitions.push(Transition { from, to, rate: 2.0 * (1.0 - rng.gen::<f64>()) });
                }
            }
        }
        if transitions.is_empty() {
            transitions.push(Transition { from: 0, to: 1, rate: 1.0 });
        }
        MarkovProcess::new(states, transitions).unwrap()
    }

    fn interior_dist(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|x| x / total).collect()
    }

    #[test]
    fn process_construction_validates() {
        assert!(matches!(MarkovProcess::new(vec![], vec![]), Err(MarkovError::NoStates)));
        assert!(matches!(
            MarkovProcess::new(names(&["a", "a"]), vec![]),
            Err(MarkovError::DuplicateState { .. })
        ));
        assert!(matches!(
            MarkovProcess::new(names(&["a:b"]), vec![]),
            Err(MarkovError::BadStateName { .. })
        ));
        assert!(matches!(
            MarkovProcess::new(names(&["x->y"]), vec![]),
            Err(MarkovError::BadStateName { .. })
        ));
        let t = |from, to, rate| vec![Transition { from, to, rate }];
        assert!(matches!(
            MarkovProcess::new(names(&["a", "b"]), t(0, 0, 1.0)),
            Err(MarkovError::SelfLoop { .. })
        ));
        assert!(matches!(
            MarkovProcess::new(names(&["a", "b"]), t(0, 2, 1.0)),
            Err(MarkovError::StateOutOfRange { index: 2, n: 2 })
        ));
        assert!(matches!(
            MarkovProcess::new(names(&["a", "b"]), t(0, 1, 0.0)),
            Err(MarkovError::BadRate { .. })
        ));
        assert!(matches!(
            MarkovProcess::new(names(&["a", "b"]), t(0, 1, f64::NAN)),
            Err(MarkovError::BadRate { .. })
        ));
    }

    #[test]
    fn generator_examples() {
        let empty = MarkovProcess::new(names(&["a", "b"]), vec![]).unwrap();
        assert_eq!(hamiltonian(&empty).matrix, DMatrix::<f64>::zeros(2, 2));

        let a = 0.7;
        let single =
            MarkovProcess::new(names(&["a", "b"]), vec![Transition { from: 0, to: 1, rate: a }]).unwrap();
        let h = hamiltonian(&single);
        assert_eq!(h.matrix, DMatrix::from_row_slice(2, 2, &[-a, 0.0, a, 0.0]));

        // Parallel transitions add their rates.
        let parallel = MarkovProcess::new(
            names(&["a", "b"]),
            vec![Transition { from: 0, to: 1, rate: 0.25 }, Transition { from: 0, to: 1, rate: 0.5 }],
        )
        .unwrap();
        assert_eq!(hamiltonian(&parallel).matrix[(1, 0)], 0.75);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let h = hamiltonian(&random_process(&mut rng));
            let n = h.n();
            for j in 0..n {
                let col_sum: f64 = (0..n).map(|i| h.matrix[(i, j)]).sum();
                assert!(col_sum.abs() < 1e-12);
                for i in 0..n {
                    if i != j {
                        assert!(h.matrix[(i, j)] >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn generator_constructor_rejects_bad_matrices() {
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0 + 1e-6]);
        assert!(matches!(Hamiltonian::new(bad), Err(MarkovError::NotStochastic { .. })));
        let negative_off = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(matches!(Hamiltonian::new(negative_off), Err(MarkovError::NotStochastic { .. })));
    }

    #[test]
    fn master_field_examples() {
        let zero = Hamiltonian::new(DMatrix::zeros(3, 3)).unwrap();
        let field = master_field(&zero);
        let mut out = vec![1.0; 3];
        field(0.0, &[0.2, 0.3, 0.5], &mut out);
        assert_eq!(out, vec![0.0, 0.0, 0.0]);

        let (a, b) = (1.3, 0.4);
        let h = hamiltonian(&two_state(a, b));
        let field = master_field(&h);
        let mut out = vec![0.0; 2];
        field(0.0, &[1.0, 0.0], &mut out);
        assert!((out[0] - (-a)).abs() < 1e-15);
        assert!((out[1] - a).abs() < 1e-15);

        let q = &steady_states(&two_state(a, b), 1e-12)[0];
        field(0.0, q.weights(), &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn propagator_examples() {
        let h = hamiltonian(&two_state(1.0, 1.0));
        let g0 = propagator(&h, 0.0).unwrap();
        assert_eq!(g0, DMatrix::identity(2, 2));

        let g = propagator(&h, 10.0).unwrap();
        for v in g.iter() {
            assert!((v - 0.5).abs() < 1e-8, "late-time entry {v} should be 1/2");
        }

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let h = hamiltonian(&random_process(&mut rng));
            let g = propagator(&h, rng.gen_range(0.0..4.0)).unwrap();
            for j in 0..h.n() {
                let col: f64 = (0..h.n()).map(|i| g[(i, j)]).sum();
                assert!((col - 1.0).abs() < 1e-10, "column {j} sums to {col}");
            }
            assert!(g.iter().all(|&v| v >= 0.0));
        }

        assert!(matches!(propagator(&h, -1.0), Err(MarkovError::InvalidTime { .. })));
    }

    #[test]
    fn backward_difference_matches_generator_product() {
        // d/ds exp((t - s)H) at s = 0 equals -exp(tH) H.
        let h = hamiltonian(&two_state(1.2, 0.7));
        let t = 1.5;
        let step = 1e-3;
        let plus = matrix_exp(h.matrix(), t - step).unwrap();
        let minus = matrix_exp(h.matrix(), t + step).unwrap();
        let fd = (plus - minus) / (2.0 * step);
        let analytic = -(matrix_exp(h.matrix(), t).unwrap() * h.matrix());
        assert!((fd - analytic).amax() < 1e-5);
    }

    #[test]
    fn steady_state_examples() {
        let q = steady_states(&two_state(1.0, 2.0), 1e-12);
        assert_eq!(q.len(), 1);
        assert!((q[0].weights()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((q[0].weights()[1] - 1.0 / 3.0).abs() < 1e-12);

        // Two isolated states: each is its own terminal component.
        let isolated = MarkovProcess::new(names(&["a", "b"]), vec![]).unwrap();
        let q = steady_states(&isolated, 1e-12);
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].weights(), &[1.0, 0.0]);
        assert_eq!(q[1].weights(), &[0.0, 1.0]);

        // One-way chain: everything drains into the last state.
        let chain = MarkovProcess::new(
            names(&["a", "b", "c"]),
            vec![Transition { from: 0, to: 1, rate: 1.0 }, Transition { from: 1, to: 2, rate: 0.5 }],
        )
        .unwrap();
        let q = steady_states(&chain, 1e-12);
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].weights(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn steady_states_have_small_residual_on_random_processes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let process = random_process(&mut rng);
            let h = hamiltonian(&process);
            let list = steady_states(&process, 1e-9);
            assert!(!list.is_empty());
            for q in &list {
                let qv = DVector::from_column_slice(q.weights());
                assert!((h.matrix() * qv).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn mk_format_round_trips_bit_exactly() {
        let text = "# a small chain\nstates: up down\nup -> down : 1.5   # decay\ndown -> up : 0.25\n";
        let m = MarkovProcess::parse(text).unwrap();
        assert_eq!(m, two_state(1.5, 0.25));
        assert_eq!(MarkovProcess::parse(&m.serialize()).unwrap(), m);

        // Compact spacing parses to the same process.
        let compact = MarkovProcess::parse("states: up down\nup->down:1.5\ndown->up:0.25\n").unwrap();
        assert_eq!(compact, m);

        // Awkward rates survive the round trip exactly.
        let m = MarkovProcess::new(
            names(&["a", "b"]),
            vec![Transition { from: 0, to: 1, rate: 0.1 }, Transition { from: 1, to: 0, rate: 1e-7 }],
        )
        .unwrap();
        assert_eq!(MarkovProcess::parse(&m.serialize()).unwrap(), m);
    }

    #[test]
    fn mk_parse_errors_carry_position() {
        let err = MarkovProcess::parse("up -> down : 1.0\n").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("states:"));

        let err = MarkovProcess::parse("states: a b\na -> c : 1.0\n").unwrap_err();
        assert_eq!((err.line, err.col), (2, 6));
        assert!(err.message.contains("unknown state `c`"));

        let err = MarkovProcess::parse("states: a b\na -> b : fast\n").unwrap_err();
        assert_eq!((err.line, err.col), (2, 10));

        let err = MarkovProcess::parse("states: a b\na -> b : -1\n").unwrap_err();
        assert_eq!(err.line, 2);

        let err = MarkovProcess::parse("states: a b\na -> a : 1.0\n").unwrap_err();
        assert!(err.message.contains("self-loop"));

        let err = MarkovProcess::parse("states: a b a\n").unwrap_err();
        assert_eq!((err.line, err.col), (1, 13));

        let err = MarkovProcess::parse("# only comments\n").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn energy_examples() {
        let model =
            energies_from_steady_state(&ProbDist::uniform(4), 2.0, None, &names(&["a", "b", "c", "d"])).unwrap();
        assert!(model.energies().iter().all(|&e| e == 0.0));
        assert!((model.partition() - 4.0).abs() < 1e-12);

        let q = ProbDist::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let model = energies_from_steady_state(&q, 1.0, Some(0), &names(&["g", "x"])).unwrap();
        assert_eq!(model.energies()[0], 0.0);
        assert!((model.energies()[1] - 2.0_f64.ln()).abs() < 1e-12);
        assert!((model.partition() - 1.5).abs() < 1e-12);

        // Default ground state is the most probable one; energies stay >= 0.
        let q = ProbDist::new(vec![0.1, 0.6, 0.3]).unwrap();
        let model = energies_from_steady_state(&q, 1.7, None, &names(&["a", "b", "c"])).unwrap();
        assert_eq!(model.energies()[1], 0.0);
        assert!(model.energies().iter().all(|&e| e >= 0.0));

        let degenerate = ProbDist::new(vec![1.0, 0.0]).unwrap();
        let err = energies_from_steady_state(&degenerate, 1.0, None, &names(&["a", "b"])).unwrap_err();
        assert!(matches!(&err, MarkovError::InfiniteEnergy { name } if name == "b"));

        assert!(matches!(
            energies_from_steady_state(&q, 0.0, None, &names(&["a", "b", "c"])),
            Err(MarkovError::BadBeta { .. })
        ));
        assert!(matches!(
            energies_from_steady_state(&q, 1.0, Some(9), &names(&["a", "b", "c"])),
            Err(MarkovError::GroundOutOfRange { .. })
        ));
    }

    #[test]
    fn boltzmann_examples() {
        let q = boltzmann_distribution(&[3.0, 3.0, 3.0], 2.0);
        assert_eq!(q.weights(), ProbDist::uniform(3).weights());

        let q = boltzmann_distribution(&[0.0, 2.0_f64.ln()], 1.0);
        assert!((q.weights()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((q.weights()[1] - 1.0 / 3.0).abs() < 1e-12);

        // Low temperature concentrates on the minimum-energy state.
        let q = boltzmann_distribution(&[0.0, 0.1], 100.0);
        assert!(q.weights()[0] > 0.9999);
        let ratio = q.weights()[1] / q.weights()[0];
        assert!((ratio - (-10.0_f64).exp()).abs() < 1e-16);

        // Deep energies must not overflow thanks to the exponent shift.
        let q = boltzmann_distribution(&[-800.0, -800.5], 1.0);
        assert!(q.weights().iter().all(|w| w.is_finite()));
        let ratio = q.weights()[1] / q.weights()[0];
        assert!((ratio - 0.5_f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn boltzmann_inverts_energy_extraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.gen_range(2..=6);
            let q = ProbDist::new(interior_dist(n, &mut rng)).unwrap();
            let beta = rng.gen_range(0.1..5.0);
            let state_names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
            let model = energies_from_steady_state(&q, beta, None, &state_names).unwrap();
            let back = boltzmann_distribution(model.energies(), beta);
            for (a, b) in back.weights().iter().zip(q.weights()) {
                assert!((a - b).abs() < 1e-12, "round trip drifted: {a} vs {b}");
            }
        }
    }

    #[test]
    fn free_energy_examples() {
        let n = 5;
        let state_names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let beta = 2.0;
        let model = energies_from_steady_state(&ProbDist::uniform(n), beta, None, &state_names).unwrap();
        let f_uniform = free_energy(&ProbDist::uniform(n), &model);
        assert!((f_uniform - (-(n as f64).ln() / beta)).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(2..=6);
            let state_names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
            let q = ProbDist::new(interior_dist(n, &mut rng)).unwrap();
            let beta = rng.gen_range(0.2..4.0);
            let model = energies_from_steady_state(&q, beta, None, &state_names).unwrap();
            let temp = 1.0 / beta;

            // At the generating steady state, F(q) = -T ln Z.
            let f_q = free_energy(&q, &model);
            assert!((f_q - (-temp * model.partition().ln())).abs() < 1e-12);

            // And for any p, the excess free energy is T I(p, q).
            let p = ProbDist::new(interior_dist(n, &mut rng)).unwrap();
            let f_p = free_energy(&p, &model);
            let divergence = relative_information_raw(p.weights(), q.weights());
            assert!((f_p - f_q - temp * divergence).abs() < 1e-10);
            assert!(f_p >= f_q - 1e-12, "steady state must minimize free energy");
        }
    }

    #[test]
    fn relative_information_shrinks_along_joint_evolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let process = random_process(&mut rng);
            let n = process.n();
            let h = hamiltonian(&process);
            let field = master_field(&h);
            let stacked_field = |t: f64, x: &[f64], out: &mut [f64]| {
                field(t, &x[..n], &mut out[..n]);
                field(t, &x[n..], &mut out[n..]);
            };
            let mut x0 = interior_dist(n, &mut rng);
            x0.extend(interior_dist(n, &mut rng));
            let monitor = Monitor::new("I(p,q)", move |x: &[f64]| {
                relative_information_raw(&x[..n], &x[n..])
            });
            let traj = integrate(stacked_field, &x0, 5.0, &IntegratorConfig::default(), &[monitor]).unwrap();
            let series = traj.channel("I(p,q)").unwrap();
            for w in series.windows(2) {
                assert!(w[1] <= w[0] + 1e-6, "relative information rose: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn trajectories_conserve_probability_and_stay_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..15 {
            let process = random_process(&mut rng);
            let h = hamiltonian(&process);
            let p0 = interior_dist(process.n(), &mut rng);
            let traj = integrate(master_field(&h), &p0, 8.0, &IntegratorConfig::default(), &[]).unwrap();
            for state in &traj.states {
                let total: f64 = state.iter().sum();
                assert!((total - 1.0).abs() < 1e-9, "probability drifted to {total}");
                assert!(state.iter().all(|&v| v >= -1e-9), "component went negative: {state:?}");
            }
        }
    }

    #[test]
    fn propagator_matches_integration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let process = random_process(&mut rng);
            let h = hamiltonian(&process);
            let p0 = interior_dist(process.n(), &mut rng);
            let t_end = rng.gen_range(0.5..4.0);
            let traj = integrate(master_field(&h), &p0, t_end, &IntegratorConfig::default(), &[]).unwrap();
            let expected = propagator(&h, t_end).unwrap() * DVector::from_column_slice(&p0);
            let got = traj.final_state().expect("trajectory has at least one point");
            let err = got
                .iter()
                .zip(expected.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            assert!(err < 1e-6, "integration deviates from the propagator by {err}");
        }
    }

    #[test]
    fn free_energy_never_increases_toward_steady_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut tested = 0;
        while tested < 10 {
            let process = random_process(&mut rng);
            let qs = steady_states(&process, 1e-9);
            // The energy picture needs a fully supported steady state.
            let Some(q) = qs.iter().find(|q| q.weights().iter().all(|&w| w > 1e-12)) else {
                continue;
            };
            tested += 1;
            let beta = rng.gen_range(0.5..2.0);
            let model = energies_from_steady_state(q, beta, None, process.states()).unwrap();
            let h = hamiltonian(&process);
            let energies: Vec<f64> = model.energies().to_vec();
            let temp = model.temperature();
            let monitor = Monitor::new("F", move |p: &[f64]| {
                let mean: f64 = p.iter().zip(&energies).map(|(w, e)| w * e).sum();
                let entropy: f64 = -p.iter().filter(|&&w| w > 0.0).map(|&w| w * w.ln()).sum::<f64>();
                mean - temp * entropy
            });
            let p0 = interior_dist(process.n(), &mut rng);
            let traj = integrate(master_field(&h), &p0, 6.0, &IntegratorConfig::default(), &[monitor]).unwrap();
            let series = traj.channel("F").unwrap();
            for w in series.windows(2) {
                assert!(w[1] <= w[0] + 1e-6, "free energy rose: {} -> {}", w[0], w[1]);
            }
            let f_q = free_energy(q, &model);
            assert!(series.iter().all(|&f| f >= f_q - 1e-9), "free energy dipped below the steady-state value");
        }
    }
}
