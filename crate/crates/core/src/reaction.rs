//! Reaction networks: a plain-text format, the rate equation, complex
//! balance, conservation laws, and the embedding of purely unary networks
//! into Markov processes.
//!
//! A network is a directed graph whose nodes are *complexes* (formal sums of
//! species, vectors in N^k) and whose edges are reactions with positive rate
//! constants. The rate equation evolves a population `P` by
//! `dP/dt = sum_tau r(tau) (t(tau) - s(tau)) P^{s(tau)}` with the convention
//! `0^0 = 1`, so source-free reactions contribute a constant birth flux.
//!
//! A population `Q` is *complex balanced* when every complex is produced
//! exactly as fast as it is destroyed. At such points the population
//! relative information `I(P(t), Q)` is nonincreasing along the rate
//! equation, which is what the monitoring channels in this crate track.

use crate::info::Population;
use crate::markov::{MarkovProcess, Transition};
use crate::ode::{integrate, IntegratorConfig, OdeError};
use crate::parse::{strip_comment, ParseError};
use nalgebra::{DMatrix, DVector};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReactionError {
    #[error("a network needs at least one species")]
    NoSpecies,
    #[error("invalid species name `{name}`: {reason}")]
    BadSpeciesName { name: String, reason: &'static str },
    #[error("duplicate species name `{name}`")]
    DuplicateSpecies { name: String },
    #[error("complex {index} has {got} coefficients, expected one per species ({expected})")]
    ComplexDimension { index: usize, got: usize, expected: usize },
    #[error("complexes {first} and {second} are identical")]
    DuplicateComplex { first: usize, second: usize },
    #[error("complex {index} is not referenced by any reaction")]
    UnreferencedComplex { index: usize },
    #[error("reaction endpoint {index} is out of range for {n} complexes")]
    ComplexOutOfRange { index: usize, n: usize },
    #[error("reaction from complex `{complex}` to itself is not allowed")]
    SelfLoop { complex: String },
    #[error("reaction rate {rate} must be positive and finite")]
    BadRate { rate: f64 },
    #[error("complex `{complex}` is not a single species, so the network is not a Markov process")]
    NotMarkov { complex: String },
    #[error("population has {got} entries, the network has {expected} species")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("horizon must be positive and finite, got {horizon}")]
    BadHorizon { horizon: f64 },
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("no equilibrium found: residual {residual} after Newton refinement")]
    NoEquilibrium { last: Vec<f64>, residual: f64 },
}

fn validate_species_name(name: &str) -> Result<(), ReactionError> {
    let bad = |reason| Err(ReactionError::BadSpeciesName { name: name.to_string(), reason });
    let mut chars = name.chars();
    match chars.next() {
        None => return bad("empty"),
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        Some(_) => return bad("must start with a letter or underscore"),
    }
    if !chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return bad("may contain only letters, digits, and underscores");
    }
    Ok(())
}

/// A reaction between two complexes, identified by index, with a positive
/// rate constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub source: usize,
    pub target: usize,
    pub rate: f64,
}

/// A reaction network: ordered species, distinct complexes (vectors of
/// natural-number coefficients, one per species), and rated reactions
/// between them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<String>,
    complexes: Vec<Vec<u32>>,
    reactions: Vec<Reaction>,
}

/// A parsed network plus any non-fatal warnings (currently only duplicate
/// reactions, which are kept).
#[derive(Debug)]
pub struct ParsedNetwork {
    pub network: ReactionNetwork,
    pub warnings: Vec<String>,
}

impl ReactionNetwork {
    pub fn new(
        species: Vec<String>,
        complexes: Vec<Vec<u32>>,
        reactions: Vec<Reaction>,
    ) -> Result<Self, ReactionError> {
        if species.is_empty() {
            return Err(ReactionError::NoSpecies);
        }
        let mut seen = std::collections::HashSet::new();
        for name in &species {
            validate_species_name(name)?;
            if !seen.insert(name.as_str()) {
                return Err(ReactionError::DuplicateSpecies { name: name.clone() });
            }
        }
        let k = species.len();
        for (index, c) in complexes.iter().enumerate() {
            if c.len() != k {
                return Err(ReactionError::ComplexDimension { index, got: c.len(), expected: k });
            }
        }
        for i in 0..complexes.len() {
            for j in i + 1..complexes.len() {
                if complexes[i] == complexes[j] {
                    return Err(ReactionError::DuplicateComplex { first: i, second: j });
                }
            }
        }
        let n = complexes.len();
        let mut referenced = vec![false; n];
        for r in &reactions {
            for index in [r.source, r.target] {
                if index >= n {
                    return Err(ReactionError::ComplexOutOfRange { index, n });
                }
                referenced[index] = true;
            }
            if r.source == r.target {
                let net = Self { species: species.clone(), complexes: complexes.clone(), reactions: vec![] };
                return Err(ReactionError::SelfLoop { complex: net.complex_display(r.source) });
            }
            if !(r.rate.is_finite() && r.rate > 0.0) {
                return Err(ReactionError::BadRate { rate: r.rate });
            }
        }
        if let Some(index) = referenced.iter().position(|&used| !used) {
            return Err(ReactionError::UnreferencedComplex { index });
        }
        Ok(Self { species, complexes, reactions })
    }

    pub fn k(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn complexes(&self) -> &[Vec<u32>] {
        &self.complexes
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    /// Renders a complex in the text format, e.g. `E + S`, `2 W`, or `0`.
    pub fn complex_display(&self, index: usize) -> String {
        let c = &self.complexes[index];
        let mut parts = Vec::new();
        for (i, &coeff) in c.iter().enumerate() {
            match coeff {
                0 => {}
                1 => parts.push(self.species[i].clone()),
                _ => parts.push(format!("{coeff} {}", self.species[i])),
            }
        }
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" + ")
        }
    }

    /// Parses the line-oriented text format. Each line is a reaction
    /// `complex -> complex : rate`; a complex is `0` or terms like
    /// `E + 2 S` joined by `+`. An optional leading `species: ...` line
    /// pins the species order (the serializer always emits one).
    pub fn parse(text: &str) -> Result<ParsedNetwork, ParseError> {
        let col_at = |payload: &str, byte: usize| payload[..byte].chars().count() + 1;
        let mut species: Vec<String> = Vec::new();
        let mut species_index: HashMap<String, usize> = HashMap::new();
        let mut header = false;
        let mut saw_line = false;
        let mut sparse_complexes: Vec<BTreeMap<usize, u32>> = Vec::new();
        let mut complex_index: HashMap<Vec<(usize, u32)>, usize> = HashMap::new();
        let mut reactions: Vec<Reaction> = Vec::new();
        let mut warnings: Vec<String> = Vec::new();

        for (line_idx, raw) in text.lines().enumerate() {
            let line_no = line_idx + 1;
            let payload = strip_comment(raw);
            if payload.trim().is_empty() {
                continue;
            }
            let trimmed = payload.trim_start();
            let lead = payload.len() - trimmed.len();
            if !saw_line {
                saw_line = true;
                if let Some(rest) = trimmed.strip_prefix("species:") {
                    header = true;
                    let base = lead + "species:".len();
                    let mut cursor = 0;
                    for tok in rest.split_whitespace() {
                        let at = rest[cursor..].find(tok).expect("token came from this slice") + cursor;
                        cursor = at + tok.len();
                        let col = col_at(payload, base + at);
                        validate_species_name(tok).map_err(|e| ParseError::new(line_no, col, e.to_string()))?;
                        if species_index.insert(tok.to_string(), species.len()).is_some() {
                            return Err(ParseError::new(line_no, col, format!("duplicate species name `{tok}`")));
                        }
                        species.push(tok.to_string());
                    }
                    if species.is_empty() {
                        return Err(ParseError::new(line_no, col_at(payload, lead), "`species:` line names no species"));
                    }
                    continue;
                }
            }

            let arrow = payload
                .find("->")
                .ok_or_else(|| ParseError::new(line_no, 1, "expected a reaction `complex -> complex : rate`"))?;
            let after = &payload[arrow + 2..];
            let colon_rel = after.find(':').ok_or_else(|| {
                ParseError::new(line_no, col_at(payload, payload.len()), "missing `: rate` after the target complex")
            })?;

            let mut parse_complex = |piece: &str, base: usize| -> Result<BTreeMap<usize, u32>, ParseError> {
                let body = piece.trim();
                let start = base + (piece.len() - piece.trim_start().len());
                if body.is_empty() {
                    return Err(ParseError::new(line_no, col_at(payload, start), "empty complex"));
                }
                let mut out: BTreeMap<usize, u32> = BTreeMap::new();
                if body == "0" {
                    return Ok(out);
                }
                let mut term_start = 0usize;
                let terms = body
                    .split('+')
                    .map(|term| {
                        let at = term_start;
                        term_start += term.len() + 1;
                        (term, at)
                    })
                    .collect::<Vec<_>>();
                for (term, term_at) in terms {
                    let name_part = term.trim();
                    let at = start + term_at + (term.len() - term.trim_start().len());
                    let col = col_at(payload, at);
                    if name_part.is_empty() {
                        return Err(ParseError::new(line_no, col, "empty term in complex"));
                    }
                    let digits = name_part.chars().take_while(char::is_ascii_digit).count();
                    let (coeff, name) = if digits > 0 {
                        let coeff: u32 = name_part[..digits].parse().map_err(|_| {
                            ParseError::new(line_no, col, "coefficient is too large")
                        })?;
                        if coeff == 0 {
                            return Err(ParseError::new(line_no, col, "coefficient must be at least 1"));
                        }
                        (coeff, name_part[digits..].trim_start())
                    } else {
                        (1, name_part)
                    };
                    if name.is_empty() {
                        return Err(ParseError::new(line_no, col, "expected a species name after the coefficient"));
                    }
                    validate_species_name(name).map_err(|e| ParseError::new(line_no, col, e.to_string()))?;
                    let idx = match species_index.get(name) {
                        Some(&idx) => idx,
                        None if header => {
                            return Err(ParseError::new(
                                line_no,
                                col,
                                format!("species `{name}` is not in the `species:` header"),
                            ));
                        }
                        None => {
                            species_index.insert(name.to_string(), species.len());
                            species.push(name.to_string());
                            species.len() - 1
                        }
                    };
                    *out.entry(idx).or_insert(0) += coeff;
                }
                Ok(out)
            };

            let source_map = parse_complex(&payload[..arrow], 0)?;
            let target_map = parse_complex(&after[..colon_rel], arrow + 2)?;

            let rate_piece = &after[colon_rel + 1..];
            let rate_trim = rate_piece.trim();
            let rate_col = col_at(
                payload,
                arrow + 2 + colon_rel + 1 + (rate_piece.len() - rate_piece.trim_start().len()),
            );
            let rate: f64 = rate_trim
                .parse()
                .map_err(|_| ParseError::new(line_no, rate_col, format!("expected a rate, got `{rate_trim}`")))?;
            if !(rate.is_finite() && rate > 0.0) {
                return Err(ParseError::new(line_no, rate_col, "rates must be positive and finite"));
            }

            let mut intern = |map: BTreeMap<usize, u32>| -> usize {
                let key: Vec<(usize, u32)> = map.iter().map(|(&i, &c)| (i, c)).collect();
                *complex_index.entry(key).or_insert_with(|| {
                    sparse_complexes.push(map);
                    sparse_complexes.len() - 1
                })
            };
            let source = intern(source_map);
            let target = intern(target_map);
            if source == target {
                return Err(ParseError::new(line_no, 1, "reaction source and target are the same complex"));
            }
            if reactions.iter().any(|r| r.source == source && r.target == target && r.rate == rate) {
                warnings.push(format!("line {line_no}: duplicate reaction kept (same endpoints and rate)"));
            }
            reactions.push(Reaction { source, target, rate });
        }

        if species.is_empty() {
            return Err(ParseError::new(1, 1, "input defines no species"));
        }
        let k = species.len();
        let complexes: Vec<Vec<u32>> = sparse_complexes
            .into_iter()
            .map(|map| {
                let mut dense = vec![0u32; k];
                for (i, c) in map {
                    dense[i] = c;
                }
                dense
            })
            .collect();
        let network = Self::new(species, complexes, reactions)
            .map_err(|e| ParseError::new(1, 1, e.to_string()))?;
        Ok(ParsedNetwork { network, warnings })
    }

    /// Inverse of [`ReactionNetwork::parse`]. The species header makes the
    /// round trip bit-exact even for species orders that differ from
    /// first-appearance order.
    pub fn serialize(&self) -> String {
        let mut out = String::from("species:");
        for s in &self.species {
            out.push(' ');
            out.push_str(s);
        }
        out.push('\n');
        for r in &self.reactions {
            out.push_str(&format!(
                "{} -> {} : {}\n",
                self.complex_display(r.source),
                self.complex_display(r.target),
                r.rate
            ));
        }
        out
    }
}

/// Per-reaction source, target, and net stoichiometry, one row per reaction
/// and one column per species.
#[derive(Debug, Clone, PartialEq)]
pub struct StoichiometricData {
    pub source: DMatrix<f64>,
    pub target: DMatrix<f64>,
    pub net: DMatrix<f64>,
}

pub fn stoichiometric_data(network: &ReactionNetwork) -> StoichiometricData {
    let k = network.k();
    let m = network.reactions().len();
    let mut source = DMatrix::<f64>::zeros(m, k);
    let mut target = DMatrix::<f64>::zeros(m, k);
    for (row, r) in network.reactions().iter().enumerate() {
        for j in 0..k {
            source[(row, j)] = f64::from(network.complexes()[r.source][j]);
            target[(row, j)] = f64::from(network.complexes()[r.target][j]);
        }
    }
    let net = &target - &source;
    StoichiometricData { source, target, net }
}

/// Evaluates the mass-action monomial `P^{s}` with `0^0 = 1`.
fn monomial(p: &[f64], exponents: &[u32]) -> f64 {
    let mut acc = 1.0;
    for (x, &e) in p.iter().zip(exponents) {
        if e > 0 {
            acc *= x.powi(e as i32);
        }
    }
    acc
}

/// The mass-action field `P -> sum_tau r(tau) (t(tau) - s(tau)) P^{s(tau)}`.
pub fn rate_field(network: &ReactionNetwork) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
    let k = network.k();
    move |_t, p, out| {
        assert_eq!(p.len(), k, "population dimension mismatch");
        out.fill(0.0);
        for r in network.reactions() {
            let s = &network.complexes()[r.source];
            let t = &network.complexes()[r.target];
            let flux = r.rate * monomial(p, s);
            for i in 0..k {
                out[i] += flux * (f64::from(t[i]) - f64::from(s[i]));
            }
        }
    }
}

/// Outcome of a complex-balance check at a specific population.
///
/// `residuals[c]` is the production rate minus the destruction rate of
/// complex `c`; the network is balanced at the tested point when the worst
/// residual is within `tolerance` times `scale`, where `scale` is the
/// largest per-complex throughput (production plus destruction) floored
/// at 1 so that near-zero populations are judged sensibly.
#[derive(Debug, Clone)]
pub struct BalanceReport {
    pub balanced: bool,
    pub residuals: Vec<f64>,
    pub tolerance: f64,
    pub scale: f64,
}

pub fn is_complex_balanced(network: &ReactionNetwork, q: &Population, tol: f64) -> BalanceReport {
    assert_eq!(q.len(), network.k(), "population dimension mismatch");
    assert!(tol > 0.0, "tolerance must be positive");
    let m = network.complexes().len();
    let mut production = vec![0.0; m];
    let mut destruction = vec![0.0; m];
    for r in network.reactions() {
        let flux = r.rate * monomial(q.counts(), &network.complexes()[r.source]);
        destruction[r.source] += flux;
        production[r.target] += flux;
    }
    let residuals: Vec<f64> = production.iter().zip(&destruction).map(|(p, d)| p - d).collect();
    let scale = production
        .iter()
        .zip(&destruction)
        .map(|(p, d)| p + d)
        .fold(1.0_f64, f64::max);
    let worst = residuals.iter().fold(0.0_f64, |acc, r| acc.max(r.abs()));
    let balanced = worst <= tol * scale;

    // The rate field is exactly the residual-weighted sum of complexes, so a
    // balanced point is automatically a near-steady state.
    #[cfg(debug_assertions)]
    {
        let field = rate_field(network);
        let mut out = vec![0.0; network.k()];
        field(0.0, q.counts(), &mut out);
        for (i, v) in out.iter().enumerate() {
            let recon: f64 = residuals
                .iter()
                .enumerate()
                .map(|(c, r)| r * f64::from(network.complexes()[c][i]))
                .sum();
            debug_assert!(
                (v - recon).abs() <= 1e-9 * scale.max(v.abs()),
                "field/residual identity violated at species {i}: {v} vs {recon}"
            );
        }
    }

    BalanceReport { balanced, residuals, tolerance: tol, scale }
}

fn jacobian(network: &ReactionNetwork, p: &[f64]) -> DMatrix<f64> {
    let k = network.k();
    let mut jac = DMatrix::<f64>::zeros(k, k);
    for r in network.reactions() {
        let s = &network.complexes()[r.source];
        let t = &network.complexes()[r.target];
        for j in 0..k {
            if s[j] == 0 {
                continue;
            }
            // d/dP_j of r * P^s: bring one factor of P_j down.
            let mut deriv = r.rate * f64::from(s[j]);
            for (l, &e) in s.iter().enumerate() {
                let e = e as i32;
                if l == j {
                    deriv *= p[l].powi(e - 1);
                } else if e > 0 {
                    deriv *= p[l].powi(e);
                }
            }
            for i in 0..k {
                jac[(i, j)] += deriv * (f64::from(t[i]) - f64::from(s[i]));
            }
        }
    }
    jac
}

/// Orthonormal basis of the stoichiometric subspace (the span of the net
/// reaction vectors), as columns of a k x d matrix.
fn stoichiometric_basis(network: &ReactionNetwork) -> DMatrix<f64> {
    let k = network.k();
    let data = stoichiometric_data(network);
    if data.net.nrows() == 0 {
        return DMatrix::zeros(k, 0);
    }
    let svd = data.net.clone().svd(false, true);
    let v_t = svd.v_t.expect("SVD with v_t requested");
    let sigma_max = svd.singular_values.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    let mut cols = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if sigma_max > 0.0 && s > 1e-12 * sigma_max {
            cols.push(v_t.row(i).transpose());
        }
    }
    let mut basis = DMatrix::zeros(k, cols.len());
    for (j, c) in cols.iter().enumerate() {
        basis.set_column(j, c);
    }
    basis
}

fn field_residual(network: &ReactionNetwork, p: &[f64]) -> (DVector<f64>, f64) {
    let field = rate_field(network);
    let mut out = vec![0.0; network.k()];
    field(0.0, p, &mut out);
    let norm = out.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    (DVector::from_vec(out), norm)
}

fn equilibrium_tolerance(p: &[f64]) -> f64 {
    1e-10 * (1.0 + p.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Integrates the rate equation to the horizon, then polishes the endpoint
/// with damped Newton steps restricted to the stoichiometric subspace (so
/// conserved quantities survive the refinement). The result is a steady
/// state of the field; whether it is complex balanced must be checked
/// separately with [`is_complex_balanced`].
pub fn find_equilibrium(
    network: &ReactionNetwork,
    p0: &Population,
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<Population, ReactionError> {
    if p0.len() != network.k() {
        return Err(ReactionError::DimensionMismatch { got: p0.len(), expected: network.k() });
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(ReactionError::BadHorizon { horizon });
    }
    let traj = integrate(rate_field(network), p0.counts(), horizon, config, &[])?;
    let mut p: Vec<f64> = traj.final_state().expect("trajectory has points").to_vec();
    for v in &mut p {
        *v = v.max(0.0);
    }

    let basis = stoichiometric_basis(network);
    for _ in 0..100 {
        let (f, res) = field_residual(network, &p);
        if res < equilibrium_tolerance(&p) {
            return Ok(Population::new(p).expect("clamped state is nonnegative"));
        }
        if basis.ncols() == 0 {
            break;
        }
        let reduced = jacobian(network, &p) * &basis;
        let rhs = -&f;
        let svd = reduced.svd(true, true);
        let sigma_max = svd.singular_values.iter().fold(0.0_f64, |acc, &s| acc.max(s));
        let Ok(u) = svd.solve(&rhs, (1e-13 * sigma_max).max(1e-300)) else {
            break;
        };
        let delta = &basis * u;

        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let candidate: Vec<f64> =
                p.iter().zip(delta.iter()).map(|(x, d)| (x + alpha * d).max(0.0)).collect();
            let (_, candidate_res) = field_residual(network, &candidate);
            if candidate_res < res {
                p = candidate;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let (_, res) = field_residual(network, &p);
    if res < equilibrium_tolerance(&p) {
        Ok(Population::new(p).expect("clamped state is nonnegative"))
    } else {
        Err(ReactionError::NoEquilibrium { last: p, residual: res })
    }
}

/// Reinterprets a purely unary network (every complex a single species with
/// coefficient one) as a Markov process on the species.
pub fn to_markov(network: &ReactionNetwork) -> Result<MarkovProcess, ReactionError> {
    let species_of = |complex_idx: usize| -> Result<usize, ReactionError> {
        let c = &network.complexes()[complex_idx];
        let mut found = None;
        for (i, &coeff) in c.iter().enumerate() {
            match (coeff, found) {
                (0, _) => {}
                (1, None) => found = Some(i),
                _ => {
                    return Err(ReactionError::NotMarkov { complex: network.complex_display(complex_idx) });
                }
            }
        }
        found.ok_or_else(|| ReactionError::NotMarkov { complex: network.complex_display(complex_idx) })
    };
    let mut transitions = Vec::with_capacity(network.reactions().len());
    for r in network.reactions() {
        transitions.push(Transition { from: species_of(r.source)?, to: species_of(r.target)?, rate: r.rate });
    }
    Ok(MarkovProcess::new(network.species().to_vec(), transitions)
        .expect("species names and unit complexes form a valid process"))
}

/// Orthonormal basis of the left null space of the net stoichiometry: every
/// returned `c` has `c . (t(tau) - s(tau)) = 0` for all reactions, so
/// `c . P(t)` is constant along the rate equation.
pub fn conservation_laws(network: &ReactionNetwork, tol: f64) -> Vec<DVector<f64>> {
    let data = stoichiometric_data(network);
    if data.net.nrows() == 0 {
        return (0..network.k())
            .map(|j| {
                let mut v = DVector::zeros(network.k());
                v[j] = 1.0;
                v
            })
            .collect();
    }
    let mut basis = crate::linalg::nullspace(&data.net, tol).expect("stoichiometry matrix is finite");
    // SVD leaves the sign of each basis vector arbitrary; orient them so the
    // first nonzero coefficient is positive, keeping output deterministic.
    for v in &mut basis {
        if let Some(&lead) = v.iter().find(|x| x.abs() > 1e-12) {
            if lead < 0.0 {
                *v = -&*v;
            }
        }
    }
    basis
}
