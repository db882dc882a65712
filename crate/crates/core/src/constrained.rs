//! Constant-modulus approximations of the unconstrained beamformer: DFT
//! column selection, phase extraction, PE-AM, fixed subarrays and dynamic
//! subarrays.
//!
//! Every alternating-minimization routine records the residual after each
//! iteration in an [`AmTrace`] and can report its iterates to an observer.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::numerics::{c, identity, svd, CMat};
use crate::rng::{rng_from_seed, unit_phase};
use crate::statistics::{trace_ratio, GroupStatistics};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_CANDIDATES: usize = 20;

/// Antenna to RF-chain wiring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Connection {
    Full {
        antennas: usize,
        chains: usize,
    },
    /// `chain_of[i]` is the RF chain that antenna `i` feeds.
    Partial {
        chain_of: Vec<usize>,
        chains: usize,
    },
}

impl Connection {
    pub fn antennas(&self) -> usize {
        match self {
            Connection::Full { antennas, .. } => *antennas,
            Connection::Partial { chain_of, .. } => chain_of.len(),
        }
    }

    pub fn chains(&self) -> usize {
        match self {
            Connection::Full { chains, .. } | Connection::Partial { chains, .. } => *chains,
        }
    }

    /// Binary `M x D` connection matrix.
    pub fn mask(&self) -> DMatrix<u8> {
        match self {
            Connection::Full { antennas, chains } => DMatrix::from_element(*antennas, *chains, 1),
            Connection::Partial { chain_of, chains } => {
                DMatrix::from_fn(chain_of.len(), *chains, |i, j| u8::from(chain_of[i] == j))
            }
        }
    }

    /// Parses a mask with exactly one 1 per row.
    pub fn from_mask(mask: &DMatrix<u8>) -> Result<Connection> {
        let chain_of = mask
            .row_iter()
            .enumerate()
            .map(|(i, row)| {
                let ones: Vec<usize> = (0..row.len()).filter(|&j| row[j] != 0).collect();
                match ones.as_slice() {
                    [j] => Ok(*j),
                    _ => Err(Error::InvalidArgument(format!(
                        "mask row {i} has {} connections, expected exactly one",
                        ones.len()
                    ))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let conn = Connection::Partial { chain_of, chains: mask.ncols() };
        conn.validate()?;
        Ok(conn)
    }

    /// Antennas per RF chain.
    pub fn chain_sizes(&self) -> Vec<usize> {
        match self {
            Connection::Full { antennas, chains } => vec![*antennas; *chains],
            Connection::Partial { chain_of, chains } => {
                let mut n = vec![0; *chains];
                for &j in chain_of {
                    n[j] += 1;
                }
                n
            }
        }
    }

    /// Every antenna on a valid chain and every chain connected to at least one antenna.
    pub fn validate(&self) -> Result<()> {
        if let Connection::Partial { chain_of, chains } = self {
            if let Some(i) = chain_of.iter().position(|&j| j >= *chains) {
                return Err(Error::InvalidArgument(format!("antenna {i} mapped to chain {} of {chains}", chain_of[i])));
            }
        }
        match self.chain_sizes().iter().position(|&n| n == 0) {
            Some(chain) => Err(Error::EmptyRfChain { chain }),
            None => Ok(()),
        }
    }
}

/// `I_D ⊗ 1_{M/D}`: contiguous blocks of antennas per chain.
pub fn ordered_mask(antennas: usize, chains: usize) -> Result<Connection> {
    check_divisible(antennas, chains)?;
    let per = antennas / chains;
    Ok(Connection::Partial { chain_of: (0..antennas).map(|i| i / per).collect(), chains })
}

/// `1_{M/D} ⊗ I_D`: antennas dealt to chains in turn.
pub fn interlaced_mask(antennas: usize, chains: usize) -> Result<Connection> {
    check_divisible(antennas, chains)?;
    Ok(Connection::Partial { chain_of: (0..antennas).map(|i| i % chains).collect(), chains })
}

fn check_divisible(antennas: usize, chains: usize) -> Result<()> {
    if chains == 0 || !antennas.is_multiple_of(chains) {
        return Err(Error::NotDivisible { dim: antennas, by: chains });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedBeamformer {
    /// Phase-shifter network, entries of modulus `1/sqrt(M)` on the connection.
    pub s_c: CMat,
    /// Digital compensation matrix.
    pub s_cm: CMat,
    pub connection: Connection,
}

impl ConstrainedBeamformer {
    /// Overall analog stage `S_c S_cm`.
    pub fn effective(&self) -> CMat {
        &self.s_c * &self.s_cm
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AmTrace {
    /// Residual after each iteration. PE-AM also stores its starting residual
    /// first, so its trace has `iterations + 1` entries.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl AmTrace {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }

    /// Appends a residual; converged when the relative change is within `tol`
    /// or the residual has reached rounding level `floor`.
    fn push(&mut self, r: f64, tol: f64, floor: f64) -> bool {
        let done = match self.residuals.last() {
            Some(&prev) => (prev - r).abs() <= tol * prev || r <= floor,
            None => false,
        };
        self.residuals.push(r);
        self.converged = done;
        done
    }
}

/// State handed to observers after each iteration.
#[derive(Debug)]
pub struct AmIterate<'a> {
    pub iteration: usize,
    pub s_c: &'a CMat,
    pub s_cm: &'a CMat,
    pub residual: f64,
}

fn check_settings(tol: f64, max_iter: usize) -> Result<()> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidArgument(format!(
            "need tol > 0 and max_iter >= 1, got tol = {tol}, max_iter = {max_iter}"
        )));
    }
    Ok(())
}

fn rounding_floor(s_geb: &CMat) -> f64 {
    1e-13 * s_geb.norm().max(f64::MIN_POSITIVE)
}

fn phase_of(z: Complex64) -> f64 {
    if z == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        z.arg()
    }
}

/// `scale * exp(j ∠X)` entrywise.
fn phase_project(x: &CMat, scale: f64) -> CMat {
    x.map(|z| Complex64::from_polar(scale, phase_of(z)))
}

/// Unitary `U V^H` from `svd(X) = U Σ V^H`, maximizing `Re tr(A^H X)`.
fn procrustes(x: &CMat) -> Result<CMat> {
    let f = svd(x)?;
    Ok(&f.u * f.v.adjoint())
}

/// Unitary `S_cm` minimizing `‖S_geb − S_c S_cm‖_F`: `V U^H` from `svd(S_geb^H S_c)`.
pub fn compensation_step(s_geb: &CMat, s_c: &CMat) -> Result<CMat> {
    Ok(procrustes(&(s_geb.adjoint() * s_c))?.adjoint())
}

/// Unitary `A` minimizing `‖S_geb A − S̃‖_F`: `U V^H` from `svd(S_geb^H S̃)`.
pub fn rotation_step(s_geb: &CMat, s_tilde: &CMat) -> Result<CMat> {
    procrustes(&(s_geb.adjoint() * s_tilde))
}

/// Column indices of the normalized DFT matrix picked for group `g`.
///
/// Column `k` of `[Q]_{mn} = exp(-j2πmn/M)/sqrt(M)` advances its phase by
/// `-2πk/M` per antenna, so it matches a steering vector at `μ` when
/// `-2πk/M ≡ π sin μ`. Each cluster first takes its best-matching column,
/// then clusters take turns claiming the nearest unused neighbours at
/// offsets `+1, -1, +2, -2, ...`.
pub fn dft_column_indices(scn: &Scenario, g: usize, d: usize) -> Result<Vec<usize>> {
    let m = scn.antennas;
    if d == 0 || d > m {
        return Err(Error::InvalidArgument(format!("number of RF chains {d} must be in 1..={m}")));
    }
    let wrap = |x: f64| (x + PI).rem_euclid(2.0 * PI) - PI;
    let mut bases: Vec<(usize, f64)> = scn
        .clusters(g)?
        .iter()
        .map(|cl| {
            let target = PI * cl.mean_aoa_deg.to_radians().sin();
            (0..m)
                .map(|k| (k, wrap(-2.0 * PI * k as f64 / m as f64 - target).abs()))
                .fold((0, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best })
        })
        .collect();
    if d < bases.len() {
        let mut order: Vec<usize> = (0..bases.len()).collect();
        order.sort_by(|&a, &b| bases[a].1.total_cmp(&bases[b].1));
        order.truncate(d);
        order.sort_unstable();
        bases = order.into_iter().map(|i| bases[i]).collect();
    }
    let offset = |t: usize| -> i64 {
        let h = t.div_ceil(2) as i64;
        if t % 2 == 1 {
            h
        } else {
            -h
        }
    };
    let mut next = vec![0usize; bases.len()];
    let mut chosen: Vec<usize> = Vec::with_capacity(d);
    'fill: loop {
        for (ci, &(base, _)) in bases.iter().enumerate() {
            if chosen.len() == d {
                break 'fill;
            }
            loop {
                let k = (base as i64 + offset(next[ci])).rem_euclid(m as i64) as usize;
                next[ci] += 1;
                if !chosen.contains(&k) {
                    chosen.push(k);
                    break;
                }
            }
        }
    }
    Ok(chosen)
}

pub fn dft_beamformer(scn: &Scenario, g: usize, d: usize) -> Result<ConstrainedBeamformer> {
    let m = scn.antennas;
    let cols = dft_column_indices(scn, g, d)?;
    let amp = 1.0 / (m as f64).sqrt();
    let s_c = CMat::from_fn(m, d, |row, j| {
        let ph = -2.0 * PI * ((row * cols[j]) % m) as f64 / m as f64;
        Complex64::from_polar(amp, ph)
    });
    Ok(ConstrainedBeamformer { s_c, s_cm: identity(d), connection: Connection::Full { antennas: m, chains: d } })
}

/// Entrywise phase of `S_geb` at modulus `1/sqrt(M)`; zero entries get phase 0.
pub fn phase_extraction(s_geb: &CMat) -> ConstrainedBeamformer {
    let (m, d) = s_geb.shape();
    ConstrainedBeamformer {
        s_c: phase_project(s_geb, 1.0 / (m as f64).sqrt()),
        s_cm: identity(d),
        connection: Connection::Full { antennas: m, chains: d },
    }
}

pub fn pe_am(s_geb: &CMat, tol: f64, max_iter: usize) -> Result<(ConstrainedBeamformer, AmTrace)> {
    pe_am_observed(s_geb, tol, max_iter, |_| {})
}

/// PE-AM: alternates the unitary compensation `S_cm = V U^H` from
/// `svd(S_geb^H S_c)` with the phase step `S_c = exp(j∠(S_geb S_cm^H))/sqrt(M)`,
/// starting from phase extraction. The residual is `‖S_geb S_cm^H − S_c‖_F`.
pub fn pe_am_observed(
    s_geb: &CMat,
    tol: f64,
    max_iter: usize,
    mut observer: impl FnMut(&AmIterate),
) -> Result<(ConstrainedBeamformer, AmTrace)> {
    check_settings(tol, max_iter)?;
    let floor = rounding_floor(s_geb);
    let scale = 1.0 / (s_geb.nrows() as f64).sqrt();
    let mut bf = phase_extraction(s_geb);
    let mut trace = AmTrace::default();
    trace.push((s_geb - &bf.s_c).norm(), tol, floor);
    for it in 1..=max_iter {
        let s_cm = compensation_step(s_geb, &bf.s_c)?;
        let target = s_geb * s_cm.adjoint();
        let s_c = phase_project(&target, scale);
        let r = (&target - &s_c).norm();
        bf.s_c = s_c;
        bf.s_cm = s_cm;
        trace.iterations = it;
        let done = trace.push(r, tol, floor);
        observer(&AmIterate { iteration: it, s_c: &bf.s_c, s_cm: &bf.s_cm, residual: r });
        if done {
            break;
        }
    }
    Ok((bf, trace))
}

/// Starting phases for [`fixed_subarray`].
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseInit {
    Given(Vec<f64>),
    Random(u64),
}

fn subarray_network(chain_of: &[usize], chains: usize, phases: &[f64]) -> CMat {
    let amp = 1.0 / (chain_of.len() as f64).sqrt();
    let mut s_c = CMat::zeros(chain_of.len(), chains);
    for (i, (&j, &b)) in chain_of.iter().zip(phases).enumerate() {
        s_c[(i, j)] = Complex64::from_polar(amp, b);
    }
    s_c
}

/// `(S_c^H S_c)^{-1} S_c^H S_geb`, using `S_c^H S_c = diag(m_j / M)`.
fn subarray_ls(s_geb: &CMat, s_c: &CMat, chain_of: &[usize], sizes: &[usize]) -> CMat {
    let m = s_geb.nrows() as f64;
    let mut s_cm = CMat::zeros(sizes.len(), s_geb.ncols());
    for (i, &j) in chain_of.iter().enumerate() {
        let w = s_c[(i, j)].conj();
        let mut row = s_cm.row_mut(j);
        row += s_geb.row(i) * w;
    }
    for (j, &n) in sizes.iter().enumerate() {
        let mut row = s_cm.row_mut(j);
        row *= c(m / n as f64);
    }
    s_cm
}

pub fn fixed_subarray(
    s_geb: &CMat,
    connection: &Connection,
    init: PhaseInit,
    tol: f64,
    max_iter: usize,
) -> Result<(ConstrainedBeamformer, AmTrace)> {
    fixed_subarray_observed(s_geb, connection, init, tol, max_iter, |_| {})
}

/// Partially connected design for a prescribed wiring. Alternates the
/// decoupled per-antenna phase step `β_i = ∠(g_i s_{j(i)}^H)` with the
/// least-squares compensation step. The residual is `‖S_geb − S_c S_cm‖_F`.
pub fn fixed_subarray_observed(
    s_geb: &CMat,
    connection: &Connection,
    init: PhaseInit,
    tol: f64,
    max_iter: usize,
    mut observer: impl FnMut(&AmIterate),
) -> Result<(ConstrainedBeamformer, AmTrace)> {
    check_settings(tol, max_iter)?;
    let floor = rounding_floor(s_geb);
    let (m, d) = s_geb.shape();
    let Connection::Partial { chain_of, chains } = connection else {
        return Err(Error::InvalidArgument("fixed subarray design needs a partial connection".into()));
    };
    if chain_of.len() != m || *chains != d {
        return Err(Error::Dimension {
            op: "fixed_subarray",
            detail: format!("connection is {}x{chains}, beamformer is {m}x{d}", chain_of.len()),
        });
    }
    connection.validate()?;
    let sizes = connection.chain_sizes();
    let phases = match init {
        PhaseInit::Given(p) => {
            if p.len() != m {
                return Err(Error::Dimension {
                    op: "fixed_subarray",
                    detail: format!("{} initial phases for {m} antennas", p.len()),
                });
            }
            p
        }
        PhaseInit::Random(seed) => {
            let mut rng = rng_from_seed(seed);
            (0..m).map(|_| unit_phase(&mut rng).arg()).collect()
        }
    };
    let mut s_c = subarray_network(chain_of, d, &phases);
    let mut s_cm = subarray_ls(s_geb, &s_c, chain_of, &sizes);
    let mut trace = AmTrace::default();
    trace.push((s_geb - &s_c * &s_cm).norm(), tol, floor);
    for it in 1..=max_iter {
        let phases: Vec<f64> =
            chain_of.iter().enumerate().map(|(i, &j)| phase_of(s_geb.row(i).dotc(&s_cm.row(j)).conj())).collect();
        s_c = subarray_network(chain_of, d, &phases);
        s_cm = subarray_ls(s_geb, &s_c, chain_of, &sizes);
        let r = (s_geb - &s_c * &s_cm).norm();
        trace.iterations = it;
        let done = trace.push(r, tol, floor);
        observer(&AmIterate { iteration: it, s_c: &s_c, s_cm: &s_cm, residual: r });
        if done {
            break;
        }
    }
    Ok((ConstrainedBeamformer { s_c, s_cm, connection: connection.clone() }, trace))
}

/// One run of the dynamic connection search.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionCandidate {
    /// Unit-modulus entries on the chosen support, zero elsewhere.
    pub s_tilde: CMat,
    /// Chosen RF chain per antenna; some chains may be left empty.
    pub chain_of: Vec<usize>,
    /// Final unitary factor.
    pub a: CMat,
}

impl ConnectionCandidate {
    /// True when every RF chain has at least one antenna.
    pub fn is_valid(&self) -> bool {
        let mut used = vec![false; self.s_tilde.ncols()];
        for &j in &self.chain_of {
            used[j] = true;
        }
        used.into_iter().all(|u| u)
    }

    pub fn phases(&self) -> Vec<f64> {
        self.chain_of.iter().enumerate().map(|(i, &j)| self.s_tilde[(i, j)].arg()).collect()
    }
}

/// Per-row assignment: column `argmax_j |P_ij|` (lowest index on ties) with a
/// unit-modulus entry at the phase of `P_ij`.
fn assign(p: &CMat) -> (CMat, Vec<usize>) {
    let (m, d) = p.shape();
    let mut s = CMat::zeros(m, d);
    let chain_of: Vec<usize> = (0..m)
        .map(|i| {
            let mut best = 0;
            for j in 1..d {
                if p[(i, j)].norm() > p[(i, best)].norm() {
                    best = j;
                }
            }
            s[(i, best)] = Complex64::from_polar(1.0, phase_of(p[(i, best)]));
            best
        })
        .collect();
    (s, chain_of)
}

pub fn dynamic_connection(
    s_geb: &CMat,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<(ConnectionCandidate, AmTrace)> {
    dynamic_connection_observed(s_geb, seed, tol, max_iter, |_| {})
}

/// Dynamic connection search. Alternates the unitary step `A = U V^H` from
/// `svd(S_geb^H S̃)` with the per-row assignment step, from a random support
/// and random phases. The residual is `‖S_geb A − S̃‖_F`. Observers see `S̃`
/// as `s_c` and `A` as `s_cm`.
pub fn dynamic_connection_observed(
    s_geb: &CMat,
    seed: u64,
    tol: f64,
    max_iter: usize,
    mut observer: impl FnMut(&AmIterate),
) -> Result<(ConnectionCandidate, AmTrace)> {
    check_settings(tol, max_iter)?;
    let floor = rounding_floor(s_geb);
    let (m, d) = s_geb.shape();
    let mut rng = rng_from_seed(seed);
    let mut chain_of: Vec<usize> = (0..m).map(|_| rng.random_range(0..d)).collect();
    let mut s_tilde = CMat::zeros(m, d);
    for (i, &j) in chain_of.iter().enumerate() {
        s_tilde[(i, j)] = unit_phase(&mut rng);
    }
    let mut a = identity(d);
    let mut trace = AmTrace::default();
    for it in 1..=max_iter {
        a = rotation_step(s_geb, &s_tilde)?;
        let p = s_geb * &a;
        (s_tilde, chain_of) = assign(&p);
        let r = (&p - &s_tilde).norm();
        trace.iterations = it;
        let done = trace.push(r, tol, floor);
        observer(&AmIterate { iteration: it, s_c: &s_tilde, s_cm: &a, residual: r });
        if done {
            break;
        }
    }
    Ok((ConnectionCandidate { s_tilde, chain_of, a }, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicReport {
    /// Expected SINR of each raw candidate; 0 for candidates leaving a chain empty.
    pub candidate_scores: Vec<f64>,
    pub candidate_valid: Vec<bool>,
    pub candidate_traces: Vec<AmTrace>,
    pub selected: usize,
    /// Score of the selected raw candidate.
    pub raw_score: f64,
    /// Score of the refined `S_c S_cm`.
    pub refined_score: f64,
    /// Fixed-subarray refinement on the selected wiring.
    pub refinement: AmTrace,
}

/// Dynamic subarray design: `n_iter` connection searches with seeds
/// `seed + t`, ranked by expected SINR, the best one refined as a fixed
/// subarray on its own wiring and phases.
pub fn dynamic_subarray(
    s_geb: &CMat,
    stats: &GroupStatistics,
    n_iter: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<(ConstrainedBeamformer, DynamicReport)> {
    if n_iter == 0 {
        return Err(Error::InvalidArgument("N_iter must be at least 1".into()));
    }
    if s_geb.nrows() != stats.antennas() {
        return Err(Error::Dimension {
            op: "dynamic_subarray",
            detail: "beamformer and statistics disagree on the antenna count".into(),
        });
    }
    let runs = (0..n_iter)
        .into_par_iter()
        .map(|t| dynamic_connection(s_geb, seed.wrapping_add(t as u64), tol, max_iter))
        .collect::<Result<Vec<_>>>()?;
    let candidate_valid: Vec<bool> = runs.iter().map(|(cand, _)| cand.is_valid()).collect();
    let candidate_scores: Vec<f64> = runs
        .iter()
        .zip(&candidate_valid)
        .map(|((cand, _), &ok)| if ok { trace_ratio(stats, &cand.s_tilde) } else { 0.0 })
        .collect();
    let selected = (0..n_iter)
        .filter(|&t| candidate_valid[t])
        .fold(None, |best: Option<usize>, t| match best {
            Some(b) if candidate_scores[b] >= candidate_scores[t] => Some(b),
            _ => Some(t),
        })
        .ok_or(Error::CandidatesExhausted { candidates: n_iter })?;
    let best = &runs[selected].0;
    let connection = Connection::Partial { chain_of: best.chain_of.clone(), chains: s_geb.ncols() };
    let (bf, refinement) = fixed_subarray(s_geb, &connection, PhaseInit::Given(best.phases()), tol, max_iter)?;
    let refined_score = trace_ratio(stats, &bf.effective());
    Ok((
        bf,
        DynamicReport {
            raw_score: candidate_scores[selected],
            candidate_scores,
            candidate_valid,
            candidate_traces: runs.into_iter().map(|(_, tr)| tr).collect(),
            selected,
            refined_score,
            refinement,
        },
    ))
}
