//! Multi-arm beams: superpositions of codebook rows with per-arm phases.
//!
//! Patterns are power-normalized: `W = |g(p)ᴴ w|²` for the multi-arm weights
//! `w` and `W' = |g(p)ᴴ c_s|²` for a single codeword, with `g(p)` the unit
//! steering vector toward the evaluation point. A codeword's own pattern is
//! 1 at its sampling point, and a received power is `P_0·MN·β²·W`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{inner, steering_from_direction, steering_vector, ArrayConfig, Direction, PolarPoint, SteeringMode};
use crate::codebook::io::{fmt_real, header_line, parse_header, parse_real, parse_usize, parse_weights, push_weights};
use crate::codebook::{ring_spacing, zeta_for_threshold, RingAxis, SingleBeamCodebook, DEFAULT_THRESHOLD};
use crate::error::{domain, Error, Result};
use crate::hash::BucketPartition;

/// Floor applied to `W'` in the deviation ratio.
pub const PATTERN_FLOOR: f64 = 1e-6;

/// Phase grid size used by coordinate descent.
pub const PHASE_GRID: usize = 16;

/// One row of a multi-arm codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiArmCodeword {
    pub weights: Vec<Complex64>,
    /// Codebook indices of the arms, in bucket order.
    pub bucket: Vec<usize>,
    /// Per-arm phases in radians.
    pub phases: Vec<f64>,
}

impl MultiArmCodeword {
    pub fn arms(&self) -> usize {
        self.bucket.len()
    }
}

fn check_bucket(bucket: &[usize], codebook: &SingleBeamCodebook) -> Result<()> {
    if bucket.is_empty() {
        return domain("bucket is empty");
    }
    if let Some(&bad) = bucket.iter().find(|&&s| s >= codebook.len()) {
        return domain(format!("codeword {bad} out of range for {} rows", codebook.len()));
    }
    Ok(())
}

/// `Σ_i e^{jϑ_i}/√V · c_{bucket[i]}`.
pub fn synthesize(bucket: &[usize], codebook: &SingleBeamCodebook, phases: &[f64]) -> Result<MultiArmCodeword> {
    check_bucket(bucket, codebook)?;
    if phases.len() != bucket.len() {
        return domain(format!("{} phases for {} arms", phases.len(), bucket.len()));
    }
    let scale = 1.0 / (bucket.len() as f64).sqrt();
    let mut weights = vec![Complex64::new(0.0, 0.0); codebook.array.num_elements()];
    for (&s, &phase) in bucket.iter().zip(phases) {
        let coef = Complex64::from_polar(scale, phase);
        for (w, c) in weights.iter_mut().zip(codebook.row(s)) {
            *w += coef * c;
        }
    }
    Ok(MultiArmCodeword {
        weights,
        bucket: bucket.to_vec(),
        phases: phases.to_vec(),
    })
}

/// Pattern of arbitrary weights at `point`: `|g(point)ᴴ w|²`.
pub fn pattern_of(cfg: &ArrayConfig, point: &PolarPoint, weights: &[Complex64]) -> f64 {
    inner(&steering_vector(cfg, point, SteeringMode::Exact), weights).norm_sqr()
}

/// Multi-arm pattern `W` at `point`.
pub fn pattern_multi(
    point: &PolarPoint,
    phases: &[f64],
    bucket: &[usize],
    codebook: &SingleBeamCodebook,
) -> Result<f64> {
    let cw = synthesize(bucket, codebook, phases)?;
    Ok(pattern_of(&codebook.array, point, &cw.weights))
}

/// Single-beam pattern `W'` of codeword `s` at `point`.
pub fn pattern_single(point: &PolarPoint, s: usize, codebook: &SingleBeamCodebook) -> Result<f64> {
    check_bucket(&[s], codebook)?;
    Ok(pattern_of(&codebook.array, point, codebook.row(s)))
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Main-lobe region of one codeword.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MainLobe {
    /// `cosθ·sinφ` range, `u_s ± 1/N`.
    pub u: Interval,
    /// `cosφ` range, `cosφ_s ± 1/M`.
    pub c: Interval,
    /// Distance range; `hi` may be infinite.
    pub r: Interval,
}

impl MainLobe {
    /// Distance range as inverse distance `[1/r.hi, 1/r.lo]`.
    pub fn inverse_r(&self) -> Interval {
        Interval::new(1.0 / self.r.hi, 1.0 / self.r.lo)
    }
}

/// Half the inverse-distance ring step at codeword `s`.
fn half_step(codebook: &SingleBeamCodebook, s: usize) -> Option<f64> {
    let p = &codebook.points[s];
    if p.ring > 0 {
        return Some(0.5 / (p.ring as f64 * p.r));
    }
    // far-field codeword: borrow the step from a sibling ring at the same angle
    if let Some(q) = codebook.points.iter().find(|q| q.s == p.s && q.t == p.t && q.ring > 0) {
        return Some(0.5 / (q.ring as f64 * q.r));
    }
    let zeta = codebook.zeta.or_else(|| zeta_for_threshold(DEFAULT_THRESHOLD).ok())?;
    ring_spacing(&codebook.array, p.direction, zeta, RingAxis::Finer).map(|step| 0.5 * step)
}

/// Main lobe of codeword `s`.
///
/// With `X` half the ring step at this angle, a near-field codeword at `r_s`
/// covers `[(1 + r_s·X)/(1/r_s + 2X), (1 - r_s·X)/(1/r_s - 2X)]`, the upper
/// end being infinite once the denominator reaches zero. A far-field codeword
/// covers `(1/X, ∞)`. Lower ends are clipped to `r_min`.
pub fn main_lobe(s: usize, codebook: &SingleBeamCodebook, r_min: f64) -> Result<MainLobe> {
    check_bucket(&[s], codebook)?;
    if !(r_min > 0.0) {
        return domain(format!("r_min must be positive (got {r_min})"));
    }
    let cfg = &codebook.array;
    let p = &codebook.points[s];
    let du = 1.0 / cfg.n as f64;
    let dc = 1.0 / cfg.m as f64;
    let u = Interval::new(p.direction.u - du, p.direction.u + du);
    let c = Interval::new(p.direction.c - dc, p.direction.c + dc);
    let r = match half_step(codebook, s) {
        None => Interval::new(r_min, f64::INFINITY),
        Some(x) if p.r.is_infinite() => Interval::new((1.0 / x).max(r_min), f64::INFINITY),
        Some(x) => {
            let rs = p.r;
            let lo = (1.0 + rs * x) / (1.0 / rs + 2.0 * x);
            let denom = 1.0 / rs - 2.0 * x;
            let hi = if denom > 1e-12 / rs {
                (1.0 - rs * x) / denom
            } else {
                f64::INFINITY
            };
            Interval::new(lo.max(r_min), hi.max(lo.max(r_min)))
        }
    };
    Ok(MainLobe { u, c, r })
}

/// Quadrature settings for [`deviation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    /// Midpoint nodes per axis.
    pub resolution: usize,
    pub r_min: f64,
}

impl Quadrature {
    pub fn new(resolution: usize, r_min: f64) -> Result<Self> {
        if resolution < 4 {
            return domain(format!("quadrature needs at least 4 nodes per axis (got {resolution})"));
        }
        if !(r_min > 0.0) {
            return domain(format!("r_min must be positive (got {r_min})"));
        }
        Ok(Self { resolution, r_min })
    }

    pub fn for_array(cfg: &ArrayConfig) -> Self {
        Self {
            resolution: 8,
            r_min: cfg.fresnel_boundary(),
        }
    }
}

fn midpoints(iv: Interval, n: usize) -> impl Iterator<Item = f64> {
    let h = iv.width() / n as f64;
    (0..n).map(move |i| iv.lo + (i as f64 + 0.5) * h)
}

/// Precomputed arm responses over every main-lobe node of one bucket.
///
/// For arm `i`, node `p` of its main lobe and arm `j`, stores
/// `g(p)ᴴ c_{bucket[j]}`, so evaluating the deviation for new phases costs
/// `O(V²·nodes)` with no steering vectors recomputed.
#[derive(Debug, Clone)]
pub struct DeviationEvaluator {
    arms: usize,
    /// Per arm: node responses, `arms` values per node.
    responses: Vec<Vec<Complex64>>,
    /// Per arm: floored single-beam pattern per node.
    single: Vec<Vec<f64>>,
}

impl DeviationEvaluator {
    pub fn new(bucket: &[usize], codebook: &SingleBeamCodebook, quad: &Quadrature) -> Result<Self> {
        check_bucket(bucket, codebook)?;
        let cfg = &codebook.array;
        let arms = bucket.len();
        let per_arm: Vec<(Vec<Complex64>, Vec<f64>)> = bucket
            .par_iter()
            .enumerate()
            .map(|(i, &s)| -> Result<_> {
                let lobe = main_lobe(s, codebook, quad.r_min)?;
                let mut resp = Vec::new();
                let mut single = Vec::new();
                let inv = lobe.inverse_r();
                for u in midpoints(lobe.u, quad.resolution) {
                    for c in midpoints(lobe.c, quad.resolution) {
                        let dir = Direction { u, c };
                        if !dir.is_visible() {
                            continue;
                        }
                        for ir in midpoints(inv, quad.resolution) {
                            let r = if ir > 0.0 { 1.0 / ir } else { f64::INFINITY };
                            let g = steering_from_direction(cfg, dir, r, SteeringMode::Exact);
                            let start = resp.len();
                            resp.extend(bucket.iter().map(|&t| inner(&g, codebook.row(t))));
                            single.push(resp[start + i].norm_sqr().max(PATTERN_FLOOR));
                        }
                    }
                }
                Ok((resp, single))
            })
            .collect::<Result<_>>()?;
        let (responses, single) = per_arm.into_iter().unzip();
        Ok(Self {
            arms,
            responses,
            single,
        })
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    fn coefficients(&self, phases: &[f64]) -> Vec<Complex64> {
        let scale = 1.0 / (self.arms as f64).sqrt();
        phases.iter().map(|&p| Complex64::from_polar(scale, p)).collect()
    }

    /// Mean relative deviation of arm `i` over its main lobe.
    fn arm_deviation(&self, i: usize, coef: &[Complex64]) -> f64 {
        let single = &self.single[i];
        if single.is_empty() {
            return 0.0;
        }
        let total: f64 = self.responses[i]
            .chunks_exact(self.arms)
            .zip(single)
            .map(|(resp, &w1)| {
                let amp: Complex64 = resp.iter().zip(coef).map(|(a, b)| a * b).sum();
                (amp.norm_sqr() - w1).abs() / w1
            })
            .sum();
        total / single.len() as f64
    }

    /// `δ_W(ϑ)`, the arm-averaged deviation.
    pub fn deviation(&self, phases: &[f64]) -> Result<f64> {
        if phases.len() != self.arms {
            return domain(format!("{} phases for {} arms", phases.len(), self.arms));
        }
        let coef = self.coefficients(phases);
        Ok((0..self.arms).map(|i| self.arm_deviation(i, &coef)).sum::<f64>() / self.arms as f64)
    }

    /// Deviation for each candidate value of phase `k` with the others fixed.
    fn scan_coordinate(&self, phases: &[f64], k: usize, grid: &[f64]) -> Vec<f64> {
        let scale = 1.0 / (self.arms as f64).sqrt();
        let coef = self.coefficients(phases);
        let candidates: Vec<Complex64> = grid.iter().map(|&p| Complex64::from_polar(scale, p)).collect();
        let mut totals = vec![0.0; grid.len()];
        for i in 0..self.arms {
            let single = &self.single[i];
            if single.is_empty() {
                continue;
            }
            let mut acc = vec![0.0; grid.len()];
            for (resp, &w1) in self.responses[i].chunks_exact(self.arms).zip(single) {
                let rest: Complex64 = resp
                    .iter()
                    .zip(&coef)
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, (a, b))| a * b)
                    .sum();
                for (slot, cand) in acc.iter_mut().zip(&candidates) {
                    let amp = rest + resp[k] * cand;
                    *slot += (amp.norm_sqr() - w1).abs() / w1;
                }
            }
            for (t, a) in totals.iter_mut().zip(acc) {
                *t += a / single.len() as f64;
            }
        }
        totals.iter().map(|t| t / self.arms as f64).collect()
    }
}

/// Deviation of the multi-arm pattern from each arm's single-beam pattern,
/// averaged over the arms' main lobes (midpoint rule, nodes uniform in
/// `u`, `cosφ` and `1/r`).
pub fn deviation(phases: &[f64], bucket: &[usize], codebook: &SingleBeamCodebook, quad: &Quadrature) -> Result<f64> {
    DeviationEvaluator::new(bucket, codebook, quad)?.deviation(phases)
}

/// Search limits for [`optimize_phases`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSearch {
    pub sweeps: usize,
    pub restarts: usize,
    /// Maximum number of deviation evaluations.
    pub budget: usize,
}

impl Default for PhaseSearch {
    fn default() -> Self {
        Self {
            sweeps: 2,
            restarts: 4,
            budget: 100_000,
        }
    }
}

/// Outcome of a phase search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSolution {
    pub phases: Vec<f64>,
    pub deviation: f64,
    /// Deviation with all phases zero.
    pub baseline: f64,
    pub evaluations: usize,
    /// Deviation after each completed sweep, across all restarts.
    pub history: Vec<f64>,
}

pub fn phase_grid() -> Vec<f64> {
    (0..PHASE_GRID)
        .map(|i| 2.0 * PI * i as f64 / PHASE_GRID as f64)
        .collect()
}

/// Coordinate descent over [`phase_grid`] with the first phase pinned to 0.
///
/// The first start is all-zero and later starts are random grid points, so
/// the result never exceeds the all-zero deviation.
pub fn optimize_phases<R: Rng + ?Sized>(
    eval: &DeviationEvaluator,
    search: &PhaseSearch,
    rng: &mut R,
) -> Result<PhaseSolution> {
    if search.budget == 0 {
        return domain("phase search needs a budget of at least one evaluation");
    }
    let v = eval.arms();
    let zeros = vec![0.0; v];
    let baseline = eval.deviation(&zeros)?;
    let mut best = (zeros.clone(), baseline);
    let mut evaluations = 1;
    let mut history = Vec::new();
    let grid = phase_grid();
    'outer: for restart in 0..search.restarts.max(1) {
        let mut phases = zeros.clone();
        if restart > 0 {
            for p in phases.iter_mut().skip(1) {
                *p = grid[rng.random_range(0..grid.len())];
            }
        }
        let mut current = if restart == 0 {
            baseline
        } else {
            evaluations += 1;
            eval.deviation(&phases)?
        };
        for _ in 0..search.sweeps {
            for k in 1..v {
                if evaluations + grid.len() > search.budget {
                    if current < best.1 {
                        best = (phases.clone(), current);
                    }
                    break 'outer;
                }
                let values = eval.scan_coordinate(&phases, k, &grid);
                evaluations += grid.len();
                let (arg, &val) = values
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .expect("grid is nonempty");
                if val < current {
                    phases[k] = grid[arg];
                    current = val;
                }
            }
            history.push(current);
        }
        if current < best.1 {
            best = (phases, current);
        }
    }
    Ok(PhaseSolution {
        phases: best.0,
        deviation: best.1,
        baseline,
        evaluations,
        history,
    })
}

/// Options for [`build_multiarm_codebook`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiBeamOptions {
    pub optimize: bool,
    pub quadrature: Quadrature,
    pub search: PhaseSearch,
    /// Seed for the phase-search restarts.
    pub seed: u64,
}

impl MultiBeamOptions {
    pub fn for_array(cfg: &ArrayConfig) -> Self {
        Self {
            optimize: false,
            quadrature: Quadrature::for_array(cfg),
            search: PhaseSearch::default(),
            seed: 0,
        }
    }
}

/// One multi-arm row per bucket of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiArmCodebook {
    pub rows: Vec<MultiArmCodeword>,
    pub partition: BucketPartition,
    /// `δ_W` per row when phases were optimized.
    pub deviations: Option<Vec<f64>>,
}

impl MultiArmCodebook {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Synthesizes one row per bucket, optionally with optimized phases.
pub fn build_multiarm_codebook(
    partition: &BucketPartition,
    codebook: &SingleBeamCodebook,
    opts: &MultiBeamOptions,
) -> Result<MultiArmCodebook> {
    if partition.universe() != codebook.len() {
        return domain(format!(
            "partition covers {} keys but the codebook has {} rows",
            partition.universe(),
            codebook.len()
        ));
    }
    if !opts.optimize {
        let rows = partition
            .buckets()
            .iter()
            .map(|b| synthesize(b, codebook, &vec![0.0; b.len()]))
            .collect::<Result<_>>()?;
        return Ok(MultiArmCodebook {
            rows,
            partition: partition.clone(),
            deviations: None,
        });
    }
    let solved: Vec<(MultiArmCodeword, f64)> = partition
        .buckets()
        .par_iter()
        .enumerate()
        .map(|(b, bucket)| {
            let eval = DeviationEvaluator::new(bucket, codebook, &opts.quadrature)?;
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(b as u64);
            let sol = optimize_phases(&eval, &opts.search, &mut rng)?;
            Ok((synthesize(bucket, codebook, &sol.phases)?, sol.deviation))
        })
        .collect::<Result<_>>()?;
    let (rows, devs) = solved.into_iter().unzip();
    Ok(MultiArmCodebook {
        rows,
        partition: partition.clone(),
        deviations: Some(devs),
    })
}

/// Text form: the codebook header with the row count set to `B`, then per
/// row `b V idx… phase… re im …`.
pub fn render_multiarm(cb: &MultiArmCodebook, array: &ArrayConfig, threshold: Option<f64>) -> String {
    let mut out = header_line(array, threshold, cb.len());
    out.push('\n');
    for (b, row) in cb.rows.iter().enumerate() {
        let _ = write!(out, "{b} {}", row.arms());
        for s in &row.bucket {
            let _ = write!(out, " {s}");
        }
        for &p in &row.phases {
            out.push(' ');
            out.push_str(&fmt_real(p));
        }
        push_weights(&mut out, &row.weights);
        out.push('\n');
    }
    out
}

/// Parses [`render_multiarm`] output into rows.
pub fn parse_multiarm(text: &str) -> Result<(ArrayConfig, Vec<MultiArmCodeword>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty multi-arm codebook".into()))?;
    let (array, _, count) = parse_header(header)?;
    let mn = array.num_elements();
    let mut rows = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() < 2 {
            return Err(Error::Parse(format!("row {i} is truncated")));
        }
        if parse_usize(tok[0])? != i {
            return Err(Error::Parse(format!("row {i} is out of order")));
        }
        let v = parse_usize(tok[1])?;
        if tok.len() != 2 + 2 * v + 2 * mn {
            return Err(Error::Parse(format!(
                "row {i} has {} fields, expected {}",
                tok.len(),
                2 + 2 * v + 2 * mn
            )));
        }
        let bucket = tok[2..2 + v].iter().map(|t| parse_usize(t)).collect::<Result<_>>()?;
        let phases = tok[2 + v..2 + 2 * v]
            .iter()
            .map(|t| parse_real(t))
            .collect::<Result<_>>()?;
        let weights = parse_weights(&tok[2 + 2 * v..], mn)?;
        rows.push(MultiArmCodeword {
            weights,
            bucket,
            phases,
        });
    }
    if rows.len() != count {
        return Err(Error::Parse(format!(
            "header promises {count} rows, found {}",
            rows.len()
        )));
    }
    Ok((array, rows))
}

/// How far a row's power toward each arm departs from the cross-term-free
/// value `1/V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmFidelity {
    /// Mean of `|V·|c_sᴴw|² - 1|` over the arms.
    pub mean: f64,
    pub max: f64,
}

/// Evaluates `|c_sᴴ w|²` at every arm `s` of `row` against `1/V`.
pub fn arm_fidelity(row: &MultiArmCodeword, codebook: &SingleBeamCodebook) -> Result<ArmFidelity> {
    check_bucket(&row.bucket, codebook)?;
    let v = row.arms() as f64;
    let errs: Vec<f64> = row
        .bucket
        .iter()
        .map(|&s| (v * inner(codebook.row(s), &row.weights).norm_sqr() - 1.0).abs())
        .collect();
    Ok(ArmFidelity {
        mean: errs.iter().sum::<f64>() / v,
        max: errs.iter().cloned().fold(0.0, f64::max),
    })
}
