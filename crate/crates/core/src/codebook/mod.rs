//! Polar-domain single-beam codebook.
//!
//! Angles are sampled where far-field codewords hit the zeros of the array's
//! Dirichlet kernel: `cosφ = (2s-M-1)/M` along z and `u = cosθ·sinφ =
//! (2t-N-1)/N` along x. At each angle, distances are sampled on rings
//! equally spaced in `κ/r`. The spacing is chosen so that the Fresnel
//! approximation of the projection between adjacent rings stays at or below
//! the coherence threshold `Δ`. Ring 0 is the far-field codeword.

mod fresnel;
pub(crate) mod io;

pub use fresnel::{fresnel, fresnel_ratio, zeta_for_threshold};
pub use io::{parse_codebook, read_codebook, render_codebook, write_codebook};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{inner, steering_from_direction, ArrayConfig, Direction, PolarPoint, SteeringMode};
use crate::error::{domain, Result};

/// Default coherence threshold between adjacent distance rings.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// One sampled direction of the angular grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    /// 1-based sample index along z.
    pub s: usize,
    /// 1-based sample index along x.
    pub t: usize,
    pub direction: Direction,
}

fn grid_value(i: usize, count: usize) -> f64 {
    (2.0 * i as f64 - count as f64 - 1.0) / count as f64
}

/// All `M·N` angle pairs, including directions outside the visible region.
pub fn full_angular_grid(cfg: &ArrayConfig) -> Vec<AnglePair> {
    let mut out = Vec::with_capacity(cfg.num_elements());
    for s in 1..=cfg.m {
        for t in 1..=cfg.n {
            out.push(AnglePair {
                s,
                t,
                direction: Direction {
                    u: grid_value(t, cfg.n),
                    c: grid_value(s, cfg.m),
                },
            });
        }
    }
    out
}

/// Angle pairs that correspond to a physical direction (`|u| ≤ sinφ`).
pub fn angular_grid(cfg: &ArrayConfig) -> Vec<AnglePair> {
    full_angular_grid(cfg)
        .into_iter()
        .filter(|p| p.direction.u.abs() <= p.direction.kappa_z().sqrt() + 1e-12)
        .collect()
}

/// Which array axis sets the ring spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RingAxis {
    /// Whichever axis yields the finer spacing at this angle.
    #[default]
    Finer,
    /// z-axis only: factor `sin²φ/(M²d_z²)`.
    Z,
    /// x-axis only: factor `(1 - cos²θ·sin²φ)/(N²d_x²)`.
    X,
}

impl std::str::FromStr for RingAxis {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finer" => Ok(RingAxis::Finer),
            "z" => Ok(RingAxis::Z),
            "x" => Ok(RingAxis::X),
            _ => Err(crate::error::Error::Domain(format!(
                "unknown ring axis {s:?} (expected finer, z or x)"
            ))),
        }
    }
}

/// Spacing of adjacent rings in inverse distance (1/m), or `None` when the
/// direction is degenerate and only the far-field codeword exists.
pub fn ring_spacing(cfg: &ArrayConfig, dir: Direction, zeta: f64, axis: RingAxis) -> Option<f64> {
    let kz = dir.kappa_z();
    if kz < 1e-12 {
        return None;
    }
    let numer = 2.0 * cfg.wavelength * zeta * zeta;
    let z_axis = numer / ((cfg.m as f64 * cfg.dz).powi(2) * kz);
    let kx = dir.kappa_x();
    let x_axis = (kx > 1e-12).then(|| numer / ((cfg.n as f64 * cfg.dx).powi(2) * kx));
    match axis {
        RingAxis::Z => Some(z_axis),
        RingAxis::X => x_axis,
        RingAxis::Finer => Some(x_axis.map_or(z_axis, |x| x.min(z_axis))),
    }
}

/// A sampled distance at one angle; `index` 0 is the far-field ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub index: usize,
    pub r: f64,
}

/// Distance rings for one angle, far field first then decreasing distance.
///
/// Ring `j` sits at `1/r = j·spacing`; rings outside `[r_min, r_max]` are
/// dropped while the far-field ring is always kept.
pub fn distance_rings(
    pair: &AnglePair,
    zeta: f64,
    cfg: &ArrayConfig,
    r_min: f64,
    r_max: f64,
    axis: RingAxis,
) -> Vec<Ring> {
    let mut rings = vec![Ring {
        index: 0,
        r: f64::INFINITY,
    }];
    let Some(step) = ring_spacing(cfg, pair.direction, zeta, axis) else {
        return rings;
    };
    if !(step > 0.0) || !step.is_finite() || !(r_min > 0.0) {
        return rings;
    }
    let j_max = (1.0 / (step * r_min)).floor() as usize;
    let j_min = if r_max.is_finite() {
        ((1.0 / (step * r_max)).ceil() as usize).max(1)
    } else {
        1
    };
    for j in j_min..=j_max {
        let r = 1.0 / (j as f64 * step);
        if r >= r_min && r <= r_max {
            rings.push(Ring { index: j, r });
        }
    }
    rings
}

/// Construction parameters for [`build_codebook`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodebookParams {
    /// Coherence threshold `Δ` between adjacent rings.
    pub threshold: f64,
    pub r_min: f64,
    pub r_max: f64,
    #[serde(default)]
    pub axis: RingAxis,
    /// Keep only ring 0 at every angle.
    #[serde(default)]
    pub far_field_only: bool,
}

impl CodebookParams {
    /// Default threshold with the radiating near-field region of `cfg`.
    pub fn for_array(cfg: &ArrayConfig) -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            r_min: cfg.fresnel_boundary(),
            r_max: cfg.rayleigh_distance(),
            axis: RingAxis::Finer,
            far_field_only: false,
        }
    }
}

/// Grid coordinates of one codeword.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPoint {
    pub s: usize,
    pub t: usize,
    pub ring: usize,
    pub direction: Direction,
    pub r: f64,
}

impl SamplingPoint {
    pub fn polar(&self) -> PolarPoint {
        PolarPoint::from_cosines(self.direction.u, self.direction.c, self.r)
    }
}

/// `S × MN` matrix of unit-norm codewords with their sampling points.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleBeamCodebook {
    pub array: ArrayConfig,
    pub points: Vec<SamplingPoint>,
    pub rows: Vec<Vec<Complex64>>,
    /// `Δ` used for the ring spacing, absent for the DFT codebook.
    pub threshold: Option<f64>,
    pub zeta: Option<f64>,
}

impl SingleBeamCodebook {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, index: usize) -> &[Complex64] {
        &self.rows[index]
    }

    /// `|row_p · row_qᴴ|`.
    pub fn projection(&self, p: usize, q: usize) -> Result<f64> {
        if p >= self.len() || q >= self.len() {
            return domain(format!("row index out of range for {} codewords", self.len()));
        }
        Ok(inner(&self.rows[q], &self.rows[p]).norm())
    }

    /// Largest projection over all distinct pairs.
    pub fn coherence(&self) -> f64 {
        self.max_projection(|_, _| true)
    }

    /// Largest projection over pairs sharing an angle but not a ring.
    pub fn ring_coherence(&self) -> f64 {
        self.max_projection(|a, b| a.s == b.s && a.t == b.t && a.ring != b.ring)
    }

    fn max_projection<F>(&self, keep: F) -> f64
    where
        F: Fn(&SamplingPoint, &SamplingPoint) -> bool + Sync,
    {
        (0..self.len())
            .into_par_iter()
            .map(|p| {
                ((p + 1)..self.len())
                    .filter(|&q| keep(&self.points[p], &self.points[q]))
                    .map(|q| inner(&self.rows[q], &self.rows[p]).norm())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Indices of the far-field (ring 0) codewords.
    pub fn far_field_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.points[i].ring == 0).collect()
    }

    /// `|hᴴ c_s|` for every codeword.
    pub fn responses(&self, h: &[Complex64]) -> Vec<f64> {
        self.rows.iter().map(|c| inner(h, c).norm()).collect()
    }

    /// Codeword maximizing `|hᴴ c_s|²`; ties go to the smaller index.
    pub fn best_index(&self, h: &[Complex64]) -> usize {
        argmax(&self.responses(h))
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn rows_for(cfg: &ArrayConfig, points: &[SamplingPoint]) -> Vec<Vec<Complex64>> {
    points
        .par_iter()
        .map(|p| steering_from_direction(cfg, p.direction, p.r, SteeringMode::Exact))
        .collect()
}

/// Builds the polar-domain codebook, angle-major and ring-minor.
pub fn build_codebook(cfg: &ArrayConfig, params: &CodebookParams) -> Result<SingleBeamCodebook> {
    cfg.validate()?;
    if !(params.r_min > 0.0) || !(params.r_max >= params.r_min) {
        return domain(format!("invalid distance range [{}, {}]", params.r_min, params.r_max));
    }
    let zeta = zeta_for_threshold(params.threshold)?;
    let mut points = Vec::new();
    for pair in angular_grid(cfg) {
        let rings = if params.far_field_only {
            vec![Ring {
                index: 0,
                r: f64::INFINITY,
            }]
        } else {
            distance_rings(&pair, zeta, cfg, params.r_min, params.r_max, params.axis)
        };
        points.extend(rings.into_iter().map(|ring| SamplingPoint {
            s: pair.s,
            t: pair.t,
            ring: ring.index,
            direction: pair.direction,
            r: ring.r,
        }));
    }
    let rows = rows_for(cfg, &points);
    Ok(SingleBeamCodebook {
        array: *cfg,
        points,
        rows,
        threshold: Some(params.threshold),
        zeta: Some(zeta),
    })
}

/// Far-field DFT codebook over the full `M·N` angular grid.
pub fn dft_codebook(cfg: &ArrayConfig) -> SingleBeamCodebook {
    let points: Vec<SamplingPoint> = full_angular_grid(cfg)
        .into_iter()
        .map(|p| SamplingPoint {
            s: p.s,
            t: p.t,
            ring: 0,
            direction: p.direction,
            r: f64::INFINITY,
        })
        .collect();
    let rows = rows_for(cfg, &points);
    SingleBeamCodebook {
        array: *cfg,
        points,
        rows,
        threshold: None,
        zeta: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{steering_vector, PolarPoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn desk() -> ArrayConfig {
        ArrayConfig::half_wavelength(4, 32, 28e9).unwrap()
    }

    fn brute_projection(a: &[Complex64], b: &[Complex64]) -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (x, y) in a.iter().zip(b) {
            // a · bᴴ
            re += x.re * y.re + x.im * y.im;
            im += x.im * y.re - x.re * y.im;
        }
        (re * re + im * im).sqrt()
    }

    #[test]
    fn cos_phi_samples() {
        let cfg = ArrayConfig::half_wavelength(4, 1, 28e9).unwrap();
        let mut c: Vec<f64> = full_angular_grid(&cfg).iter().map(|p| p.direction.c).collect();
        c.dedup();
        assert_eq!(c, vec![-0.75, -0.25, 0.25, 0.75]);
        let cfg = ArrayConfig::half_wavelength(2, 1, 28e9).unwrap();
        let c: Vec<f64> = full_angular_grid(&cfg).iter().map(|p| p.direction.c).collect();
        assert_eq!(c, vec![-0.5, 0.5]);
    }

    #[test]
    fn visible_grid_filters_invalid_cosines() {
        let cfg = desk();
        let grid = angular_grid(&cfg);
        assert_eq!(grid.len(), 104);
        assert!(grid.iter().all(|p| p.direction.is_visible()));
        assert_eq!(full_angular_grid(&cfg).len(), 128);
    }

    #[test]
    fn adjacent_u_samples_are_orthogonal() {
        let cfg = ArrayConfig::half_wavelength(1, 8, 28e9).unwrap();
        let grid = full_angular_grid(&cfg);
        for w in grid.windows(2) {
            let a = steering_from_direction(&cfg, w[0].direction, f64::INFINITY, SteeringMode::Exact);
            let b = steering_from_direction(&cfg, w[1].direction, f64::INFINITY, SteeringMode::Exact);
            assert!(brute_projection(&a, &b) <= 1e-10);
        }
    }

    #[test]
    fn degenerate_angle_keeps_only_far_field() {
        let cfg = desk();
        let zeta = zeta_for_threshold(0.5).unwrap();
        let pair = AnglePair {
            s: 1,
            t: 1,
            direction: Direction { u: 0.0, c: 1.0 },
        };
        let rings = distance_rings(&pair, zeta, &cfg, 1e-3, 1e3, RingAxis::Finer);
        assert_eq!(rings.len(), 1);
        assert!(rings[0].r.is_infinite());

        // z-criterion as φ → 0: spacing blows up, no finite ring survives
        let pair = AnglePair {
            s: 1,
            t: 1,
            direction: Direction {
                u: 0.0,
                c: (1.0f64 - 1e-10).sqrt(),
            },
        };
        let rings = distance_rings(&pair, zeta, &cfg, 0.01, 1e3, RingAxis::Z);
        assert_eq!(rings.len(), 1);
    }

    #[test]
    fn rings_are_far_field_first_then_closer() {
        let cfg = desk();
        let params = CodebookParams::for_array(&cfg);
        let zeta = zeta_for_threshold(params.threshold).unwrap();
        let pair = angular_grid(&cfg)[40];
        let rings = distance_rings(&pair, zeta, &cfg, params.r_min, params.r_max, params.axis);
        assert!(rings.len() > 1);
        assert_eq!(rings[0].index, 0);
        assert!(rings[0].r.is_infinite());
        for w in rings.windows(2) {
            assert!(w[1].r < w[0].r);
            assert!(w[1].r >= params.r_min);
        }
    }

    #[test]
    fn adjacent_rings_respect_threshold() {
        let cfg = desk();
        let cb = build_codebook(&cfg, &CodebookParams::for_array(&cfg)).unwrap();
        let mut checked = 0;
        for i in 0..cb.len() - 1 {
            let (a, b) = (&cb.points[i], &cb.points[i + 1]);
            if a.s == b.s && a.t == b.t {
                let proj = brute_projection(cb.row(i), cb.row(i + 1));
                assert!(proj <= 0.5 + 0.05, "rows {i},{}: {proj}", i + 1);
                checked += 1;
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn codebook_rows_unit_norm_and_ordered() {
        let cfg = desk();
        let cb = build_codebook(&cfg, &CodebookParams::for_array(&cfg)).unwrap();
        for row in &cb.rows {
            let n: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        for w in cb.points.windows(2) {
            let key = |p: &SamplingPoint| (p.s, p.t);
            assert!(key(&w[0]) < key(&w[1]) || (key(&w[0]) == key(&w[1]) && w[0].ring < w[1].ring));
        }
        assert!(cb.ring_coherence() <= 0.55);
        let again = build_codebook(&cfg, &CodebookParams::for_array(&cfg)).unwrap();
        assert_eq!(cb, again);
    }

    #[test]
    fn desk_defaults_stay_in_radiating_near_field() {
        let cfg = desk();
        let cb = build_codebook(&cfg, &CodebookParams::for_array(&cfg)).unwrap();
        assert_eq!(cb.far_field_indices().len(), 104);
        assert!(cb.len() > 104);
        let (lo, hi) = (cfg.fresnel_boundary(), cfg.rayleigh_distance());
        for p in cb.points.iter().filter(|p| p.ring > 0) {
            assert!(p.r >= lo && p.r <= hi, "{}", p.r);
        }
    }

    #[test]
    fn far_field_rows_match_plane_waves() {
        let cfg = desk();
        let params = CodebookParams {
            far_field_only: true,
            ..CodebookParams::for_array(&cfg)
        };
        let cb = build_codebook(&cfg, &params).unwrap();
        let k = 2.0 * std::f64::consts::PI / cfg.wavelength;
        let scale = 1.0 / (cfg.num_elements() as f64).sqrt();
        for (p, row) in cb.points.iter().zip(&cb.rows) {
            let mut idx = 0;
            for n in cfg.n_offsets() {
                for m in cfg.m_offsets() {
                    let phase = -k * (n * cfg.dx * p.direction.u + m * cfg.dz * p.direction.c);
                    assert!((row[idx] - Complex64::from_polar(scale, phase)).norm() < 1e-12);
                    idx += 1;
                }
            }
        }
    }

    #[test]
    fn projection_properties() {
        let cfg = desk();
        let cb = build_codebook(&cfg, &CodebookParams::for_array(&cfg)).unwrap();
        for p in [0, 7, cb.len() - 1] {
            assert!((cb.projection(p, p).unwrap() - 1.0).abs() < 1e-12);
        }
        // far-field codewords with the same u and cosφ offset 2i/M
        let ff = cb.far_field_indices();
        let mut zeros = 0;
        for &p in &ff {
            for &q in &ff {
                let (a, b) = (&cb.points[p], &cb.points[q]);
                if a.t == b.t && a.s != b.s {
                    assert!(cb.projection(p, q).unwrap() <= 1e-10);
                    zeros += 1;
                }
            }
        }
        assert!(zeros > 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = rng.random_range(0..cb.len());
            let q = rng.random_range(0..cb.len());
            let expect = brute_projection(cb.row(p), cb.row(q));
            assert!((cb.projection(p, q).unwrap() - expect).abs() < 1e-12);
        }
        assert!(cb.projection(0, cb.len()).is_err());
    }

    #[test]
    fn dft_codebook_is_orthonormal() {
        let cfg = ArrayConfig::half_wavelength(4, 16, 28e9).unwrap();
        let cb = dft_codebook(&cfg);
        assert_eq!(cb.len(), 64);
        for p in 0..cb.len() {
            for q in 0..cb.len() {
                let g = inner(cb.row(p), cb.row(q)).norm();
                let expect = if p == q { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-10, "({p},{q}) {g}");
            }
        }
    }

    #[test]
    fn dft_equals_far_field_restriction() {
        let cfg = desk();
        let dft = dft_codebook(&cfg);
        let cb = build_codebook(&cfg, &CodebookParams::for_array(&cfg)).unwrap();
        for i in cb.far_field_indices() {
            let p = cb.points[i];
            let j = dft.points.iter().position(|d| d.s == p.s && d.t == p.t).unwrap();
            assert_eq!(dft.row(j), cb.row(i));
        }
    }

    #[test]
    fn dft_leaks_energy_for_near_field_user() {
        let cfg = ArrayConfig::half_wavelength(4, 128, 28e9).unwrap();
        let params = CodebookParams {
            r_min: 2.0,
            ..CodebookParams::for_array(&cfg)
        };
        let polar = build_codebook(&cfg, &params).unwrap();
        let dft = dft_codebook(&cfg);
        let user = PolarPoint::new(5.0, 1.2, 1.4);
        let g = steering_vector(&cfg, &user, SteeringMode::Exact);
        let best = |cb: &SingleBeamCodebook| cb.responses(&g).into_iter().fold(0.0, f64::max);
        let (p, d) = (best(&polar), best(&dft));
        assert!(d < 1.0 - 0.1, "dft best {d}");
        assert!(p > d + 0.05, "polar {p} vs dft {d}");
    }

    #[test]
    fn invalid_params_rejected() {
        let cfg = desk();
        let mut params = CodebookParams::for_array(&cfg);
        params.r_min = -1.0;
        assert!(build_codebook(&cfg, &params).is_err());
        let mut params = CodebookParams::for_array(&cfg);
        params.threshold = 1.5;
        assert!(build_codebook(&cfg, &params).is_err());
    }
}
