//! Uniform planar array geometry and the spherical-wave channel model.
//!
//! The array lies in the xz-plane with `M` elements along z and `N` along x.
//! Element offsets use symmetric half-integer indices
//! `m ∈ {1-(M+1)/2, …, M-(M+1)/2}`, so an even-sized axis has offsets
//! `±1/2, ±3/2, …`. Vectors over the array are flattened n-major then m:
//! element `(m_idx, n_idx)` lives at `n_idx * M + m_idx`, which makes the
//! Taylor-mode steering vector exactly `v_x ⊗ v_z`.
//!
//! Distances equal to [`f64::INFINITY`] denote the far field; every term
//! quadratic in the element offsets is defined as zero there.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Geometry and carrier parameters of one AP's antenna array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    /// Antenna count along z.
    pub m: usize,
    /// Antenna count along x.
    pub n: usize,
    /// Horizontal spacing in meters.
    pub dx: f64,
    /// Vertical spacing in meters.
    pub dz: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Carrier frequency in hertz.
    pub carrier_hz: f64,
}

impl ArrayConfig {
    pub fn new(m: usize, n: usize, dx: f64, dz: f64, carrier_hz: f64) -> Result<Self> {
        let cfg = Self {
            m,
            n,
            dx,
            dz,
            wavelength: SPEED_OF_LIGHT / carrier_hz,
            carrier_hz,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Array with half-wavelength spacing on both axes.
    pub fn half_wavelength(m: usize, n: usize, carrier_hz: f64) -> Result<Self> {
        let wavelength = SPEED_OF_LIGHT / carrier_hz;
        Self::new(m, n, wavelength / 2.0, wavelength / 2.0, carrier_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return domain(format!("array needs M, N >= 1 (got {}x{})", self.m, self.n));
        }
        if !(self.dx > 0.0 && self.dz > 0.0) || !self.dx.is_finite() || !self.dz.is_finite() {
            return domain(format!(
                "antenna spacing must be positive (dx={}, dz={})",
                self.dx, self.dz
            ));
        }
        if !(self.carrier_hz > 0.0 && self.wavelength > 0.0) {
            return domain("carrier frequency and wavelength must be positive");
        }
        let expected = SPEED_OF_LIGHT / self.carrier_hz;
        if ((self.wavelength - expected) / expected).abs() > 1e-6 {
            return domain(format!(
                "wavelength {} inconsistent with carrier {} Hz",
                self.wavelength, self.carrier_hz
            ));
        }
        Ok(())
    }

    pub fn num_elements(&self) -> usize {
        self.m * self.n
    }

    /// Half-integer offsets along z, in storage order.
    pub fn m_offsets(&self) -> impl Iterator<Item = f64> + Clone {
        let half = (self.m as f64 - 1.0) / 2.0;
        (0..self.m).map(move |i| i as f64 - half)
    }

    /// Half-integer offsets along x, in storage order.
    pub fn n_offsets(&self) -> impl Iterator<Item = f64> + Clone {
        let half = (self.n as f64 - 1.0) / 2.0;
        (0..self.n).map(move |i| i as f64 - half)
    }

    /// Aperture diagonal `D` used by the near-field region boundaries.
    pub fn aperture(&self) -> f64 {
        (self.m as f64 * self.dz).hypot(self.n as f64 * self.dx)
    }

    /// Lower edge of the radiating near field, `0.62·sqrt(D³/λ)`.
    pub fn fresnel_boundary(&self) -> f64 {
        0.62 * (self.aperture().powi(3) / self.wavelength).sqrt()
    }

    /// Upper edge of the radiating near field, `2D²/λ`.
    pub fn rayleigh_distance(&self) -> f64 {
        2.0 * self.aperture().powi(2) / self.wavelength
    }

    fn check_offset(count: usize, offset: f64, axis: &str) -> Result<()> {
        let idx = offset + (count as f64 - 1.0) / 2.0;
        let rounded = idx.round();
        if (idx - rounded).abs() > 1e-9 || rounded < 0.0 || rounded > (count - 1) as f64 {
            return domain(format!(
                "{axis} offset {offset} is not a valid index for {count} elements"
            ));
        }
        Ok(())
    }

    pub(crate) fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

/// Polar coordinates `(r, θ, φ)` relative to an array's reference point.
///
/// `r` may be [`f64::INFINITY`] for far-field directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64, phi: f64) -> Self {
        Self { r, theta, phi }
    }

    /// Builds a point from direction cosines `u = cosθ·sinφ`, `c = cosφ`
    /// with `θ ∈ [0, π]`.
    pub fn from_cosines(u: f64, c: f64, r: f64) -> Self {
        let c = c.clamp(-1.0, 1.0);
        let sin_phi = (1.0 - c * c).sqrt();
        let theta = if sin_phi > 0.0 {
            (u / sin_phi).clamp(-1.0, 1.0).acos()
        } else {
            0.0
        };
        Self {
            r,
            theta,
            phi: c.acos(),
        }
    }

    pub fn direction(&self) -> Direction {
        Direction {
            u: self.theta.cos() * self.phi.sin(),
            c: self.phi.cos(),
        }
    }

    pub fn is_far_field(&self) -> bool {
        self.r.is_infinite()
    }
}

/// Direction cosines along the two array axes.
///
/// Every steering vector depends on the direction only through
/// `u = cosθ·sinφ` (x-axis) and `c = cosφ` (z-axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub u: f64,
    pub c: f64,
}

impl Direction {
    /// Curvature factor of the x-axis quadratic term, `1 - cos²θ·sin²φ`.
    pub fn kappa_x(&self) -> f64 {
        1.0 - self.u * self.u
    }

    /// Curvature factor of the z-axis quadratic term, `sin²φ`.
    pub fn kappa_z(&self) -> f64 {
        1.0 - self.c * self.c
    }

    pub fn is_visible(&self) -> bool {
        self.u * self.u + self.c * self.c <= 1.0 + 1e-12
    }
}

/// Position of one AP relative to the user (the point `O'`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApPlacement {
    pub index: usize,
    pub point: PolarPoint,
}

impl ApPlacement {
    pub fn new(index: usize, r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return domain(format!("AP distance must be positive and finite (got {r})"));
        }
        if !(phi > 0.0 && phi < PI) {
            return domain(format!("AP elevation must lie in (0, π) (got {phi})"));
        }
        if !(0.0..2.0 * PI).contains(&theta) {
            return domain(format!("AP azimuth must lie in [0, 2π) (got {theta})"));
        }
        Ok(Self {
            index,
            point: PolarPoint::new(r, theta, phi),
        })
    }
}

/// Coordinates of element `(m, n)` for an array whose reference point sits
/// at `point` relative to the origin.
pub fn element_position(cfg: &ArrayConfig, point: &PolarPoint, m: f64, n: f64) -> Result<[f64; 3]> {
    ArrayConfig::check_offset(cfg.m, m, "m")?;
    ArrayConfig::check_offset(cfg.n, n, "n")?;
    let PolarPoint { r, theta, phi } = *point;
    Ok([
        r * theta.cos() * phi.sin() + n * cfg.dx,
        r * theta.sin() * phi.sin(),
        r * phi.cos() + m * cfg.dz,
    ])
}

/// Euclidean distance between element `(m, n)` and the origin.
pub fn exact_distance(cfg: &ArrayConfig, point: &PolarPoint, m: f64, n: f64) -> Result<f64> {
    if point.is_far_field() {
        ArrayConfig::check_offset(cfg.m, m, "m")?;
        ArrayConfig::check_offset(cfg.n, n, "n")?;
        return Ok(f64::INFINITY);
    }
    let [x, y, z] = element_position(cfg, point, m, n)?;
    Ok((x * x + y * y + z * z).sqrt())
}

/// Second-order Taylor expansion of [`exact_distance`] in the element offsets.
pub fn taylor_distance(cfg: &ArrayConfig, theta: f64, phi: f64, r: f64, m: f64, n: f64) -> Result<f64> {
    if !(r > 0.0) {
        return domain(format!("Taylor distance needs r > 0 (got {r})"));
    }
    let dir = PolarPoint::new(r, theta, phi).direction();
    Ok(r + path_difference(cfg, dir, r, m, n, SteeringMode::Taylor))
}

/// Which distance model a steering vector uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SteeringMode {
    Exact,
    Taylor,
}

/// `D(m, n) - r` for a point in direction `dir` at distance `r`.
///
/// The exact branch uses `(D² - r²)/(D + r)`, which stays accurate for very
/// large `r` where subtracting `r` from `D` would cancel.
fn path_difference(cfg: &ArrayConfig, dir: Direction, r: f64, m: f64, n: f64, mode: SteeringMode) -> f64 {
    let x = n * cfg.dx;
    let z = m * cfg.dz;
    let linear = x * dir.u + z * dir.c;
    if r.is_infinite() {
        return linear;
    }
    match mode {
        SteeringMode::Taylor => linear + (x * x * dir.kappa_x() + z * z * dir.kappa_z()) / (2.0 * r),
        SteeringMode::Exact => {
            let q = x * x + z * z + 2.0 * r * linear;
            let d = (r * r + q).sqrt();
            q / (d + r)
        }
    }
}

/// Unit-norm steering vector toward `(dir, r)`:
/// entries `exp(-j·2π/λ·(D(m,n) - r)) / sqrt(M·N)`, flattened n-major.
pub fn steering_from_direction(cfg: &ArrayConfig, dir: Direction, r: f64, mode: SteeringMode) -> Vec<Complex64> {
    let k = cfg.wavenumber();
    let norm = 1.0 / (cfg.num_elements() as f64).sqrt();
    let m_off: Vec<f64> = cfg.m_offsets().collect();
    let mut out = Vec::with_capacity(cfg.num_elements());
    for n in cfg.n_offsets() {
        for &m in &m_off {
            let phase = -k * path_difference(cfg, dir, r, m, n, mode);
            out.push(Complex64::from_polar(norm, phase));
        }
    }
    out
}

pub fn steering_vector(cfg: &ArrayConfig, point: &PolarPoint, mode: SteeringMode) -> Vec<Complex64> {
    steering_from_direction(cfg, point.direction(), point.r, mode)
}

/// x-axis factor of the Taylor steering vector (length `N`, unnormalized).
pub fn steering_x(cfg: &ArrayConfig, point: &PolarPoint) -> Vec<Complex64> {
    let k = cfg.wavenumber();
    let dir = point.direction();
    cfg.n_offsets()
        .map(|n| {
            let x = n * cfg.dx;
            let mut d = x * dir.u;
            if point.r.is_finite() {
                d += x * x * dir.kappa_x() / (2.0 * point.r);
            }
            Complex64::from_polar(1.0, -k * d)
        })
        .collect()
}

/// z-axis factor of the Taylor steering vector (length `M`, unnormalized).
pub fn steering_z(cfg: &ArrayConfig, point: &PolarPoint) -> Vec<Complex64> {
    let k = cfg.wavenumber();
    let dir = point.direction();
    cfg.m_offsets()
        .map(|m| {
            let z = m * cfg.dz;
            let mut d = z * dir.c;
            if point.r.is_finite() {
                d += z * z * dir.kappa_z() / (2.0 * point.r);
            }
            Complex64::from_polar(1.0, -k * d)
        })
        .collect()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

/// Hermitian inner product `aᴴb`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// One propagation path of the multipath model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// Complex path gain `β`.
    pub gain: Complex64,
    /// Phase shift `ψ` in radians.
    pub phase: f64,
    pub point: PolarPoint,
}

impl PathParams {
    /// LoS path with `β = sqrt(ρ0)/r` and `ψ = 2πr/λ`.
    pub fn line_of_sight(cfg: &ArrayConfig, ap: &ApPlacement, rho0: f64) -> Self {
        let r = ap.point.r;
        Self {
            gain: Complex64::new(rho0.sqrt() / r, 0.0),
            phase: cfg.wavenumber() * r,
            point: ap.point,
        }
    }
}

/// Uniform sampling ranges for NLoS scatterer paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlosRanges {
    /// Path gain magnitude relative to the LoS gain, drawn uniformly.
    pub relative_gain: (f64, f64),
    pub r: (f64, f64),
    pub theta: (f64, f64),
    pub phi: (f64, f64),
}

impl Default for NlosRanges {
    fn default() -> Self {
        Self {
            relative_gain: (0.05, 0.2),
            r: (2.0, 20.0),
            theta: (0.1, PI - 0.1),
            phi: (0.1, PI - 0.1),
        }
    }
}

/// Draws `count` NLoS paths whose gains are scaled from `los` and uniformly
/// distributed phases.
pub fn random_nlos_paths<R: Rng + ?Sized>(
    rng: &mut R,
    los: &PathParams,
    ranges: &NlosRanges,
    count: usize,
) -> Vec<PathParams> {
    (0..count)
        .map(|_| {
            let rel = rng.random_range(ranges.relative_gain.0..=ranges.relative_gain.1);
            PathParams {
                gain: los.gain * rel,
                phase: rng.random_range(0.0..2.0 * PI),
                point: PolarPoint::new(
                    rng.random_range(ranges.r.0..=ranges.r.1),
                    rng.random_range(ranges.theta.0..=ranges.theta.1),
                    rng.random_range(ranges.phi.0..=ranges.phi.1),
                ),
            }
        })
        .collect()
}

/// Channel vector from one AP to the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h: Vec<Complex64>,
    pub ap_index: usize,
    /// Dominant-path coordinates (the AP seen from the user).
    pub point: PolarPoint,
    /// Dominant-path gain magnitude `|β₁|`.
    pub gain: f64,
}

/// `h = sqrt(MN) · Σ_l β_l · exp(-jψ_l) · g_l` with exact spherical-wave `g_l`.
///
/// The first path is treated as dominant.
pub fn multipath_channel(cfg: &ArrayConfig, ap_index: usize, paths: &[PathParams]) -> Result<ChannelRealization> {
    let Some(first) = paths.first() else {
        return domain("a channel needs at least one path");
    };
    let scale = (cfg.num_elements() as f64).sqrt();
    let mut h = vec![Complex64::new(0.0, 0.0); cfg.num_elements()];
    for path in paths {
        let coeff = path.gain * Complex64::from_polar(scale, -path.phase);
        let g = steering_vector(cfg, &path.point, SteeringMode::Exact);
        for (hi, gi) in h.iter_mut().zip(g) {
            *hi += coeff * gi;
        }
    }
    Ok(ChannelRealization {
        h,
        ap_index,
        point: first.point,
        gain: first.gain.norm(),
    })
}

/// Pure LoS channel `h = sqrt(MN)·(sqrt(ρ0)/r)·exp(-j2πr/λ)·g₁`.
pub fn los_channel(cfg: &ArrayConfig, ap: &ApPlacement, rho0: f64) -> Result<ChannelRealization> {
    if !(rho0 > 0.0) {
        return domain(format!("reference gain ρ0 must be positive (got {rho0})"));
    }
    multipath_channel(cfg, ap.index, &[PathParams::line_of_sight(cfg, ap, rho0)])
}

/// Noise-free superposition `Σ_k h_kᴴ w_k x`.
pub fn noiseless_amplitude(
    channels: &[ChannelRealization],
    weights: &[Vec<Complex64>],
    x: Complex64,
) -> Result<Complex64> {
    if channels.len() != weights.len() {
        return domain(format!(
            "{} channels but {} weight vectors",
            channels.len(),
            weights.len()
        ));
    }
    let mut y = Complex64::new(0.0, 0.0);
    for (ch, w) in channels.iter().zip(weights) {
        if ch.h.len() != w.len() {
            return domain(format!(
                "weight length {} does not match channel length {}",
                w.len(),
                ch.h.len()
            ));
        }
        y += inner(&ch.h, w) * x;
    }
    Ok(y)
}

/// Circularly-symmetric complex Gaussian sample with variance `sigma2`.
pub fn complex_noise<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> Complex64 {
    let s = (sigma2 / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Received signal `y = Σ_k h_kᴴ w_k x + n` with `n ~ CN(0, σ²)`.
pub fn received_signal<R: Rng + ?Sized>(
    channels: &[ChannelRealization],
    weights: &[Vec<Complex64>],
    x: Complex64,
    sigma2: f64,
    rng: &mut R,
) -> Result<Complex64> {
    let y = noiseless_amplitude(channels, weights, x)?;
    Ok(y + complex_noise(rng, sigma2))
}
