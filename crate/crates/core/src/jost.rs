//! Jost solutions of the Kaup-Newell problem by RK4 on the factored system,
//! scattering coefficients, and the Zakharov-Shabat gauge cross-check.
//!
//! With m = e^{i zeta x} psi the left Jost solution obeys
//!   m1' = lambda u m2,   m2' = 2 i zeta m2 - lambda conj(u) m1,
//! from m(-L) = (1, 0), and a(lambda) = m1(+L). The right solution uses
//! n = e^{-i zeta x} psi, n1' = -2 i zeta n1 + lambda u n2, n2' = -lambda conj(u) n1,
//! integrated leftwards from n(+L) = (0, 1).

use crate::error::{Error, Result};
use crate::field::{Field, Grid, FINE_FACTOR};
use crate::par::{self, Exec};
use crate::spectral::{fft, ifft, refine, signed_mode};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// A spectral parameter lambda with Im lambda^2 >= 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub lambda: C64,
}

impl SpectralPoint {
    /// Any representative with Im lambda^2 >= 0 (lambda and -lambda give the same zeta).
    pub fn from_lambda(lambda: C64) -> Result<Self> {
        let z = lambda * lambda;
        if !(z.im >= -1e-14 * z.norm()) || !lambda.re.is_finite() || !lambda.im.is_finite() {
            return Err(Error::invalid(format!("Im lambda^2 < 0 for lambda = {lambda}")));
        }
        Ok(SpectralPoint { lambda })
    }

    /// Principal root: maps the closed upper half plane onto the closed first quadrant.
    pub fn from_zeta(zeta: C64) -> Result<Self> {
        if zeta.im < 0.0 || !zeta.re.is_finite() || !zeta.im.is_finite() {
            return Err(Error::invalid(format!("zeta = {zeta} is outside the closed upper half plane")));
        }
        let z = C64::new(zeta.re, zeta.im.abs());
        Ok(SpectralPoint { lambda: z.sqrt() })
    }

    pub fn zeta(&self) -> C64 {
        self.lambda * self.lambda
    }

    /// lambda in R or iR, where both Jost bases exist.
    pub fn on_real_axes(&self) -> bool {
        self.lambda.re == 0.0 || self.lambda.im == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JostConfig {
    /// Minimum RK4 substeps per grid cell (power of two).
    pub substeps: usize,
    /// Upper bound on 2 |zeta| h' for the substep h'.
    pub z_max: f64,
    /// Samples with |u| below this fraction of max |u| are treated as zero.
    pub window_tol: f64,
    /// Maximum |u(+-L)| accepted; `None` skips the check.
    pub boundary_tol: Option<f64>,
    /// Repeat with twice the substeps and report the difference as residual.
    pub richardson: bool,
}

impl Default for JostConfig {
    fn default() -> Self {
        JostConfig { substeps: 1, z_max: 0.2, window_tol: 1e-10, boundary_tol: Some(1e-8), richardson: false }
    }
}

impl JostConfig {
    pub fn relaxed(boundary_tol: f64) -> Self {
        JostConfig { boundary_tol: Some(boundary_tol), ..Default::default() }
    }

    fn substeps_for(&self, kappa: f64, h: f64) -> usize {
        let need = (kappa * h / self.z_max).ceil().max(1.0) as usize;
        need.max(self.substeps.max(1)).next_power_of_two()
    }
}

/// Values of a periodic grid function at multiples of h/(2r), using the
/// trigonometric interpolant on the fine grid and 8-point Lagrange beyond it.
pub(crate) struct Sampler<'a> {
    fine: &'a [C64],
    two_r: usize,
    /// Lagrange weights for each sub-fine offset when 2r exceeds the fine factor.
    weights: Vec<[f64; 8]>,
}

impl<'a> Sampler<'a> {
    pub(crate) fn new(fine: &'a [C64], two_r: usize) -> Self {
        let ratio = (two_r / FINE_FACTOR).max(1);
        let weights = (0..ratio).map(|rem| lagrange8_weights(rem as f64 / ratio as f64)).collect();
        Sampler { fine, two_r, weights }
    }

    #[inline]
    pub(crate) fn at(&self, q: i64) -> C64 {
        let m = self.fine.len() as i64;
        if self.two_r <= FINE_FACTOR {
            let idx = (q * (FINE_FACTOR / self.two_r) as i64).rem_euclid(m);
            return self.fine[idx as usize];
        }
        let ratio = self.weights.len() as i64;
        let base = q.div_euclid(ratio);
        let rem = q.rem_euclid(ratio) as usize;
        if rem == 0 {
            return self.fine[base.rem_euclid(m) as usize];
        }
        let w = &self.weights[rem];
        let start = base - 3;
        let mut acc = ZERO;
        if start >= 0 && start + 8 <= m {
            let s = start as usize;
            for (v, wj) in self.fine[s..s + 8].iter().zip(w) {
                acc += v * wj;
            }
        } else {
            for (j, wj) in w.iter().enumerate() {
                acc += self.fine[(start + j as i64).rem_euclid(m) as usize] * wj;
            }
        }
        acc
    }
}

/// Weights of the nodes -3..=4 for interpolation at offset t in [0, 1).
fn lagrange8_weights(t: f64) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (idx, j) in (-3i64..=4).enumerate() {
        let mut w = 1.0;
        for k in -3i64..=4 {
            if k != j {
                w *= (t - k as f64) / (j - k) as f64;
            }
        }
        out[idx] = w;
    }
    out
}

/// Cells [start, end) of the grid where the potential is not negligible.
pub(crate) fn active_window(samples: &[C64], tol: f64) -> Option<(usize, usize)> {
    let max = samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return None;
    }
    let thr = tol * max;
    let lo = samples.iter().position(|v| v.norm() > thr)?;
    let hi = samples.iter().rposition(|v| v.norm() > thr)?;
    Some((lo.saturating_sub(2), (hi + 2).min(samples.len())))
}

/// Classical RK4 for m' = [[k0, alpha(x)], [beta(x), k1]] m across `cells` grid
/// cells starting at cell boundary `cell0`, moving right (`dir = 1`) or left.
/// Coefficients are read at half-substep index q (units of h/(2r)).
#[allow(clippy::too_many_arguments)]
fn rk4_cells(
    kappa: [C64; 2],
    coef: &dyn Fn(i64) -> (C64, C64),
    cell0: usize,
    cells: usize,
    dir: i64,
    r: usize,
    h: f64,
    m0: [C64; 2],
    mut record: impl FnMut(usize, [C64; 2]),
) -> Result<[C64; 2]> {
    let two_r = 2 * r;
    let hs = dir as f64 * h / r as f64;
    let f = |m: [C64; 2], ab: (C64, C64)| -> [C64; 2] { [kappa[0] * m[0] + ab.0 * m[1], ab.1 * m[0] + kappa[1] * m[1]] };
    let mut m = m0;
    let mut q = cell0 as i64 * two_r as i64;
    for cell in 0..cells {
        for _ in 0..r {
            let c0 = coef(q);
            let ch = coef(q + dir);
            let c1 = coef(q + 2 * dir);
            let k1 = f(m, c0);
            let k2 = f([m[0] + 0.5 * hs * k1[0], m[1] + 0.5 * hs * k1[1]], ch);
            let k3 = f([m[0] + 0.5 * hs * k2[0], m[1] + 0.5 * hs * k2[1]], ch);
            let k4 = f([m[0] + hs * k3[0], m[1] + hs * k3[1]], c1);
            for i in 0..2 {
                m[i] += hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            q += 2 * dir;
        }
        let size = m[0].norm().max(m[1].norm());
        if !size.is_finite() || size > 1e300 {
            return Err(Error::Overflow(format!("Jost solution exceeded 1e300 after {} cells; lambda too deep for this truncation", cell + 1)));
        }
        record(cell, m);
    }
    Ok(m)
}

fn check_boundary(f: &Field, cfg: &JostConfig) -> Result<()> {
    if let Some(tol) = cfg.boundary_tol {
        let s = f.samples();
        let edge = s[0].norm().max(s[s.len() - 1].norm());
        if edge > tol {
            return Err(Error::invalid(format!("|u| = {edge:.3e} at the box edge exceeds the boundary tolerance {tol:.1e}")));
        }
    }
    Ok(())
}

/// Kaup-Newell coefficients (lambda u, -lambda conj u) read from the fine grid.
fn kn_coef<'a>(s: &'a Sampler<'a>, lambda: C64) -> impl Fn(i64) -> (C64, C64) + 'a {
    move |q| {
        let u = s.at(q);
        (lambda * u, -lambda * u.conj())
    }
}

/// End values of the left-normalised factored solution and the cell where it was read.
struct LeftRun {
    m: [C64; 2],
    x_end: f64,
}

fn left_run(f: &Field, lambda: C64, cfg: &JostConfig, r: usize, second_column: bool) -> Result<LeftRun> {
    let grid = f.grid();
    let zeta = lambda * lambda;
    let (kappa, m0) = if second_column { ([-2.0 * I * zeta, ZERO], [ZERO, ONE]) } else { ([ZERO, 2.0 * I * zeta], [ONE, ZERO]) };
    let Some((c0, c1)) = active_window(f.samples(), cfg.window_tol) else {
        return Ok(LeftRun { m: m0, x_end: grid.half_width });
    };
    let sampler = Sampler::new(f.fine(), 2 * r);
    let coef = kn_coef(&sampler, lambda);
    let m = rk4_cells(kappa, &coef, c0, c1 - c0, 1, r, grid.h(), m0, |_, _| {})?;
    Ok(LeftRun { m, x_end: grid.x(0) + c1 as f64 * grid.h() })
}

fn substeps(f: &Field, zeta: C64, cfg: &JostConfig) -> usize {
    cfg.substeps_for(2.0 * zeta.norm(), f.grid().h())
}

/// a(lambda) from the left Jost solution; depends on lambda only through zeta.
pub fn a_ode(f: &Field, lp: SpectralPoint, cfg: &JostConfig) -> Result<C64> {
    check_boundary(f, cfg)?;
    let r = substeps(f, lp.zeta(), cfg);
    Ok(left_run(f, lp.lambda, cfg, r, false)?.m[0])
}

/// ã(zeta) = e^{i M/2} a(sqrt zeta).
pub fn a_tilde_ode(f: &Field, zeta: C64, cfg: &JostConfig) -> Result<C64> {
    let lp = SpectralPoint::from_zeta(zeta)?;
    Ok(a_ode(f, lp, cfg)? * C64::from_polar(1.0, 0.5 * f.mass()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ode,
    Determinant,
    ZsGauge,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ode => "ode",
            Method::Determinant => "determinant",
            Method::ZsGauge => "zs_gauge",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSample {
    pub lambda: SpectralPoint,
    pub a: C64,
    /// Only for lambda in R or iR.
    pub b: Option<C64>,
    pub c: Option<C64>,
    pub d: Option<C64>,
    pub method: Method,
    /// |det t - 1| on R u iR, the Richardson difference when requested, else 0.
    pub residual: f64,
}

impl ScatteringSample {
    /// |a|^2 + |b|^2 - 1 on R, |a|^2 - |b|^2 - 1 on iR.
    pub fn unitarity_defect(&self) -> Option<f64> {
        let b = self.b?;
        let z = self.lambda.zeta();
        let sign = if z.re >= 0.0 { 1.0 } else { -1.0 };
        Some(self.a.norm_sqr() + sign * b.norm_sqr() - 1.0)
    }
}

pub fn scattering(f: &Field, lp: SpectralPoint, cfg: &JostConfig) -> Result<ScatteringSample> {
    check_boundary(f, cfg)?;
    let zeta = lp.zeta();
    let r = substeps(f, zeta, cfg);
    let left = left_run(f, lp.lambda, cfg, r, false)?;
    let a = left.m[0];
    let mut out = ScatteringSample { lambda: lp, a, b: None, c: None, d: None, method: Method::Ode, residual: 0.0 };
    if lp.on_real_axes() {
        let zr = C64::new(zeta.re, 0.0);
        let b = left.m[1] * (-2.0 * I * zr * left.x_end).exp();
        let second = left_run(f, lp.lambda, cfg, r, true)?;
        let c = second.m[0] * (2.0 * I * zr * second.x_end).exp();
        let d = second.m[1];
        out.b = Some(b);
        out.c = Some(c);
        out.d = Some(d);
        out.residual = (a * d - b * c - 1.0).norm();
    }
    if cfg.richardson {
        let fine = left_run(f, lp.lambda, cfg, 2 * r, false)?;
        out.residual = out.residual.max((fine.m[0] - a).norm());
    }
    Ok(out)
}

/// Parallel map of [`scattering`] over a set of points sharing one field.
pub fn scan(f: &Field, points: &[SpectralPoint], cfg: &JostConfig, exec: Exec) -> Result<Vec<ScatteringSample>> {
    par::try_map(exec, points, |lp| scattering(f, *lp, cfg))
}

/// Factored Jost trajectories at the grid nodes x_0 = -L, ..., x_N = +L.
#[derive(Clone, Debug)]
pub struct JostPair {
    pub lambda: SpectralPoint,
    /// e^{i zeta x} psi_1^-(x).
    pub left: Vec<[C64; 2]>,
    /// e^{-i zeta x} psi_2^+(x).
    pub right: Vec<[C64; 2]>,
    pub grid: Grid,
}

impl JostPair {
    /// det(psi_1^-, psi_2^+) at node j; constant in j and equal to a(lambda).
    pub fn wronskian(&self, j: usize) -> C64 {
        let m = self.left[j];
        let n = self.right[j];
        m[0] * n[1] - m[1] * n[0]
    }

    /// psi_1^-(x_j) with the oscillatory factor restored.
    pub fn psi_left(&self, j: usize) -> [C64; 2] {
        let ph = (-I * self.lambda.zeta() * self.grid.x(0)).exp() * (-I * self.lambda.zeta() * (j as f64 * self.grid.h())).exp();
        [self.left[j][0] * ph, self.left[j][1] * ph]
    }

    /// psi_2^+(x_j) with the oscillatory factor restored.
    pub fn psi_right(&self, j: usize) -> [C64; 2] {
        let ph = (I * self.lambda.zeta() * self.grid.x(0)).exp() * (I * self.lambda.zeta() * (j as f64 * self.grid.h())).exp();
        [self.right[j][0] * ph, self.right[j][1] * ph]
    }
}

pub fn jost(f: &Field, lp: SpectralPoint, cfg: &JostConfig) -> Result<JostPair> {
    check_boundary(f, cfg)?;
    let grid = *f.grid();
    let zeta = lp.zeta();
    if zeta.im * 2.0 * grid.half_width > 600.0 {
        return Err(Error::Overflow(format!("Im zeta * 2L = {:.1} > 600; lambda too deep for the truncation", zeta.im * 2.0 * grid.half_width)));
    }
    let n = grid.n();
    let h = grid.h();
    let r = substeps(f, zeta, cfg);
    let two_i_zeta = 2.0 * I * zeta;
    let mut left = vec![[ONE, ZERO]; n + 1];
    let mut right = vec![[ZERO, ONE]; n + 1];
    if let Some((c0, c1)) = active_window(f.samples(), cfg.window_tol) {
        let sampler = Sampler::new(f.fine(), 2 * r);
        let coef = kn_coef(&sampler, lp.lambda);
        let end = rk4_cells([ZERO, two_i_zeta], &coef, c0, c1 - c0, 1, r, h, [ONE, ZERO], |cell, m| {
            left[c0 + cell + 1] = m;
        })?;
        for (j, slot) in left.iter_mut().enumerate().skip(c1 + 1) {
            let decay = (two_i_zeta * ((j - c1) as f64 * h)).exp();
            *slot = [end[0], end[1] * decay];
        }
        let start = rk4_cells([-two_i_zeta, ZERO], &coef, c1, c1 - c0, -1, r, h, [ZERO, ONE], |cell, m| {
            right[c1 - cell - 1] = m;
        })?;
        for (j, slot) in right.iter_mut().enumerate().take(c0) {
            let decay = (two_i_zeta * ((c0 - j) as f64 * h)).exp();
            *slot = [start[0] * decay, start[1]];
        }
    }
    Ok(JostPair { lambda: lp, left, right, grid })
}

/// Zakharov-Shabat potentials obtained from u by the gauge transformation.
#[derive(Clone, Debug)]
pub struct ZsPotential {
    pub grid: Grid,
    pub q: Vec<C64>,
    pub r: Vec<C64>,
    q_fine: Vec<C64>,
    r_fine: Vec<C64>,
}

/// int_{x_j}^{+L} g for a periodic band-limited density g sampled on the grid.
pub(crate) fn tail_integral(grid: &Grid, g: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let l2 = 2.0 * grid.half_width;
    let mut spec: Vec<C64> = g.iter().map(|&v| C64::new(v, 0.0)).collect();
    fft(&mut spec);
    for v in spec.iter_mut() {
        *v /= n as f64;
    }
    let mean = spec[0].re;
    let mut anti = vec![ZERO; n];
    let mut offset = ZERO;
    for k in 1..n {
        if k == n / 2 {
            continue;
        }
        let p = std::f64::consts::PI * signed_mode(k, n) as f64 / grid.half_width;
        let c = spec[k] / (I * p);
        anti[k] = c;
        offset += c;
    }
    ifft(&mut anti);
    let total = mean * l2;
    (0..n)
        .map(|j| {
            let x_rel = j as f64 * grid.h();
            let cum = mean * x_rel + (anti[j] * n as f64 - offset).re;
            total - cum
        })
        .collect()
}

pub fn zs_gauge(f: &Field) -> ZsPotential {
    let grid = *f.grid();
    let u = f.samples();
    let ux = f.derivative();
    let dens: Vec<f64> = u.iter().map(|v| v.norm_sqr()).collect();
    let tail = tail_integral(&grid, &dens);
    let q: Vec<C64> = u.iter().zip(&tail).map(|(v, t)| 0.5 * v * C64::from_polar(1.0, -t)).collect();
    let r: Vec<C64> = u.iter().zip(&ux).zip(&tail).map(|((v, d), t)| (I * d.conj() + 0.5 * v.conj() * v.norm_sqr()) * C64::from_polar(1.0, *t)).collect();
    let q_fine = refine(&q, FINE_FACTOR);
    let r_fine = refine(&r, FINE_FACTOR);
    ZsPotential { grid, q, r, q_fine, r_fine }
}

/// Transmission-type Wronskian of the ZS problem i sigma_3 psi' - Q psi = zeta psi,
/// normalised so that it equals ã_u(zeta).
pub fn scattering_zs(zs: &ZsPotential, zeta: C64, cfg: &JostConfig) -> Result<C64> {
    if zeta.im < 0.0 {
        return Err(Error::invalid("scattering_zs needs Im zeta >= 0"));
    }
    let grid = zs.grid;
    let mag: Vec<C64> = zs.q.iter().zip(&zs.r).map(|(a, b)| C64::new(a.norm() + b.norm(), 0.0)).collect();
    let Some((c0, c1)) = active_window(&mag, cfg.window_tol) else {
        return Ok(ONE);
    };
    let r = cfg.substeps_for(2.0 * zeta.norm(), grid.h());
    let qs = Sampler::new(&zs.q_fine, 2 * r);
    let rs = Sampler::new(&zs.r_fine, 2 * r);
    let coef = |q: i64| (-I * qs.at(q), I * rs.at(q));
    let m = rk4_cells([ZERO, 2.0 * I * zeta], &coef, c0, c1 - c0, 1, r, grid.h(), [ONE, ZERO], |_, _| {})?;
    Ok(m[0])
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ALimits {
    /// (|zeta|, |a - 1|) along arg zeta = pi/2, decreasing |zeta|.
    pub small: Vec<(f64, f64)>,
    /// (|zeta|, |a - e^{-i M/2}|) along arg zeta = pi/2, increasing |zeta|.
    pub large: Vec<(f64, f64)>,
    /// Largest deviation of the same quantities on the sector edges arg zeta = delta, pi - delta.
    pub sector_small: f64,
    pub sector_large: f64,
}

/// Probes the zeta -> 0 and |zeta| -> infinity limits of a.
pub fn a_limits(f: &Field, delta: f64, scale: f64, cfg: &JostConfig) -> Result<ALimits> {
    if !(delta > 0.0 && delta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::invalid(format!("delta must lie in (0, pi/2), got {delta}")));
    }
    let far = C64::from_polar(1.0, -0.5 * f.mass());
    let small_r: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|v| v * scale).collect();
    let large_r: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|v| v * scale).collect();
    let eval = |rho: f64, arg: f64| a_ode(f, SpectralPoint::from_zeta(C64::from_polar(rho, arg))?, cfg);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut out = ALimits { small: vec![], large: vec![], sector_small: 0.0, sector_large: 0.0 };
    for &rho in &small_r {
        out.small.push((rho, (eval(rho, half_pi)? - ONE).norm()));
        for arg in [delta, std::f64::consts::PI - delta] {
            out.sector_small = out.sector_small.max((eval(rho, arg)? - ONE).norm());
        }
    }
    for &rho in &large_r {
        out.large.push((rho, (eval(rho, half_pi)? - far).norm()));
        for arg in [delta, std::f64::consts::PI - delta] {
            out.sector_large = out.sector_large.max((eval(rho, arg)? - far).norm());
        }
    }
    Ok(out)
}
