//! T_u(lambda) in a truncated Fourier basis, its regularized determinants and
//! traces, and the ln ã machinery built on top (ray unwrapping, expansion fit, phi).
//!
//! On [-L, L) with modes e^{i p_k x}, p_k = pi k / L, the off-diagonal blocks of T
//! are X = -i lambda (D + zeta)^{-1} M_u and Y = i lambda (D - zeta)^{-1} M_ubar,
//! so det(I - T) = det(I - lambda^2 A B) with A = (D + zeta)^{-1} M_u and
//! B = (D - zeta)^{-1} M_ubar. Both A and B are banded because u is smooth.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::jost::{a_ode, JostConfig, SpectralPoint};
use crate::linalg::{Banded, Dense};
use crate::par::{self, Exec};
use crate::spectral::{fft, ifft, refine, signed_mode};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Fourier coefficients c_m of u(x) = sum_m c_m e^{i p_m x}, wrap-around order.
fn fourier_coeffs(f: &Field) -> Vec<C64> {
    let n = f.grid().n();
    let mut c = f.samples().to_vec();
    fft(&mut c);
    for (k, v) in c.iter_mut().enumerate() {
        let sign = if signed_mode(k, n) % 2 == 0 { 1.0 } else { -1.0 };
        *v *= sign / n as f64;
    }
    c
}

#[derive(Clone, Debug)]
pub struct DiscretizedKernel {
    pub lambda: SpectralPoint,
    pub n_modes: usize,
    pub half_width: f64,
    /// Largest |m| with |c_m| above round-off; A and B have this half band width.
    pub band: usize,
    coeffs: Vec<C64>,
}

impl DiscretizedKernel {
    fn c(&self, m: i64) -> C64 {
        if m.unsigned_abs() as usize > self.band {
            return ZERO;
        }
        let n = self.coeffs.len() as i64;
        self.coeffs[m.rem_euclid(n) as usize]
    }

    fn p(&self, i: usize) -> f64 {
        PI * (i as f64 - (self.n_modes / 2) as f64) / self.half_width
    }

    fn zeta(&self) -> C64 {
        self.lambda.zeta()
    }

    /// A_{kj} = c_{k-j}/(p_k + zeta).
    pub fn a_entry(&self, k: usize, j: usize) -> C64 {
        self.c(k as i64 - j as i64) / (self.p(k) + self.zeta())
    }

    /// B_{lk} = conj(c_{k-l})/(p_l - zeta).
    pub fn b_entry(&self, l: usize, k: usize) -> C64 {
        self.c(k as i64 - l as i64).conj() / (self.p(l) - self.zeta())
    }

    /// The full 2N_c x 2N_c matrix [[0, X], [Y, 0]].
    pub fn to_dense(&self) -> Dense {
        let nc = self.n_modes;
        let lam = self.lambda.lambda;
        let mut m = Dense::zeros(2 * nc);
        for i in 0..nc {
            for j in 0..nc {
                m[(i, nc + j)] = -I * lam * self.a_entry(i, j);
                m[(nc + i, j)] = I * lam * self.b_entry(i, j);
            }
        }
        m
    }

    /// Squared Hilbert-Schmidt norm of the matrix, without assembling it.
    pub fn hs_norm_sq(&self) -> f64 {
        let nc = self.n_modes;
        let z = self.zeta();
        let w = self.band;
        let lam2 = self.lambda.lambda.norm_sqr();
        let mut sum = 0.0;
        for k in 0..nc {
            let (mut row_x, mut row_y) = (0.0, 0.0);
            for j in k.saturating_sub(w)..(k + w + 1).min(nc) {
                row_x += self.c(k as i64 - j as i64).norm_sqr();
                row_y += self.c(j as i64 - k as i64).norm_sqr();
            }
            sum += row_x / (self.p(k) + z).norm_sqr() + row_y / (self.p(k) - z).norm_sqr();
        }
        lam2 * sum
    }

    fn product_band(&self) -> usize {
        (2 * self.band).min(self.n_modes.saturating_sub(1))
    }

    /// lambda^2 A B (`ab = true`) or lambda^2 B A in band storage.
    fn schur_product(&self, ab: bool) -> Banded {
        let nc = self.n_modes;
        let w = self.band;
        let kb = self.product_band();
        let z = self.zeta();
        let lam2 = z;
        let mut out = Banded::zeros(nc, kb, kb);
        let (outer_shift, inner_shift) = if ab { (z, -z) } else { (-z, z) };
        for k in 0..nc {
            let outer = lam2 / (self.p(k) + outer_shift);
            for l in k.saturating_sub(w)..(k + w + 1).min(nc) {
                let first = if ab { self.c(k as i64 - l as i64) } else { self.c(l as i64 - k as i64).conj() };
                if first == ZERO {
                    continue;
                }
                let mid = outer * first / (self.p(l) + inner_shift);
                for j in l.saturating_sub(w)..(l + w + 1).min(nc) {
                    let second = if ab { self.c(j as i64 - l as i64).conj() } else { self.c(l as i64 - j as i64) };
                    let cur = out.get(k, j);
                    out.set(k, j, cur + mid * second);
                }
            }
        }
        out
    }

    /// (tr T_N^2, tr T_N^4) of the truncated matrix.
    pub fn matrix_traces(&self) -> (C64, C64) {
        let p = self.schur_product(true);
        traces_of(&p)
    }

    /// Continuum second trace from the same coefficients (grid quadrature, dp = pi/L).
    fn trace2_quad(&self) -> C64 {
        let n = self.coeffs.len();
        let z = self.zeta();
        let l = self.half_width;
        let mut acc = ZERO;
        for (k, c) in self.coeffs.iter().enumerate() {
            let p = PI * signed_mode(k, n) as f64 / l;
            acc += c.norm_sqr() * 2.0 * l / (p + 2.0 * z);
        }
        2.0 * I * z * acc
    }
}

fn traces_of(p: &Banded) -> (C64, C64) {
    let n = p.n;
    let kb = p.kl;
    let mut t2 = ZERO;
    let mut t4 = ZERO;
    for k in 0..n {
        t2 += p.get(k, k);
        for j in k.saturating_sub(kb)..(k + kb + 1).min(n) {
            t4 += p.get(k, j) * p.get(j, k);
        }
    }
    (2.0 * t2, 2.0 * t4)
}

pub fn build_kernel(f: &Field, lp: SpectralPoint, n_modes: usize) -> Result<DiscretizedKernel> {
    let zeta = lp.zeta();
    if !(zeta.im > 0.0) {
        return Err(Error::invalid(format!("kernel needs Im lambda^2 > 0, got zeta = {zeta}")));
    }
    let n = f.grid().n();
    if n_modes < 2 || n_modes > n || !n_modes.is_multiple_of(2) {
        return Err(Error::invalid(format!("n_modes must be even and in [2, {n}], got {n_modes}")));
    }
    let coeffs = fourier_coeffs(f);
    let cmax = coeffs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let band = if cmax == 0.0 {
        0
    } else {
        (0..n).filter(|&k| coeffs[k].norm() > 1e-13 * cmax).map(|k| signed_mode(k, n).unsigned_abs() as usize).max().unwrap_or(0).min(n_modes - 1)
    };
    Ok(DiscretizedKernel { lambda: lp, n_modes, half_width: f.grid().half_width, band, coeffs })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetResult {
    pub lambda: SpectralPoint,
    pub n_modes: usize,
    /// det(I - T_N) corrected by exp((tr T_N^2 - tr2)/2); approximates a_u(lambda).
    pub a2: C64,
    /// det(I - T_N) as is.
    pub a2_raw: C64,
    /// det_4(I - T_N) from the B A factorization.
    pub a4: C64,
    /// Continuum traces (quadrature).
    pub tr2: C64,
    pub tr4: C64,
    /// Traces of the truncated matrix.
    pub tr2_matrix: C64,
    pub tr4_matrix: C64,
    /// |a4 - a2 exp(tr2/2)| / |a4|.
    pub link_residual: f64,
}

pub fn det2(k: &DiscretizedKernel) -> C64 {
    evaluate(k).a2
}

pub fn det4(k: &DiscretizedKernel) -> C64 {
    evaluate(k).a4
}

fn one_minus(mut p: Banded) -> Banded {
    for i in 0..p.n {
        let v = p.get(i, i);
        p.set(i, i, ONE - v);
    }
    for i in 0..p.n {
        for j in i.saturating_sub(p.kl)..(i + p.ku + 1).min(p.n) {
            if i != j {
                let v = p.get(i, j);
                p.set(i, j, -v);
            }
        }
    }
    p
}

/// Both determinants and all four traces for one kernel.
pub fn evaluate(k: &DiscretizedKernel) -> DetResult {
    let ab = k.schur_product(true);
    let (tr2_matrix, tr4_matrix) = traces_of(&ab);
    let det_ab = one_minus(ab).det();
    let det_ba = one_minus(k.schur_product(false)).det();
    let tr2 = k.trace2_quad();
    let tr4 = trace4_coeffs(k);
    let a2 = det_ab * (0.5 * (tr2_matrix - tr2)).exp();
    let a4 = det_ba * (0.5 * tr2_matrix).exp();
    let link_residual = if a4.norm() > 0.0 { (a4 - a2 * (0.5 * tr2).exp()).norm() / a4.norm() } else { 0.0 };
    DetResult { lambda: k.lambda, n_modes: k.n_modes, a2, a2_raw: det_ab, a4, tr2, tr4, tr2_matrix, tr4_matrix, link_residual }
}

/// Dense reference: det(I - T) of the assembled 2N_c matrix. Only for small N_c.
pub fn det_dense(k: &DiscretizedKernel) -> C64 {
    let t = k.to_dense();
    Dense::identity(t.n).add(&t.scaled(-ONE)).det()
}

/// 2 i lambda^2 int |û(p)|^2/(p + 2 lambda^2) dp on the grid of modes.
pub fn trace2(f: &Field, lp: SpectralPoint) -> Result<C64> {
    if f.is_zero() {
        return Ok(ZERO);
    }
    let k = build_kernel(f, lp, 2)?;
    Ok(k.trace2_quad())
}

fn trace4_coeffs(k: &DiscretizedKernel) -> C64 {
    let z = k.zeta();
    let n = k.coeffs.len();
    let l = k.half_width;
    if k.coeffs.iter().all(|c| *c == ZERO) {
        return ZERO;
    }
    let resolve = |shift: Option<C64>, conj: bool| -> Vec<C64> {
        let mut spec = vec![ZERO; n];
        for (idx, slot) in spec.iter_mut().enumerate() {
            let m = signed_mode(idx, n);
            // Fourier coefficients of conj(u) are conj(c_{-m})
            let c = if conj { k.coeffs[(-m).rem_euclid(n as i64) as usize].conj() } else { k.coeffs[idx] };
            *slot = match shift {
                Some(s) => c / (PI * m as f64 / l + s),
                None => c,
            };
        }
        spec
    };
    let to_samples = |spec: Vec<C64>| -> Vec<C64> {
        // back to x_j = -L + j h, then onto a 4x finer grid so the quartic product is exact
        let mut s: Vec<C64> = spec
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let sign = if signed_mode(idx, n) % 2 == 0 { 1.0 } else { -1.0 };
                c * sign * n as f64
            })
            .collect();
        ifft(&mut s);
        refine(&s, 4)
    };
    let plus = to_samples(resolve(Some(2.0 * z), false));
    let minus = to_samples(resolve(Some(-2.0 * z), true));
    let ubar = to_samples(resolve(None, true));
    let h = 2.0 * l / (4 * n) as f64;
    let integral: C64 = ubar.iter().zip(&plus).zip(&minus).map(|((a, b), c)| a * b * b * c).sum::<C64>() * h;
    4.0 * I * z * z * integral
}

/// 4 i lambda^4 int conj(u) ((D + 2 lambda^2)^{-1} u)^2 (D - 2 lambda^2)^{-1} conj(u) dx.
pub fn trace4(f: &Field, lp: SpectralPoint) -> Result<C64> {
    if f.is_zero() {
        return Ok(ZERO);
    }
    let k = build_kernel(f, lp, 2)?;
    Ok(trace4_coeffs(&k))
}

/// Source of ã(zeta) = e^{i M/2} a(sqrt zeta).
pub trait ATilde: Sync {
    fn a_tilde(&self, f: &Field, zeta: C64) -> Result<C64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Ode(JostConfig),
    Det { n_modes: usize },
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Ode(JostConfig::default())
    }
}

impl ATilde for Backend {
    fn a_tilde(&self, f: &Field, zeta: C64) -> Result<C64> {
        let lp = SpectralPoint::from_zeta(zeta)?;
        let a = match self {
            Backend::Ode(cfg) => a_ode(f, lp, cfg)?,
            Backend::Det { n_modes } => evaluate(&build_kernel(f, lp, *n_modes)?).a2,
        };
        Ok(a * C64::from_polar(1.0, 0.5 * f.mass()))
    }
}

/// max(1, ||u||_{L^4}^4), the natural |zeta| scale of the field.
pub fn spectral_scale(f: &Field) -> f64 {
    f.lp_norm(4.0).powi(4).max(1.0)
}

fn wrap(d: f64) -> f64 {
    (d + PI).rem_euclid(2.0 * PI) - PI
}

/// ln ã along the ray arg zeta = theta at the radii `rhos` (any order),
/// continued from |zeta| = infinity where ln ã -> 0.
pub fn log_a_tilde_ray(f: &Field, theta: f64, rhos: &[f64], backend: &impl ATilde, exec: Exec) -> Result<Vec<C64>> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::invalid(format!("ray angle must lie in (0, pi), got {theta}")));
    }
    if rhos.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::invalid("ray radii must be positive and finite"));
    }
    if f.is_zero() {
        return Ok(vec![ZERO; rhos.len()]);
    }
    let at = |rho: f64| backend.a_tilde(f, C64::from_polar(rho, theta));
    // anchor: a radius beyond which ã stays in the principal-log disc
    let top = rhos.iter().cloned().fold(0.0, f64::max);
    let mut far = top.max(16.0 * spectral_scale(f));
    let mut anchor = None;
    for _ in 0..12 {
        let a0 = at(far)?;
        let a1 = at(0.5 * far)?;
        if (a0 - ONE).norm() < 0.25 && (a1 - ONE).norm() < 0.25 {
            anchor = Some(a0);
            break;
        }
        far *= 4.0;
    }
    let anchor = anchor.ok_or_else(|| Error::Branch("ã does not approach 1 along the ray".into()))?;

    let mut order: Vec<usize> = (0..rhos.len()).collect();
    order.sort_by(|&a, &b| rhos[b].total_cmp(&rhos[a]));
    let mut nodes = vec![far];
    let mut last = far;
    let decades_per_node = 1.0 / 8.0;
    for &i in &order {
        let r = rhos[i];
        let steps = ((last / r).log10() / decades_per_node).ceil() as usize;
        for s in 1..steps {
            nodes.push(last * (r / last).powf(s as f64 / steps as f64));
        }
        if r < last {
            nodes.push(r);
            last = r;
        }
    }
    let values = par::try_map(exec, &nodes[1..], |&r| at(r))?;
    let mut prev_val = anchor;
    let mut prev_rho = far;
    let mut prev_log = anchor.ln();
    let mut logs = vec![(far, prev_log)];
    for (&rho, &val) in nodes[1..].iter().zip(&values) {
        let log = unwrap_step(&at, prev_rho, prev_val, prev_log, rho, val, 0)?;
        logs.push((rho, log));
        prev_val = val;
        prev_rho = rho;
        prev_log = log;
    }
    let mut out = vec![ZERO; rhos.len()];
    for (i, r) in rhos.iter().enumerate() {
        let found = logs.iter().find(|(x, _)| x == r).map(|(_, l)| *l);
        out[i] = found.ok_or_else(|| Error::Numerical("ray node lost".into()))?;
    }
    Ok(out)
}

fn unwrap_step(at: &impl Fn(f64) -> Result<C64>, r0: f64, v0: C64, log0: C64, r1: f64, v1: C64, depth: usize) -> Result<C64> {
    if v1.norm() < 1e-7 {
        return Err(Error::Branch(format!("ã vanishes on the ray near |zeta| = {r1:.6e}")));
    }
    let d = wrap(v1.arg() - v0.arg());
    if d.abs() <= PI / 4.0 {
        return Ok(C64::new(v1.norm().ln(), log0.im + d));
    }
    if depth > 40 {
        return Err(Error::Branch(format!("phase unwrapping did not settle near |zeta| = {r1:.6e}")));
    }
    let rm = (r0 * r1).sqrt();
    let vm = at(rm)?;
    let lm = unwrap_step(at, r0, v0, log0, rm, vm, depth + 1)?;
    unwrap_step(at, rm, vm, lm, r1, v1, depth + 1)
}

/// ln ã(zeta), branch continued inward from infinity along the ray through zeta.
pub fn log_a_tilde(f: &Field, zeta: C64, backend: &impl ATilde) -> Result<C64> {
    if !(zeta.im > 0.0) {
        return Err(Error::invalid(format!("log_a_tilde needs Im zeta > 0, got {zeta}")));
    }
    Ok(log_a_tilde_ray(f, zeta.arg(), &[zeta.norm()], backend, Exec::Sequential)?[0])
}

/// phi_u(rho) = Im ln ã(i rho).
pub fn phi(f: &Field, rho: f64, backend: &impl ATilde) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::invalid("phi needs rho > 0"));
    }
    Ok(log_a_tilde(f, C64::new(0.0, rho), backend)?.im)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub e1: C64,
    pub e2: C64,
    /// Momentum and energy implied by the fit, P = -4 i E1 and E = 8 i E2.
    pub momentum_fit: f64,
    pub energy_fit: f64,
    pub rhos: Vec<f64>,
    pub log_a: Vec<C64>,
    /// RMS of zeta^2 (ln ã - E1/zeta - E2/zeta^2) over the nodes.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub nodes: usize,
    /// Warn when the fit residual exceeds this.
    pub warn_residual: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { rho_min: 1e2, rho_max: 1e4, nodes: 12, warn_residual: 1e-2 }
    }
}

/// Least-squares fit of ln ã(i rho) ~ E1/zeta + E2/zeta^2 on log-spaced rho.
pub fn expansion_coeffs(f: &Field, fit: &FitConfig, backend: &impl ATilde, exec: Exec) -> Result<ExpansionFit> {
    if f.is_zero() {
        return Ok(ExpansionFit { e1: ZERO, e2: ZERO, momentum_fit: 0.0, energy_fit: 0.0, rhos: vec![], log_a: vec![], residual: 0.0 });
    }
    if fit.nodes < 2 || !(fit.rho_min > 0.0 && fit.rho_max > fit.rho_min) {
        return Err(Error::invalid("fit needs >= 2 nodes and 0 < rho_min < rho_max"));
    }
    let scale = spectral_scale(f);
    let rhos: Vec<f64> = (0..fit.nodes).map(|m| scale * fit.rho_min * (fit.rho_max / fit.rho_min).powf(m as f64 / (fit.nodes - 1) as f64)).collect();
    let logs = log_a_tilde_ray(f, PI / 2.0, &rhos, backend, exec)?;
    // multiply through by zeta^2: zeta^2 ln ã = E1 zeta + E2, linear in (E1, E2)
    let mut g = [[ZERO; 2]; 2];
    let mut rhs = [ZERO; 2];
    let rows: Vec<([C64; 2], C64)> = rhos
        .iter()
        .zip(&logs)
        .map(|(r, l)| {
            let z = C64::new(0.0, *r);
            ([z, ONE], z * z * l)
        })
        .collect();
    for (a, y) in &rows {
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] += a[i].conj() * a[j];
            }
            rhs[i] += a[i].conj() * y;
        }
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let e1 = (rhs[0] * g[1][1] - g[0][1] * rhs[1]) / det;
    let e2 = (g[0][0] * rhs[1] - g[1][0] * rhs[0]) / det;
    let residual = (rows.iter().map(|(a, y)| (y - a[0] * e1 - a[1] * e2).norm_sqr()).sum::<f64>() / rows.len() as f64).sqrt();
    if residual > fit.warn_residual {
        log::warn!("expansion fit residual {residual:.3e} exceeds {:.1e}", fit.warn_residual);
    }
    Ok(ExpansionFit { e1, e2, momentum_fit: (-4.0 * I * e1).re, energy_fit: (8.0 * I * e2).re, rhos, log_a: logs, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayScanRow {
    pub rho: f64,
    pub log_a: C64,
    pub det2_abs: f64,
    pub link_residual: f64,
}

/// Determinant values along arg zeta = theta, with the log branch anchored
/// by the ODE continuation at the outermost node.
pub fn ray_scan(f: &Field, theta: f64, rhos: &[f64], n_modes: usize, exec: Exec) -> Result<Vec<RayScanRow>> {
    if rhos.is_empty() {
        return Ok(vec![]);
    }
    let mut sorted = rhos.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let results = par::try_map(exec, &sorted, |&r| {
        let lp = SpectralPoint::from_zeta(C64::from_polar(r, theta))?;
        Ok::<_, Error>(evaluate(&build_kernel(f, lp, n_modes)?))
    })?;
    let phase = C64::from_polar(1.0, 0.5 * f.mass());
    let anchor = log_a_tilde(f, C64::from_polar(sorted[0], theta), &Backend::default())?;
    let mut rows = Vec::with_capacity(sorted.len());
    let mut prev: Option<(C64, C64)> = None;
    for (r, d) in sorted.iter().zip(&results) {
        let at = d.a2 * phase;
        if at.norm() < 1e-12 {
            return Err(Error::Branch(format!("det2 vanishes on the ray near |zeta| = {r:.6e}")));
        }
        let log = match prev {
            None => {
                let turns = ((anchor.im - at.arg()) / (2.0 * PI)).round();
                C64::new(at.norm().ln(), at.arg() + 2.0 * PI * turns)
            }
            Some((pv, pl)) => C64::new(at.norm().ln(), pl.im + wrap(at.arg() - pv.arg())),
        };
        prev = Some((at, log));
        rows.push(RayScanRow { rho: *r, log_a: log, det2_abs: d.a2.norm(), link_residual: d.link_residual });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::jost::a_tilde_ode;
    use crate::linalg::det_n;
    use crate::soliton::{field_at, SolitonParams};

    fn grid() -> Grid {
        Grid::new(40.0, 4096).unwrap()
    }

    fn gaussian(amp: f64) -> Field {
        Field::from_fn(grid(), |x| C64::new(amp * (-x * x).exp(), 0.0)).unwrap()
    }

    fn diag() -> SpectralPoint {
        SpectralPoint::from_lambda(C64::from_polar(1.0, PI / 4.0)).unwrap()
    }

    #[test]
    fn zero_field_kernel() {
        let k = build_kernel(&Field::zero(grid()), diag(), 16).unwrap();
        assert!(k.to_dense().data.iter().all(|v| *v == ZERO));
        let d = evaluate(&k);
        assert_eq!(d.a2, ONE);
        assert_eq!(d.a4, ONE);
        assert_eq!(trace2(&Field::zero(grid()), diag()).unwrap(), ZERO);
        assert_eq!(trace4(&Field::zero(grid()), diag()).unwrap(), ZERO);
    }

    #[test]
    fn kernel_rejects_real_zeta_and_bad_modes() {
        let f = gaussian(0.5);
        assert!(build_kernel(&f, SpectralPoint::from_lambda(C64::new(0.7, 0.0)).unwrap(), 64).is_err());
        assert!(build_kernel(&f, diag(), 8192).is_err());
        assert!(build_kernel(&f, diag(), 63).is_err());
    }

    #[test]
    fn block_structure_and_traces_vanish() {
        let small = Field::from_fn(Grid::new(10.0, 64).unwrap(), |x| C64::new(0.5 * (-x * x).exp(), 0.1 * x * (-x * x).exp())).unwrap();
        let k = build_kernel(&small, SpectralPoint::from_lambda(C64::new(0.8, 0.5)).unwrap(), 32).unwrap();
        let t = k.to_dense();
        for i in 0..32 {
            for j in 0..32 {
                assert_eq!(t[(i, j)], ZERO);
                assert_eq!(t[(32 + i, 32 + j)], ZERO);
            }
        }
        assert_eq!(t.trace(), ZERO);
        assert!(t.mul(&t).mul(&t).trace().norm() < 1e-14);
        let hs = t.hs_norm_sq();
        assert!((hs - k.hs_norm_sq()).abs() < 1e-12 * hs, "{hs} vs {}", k.hs_norm_sq());
    }

    #[test]
    fn banded_schur_matches_dense_determinant() {
        let small = Field::from_fn(Grid::new(10.0, 128).unwrap(), |x| C64::new(0.9 * (-x * x).exp(), 0.3 * (-(x - 0.5).powi(2)).exp())).unwrap();
        for lam in [C64::new(0.8, 0.5), C64::new(0.3, 1.1), C64::from_polar(1.0, PI / 4.0)] {
            let k = build_kernel(&small, SpectralPoint::from_lambda(lam).unwrap(), 64).unwrap();
            let d = evaluate(&k);
            let dense = det_dense(&k);
            assert!((d.a2_raw - dense).norm() < 1e-11, "{lam}: {} vs {}", d.a2_raw, dense);
            let t = k.to_dense();
            let t2 = t.mul(&t);
            assert!((t2.trace() - d.tr2_matrix).norm() < 1e-12);
            assert!((t2.mul(&t2).trace() - d.tr4_matrix).norm() < 1e-12);
            let d4 = det_n(&t, 4);
            assert!((d4 - d.a4).norm() < 1e-10 * d4.norm());
        }
    }

    #[test]
    fn hilbert_schmidt_identity() {
        let f = gaussian(0.5);
        let k = build_kernel(&f, diag(), 1024).unwrap();
        let expect = f.mass();
        assert!((k.hs_norm_sq() / expect - 1.0).abs() < 0.02, "{} vs {expect}", k.hs_norm_sq());
        let lp = SpectralPoint::from_lambda(C64::new(0.9, 0.6)).unwrap();
        let k = build_kernel(&f, lp, 1024).unwrap();
        let expect = lp.lambda.norm_sqr() / lp.zeta().im * f.mass();
        assert!((k.hs_norm_sq() / expect - 1.0).abs() < 0.02);
    }

    #[test]
    fn trace2_quadrature_matches_lattice_sum() {
        // full-lattice tr T^2 = 2 lambda^2 sum_m |c_m|^2 (-2 L cot(zeta L))/(p_m + 2 zeta)
        let f = gaussian(0.5);
        let lp = diag();
        let k = build_kernel(&f, lp, 2048).unwrap();
        let z = lp.zeta();
        let l = 40.0;
        let cot = (z * l).cos() / (z * l).sin();
        let n = 4096;
        let lattice: C64 =
            k.coeffs.iter().enumerate().map(|(i, c)| c.norm_sqr() * (-2.0 * l * cot) / (PI * signed_mode(i, n) as f64 / l + 2.0 * z)).sum::<C64>() * 2.0 * z;
        let tr2 = trace2(&f, lp).unwrap();
        assert!((tr2 - lattice).norm() < 1e-10 * tr2.norm());
    }

    #[test]
    fn matrix_trace2_converges_at_first_order() {
        let f = gaussian(0.5);
        let tr2 = trace2(&f, diag()).unwrap();
        let errs: Vec<f64> = [512, 1024, 2048].iter().map(|&nc| (build_kernel(&f, diag(), nc).unwrap().matrix_traces().0 - tr2).norm() / tr2.norm()).collect();
        assert!(errs[0] / errs[1] > 1.8 && errs[1] / errs[2] > 1.8, "{errs:?}");
        assert!(errs[2] < 2e-2);
    }

    #[test]
    fn trace4_matches_matrix_trace() {
        let f = gaussian(0.5);
        let k = build_kernel(&f, diag(), 2048).unwrap();
        let (_, t4) = k.matrix_traces();
        let q = trace4(&f, diag()).unwrap();
        assert!((q - t4).norm() < 1e-5 * q.norm(), "{q} vs {t4}");
    }

    #[test]
    fn det_link_holds() {
        let f = gaussian(0.5);
        let d = evaluate(&build_kernel(&f, SpectralPoint::from_lambda(C64::new(0.7, 0.9)).unwrap(), 512).unwrap());
        assert!(d.link_residual < 1e-10);
    }

    #[test]
    fn det_matches_ode_for_gaussian() {
        let f = gaussian(0.5);
        let cfg = JostConfig::default();
        for lam in [C64::from_polar(1.0, PI / 4.0), C64::new(0.5, 1.2), C64::new(1.3, 0.4)] {
            let lp = SpectralPoint::from_lambda(lam).unwrap();
            let d = evaluate(&build_kernel(&f, lp, 1024).unwrap());
            let a = a_ode(&f, lp, &cfg).unwrap();
            assert!((d.a2 - a).norm() < 1e-4, "{lam}: {} vs {a}", d.a2);
        }
    }

    #[test]
    fn soliton_det_value() {
        let f = field_at(&SolitonParams::new(1.0, 0.0).unwrap(), 0.0, grid()).unwrap();
        let d = evaluate(&build_kernel(&f, diag(), 1024).unwrap());
        assert!((d.a2 + 1.0 / 3.0).norm() < 1e-4, "{}", d.a2);
    }

    #[test]
    fn log_a_tilde_of_soliton_and_zero() {
        let f = field_at(&SolitonParams::new(1.0, 0.0).unwrap(), 0.0, grid()).unwrap();
        let l = log_a_tilde(&f, C64::new(0.0, 1.0), &Backend::default()).unwrap();
        assert!((l - C64::new((1.0f64 / 3.0).ln(), 0.0)).norm() < 1e-6, "{l}");
        let z = log_a_tilde(&Field::zero(grid()), C64::new(0.0, 1.0), &Backend::default()).unwrap();
        assert_eq!(z, ZERO);
        assert!(log_a_tilde(&f, C64::new(0.0, 0.5), &Backend::default()).is_err());
    }

    #[test]
    fn phi_nonnegative_for_small_gaussian() {
        let f = gaussian(0.2);
        for rho in [0.5, 1.0, 2.0, 5.0] {
            assert!(phi(&f, rho, &Backend::default()).unwrap() >= -1e-4);
        }
        assert_eq!(phi(&Field::zero(grid()), 1.0, &Backend::default()).unwrap(), 0.0);
    }

    #[test]
    fn phi_of_algebraic_soliton_is_small() {
        let f = field_at(&SolitonParams::new(0.0, 1.0).unwrap(), 0.0, Grid::new(400.0, 16384).unwrap()).unwrap();
        let b = Backend::Ode(JostConfig::relaxed(1e-2));
        let logs = log_a_tilde_ray(&f, PI / 2.0, &[1.0, 2.0, 5.0], &b, Exec::Auto).unwrap();
        assert!(logs[0].norm() < 0.05);
        assert!(logs.iter().all(|l| l.im.abs() < 0.05), "{logs:?}");
    }

    #[test]
    fn scaling_law() {
        let f = gaussian(0.5);
        let g = f.rescale(2.0).unwrap();
        let cfg = JostConfig::default();
        let a = a_tilde_ode(&g, C64::new(0.0, 2.0), &cfg).unwrap();
        let b = a_tilde_ode(&f, C64::new(0.0, 1.0), &cfg).unwrap();
        assert!((a - b).norm() < 1e-5);
    }

    #[test]
    fn expansion_of_zero_field() {
        let e = expansion_coeffs(&Field::zero(grid()), &FitConfig::default(), &Backend::default(), Exec::Sequential).unwrap();
        assert_eq!((e.e1, e.e2), (ZERO, ZERO));
    }

    #[test]
    fn ray_scan_agrees_with_ode_log() {
        let f = gaussian(0.5);
        let rows = ray_scan(&f, PI / 2.0, &[4.0, 1.0, 0.5], 512, Exec::Auto).unwrap();
        for r in &rows {
            let l = log_a_tilde(&f, C64::new(0.0, r.rho), &Backend::default()).unwrap();
            assert!((l - r.log_a).norm() < 1e-4, "{}: {} vs {l}", r.rho, r.log_a);
            assert!(r.link_residual < 1e-10);
        }
    }
}
