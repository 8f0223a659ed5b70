//! Removal of one eigenvalue by the Bäcklund transformation
//! u -> G (G u - S) built from the bound state at lambda_1.

use crate::error::{Error, Result};
use crate::field::{spectral_derivative, Field, Grid};
use crate::jost::{a_ode, jost, scattering, JostConfig, SpectralPoint};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Debug)]
pub struct BacklundData {
    /// lambda_1 = sqrt(zeta_1) in the open first quadrant.
    pub lambda1: SpectralPoint,
    pub grid: Grid,
    /// (eta_1, eta_2) at the grid points, max modulus 1.
    pub eta: Vec<[C64; 2]>,
}

impl BacklundData {
    pub fn new(lambda1: SpectralPoint, grid: Grid, eta: Vec<[C64; 2]>) -> Result<Self> {
        let l = lambda1.lambda;
        if !(l.re > 0.0 && l.im > 0.0) {
            return Err(Error::invalid(format!("lambda_1 = {l} must lie strictly inside the first quadrant")));
        }
        if eta.len() != grid.n() {
            return Err(Error::invalid("eta must have one value per grid point"));
        }
        Ok(BacklundData { lambda1, grid, eta })
    }

    /// d = lambda |eta_1|^2 + conj(lambda) |eta_2|^2.
    pub fn d(&self) -> Vec<C64> {
        let l = self.lambda1.lambda;
        self.eta.iter().map(|e| l * e[0].norm_sqr() + l.conj() * e[1].norm_sqr()).collect()
    }

    /// G = conj(d)/d, unimodular.
    pub fn g(&self) -> Result<Vec<C64>> {
        self.d()
            .iter()
            .enumerate()
            .map(|(j, d)| if d.norm() == 0.0 { Err(Error::Numerical(format!("d vanishes at grid point {j}"))) } else { Ok(d.conj() / d) })
            .collect()
    }

    /// S = 2 i (lambda^2 - conj(lambda)^2) eta_1 conj(eta_2) / d.
    pub fn s(&self) -> Result<Vec<C64>> {
        let l = self.lambda1.lambda;
        let k = 2.0 * I * (l * l - (l * l).conj());
        self.eta
            .iter()
            .zip(self.d())
            .enumerate()
            .map(|(j, (e, d))| if d.norm() == 0.0 { Err(Error::Numerical(format!("d vanishes at grid point {j}"))) } else { Ok(k * e[0] * e[1].conj() / d) })
            .collect()
    }

    /// (max ||G| - 1|, max (|S| - 4 Im lambda)).
    pub fn invariant_defects(&self) -> Result<(f64, f64)> {
        let bound = 4.0 * self.lambda1.lambda.im;
        let g = self.g()?.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max);
        let s = self.s()?.iter().map(|v| v.norm() - bound).fold(f64::NEG_INFINITY, f64::max);
        Ok((g, s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    pub jost: JostConfig,
    /// Largest |ã(zeta_1)| accepted as a zero before polishing.
    pub zero_tol: f64,
    /// |eta(+L)| must be below this fraction of max |eta|.
    pub decay_tol: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig { jost: JostConfig::default(), zero_tol: 1e-6, decay_tol: 1e-4 }
    }
}

/// zeta_1 moved to the zero of the discrete a by a few Newton steps.
fn polish(f: &Field, zeta1: C64, cfg: &JostConfig) -> Result<C64> {
    let a = |z: C64| a_ode(f, SpectralPoint::from_zeta(z)?, cfg);
    let mut z = zeta1;
    for _ in 0..6 {
        let h = 1e-6 * (1.0 + z.norm());
        let d = (a(z + h)? - a(z - h)?) / (2.0 * h);
        let step = a(z)? / d;
        if !step.norm().is_finite() || step.norm() > 1e-3 * (1.0 + z.norm()) {
            break;
        }
        z -= step;
        if step.norm() < 1e-14 * (1.0 + z.norm()) {
            break;
        }
    }
    Ok(z)
}

/// Bound state psi_1^-(., lambda_1) at a zero zeta_1 of ã, checked for decay at +L.
pub fn eigenfunction(f: &Field, zeta1: C64, cfg: &EigenConfig) -> Result<BacklundData> {
    if !(zeta1.im > 0.0) {
        return Err(Error::invalid(format!("zeta_1 = {zeta1} must lie in the open upper half plane")));
    }
    if f.is_zero() {
        return Err(Error::NotEigenvalue("the zero field has no eigenvalues".into()));
    }
    let lp = SpectralPoint::from_zeta(zeta1)?;
    let a = a_ode(f, lp, &cfg.jost)?;
    if a.norm() > cfg.zero_tol {
        return Err(Error::NotEigenvalue(format!("|a| = {:.3e} at zeta = {zeta1}", a.norm())));
    }
    let zeta1 = polish(f, zeta1, &cfg.jost)?;
    let lp = SpectralPoint::from_zeta(zeta1)?;
    if !(lp.lambda.re > 0.0) {
        return Err(Error::invalid("zeta_1 on the imaginary half line of negative reals is excluded"));
    }
    let pair = jost(f, lp, &cfg.jost)?;
    let n = f.grid().n();
    let psi: Vec<[C64; 2]> = (0..=n).map(|j| pair.psi_left(j)).collect();
    let max = psi.iter().map(|p| p[0].norm().max(p[1].norm())).fold(0.0, f64::max);
    let end = psi[n][0].norm().max(psi[n][1].norm());
    if !(max > 0.0) || end > cfg.decay_tol * max {
        return Err(Error::NotEigenvalue(format!("|eta(+L)| / max |eta| = {:.3e} exceeds {:.1e}", end / max, cfg.decay_tol)));
    }
    // psi_1^- picks up a ~a e^{2 Im zeta x} error relative to the decaying part
    // towards +L, so the right half is taken from psi_2^+ matched at the peak
    let peak = (0..=n).max_by(|&i, &j| (psi[i][0].norm_sqr() + psi[i][1].norm_sqr()).total_cmp(&(psi[j][0].norm_sqr() + psi[j][1].norm_sqr()))).unwrap_or(0);
    let right: Vec<[C64; 2]> = (peak..=n).map(|j| pair.psi_right(j)).collect();
    let r0 = right[0];
    let gamma = (psi[peak][0] * r0[0].conj() + psi[peak][1] * r0[1].conj()) / (r0[0].norm_sqr() + r0[1].norm_sqr());
    let mismatch = ((psi[peak][0] - gamma * r0[0]).norm() + (psi[peak][1] - gamma * r0[1]).norm()) / max;
    if mismatch > cfg.decay_tol {
        return Err(Error::NotEigenvalue(format!("psi_1^- and psi_2^+ are not parallel (mismatch {mismatch:.3e})")));
    }
    let eta = (0..n)
        .map(|j| {
            let p = if j <= peak { psi[j] } else { [gamma * right[j - peak][0], gamma * right[j - peak][1]] };
            [p[0] / max, p[1] / max]
        })
        .collect();
    BacklundData::new(lp, *f.grid(), eta)
}

/// B u = G (G u - S).
pub fn remove(f: &Field, bd: &BacklundData) -> Result<Field> {
    if f.grid() != &bd.grid {
        return Err(Error::invalid("field and eigenfunction live on different grids"));
    }
    let g = bd.g()?;
    let s = bd.s()?;
    let out = f.samples().iter().zip(g.iter().zip(&s)).map(|(u, (g, s))| g * (g * u - s)).collect();
    Field::from_samples(bd.grid, out)
}

/// a_before(lambda) (lambda_1^2/conj(lambda_1)^2) (lambda^2 - conj(lambda_1)^2)/(lambda^2 - lambda_1^2).
pub fn a_update_factor(lambda1: C64, lambda: C64) -> C64 {
    let z1 = lambda1 * lambda1;
    let z = lambda * lambda;
    z1 / z1.conj() * (z - z1.conj()) / (z - z1)
}

pub fn verify_a_update(before: &Field, after: &Field, zeta1: C64, probes: &[SpectralPoint], cfg: &JostConfig) -> Result<f64> {
    if !(zeta1.im > 0.0) {
        return Err(Error::invalid("Im zeta_1 must be positive"));
    }
    let l1 = SpectralPoint::from_zeta(zeta1)?.lambda;
    let mut worst: f64 = 0.0;
    for p in probes {
        let a0 = a_ode(before, *p, cfg)?;
        let a1 = a_ode(after, *p, cfg)?;
        worst = worst.max((a1 - a0 * a_update_factor(l1, p.lambda)).norm());
    }
    Ok(worst)
}

/// max |b_before - b_after| over real probes.
pub fn b_invariance(before: &Field, after: &Field, probes: &[f64], cfg: &JostConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &l in probes {
        let lp = SpectralPoint::from_lambda(C64::new(l, 0.0))?;
        let b0 = scattering(before, lp, cfg)?.b.expect("real lambda has b");
        let b1 = scattering(after, lp, cfg)?.b.expect("real lambda has b");
        worst = worst.max((b0 - b1).norm());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    /// max |G' - (-i/2) G (|S|^2 - u G conj(S) - conj(u G) S)|.
    pub identity_residual: f64,
    /// max (|G'| - 8 (Im lambda)^2 - 4 Im lambda |u|); <= 0 when the bound holds.
    pub bound_excess: f64,
}

impl DerivativeCheck {
    pub fn bound_holds(&self, tol: f64) -> bool {
        self.bound_excess <= tol
    }
}

/// G' by spectral differentiation of its unwrapped phase. G is not periodic
/// (the phase gains 4 arg lambda_1 across the box), so a smooth tanh step
/// carrying that gain is removed first and differentiated analytically.
pub fn g_derivative(bd: &BacklundData) -> Result<Vec<C64>> {
    let g = bd.g()?;
    let n = g.len();
    let mut theta = Vec::with_capacity(n);
    let mut prev = g[0].arg();
    theta.push(prev);
    for v in &g[1..] {
        let t = prev + (v / C64::from_polar(1.0, prev)).arg();
        theta.push(t);
        prev = t;
    }
    let jump = theta[n - 1] - theta[0];
    let w = bd.grid.half_width / 20.0;
    let xs = bd.grid.xs();
    let periodic: Vec<C64> = theta.iter().zip(&xs).map(|(t, x)| C64::new(t - jump * 0.5 * (1.0 + (x / w).tanh()), 0.0)).collect();
    let dper = spectral_derivative(&bd.grid, &periodic);
    Ok(g.iter().zip(&dper).zip(&xs).map(|((g, d), x)| I * g * (d.re + jump / (2.0 * w * (x / w).cosh().powi(2)))).collect())
}

pub fn derivative_identity_check(bd: &BacklundData, f: &Field) -> Result<DerivativeCheck> {
    let g = bd.g()?;
    let s = bd.s()?;
    let dg = g_derivative(bd)?;
    let im = bd.lambda1.lambda.im;
    let mut res: f64 = 0.0;
    let mut excess = f64::NEG_INFINITY;
    for (((u, g), s), d) in f.samples().iter().zip(&g).zip(&s).zip(&dg) {
        let ug = u * g;
        let rhs = -0.5 * I * g * (s.norm_sqr() - ug * s.conj() - ug.conj() * s);
        res = res.max((d - rhs).norm());
        excess = excess.max(d.norm() - 8.0 * im * im - 4.0 * im * u.norm());
    }
    Ok(DerivativeCheck { identity_residual: res, bound_excess: excess })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BacklundReport {
    pub zeta1: C64,
    pub mass_before: f64,
    pub mass_after: f64,
    /// 8 arg lambda_1 = 4 arg zeta_1.
    pub expected_drop: f64,
    pub zeros_before: Vec<C64>,
    pub zeros_after: Vec<C64>,
    pub a_update_deviation: f64,
    pub b_invariance_deviation: f64,
    pub g_defect: f64,
    pub s_excess: f64,
    pub derivative: DerivativeCheck,
}

impl BacklundReport {
    pub fn mass_defect(&self) -> f64 {
        (self.mass_before - self.mass_after - self.expected_drop).abs()
    }
}

/// Probe points away from zeta_1 used by the a-update check.
pub fn default_probes(zeta1: C64) -> Vec<SpectralPoint> {
    let mut out = Vec::new();
    for (r, t) in [(0.3, 0.5), (0.8, 1.2), (1.5, 2.0), (2.5, 0.9), (0.6, 2.6), (4.0, 1.6)] {
        let z = C64::from_polar(r, t);
        if (z - zeta1).norm() > 0.1 {
            out.push(SpectralPoint::from_zeta(z).expect("upper half plane"));
        }
    }
    out
}

pub fn arg_lambda(zeta1: C64) -> f64 {
    0.5 * zeta1.arg().rem_euclid(2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fredholm::Backend;
    use crate::par::Exec;
    use crate::soliton::{field_at, SolitonParams};
    use crate::spectrum::{default_box, locate, ray_count, LocateConfig, RayConfig};

    fn grid() -> Grid {
        Grid::new(40.0, 4096).unwrap()
    }

    fn soliton(e: f64, c: f64) -> Field {
        field_at(&SolitonParams::new(e, c).unwrap(), 0.0, grid()).unwrap()
    }

    #[test]
    fn eigenfunction_of_soliton() {
        let f = soliton(1.0, 0.0);
        let bd = eigenfunction(&f, C64::new(0.0, 0.5), &EigenConfig::default()).unwrap();
        let m: Vec<f64> = bd.eta.iter().map(|e| (e[0].norm_sqr() + e[1].norm_sqr()).sqrt()).collect();
        assert!(m[0] < 1e-6 && m[4095] < 1e-6);
        let peak = m.iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert!(m[..peak].windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(m[peak..].windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let (g, s) = bd.invariant_defects().unwrap();
        assert!(g < 1e-10 && s < 1e-10);
    }

    #[test]
    fn non_eigenvalue_is_rejected() {
        let f = soliton(1.0, 0.0);
        assert!(matches!(eigenfunction(&f, C64::new(0.0, 1.0), &EigenConfig::default()), Err(Error::NotEigenvalue(_))));
        let z = Field::zero(grid());
        assert!(eigenfunction(&z, C64::new(0.0, 0.5), &EigenConfig::default()).is_err());
    }

    #[test]
    fn removing_the_soliton_leaves_vacuum() {
        let f = soliton(1.0, 0.0);
        let bd = eigenfunction(&f, C64::new(0.0, 0.5), &EigenConfig::default()).unwrap();
        let g = remove(&f, &bd).unwrap();
        assert!(g.mass() < 1e-3, "{}", g.mass());
        assert!((f.mass() - g.mass() - 8.0 * arg_lambda(C64::new(0.0, 0.5))).abs() < 1e-6);
        let dev = verify_a_update(&f, &g, C64::new(0.0, 0.5), &default_probes(C64::new(0.0, 0.5)), &JostConfig::default()).unwrap();
        assert!(dev < 1e-4, "{dev}");
    }

    #[test]
    fn moving_soliton_mass_drop() {
        let f = soliton(1.0, 1.0);
        let z1 = C64::new(-0.25, 0.5);
        let bd = eigenfunction(&f, z1, &EigenConfig::default()).unwrap();
        let g = remove(&f, &bd).unwrap();
        assert!((f.mass() - g.mass() - 8.0 * arg_lambda(z1)).abs() < 1e-6, "{} {}", f.mass() - g.mass(), 8.0 * arg_lambda(z1));
    }

    #[test]
    fn derivative_identity_and_bound() {
        let f = soliton(1.0, 0.0);
        let bd = eigenfunction(&f, C64::new(0.0, 0.5), &EigenConfig::default()).unwrap();
        let chk = derivative_identity_check(&bd, &f).unwrap();
        assert!(chk.identity_residual < 1e-6, "{chk:?}");
        assert!(chk.bound_holds(1e-8));
    }

    #[test]
    fn two_hump_fixture() {
        let base = soliton(1.0, 0.0);
        let bump = Field::from_fn(grid(), |x| C64::new(0.1 * (-(x - 6.0).powi(2)).exp(), 0.0)).unwrap();
        let f = base.add(&bump).unwrap();
        let b = Backend::default();
        let set = locate(&f, default_box(&f), &LocateConfig::default(), &b, Exec::Auto).unwrap();
        assert_eq!(set.zeros.len(), 1);
        let z1 = set.zeros[0].zeta;
        let bd = eigenfunction(&f, z1, &EigenConfig::default()).unwrap();
        let g = remove(&f, &bd).unwrap();
        assert!((f.mass() - g.mass() - 4.0 * z1.arg()).abs() < 1e-6);
        let dev = b_invariance(&f, &g, &[0.5, 0.8, 1.2], &JostConfig::default()).unwrap();
        assert!(dev < 1e-4, "b deviation {dev}");
        let dev = verify_a_update(&f, &g, z1, &default_probes(z1), &JostConfig::default()).unwrap();
        assert!(dev < 1e-4, "a deviation {dev}");
        // the zero is gone and the count over an angle containing it drops by one
        let after = locate(&g, default_box(&f), &LocateConfig::default(), &b, Exec::Auto).unwrap();
        assert!(after.zeros.iter().all(|z| (z.zeta - z1).norm() > 1e-3));
        let theta = 0.5 * z1.arg();
        let c0 = ray_count(&f, theta, &RayConfig::default(), &b, Exec::Auto).unwrap().count;
        let c1 = ray_count(&g, theta, &RayConfig::default(), &b, Exec::Auto).unwrap().count;
        assert_eq!(c0 - c1, 1);
    }

    #[test]
    fn real_lambda1_rejected() {
        assert!(BacklundData::new(SpectralPoint::from_lambda(C64::new(1.0, 0.0)).unwrap(), grid(), vec![[C64::new(1.0, 0.0); 2]; 4096]).is_err());
    }
}
