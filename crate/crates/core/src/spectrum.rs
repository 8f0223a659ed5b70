//! Zeros of ã in the upper half plane: ray counting, argument-principle
//! boxes with Newton refinement, and the mass/trace identity.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::fredholm::{log_a_tilde_ray, spectral_scale, ATilde, Backend};
use crate::par::{self, Exec};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RayConfig {
    pub per_decade: usize,
    /// Decades below and above `spectral_scale`.
    pub decades: f64,
    pub integer_tol: f64,
    /// |ã| below this on a ray node means a zero sits too close to the ray.
    pub min_modulus: f64,
}

impl Default for RayConfig {
    fn default() -> Self {
        RayConfig { per_decade: 16, decades: 3.0, integer_tol: 0.05, min_modulus: 1e-4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayCount {
    pub theta: f64,
    /// (1/2 pi i) int_0^{infinity e^{i theta}} ã'/ã.
    pub integral: C64,
    /// integral + M/(4 pi).
    pub raw: C64,
    pub count: i64,
}

/// Number of zeros of ã with arg zeta in (theta, pi).
pub fn ray_count(f: &Field, theta: f64, cfg: &RayConfig, backend: &impl ATilde, exec: Exec) -> Result<RayCount> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::invalid(format!("theta must lie in (0, pi), got {theta}")));
    }
    let m = f.mass();
    if f.is_zero() {
        return Ok(RayCount { theta, integral: C64::new(0.0, 0.0), raw: C64::new(0.0, 0.0), count: 0 });
    }
    let scale = spectral_scale(f);
    let n = (2.0 * cfg.decades * cfg.per_decade as f64).round() as usize;
    let rhos: Vec<f64> = (0..=n).map(|k| scale * 10f64.powf(-cfg.decades + 2.0 * cfg.decades * k as f64 / n as f64)).collect();
    let logs = log_a_tilde_ray(f, theta, &rhos, backend, exec)?;
    if let Some((r, l)) = rhos.iter().zip(&logs).find(|(_, l)| l.re < cfg.min_modulus.ln()) {
        return Err(Error::Branch(format!("|ã| = {:.2e} at |zeta| = {r:.4e}: a zero lies near the ray theta = {theta}", l.re.exp())));
    }
    // linear extrapolation to zeta = 0 from the two innermost nodes
    let l0 = logs[0] - rhos[0] * (logs[1] - logs[0]) / (rhos[1] - rhos[0]);
    let integral = -l0 / C64::new(0.0, 2.0 * PI);
    let raw = integral + m / (4.0 * PI);
    let count = raw.re.round();
    let off = (raw - count).norm();
    if off > cfg.integer_tol {
        return Err(Error::Numerical(format!("ray integral {raw:.6} is {off:.3e} away from an integer at theta = {theta}")));
    }
    Ok(RayCount { theta, integral, raw, count: count as i64 })
}

/// count <= M/(4 theta).
pub fn angle_bound_check(f: &Field, theta: f64, cfg: &RayConfig, backend: &impl ATilde, exec: Exec) -> Result<bool> {
    let rc = ray_count(f, theta, cfg, backend, exec)?;
    Ok(rc.count as f64 <= f.mass() / (4.0 * theta) + 1e-12)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min < re_max && im_min < im_max && im_min > 0.0) || ![re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("search box must be a finite rectangle strictly inside the upper half plane"));
        }
        Ok(Rect { re_min, re_max, im_min, im_max })
    }

    pub fn center(&self) -> C64 {
        C64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn size(&self) -> f64 {
        (self.re_max - self.re_min).max(self.im_max - self.im_min)
    }

    pub fn contains(&self, z: C64, margin: f64) -> bool {
        z.re >= self.re_min - margin && z.re <= self.re_max + margin && z.im >= self.im_min - margin && z.im <= self.im_max + margin
    }

    fn corners(&self) -> [C64; 4] {
        [C64::new(self.re_min, self.im_min), C64::new(self.re_max, self.im_min), C64::new(self.re_max, self.im_max), C64::new(self.re_min, self.im_max)]
    }

    /// Four children split at fraction `s` of each side.
    fn split(&self, s: f64) -> [Rect; 4] {
        let xm = self.re_min + s * (self.re_max - self.re_min);
        let ym = self.im_min + s * (self.im_max - self.im_min);
        [
            Rect { re_min: self.re_min, re_max: xm, im_min: self.im_min, im_max: ym },
            Rect { re_min: xm, re_max: self.re_max, im_min: self.im_min, im_max: ym },
            Rect { re_min: self.re_min, re_max: xm, im_min: ym, im_max: self.im_max },
            Rect { re_min: xm, re_max: self.re_max, im_min: ym, im_max: self.im_max },
        ]
    }
}

/// [-R, R] x [0.02, R] with R = 2 max(1, ||u||_{L^4}^2).
pub fn default_box(f: &Field) -> Rect {
    let r = 2.0 * spectral_scale(f).sqrt();
    Rect { re_min: -r, re_max: r, im_min: 0.02, im_max: r }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocateConfig {
    pub edge_points: usize,
    /// Largest accepted phase increment between neighbouring boundary samples.
    pub max_dphase: f64,
    pub min_size: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub residual_tol: f64,
}

impl Default for LocateConfig {
    fn default() -> Self {
        LocateConfig { edge_points: 12, max_dphase: PI / 6.0, min_size: 1e-3, newton_tol: 1e-12, max_newton: 40, residual_tol: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub zeta: C64,
    /// |ã(zeta)| after refinement.
    pub residual: f64,
    pub newton_iters: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub rect: Rect,
    pub winding: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueSet {
    pub zeros: Vec<ZeroRecord>,
    pub clusters: Vec<ClusterRecord>,
    pub counts: Vec<RayCount>,
}

impl EigenvalueSet {
    /// Located zeros with arg zeta in (theta, pi).
    pub fn count_above(&self, theta: f64) -> usize {
        self.zeros.iter().filter(|z| z.zeta.arg() > theta).count()
    }

    pub fn zetas(&self) -> Vec<C64> {
        self.zeros.iter().map(|z| z.zeta).collect()
    }
}

struct Locator<'a, B: ATilde> {
    f: &'a Field,
    backend: &'a B,
    cfg: LocateConfig,
    exec: Exec,
}

impl<B: ATilde> Locator<'_, B> {
    fn eval(&self, z: C64) -> Result<C64> {
        self.backend.a_tilde(self.f, z)
    }

    /// Winding number of ã around the rectangle, by adaptive phase tracking.
    fn winding(&self, rect: &Rect) -> Result<i64> {
        let c = rect.corners();
        let n = self.cfg.edge_points.max(2);
        let mut pts: Vec<C64> = Vec::with_capacity(4 * n + 1);
        for e in 0..4 {
            let (a, b) = (c[e], c[(e + 1) % 4]);
            for k in 0..n {
                pts.push(a + (b - a) * (k as f64 / n as f64));
            }
        }
        pts.push(c[0]);
        let mut vals = par::try_map(self.exec, &pts, |z| self.eval(*z))?;
        for _ in 0..30 {
            let bad: Vec<usize> = (0..pts.len() - 1).filter(|&i| (vals[i + 1] / vals[i]).arg().abs() > self.cfg.max_dphase).collect();
            if bad.is_empty() {
                break;
            }
            let mids: Vec<C64> = bad.iter().map(|&i| 0.5 * (pts[i] + pts[i + 1])).collect();
            let mvals = par::try_map(self.exec, &mids, |z| self.eval(*z))?;
            for (j, &i) in bad.iter().enumerate().rev() {
                pts.insert(i + 1, mids[j]);
                vals.insert(i + 1, mvals[j]);
            }
        }
        if let Some(z) = pts.iter().zip(&vals).find(|(_, v)| v.norm() < 1e-10).map(|(z, _)| *z) {
            return Err(Error::Branch(format!("ã vanishes on the box boundary near {z}")));
        }
        let total: f64 = vals.windows(2).map(|w| (w[1] / w[0]).arg()).sum();
        Ok((total / (2.0 * PI)).round() as i64)
    }

    fn newton(&self, start: C64) -> Result<(C64, f64, usize)> {
        let mut z = start;
        let mut v = self.eval(z)?;
        for it in 1..=self.cfg.max_newton {
            let h = 1e-6 * (1.0 + z.norm());
            let d = (self.eval(z + h)? - self.eval(z - h)?) / (2.0 * h);
            if d.norm() == 0.0 {
                return Err(Error::Numerical("zero derivative in Newton".into()));
            }
            let step = v / d;
            z -= step;
            if z.im <= 0.0 {
                return Err(Error::Numerical("Newton left the upper half plane".into()));
            }
            v = self.eval(z)?;
            if step.norm() < self.cfg.newton_tol * (1.0 + z.norm()) {
                return Ok((z, v.norm(), it));
            }
        }
        Ok((z, v.norm(), self.cfg.max_newton))
    }

    fn search(&self, rect: Rect, depth: usize, out: &mut EigenvalueSet) -> Result<()> {
        let w = self.winding(&rect)?;
        if w <= 0 {
            return Ok(());
        }
        let small = rect.size() <= self.cfg.min_size;
        if w == 1 {
            if let Ok((z, res, iters)) = self.newton(rect.center()) {
                if res < self.cfg.residual_tol && rect.contains(z, 1e-9 * (1.0 + rect.size())) {
                    out.zeros.push(ZeroRecord { zeta: z, residual: res, newton_iters: iters });
                    return Ok(());
                }
            }
        }
        if small || depth > 40 {
            out.clusters.push(ClusterRecord { rect, winding: w });
            return Ok(());
        }
        // off-centre split points make it unlikely that a zero lands on an edge
        let mut last_err = None;
        for s in [0.4871, 0.5317, 0.4419] {
            let mut trial = EigenvalueSet::default();
            let mut ok = true;
            for child in rect.split(s) {
                if let Err(e) = self.search(child, depth + 1, &mut trial) {
                    ok = false;
                    last_err = Some(e);
                    break;
                }
            }
            if ok {
                out.zeros.extend(trial.zeros);
                out.clusters.extend(trial.clusters);
                return Ok(());
            }
        }
        Err(last_err.unwrap_or_else(|| Error::Numerical("box subdivision failed".into())))
    }
}

/// All zeros of ã inside `rect`, assumed simple; unresolved groups become cluster records.
pub fn locate(f: &Field, rect: Rect, cfg: &LocateConfig, backend: &impl ATilde, exec: Exec) -> Result<EigenvalueSet> {
    let rect = Rect::new(rect.re_min, rect.re_max, rect.im_min, rect.im_max)?;
    let mut out = EigenvalueSet::default();
    if f.is_zero() {
        return Ok(out);
    }
    let loc = Locator { f, backend, cfg: *cfg, exec };
    loc.search(rect, 0, &mut out)?;
    out.zeros.sort_by(|a, b| a.zeta.re.total_cmp(&b.zeta.re));
    Ok(out)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassTrace {
    pub mass: f64,
    pub arg_sum: f64,
    /// (1/pi) int ln|ã(xi)|^2 / xi over [-xi_max, xi_max].
    pub integral: f64,
    pub residual: f64,
}

/// |M - 4 sum arg zeta_j + (1/pi) int ln|ã(xi)|^2/xi d xi| on [-xi_max, xi_max].
pub fn mass_trace_identity(f: &Field, zeros: &[C64], xi_max: f64, backend: &Backend, exec: Exec) -> Result<MassTrace> {
    if zeros.iter().any(|z| !(z.im > 0.0)) {
        return Err(Error::invalid("zeros must lie in the open upper half plane"));
    }
    let mass = f.mass();
    let arg_sum: f64 = zeros.iter().map(|z| z.arg()).sum();
    let integral = if f.is_zero() { 0.0 } else { real_line_integral(f, xi_max, backend, exec)? };
    let residual = (mass - 4.0 * arg_sum + integral).abs();
    Ok(MassTrace { mass, arg_sum, integral, residual })
}

fn real_line_integral(f: &Field, xi_max: f64, backend: &Backend, exec: Exec) -> Result<f64> {
    if !(xi_max > 0.0) {
        return Err(Error::invalid("xi_max must be positive"));
    }
    let (gx, gw) = gauss_legendre(16);
    // geometric panels towards 0; the integrand is smooth there but varies on the scale of u
    let mut edges = vec![0.0];
    let mut e = xi_max * 2f64.powi(-24);
    while e < xi_max {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(xi_max);
    let mut nodes = Vec::new();
    for p in edges.windows(2) {
        let (a, b) = (p[0], p[1]);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
        }
    }
    let terms = par::try_map(exec, &nodes, |&(xi, w)| {
        let plus = backend.a_tilde(f, C64::new(xi, 0.0))?.norm_sqr().ln();
        let minus = backend.a_tilde(f, C64::new(-xi, 0.0))?.norm_sqr().ln();
        Ok::<_, Error>(w * (plus - minus) / xi)
    })?;
    let tail = backend.a_tilde(f, C64::new(xi_max, 0.0))?.norm_sqr().ln().abs() + backend.a_tilde(f, C64::new(-xi_max, 0.0))?.norm_sqr().ln().abs();
    if tail > 1e-8 {
        log::warn!("ln|ã|^2 = {tail:.2e} at the quadrature window edge +-{xi_max}");
    }
    Ok(terms.iter().sum::<f64>() / PI)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroLocationReport {
    pub min_re_zeta: Option<f64>,
    pub zeros: Vec<C64>,
    pub mass: f64,
    pub hdot_half_sq: f64,
    /// sqrt(||u||^2 + ||u||_{H^{1/2} dot}^2).
    pub h_half_norm: f64,
}

pub fn zero_location_bound(f: &Field, zeros: &[C64]) -> ZeroLocationReport {
    let mass = f.mass();
    let hdot = f.hdot_half_sq();
    ZeroLocationReport {
        min_re_zeta: zeros.iter().map(|z| z.re).reduce(f64::min),
        zeros: zeros.to_vec(),
        mass,
        hdot_half_sq: hdot,
        h_half_norm: (mass + hdot).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::soliton::{field_at, SolitonParams};

    fn grid() -> Grid {
        Grid::new(40.0, 4096).unwrap()
    }

    fn soliton(e: f64, c: f64) -> Field {
        field_at(&SolitonParams::new(e, c).unwrap(), 0.0, grid()).unwrap()
    }

    fn gaussian(amp: f64) -> Field {
        Field::from_fn(grid(), |x| C64::new(amp * (-x * x).exp(), 0.0)).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((i - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn zero_field_counts_nothing() {
        let f = Field::zero(grid());
        let rc = ray_count(&f, 1.0, &RayConfig::default(), &Backend::default(), Exec::Auto).unwrap();
        assert_eq!(rc.count, 0);
        assert_eq!(rc.raw, C64::new(0.0, 0.0));
        assert!(angle_bound_check(&f, 1.0, &RayConfig::default(), &Backend::default(), Exec::Auto).unwrap());
        let set = locate(&f, Rect::new(-1.0, 1.0, 0.1, 1.0).unwrap(), &LocateConfig::default(), &Backend::default(), Exec::Auto).unwrap();
        assert!(set.zeros.is_empty());
        let mt = mass_trace_identity(&f, &[], 50.0, &Backend::default(), Exec::Auto).unwrap();
        assert_eq!(mt.residual, 0.0);
    }

    #[test]
    fn soliton_ray_counts() {
        let f = soliton(1.0, 0.0);
        let b = Backend::default();
        let rc = ray_count(&f, PI / 4.0, &RayConfig::default(), &b, Exec::Auto).unwrap();
        assert_eq!(rc.count, 1);
        assert!((rc.integral - C64::new(0.5, 0.0)).norm() < 1e-3, "{}", rc.integral);
        let rc = ray_count(&f, 3.0 * PI / 4.0, &RayConfig::default(), &b, Exec::Auto).unwrap();
        assert_eq!(rc.count, 0);
        assert!((rc.integral - C64::new(-0.5, 0.0)).norm() < 1e-3, "{}", rc.integral);
        assert!(angle_bound_check(&f, PI / 4.0, &RayConfig::default(), &b, Exec::Auto).unwrap());
    }

    #[test]
    fn ray_through_zero_is_rejected() {
        let f = soliton(1.0, 0.0);
        assert!(ray_count(&f, PI / 2.0, &RayConfig::default(), &Backend::default(), Exec::Auto).is_err());
    }

    #[test]
    fn locates_soliton_eigenvalues() {
        let b = Backend::default();
        for (c, expect) in [(0.0, C64::new(0.0, 0.5)), (1.0, C64::new(-0.25, 0.5)), (-1.0, C64::new(0.25, 0.5))] {
            let f = soliton(1.0, c);
            let set = locate(&f, default_box(&f), &LocateConfig::default(), &b, Exec::Auto).unwrap();
            assert_eq!(set.zeros.len(), 1, "c={c}: {set:?}");
            assert!(set.clusters.is_empty());
            assert!((set.zeros[0].zeta - expect).norm() < 1e-5, "{:?}", set.zeros[0]);
            assert!(set.zeros[0].residual < 1e-6);
            let rep = zero_location_bound(&f, &set.zetas());
            assert!((rep.min_re_zeta.unwrap() - expect.re).abs() < 1e-5);
        }
    }

    #[test]
    fn small_gaussian_has_no_zeros() {
        let f = gaussian(0.2);
        let set = locate(&f, default_box(&f), &LocateConfig::default(), &Backend::default(), Exec::Auto).unwrap();
        assert!(set.zeros.is_empty() && set.clusters.is_empty());
        let rc = ray_count(&f, PI / 4.0, &RayConfig::default(), &Backend::default(), Exec::Auto).unwrap();
        assert_eq!(rc.count, 0);
    }

    #[test]
    fn mass_trace_for_soliton() {
        let f = soliton(1.0, 0.0);
        let mt = mass_trace_identity(&f, &[C64::new(0.0, 0.5)], 50.0, &Backend::default(), Exec::Auto).unwrap();
        assert!(mt.integral.abs() < 1e-6);
        assert!(mt.residual < 1e-4, "{mt:?}");
    }

    #[test]
    fn mass_trace_for_gaussian() {
        let f = gaussian(0.8);
        let set = locate(&f, default_box(&f), &LocateConfig::default(), &Backend::default(), Exec::Auto).unwrap();
        assert!(set.zeros.is_empty());
        let mt = mass_trace_identity(&f, &[], 50.0, &Backend::default(), Exec::Auto).unwrap();
        assert!(mt.residual < 1e-3, "{mt:?}");
    }

    #[test]
    fn rect_validation() {
        assert!(Rect::new(-1.0, 1.0, 0.0, 1.0).is_err());
        assert!(Rect::new(1.0, -1.0, 0.1, 1.0).is_err());
    }
}
