//! Pseudo-spectral integration of u_t = i u_xx - (|u|^2 u)_x.
//!
//! Integrating-factor RK4 (Lawson form): the linear phase e^{-i p^2 t} is applied
//! exactly in Fourier space, the nonlinear term -i p F(|u|^2 u) is
//! evaluated on the grid with the 2/3 rule.

use crate::error::{Error, Result};
use crate::field::{ConservedSet, Field, Grid};
use crate::jost::{a_ode, JostConfig, SpectralPoint};
use crate::spectral::{fft, ifft, signed_mode};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    IfRk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub dealias: bool,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig { dt: 1e-4, t_end: 0.5, scheme: Scheme::IfRk4, dealias: true }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        Ok(())
    }

    /// Number of steps and the step actually used to land on t_end.
    pub fn steps(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt);
        }
        let n = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

/// Precomputed multipliers for one grid and step size.
pub struct Evolver {
    grid: Grid,
    dt: f64,
    /// e^{-i p^2 dt/2}
    half: Vec<C64>,
    /// -i p, zeroed outside the retained band
    deriv: Vec<C64>,
}

impl Evolver {
    pub fn new(grid: Grid, dt: f64, dealias: bool) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt must be positive"));
        }
        let n = grid.n();
        let cut = n / 3;
        let mut half = Vec::with_capacity(n);
        let mut deriv = Vec::with_capacity(n);
        for k in 0..n {
            let m = signed_mode(k, n);
            let p = grid.wavenumber(k);
            half.push(C64::from_polar(1.0, -p * p * 0.5 * dt));
            let keep = !dealias || m.unsigned_abs() as usize <= cut;
            deriv.push(if keep { C64::new(0.0, -p) } else { C64::new(0.0, 0.0) });
        }
        Ok(Evolver { grid, dt, half, deriv })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// -(|u|^2 u)_x in Fourier space, from a Fourier-space state.
    fn nonlinear(&self, spec: &[C64]) -> Vec<C64> {
        let mut u = spec.to_vec();
        ifft(&mut u);
        for v in u.iter_mut() {
            *v *= v.norm_sqr();
        }
        fft(&mut u);
        for (v, d) in u.iter_mut().zip(&self.deriv) {
            *v *= d;
        }
        u
    }

    /// One Lawson RK4 step on the Fourier coefficients (unnormalized FFT).
    pub fn step_spectrum(&self, u: &mut [C64]) {
        let dt = self.dt;
        let e = &self.half;
        let k1 = self.nonlinear(u);
        let s2: Vec<C64> = (0..u.len()).map(|i| e[i] * (u[i] + 0.5 * dt * k1[i])).collect();
        let k2 = self.nonlinear(&s2);
        let eu: Vec<C64> = (0..u.len()).map(|i| e[i] * u[i]).collect();
        let s3: Vec<C64> = (0..u.len()).map(|i| eu[i] + 0.5 * dt * k2[i]).collect();
        let k3 = self.nonlinear(&s3);
        let s4: Vec<C64> = (0..u.len()).map(|i| e[i] * (eu[i] + dt * k3[i])).collect();
        let k4 = self.nonlinear(&s4);
        for i in 0..u.len() {
            let e2 = e[i] * e[i];
            u[i] = e2 * u[i] + dt / 6.0 * (e2 * k1[i] + 2.0 * e[i] * (k2[i] + k3[i]) + k4[i]);
        }
    }

    pub fn step(&self, f: &Field) -> Result<Field> {
        if f.grid() != &self.grid {
            return Err(Error::invalid("field grid does not match the evolver"));
        }
        let mut s = f.samples().to_vec();
        fft(&mut s);
        self.step_spectrum(&mut s);
        ifft(&mut s);
        Field::from_samples(self.grid, s)
    }
}

/// One step of size cfg.dt.
pub fn step(f: &Field, cfg: &EvolveConfig) -> Result<Field> {
    cfg.validate()?;
    Evolver::new(*f.grid(), cfg.dt, cfg.dealias)?.step(f)
}

/// Advances to cfg.t_end, calling `observer(t, u)` at t = 0, every `every` steps and at the end.
pub fn evolve(f: &Field, cfg: &EvolveConfig, every: usize, observer: &mut dyn FnMut(f64, &Field) -> Result<()>) -> Result<Field> {
    cfg.validate()?;
    let (n, dt) = cfg.steps();
    let ev = Evolver::new(*f.grid(), dt, cfg.dealias)?;
    observer(0.0, f)?;
    let mut s = f.samples().to_vec();
    fft(&mut s);
    let every = every.max(1);
    let mut out = f.clone();
    for k in 1..=n {
        ev.step_spectrum(&mut s);
        if let Some(i) = s.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite { what: "Fourier coefficient during evolution", index: i });
        }
        if k % every == 0 || k == n {
            let mut x = s.clone();
            ifft(&mut x);
            out = Field::from_samples(*f.grid(), x).map_err(|e| match e {
                Error::NonFinite { index, .. } => Error::NonFinite { what: "sample during evolution", index },
                other => other,
            })?;
            observer(k as f64 * dt, &out)?;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub conserved: ConservedSet,
    /// a(lambda) at each probe.
    pub probes: Vec<C64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub probes: Vec<SpectralPoint>,
    pub rows: Vec<SeriesRow>,
}

impl TimeSeries {
    /// max |X(t) - X(0)| for mass, momentum and energy.
    pub fn drifts(&self) -> (f64, f64, f64) {
        let Some(first) = self.rows.first() else {
            return (0.0, 0.0, 0.0);
        };
        let c0 = first.conserved;
        let mut dm: f64 = 0.0;
        let mut dp: f64 = 0.0;
        let mut de: f64 = 0.0;
        for r in &self.rows {
            dm = dm.max((r.conserved.mass - c0.mass).abs());
            dp = dp.max((r.conserved.momentum - c0.momentum).abs());
            de = de.max((r.conserved.energy - c0.energy).abs());
        }
        (dm, dp, de)
    }

    /// Energy drift relative to |E(0)|.
    pub fn energy_relative_drift(&self) -> f64 {
        let e0 = self.rows.first().map_or(0.0, |r| r.conserved.energy.abs());
        self.drifts().2 / e0.max(f64::MIN_POSITIVE)
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["t", "M", "P", "E"].iter().map(|s| s.to_string()).collect();
        for k in 0..self.probes.len() {
            h.push(format!("re_a{k}"));
            h.push(format!("im_a{k}"));
        }
        h
    }
}

/// Evolution with conserved quantities and a(lambda) probes recorded every `every` steps.
pub fn evolve_series(f: &Field, cfg: &EvolveConfig, every: usize, probes: &[SpectralPoint], jost: &JostConfig) -> Result<(Field, TimeSeries)> {
    let mut series = TimeSeries { probes: probes.to_vec(), rows: vec![] };
    let out = evolve(f, cfg, every, &mut |t, u| {
        let a = probes.iter().map(|p| a_ode(u, *p, jost)).collect::<Result<Vec<_>>>()?;
        series.rows.push(SeriesRow { t, conserved: u.conserved(), probes: a });
        Ok(())
    })?;
    Ok((out, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jost::scattering;
    use crate::soliton::{field_at, SolitonParams};
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(40.0, 4096).unwrap()
    }

    fn max_err(a: &Field, b: &Field) -> f64 {
        a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_stays_zero() {
        let z = Field::zero(grid());
        assert!(step(&z, &EvolveConfig::default()).unwrap().is_zero());
    }

    #[test]
    fn config_validation() {
        assert!(EvolveConfig { dt: 0.0, ..Default::default() }.validate().is_err());
        assert!(EvolveConfig { t_end: -1.0, ..Default::default() }.validate().is_err());
        assert_eq!(EvolveConfig { dt: 0.3, t_end: 1.0, ..Default::default() }.steps().0, 4);
        assert_eq!(EvolveConfig { dt: 1e-4, t_end: 0.5, ..Default::default() }.steps().0, 5000);
    }

    #[test]
    fn standing_soliton_matches_exact_solution() {
        let p = SolitonParams::new(1.0, 0.0).unwrap();
        let u0 = field_at(&p, 0.0, grid()).unwrap();
        let cfg = EvolveConfig { dt: 1e-4, t_end: 0.5, ..Default::default() };
        let (u, series) = evolve_series(&u0, &cfg, 500, &[], &JostConfig::default()).unwrap();
        let err = max_err(&u, &field_at(&p, 0.5, grid()).unwrap());
        assert!(err < 1e-6, "{err}");
        // E = 0 for a standing soliton, so the drift is absolute here.
        let (dm, _, de) = series.drifts();
        assert!(dm < 1e-8 && de < 1e-6, "{dm} {de}");
    }

    #[test]
    fn fourth_order_in_dt() {
        let p = SolitonParams::new(1.0, 0.0).unwrap();
        let u0 = field_at(&p, 0.0, grid()).unwrap();
        let exact = field_at(&p, 0.2, grid()).unwrap();
        let run = |dt: f64| {
            let cfg = EvolveConfig { dt, t_end: 0.2, ..Default::default() };
            max_err(&evolve(&u0, &cfg, usize::MAX, &mut |_, _| Ok(())).unwrap(), &exact)
        };
        let ratio = run(1e-3) / run(5e-4);
        assert!((12.0..=20.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn moving_soliton_centre() {
        let p = SolitonParams::new(1.0, 1.0).unwrap();
        let u0 = field_at(&p, 0.0, grid()).unwrap();
        let cfg = EvolveConfig { dt: 1e-4, t_end: 0.5, ..Default::default() };
        let u = evolve(&u0, &cfg, usize::MAX, &mut |_, _| Ok(())).unwrap();
        let g = grid();
        let j = (0..g.n()).max_by(|&a, &b| u.samples()[a].norm().total_cmp(&u.samples()[b].norm())).unwrap();
        assert!((g.x(j) - 0.5).abs() <= g.h(), "{}", g.x(j));
    }

    #[test]
    fn scattering_data_under_the_flow() {
        let u0 = Field::from_fn(grid(), |x| C64::new(0.5 * (-x * x).exp(), 0.0)).unwrap();
        let star = SpectralPoint::from_lambda(C64::from_polar(1.0, PI / 4.0)).unwrap();
        let cfg = EvolveConfig { dt: 1e-4, t_end: 0.5, ..Default::default() };
        let jc = JostConfig::default();
        let (u, series) = evolve_series(&u0, &cfg, 1000, &[star], &jc).unwrap();
        let a0 = series.rows[0].probes[0];
        for r in &series.rows {
            assert!((r.probes[0] - a0).norm() < 1e-5, "t={} {}", r.t, (r.probes[0] - a0).norm());
        }
        let (dm, _, _) = series.drifts();
        let de = series.energy_relative_drift();
        assert!(dm < 1e-8 && de < 1e-6, "{dm} {de}");
        // The Lax pair fixes b(t) = e^{+4i lambda^4 t} b(0) with psi_1^- = a psi_1^+ + b psi_2^+.
        for l in [0.5, 1.0] {
            let lp = SpectralPoint::from_lambda(C64::new(l, 0.0)).unwrap();
            let b0 = scattering(&u0, lp, &jc).unwrap().b.unwrap();
            let b1 = scattering(&u, lp, &jc).unwrap().b.unwrap();
            let expect = b0 * C64::from_polar(1.0, 4.0 * l.powi(4) * 0.5);
            assert!((b1 - expect).norm() < 1e-4 * b0.norm(), "lambda={l}: {b1} vs {expect}");
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let u0 = Field::from_fn(Grid::new(10.0, 256).unwrap(), |x| C64::new(50.0 * (-x * x).exp(), 0.0)).unwrap();
        let cfg = EvolveConfig { dt: 0.05, t_end: 5.0, ..Default::default() };
        let r = evolve(&u0, &cfg, 1, &mut |_, _| Ok(()));
        assert!(matches!(r, Err(Error::NonFinite { .. })), "{r:?}");
    }
}
