//! Bright and algebraic solitons u_{E,c} with their closed-form scattering data.

use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    pub energy: f64,
    pub speed: f64,
}

/// How the running phase int_{-inf}^{y} phi^2 is evaluated in [`field_at`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseRule {
    #[default]
    Exact,
    /// Cumulative trapezoid from -L; second order in h.
    Trapezoid,
}

impl SolitonParams {
    pub fn new(energy: f64, speed: f64) -> Result<Self> {
        let p = SolitonParams { energy, speed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (e, c) = (self.energy, self.speed);
        if !e.is_finite() || !c.is_finite() || e < 0.0 {
            return Err(Error::invalid(format!("soliton needs finite E >= 0, got E={e}, c={c}")));
        }
        if e == 0.0 && !(c > 0.0) {
            return Err(Error::invalid("algebraic soliton (E = 0) needs c > 0"));
        }
        Ok(())
    }

    pub fn is_algebraic(&self) -> bool {
        self.energy == 0.0
    }

    pub fn omega(&self) -> f64 {
        self.energy - 0.25 * self.speed * self.speed
    }

    /// zeta_{E,c} = -c/4 + i sqrt(E)/2.
    pub fn eigenvalue(&self) -> C64 {
        C64::new(-0.25 * self.speed, 0.5 * self.energy.sqrt())
    }

    fn s(&self) -> f64 {
        (self.speed * self.speed + 4.0 * self.energy).sqrt()
    }

    /// sqrt((s + c)/(s - c)); the bright-case phase and mass use it.
    fn kappa(&self) -> f64 {
        let s = self.s();
        ((s + self.speed) / (s - self.speed)).sqrt()
    }

    /// 8 arctan sqrt((s + c)/(s - c)); equals 4 pi for the algebraic soliton.
    pub fn mass(&self) -> f64 {
        if self.is_algebraic() {
            4.0 * PI
        } else {
            8.0 * self.kappa().atan()
        }
    }

    /// phi_{E,c}(y).
    pub fn profile(&self, y: f64) -> f64 {
        let (e, c) = (self.energy, self.speed);
        if self.is_algebraic() {
            return 2.0 * c.sqrt() / (1.0 + c * c * y * y).sqrt();
        }
        let s = self.s();
        let arg = 2.0 * e.sqrt() * y.abs();
        // cosh(arg) - c/s, rewritten to keep precision when c/s -> 1 and arg -> 0
        let denom = if arg > 1.0 { arg.cosh() - c / s } else { 2.0 * (0.5 * arg).sinh().powi(2) + (s - c) / s };
        2.0 * (2.0 * e).sqrt() / s.sqrt() / denom.sqrt()
    }

    /// int_{-inf}^{y} phi^2.
    pub fn phase_integral(&self, y: f64) -> f64 {
        if self.is_algebraic() {
            return 4.0 * ((self.speed * y).atan() + 0.5 * PI);
        }
        let k = self.kappa();
        4.0 * ((k * (self.energy.sqrt() * y).tanh()).atan() + k.atan())
    }

    /// Field sample u_{E,c}(t, x).
    pub fn value(&self, t: f64, x: f64) -> C64 {
        let y = x - self.speed * t;
        let theta = self.omega() * t + 0.5 * self.speed * x - 0.75 * self.phase_integral(y);
        C64::from_polar(self.profile(y), theta)
    }

    /// Closed-form a_u(lambda) = e^{-iM/2} (lambda^2 - zeta)/(lambda^2 - conj zeta).
    pub fn exact_a(&self, lambda: C64) -> Result<C64> {
        let phase = C64::from_polar(1.0, -0.5 * self.mass());
        if self.is_algebraic() {
            return Ok(phase);
        }
        let z = lambda * lambda;
        let zs = self.eigenvalue();
        let den = z - zs.conj();
        if den.norm() < 1e-300 {
            return Err(Error::invalid("lambda^2 sits on the pole conj(zeta_{E,c})"));
        }
        Ok(phase * (z - zs) / den)
    }

    /// ã(zeta) = e^{iM/2} a(sqrt zeta) = (zeta - zeta_s)/(zeta - conj zeta_s).
    pub fn exact_a_tilde(&self, zeta: C64) -> C64 {
        if self.is_algebraic() {
            return C64::new(1.0, 0.0);
        }
        let zs = self.eigenvalue();
        (zeta - zs) / (zeta - zs.conj())
    }
}

pub fn profile(p: &SolitonParams, x: f64) -> Result<f64> {
    p.validate()?;
    Ok(p.profile(x))
}

/// u_{E,c}(t, .) on `grid` with the exact phase integral.
pub fn field_at(p: &SolitonParams, t: f64, grid: Grid) -> Result<Field> {
    field_at_with(p, t, grid, PhaseRule::Exact)
}

pub fn field_at_with(p: &SolitonParams, t: f64, grid: Grid, rule: PhaseRule) -> Result<Field> {
    p.validate()?;
    let shift = p.speed * t;
    let l = grid.half_width;
    let room = l - shift.abs();
    let fits = if p.is_algebraic() { shift.abs() <= 0.25 * l } else { room > 0.0 && p.profile(room) <= 1e-8 * p.profile(0.0) };
    if !fits {
        return Err(Error::invalid(format!("soliton centre c t = {shift} leaves the safe window of [-{l}, {l})")));
    }
    match rule {
        PhaseRule::Exact => Field::from_fn(grid, |x| p.value(t, x)),
        PhaseRule::Trapezoid => {
            let h = grid.h();
            let mut cum = 0.0;
            let mut prev = None;
            let mut samples = Vec::with_capacity(grid.n());
            for j in 0..grid.n() {
                let x = grid.x(j);
                let y = x - shift;
                let ph2 = p.profile(y).powi(2);
                if let Some(q) = prev {
                    cum += 0.5 * h * (q + ph2);
                }
                prev = Some(ph2);
                let theta = p.omega() * t + 0.5 * p.speed * x - 0.75 * cum;
                samples.push(C64::from_polar(p.profile(y), theta));
            }
            Field::from_samples(grid, samples)
        }
    }
}

pub fn exact_a(p: &SolitonParams, lambda: C64) -> Result<C64> {
    p.validate()?;
    p.exact_a(lambda)
}
