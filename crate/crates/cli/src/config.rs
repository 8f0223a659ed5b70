//! Run configuration: one JSON document, every field optional, flags override it.

use crate::CliError;
use dnls_core::fredholm::FitConfig;
use dnls_core::spectrum::{LocateConfig, RayConfig};
use dnls_core::{Field, Grid, JostConfig, SolitonParams};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const OUT_DIR_ENV: &str = "DNLS_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Fixture {
    Soliton {
        #[serde(default = "one")]
        energy: f64,
        #[serde(default)]
        speed: f64,
        #[serde(default)]
        time: f64,
    },
    Gaussian {
        amp: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// A snapshot written by `evolve` or `backlund`; its own grid wins.
    File {
        path: PathBuf,
    },
    Sum {
        parts: Vec<Fixture>,
    },
    Zero,
}

fn one() -> f64 {
    1.0
}

impl Default for Fixture {
    fn default() -> Self {
        Fixture::Gaussian { amp: 0.5, width: 1.0, center: 0.0 }
    }
}

impl Fixture {
    pub fn build(&self, grid: Grid) -> Result<Field, CliError> {
        Ok(match self {
            Fixture::Soliton { energy, speed, time } => dnls_core::soliton::field_at(&SolitonParams::new(*energy, *speed)?, *time, grid)?,
            Fixture::Gaussian { amp, width, center } => {
                if !(*width > 0.0) {
                    return Err(CliError::Config(format!("gaussian width must be positive, got {width}")));
                }
                Field::from_fn(grid, |x| C64::new(amp * (-((x - center) / width).powi(2)).exp(), 0.0))?
            }
            Fixture::File { path } => dnls_core::Snapshot::load(path)?.to_field()?,
            Fixture::Sum { parts } => {
                let Some((first, rest)) = parts.split_first() else {
                    return Err(CliError::Config("sum fixture needs at least one part".into()));
                };
                let mut f = first.build(grid)?;
                for p in rest {
                    f = f.add(&p.build(grid)?)?;
                }
                f
            }
            Fixture::Zero => Field::zero(grid),
        })
    }
}

/// `soliton:E,c`, `gaussian:amp[,width[,center]]`, `file:PATH` or `zero`.
impl FromStr for Fixture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<f64>, String> {
            if args.is_empty() {
                return Ok(vec![]);
            }
            args.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad number {v:?} in fixture: {e}"))).collect()
        };
        match kind {
            "zero" => Ok(Fixture::Zero),
            "file" if !args.is_empty() => Ok(Fixture::File { path: args.into() }),
            "soliton" => match nums()?.as_slice() {
                [] => Ok(Fixture::Soliton { energy: 1.0, speed: 0.0, time: 0.0 }),
                [e, c] => Ok(Fixture::Soliton { energy: *e, speed: *c, time: 0.0 }),
                _ => Err("soliton fixture takes E,c".into()),
            },
            "gaussian" => match nums()?.as_slice() {
                [a] => Ok(Fixture::Gaussian { amp: *a, width: 1.0, center: 0.0 }),
                [a, w] => Ok(Fixture::Gaussian { amp: *a, width: *w, center: 0.0 }),
                [a, w, x0] => Ok(Fixture::Gaussian { amp: *a, width: *w, center: *x0 }),
                _ => Err("gaussian fixture takes amp[,width[,center]]".into()),
            },
            _ => Err(format!("unknown fixture {s:?}; expected soliton:E,c | gaussian:amp[,w[,x0]] | file:PATH | zero")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub num_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { half_width: 40.0, num_points: 4096 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterSpec {
    /// Explicit [re, im] lambda values; when empty, `real_count` points on [real_min, real_max].
    pub lambdas: Vec<[f64; 2]>,
    pub real_min: f64,
    pub real_max: f64,
    pub real_count: usize,
    pub jost: JostConfig,
}

impl Default for ScatterSpec {
    fn default() -> Self {
        ScatterSpec { lambdas: vec![], real_min: 0.1, real_max: 2.0, real_count: 20, jost: JostConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetscanSpec {
    /// arg zeta of the ray.
    pub theta: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub nodes: usize,
    pub n_modes: usize,
    pub fit: FitConfig,
}

impl Default for DetscanSpec {
    fn default() -> Self {
        DetscanSpec { theta: std::f64::consts::FRAC_PI_2, rho_min: 0.25, rho_max: 4.0, nodes: 9, n_modes: 1024, fit: FitConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSpec {
    /// [re_min, re_max, im_min, im_max] in the zeta plane; automatic when absent.
    #[serde(rename = "box")]
    pub rect: Option<[f64; 4]>,
    /// arg zeta of the counting rays.
    pub rays: Vec<f64>,
    pub locate: LocateConfig,
    pub ray: RayConfig,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        use std::f64::consts::PI;
        SpectrumSpec { rect: None, rays: vec![PI / 4.0, 3.0 * PI / 4.0], locate: LocateConfig::default(), ray: RayConfig::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacklundSpec {
    /// Zero to remove; the located zero of largest imaginary part when absent.
    pub zeta1: Option<[f64; 2]>,
    pub b_probes: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSpec {
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    /// Steps between time-series rows.
    pub every: usize,
    /// a(lambda) probes, [re, im].
    pub probes: Vec<[f64; 2]>,
    /// Field snapshots written at evenly spaced rows, including both ends.
    pub snapshots: usize,
}

impl Default for EvolveSpec {
    fn default() -> Self {
        EvolveSpec {
            dt: 1e-4,
            t_end: 0.5,
            dealias: true,
            every: 500,
            probes: vec![[std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2]],
            snapshots: 2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// Criterion ids to run; all when empty.
    pub only: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fixture: Fixture,
    pub grid: GridSpec,
    pub output_dir: Option<PathBuf>,
    pub sequential: bool,
    pub scatter: ScatterSpec,
    pub detscan: DetscanSpec,
    pub spectrum: SpectrumSpec,
    pub backlund: BacklundSpec,
    pub evolve: EvolveSpec,
    pub verify: VerifySpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(self.grid.half_width, self.grid.num_points)?)
    }

    pub fn field(&self) -> Result<Field, CliError> {
        self.fixture.build(self.grid()?)
    }

    pub fn exec(&self) -> dnls_core::Exec {
        if self.sequential {
            dnls_core::Exec::Sequential
        } else {
            dnls_core::Exec::Auto
        }
    }

    /// Flag, then environment, then config, then `dnls-out`.
    pub fn resolve_output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
            return p.into();
        }
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("dnls-out"))
    }
}

/// `re,im` or a bare real number.
pub fn parse_complex(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad number {v:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok([num(re)?, 0.0]),
        [re, im] => Ok([num(re)?, num(im)?]),
        _ => Err(format!("expected re,im but got {s:?}")),
    }
}
