//! Sampled potentials on the truncated line [-L, L).
//!
//! Index maps:
//! * samples: natural order, `samples[j] = u(x_j)`, `x_j = -L + j h`, `h = 2L/N`.
//! * spectrum: wrap-around order, slot `k` holds mode `p = pi m / L` with
//!   `m = k` for `k < N/2` and `m = k - N` otherwise. The value is
//!   `h / sqrt(2 pi) * (-1)^m * DFT(u)_k`, the grid version of
//!   `(2 pi)^{-1/2} int e^{-i p x} u(x) dx`.

use crate::error::{Error, Result};
use crate::spectral::{fft, ifft, refine, signed_mode};
use base64::Engine;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub half_width: f64,
    pub num_points: usize,
}

impl Grid {
    pub fn new(half_width: f64, num_points: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid(format!("half width must be positive, got {half_width}")));
        }
        if num_points < 8 || !num_points.is_power_of_two() {
            return Err(Error::invalid(format!("number of points must be a power of two >= 8, got {num_points}")));
        }
        Ok(Grid { half_width, num_points })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.num_points
    }

    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.num_points as f64
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.h()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.num_points).map(|j| self.x(j)).collect()
    }

    /// Wavenumber of wrap-around slot `k`.
    #[inline]
    pub fn wavenumber(&self, k: usize) -> f64 {
        PI * signed_mode(k, self.num_points) as f64 / self.half_width
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.num_points).map(|k| self.wavenumber(k)).collect()
    }

    /// Spacing of the Fourier variable, pi / L.
    #[inline]
    pub fn dp(&self) -> f64 {
        PI / self.half_width
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservedSet {
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GnKind {
    /// |f|_6^6 / (|f|_2^4 |f_x|_2^2), sharp constant 4/pi^2.
    Quintic,
    /// |f|_6 / (|f|_4^{8/9} |f_x|_2^{1/9}), sharp constant 3^{1/6} (2 pi)^{-1/9}.
    Quartic,
}

pub const GN_QUINTIC_SHARP: f64 = 4.0 / (PI * PI);

pub fn gn_quartic_sharp() -> f64 {
    3f64.powf(1.0 / 6.0) * (2.0 * PI).powf(-1.0 / 9.0)
}

/// Fine-grid oversampling used by the Jost integrators.
pub(crate) const FINE_FACTOR: usize = 64;

#[derive(Debug)]
pub struct Field {
    grid: Grid,
    samples: Vec<C64>,
    spectrum: Vec<C64>,
    fine: OnceLock<Vec<C64>>,
}

impl Clone for Field {
    fn clone(&self) -> Self {
        Field { grid: self.grid, samples: self.samples.clone(), spectrum: self.spectrum.clone(), fine: OnceLock::new() }
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.samples == other.samples
    }
}

impl Field {
    pub fn from_samples(grid: Grid, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != grid.n() {
            return Err(Error::invalid(format!("expected {} samples, got {}", grid.n(), samples.len())));
        }
        if let Some(index) = samples.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { what: "sample", index });
        }
        let spectrum = forward_spectrum(&grid, &samples);
        Ok(Field { grid, samples, spectrum, fine: OnceLock::new() })
    }

    /// Samples `generator` at the grid points.
    pub fn from_fn(grid: Grid, generator: impl Fn(f64) -> C64) -> Result<Self> {
        let samples = (0..grid.n()).map(|j| generator(grid.x(j))).collect();
        Self::from_samples(grid, samples)
    }

    pub fn zero(grid: Grid) -> Self {
        Self::from_samples(grid, vec![C64::new(0.0, 0.0); grid.n()]).expect("zero field")
    }

    /// Rebuilds samples from a wrap-around spectrum in the field's convention.
    pub fn from_spectrum(grid: Grid, spectrum: &[C64]) -> Result<Self> {
        let samples = inverse_spectrum(&grid, spectrum);
        Self::from_samples(grid, samples)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn spectrum(&self) -> &[C64] {
        &self.spectrum
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Trigonometric interpolant on the grid refined by FINE_FACTOR, built once.
    pub(crate) fn fine(&self) -> &[C64] {
        self.fine.get_or_init(|| refine(&self.samples, FINE_FACTOR))
    }

    /// Trapezoid integral of a real density sampled on the grid.
    pub fn integrate(&self, density: impl Iterator<Item = f64>) -> f64 {
        self.grid.h() * density.sum::<f64>()
    }

    /// int |u|^2.
    pub fn mass(&self) -> f64 {
        self.integrate(self.samples.iter().map(|v| v.norm_sqr()))
    }

    /// (int |u|^p)^(1/p).
    pub fn lp_norm(&self, p: f64) -> f64 {
        self.integrate(self.samples.iter().map(|v| v.norm().powf(p))).powf(1.0 / p)
    }

    /// Spectral derivative u_x; the Nyquist mode is dropped.
    pub fn derivative(&self) -> Vec<C64> {
        spectral_derivative(&self.grid, &self.samples)
    }

    /// int |p| |u^(p)|^2 dp by quadrature on the Fourier grid.
    pub fn hdot_half_sq(&self) -> f64 {
        let dp = self.grid.dp();
        (0..self.grid.n()).map(|k| self.grid.wavenumber(k).abs() * self.spectrum[k].norm_sqr()).sum::<f64>() * dp
    }

    pub fn conserved(&self) -> ConservedSet {
        let ux = self.derivative();
        let mut mass = 0.0;
        let mut mom = 0.0;
        let mut energy = 0.0;
        for (u, d) in self.samples.iter().zip(&ux) {
            let r = u.norm_sqr();
            mass += r;
            mom += (u.conj() * d).im + 0.5 * r * r;
            energy += d.norm_sqr() - 1.5 * (r * u * d.conj()).im + 0.5 * r * r * r;
        }
        let h = self.grid.h();
        ConservedSet { mass: h * mass, momentum: h * mom, energy: h * energy }
    }

    pub fn gn_ratio(&self, which: GnKind) -> Result<f64> {
        let m2 = self.mass();
        if m2 == 0.0 {
            return Err(Error::invalid("Gagliardo-Nirenberg ratio of the zero field"));
        }
        let ux = self.derivative();
        let dx2 = self.integrate(ux.iter().map(|v| v.norm_sqr()));
        let l6 = self.integrate(self.samples.iter().map(|v| v.norm_sqr().powi(3)));
        match which {
            GnKind::Quintic => Ok(l6 / (m2 * m2 * dx2)),
            GnKind::Quartic => {
                let l4 = self.integrate(self.samples.iter().map(|v| v.norm_sqr().powi(2)));
                Ok(l6.powf(1.0 / 6.0) / (l4.powf(2.0 / 9.0) * dx2.powf(1.0 / 18.0)))
            }
        }
    }

    /// u_mu(x) = sqrt(mu) u(mu x) on the grid of half-width L/mu with the same N.
    /// The new nodes are exactly the old ones scaled by 1/mu, so no interpolation is involved.
    pub fn rescale(&self, mu: f64) -> Result<Field> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::invalid(format!("scaling factor must be positive, got {mu}")));
        }
        let grid = Grid::new(self.grid.half_width / mu, self.grid.n())?;
        let s = mu.sqrt();
        Field::from_samples(grid, self.samples.iter().map(|v| v * s).collect())
    }

    /// Pointwise sum of two fields on the same grid.
    pub fn add(&self, other: &Field) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::invalid("fields live on different grids"));
        }
        Field::from_samples(self.grid, self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect())
    }

    pub fn snapshot(&self, time_tag: f64) -> Snapshot {
        Snapshot::from_field(self, time_tag, SampleEncoding::Base64)
    }
}

pub(crate) fn forward_spectrum(grid: &Grid, samples: &[C64]) -> Vec<C64> {
    let n = grid.n();
    let mut spec = samples.to_vec();
    fft(&mut spec);
    let s = grid.h() / (2.0 * PI).sqrt();
    for (k, v) in spec.iter_mut().enumerate() {
        *v *= if k % 2 == 0 { s } else { -s };
    }
    debug_assert_eq!(spec.len(), n);
    spec
}

pub(crate) fn inverse_spectrum(grid: &Grid, spectrum: &[C64]) -> Vec<C64> {
    let s = (2.0 * PI).sqrt() / grid.h();
    let mut out: Vec<C64> = spectrum.iter().enumerate().map(|(k, v)| if k % 2 == 0 { v * s } else { -v * s }).collect();
    ifft(&mut out);
    out
}

pub(crate) fn spectral_derivative(grid: &Grid, values: &[C64]) -> Vec<C64> {
    let n = grid.n();
    let mut spec = values.to_vec();
    fft(&mut spec);
    for (k, v) in spec.iter_mut().enumerate() {
        *v = if k == n / 2 { C64::new(0.0, 0.0) } else { *v * C64::new(0.0, grid.wavenumber(k)) };
    }
    ifft(&mut spec);
    spec
}

/// Snapshot file layout (JSON):
///
/// ```text
/// { "version": 1, "L": <f64>, "N": <usize>, "time_tag": <f64>,
///   "encoding": "base64" | "plain",
///   "samples": <string> | [re0, im0, re1, im1, ...] }
/// ```
///
/// For `base64` the string is the standard-alphabet encoding of the
/// interleaved (re, im) pairs as little-endian IEEE-754 doubles, which makes
/// save/load bit-exact. `plain` stores the same interleaved numbers as a JSON
/// array (serde_json prints shortest round-trip decimals).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub num_points: usize,
    pub time_tag: f64,
    pub encoding: SampleEncoding,
    pub samples: SamplePayload,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleEncoding {
    Base64,
    Plain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SamplePayload {
    Base64(String),
    Plain(Vec<f64>),
}

pub const SNAPSHOT_VERSION: u32 = 1;

impl Snapshot {
    pub fn from_field(field: &Field, time_tag: f64, encoding: SampleEncoding) -> Self {
        let samples = match encoding {
            SampleEncoding::Base64 => {
                let mut bytes = Vec::with_capacity(16 * field.samples.len());
                for v in &field.samples {
                    bytes.extend_from_slice(&v.re.to_le_bytes());
                    bytes.extend_from_slice(&v.im.to_le_bytes());
                }
                SamplePayload::Base64(base64::engine::general_purpose::STANDARD.encode(bytes))
            }
            SampleEncoding::Plain => SamplePayload::Plain(field.samples.iter().flat_map(|v| [v.re, v.im]).collect()),
        };
        Snapshot { version: SNAPSHOT_VERSION, half_width: field.grid.half_width, num_points: field.grid.num_points, time_tag, encoding, samples }
    }

    pub fn to_field(&self) -> Result<Field> {
        if self.version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {}", self.version)));
        }
        let grid = Grid::new(self.half_width, self.num_points)?;
        let flat: Vec<f64> = match (&self.encoding, &self.samples) {
            (SampleEncoding::Base64, SamplePayload::Base64(s)) => {
                let bytes = base64::engine::general_purpose::STANDARD.decode(s).map_err(|e| Error::Format(format!("bad base64 payload: {e}")))?;
                if bytes.len() % 8 != 0 {
                    return Err(Error::Format("payload length is not a multiple of 8".into()));
                }
                bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect()
            }
            (SampleEncoding::Plain, SamplePayload::Plain(v)) => v.clone(),
            _ => return Err(Error::Format("encoding tag does not match payload".into())),
        };
        if flat.len() != 2 * grid.n() {
            return Err(Error::Format(format!("expected {} numbers, found {}", 2 * grid.n(), flat.len())));
        }
        let samples = flat.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
        Field::from_samples(grid, samples)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
    }
}
