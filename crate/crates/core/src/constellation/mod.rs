//! Phase-keyed Fourier-curve codebooks, the flat spherical baseline and
//! fixed-point LUT quantization.
//!
//! Symbol indices are 0-based here; symbol `i` sits at curve parameter
//! `theta_i = 2*pi*i/M`.

mod lut_io;

pub use lut_io::{read_lut_binary, read_lut_csv, write_lut_binary, write_lut_csv};

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Wraps an angle to `[0, 2*pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps an angle difference to `[-pi, pi]`.
pub fn wrap_signed(a: f64) -> f64 {
    let w = wrap_angle(a);
    if w > std::f64::consts::PI {
        w - TAU
    } else {
        w
    }
}

/// Per-harmonic phase offsets shared by transmitter and legitimate receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseKey(Vec<f64>);

impl PhaseKey {
    /// Builds a key, wrapping every phase to `[0, 2*pi)`.
    pub fn new(phases: Vec<f64>) -> Self {
        PhaseKey(phases.into_iter().map(wrap_angle).collect())
    }

    /// Uniform key on the k-torus.
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        PhaseKey((0..k).map(|_| rng.random::<f64>() * TAU).map(wrap_angle).collect())
    }

    pub fn zeros(k: usize) -> Self {
        PhaseKey(vec![0.0; k])
    }

    pub fn phases(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Joint key shift `phi_m -> phi_m - 2*pi*m/M`, which relabels symbol `i`
/// of the codebook as symbol `i + 1` (cyclically).
pub fn shift_key(key: &PhaseKey, m: usize) -> PhaseKey {
    PhaseKey::new(key.0.iter().enumerate().map(|(h, &p)| p - TAU * (h + 1) as f64 / m as f64).collect())
}

/// Norm of the curve derivative `dx/dtheta`, `sqrt((k+1)(2k+1)/6)`.
pub fn curve_speed(k: usize) -> f64 {
    let k = k as f64;
    ((k + 1.0) * (2.0 * k + 1.0) / 6.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CodebookKind {
    /// Phase-keyed Fourier curve with closed-form unit tangents.
    Fourier,
    /// Random points on the sphere; tangents are stored as zeros.
    Flat,
}

/// The shared lookup table: `M` scaled means and `M` unit tangents in
/// `R^{2k}`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    k: usize,
    m: usize,
    beta: f64,
    kind: CodebookKind,
    bits: Option<u32>,
    means: Vec<f64>,
    tangents: Vec<f64>,
    // per-row caches used by the demapper
    mean_sq: Vec<f64>,
    mean_dot_tangent: Vec<f64>,
    tangent_sq: Vec<f64>,
}

impl Codebook {
    pub(crate) fn from_parts(
        k: usize,
        m: usize,
        beta: f64,
        kind: CodebookKind,
        bits: Option<u32>,
        means: Vec<f64>,
        tangents: Vec<f64>,
    ) -> Result<Self> {
        let dim = 2 * k;
        for v in [&means, &tangents] {
            if v.len() != m * dim {
                return Err(Error::Dimension { expected: m * dim, actual: v.len() });
            }
        }
        let mut cb = Codebook {
            k,
            m,
            beta,
            kind,
            bits,
            means,
            tangents,
            mean_sq: Vec::new(),
            mean_dot_tangent: Vec::new(),
            tangent_sq: Vec::new(),
        };
        cb.refresh_caches();
        Ok(cb)
    }

    fn refresh_caches(&mut self) {
        let (mut msq, mut mdt, mut tsq) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..self.m {
            let (x, t) = (self.mean(i), self.tangent(i));
            msq.push(dot(x, x));
            mdt.push(dot(x, t));
            tsq.push(dot(t, t));
        }
        self.mean_sq = msq;
        self.mean_dot_tangent = mdt;
        self.tangent_sq = tsq;
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Codebook size `M`.
    pub fn size(&self) -> usize {
        self.m
    }

    /// Real ambient dimension `2k`.
    pub fn dim(&self) -> usize {
        2 * self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kind(&self) -> CodebookKind {
        self.kind
    }

    /// Bit width of the LUT entries, `None` when unquantized.
    pub fn bits(&self) -> Option<u32> {
        self.bits
    }

    /// Scaled mean `sqrt(1-beta) * x_i`.
    pub fn mean(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.means[i * d..(i + 1) * d]
    }

    pub fn tangent(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.tangents[i * d..(i + 1) * d]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn tangents(&self) -> &[f64] {
        &self.tangents
    }

    pub fn mean_norm_sq(&self, i: usize) -> f64 {
        self.mean_sq[i]
    }

    pub fn mean_dot_tangent(&self, i: usize) -> f64 {
        self.mean_dot_tangent[i]
    }

    pub fn tangent_norm_sq(&self, i: usize) -> f64 {
        self.tangent_sq[i]
    }

    /// Bits per symbol, `log2 M`, when `M` is a power of two.
    pub fn bits_per_symbol(&self) -> Option<usize> {
        self.m.is_power_of_two().then(|| self.m.trailing_zeros() as usize)
    }

    /// Number of stored LUT values (means and tangents), `2M * 2k`.
    pub fn lut_values(&self) -> usize {
        2 * self.m * self.dim()
    }

    /// LUT footprint in bytes at the given entry width (ideal bit packing).
    pub fn lut_bytes(&self, bits: u32) -> usize {
        (self.lut_values() * bits as usize).div_ceil(8)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_common(k: usize, m: usize, beta: f64) -> Result<()> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if m < 2 {
        return Err(Error::InvalidParameter("M must be at least 2".into()));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta = {beta} outside [0, 1)")));
    }
    Ok(())
}

/// Builds the Fourier-curve LUT for key `key`, with means pre-scaled by
/// `sqrt(1 - beta)`.
pub fn build_codebook(k: usize, m: usize, key: &PhaseKey, beta: f64) -> Result<Codebook> {
    check_common(k, m, beta)?;
    if key.len() != k {
        return Err(Error::Dimension { expected: k, actual: key.len() });
    }
    if k >= m {
        log::warn!("k = {k} >= M = {m}: outside the k < M regime the design targets");
    }
    let dim = 2 * k;
    let amp = (1.0 - beta).sqrt() / (k as f64).sqrt();
    let tnorm = 1.0 / ((k as f64).sqrt() * curve_speed(k));
    let mut means = Vec::with_capacity(m * dim);
    let mut tangents = Vec::with_capacity(m * dim);
    for i in 0..m {
        let theta = TAU * i as f64 / m as f64;
        for (h, &phi) in key.phases().iter().enumerate() {
            let harmonic = (h + 1) as f64;
            let (s, c) = (harmonic * theta + phi).sin_cos();
            means.extend_from_slice(&[amp * c, amp * s]);
            tangents.extend_from_slice(&[-harmonic * tnorm * s, harmonic * tnorm * c]);
        }
    }
    Codebook::from_parts(k, m, beta, CodebookKind::Fourier, None, means, tangents)
}

/// Flat baseline: `M` i.i.d. uniform points on the unit sphere in `R^{2k}`,
/// scaled by `sqrt(1 - beta)`. Deterministic in `seed`.
pub fn build_flat_codebook(k: usize, m: usize, beta: f64, seed: u64) -> Result<Codebook> {
    check_common(k, m, beta)?;
    let dim = 2 * k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (1.0 - beta).sqrt();
    let mut means = Vec::with_capacity(m * dim);
    for _ in 0..m {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = dot(&v, &v).sqrt();
        means.extend(v.iter().map(|x| scale * x / n));
    }
    Codebook::from_parts(k, m, beta, CodebookKind::Flat, None, means, vec![0.0; m * dim])
}

/// Uniform symmetric mid-tread fixed-point format clipped at +-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizationSpec {
    bits: u32,
}

impl QuantizationSpec {
    pub fn new(bits: u32) -> Result<Self> {
        if !(2..=52).contains(&bits) {
            return Err(Error::InvalidParameter(format!("quantizer bits = {bits} outside [2, 52]")));
        }
        Ok(QuantizationSpec { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Grid step `2 / 2^bits`.
    pub fn step(&self) -> f64 {
        2.0 / (1u64 << self.bits) as f64
    }

    /// Nearest of the `2^bits` two's-complement levels `j * step`,
    /// `j in [-2^(bits-1), 2^(bits-1) - 1]`.
    pub fn quantize(&self, x: f64) -> f64 {
        let half = (1u64 << (self.bits - 1)) as f64;
        let step = self.step();
        (x / step).round().clamp(-half, half - 1.0) * step
    }
}

/// Quantizes both the means and the tangents of the LUT. Tangents are not
/// renormalized afterwards.
pub fn quantize_codebook(cb: &Codebook, q: QuantizationSpec) -> Codebook {
    let mut out = cb.clone();
    out.means.iter_mut().for_each(|v| *v = q.quantize(*v));
    out.tangents.iter_mut().for_each(|v| *v = q.quantize(*v));
    out.bits = Some(q.bits());
    out.refresh_caches();
    out
}
