//! Error-rate statistics and information-rate estimates.

use std::f64::consts::{LN_2, TAU};

use statrs::function::beta::inv_beta_reg;

use crate::constellation::{wrap_signed, PhaseKey};
use crate::{Error, Result};

/// Exact binomial confidence interval on an error probability.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CpInterval {
    pub errors: u64,
    pub trials: u64,
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
}

impl CpInterval {
    pub fn estimate(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }

    pub fn overlaps(&self, other: &CpInterval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

fn check_counts(errors: u64, trials: u64, level: f64) -> Result<()> {
    if trials == 0 || errors > trials {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= errors <= trials, trials >= 1 (got {errors}/{trials})"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence level {level} outside (0, 1)")));
    }
    Ok(())
}

/// Clopper-Pearson interval at confidence `level`. Two-sided (tail mass
/// `(1-level)/2` each side) in the interior; at `errors = 0` or
/// `errors = trials` the open side is pinned and the other bound is the
/// one-sided bound at the full `level`.
pub fn clopper_pearson(errors: u64, trials: u64, level: f64) -> Result<CpInterval> {
    check_counts(errors, trials, level)?;
    let (x, n) = (errors as f64, trials as f64);
    let alpha = 1.0 - level;
    let (lo, hi) = if errors == 0 {
        (0.0, 1.0 - alpha.powf(1.0 / n))
    } else if errors == trials {
        (alpha.powf(1.0 / n), 1.0)
    } else {
        (inv_beta_reg(x, n - x + 1.0, alpha / 2.0), inv_beta_reg(x + 1.0, n - x, 1.0 - alpha / 2.0))
    };
    Ok(CpInterval { errors, trials, level, lo, hi })
}

/// One-sided Clopper-Pearson upper bound at confidence `level`.
pub fn cp_upper_one_sided(errors: u64, trials: u64, level: f64) -> Result<f64> {
    check_counts(errors, trials, level)?;
    let (x, n) = (errors as f64, trials as f64);
    Ok(if errors == trials {
        1.0
    } else if errors == 0 {
        1.0 - (1.0 - level).powf(1.0 / n)
    } else {
        inv_beta_reg(x + 1.0, n - x, level)
    })
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Transmitted label bits and their demapper LLRs, symbol by symbol.
#[derive(Debug, Clone, Default)]
pub struct AirSample {
    bits_per_symbol: usize,
    bits: Vec<u8>,
    llrs: Vec<f64>,
}

impl AirSample {
    pub fn new(bits_per_symbol: usize) -> Self {
        AirSample { bits_per_symbol, ..Default::default() }
    }

    pub fn push_symbol(&mut self, bits: &[u8], llrs: &[f64]) {
        debug_assert_eq!(bits.len(), self.bits_per_symbol);
        debug_assert_eq!(llrs.len(), self.bits_per_symbol);
        self.bits.extend_from_slice(bits);
        self.llrs.extend_from_slice(llrs);
    }

    pub fn extend(&mut self, other: &AirSample) {
        self.bits.extend_from_slice(&other.bits);
        self.llrs.extend_from_slice(&other.llrs);
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn len_bits(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn llrs(&self) -> &[f64] {
        &self.llrs
    }

    pub fn scaled(&self, c: f64) -> AirSample {
        AirSample {
            bits_per_symbol: self.bits_per_symbol,
            bits: self.bits.clone(),
            llrs: self.llrs.iter().map(|l| c * l).collect(),
        }
    }
}

/// Sample-mean BICM achievable rate in bits per symbol:
/// `B - sum_j E[log2(1 + exp(-b~ s lambda))]`, `b~ = +1` for a true 0.
pub fn bicm_air(samples: &AirSample, s: f64) -> f64 {
    let b = samples.bits_per_symbol;
    if samples.is_empty() || b == 0 {
        return 0.0;
    }
    let mut loss = vec![0.0; b];
    let mut count = vec![0usize; b];
    for (idx, (&bit, &l)) in samples.bits.iter().zip(&samples.llrs).enumerate() {
        let sign = if bit == 0 { 1.0 } else { -1.0 };
        loss[idx % b] += softplus(-sign * s * l);
        count[idx % b] += 1;
    }
    let penalty: f64 = loss.iter().zip(&count).map(|(l, &c)| l / c as f64).sum::<f64>() / LN_2;
    b as f64 - penalty
}

/// LLR scaling search bracket.
pub const S_BRACKET: (f64, f64) = (1e-2, 1e2);

/// Golden-section search for `s` maximising [`bicm_air`] over
/// [`S_BRACKET`] in the log domain, down to a bracket width of `1e-4` in
/// `s`. Returns `(s_star, I(s_star))`; `s = 1` is kept when it is better.
pub fn optimize_s(samples: &AirSample) -> (f64, f64) {
    let f = |u: f64| bicm_air(samples, u.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (S_BRACKET.0.ln(), S_BRACKET.1.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b.exp() - a.exp() > 1e-4 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let s = (0.5 * (a + b)).exp();
    let i = bicm_air(samples, s);
    let i1 = bicm_air(samples, 1.0);
    if i1 > i {
        (1.0, i1)
    } else {
        (s, i)
    }
}

/// Log2 of the attack grid size on the k-torus at resolution `delta`:
/// `k log2(2 pi / delta)`.
pub fn grid_entropy(k: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= TAU) {
        return Err(Error::InvalidParameter(format!("grid resolution {delta} outside (0, 2pi]")));
    }
    Ok(k as f64 * (TAU / delta).log2())
}

/// Euclidean norm of the coordinate-wise wrapped phase differences.
pub fn torus_distance(a: &PhaseKey, b: &PhaseKey) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), actual: b.len() });
    }
    Ok(a.phases().iter().zip(b.phases()).map(|(x, y)| wrap_signed(x - y).powi(2)).sum::<f64>().sqrt())
}

/// First `x` where a decreasing error-rate curve crosses `target`,
/// interpolated linearly in `log10(rate)`. `None` if it never crosses.
pub fn interpolate_crossing(xs: &[f64], rates: &[f64], target: f64) -> Option<f64> {
    let lt = target.log10();
    for w in 0..xs.len().saturating_sub(1) {
        let (r0, r1) = (rates[w], rates[w + 1]);
        if r0 >= target && r1 < target {
            if r1 <= 0.0 {
                // a zero-error point: fall back to linear interpolation
                return Some(xs[w] + (xs[w + 1] - xs[w]) * (r0 - target) / (r0 - r1));
            }
            let (l0, l1) = (r0.log10(), r1.log10());
            return Some(xs[w] + (xs[w + 1] - xs[w]) * (l0 - lt) / (l0 - l1));
        }
    }
    None
}
