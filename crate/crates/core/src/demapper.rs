//! Per-candidate decision metrics, hard decisions and max-log bit LLRs.
//!
//! Metrics follow the "lower is more likely" convention and are scaled as
//! `-2 log p(y | i)` up to candidate-independent constants, so max-log LLRs
//! `lambda = log P(b=0|y) / P(b=1|y)` come out as half the metric gap.

use crate::channel::{LinkParams, Observation};
use crate::constellation::{dot, Codebook};
use crate::{Error, Result};

/// How multiply-accumulates are counted (and how the metric is evaluated).
///
/// `Naive` forms the residual `r_i = y - xbar_i` explicitly. `Optimized`
/// expands the squared norm around the cached `|xbar_i|^2` and uses the
/// cached `xbar_i . t_i`, so every candidate costs one `2k` inner product
/// per template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Accounting {
    Naive,
    #[default]
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Rule {
    /// `|r_i|^2 / sigma^2`.
    Euclidean,
    /// Rank-one matched metric with the unit-tangent denominator
    /// `sigma^2 + beta`, also used on quantized LUTs.
    Matched,
    /// Matched metric with the exact `sigma^2 + beta |t_i|^2` denominator.
    MatchedExactQuantized,
    /// Diagonal-plus-rank-one metric for zero-forced fading observations.
    Woodbury,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricVector {
    pub values: Vec<f64>,
    pub mac_count: u64,
}

/// Soft bits for one codeword, coded-bit order, `log P(b=0) / P(b=1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrFrame {
    pub llrs: Vec<f64>,
}

/// A metric evaluator bound to one LUT and one set of receiver-side
/// `(sigma_c, beta)` coefficients. The coefficients may deliberately
/// differ from the true link parameters.
#[derive(Debug, Clone)]
pub struct Demapper<'a> {
    cb: &'a Codebook,
    rule: Rule,
    accounting: Accounting,
    sigma2: f64,
    beta: f64,
}

impl<'a> Demapper<'a> {
    pub fn new(cb: &'a Codebook, params: &LinkParams, rule: Rule, accounting: Accounting) -> Result<Self> {
        if cb.k() != params.k || cb.size() != params.m {
            return Err(Error::ParamMismatch(format!(
                "codebook is (k, M) = ({}, {}), demapper expects ({}, {})",
                cb.k(),
                cb.size(),
                params.k,
                params.m
            )));
        }
        Ok(Demapper { cb, rule, accounting, sigma2: params.noise_var(), beta: params.beta })
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn codebook(&self) -> &Codebook {
        self.cb
    }

    pub fn metrics(&self, obs: &Observation) -> Result<MetricVector> {
        let mut values = vec![0.0; self.cb.size()];
        let mac_count = self.metrics_into(&obs.y, obs.csi.as_deref(), &mut values)?;
        Ok(MetricVector { values, mac_count })
    }

    /// Writes the `M` metrics for `y` into `out` and returns the MAC tally.
    pub fn metrics_into(&self, y: &[f64], csi: Option<&[f64]>, out: &mut [f64]) -> Result<u64> {
        let d = self.cb.dim();
        if y.len() != d {
            return Err(Error::Dimension { expected: d, actual: y.len() });
        }
        if out.len() != self.cb.size() {
            return Err(Error::Dimension { expected: self.cb.size(), actual: out.len() });
        }
        match self.rule {
            Rule::Woodbury => {
                let csi = csi.ok_or(Error::MissingCsi)?;
                if csi.len() != self.cb.k() {
                    return Err(Error::Dimension { expected: self.cb.k(), actual: csi.len() });
                }
                Ok(self.woodbury(y, csi, out))
            }
            _ => Ok(match self.accounting {
                Accounting::Naive => self.static_naive(y, out),
                Accounting::Optimized => self.static_optimized(y, out),
            }),
        }
    }

    fn correction(&self, i: usize) -> f64 {
        match self.rule {
            Rule::Euclidean => 0.0,
            Rule::Matched => self.beta / (self.sigma2 * (self.sigma2 + self.beta)),
            Rule::MatchedExactQuantized => {
                self.beta / (self.sigma2 * (self.sigma2 + self.beta * self.cb.tangent_norm_sq(i)))
            }
            Rule::Woodbury => unreachable!("woodbury has its own path"),
        }
    }

    fn static_naive(&self, y: &[f64], out: &mut [f64]) -> u64 {
        let d = self.cb.dim() as u64;
        let matched = self.rule != Rule::Euclidean;
        let mut macs = 0;
        for (i, o) in out.iter_mut().enumerate() {
            let x = self.cb.mean(i);
            let mut rr = 0.0;
            let mut rt = 0.0;
            if matched {
                let t = self.cb.tangent(i);
                for ((yv, xv), tv) in y.iter().zip(x).zip(t) {
                    let r = yv - xv;
                    rr += r * r;
                    rt += r * tv;
                }
                macs += 3 * d;
            } else {
                for (yv, xv) in y.iter().zip(x) {
                    let r = yv - xv;
                    rr += r * r;
                }
                macs += 2 * d;
            }
            *o = rr / self.sigma2 - self.correction_or_zero(i, matched) * rt * rt;
        }
        macs
    }

    fn correction_or_zero(&self, i: usize, matched: bool) -> f64 {
        if matched {
            self.correction(i)
        } else {
            0.0
        }
    }

    fn static_optimized(&self, y: &[f64], out: &mut [f64]) -> u64 {
        let d = self.cb.dim() as u64;
        let matched = self.rule != Rule::Euclidean;
        let yy = dot(y, y);
        let mut macs = 0;
        for (i, o) in out.iter_mut().enumerate() {
            let rr = yy - 2.0 * dot(y, self.cb.mean(i)) + self.cb.mean_norm_sq(i);
            macs += d;
            let mut v = rr / self.sigma2;
            if matched {
                let rt = dot(y, self.cb.tangent(i)) - self.cb.mean_dot_tangent(i);
                macs += d;
                v -= self.correction(i) * rt * rt;
            }
            *o = v;
        }
        macs
    }

    fn woodbury(&self, y: &[f64], csi: &[f64], out: &mut [f64]) -> u64 {
        // D_h^{-1} on slot pair j is |h_j|^2 / sigma^2
        let w: Vec<f64> = csi.iter().flat_map(|g| [g / self.sigma2, g / self.sigma2]).collect();
        let d = self.cb.dim() as u64;
        for (i, o) in out.iter_mut().enumerate() {
            let (x, t) = (self.cb.mean(i), self.cb.tangent(i));
            let (mut q, mut ru, mut eta) = (0.0, 0.0, 0.0);
            for (((yv, xv), tv), wv) in y.iter().zip(x).zip(t).zip(&w) {
                let r = yv - xv;
                let rw = r * wv;
                q += r * rw;
                ru += rw * tv;
                eta += tv * tv * wv;
            }
            let den = 1.0 + self.beta * eta;
            *o = q - self.beta * ru * ru / den + den.ln();
        }
        3 * d * self.cb.size() as u64
    }
}

/// `|y - xbar_i|^2 / sigma_c^2` for every candidate.
pub fn metric_euclidean(
    obs: &Observation,
    cb: &Codebook,
    params: &LinkParams,
    acc: Accounting,
) -> Result<MetricVector> {
    Demapper::new(cb, params, Rule::Euclidean, acc)?.metrics(obs)
}

/// `|r_i|^2 / sigma^2 - beta (r_i . t_i)^2 / (sigma^2 (sigma^2 + beta))`.
/// The log-det term is dropped because it does not depend on `i`.
pub fn metric_matched(obs: &Observation, cb: &Codebook, params: &LinkParams, acc: Accounting) -> Result<MetricVector> {
    Demapper::new(cb, params, Rule::Matched, acc)?.metrics(obs)
}

/// Woodbury metric on a zero-forced observation, including the
/// `log(1 + beta eta_i)` determinant term.
pub fn metric_matched_fading(obs: &Observation, cb: &Codebook, params: &LinkParams) -> Result<MetricVector> {
    Demapper::new(cb, params, Rule::Woodbury, Accounting::Naive)?.metrics(obs)
}

/// Index of the smallest metric; ties go to the lowest index.
pub fn hard_decide(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Max-log LLRs of one symbol under natural binary labeling, MSB first:
/// `lambda_j = (min_{b_j = 1} L - min_{b_j = 0} L) / 2`.
pub fn maxlog_llr_into(metrics: &[f64], bits_per_symbol: usize, out: &mut [f64]) {
    debug_assert_eq!(metrics.len(), 1 << bits_per_symbol);
    for (j, o) in out.iter_mut().enumerate().take(bits_per_symbol) {
        let shift = bits_per_symbol - 1 - j;
        let (mut min0, mut min1) = (f64::INFINITY, f64::INFINITY);
        for (i, &v) in metrics.iter().enumerate() {
            if (i >> shift) & 1 == 0 {
                min0 = min0.min(v);
            } else {
                min1 = min1.min(v);
            }
        }
        *o = 0.5 * (min1 - min0);
    }
}

/// Concatenates the per-symbol LLRs of a codeword.
pub fn maxlog_llr(symbols: &[MetricVector], bits_per_symbol: usize) -> Result<LlrFrame> {
    let m = 1usize << bits_per_symbol;
    let mut llrs = vec![0.0; symbols.len() * bits_per_symbol];
    for (s, out) in symbols.iter().zip(llrs.chunks_mut(bits_per_symbol)) {
        if s.values.len() != m {
            return Err(Error::Dimension { expected: m, actual: s.values.len() });
        }
        maxlog_llr_into(&s.values, bits_per_symbol, out);
    }
    Ok(LlrFrame { llrs })
}

/// Natural-binary label bits of symbol `index`, MSB first.
pub fn label_bits(index: usize, bits_per_symbol: usize) -> impl Iterator<Item = u8> {
    (0..bits_per_symbol).rev().map(move |s| ((index >> s) & 1) as u8)
}

/// Symbol index of a group of label bits, MSB first.
pub fn label_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// Live MAC tallies for one symbol under both accounting conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MacTable {
    pub naive_euclidean: u64,
    pub naive_matched: u64,
    pub optimized_euclidean: u64,
    pub optimized_matched: u64,
}

impl MacTable {
    pub fn measure(cb: &Codebook, params: &LinkParams) -> Result<Self> {
        let y = vec![0.1; cb.dim()];
        let mut out = vec![0.0; cb.size()];
        let mut count = |rule, acc| Demapper::new(cb, params, rule, acc)?.metrics_into(&y, None, &mut out);
        Ok(MacTable {
            naive_euclidean: count(Rule::Euclidean, Accounting::Naive)?,
            naive_matched: count(Rule::Matched, Accounting::Naive)?,
            optimized_euclidean: count(Rule::Euclidean, Accounting::Optimized)?,
            optimized_matched: count(Rule::Matched, Accounting::Optimized)?,
        })
    }

    pub fn naive_overhead(&self) -> f64 {
        self.naive_matched as f64 / self.naive_euclidean as f64 - 1.0
    }

    pub fn optimized_overhead(&self) -> f64 {
        self.optimized_matched as f64 / self.optimized_euclidean as f64 - 1.0
    }
}
