//! The coded link for one codeword: info bits, LDPC encoding, natural
//! binary mapping, channel, soft demapping and decoding.
//!
//! Transmit-side randomness is drawn in a fixed order (info bits, fading
//! gains, then per symbol copy: AN and noise) and receivers draw none, so
//! receivers evaluated on the same stream see identical realizations.

use rand::Rng;

use crate::channel::{add_awgn, fade_zf_into, transmit_clean_into, FadingProfile, LinkParams};
use crate::constellation::Codebook;
use crate::demapper::{label_bits, label_index, maxlog_llr_into, Accounting, Demapper, Rule};
use crate::ldpc::{DecodeResult, MinSumConfig, ParityCheck};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Transmitter {
    pub codebook: Codebook,
    pub sigma_c: f64,
    pub fading: FadingProfile,
    /// Independent channel uses per coded symbol (1 except for the
    /// repetition baseline).
    pub repetition: usize,
    /// Hand per-tone gain power to receivers even without fading.
    pub report_csi: bool,
}

/// Everything the receivers get to see for one codeword, plus the truth.
#[derive(Debug, Clone)]
pub struct Realization {
    pub info: Vec<u8>,
    pub codeword: Vec<u8>,
    pub symbols: Vec<usize>,
    /// `symbols.len() * repetition` received vectors of length `2k`.
    pub ys: Vec<f64>,
    pub csi: Option<Vec<f64>>,
    pub repetition: usize,
    pub dim: usize,
}

impl Realization {
    pub fn observation(&self, symbol: usize, copy: usize) -> &[f64] {
        let o = (symbol * self.repetition + copy) * self.dim;
        &self.ys[o..o + self.dim]
    }

    /// All received vectors of copy 0, symbol-major.
    pub fn num_symbols(&self) -> usize {
        self.symbols.len()
    }
}

impl Transmitter {
    pub fn new(codebook: Codebook, sigma_c: f64) -> Self {
        Transmitter { codebook, sigma_c, fading: FadingProfile::NONE, repetition: 1, report_csi: false }
    }

    pub fn bits_per_symbol(&self) -> Result<usize> {
        self.codebook
            .bits_per_symbol()
            .ok_or_else(|| Error::InvalidParameter(format!("M = {} is not a power of two", self.codebook.size())))
    }

    fn send<R: Rng + ?Sized>(&self, info: Vec<u8>, codeword: Vec<u8>, rng: &mut R) -> Result<Realization> {
        let b = self.bits_per_symbol()?;
        if codeword.len() % b != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} coded bits do not split into {b}-bit labels",
                codeword.len()
            )));
        }
        let k = self.codebook.k();
        let dim = self.codebook.dim();
        let gains = self.fading.draw(k, rng);
        let symbols: Vec<usize> = codeword.chunks(b).map(label_index).collect();
        let mut ys = vec![0.0; symbols.len() * self.repetition * dim];
        for (chunk, &s) in ys.chunks_mut(dim).zip(symbols.iter().flat_map(|s| std::iter::repeat_n(s, self.repetition)))
        {
            transmit_clean_into(&self.codebook, s, rng, chunk);
            if self.fading.is_bypass() {
                add_awgn(chunk, self.sigma_c, rng);
            } else {
                fade_zf_into(chunk, &gains, self.sigma_c, rng);
            }
        }
        let csi = (self.report_csi || !self.fading.is_bypass()).then(|| gains.power());
        Ok(Realization { info, codeword, symbols, ys, csi, repetition: self.repetition, dim })
    }

    /// Random info bits, encoded and sent.
    pub fn realize<R: Rng + ?Sized>(&self, code: &ParityCheck, rng: &mut R) -> Result<Realization> {
        let info: Vec<u8> = (0..code.n_info()).map(|_| rng.random_range(0..2u8)).collect();
        let codeword = code.encode(&info)?;
        self.send(info, codeword, rng)
    }

    /// `n_symbols` uniformly random labels, no coding (for rate estimates).
    pub fn realize_uncoded<R: Rng + ?Sized>(&self, n_symbols: usize, rng: &mut R) -> Result<Realization> {
        let b = self.bits_per_symbol()?;
        let bits: Vec<u8> = (0..n_symbols * b).map(|_| rng.random_range(0..2u8)).collect();
        self.send(bits.clone(), bits, rng)
    }
}

/// A soft receiver: LUT, receiver-side coefficients and metric rule.
#[derive(Debug, Clone)]
pub struct Receiver {
    pub label: String,
    pub codebook: Codebook,
    pub params: LinkParams,
    pub rule: Rule,
    pub accounting: Accounting,
}

impl Receiver {
    pub fn new(label: impl Into<String>, codebook: Codebook, params: LinkParams, rule: Rule) -> Self {
        Receiver { label: label.into(), codebook, params, rule, accounting: Accounting::Optimized }
    }

    /// Max-log LLRs in coded-bit order, summed over repeated copies, and
    /// the metric MAC tally.
    pub fn llrs(&self, real: &Realization) -> Result<(Vec<f64>, u64)> {
        let b = self
            .codebook
            .bits_per_symbol()
            .ok_or_else(|| Error::InvalidParameter("M must be a power of two".into()))?;
        let dem = Demapper::new(&self.codebook, &self.params, self.rule, self.accounting)?;
        let mut llrs = vec![0.0; real.num_symbols() * b];
        let mut metrics = vec![0.0; self.codebook.size()];
        let mut tmp = vec![0.0; b];
        let mut macs = 0;
        for (s, out) in llrs.chunks_mut(b).enumerate() {
            for c in 0..real.repetition {
                macs += dem.metrics_into(real.observation(s, c), real.csi.as_deref(), &mut metrics)?;
                maxlog_llr_into(&metrics, b, &mut tmp);
                out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
            }
        }
        Ok((llrs, macs))
    }

    pub fn decode(&self, code: &ParityCheck, real: &Realization, cfg: &MinSumConfig) -> Result<ReceiverOutcome> {
        let (llrs, macs) = self.llrs(real)?;
        let result = code.decode_min_sum(&llrs, cfg)?;
        Ok(ReceiverOutcome { block_error: result.info_bits != real.info, macs, result })
    }
}

#[derive(Debug, Clone)]
pub struct ReceiverOutcome {
    /// Info-bit mismatch after decoding.
    pub block_error: bool,
    pub macs: u64,
    pub result: DecodeResult,
}

/// True label bits of a realization, symbol by symbol.
pub fn true_label_bits(real: &Realization, bits_per_symbol: usize) -> Vec<u8> {
    real.symbols.iter().flat_map(|&s| label_bits(s, bits_per_symbol)).collect()
}
