//! Tangent-AN transmitter, AWGN, per-tone Ricean fading with zero-forcing,
//! and SNR bookkeeping.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::constellation::{Codebook, CodebookKind};
use crate::{Error, Result};

/// Link operating point. The single source of truth for noise scaling.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinkParams {
    pub k: usize,
    pub m: usize,
    pub beta: f64,
    pub sigma_c: f64,
}

/// SNR figures for one operating point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SnrReport {
    pub rho_slot_db: f64,
    pub es_n0_db: f64,
    pub eb_n0_db: f64,
    /// Net bits per complex slot, `R * B_mod / k`.
    pub spectral_efficiency: f64,
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl LinkParams {
    pub fn new(k: usize, m: usize, beta: f64, sigma_c: f64) -> Result<Self> {
        if k < 1 || m < 2 {
            return Err(Error::InvalidParameter(format!("need k >= 1 and M >= 2, got k = {k}, M = {m}")));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!("beta = {beta} outside [0, 1)")));
        }
        if !(sigma_c > 0.0 && sigma_c.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma_c = {sigma_c} must be positive")));
        }
        Ok(LinkParams { k, m, beta, sigma_c })
    }

    /// Operating point at a given per-complex-slot SNR in dB.
    pub fn from_rho_slot_db(k: usize, m: usize, beta: f64, rho_slot_db: f64) -> Result<Self> {
        let rho = 10f64.powf(rho_slot_db / 10.0);
        Self::new(k, m, beta, (1.0 / (2.0 * k as f64 * rho)).sqrt())
    }

    /// Per-complex-slot SNR `1 / (2k sigma_c^2)`.
    pub fn rho_slot(&self) -> f64 {
        1.0 / (2.0 * self.k as f64 * self.sigma_c * self.sigma_c)
    }

    pub fn rho_slot_db(&self) -> f64 {
        db(self.rho_slot())
    }

    /// Total-symbol `Es/N0 = k * rho_slot`, in dB.
    pub fn es_n0_db(&self) -> f64 {
        db(self.k as f64 * self.rho_slot())
    }

    pub fn noise_var(&self) -> f64 {
        self.sigma_c * self.sigma_c
    }

    pub fn snr_report(&self, rate: f64, bits_per_symbol: usize) -> SnrReport {
        let rb = rate * bits_per_symbol as f64;
        SnrReport {
            rho_slot_db: self.rho_slot_db(),
            es_n0_db: self.es_n0_db(),
            eb_n0_db: self.es_n0_db() - db(rb),
            spectral_efficiency: rb / self.k as f64,
        }
    }

    fn check_codebook(&self, cb: &Codebook) -> Result<()> {
        if cb.k() != self.k || cb.size() != self.m {
            return Err(Error::ParamMismatch(format!(
                "codebook is (k, M) = ({}, {}), link is ({}, {})",
                cb.k(),
                cb.size(),
                self.k,
                self.m
            )));
        }
        if (cb.beta() - self.beta).abs() > 1e-12 {
            return Err(Error::ParamMismatch(format!(
                "codebook scaled for beta = {}, link has beta = {}",
                cb.beta(),
                self.beta
            )));
        }
        Ok(())
    }
}

/// One received real `2k`-vector, with per-tone power gains `|h_j|^2` once
/// it has been through a fading channel and zero-forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Vec<f64>,
    pub csi: Option<Vec<f64>>,
}

impl Observation {
    pub fn new(y: Vec<f64>) -> Self {
        Observation { y, csi: None }
    }
}

/// Noise-free transmit vector (signal plus AN) for symbol `index`, written
/// into `out`. Fourier codebooks get tangent AN `sqrt(beta) z t_i`; the flat
/// baseline gets isotropic AN `sqrt(beta / 2k) w` of the same total power.
pub fn transmit_clean_into<R: Rng + ?Sized>(cb: &Codebook, index: usize, rng: &mut R, out: &mut [f64]) {
    let beta = cb.beta();
    out.copy_from_slice(cb.mean(index));
    if beta == 0.0 {
        return;
    }
    match cb.kind() {
        CodebookKind::Fourier => {
            let z: f64 = rng.sample(StandardNormal);
            let a = beta.sqrt() * z;
            for (o, t) in out.iter_mut().zip(cb.tangent(index)) {
                *o += a * t;
            }
        }
        CodebookKind::Flat => {
            let a = (beta / cb.dim() as f64).sqrt();
            for o in out.iter_mut() {
                let w: f64 = rng.sample(StandardNormal);
                *o += a * w;
            }
        }
    }
}

/// Adds i.i.d. `N(0, sigma^2)` to every component.
pub fn add_awgn<R: Rng + ?Sized>(y: &mut [f64], sigma: f64, rng: &mut R) {
    for v in y.iter_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *v += sigma * n;
    }
}

/// `y = xbar_i + AN + N`, `N ~ N(0, sigma_c^2 I)`.
pub fn transmit<R: Rng + ?Sized>(cb: &Codebook, index: usize, params: &LinkParams, rng: &mut R) -> Result<Observation> {
    params.check_codebook(cb)?;
    if index >= cb.size() {
        return Err(Error::IndexOutOfRange { index, m: cb.size() });
    }
    let mut y = vec![0.0; cb.dim()];
    transmit_clean_into(cb, index, rng, &mut y);
    add_awgn(&mut y, params.sigma_c, rng);
    Ok(Observation::new(y))
}

/// Per-tone Ricean fading. `rice_k = inf` bypasses fading altogether.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FadingProfile {
    pub rice_k: f64,
}

/// Complex gains `h_j`, one per tone, held for a whole codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneGains {
    gains: Vec<(f64, f64)>,
}

impl ToneGains {
    pub fn unit(k: usize) -> Self {
        ToneGains { gains: vec![(1.0, 0.0); k] }
    }

    pub fn from_complex(gains: Vec<(f64, f64)>) -> Self {
        ToneGains { gains }
    }

    pub fn gains(&self) -> &[(f64, f64)] {
        &self.gains
    }

    /// `|h_j|^2` for every tone.
    pub fn power(&self) -> Vec<f64> {
        self.gains.iter().map(|(re, im)| re * re + im * im).collect()
    }
}

impl FadingProfile {
    pub const NONE: FadingProfile = FadingProfile { rice_k: f64::INFINITY };

    pub fn new(rice_k: f64) -> Result<Self> {
        if rice_k.is_nan() || rice_k < 0.0 {
            return Err(Error::InvalidParameter(format!("Ricean K = {rice_k} must be >= 0")));
        }
        Ok(FadingProfile { rice_k })
    }

    pub fn is_bypass(&self) -> bool {
        self.rice_k.is_infinite()
    }

    /// `h_j = sqrt(K/(K+1)) e^{i psi_j} + sqrt(1/(K+1)) g_j`, `psi_j` uniform,
    /// `g_j` circular complex normal with unit variance. `E|h_j|^2 = 1`.
    pub fn draw<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> ToneGains {
        if self.is_bypass() {
            return ToneGains::unit(k);
        }
        let los = (self.rice_k / (self.rice_k + 1.0)).sqrt();
        let diffuse = (1.0 / (self.rice_k + 1.0)).sqrt() * std::f64::consts::FRAC_1_SQRT_2;
        let gains = (0..k)
            .map(|_| {
                let psi = rng.random::<f64>() * std::f64::consts::TAU;
                let (gr, gi): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                (los * psi.cos() + diffuse * gr, los * psi.sin() + diffuse * gi)
            })
            .collect();
        ToneGains { gains }
    }
}

/// Fade, add AWGN, then zero-force each tone. `clean` is the noise-free
/// transmit vector; tone `j` is the complex sample in slots `(2j, 2j+1)`.
/// After ZF the noise on tone `j` has variance `sigma_c^2 / |h_j|^2`.
pub fn apply_fading_zf<R: Rng + ?Sized>(
    clean: &Observation,
    gains: &ToneGains,
    sigma_c: f64,
    rng: &mut R,
) -> Result<Observation> {
    if clean.csi.is_some() {
        return Err(Error::InvalidParameter("observation already carries CSI".into()));
    }
    if clean.y.len() != 2 * gains.gains.len() {
        return Err(Error::Dimension { expected: 2 * gains.gains.len(), actual: clean.y.len() });
    }
    let mut y = clean.y.clone();
    fade_zf_into(&mut y, gains, sigma_c, rng);
    Ok(Observation { y, csi: Some(gains.power()) })
}

pub(crate) fn fade_zf_into<R: Rng + ?Sized>(y: &mut [f64], gains: &ToneGains, sigma_c: f64, rng: &mut R) {
    for (j, &(hr, hi)) in gains.gains.iter().enumerate() {
        let (xr, xi) = (y[2 * j], y[2 * j + 1]);
        // h * x
        let (mut fr, mut fi) = (hr * xr - hi * xi, hr * xi + hi * xr);
        if sigma_c > 0.0 {
            let (nr, ni): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            fr += sigma_c * nr;
            fi += sigma_c * ni;
        }
        // (h* f) / |h|^2
        let p = hr * hr + hi * hi;
        y[2 * j] = (hr * fr + hi * fi) / p;
        y[2 * j + 1] = (hr * fi - hi * fr) / p;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_codebook, build_flat_codebook, dot, PhaseKey};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn fourier(k: usize, m: usize, beta: f64, seed: u64) -> Codebook {
        build_codebook(k, m, &PhaseKey::random(k, &mut rng(seed)), beta).unwrap()
    }

    #[test]
    fn noiseless_limit() {
        let cb = fourier(20, 64, 0.0, 1);
        let p = LinkParams::new(20, 64, 0.0, 1e-300).unwrap();
        let obs = transmit(&cb, 17, &p, &mut rng(2)).unwrap();
        for (a, b) in obs.y.iter().zip(cb.mean(17)) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-250);
        }
    }

    #[test]
    fn rejects_mismatch_and_bad_index() {
        let cb = fourier(4, 16, 0.3, 1);
        let p = LinkParams::new(4, 16, 0.2, 0.1).unwrap();
        assert!(matches!(transmit(&cb, 0, &p, &mut rng(0)), Err(Error::ParamMismatch(_))));
        let p = LinkParams::new(4, 16, 0.3, 0.1).unwrap();
        assert!(matches!(transmit(&cb, 16, &p, &mut rng(0)), Err(Error::IndexOutOfRange { .. })));
        assert!(LinkParams::new(4, 16, 0.3, 0.0).is_err());
    }

    #[test]
    fn residual_energy_moment() {
        let (k, beta, sigma) = (20, 0.3, 0.2);
        let cb = fourier(k, 64, beta, 3);
        let p = LinkParams::new(k, 64, beta, sigma).unwrap();
        let mut r = rng(4);
        let n = 100_000;
        let mut acc = 0.0;
        for t in 0..n {
            let i = t % 64;
            let obs = transmit(&cb, i, &p, &mut r).unwrap();
            acc += obs.y.iter().zip(cb.mean(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        let want = beta + 2.0 * k as f64 * sigma * sigma;
        assert!((acc / n as f64 - want).abs() / want < 0.02);
    }

    #[test]
    fn sample_covariance_is_rank_one_perturbed() {
        let (k, beta, sigma) = (3, 0.3, 0.2);
        let cb = fourier(k, 8, beta, 5);
        let p = LinkParams::new(k, 8, beta, sigma).unwrap();
        let d = 2 * k;
        let mut r = rng(6);
        let n = 1_000_000;
        let mut cov = vec![0.0; d * d];
        let mut mean = vec![0.0; d];
        let i = 5;
        for _ in 0..n {
            let obs = transmit(&cb, i, &p, &mut r).unwrap();
            let res: Vec<f64> = obs.y.iter().zip(cb.mean(i)).map(|(a, b)| a - b).collect();
            for a in 0..d {
                mean[a] += res[a];
                for b in 0..d {
                    cov[a * d + b] += res[a] * res[b];
                }
            }
        }
        let t = cb.tangent(i);
        for a in 0..d {
            assert!((mean[a] / n as f64).abs() < 5e-3);
            for b in 0..d {
                let want = if a == b { sigma * sigma } else { 0.0 } + beta * t[a] * t[b];
                assert!((cov[a * d + b] / n as f64 - want).abs() < 5e-3);
            }
        }
    }

    #[test]
    fn energy_split_and_an_direction() {
        let (k, beta) = (20, 0.3);
        let cb = fourier(k, 64, beta, 7);
        let mut r = rng(8);
        let n = 100_000;
        let (mut sig, mut an) = (0.0, 0.0);
        let mut y = vec![0.0; 2 * k];
        for t in 0..n {
            let i = t % 64;
            transmit_clean_into(&cb, i, &mut r, &mut y);
            let a: Vec<f64> = y.iter().zip(cb.mean(i)).map(|(p, q)| p - q).collect();
            sig += dot(cb.mean(i), cb.mean(i));
            an += dot(&a, &a);
            // AN is parallel to the tangent: no component along the mean
            // (which is normal to the tangent)
            assert!(dot(&a, cb.mean(i)).abs() < 1e-12);
            let along = dot(&a, cb.tangent(i));
            let perp: f64 = a.iter().zip(cb.tangent(i)).map(|(p, q)| (p - along * q).powi(2)).sum();
            assert!(perp < 1e-24);
        }
        assert!((sig / n as f64 - (1.0 - beta)).abs() / (1.0 - beta) < 0.02);
        assert!((an / n as f64 - beta).abs() / beta < 0.02);
    }

    #[test]
    fn scalar_and_projected_an_have_same_moments() {
        // sqrt(beta) t t^T xi with isotropic xi vs sqrt(beta) z t
        let (k, beta) = (4, 0.3);
        let cb = fourier(k, 16, beta, 9);
        let t = cb.tangent(3).to_vec();
        let d = 2 * k;
        let mut r = rng(10);
        let n = 200_000;
        let (mut m1, mut m2) = (vec![0.0; d], vec![0.0; d * d]);
        let (mut s1, mut s2) = (vec![0.0; d], vec![0.0; d * d]);
        for _ in 0..n {
            let xi: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
            let proj = dot(&t, &xi);
            let z: f64 = r.sample(StandardNormal);
            for a in 0..d {
                let u = beta.sqrt() * proj * t[a];
                let v = beta.sqrt() * z * t[a];
                m1[a] += u;
                s1[a] += v;
                for b in 0..d {
                    m2[a * d + b] += u * beta.sqrt() * proj * t[b];
                    s2[a * d + b] += v * beta.sqrt() * z * t[b];
                }
            }
        }
        for a in 0..d {
            assert!((m1[a] - s1[a]).abs() / (n as f64) < 5e-3);
            for b in 0..d {
                assert!((m2[a * d + b] - s2[a * d + b]).abs() / (n as f64) < 5e-3);
            }
        }
    }

    #[test]
    fn flat_codebook_gets_isotropic_an() {
        let (k, beta) = (20, 0.3);
        let cb = build_flat_codebook(k, 64, beta, 11).unwrap();
        let mut r = rng(12);
        let n = 20_000;
        let mut y = vec![0.0; 2 * k];
        let mut per_dim = vec![0.0; 2 * k];
        for _ in 0..n {
            transmit_clean_into(&cb, 0, &mut r, &mut y);
            for (acc, (a, b)) in per_dim.iter_mut().zip(y.iter().zip(cb.mean(0))) {
                *acc += (a - b).powi(2);
            }
        }
        let total: f64 = per_dim.iter().sum::<f64>() / n as f64;
        assert!((total - beta).abs() / beta < 0.02);
        let want = beta / (2 * k) as f64;
        assert!(per_dim.iter().all(|v| (v / n as f64 - want).abs() / want < 0.1));
    }

    #[test]
    fn snr_conversions() {
        let rate = 506.0 / 1008.0;
        let p = LinkParams::from_rho_slot_db(20, 64, 0.3, -3.7).unwrap();
        let rep = p.snr_report(rate, 6);
        assert_abs_diff_eq!(rep.rho_slot_db, -3.7, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.es_n0_db, -3.7 + 10.0 * 20f64.log10(), epsilon = 1e-12);
        assert!((rep.es_n0_db - 9.3).abs() < 0.05);
        assert!((rep.spectral_efficiency - 0.1506).abs() < 5e-5);
        assert_abs_diff_eq!(rep.es_n0_db - rep.eb_n0_db, 10.0 * (rate * 6.0).log10(), epsilon = 1e-12);
        assert!((rep.es_n0_db - rep.eb_n0_db - 4.79).abs() < 0.01);
    }

    #[test]
    fn no_fading_is_identity() {
        let cb = fourier(5, 16, 0.3, 13);
        let mut r = rng(14);
        let mut y = vec![0.0; 10];
        transmit_clean_into(&cb, 2, &mut r, &mut y);
        let clean = Observation::new(y);
        let gains = FadingProfile::NONE.draw(5, &mut r);
        let out = apply_fading_zf(&clean, &gains, 0.0, &mut r).unwrap();
        assert_eq!(out.y, clean.y);
        assert_eq!(out.csi.unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn rayleigh_power_is_unit_exponential() {
        let prof = FadingProfile::new(0.0).unwrap();
        let mut r = rng(15);
        let n = 100_000;
        let powers: Vec<f64> = (0..n).flat_map(|_| prof.draw(1, &mut r).power()).collect();
        let mean = powers.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02);
        // exponential(1): P(|h|^2 > 1) = e^-1
        let tail = powers.iter().filter(|&&p| p > 1.0).count() as f64 / n as f64;
        assert!((tail - (-1f64).exp()).abs() < 0.01);
    }

    #[test]
    fn ricean_mean_power_is_one() {
        for kf in [1.0, 3.0, 10.0] {
            let prof = FadingProfile::new(kf).unwrap();
            let mut r = rng(16);
            let n = 50_000;
            let mean = (0..n).map(|_| prof.draw(1, &mut r).power()[0]).sum::<f64>() / n as f64;
            assert!((mean - 1.0).abs() < 0.02, "K = {kf}: {mean}");
        }
        assert!(FadingProfile::new(-1.0).is_err());
    }

    #[test]
    fn zf_restores_geometry_without_noise() {
        let cb = fourier(20, 64, 0.3, 17);
        let mut r = rng(18);
        for kf in [0.0, 1.0, 10.0] {
            let mut y = vec![0.0; 40];
            transmit_clean_into(&cb, 9, &mut r, &mut y);
            let clean = Observation::new(y);
            let gains = FadingProfile::new(kf).unwrap().draw(20, &mut r);
            let out = apply_fading_zf(&clean, &gains, 0.0, &mut r).unwrap();
            for (a, b) in out.y.iter().zip(&clean.y) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            assert!(out.csi.unwrap().iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn zf_noise_is_inflated_per_tone() {
        let sigma = 0.15;
        let gains = ToneGains::from_complex(vec![(0.5, 0.0), (0.0, 2.0)]);
        let clean = Observation::new(vec![0.0; 4]);
        let mut r = rng(19);
        let n = 100_000;
        let mut acc = [0.0; 4];
        for _ in 0..n {
            let out = apply_fading_zf(&clean, &gains, sigma, &mut r).unwrap();
            for (a, v) in acc.iter_mut().zip(&out.y) {
                *a += v * v;
            }
        }
        let want = [sigma * sigma / 0.25, sigma * sigma / 0.25, sigma * sigma / 4.0, sigma * sigma / 4.0];
        for (a, w) in acc.iter().zip(want) {
            assert!((a / n as f64 - w).abs() / w < 0.02);
        }
    }
}
