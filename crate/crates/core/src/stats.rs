//! Drift statistics: Nakagami fits, KS distance, normalized Jensen–Shannon
//! divergence, partial autocorrelation, survival and shadow fractions.

use crate::channel::GainField;
use crate::error::{Error, Result};
use crate::geometry::WallId;
use crate::visibility::TileMask;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

pub const MIN_FIT_SAMPLES: usize = 20;
pub const DEFAULT_BINS: usize = 64;
pub const HISTOGRAM_SMOOTHING: f64 = 1e-12;
pub const STRIDES: [usize; 5] = [5, 10, 20, 50, 100];
pub const DEFAULT_WINDOW_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NakagamiFit {
    pub m: f64,
    pub omega: f64,
    pub n_samples: usize,
}

impl NakagamiFit {
    pub fn cdf(&self, x: f64) -> f64 {
        nakagami_cdf(x, self)
    }
}

/// Moment estimator on amplitudes: `Ω = E[x²]`, `m = Ω² / Var[x²]`,
/// with `m` clamped to at least 0.5.
pub fn fit_nakagami(samples: &[f64]) -> Result<NakagamiFit> {
    if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidSample(
            "amplitudes must be finite and non-negative".into(),
        ));
    }
    let positive = samples.iter().filter(|&&x| x > 0.0).count();
    if positive < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: positive,
        });
    }
    let n = samples.len() as f64;
    let omega = samples.iter().map(|x| x * x).sum::<f64>() / n;
    let var = samples.iter().map(|x| (x * x - omega).powi(2)).sum::<f64>() / n;
    if !(omega > 0.0) || !(var > 1e-12 * omega * omega) {
        return Err(Error::ZeroVariance);
    }
    let m = (omega * omega / var).max(0.5);
    Ok(NakagamiFit {
        m,
        omega,
        n_samples: samples.len(),
    })
}

pub fn nakagami_cdf(x: f64, fit: &NakagamiFit) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(fit.m, fit.m * x * x / fit.omega)
    }
}

/// `max |F̂ − F|` over both edges of every empirical step.
pub fn ks_distance_with(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        // Equal samples form one step.
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]).clamp(0.0, 1.0);
        d = d
            .max((f - i as f64 / n).abs())
            .max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    d.clamp(0.0, 1.0)
}

pub fn ks_distance(samples: &[f64], fit: &NakagamiFit) -> f64 {
    ks_distance_with(samples, |x| nakagami_cdf(x, fit))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinScale {
    #[default]
    Linear,
    /// Uniform bins in log10 of the value; zeros fall in the lowest bin.
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub scale: BinScale,
    pub counts: Vec<f64>,
}

impl Histogram {
    pub fn from_counts(counts: Vec<f64>) -> Self {
        Self {
            lo: 0.0,
            hi: counts.len() as f64,
            scale: BinScale::Linear,
            counts,
        }
    }

    /// Histogram of `samples` over `[lo, hi]` (already in the bin scale).
    pub fn build(samples: &[f64], lo: f64, hi: f64, bins: usize, scale: BinScale) -> Self {
        let mut counts = vec![0.0; bins.max(1)];
        let width = (hi - lo) / counts.len() as f64;
        for &s in samples {
            let x = scale.map(s, lo);
            let k = if width > 0.0 {
                ((x - lo) / width).floor()
            } else {
                0.0
            };
            let k = (k.max(0.0) as usize).min(counts.len() - 1);
            counts[k] += 1.0;
        }
        Self {
            lo,
            hi,
            scale,
            counts,
        }
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn smoothed(mut self, eps: f64) -> Self {
        for c in &mut self.counts {
            *c += eps;
        }
        self
    }

    fn same_binning(&self, other: &Histogram) -> bool {
        self.counts.len() == other.counts.len()
            && self.lo == other.lo
            && self.hi == other.hi
            && self.scale == other.scale
    }
}

impl BinScale {
    fn map(self, x: f64, floor: f64) -> f64 {
        match self {
            BinScale::Linear => x,
            BinScale::Log => {
                if x > 0.0 {
                    x.log10()
                } else {
                    floor
                }
            }
        }
    }

    /// Pooled range of two sample sets in the bin scale.
    pub fn range(self, a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
        let vals = a.iter().chain(b).copied().filter(|x| match self {
            BinScale::Linear => x.is_finite(),
            BinScale::Log => *x > 0.0 && x.is_finite(),
        });
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            let y = self.map(x, 0.0);
            (lo.min(y), hi.max(y))
        });
        (lo <= hi).then_some((lo, hi))
    }
}

fn plogp_ratio(p: f64, m: f64) -> f64 {
    if p > 0.0 {
        p * (p / m).log2()
    } else {
        0.0
    }
}

/// Base-2 Jensen–Shannon divergence of two histograms, in `[0, 1]`.
pub fn js_divergence_normalized(p: &Histogram, q: &Histogram) -> Result<f64> {
    if !p.same_binning(q) {
        return Err(Error::BinningMismatch);
    }
    let (tp, tq) = (p.total(), q.total());
    if !(tp > 0.0 && tq > 0.0) {
        return Err(Error::EmptyInput);
    }
    let mut js = 0.0;
    for (&a, &b) in p.counts.iter().zip(&q.counts) {
        let (a, b) = (a / tp, b / tq);
        let m = 0.5 * (a + b);
        js += 0.5 * plogp_ratio(a, m) + 0.5 * plogp_ratio(b, m);
    }
    Ok(js.clamp(0.0, 1.0))
}

/// Partial autocorrelations `pacf[0..=max_lag]` by the Durbin–Levinson
/// recursion on biased sample autocorrelations.
pub fn pacf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag + 1 {
        return Err(Error::SeriesTooShort {
            len: n,
            needed: max_lag + 2,
        });
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSample("series must be finite".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0 = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    if !(c0 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let r: Vec<f64> = (0..=max_lag)
        .map(|k| {
            (0..n - k)
                .map(|t| (series[t] - mean) * (series[t + k] - mean))
                .sum::<f64>()
                / c0
        })
        .collect();
    let mut out = vec![1.0];
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    let mut v = 1.0;
    for k in 1..=max_lag {
        let num = r[k] - (1..k).map(|j| phi[j - 1] * r[k - j]).sum::<f64>();
        let a = if v > 0.0 { num / v } else { 0.0 };
        let prev = phi.clone();
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - a * prev[k - j - 1];
        }
        phi.push(a);
        v *= 1.0 - a * a;
        out.push(a);
    }
    Ok(out)
}

/// Per-tile fraction of alive samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalField {
    pub wall_id: WallId,
    pub rates: Vec<f64>,
    pub n_fields: usize,
}

impl SurvivalField {
    pub fn mean(&self) -> f64 {
        if self.rates.is_empty() {
            0.0
        } else {
            self.rates.iter().sum::<f64>() / self.rates.len() as f64
        }
    }
}

pub fn survival_field<'a>(
    fields: impl IntoIterator<Item = &'a GainField>,
) -> Result<SurvivalField> {
    let mut it = fields.into_iter();
    let first = it.next().ok_or(Error::EmptyInput)?;
    let mut alive: Vec<f64> = first.alive.iter().map(|&a| a as u8 as f64).collect();
    let mut n = 1usize;
    for f in it {
        if f.wall_id != first.wall_id || f.alive.len() != alive.len() {
            return Err(Error::InvalidSpec("survival window mixes grids".into()));
        }
        for (acc, &a) in alive.iter_mut().zip(&f.alive) {
            *acc += a as u8 as f64;
        }
        n += 1;
    }
    for a in &mut alive {
        *a /= n as f64;
    }
    Ok(SurvivalField {
        wall_id: first.wall_id,
        rates: alive,
        n_fields: n,
    })
}

pub fn shadow_fraction(mask: &TileMask) -> f64 {
    mask.fraction()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePacf {
    pub tile: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub window_stride: usize,
    pub window_len: usize,
    pub bins: usize,
    pub bin_scale: BinScale,
    /// One entry per window; `None` when the window could not be fitted.
    pub ksd_series: Vec<Option<f64>>,
    /// One entry per adjacent window pair.
    pub jsd_series: Vec<f64>,
    pub fits: Vec<Option<NakagamiFit>>,
    pub pacf: Vec<TilePacf>,
}

impl DriftReport {
    pub fn max_ksd(&self) -> Option<f64> {
        self.ksd_series.iter().flatten().copied().reduce(f64::max)
    }

    pub fn mean_jsd(&self) -> Option<f64> {
        (!self.jsd_series.is_empty())
            .then(|| self.jsd_series.iter().sum::<f64>() / self.jsd_series.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftConfig {
    /// Frames between the starts of successive windows.
    pub stride: usize,
    /// Frames per window.
    pub window_len: usize,
    pub bins: usize,
    pub bin_scale: BinScale,
    pub pacf_max_lag: usize,
    /// Tiles whose series get a PACF.
    pub pacf_tiles: Vec<usize>,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            stride: 20,
            window_len: DEFAULT_WINDOW_LEN,
            bins: DEFAULT_BINS,
            bin_scale: BinScale::Log,
            pacf_max_lag: 10,
            pacf_tiles: vec![],
        }
    }
}

/// Drift statistics of a stream of frames, each frame holding one
/// non-negative power gain per tile. A window of `window_len` frames starts
/// every `stride` frames, so adjacent windows lie `stride` frames apart.
/// Nakagami fits use the amplitudes `sqrt(gain)`.
pub fn windowed_drift_report(frames: &[Vec<f64>], cfg: &DriftConfig) -> Result<DriftReport> {
    let stride = cfg.stride;
    let len = cfg.window_len;
    if stride == 0 || len == 0 {
        return Err(Error::InvalidSpec(
            "stride and window length must be positive".into(),
        ));
    }
    if frames.len() < stride + len {
        return Err(Error::SeriesTooShort {
            len: frames.len(),
            needed: stride + len,
        });
    }
    let windows: Vec<Vec<f64>> = (0..=frames.len() - len)
        .step_by(stride)
        .map(|start| {
            frames[start..start + len]
                .iter()
                .flatten()
                .map(|g| g.max(0.0).sqrt())
                .collect()
        })
        .collect();
    let mut fits = Vec::with_capacity(windows.len());
    let mut ksd_series = Vec::with_capacity(windows.len());
    for w in &windows {
        match fit_nakagami(w) {
            Ok(fit) => {
                ksd_series.push(Some(ks_distance(w, &fit)));
                fits.push(Some(fit));
            }
            Err(_) => {
                ksd_series.push(None);
                fits.push(None);
            }
        }
    }
    let mut jsd_series = Vec::with_capacity(windows.len().saturating_sub(1));
    for pair in windows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let js = match cfg.bin_scale.range(a, b) {
            None => 0.0,
            Some((lo, hi)) => {
                let build = |s: &[f64]| {
                    Histogram::build(s, lo, hi, cfg.bins, cfg.bin_scale)
                        .smoothed(HISTOGRAM_SMOOTHING)
                };
                if a.is_empty() || b.is_empty() {
                    0.0
                } else {
                    js_divergence_normalized(&build(a), &build(b))?
                }
            }
        };
        jsd_series.push(js);
    }
    let mut pacf_out = Vec::with_capacity(cfg.pacf_tiles.len());
    for &tile in &cfg.pacf_tiles {
        let series: Vec<f64> = frames.iter().filter_map(|f| f.get(tile).copied()).collect();
        if let Ok(values) = pacf(&series, cfg.pacf_max_lag) {
            pacf_out.push(TilePacf { tile, values });
        }
    }
    Ok(DriftReport {
        window_stride: stride,
        window_len: len,
        bins: cfg.bins,
        bin_scale: cfg.bin_scale,
        ksd_series,
        jsd_series,
        fits,
        pacf: pacf_out,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma, StandardNormal};
    use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

    pub(crate) fn nakagami_samples(m: f64, omega: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Gamma::new(m, omega / m).unwrap();
        (0..n).map(|_| g.sample(&mut rng).sqrt()).collect()
    }

    fn nakagami_quantile(p: f64, m: f64, omega: f64) -> f64 {
        GammaDist::new(m, m / omega).unwrap().inverse_cdf(p).sqrt()
    }

    #[test]
    fn rayleigh_fit_recovers_parameters() {
        let xs = nakagami_samples(1.0, 1.0, 100_000, 1);
        let fit = fit_nakagami(&xs).unwrap();
        assert!((fit.m - 1.0).abs() < 0.05, "m = {}", fit.m);
        assert!((fit.omega - 1.0).abs() < 0.02, "omega = {}", fit.omega);
    }

    #[test]
    fn omega_is_mean_square() {
        let xs = nakagami_samples(2.0, 3.0, 1000, 2);
        let fit = fit_nakagami(&xs).unwrap();
        let ms = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert_eq!(fit.omega, ms);
        assert!(fit.m >= 0.5);
    }

    #[test]
    fn degenerate_inputs_are_errors() {
        assert!(matches!(fit_nakagami(&[0.7; 50]), Err(Error::ZeroVariance)));
        assert!(matches!(
            fit_nakagami(&[0.7; 5]),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(fit_nakagami(&[f64::NAN; 30]).is_err());
    }

    #[test]
    fn fit_error_shrinks_with_sample_size() {
        let err = |n: usize| {
            let mut e = 0.0;
            for seed in 0..20 {
                let f = fit_nakagami(&nakagami_samples(1.5, 2.0, n, 100 + seed)).unwrap();
                e += (f.m - 1.5).abs() + (f.omega - 2.0).abs();
            }
            e
        };
        let (a, b, c) = (err(1_000), err(10_000), err(100_000));
        assert!(a > b && b > c, "{a} {b} {c}");
    }

    #[test]
    fn ks_constant_sample_step() {
        let d = ks_distance_with(&[2.0; 10], |_| 0.4);
        assert!((d - 0.6).abs() < 1e-15);
    }

    #[test]
    fn ks_at_exact_quantiles_is_half_step() {
        let n = 200;
        let fit = NakagamiFit {
            m: 1.7,
            omega: 2.3,
            n_samples: n,
        };
        let xs: Vec<f64> = (1..=n)
            .map(|i| nakagami_quantile((i as f64 - 0.5) / n as f64, fit.m, fit.omega))
            .collect();
        let d = ks_distance(&xs, &fit);
        assert!((d - 0.5 / n as f64).abs() < 1e-6, "D = {d}");
    }

    #[test]
    fn own_fit_ks_is_small() {
        let xs = nakagami_samples(1.3, 0.8, 100_000, 3);
        let fit = fit_nakagami(&xs).unwrap();
        assert!(ks_distance(&xs, &fit) < 0.02);
    }

    #[test]
    fn ks_and_fit_ignore_order() {
        let mut xs = nakagami_samples(1.3, 0.8, 5_000, 4);
        let fit = fit_nakagami(&xs).unwrap();
        let d = ks_distance(&xs, &fit);
        xs.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
        let fit2 = fit_nakagami(&xs).unwrap();
        assert!((fit2.m - fit.m).abs() < 1e-9 && (fit2.omega - fit.omega).abs() < 1e-12);
        assert!((ks_distance(&xs, &fit2) - d).abs() < 1e-9);
    }

    #[test]
    fn jsd_cases() {
        let p = Histogram::from_counts(vec![1.0, 0.0]);
        let q = Histogram::from_counts(vec![0.5, 0.5]);
        let js = js_divergence_normalized(&p, &q).unwrap();
        assert!((js - 0.311_278).abs() < 1e-4, "{js}");
        assert!((js - js_divergence_normalized(&q, &p).unwrap()).abs() < 1e-12);
        assert_eq!(js_divergence_normalized(&p, &p).unwrap(), 0.0);
        let r = Histogram::from_counts(vec![0.0, 3.0]);
        assert!((js_divergence_normalized(&p, &r).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jsd_errors() {
        let p = Histogram::from_counts(vec![1.0, 0.0]);
        let q = Histogram::from_counts(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            js_divergence_normalized(&p, &q),
            Err(Error::BinningMismatch)
        ));
        let z = Histogram::from_counts(vec![0.0, 0.0]);
        assert!(matches!(
            js_divergence_normalized(&p, &z),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn jsd_symmetric_and_bounded_on_random_histograms() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let p = Histogram::from_counts((0..16).map(|_| rng.random_range(0.0..5.0)).collect());
            let q = Histogram::from_counts((0..16).map(|_| rng.random_range(0.0..5.0)).collect());
            let a = js_divergence_normalized(&p, &q).unwrap();
            let b = js_divergence_normalized(&q, &p).unwrap();
            assert!((a - b).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&a));
        }
    }

    fn ar_series(phi: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; n + 500];
        for t in phi.len()..x.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[t] = e + phi
                .iter()
                .enumerate()
                .map(|(k, p)| p * x[t - 1 - k])
                .sum::<f64>();
        }
        x.split_off(500)
    }

    #[test]
    fn pacf_of_white_noise_stays_in_band() {
        let xs = ar_series(&[], 10_000, 7);
        let p = pacf(&xs, 20).unwrap();
        assert_eq!(p[0], 1.0);
        let band = 2.0 / (xs.len() as f64).sqrt();
        let inside = p[1..].iter().filter(|v| v.abs() < band).count();
        assert!(inside as f64 >= 0.9 * 20.0);
    }

    #[test]
    fn pacf_of_ar1_cuts_off() {
        let xs = ar_series(&[0.8], 100_000, 8);
        let p = pacf(&xs, 5).unwrap();
        assert!((p[1] - 0.8).abs() < 0.02, "{}", p[1]);
        assert!(p[2..].iter().all(|v| v.abs() < 0.02), "{p:?}");
    }

    #[test]
    fn pacf_of_ar2_cuts_off_after_two() {
        let xs = ar_series(&[0.5, 0.3], 100_000, 9);
        let p = pacf(&xs, 6).unwrap();
        assert!((p[2] - 0.3).abs() < 0.02, "{p:?}");
        assert!(p[3..].iter().all(|v| v.abs() < 0.02), "{p:?}");
    }

    #[test]
    fn pacf_depends_on_order() {
        let mut xs = ar_series(&[0.8], 5_000, 10);
        let before = pacf(&xs, 3).unwrap();
        xs.shuffle(&mut ChaCha8Rng::seed_from_u64(11));
        let after = pacf(&xs, 3).unwrap();
        assert!((before[1] - after[1]).abs() > 0.5);
    }

    #[test]
    fn pacf_errors() {
        assert!(matches!(
            pacf(&[1.0, 2.0, 3.0], 2),
            Err(Error::SeriesTooShort { .. })
        ));
        assert!(matches!(pacf(&[1.0; 50], 3), Err(Error::ZeroVariance)));
    }

    fn field(alive: Vec<bool>) -> GainField {
        GainField {
            time: 0.0,
            ap_id: 0,
            ue_id: 0,
            wall_id: WallId::S1,
            gains: alive.iter().map(|&a| a as u8 as f64).collect(),
            alive,
        }
    }

    #[test]
    fn survival_cases() {
        let all = vec![field(vec![true; 4]), field(vec![true; 4])];
        assert!(survival_field(&all)
            .unwrap()
            .rates
            .iter()
            .all(|&r| r == 1.0));
        let none = vec![field(vec![false; 4]); 3];
        assert!(survival_field(&none)
            .unwrap()
            .rates
            .iter()
            .all(|&r| r == 0.0));
        let half = vec![field(vec![true; 4]), field(vec![false; 4])];
        assert!(survival_field(&half)
            .unwrap()
            .rates
            .iter()
            .all(|&r| r == 0.5));
        assert!(matches!(
            survival_field(&[] as &[GainField]),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn shadow_fraction_extremes() {
        let mut m = TileMask {
            wall_id: WallId::S2,
            rows: 2,
            cols: 2,
            bits: vec![false; 4],
        };
        assert_eq!(shadow_fraction(&m), 0.0);
        m.bits = vec![true; 4];
        assert_eq!(shadow_fraction(&m), 1.0);
    }

    fn stationary_frames(n_frames: usize, seed: u64) -> Vec<Vec<f64>> {
        let amps = nakagami_samples(1.2, 1e-6, n_frames * 1500, seed);
        amps.chunks(1500)
            .map(|c| c.iter().map(|a| a * a).collect())
            .collect()
    }

    #[test]
    fn stationary_stream_has_no_drift() {
        let frames = stationary_frames(400, 12);
        for scale in [BinScale::Linear, BinScale::Log] {
            let cfg = DriftConfig {
                stride: 20,
                bin_scale: scale,
                ..Default::default()
            };
            let r = windowed_drift_report(&frames, &cfg).unwrap();
            assert!(r.max_ksd().unwrap() < 0.05);
            assert!(r.jsd_series.iter().all(|&j| j < 0.05), "{scale:?}");
        }
    }

    #[test]
    fn change_point_spikes_jsd() {
        let mut frames = stationary_frames(100, 13);
        let amps = nakagami_samples(4.0, 5e-6, 100 * 1500, 14);
        frames.extend(
            amps.chunks(1500)
                .map(|c| c.iter().map(|a| a * a).collect::<Vec<_>>()),
        );
        let r = windowed_drift_report(
            &frames,
            &DriftConfig {
                stride: 20,
                ..Default::default()
            },
        )
        .unwrap();
        let (arg, max) =
            r.jsd_series.iter().enumerate().fold(
                (0, 0.0),
                |acc, (i, &j)| if j > acc.1 { (i, j) } else { acc },
            );
        assert_eq!(arg, 4);
        assert!(max > 0.3);
    }

    #[test]
    fn short_stream_is_rejected() {
        let frames = stationary_frames(24, 15);
        assert!(windowed_drift_report(
            &frames,
            &DriftConfig {
                stride: 20,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn report_pacf_on_selected_tile() {
        let frames: Vec<Vec<f64>> = ar_series(&[0.6], 400, 16)
            .iter()
            .map(|&x| vec![x.exp(); 3])
            .collect();
        let cfg = DriftConfig {
            stride: 20,
            pacf_tiles: vec![1],
            pacf_max_lag: 4,
            ..Default::default()
        };
        let r = windowed_drift_report(&frames, &cfg).unwrap();
        assert_eq!(r.pacf.len(), 1);
        assert_eq!(r.pacf[0].values[0], 1.0);
    }
}
