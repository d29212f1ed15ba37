use std::str::FromStr;

use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use super::rng::{pulse_rng, streams};
use super::{map_pulses, Ensemble, Execution, ExperimentConfig};
use crate::error::{Error, Result};

/// Detected-count channel used for post-selection and histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Channel {
    AH,
    AV,
    BH,
    BV,
    BeamA,
    BeamB,
}

impl Channel {
    pub fn count(self, counts: &[u64; 4]) -> u64 {
        match self {
            Channel::AH => counts[0],
            Channel::AV => counts[1],
            Channel::BH => counts[2],
            Channel::BV => counts[3],
            Channel::BeamA => counts[0] + counts[1],
            Channel::BeamB => counts[2] + counts[3],
        }
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ah" => Channel::AH,
            "av" => Channel::AV,
            "bh" => Channel::BH,
            "bv" => Channel::BV,
            "a" | "beam_a" => Channel::BeamA,
            "b" | "beam_b" => Channel::BeamB,
            other => return Err(Error::invalid(format!("unknown channel '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinRule {
    /// One count per bin.
    Unit,
    /// `2 IQR / n^{1/3}` rounded up to a whole number of counts.
    FreedmanDiaconis,
}

/// Integer-valued histogram. Bin `i` covers the counts
/// `start + i w ..= start + (i + 1) w - 1`, i.e. edges sit at half-integers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub start: i64,
    pub width: u64,
    pub counts: Vec<u64>,
    pub total: u64,
    mean: f64,
    var: f64,
}

fn quantile(sorted: &[i64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] as f64 * (1.0 - frac) + sorted[hi] as f64 * frac
}

impl Histogram {
    pub fn from_values(values: &[i64], rule: BinRule) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        let n = values.len() as f64;
        let width = match rule {
            BinRule::Unit => 1,
            BinRule::FreedmanDiaconis => {
                let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
                ((2.0 * iqr / n.cbrt()).ceil() as u64).max(1)
            }
        };
        let start = sorted[0];
        let span = (sorted[sorted.len() - 1] - start) as u64;
        let mut counts = vec![0u64; (span / width + 1) as usize];
        for &v in values {
            counts[((v - start) as u64 / width) as usize] += 1;
        }
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        Ok(Self { start, width, counts, total: values.len() as u64, mean, var })
    }

    pub fn from_counts(values: &[u64], rule: BinRule) -> Result<Self> {
        let signed: Vec<i64> = values.iter().map(|&v| v as i64).collect();
        Self::from_values(&signed, rule)
    }

    pub fn center(&self, bin: usize) -> f64 {
        self.start as f64 + (bin as u64 * self.width) as f64 + 0.5 * (self.width - 1) as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.counts.len()).map(|i| self.start as f64 - 0.5 + (i as u64 * self.width) as f64).collect()
    }

    /// Mean of the raw values.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance of the raw values.
    pub fn variance(&self) -> f64 {
        self.var
    }

    /// Mean and population variance recomputed from the bins.
    pub fn binned_moments(&self) -> (f64, f64) {
        let n = self.total as f64;
        let mean = self.counts.iter().enumerate().map(|(i, &c)| c as f64 * self.center(i)).sum::<f64>() / n;
        let var = self.counts.iter().enumerate().map(|(i, &c)| c as f64 * (self.center(i) - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    }

    fn count_at(&self, bin: isize) -> f64 {
        if bin < 0 || bin as usize >= self.counts.len() {
            0.0
        } else {
            self.counts[bin as usize] as f64
        }
    }

    /// Peak height from a weighted quadratic fit to the log counts of the
    /// bins above half the raw maximum; the raw maximum when fewer than five
    /// such bins exist or the fit has no interior maximum.
    fn peak_height(&self, peak: usize) -> f64 {
        let raw = self.counts[peak] as f64;
        let mut lo = peak;
        while lo > 0 && self.counts[lo - 1] as f64 >= 0.5 * raw {
            lo -= 1;
        }
        let mut hi = peak;
        while hi + 1 < self.counts.len() && self.counts[hi + 1] as f64 >= 0.5 * raw {
            hi += 1;
        }
        if hi - lo + 1 < 5 {
            return raw;
        }
        // normal equations for ln c = p0 + p1 u + p2 u^2, u = bin offset
        let mut a = nalgebra::Matrix3::<f64>::zeros();
        let mut rhs = nalgebra::Vector3::<f64>::zeros();
        for bin in lo..=hi {
            let c = self.counts[bin] as f64;
            let u = bin as f64 - peak as f64;
            let basis = nalgebra::Vector3::new(1.0, u, u * u);
            a += c * basis * basis.transpose();
            rhs += c * c.ln() * basis;
        }
        let Some(p) = a.lu().solve(&rhs) else { return raw };
        if p[2] >= 0.0 {
            return raw;
        }
        let vertex = -p[1] / (2.0 * p[2]);
        if vertex < (lo as f64 - peak as f64) || vertex > (hi as f64 - peak as f64) {
            return raw;
        }
        (p[0] + p[1] * vertex + p[2] * vertex * vertex).exp()
    }

    /// Position (in bin units) where the counts cross `level` between bins
    /// `below` and `above = below +- 1`. Uses a straight-line fit over up to
    /// six bins around the bracket when the distribution is wide, plain
    /// two-point interpolation otherwise.
    fn crossing(&self, below: isize, above: isize, level: f64, wide: bool) -> f64 {
        let (cb, ca) = (self.count_at(below), self.count_at(above));
        let two_point = below as f64 + (level - cb) / (ca - cb) * (above - below) as f64;
        if !wide {
            return two_point;
        }
        let step = above - below;
        let bins: Vec<isize> = (-2..=3).map(|k| below + k * step).filter(|&b| b >= 0 && (b as usize) < self.counts.len()).collect();
        let n = bins.len() as f64;
        let sx: f64 = bins.iter().map(|&b| b as f64).sum();
        let sy: f64 = bins.iter().map(|&b| self.count_at(b)).sum();
        let sxx: f64 = bins.iter().map(|&b| (b as f64).powi(2)).sum();
        let sxy: f64 = bins.iter().map(|&b| b as f64 * self.count_at(b)).sum();
        let det = n * sxx - sx * sx;
        if det <= 0.0 {
            return two_point;
        }
        let slope = (n * sxy - sx * sy) / det;
        let icept = (sy - slope * sx) / n;
        if slope * step as f64 <= 0.0 {
            return two_point;
        }
        let x = (level - icept) / slope;
        let (lo, hi) = ((below - step).min(above + step) as f64, (below - step).max(above + step) as f64);
        if (lo..=hi).contains(&x) {
            x
        } else {
            two_point
        }
    }

    /// Full width at half maximum in counts, from the half-maximum crossings
    /// on either side of the peak. A single occupied bin has a width of one
    /// bin.
    pub fn fwhm(&self) -> Result<f64> {
        if self.total == 0 {
            return Err(Error::UndefinedWidth("empty histogram".into()));
        }
        if self.counts.len() > 1 && self.counts.iter().all(|&c| c == self.counts[0]) {
            return Err(Error::UndefinedWidth("flat histogram".into()));
        }
        let peak = self
            .counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("non-empty");
        let half = 0.5 * self.peak_height(peak);
        let mut left = peak as isize;
        while self.count_at(left) >= half {
            left -= 1;
        }
        let mut right = peak as isize;
        while self.count_at(right) >= half {
            right += 1;
        }
        let wide = right - left >= 8;
        let x_left = self.crossing(left, left + 1, half, wide);
        let x_right = self.crossing(right, right - 1, half, wide);
        Ok((x_right - x_left) * self.width as f64)
    }
}

/// Post-selected histogram with the selection size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conditional {
    pub histogram: Histogram,
    pub selected: usize,
    /// Fewer than 100 pulses passed the selection.
    pub low_count: bool,
}

pub const MIN_SELECTED: usize = 100;

/// Histogram of detected `target` counts over pulses whose detected `herald`
/// count lies in `window` (inclusive).
pub fn conditional_distribution(
    ensemble: &Ensemble,
    target: Channel,
    herald: Channel,
    window: (u64, u64),
    rule: BinRule,
) -> Result<Conditional> {
    if window.0 > window.1 {
        return Err(Error::invalid(format!("empty window {}..={}", window.0, window.1)));
    }
    let values: Vec<u64> = ensemble
        .pulses
        .iter()
        .filter(|p| (window.0..=window.1).contains(&herald.count(&p.detected)))
        .map(|p| target.count(&p.detected))
        .collect();
    if values.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(Conditional { histogram: Histogram::from_counts(&values, rule)?, selected: values.len(), low_count: values.len() < MIN_SELECTED })
}

/// Width ratio of unconditional to conditional photon-number distributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthRatio {
    pub r: f64,
    pub fwhm_unconditional: f64,
    pub fwhm_conditional: f64,
    /// Herald window `center - half_width ..= center + half_width`.
    pub center: u64,
    pub half_width: u64,
    /// Regression slope of target on herald inside the window.
    pub slope: f64,
    pub selected: usize,
    pub low_count: bool,
    /// The numerator came from a simulated shot-noise-limited source.
    pub poisson_reference: bool,
    pub unconditional: Histogram,
    pub conditional: Histogram,
}

/// `FWHM(unconditional) / FWHM(conditional)` of the detected `target`
/// counts.
///
/// The herald window is centered on the mean herald count. Inside it the
/// target counts are shifted by `round(slope (herald - center))`, with the
/// slope regressed from the selected pulses, so a window wider than one
/// count still measures the width at fixed herald number. `half_width`
/// defaults to one standard deviation of the herald. With pump jitter the
/// numerator is the width of a Poissonian source of the same mean.
pub fn measure_r(
    ensemble: &Ensemble,
    cfg: &ExperimentConfig,
    target: Channel,
    herald: Channel,
    half_width: Option<u64>,
    exec: Execution,
) -> Result<WidthRatio> {
    let pairs: Vec<(i64, i64)> = ensemble
        .pulses
        .iter()
        .map(|p| (herald.count(&p.detected) as i64, target.count(&p.detected) as i64))
        .collect();
    if pairs.len() < 3 {
        return Err(Error::TooFewPulses { needed: 3, got: pairs.len() });
    }
    let n = pairs.len() as f64;
    let herald_mean = pairs.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let herald_sd = (pairs.iter().map(|p| (p.0 as f64 - herald_mean).powi(2)).sum::<f64>() / n).sqrt();
    let center = herald_mean.round() as i64;
    let half_width = half_width.unwrap_or(herald_sd.round() as u64);
    let selected: Vec<(i64, i64)> = pairs.iter().copied().filter(|p| (p.0 - center).unsigned_abs() <= half_width).collect();
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    let k = selected.len() as f64;
    let hm = selected.iter().map(|p| p.0 as f64).sum::<f64>() / k;
    let tm = selected.iter().map(|p| p.1 as f64).sum::<f64>() / k;
    let shh: f64 = selected.iter().map(|p| (p.0 as f64 - hm).powi(2)).sum();
    let sht: f64 = selected.iter().map(|p| (p.0 as f64 - hm) * (p.1 as f64 - tm)).sum();
    let slope = if shh > 0.0 { sht / shh } else { 0.0 };
    let corrected: Vec<i64> = selected.iter().map(|&(h, t)| t - (slope * (h - center) as f64).round() as i64).collect();
    let conditional = Histogram::from_values(&corrected, BinRule::FreedmanDiaconis)?;
    let targets: Vec<i64> = pairs.iter().map(|p| p.1).collect();
    let unconditional = Histogram::from_values(&targets, BinRule::FreedmanDiaconis)?;
    let poisson_reference = cfg.pump_jitter > 0.0;
    let fwhm_unconditional = if poisson_reference {
        let mean = unconditional.mean();
        let reference = if mean > 0.0 {
            let dist = Poisson::new(mean).map_err(|e| Error::invalid(e.to_string()))?;
            map_pulses(pairs.len(), exec, |i| dist.sample(&mut pulse_rng(cfg.seed, streams::POISSON_REFERENCE, i)) as i64)
        } else {
            vec![0; pairs.len()]
        };
        Histogram::from_values(&reference, BinRule::FreedmanDiaconis)?.fwhm()?
    } else {
        unconditional.fwhm()?
    };
    let fwhm_conditional = conditional.fwhm()?;
    Ok(WidthRatio {
        r: fwhm_unconditional / fwhm_conditional,
        fwhm_unconditional,
        fwhm_conditional,
        center: center.max(0) as u64,
        half_width,
        slope,
        selected: selected.len(),
        low_count: selected.len() < MIN_SELECTED,
        poisson_reference,
        unconditional,
        conditional,
    })
}
