//! Post-processing of trajectories: amplitude, spectra, oscillation frequency,
//! phase-II decay exponent and a trajectory-based phase label.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::lax::Phase;

pub use crate::dynamics::differential_inversion;

/// Fractional sub-range `[start, end)` of a record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub const LAST_HALF: Window = Window { start: 0.5, end: 1.0 };
    pub const LAST_QUARTER: Window = Window { start: 0.75, end: 1.0 };
    pub const ALL: Window = Window { start: 0.0, end: 1.0 };

    pub fn range(&self, len: usize) -> Result<std::ops::Range<usize>> {
        if !(0.0 <= self.start && self.start < self.end && self.end <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "bad window [{}, {})",
                self.start, self.end
            )));
        }
        let a = (self.start * len as f64).floor() as usize;
        let b = ((self.end * len as f64).ceil() as usize).min(len);
        if b <= a {
            return Err(Error::InvalidInput("empty window".into()));
        }
        Ok(a..b)
    }
}

impl Default for Window {
    fn default() -> Self {
        Window::LAST_HALF
    }
}

/// `𝒜 = max|Δ| − min|Δ|` over the window.
pub fn amplitude(abs_delta: &[f64], window: Window) -> Result<f64> {
    let slice = &abs_delta[window.range(abs_delta.len())?];
    let (lo, hi) = min_max(slice);
    Ok(hi - lo)
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

/// Smallest distance from the origin of the piecewise-linear path through
/// the samples; resolves near-zeros of `|Δ|` that fall between samples.
pub fn min_abs_interpolated(series: &[Complex64]) -> f64 {
    if series.len() == 1 {
        return series[0].norm();
    }
    series
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let d = b - a;
            let len2 = d.norm_sqr();
            if len2 == 0.0 {
                return a.norm();
            }
            let s = (-(a.re * d.re + a.im * d.im) / len2).clamp(0.0, 1.0);
            (a + s * d).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumOptions {
    /// Remove the window-weighted mean so the zero-frequency bin vanishes.
    pub subtract_mean: bool,
    /// Peaks need prominence at least this fraction of the largest magnitude.
    pub min_prominence: f64,
    /// Peaks need an estimated tone amplitude at least this large (series units).
    pub min_amplitude: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            subtract_mean: true,
            min_prominence: 0.1,
            min_amplitude: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Angular frequency, refined by parabolic interpolation.
    pub frequency: f64,
    pub height: f64,
    pub prominence: f64,
    /// Full width at half prominence, angular frequency.
    pub width: f64,
    /// Estimated amplitude of the underlying tone.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Angular frequencies, ascending.
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Sorted by height, largest first.
    pub peaks: Vec<Peak>,
    pub window: String,
    pub n: usize,
    pub dt: f64,
    pub mean_removed: bool,
    /// True for complex input: negative frequencies are kept.
    pub two_sided: bool,
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect()
}

const MIN_SAMPLES: usize = 16;

/// Hann-windowed DFT of a uniformly sampled series.
fn windowed_dft(series: &[Complex64], subtract_mean: bool) -> (Vec<Complex64>, f64) {
    let n = series.len();
    let w = hann(n);
    let wsum: f64 = w.iter().sum();
    let mean = if subtract_mean {
        series.iter().zip(&w).map(|(x, wi)| x * wi).sum::<Complex64>() / wsum
    } else {
        Complex64::new(0.0, 0.0)
    };
    let mut buf: Vec<Complex64> = series.iter().zip(&w).map(|(x, wi)| (x - mean) * wi).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (buf, wsum)
}

fn check_input(n: usize, dt: f64) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "series has {n} samples, need at least {MIN_SAMPLES}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
    }
    Ok(())
}

/// One-sided magnitude spectrum of a real series.
pub fn spectrum(series: &[f64], dt: f64, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    check_input(series.len(), dt)?;
    let n = series.len();
    let z: Vec<Complex64> = series.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let (x, wsum) = windowed_dft(&z, opts.subtract_mean);
    let dw = 2.0 * PI / (n as f64 * dt);
    let half = n / 2;
    let frequencies = (0..=half).map(|k| k as f64 * dw).collect();
    let magnitudes: Vec<f64> = x[..=half].iter().map(|c| c.norm()).collect();
    let peaks = find_peaks(&magnitudes, 0.0, dw, 2.0 / wsum, opts);
    Ok(SpectrumResult {
        frequencies,
        magnitudes,
        peaks,
        window: "hann".into(),
        n,
        dt,
        mean_removed: opts.subtract_mean,
        two_sided: false,
    })
}

/// Two-sided magnitude spectrum of a complex series, frequencies ascending
/// from `−π/dt`.
pub fn spectrum_complex(series: &[Complex64], dt: f64, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    check_input(series.len(), dt)?;
    let n = series.len();
    let (x, wsum) = windowed_dft(series, opts.subtract_mean);
    let dw = 2.0 * PI / (n as f64 * dt);
    // reorder bins so that frequency increases: k = −⌊n/2⌋ … ⌈n/2⌉−1
    let neg = n / 2;
    let order: Vec<usize> = (0..n).map(|i| (i + n - neg) % n).collect();
    let magnitudes: Vec<f64> = order.iter().map(|&k| x[k].norm()).collect();
    let f0 = -(neg as f64) * dw;
    let frequencies = (0..n).map(|i| f0 + i as f64 * dw).collect();
    let peaks = find_peaks(&magnitudes, f0, dw, 1.0 / wsum, opts);
    Ok(SpectrumResult {
        frequencies,
        magnitudes,
        peaks,
        window: "hann".into(),
        n,
        dt,
        mean_removed: opts.subtract_mean,
        two_sided: true,
    })
}

/// Local maxima with prominence filtering; frequencies on the grid
/// `f0 + k·dw`, tone amplitude = `height · amp_scale`.
fn find_peaks(m: &[f64], f0: f64, dw: f64, amp_scale: f64, opts: &SpectrumOptions) -> Vec<Peak> {
    let n = m.len();
    let top = m.iter().copied().fold(0.0, f64::max);
    if top == 0.0 || n < 3 {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    for k in 1..n - 1 {
        if !(m[k] > m[k - 1] && m[k] >= m[k + 1]) {
            continue;
        }
        // walk out to the nearest higher sample (or the edge) on each side
        let mut left_min = m[k];
        let mut i = k;
        while i > 0 && m[i - 1] <= m[k] {
            i -= 1;
            left_min = left_min.min(m[i]);
        }
        let mut right_min = m[k];
        let mut j = k;
        while j + 1 < n && m[j + 1] <= m[k] {
            j += 1;
            right_min = right_min.min(m[j]);
        }
        let prominence = m[k] - left_min.max(right_min);
        let amplitude = m[k] * amp_scale;
        if prominence < opts.min_prominence * top || amplitude < opts.min_amplitude {
            continue;
        }
        let half = m[k] - 0.5 * prominence;
        let cross = |mut idx: usize, step: isize| -> f64 {
            loop {
                let next = idx as isize + step;
                if next < 0 || next as usize >= n {
                    return idx as f64;
                }
                let next = next as usize;
                if m[next] <= half {
                    let frac = (m[idx] - half) / (m[idx] - m[next]);
                    return idx as f64 + step as f64 * frac;
                }
                idx = next;
            }
        };
        let width = (cross(k, 1) - cross(k, -1)) * dw;
        let denom = m[k - 1] - 2.0 * m[k] + m[k + 1];
        let shift = if denom != 0.0 {
            (0.5 * (m[k - 1] - m[k + 1]) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        peaks.push(Peak {
            frequency: f0 + (k as f64 + shift) * dw,
            height: m[k],
            prominence,
            width,
            amplitude,
        });
    }
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height));
    peaks
}

/// Relative tone amplitude (to the series mean) below which `|Δ|` is
/// considered free of oscillations.
pub const OMEGA_MIN_RELATIVE_AMPLITUDE: f64 = 1e-3;

/// Angular frequency of the dominant oscillation of `|Δ|` (or `|a|²`) in
/// the window. `None` when nothing stands out.
pub fn extract_omega_osc(abs_series: &[f64], dt: f64, window: Window) -> Result<Option<f64>> {
    let slice = &abs_series[window.range(abs_series.len())?];
    let mean = slice.iter().sum::<f64>() / slice.len() as f64;
    let opts = SpectrumOptions {
        subtract_mean: true,
        min_prominence: 0.1,
        min_amplitude: OMEGA_MIN_RELATIVE_AMPLITUDE * mean.abs(),
    };
    let spec = spectrum(slice, dt, &opts)?;
    Ok(spec.peaks.first().map(|p| p.frequency))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryThresholds {
    pub tol_i: f64,
    pub tol_ii: f64,
    pub tol_zero: f64,
    /// A small swing counts as II only if its envelope decays faster than
    /// `t^decay_max` over the last half of the run.
    pub decay_max: f64,
}

impl Default for TrajectoryThresholds {
    fn default() -> Self {
        TrajectoryThresholds {
            tol_i: 0.05,
            tol_ii: 0.1,
            tol_zero: 0.02,
            decay_max: -0.2,
        }
    }
}

/// Scale that `mean |Δ|` is compared against for phase I.
///
/// `max(|Δ(0)|, χN|cos(Δφ₀/2)|)`, falling back to `χN` when both vanish.
pub fn reference_scale(chi_n: f64, delta0: f64, angle: Option<f64>) -> f64 {
    let from_angle = angle.map_or(0.0, |a| chi_n * (0.5 * a).cos().abs());
    let r = delta0.max(from_angle);
    if r <= 1e-12 * chi_n {
        chi_n
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetrics {
    /// `max|Δ| − min|Δ|` over the steady window.
    pub amplitude: f64,
    pub mean_abs: f64,
    pub min_abs: f64,
    pub max_abs: f64,
    pub reference: f64,
    pub omega_osc: Option<f64>,
    pub jz_max: f64,
    pub decay_exponent: Option<f64>,
}

/// Phase assignment with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLabel {
    pub phase: Phase,
    pub provenance: Provenance,
    pub detail: PhaseDetail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Lax,
    Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseDetail {
    Roots(crate::lax::LaxRootSet),
    Trajectory(TrajectoryMetrics),
}

impl PhaseLabel {
    pub fn from_roots(roots: crate::lax::LaxRootSet, subphase_tol: f64) -> Self {
        PhaseLabel {
            phase: crate::lax::classify_from_roots(&roots, subphase_tol),
            provenance: Provenance::Lax,
            detail: PhaseDetail::Roots(roots),
        }
    }
}

/// Label from the last quarter of `|Δ(t)|`: I if its mean is below
/// `tol_i·reference`, II if the relative swing is below `tol_ii`, otherwise
/// III, split by whether `min|Δ|` drops below `tol_zero·max|Δ|`.
pub fn classify_trajectory(
    traj: &Trajectory,
    chi_n: f64,
    angle: Option<f64>,
    thresholds: &TrajectoryThresholds,
) -> Result<PhaseLabel> {
    let n = traj.len();
    if n < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!("trajectory has {n} samples")));
    }
    let duration = traj.times[n - 1] - traj.times[0];
    if duration * chi_n < 100.0 - 1e-9 {
        return Err(Error::InvalidInput(format!(
            "trajectory spans {:.3}/(χN), need at least 100/(χN)",
            duration * chi_n
        )));
    }
    let abs = traj.abs_delta();
    let range = Window::LAST_QUARTER.range(n)?;
    let tail = &abs[range.clone()];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let (_, max_abs) = min_max(tail);
    let min_abs = min_abs_interpolated(&traj.delta[range.clone()]);
    let reference = reference_scale(chi_n, abs[0], angle);
    let dt = traj.sample_dt();
    let t0 = traj.times[0];
    let rel: Vec<f64> = traj.times.iter().map(|t| t - t0).collect();
    let exponent = decay_exponent(&rel, &abs, 0.5 * duration, duration);
    let metrics = TrajectoryMetrics {
        amplitude: max_abs - min_abs,
        mean_abs: mean,
        min_abs,
        max_abs,
        reference,
        omega_osc: extract_omega_osc(&abs, dt, Window::LAST_QUARTER)?,
        jz_max: traj.jz.iter().map(|j| j.abs()).fold(0.0, f64::max),
        decay_exponent: exponent,
    };
    let phase = if mean < thresholds.tol_i * reference {
        Phase::I
    } else if (max_abs - min_abs) / mean < thresholds.tol_ii && exponent.is_none_or(|p| p < thresholds.decay_max) {
        Phase::II
    } else if min_abs < thresholds.tol_zero * max_abs {
        Phase::IIIb
    } else {
        Phase::IIIa
    };
    Ok(PhaseLabel {
        phase,
        provenance: Provenance::Trajectory,
        detail: PhaseDetail::Trajectory(metrics),
    })
}

/// Power-law exponent of the oscillation envelope of `|Δ|` between `t_from`
/// and `t_to`.
///
/// The envelope is half the difference of consecutive local extrema, so a
/// constant offset `Δ∞` drops out. Returns `None` with fewer than four
/// half-cycles in range.
pub fn decay_exponent(times: &[f64], abs_delta: &[f64], t_from: f64, t_to: f64) -> Option<f64> {
    let mut extrema: Vec<(f64, f64)> = Vec::new();
    for k in 1..abs_delta.len().saturating_sub(1) {
        let (a, b, c) = (abs_delta[k - 1], abs_delta[k], abs_delta[k + 1]);
        if (b > a && b >= c) || (b < a && b <= c) {
            // parabolic vertex through the three samples
            let denom = a - 2.0 * b + c;
            let (shift, value) = if denom != 0.0 {
                let s = 0.5 * (a - c) / denom;
                (s, b - 0.25 * (a - c) * s)
            } else {
                (0.0, b)
            };
            let dt = times[k + 1] - times[k];
            extrema.push((times[k] + shift * dt, value));
        }
    }
    let points: Vec<(f64, f64)> = extrema
        .windows(2)
        .map(|w| (0.5 * (w[0].0 + w[1].0), 0.5 * (w[1].1 - w[0].1).abs()))
        .filter(|(t, env)| *t >= t_from && *t <= t_to && *env > 0.0 && *t > 0.0)
        .map(|(t, env)| (t.ln(), env.ln()))
        .collect();
    if points.len() < 4 {
        return None;
    }
    Some(linear_fit_slope(&points))
}

/// Late-time `𝒜` from `max − min` over consecutive windows of length `span`
/// starting at `t_start`, extrapolated along `𝒜(t) = 𝒜∞ + c/√t` with `t`
/// the window start.
pub fn asymptotic_amplitude(times: &[f64], abs_delta: &[f64], t_start: f64, span: f64) -> Result<f64> {
    if times.len() != abs_delta.len() || !(span > 0.0) || !(t_start > 0.0) {
        return Err(Error::InvalidInput(
            "asymptotic_amplitude needs matching series, t_start > 0 and span > 0".into(),
        ));
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    let mut points = Vec::new();
    let mut a = t_start;
    while a + span <= t_end + 1e-9 {
        let (lo, hi) = min_max(
            &times
                .iter()
                .zip(abs_delta)
                .filter(|(t, _)| **t >= a && **t <= a + span)
                .map(|(_, x)| *x)
                .collect::<Vec<_>>(),
        );
        if hi >= lo {
            points.push((a.powf(-0.5), hi - lo));
        }
        a += span;
    }
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "asymptotic_amplitude needs 3 windows, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    Ok(my - linear_fit_slope(&points) * mx)
}

/// Least-squares slope of `y` against `x`.
pub fn linear_fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    linear_fit_slope(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymptotic_amplitude_removes_root_t_tail() {
        let times: Vec<f64> = (0..=40_000).map(|k| k as f64 * 0.05).collect();
        let abs: Vec<f64> = times
            .iter()
            .map(|t| 1.0 + 0.5 * (0.05 + 0.3 / t.max(1.0).sqrt()) * (1.0 + (2.0 * PI * t / 3.0).cos()))
            .collect();
        let a = asymptotic_amplitude(&times, &abs, 200.0, 100.0).unwrap();
        assert!((a / 0.05 - 1.0).abs() < 0.02, "{a}");
        assert!(amplitude(&abs, Window::LAST_QUARTER).unwrap() > 0.055);
        assert!(asymptotic_amplitude(&times, &abs, 1900.0, 100.0).is_err());
    }
    use crate::lax::{analytic_roots_antipodal, EllipticSolution, SUBPHASE_TOL};
    use crate::model::SpinState;
    use proptest::prelude::*;

    fn tone(n: usize, dt: f64, omega: f64, amp: f64) -> Vec<Complex64> {
        (0..n)
            .map(|k| Complex64::from_polar(amp, omega * k as f64 * dt))
            .collect()
    }

    #[test]
    fn amplitude_of_constant_is_zero() {
        assert_eq!(amplitude(&[0.3; 50], Window::default()).unwrap(), 0.0);
        assert!(amplitude(&[], Window::default()).is_err());
    }

    #[test]
    fn amplitude_is_shift_invariant_for_periodic_signal() {
        let sol = EllipticSolution::from_roots(&analytic_roots_antipodal(1.0, 0.1, 0.5), SUBPHASE_TOL).unwrap();
        let period = sol.abs_period();
        let n_per = 400;
        let dt = period / n_per as f64;
        let series = |shift: f64| -> Vec<f64> { (0..20 * n_per).map(|k| sol.eval(shift + k as f64 * dt)).collect() };
        let a0 = amplitude(&series(0.0), Window::LAST_HALF).unwrap();
        let a1 = amplitude(&series(period), Window::LAST_HALF).unwrap();
        assert!((a0 - a1).abs() < 1e-12);
        assert!((a0 - sol.amplitude()).abs() < 1e-4 * sol.amplitude());
    }

    #[test]
    fn single_complex_tone() {
        let (n, dt) = (1024, 0.1);
        let omega = 2.0 * PI / (n as f64 * dt) * 37.3;
        let s = spectrum_complex(&tone(n, dt, omega, 1.0), dt, &SpectrumOptions::default()).unwrap();
        assert!(s.frequencies.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(s.peaks.len(), 1);
        let bin = 2.0 * PI / (n as f64 * dt);
        assert!((s.peaks[0].frequency - omega).abs() < bin);
        assert!((s.peaks[0].amplitude - 1.0).abs() < 0.2);

        let neg = spectrum_complex(&tone(n, dt, -omega, 1.0), dt, &SpectrumOptions::default()).unwrap();
        assert!((neg.peaks[0].frequency + omega).abs() < bin);
    }

    #[test]
    fn two_equal_tones() {
        let (n, dt) = (2048, 0.05);
        let bin = 2.0 * PI / (n as f64 * dt);
        let (w1, w2) = (40.0 * bin, 113.0 * bin);
        let x: Vec<f64> = (0..n)
            .map(|k| (w1 * k as f64 * dt).cos() + (w2 * k as f64 * dt).cos())
            .collect();
        let s = spectrum(&x, dt, &SpectrumOptions::default()).unwrap();
        assert!(s.frequencies.iter().all(|f| *f >= 0.0));
        assert_eq!(s.peaks.len(), 2);
        let (h0, h1) = (s.peaks[0].height, s.peaks[1].height);
        assert!((h0 - h1).abs() < 0.1 * h0);
        let mut found: Vec<f64> = s.peaks.iter().map(|p| p.frequency).collect();
        found.sort_by(f64::total_cmp);
        assert!((found[0] - w1).abs() < bin && (found[1] - w2).abs() < bin);
        assert!((s.peaks[0].amplitude - 1.0).abs() < 1e-9);
    }

    #[test]
    fn parseval_holds_for_windowed_transform() {
        let n = 500;
        let x: Vec<Complex64> = (0..n)
            .map(|k| {
                Complex64::new(
                    (0.37 * k as f64).sin() + 0.1 * k as f64 / n as f64,
                    (0.11 * k as f64).cos(),
                )
            })
            .collect();
        for subtract in [false, true] {
            let (spec, _) = windowed_dft(&x, subtract);
            let w = hann(n);
            let mean = if subtract {
                x.iter().zip(&w).map(|(a, b)| a * b).sum::<Complex64>() / w.iter().sum::<f64>()
            } else {
                Complex64::new(0.0, 0.0)
            };
            let time: f64 = x.iter().zip(&w).map(|(a, b)| ((a - mean) * b).norm_sqr()).sum();
            let freq: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
            assert!((time - freq).abs() < 1e-10 * time);
        }
        // one-sided magnitudes of a real series: double all but DC and Nyquist
        let real: Vec<f64> = x.iter().map(|c| c.re).collect();
        let opts = SpectrumOptions {
            subtract_mean: false,
            ..Default::default()
        };
        let s = spectrum(&real, 1.0, &opts).unwrap();
        let w = hann(n);
        let time: f64 = real.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum();
        let last = s.magnitudes.len() - 1;
        let freq: f64 = s
            .magnitudes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                if k == 0 || (k == last && n % 2 == 0) {
                    m * m
                } else {
                    2.0 * m * m
                }
            })
            .sum::<f64>()
            / n as f64;
        assert!((time - freq).abs() < 1e-10 * time);
    }

    #[test]
    fn spectrum_rejects_short_series() {
        assert!(spectrum(&[1.0; 15], 0.1, &SpectrumOptions::default()).is_err());
        assert!(spectrum(&[1.0; 16], 0.1, &SpectrumOptions::default()).is_ok());
    }

    #[test]
    fn omega_osc_of_elliptic_curve() {
        let sol = EllipticSolution::from_roots(&analytic_roots_antipodal(1.0, 0.1, 0.5), SUBPHASE_TOL).unwrap();
        let dt = 0.02;
        let n = 16384;
        let series: Vec<f64> = (0..n).map(|k| sol.eval(k as f64 * dt)).collect();
        let omega = extract_omega_osc(&series, dt, Window::ALL).unwrap().unwrap();
        let bin = 2.0 * PI / (n as f64 * dt);
        assert!((omega - sol.omega_osc()).abs() < bin, "{omega} vs {}", sol.omega_osc());
        assert!((sol.omega_osc() - PI * sol.r_tilde.sqrt() / sol.quarter_period).abs() < 1e-12);
    }

    #[test]
    fn omega_osc_absent_for_constant() {
        let x = vec![0.4; 1000];
        assert_eq!(extract_omega_osc(&x, 0.1, Window::ALL).unwrap(), None);
    }

    #[test]
    fn interpolated_minimum_catches_crossing() {
        let z = vec![Complex64::new(-1.0, 0.1), Complex64::new(1.0, 0.1)];
        assert!((min_abs_interpolated(&z) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn jz_extreme_configuration() {
        let mut s = SpinState::new(vec![[0.0, 0.0, 1.0]; 10], vec![0.0; 10]).unwrap();
        for v in &mut s.sigma[5..] {
            v[2] = -1.0;
        }
        assert_eq!(differential_inversion(&s), 5.0);
    }

    #[test]
    fn decay_exponent_of_synthetic_power_law() {
        let dt = 0.01;
        let t: Vec<f64> = (1..40000).map(|k| k as f64 * dt).collect();
        let x: Vec<f64> = t.iter().map(|t| 0.7 + t.powf(-0.5) * (2.0 * t).cos()).collect();
        let p = decay_exponent(&t, &x, 20.0, 390.0).unwrap();
        assert!((p + 0.5).abs() < 0.01, "{p}");
    }

    #[test]
    fn log_log_slope_of_power() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.5)).collect();
        assert!((log_log_slope(&xs, &ys) - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn peaks_sorted_and_frequencies_ascending(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = spectrum(&x, 0.1, &SpectrumOptions::default()).unwrap();
            prop_assert!(s.frequencies.windows(2).all(|w| w[1] > w[0]));
            prop_assert!(s.peaks.windows(2).all(|w| w[0].height >= w[1].height));
        }
    }
}
