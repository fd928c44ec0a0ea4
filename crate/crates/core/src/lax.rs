//! Lax-vector analysis of the continuum two-ensemble model.
//!
//! `L(u) = ½ Σⱼ σ⃗ⱼ/(u − εⱼ) − ẑ/χ` is conserved by the attractive-sign
//! dynamics. The complex roots of `Q(u) = χ² L·L` fix the asymptotic phase:
//! no pair is phase I, one pair phase II, two (or more) pairs phase III. `Q` is even in
//! `u` and real on the real axis, so roots come as `u`, `ū`, `−u`, `−ū`; only
//! upper-half-plane representatives are stored.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, SpinState};
use crate::special::{atanh_over_z, elliptic_k, jacobi_sn};

type C = Complex64;

/// Initial-state family of the two ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Opening angle `Δφ₀` in the equatorial plane.
    Azimuthal,
    /// Opening angle `Δθ₀` out of the plane.
    Elevation,
}

/// One point of the continuum model: two uniform bands of `N` spins each,
/// centred at `±ε₀/2` with half-width `W/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaxProblem {
    pub chi_n: f64,
    pub eps0: f64,
    pub w: f64,
    pub family: Family,
    pub angle: f64,
}

impl LaxProblem {
    pub fn new(chi_n: f64, eps0: f64, w: f64, family: Family, angle: f64) -> Self {
        LaxProblem {
            chi_n,
            eps0,
            w,
            family,
            angle,
        }
    }

    pub fn from_params(params: &ModelParams, family: Family, angle: f64) -> Self {
        Self::new(params.chi_n(), params.eps0, params.w, family, angle)
    }

    pub fn with_w(self, w: f64) -> Self {
        LaxProblem { w, ..self }
    }

    /// Natural magnitude of roots and of `u` where `Q` is nontrivial.
    pub fn scale(&self) -> f64 {
        self.chi_n + self.eps0 + self.w
    }

    fn check_cut(&self, u: C) -> Result<()> {
        let tol = 1e-12 * self.w.max(self.chi_n);
        let h = 0.25 * self.w;
        for c in [0.5 * self.eps0, -0.5 * self.eps0] {
            let dx = (u.re - c).abs() - h;
            let dist = if dx > 0.0 { dx.hypot(u.im) } else { u.im.abs() };
            if dist < tol {
                return Err(Error::domain(
                    "lax_components_continuum",
                    format!("u = {u} lies on the support [{}, {}]", c - h, c + h),
                ));
            }
        }
        Ok(())
    }

    /// Band functions `g±(u) = (χN/2)·(1/(2h))·ln((u−c+h)/(u−c−h))` and
    /// their derivatives.
    fn bands(&self, u: C) -> Result<[(C, C); 2]> {
        self.check_cut(u)?;
        let h = 0.25 * self.w;
        let half = 0.5 * self.chi_n;
        let band = |c: f64| -> Result<(C, C)> {
            let x = u - c;
            let g = half * atanh_over_z(h / x)? / x;
            let dg = -half / ((x + h) * (x - h));
            Ok((g, dg))
        };
        Ok([band(0.5 * self.eps0)?, band(-0.5 * self.eps0)?])
    }

    /// `χL(u)` and its derivative.
    pub fn components_with_derivative(&self, u: C) -> Result<([C; 3], [C; 3])> {
        let [(gp, dgp), (gm, dgm)] = self.bands(u)?;
        let (s, c) = (0.5 * self.angle).sin_cos();
        let zero = C::new(0.0, 0.0);
        Ok(match self.family {
            Family::Azimuthal => (
                [c * (gp + gm), s * (gp - gm), C::new(-1.0, 0.0)],
                [c * (dgp + dgm), s * (dgp - dgm), zero],
            ),
            Family::Elevation => (
                [c * (gp + gm), zero, -1.0 + s * (gp - gm)],
                [c * (dgp + dgm), zero, s * (dgp - dgm)],
            ),
        })
    }

    pub fn components(&self, u: C) -> Result<[C; 3]> {
        Ok(self.components_with_derivative(u)?.0)
    }

    pub fn q(&self, u: C) -> Result<C> {
        let l = self.components(u)?;
        Ok(l[0] * l[0] + l[1] * l[1] + l[2] * l[2])
    }

    /// `Q`, `dQ/du` and `Σ|χLₐ|²` (the residual scale).
    fn q_with_derivative(&self, u: C) -> Result<(C, C, f64)> {
        let (l, dl) = self.components_with_derivative(u)?;
        let q = l[0] * l[0] + l[1] * l[1] + l[2] * l[2];
        let dq = 2.0 * (l[0] * dl[0] + l[1] * dl[1] + l[2] * dl[2]);
        let scale = l.iter().map(|x| x.norm_sqr()).sum();
        Ok((q, dq, scale))
    }
}

/// Continuum `(χLx, χLy, χLz)` at complex `u` off the support.
pub fn lax_components_continuum(u: C, problem: &LaxProblem) -> Result<[C; 3]> {
    problem.components(u)
}

/// `Q(u) = (χLx)² + (χLy)² + (χLz)²`; tends to 1 at infinity.
pub fn lax_squared(u: C, problem: &LaxProblem) -> Result<C> {
    problem.q(u)
}

/// `χL(u)` of a finite, homogeneously coupled spin configuration.
pub fn discrete_lax(u: C, state: &SpinState, chi: f64) -> [C; 3] {
    let mut l = [C::new(0.0, 0.0); 3];
    for (s, e) in state.sigma.iter().zip(&state.eps) {
        let w = 0.5 * chi / (u - e);
        for a in 0..3 {
            l[a] += w * s[a];
        }
    }
    l[2] -= 1.0;
    l
}

pub fn discrete_lax_squared(u: C, state: &SpinState, chi: f64) -> C {
    let l = discrete_lax(u, state, chi);
    l[0] * l[0] + l[1] * l[1] + l[2] * l[2]
}

/// Upper-half-plane representatives of the conjugate root pairs of `Q`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LaxRootSet {
    pub roots: Vec<C>,
}

impl LaxRootSet {
    pub fn new(mut roots: Vec<C>) -> Self {
        for r in &mut roots {
            if r.im < 0.0 {
                *r = r.conj();
            }
        }
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        LaxRootSet { roots }
    }

    pub fn empty() -> Self {
        LaxRootSet::default()
    }

    pub fn n_pairs(&self) -> usize {
        self.roots.len()
    }

    /// Every root, conjugates included.
    pub fn all_roots(&self) -> Vec<C> {
        self.roots.iter().flat_map(|r| [*r, r.conj()]).collect()
    }

    /// The two pairs entering `R±` and `R̃`. With more than two pairs (found
    /// where the bands overlap) the two farthest from the real axis are used.
    fn two(&self) -> Option<(C, C)> {
        if self.roots.len() < 2 {
            return None;
        }
        let mut by_im = self.roots.clone();
        by_im.sort_by(|a, b| b.im.total_cmp(&a.im).then(a.re.total_cmp(&b.re)));
        Some((by_im[0], by_im[1]))
    }

    /// `R₊ = (|u₁ᵢ| + |u₂ᵢ|)²`
    pub fn r_plus(&self) -> Option<f64> {
        self.two().map(|(a, b)| (a.im.abs() + b.im.abs()).powi(2))
    }

    /// `R₋ = (|u₁ᵢ| − |u₂ᵢ|)²`
    pub fn r_minus(&self) -> Option<f64> {
        self.two().map(|(a, b)| (a.im.abs() - b.im.abs()).powi(2))
    }

    /// `R̃ = (u₁ᵣ − u₂ᵣ)²`
    pub fn r_tilde(&self) -> Option<f64> {
        self.two().map(|(a, b)| (a.re - b.re).powi(2))
    }

    pub fn r_minus_over_r_plus(&self) -> Option<f64> {
        match (self.r_minus(), self.r_plus()) {
            (Some(m), Some(p)) if p > 0.0 => Some(m / p),
            _ => None,
        }
    }
}

/// Keeps roots with `Im u > min_im`, mapped to the upper half plane.
fn upper_roots(candidates: impl IntoIterator<Item = C>, min_im: f64) -> LaxRootSet {
    LaxRootSet::new(candidates.into_iter().filter(|r| r.im > min_im).collect())
}

const ANALYTIC_IMAG_TOL: f64 = 1e-12;

/// Closed-form roots for the antipodal azimuthal state (`Δφ₀ = π`):
/// `u = ±¼√((A² − e^{∓iW/χN}B²)/(1 − e^{∓iW/χN}))`, `A = W − 2ε₀`,
/// `B = W + 2ε₀`. They exist only for `W/(χN) < π`.
pub fn analytic_roots_antipodal(chi_n: f64, eps0: f64, w: f64) -> LaxRootSet {
    if w / chi_n >= PI {
        return LaxRootSet::empty();
    }
    if w == 0.0 {
        return analytic_roots_small_w(chi_n, eps0, Family::Azimuthal, PI).unwrap_or_default();
    }
    let a2 = (w - 2.0 * eps0).powi(2);
    let b2 = (w + 2.0 * eps0).powi(2);
    let theta = w / chi_n;
    let mut out = Vec::with_capacity(4);
    for sign in [-1.0, 1.0] {
        let phase = C::from_polar(1.0, sign * theta);
        // 1 − e^{iφ} without cancellation at small φ
        let denom = C::new(2.0 * (0.5 * theta).sin().powi(2), -sign * theta.sin());
        let r = 0.25 * ((a2 - phase * b2) / denom).sqrt();
        out.extend([r, -r]);
    }
    upper_roots(out, ANALYTIC_IMAG_TOL * chi_n)
}

/// Lowest-order roots in the inhomogeneity `W` for either family.
///
/// Azimuthal: `u = ±½√(ε₀² − χ²N²(1 + cos Δφ₀) ± (χN/√2)√(χ²N²(3 + 4cos Δφ₀ + cos 2Δφ₀) − 8ε₀²))`.
/// Elevation: `u = ∓¼√(4ε₀² − 2χ²N² − 2χN(χN cos Δθ₀ − 4ε₀ sin(Δθ₀/2))) ± (iχN/2)cos(Δθ₀/2)`.
pub fn analytic_roots_small_w(chi_n: f64, eps0: f64, family: Family, angle: f64) -> Result<LaxRootSet> {
    let l = chi_n;
    let min_im = ANALYTIC_IMAG_TOL * chi_n;
    match family {
        Family::Azimuthal => {
            let inner = C::new(
                l * l * (3.0 + 4.0 * angle.cos() + (2.0 * angle).cos()) - 8.0 * eps0 * eps0,
                0.0,
            )
            .sqrt();
            let base = eps0 * eps0 - l * l * (1.0 + angle.cos());
            let mut out = Vec::with_capacity(4);
            for s in [1.0, -1.0] {
                let r = 0.5 * (base + s * l * FRAC_1_SQRT_2 * inner).sqrt();
                out.extend([r, -r]);
            }
            Ok(upper_roots(out, min_im))
        }
        Family::Elevation => {
            if (angle.abs() - PI).abs() < 1e-12 {
                return Err(Error::InvalidInput(
                    "elevation family at |Δθ₀| = π is the trivial fully polarized case".into(),
                ));
            }
            let d = C::new(
                4.0 * eps0 * eps0 - 2.0 * l * l - 2.0 * l * (l * angle.cos() - 4.0 * eps0 * (0.5 * angle).sin()),
                0.0,
            )
            .sqrt();
            let im = C::new(0.0, 0.5 * l * (0.5 * angle).cos());
            let out = [-0.25 * d + im, 0.25 * d + im, -0.25 * d - im, 0.25 * d - im];
            Ok(upper_roots(out, min_im))
        }
    }
}

/// Single pair for `ε₀ ≪ W, χN`: `u = ±(iW/4)·cot[(W/4χN)·sec(angle/2)]`,
/// present while `W/(χN) < 2π cos(angle/2)`. Same form for both families.
pub fn analytic_roots_small_eps(chi_n: f64, w: f64, angle: f64) -> LaxRootSet {
    let c = (0.5 * angle).cos().abs();
    if w / chi_n >= 2.0 * PI * c {
        return LaxRootSet::empty();
    }
    let im = if w == 0.0 {
        chi_n * c
    } else {
        0.25 * w / (0.25 * w / (chi_n * c)).tan()
    };
    LaxRootSet::new(vec![C::new(0.0, im)])
}

/// Splitting `ε₀ᶜ = (χN/2)(1 + cos Δφ₀)` where `R₋` vanishes at small `W`.
pub fn critical_splitting(chi_n: f64, angle: f64) -> f64 {
    0.5 * chi_n * (1.0 + angle.cos())
}

/// Dynamical phase of the pairing amplitude. `IIIa` keeps `|Δ| > 0`,
/// `IIIb` has `|Δ|` periodically touching zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    I,
    II,
    IIIa,
    IIIb,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::I => "I",
            Phase::II => "II",
            Phase::IIIa => "IIIa",
            Phase::IIIb => "IIIb",
        }
    }

    pub fn is_iii(self) -> bool {
        matches!(self, Phase::IIIa | Phase::IIIb)
    }

    /// Coarse label without the sub-phase.
    pub fn major(self) -> u8 {
        match self {
            Phase::I => 1,
            Phase::II => 2,
            Phase::IIIa | Phase::IIIb => 3,
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Relative band on `R₋/R₊` below which `R₋` counts as zero.
pub const SUBPHASE_TOL: f64 = 1e-4;

/// Phase from the number of root pairs; two or more pairs are split by
/// `R₋/R₊`.
pub fn classify_from_roots(roots: &LaxRootSet, subphase_tol: f64) -> Phase {
    match roots.n_pairs() {
        0 => Phase::I,
        1 => Phase::II,
        _ => match roots.r_minus_over_r_plus() {
            Some(ratio) if ratio > subphase_tol => Phase::IIIa,
            _ => Phase::IIIb,
        },
    }
}

/// `|Δ(t)| = √R₊ |sn(t√R̃, −R₊/R̃)|`, the solution for `R₋ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticSolution {
    pub r_plus: f64,
    pub r_tilde: f64,
    /// Parameter `m = −R₊/R̃`.
    pub m: f64,
    pub quarter_period: f64,
}

impl EllipticSolution {
    pub fn from_roots(roots: &LaxRootSet, subphase_tol: f64) -> Result<Self> {
        if roots.n_pairs() != 2 {
            return Err(Error::Unsupported(format!(
                "elliptic solution needs two root pairs, got {}",
                roots.n_pairs()
            )));
        }
        let (Some(r_plus), Some(r_minus), Some(r_tilde)) = (roots.r_plus(), roots.r_minus(), roots.r_tilde()) else {
            return Err(Error::Unsupported(format!(
                "elliptic solution needs two root pairs, got {}",
                roots.n_pairs()
            )));
        };
        if r_minus > subphase_tol * r_plus {
            return Err(Error::Unsupported(format!(
                "R- = {r_minus:e} > 0: only the R- = 0 case has a closed form"
            )));
        }
        if !(r_tilde > 0.0) {
            return Err(Error::Unsupported("R~ = 0: degenerate roots".into()));
        }
        let m = -r_plus / r_tilde;
        Ok(EllipticSolution {
            r_plus,
            r_tilde,
            m,
            quarter_period: elliptic_k(m)?,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let sn = jacobi_sn(t * self.r_tilde.sqrt(), self.m).expect("m < 0 is in the domain of sn");
        self.r_plus.sqrt() * sn.abs()
    }

    /// `𝒜 = √R₊`.
    pub fn amplitude(&self) -> f64 {
        self.r_plus.sqrt()
    }

    /// Period of `sn`, `T = 4K(−R₊/R̃)/√R̃`.
    pub fn period(&self) -> f64 {
        4.0 * self.quarter_period / self.r_tilde.sqrt()
    }

    /// Period of `|Δ|`, half of [`Self::period`].
    pub fn abs_period(&self) -> f64 {
        0.5 * self.period()
    }

    /// Angular frequency of the `|Δ|` fundamental.
    pub fn omega_osc(&self) -> f64 {
        2.0 * PI / self.abs_period()
    }
}

/// Evaluates `|Δ(t)|` from the roots (`R₋ = 0` only).
pub fn delta_analytic(t: f64, roots: &LaxRootSet) -> Result<f64> {
    Ok(EllipticSolution::from_roots(roots, SUBPHASE_TOL)?.eval(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RootSearchOptions {
    /// Roots with `Im u < imag_tol·χN` are treated as real.
    pub imag_tol: f64,
    /// Newton stops once `|Q| ≤ newton_tol·(1 + Σ|χLₐ|²)`.
    pub newton_tol: f64,
    /// Roots are reported only with `|Q| < report_tol`.
    pub report_tol: f64,
    pub max_newton: usize,
    /// Random starts per grid point, on top of the continued roots.
    pub n_random: usize,
    pub seed: u64,
    /// Continuation starts at `w_start·χN` (or the first grid point if smaller).
    pub w_start: f64,
    /// Largest continuation step, relative to `χN`.
    pub max_dw: f64,
    pub subphase_tol: f64,
}

impl Default for RootSearchOptions {
    fn default() -> Self {
        RootSearchOptions {
            imag_tol: 1e-6,
            newton_tol: 1e-13,
            report_tol: 1e-8,
            max_newton: 100,
            n_random: 32,
            seed: 0x5eed,
            w_start: 1e-4,
            max_dw: 0.02,
            subphase_tol: SUBPHASE_TOL,
        }
    }
}

/// Result of a search at one `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootSearchOutcome {
    Found(LaxRootSet),
    Undetermined(String),
}

impl RootSearchOutcome {
    pub fn roots(&self) -> Option<&LaxRootSet> {
        match self {
            RootSearchOutcome::Found(r) => Some(r),
            RootSearchOutcome::Undetermined(_) => None,
        }
    }

    pub fn phase(&self, subphase_tol: f64) -> Option<Phase> {
        self.roots().map(|r| classify_from_roots(r, subphase_tol))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSearchPoint {
    pub w: f64,
    pub outcome: RootSearchOutcome,
}

/// Damped complex Newton on `Q` restricted to the closed upper half plane.
fn newton(problem: &LaxProblem, seed: C, opts: &RootSearchOptions) -> Option<C> {
    let far = 1e6 * problem.scale();
    let mut u = if seed.im < 0.0 { seed.conj() } else { seed };
    let (mut q, mut dq, mut scale) = problem.q_with_derivative(u).ok()?;
    for _ in 0..opts.max_newton {
        if q.norm() <= opts.newton_tol * (1.0 + scale) {
            return (q.norm() < opts.report_tol).then_some(u);
        }
        if dq.norm() == 0.0 || !dq.is_finite() {
            return None;
        }
        let step = q / dq;
        let mut lambda = 1.0;
        loop {
            let mut cand = u - lambda * step;
            if cand.im < 0.0 {
                cand = cand.conj();
            }
            if let Ok((qc, dqc, sc)) = problem.q_with_derivative(cand) {
                if qc.norm() < q.norm() || (lambda == 1.0 && qc.norm() <= q.norm() * (1.0 + 1e-12)) {
                    u = cand;
                    (q, dq, scale) = (qc, dqc, sc);
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1.0 / 1024.0 {
                // no descent: accept the root if we are already at the noise floor
                return (q.norm() < opts.report_tol && q.norm() <= 1e3 * opts.newton_tol * (1.0 + scale)).then_some(u);
            }
        }
        if u.norm() > far {
            return None;
        }
    }
    (q.norm() <= 1e3 * opts.newton_tol * (1.0 + scale) && q.norm() < opts.report_tol).then_some(u)
}

/// Merges near-duplicates, snaps numerically imaginary roots onto the axis and
/// adds the mirror partner `−ū` of every off-axis root.
fn consolidate(problem: &LaxProblem, roots: Vec<C>, opts: &RootSearchOptions) -> Vec<C> {
    let tol = 1e-7 * problem.chi_n;
    let min_im = opts.imag_tol * problem.chi_n;
    let mut out: Vec<C> = Vec::new();
    let push = |r: C, out: &mut Vec<C>| {
        if r.im > min_im && !out.iter().any(|o| (o - r).norm() < tol) {
            out.push(r);
        }
    };
    for r in roots {
        let r = if r.re.abs() < tol { C::new(0.0, r.im) } else { r };
        push(r, &mut out);
        if r.re != 0.0 {
            push(C::new(-r.re, r.im), &mut out);
        }
    }
    out
}

/// Root continuation in `W` for fixed `(χN, ε₀, family, angle)`.
#[derive(Debug, Clone)]
pub struct RootTracker {
    base: LaxProblem,
    opts: RootSearchOptions,
    w: f64,
    roots: Vec<C>,
    /// Roots lost during continuation away from the real axis, with their last
    /// position; cleared at each reported grid point.
    lost: Vec<C>,
}

/// Imaginary part below which a disappearing root is taken to have merged
/// with the real axis, relative to `χN`.
const VANISH_IM: f64 = 0.05;

/// More pairs than this means the search has gone astray.
const MAX_PAIRS: usize = 4;

impl RootTracker {
    /// Starts at `min(w_first, w_start·χN)` from the small-`W` closed forms
    /// plus random starts.
    pub fn new(base: LaxProblem, opts: RootSearchOptions, w_first: f64) -> Self {
        let w0 = w_first.min(opts.w_start * base.chi_n).max(0.0);
        let problem = base.with_w(w0);
        let mut seeds: Vec<C> = analytic_roots_small_w(base.chi_n, base.eps0, base.family, base.angle)
            .map(|r| r.roots)
            .unwrap_or_default();
        seeds.extend(analytic_roots_small_eps(base.chi_n, w0, base.angle).roots);
        let mut tracker = RootTracker {
            base,
            opts,
            w: w0,
            roots: Vec::new(),
            lost: Vec::new(),
        };
        let found: Vec<C> = seeds.into_iter().filter_map(|s| newton(&problem, s, &opts)).collect();
        tracker.roots = consolidate(&problem, found, &opts);
        tracker.random_search(u64::MAX);
        tracker
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn roots(&self) -> LaxRootSet {
        LaxRootSet::new(self.roots.clone())
    }

    fn problem(&self) -> LaxProblem {
        self.base.with_w(self.w)
    }

    fn random_search(&mut self, stream: u64) {
        let problem = self.problem();
        let s = problem.scale();
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        rng.set_stream(stream);
        let mut found = self.roots.clone();
        for _ in 0..self.opts.n_random {
            let re = rng.random_range(-s..=s);
            let im = s * 10f64.powf(rng.random_range(-4.0..=0.3));
            if let Some(r) = newton(&problem, C::new(re, im), &self.opts) {
                found.push(r);
            }
        }
        self.roots = consolidate(&problem, found, &self.opts);
    }

    /// Follows one root from `w_a` to `w_b`, halving the step on failure.
    ///
    /// A Newton result further than `reach` from the start is rejected, so a
    /// root cannot jump onto a neighbour.
    fn track(&self, u: C, w_a: f64, w_b: f64, reach: f64, depth: u32) -> std::result::Result<C, C> {
        let problem = self.base.with_w(w_b);
        if let Some(r) = newton(&problem, u, &self.opts) {
            if (r - u).norm() <= reach {
                return Ok(r);
            }
        }
        if depth == 0 {
            return Err(u);
        }
        let mid = 0.5 * (w_a + w_b);
        let u_mid = self.track(u, w_a, mid, reach, depth - 1)?;
        self.track(u_mid, mid, w_b, reach, depth - 1)
    }

    /// Half the distance from `u` to the real axis and to every other root.
    fn reach(&self, u: C) -> f64 {
        let others = self
            .roots
            .iter()
            .flat_map(|&r| [r, C::new(-r.re, r.im)])
            .filter(|r| (r - u).norm() > 1e-7 * self.base.chi_n)
            .map(|r| (r - u).norm())
            .fold(u.im, f64::min);
        0.5 * others
    }

    fn step_to(&mut self, w_next: f64) {
        let w_prev = self.w;
        let mut next = Vec::with_capacity(self.roots.len());
        for &u in &self.roots {
            match self.track(u, w_prev, w_next, self.reach(u), 12) {
                Ok(r) => next.push(r),
                Err(last) => {
                    // collisions of imaginary roots split them off the axis;
                    // look for the products on rings around the last position
                    let problem = self.base.with_w(w_next);
                    let before = next.len();
                    for radius in [1e-3, 1e-2, 3e-2] {
                        for k in 0..8 {
                            let seed = last + C::from_polar(radius * self.base.chi_n, PI * (k as f64 + 0.5) / 4.0);
                            if let Some(r) = newton(&problem, seed, &self.opts) {
                                next.push(r);
                            }
                        }
                        if next.len() > before {
                            break;
                        }
                    }
                    if next.len() == before && last.im > VANISH_IM * self.base.chi_n {
                        self.lost.push(last);
                    }
                }
            }
        }
        self.w = w_next;
        self.roots = consolidate(&self.problem(), next, &self.opts);
    }

    /// Continues to `w` (which must not be below the current `W`) and runs a
    /// fresh multi-start search there.
    pub fn advance(&mut self, w: f64, stream: u64) -> RootSearchOutcome {
        if w < self.w {
            return RootSearchOutcome::Undetermined(format!(
                "continuation runs upward in W; at {} asked for {w}",
                self.w
            ));
        }
        let span = w - self.w;
        let n_steps = (span / (self.opts.max_dw * self.base.chi_n)).ceil().max(1.0) as usize;
        let w0 = self.w;
        for k in 1..=n_steps {
            let w_k = if k == n_steps {
                w
            } else {
                w0 + span * k as f64 / n_steps as f64
            };
            self.step_to(w_k);
        }
        self.random_search(stream);
        self.report()
    }

    fn report(&mut self) -> RootSearchOutcome {
        let lost = std::mem::take(&mut self.lost);
        let near = 0.1 * self.base.chi_n;
        for l in lost {
            if !self.roots.iter().any(|r| (r - l).norm() < near) {
                return RootSearchOutcome::Undetermined(format!(
                    "root last seen at {l:.6} lost during continuation away from the real axis"
                ));
            }
        }
        if self.roots.len() > MAX_PAIRS {
            return RootSearchOutcome::Undetermined(format!("{} root pairs found", self.roots.len()));
        }
        RootSearchOutcome::Found(self.roots())
    }
}

/// Roots of `Q` at each `W` of an ascending grid, by continuation.
pub fn find_roots_continuation(base: &LaxProblem, w_grid: &[f64], opts: &RootSearchOptions) -> Vec<RootSearchPoint> {
    let Some(&first) = w_grid.first() else {
        return Vec::new();
    };
    let mut tracker = RootTracker::new(*base, *opts, first);
    w_grid
        .iter()
        .enumerate()
        .map(|(i, &w)| RootSearchPoint {
            w,
            outcome: tracker.advance(w, i as u64),
        })
        .collect()
}

/// Roots at `problem.w`, continued from small `W`.
pub fn find_roots_numeric(problem: &LaxProblem, opts: &RootSearchOptions) -> RootSearchOutcome {
    let mut tracker = RootTracker::new(*problem, *opts, problem.w);
    tracker.advance(problem.w, 0)
}

/// Smallest `W` in `(w_lo, w_hi]` where the number of root pairs first
/// differs from its value at `w_lo`, located to `w_tol` by bisection.
/// Returns `None` if the count is the same at both ends.
pub fn locate_count_change(
    base: &LaxProblem,
    w_lo: f64,
    w_hi: f64,
    w_tol: f64,
    opts: &RootSearchOptions,
) -> Result<Option<f64>> {
    let undetermined = |w: f64, why: String| Error::InvalidInput(format!("root search undetermined at W = {w}: {why}"));
    let mut lo_tracker = RootTracker::new(*base, *opts, w_lo);
    let n_lo = match lo_tracker.advance(w_lo, 0) {
        RootSearchOutcome::Found(r) => r.n_pairs(),
        RootSearchOutcome::Undetermined(why) => return Err(undetermined(w_lo, why)),
    };
    let count = |tracker: &RootTracker, w: f64| -> Result<(RootTracker, usize)> {
        let mut t = tracker.clone();
        match t.advance(w, 0) {
            RootSearchOutcome::Found(r) => Ok((t, r.n_pairs())),
            RootSearchOutcome::Undetermined(why) => Err(undetermined(w, why)),
        }
    };
    let (_, n_hi) = count(&lo_tracker, w_hi)?;
    if n_hi == n_lo {
        return Ok(None);
    }
    let (mut lo, mut hi) = (w_lo, w_hi);
    while hi - lo > w_tol {
        let mid = 0.5 * (lo + hi);
        let (t, n) = count(&lo_tracker, mid)?;
        if n == n_lo {
            lo = mid;
            lo_tracker = t;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{prepare_initial_state, sample_splittings, InitialStateSpec, SplittingKind, SplittingSpec};
    use rand::Rng;

    fn az(eps0: f64, w: f64, angle: f64) -> LaxProblem {
        LaxProblem::new(1.0, eps0, w, Family::Azimuthal, angle)
    }

    fn discrete_state(eps0: f64, w: f64, n: usize, family: Family, angle: f64) -> SpinState {
        let e = sample_splittings(&SplittingSpec {
            kind: SplittingKind::EquallySpaced,
            eps0,
            w,
            n,
        });
        let spec = match family {
            Family::Azimuthal => InitialStateSpec::Azimuthal { angle },
            Family::Elevation => InitialStateSpec::Elevation { angle },
        };
        prepare_initial_state(&spec, &e).unwrap()
    }

    #[test]
    fn antipodal_x_component_vanishes() {
        let p = az(0.1, 0.7, PI);
        for u in [C::new(0.3, 0.2), C::new(-1.0, 0.01), C::new(0.0, 5.0)] {
            assert!(p.components(u).unwrap()[0].norm() < 1e-15);
        }
    }

    #[test]
    fn components_vanish_at_infinity() {
        for family in [Family::Azimuthal, Family::Elevation] {
            let p = LaxProblem::new(1.0, 0.2, 0.9, family, 1.1);
            let q = p.q(C::new(3e7, 2e7)).unwrap();
            assert!((q - 1.0).norm() < 1e-7);
        }
    }

    #[test]
    fn support_is_a_domain_error() {
        let p = az(0.2, 0.4, 0.5);
        assert!(p.q(C::new(0.1, 0.0)).is_err());
        assert!(p.q(C::new(0.2, 0.0)).is_err());
        assert!(p.q(C::new(0.1, 1e-6)).is_ok());
        assert!(p.q(C::new(0.0, 0.0)).is_err());
        assert!(p.q(C::new(0.5, 0.0)).is_ok());
        let p = az(0.2, 0.0, 0.5);
        assert!(p.q(C::new(0.1, 0.0)).is_err());
    }

    #[test]
    fn continuum_matches_discrete_sum() {
        let n = 5000;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for family in [Family::Azimuthal, Family::Elevation] {
            let (eps0, w, angle) = (0.3, 1.2, 0.9);
            let state = discrete_state(eps0, w, n, family, angle);
            let p = LaxProblem::new(1.0, eps0, w, family, angle);
            for _ in 0..20 {
                let u = C::new(rng.random_range(-1.5..1.5), rng.random_range(0.05..1.5));
                let cont = p.components(u).unwrap();
                let disc = discrete_lax(u, &state, 1.0 / n as f64);
                let num: f64 = (0..3).map(|a| (cont[a] - disc[a]).norm_sqr()).sum::<f64>().sqrt();
                let den: f64 = (0..3).map(|a| disc[a].norm_sqr()).sum::<f64>().sqrt();
                assert!(num / den < 1e-3, "{family:?} u = {u}: rel err {:e}", num / den);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for family in [Family::Azimuthal, Family::Elevation] {
            let p = LaxProblem::new(1.0, 0.15, 0.8, family, 2.0);
            let u = C::new(0.37, 0.21);
            let (_, dq, _) = p.q_with_derivative(u).unwrap();
            let h = 1e-6;
            let fd = (p.q(u + h).unwrap() - p.q(u - h).unwrap()) / (2.0 * h);
            let fdi = (p.q(u + C::new(0.0, h)).unwrap() - p.q(u - C::new(0.0, h)).unwrap()) / C::new(0.0, 2.0 * h);
            assert!((dq - fd).norm() < 1e-7 * dq.norm().max(1.0));
            assert!((dq - fdi).norm() < 1e-7 * dq.norm().max(1.0));
        }
    }

    #[test]
    fn small_w_expansion_of_q() {
        // closed form at W = 0 for the azimuthal family
        let (eps0, angle) = (0.2, 1.3f64);
        let u = C::new(0.31, 0.42);
        let x = u * u;
        let c2 = (0.5 * angle).cos().powi(2);
        let e2 = eps0 * eps0;
        let closed = 1.0 + 4.0 / (4.0 * x - e2).powi(2) * (4.0 * x * c2 + e2 * (1.0 - c2));
        for w in [1e-2, 1e-3] {
            let q = az(eps0, w, angle).q(u).unwrap();
            assert!((q - closed).norm() < 10.0 * w * w, "W = {w}: {}", (q - closed).norm());
        }
    }

    #[test]
    fn antipodal_closed_form_values() {
        let r = analytic_roots_antipodal(1.0, 0.1, 0.5);
        assert_eq!(r.n_pairs(), 2);
        for u in &r.roots {
            let q = az(0.1, 0.5, PI).q(*u).unwrap();
            assert!(q.norm() < 1e-8, "|Q| = {:e}", q.norm());
        }
        // mirror pair with equal imaginary parts
        assert!((r.roots[0].re + r.roots[1].re).abs() < 1e-14);
        assert!((r.roots[0].im - r.roots[1].im).abs() < 1e-14);
        assert_eq!(r.r_minus(), Some(0.0));
        // frozen closed-form evaluation
        assert!(
            (r.roots[1].re - 0.187_518_792_330_026_5).abs() < 1e-12,
            "{}",
            r.roots[1].re
        );
        assert!(
            (r.roots[1].im - 0.130_530_829_603_245_8).abs() < 1e-12,
            "{}",
            r.roots[1].im
        );
    }

    #[test]
    fn antipodal_roots_vanish_at_pi() {
        assert_eq!(analytic_roots_antipodal(1.0, 0.1, PI).n_pairs(), 0);
        assert_eq!(analytic_roots_antipodal(1.0, 0.1, 3.5).n_pairs(), 0);
        assert_eq!(analytic_roots_antipodal(1.0, 0.1, 3.1).n_pairs(), 2);
    }

    #[test]
    fn antipodal_small_w_limit() {
        let a = analytic_roots_antipodal(1.0, 0.1, 1e-7);
        let b = analytic_roots_small_w(1.0, 0.1, Family::Azimuthal, PI).unwrap();
        assert_eq!(a.n_pairs(), 2);
        for (x, y) in a.roots.iter().zip(&b.roots) {
            assert!((x - y).norm() < 1e-6);
        }
    }

    #[test]
    fn small_w_roots_are_roots_at_zero_width() {
        for (family, angle, eps0) in [
            (Family::Azimuthal, 0.0, 0.1),
            (Family::Azimuthal, 1.0, 0.3),
            (Family::Azimuthal, PI, 0.05),
            (Family::Elevation, PI / 2.0, 0.1),
            (Family::Elevation, -0.7, 0.4),
        ] {
            let r = analytic_roots_small_w(1.0, eps0, family, angle).unwrap();
            assert_eq!(r.n_pairs(), 2, "{family:?} {angle}");
            let p = LaxProblem::new(1.0, eps0, 0.0, family, angle);
            for u in &r.roots {
                assert!(p.q(*u).unwrap().norm() < 1e-10);
            }
        }
    }

    #[test]
    fn small_w_flat_band_roots() {
        // Δφ₀ = 0, ε₀ = 0: Q = 1 + 1/u², one pair at ±i; the double root sits on the cut
        let r = analytic_roots_small_w(1.0, 0.0, Family::Azimuthal, 0.0).unwrap();
        assert_eq!(r.roots, vec![C::new(0.0, 1.0)]);
        let r = analytic_roots_small_w(1.0, 0.02, Family::Azimuthal, 0.0).unwrap();
        assert!(r.roots.iter().all(|u| u.re == 0.0));
    }

    #[test]
    fn small_w_critical_splitting_zeroes_r_minus() {
        for angle in [0.0, PI / 2.0, 3.0 * PI / 4.0] {
            let ec = critical_splitting(1.0, angle);
            let r = analytic_roots_small_w(1.0, ec, Family::Azimuthal, angle).unwrap();
            assert!(r.r_minus_over_r_plus().unwrap() < 1e-12);
            let below = analytic_roots_small_w(1.0, 0.8 * ec, Family::Azimuthal, angle).unwrap();
            assert!(below.r_minus_over_r_plus().unwrap() > 1e-3);
            assert_eq!(classify_from_roots(&below, SUBPHASE_TOL), Phase::IIIa);
        }
    }

    #[test]
    fn elevation_small_w_imaginary_parts() {
        let angle = PI / 2.0;
        let centre = 0.5 * (0.5 * angle).cos();
        // at ε₀/χN = 0.1 the square root is imaginary: the pair sits on the
        // imaginary axis, symmetric about the offset (χN/2)cos(Δθ₀/2)
        let r = analytic_roots_small_w(1.0, 0.1, Family::Elevation, angle).unwrap();
        assert_eq!(r.n_pairs(), 2);
        assert!(r.roots.iter().all(|u| u.re.abs() < 1e-15));
        assert!((0.5 * (r.roots[0].im + r.roots[1].im) - centre).abs() < 1e-14);
        // for larger ε₀ the pair is off-axis with imaginary part exactly at the offset
        let r = analytic_roots_small_w(1.0, 0.6, Family::Elevation, angle).unwrap();
        for u in &r.roots {
            assert!(u.re.abs() > 0.1 && (u.im - centre).abs() < 1e-14);
        }
        assert!(analytic_roots_small_w(1.0, 0.1, Family::Elevation, PI).is_err());
    }

    #[test]
    fn small_eps_pair() {
        let r = analytic_roots_small_eps(1.0, 1.0, 0.0);
        assert!((r.roots[0] - C::new(0.0, 0.25 / 0.25f64.tan())).norm() < 1e-15);
        let p = az(1e-9, 1.0, 0.0);
        assert!(p.q(r.roots[0]).unwrap().norm() < 1e-6);
        // boundary is exclusive
        let angle = 1.2f64;
        let wb = 2.0 * PI * (0.5 * angle).cos();
        assert_eq!(analytic_roots_small_eps(1.0, wb, angle).n_pairs(), 0);
        assert_eq!(analytic_roots_small_eps(1.0, 0.99 * wb, angle).n_pairs(), 1);
        assert_eq!(analytic_roots_small_eps(1.0, 1e-3, PI).n_pairs(), 0);
    }

    #[test]
    fn critical_splitting_values() {
        assert_eq!(critical_splitting(1.0, 0.0), 1.0);
        assert!(critical_splitting(1.0, PI).abs() < 1e-16);
        assert!((critical_splitting(2.0, PI / 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn classification_by_count() {
        assert_eq!(classify_from_roots(&LaxRootSet::empty(), SUBPHASE_TOL), Phase::I);
        assert_eq!(
            classify_from_roots(&LaxRootSet::new(vec![C::new(0.0, 0.3)]), SUBPHASE_TOL),
            Phase::II
        );
        let r = analytic_roots_antipodal(1.0, 0.1, 0.5);
        assert_eq!(classify_from_roots(&r, SUBPHASE_TOL), Phase::IIIb);
        let r = analytic_roots_small_w(1.0, 0.5, Family::Azimuthal, 0.0).unwrap();
        assert_eq!(classify_from_roots(&r, SUBPHASE_TOL), Phase::IIIa);
    }

    #[test]
    fn numeric_roots_track_antipodal_closed_form() {
        let grid: Vec<f64> = (1..=40).map(|k| 0.1 * k as f64).collect();
        let opts = RootSearchOptions::default();
        let points = find_roots_continuation(&az(0.1, 0.0, PI), &grid, &opts);
        for pt in &points {
            let exact = analytic_roots_antipodal(1.0, 0.1, pt.w);
            let found = pt
                .outcome
                .roots()
                .unwrap_or_else(|| panic!("W = {}: {:?}", pt.w, pt.outcome));
            assert_eq!(found.n_pairs(), exact.n_pairs(), "W = {}", pt.w);
            for (a, b) in found.roots.iter().zip(&exact.roots) {
                assert!((a - b).norm() < 1e-6 * b.norm(), "W = {}: {a} vs {b}", pt.w);
            }
        }
    }

    #[test]
    fn numeric_search_single_point() {
        let p = az(0.1, 0.5, PI);
        let r = find_roots_numeric(&p, &RootSearchOptions::default());
        let r = r.roots().unwrap();
        assert_eq!(r.n_pairs(), 2);
        for u in r.all_roots() {
            assert!(p.q(u).unwrap().norm() < 1e-8);
        }
    }

    #[test]
    fn elliptic_solution_basics() {
        let roots = analytic_roots_antipodal(1.0, 0.1, 0.5);
        let sol = EllipticSolution::from_roots(&roots, SUBPHASE_TOL).unwrap();
        assert_eq!(delta_analytic(0.0, &roots).unwrap(), 0.0);
        let peak = sol.eval(0.25 * sol.period());
        assert!((peak - sol.amplitude()).abs() < 1e-12);
        assert!(sol.eval(0.5 * sol.period()) < 1e-12);
        let iiia = analytic_roots_small_w(1.0, 0.5, Family::Azimuthal, 0.0).unwrap();
        assert!(matches!(delta_analytic(1.0, &iiia), Err(Error::Unsupported(_))));
    }

    #[test]
    fn small_splitting_amplitude_limit() {
        // W ≪ ε₀ ≪ χN: 𝒜 → √(ε₀χN)
        for eps0 in [1e-3, 1e-4] {
            let roots = analytic_roots_antipodal(1.0, eps0, 1e-3 * eps0);
            let sol = EllipticSolution::from_roots(&roots, SUBPHASE_TOL).unwrap();
            assert!(
                (sol.amplitude() / eps0.sqrt() - 1.0).abs() < 2.0 * eps0,
                "{}",
                sol.amplitude()
            );
        }
    }

    proptest::proptest! {
        #[test]
        fn closed_form_roots_are_zeros_of_q(eps0 in 0.01f64..0.5, w in 0.05f64..3.1) {
            let p = az(eps0, w, PI);
            for u in analytic_roots_antipodal(1.0, eps0, w).all_roots() {
                let (q, scale) = (p.q(u).unwrap(), p.scale());
                proptest::prop_assert!(q.norm() < 1e-8 * scale * scale, "Q({u}) = {q}");
            }
        }
    }
}
