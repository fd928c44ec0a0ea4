//! Model parameters, spin states, splitting distributions and initial states.
//!
//! Spins are classical Bloch vectors `σ⃗ⱼ = (⟨σˣⱼ⟩, ⟨σʸⱼ⟩, ⟨σᶻⱼ⟩)` of Pauli
//! expectation values, so a pure state has unit length and `σ⁻ = (σˣ − iσʸ)/2`.
//! The Hamiltonian is `H = ∓χ Ŝ⁺Ŝ⁻ + Σⱼ εⱼ σ̂ᶻⱼ` with `Ŝ± = Σⱼ σ̂±ⱼ`.
//!
//! Ideal-model code works in units where `χN = 1` is convenient but never
//! assumed: every quantity carries its own scale.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Bloch = [f64; 3];

/// Sign in front of the pairing term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingSign {
    /// `H = −χ Ŝ⁺Ŝ⁻ + Σ εⱼ σ̂ᶻⱼ`
    #[default]
    Attractive,
    /// `H = +χ Ŝ⁺Ŝ⁻ + Σ εⱼ σ̂ᶻⱼ`
    Repulsive,
}

impl CouplingSign {
    /// Multiplier of `χ Ŝ⁺Ŝ⁻` in the Hamiltonian.
    pub fn factor(self) -> f64 {
        match self {
            CouplingSign::Attractive => -1.0,
            CouplingSign::Repulsive => 1.0,
        }
    }
}

/// The Hamiltonian knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub chi: f64,
    pub n_per_ensemble: usize,
    pub eps0: f64,
    pub w: f64,
    #[serde(default)]
    pub sign: CouplingSign,
}

impl ModelParams {
    pub fn new(chi: f64, n_per_ensemble: usize, eps0: f64, w: f64) -> Result<Self> {
        let params = ModelParams {
            chi,
            n_per_ensemble,
            eps0,
            w,
            sign: CouplingSign::Attractive,
        };
        params.validate()?;
        Ok(params)
    }

    /// Parameters in units of `χN = 1`.
    pub fn from_ratios(n_per_ensemble: usize, eps0_over_chi_n: f64, w_over_chi_n: f64) -> Result<Self> {
        if n_per_ensemble == 0 {
            return Err(Error::InvalidInput("n_per_ensemble must be >= 1".into()));
        }
        Self::new(
            1.0 / n_per_ensemble as f64,
            n_per_ensemble,
            eps0_over_chi_n,
            w_over_chi_n,
        )
    }

    pub fn with_sign(mut self, sign: CouplingSign) -> Self {
        self.sign = sign;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(Error::InvalidInput(format!("chi must be > 0, got {}", self.chi)));
        }
        if self.n_per_ensemble == 0 {
            return Err(Error::InvalidInput("n_per_ensemble must be >= 1".into()));
        }
        if !(self.w >= 0.0) || !(self.eps0 >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "eps0 and w must be >= 0, got eps0 = {}, w = {}",
                self.eps0, self.w
            )));
        }
        Ok(())
    }

    pub fn chi_n(&self) -> f64 {
        self.chi * self.n_per_ensemble as f64
    }

    /// `χ` with the sign convention folded in.
    pub fn signed_chi(&self) -> f64 {
        self.sign.factor() * self.chi
    }

    pub fn splitting_spec(&self, kind: SplittingKind) -> SplittingSpec {
        SplittingSpec {
            kind,
            eps0: self.eps0,
            w: self.w,
            n: self.n_per_ensemble,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ensemble {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Ensemble {
    pub fn sign(self) -> f64 {
        match self {
            Ensemble::Plus => 1.0,
            Ensemble::Minus => -1.0,
        }
    }
}

/// The dynamical state: Bloch vectors plus the per-spin data that enters the
/// equations of motion.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    pub sigma: Vec<Bloch>,
    pub eps: Vec<f64>,
    /// Coupling weights `gⱼ/g ∈ [−1, 1]`; all ones for the homogeneous model.
    pub g_weight: Vec<f64>,
    pub ensemble: Vec<Ensemble>,
}

impl SpinState {
    /// Builds a state with homogeneous weights; the first half of the entries
    /// is tagged `+`, the rest `−`.
    pub fn new(sigma: Vec<Bloch>, eps: Vec<f64>) -> Result<Self> {
        let n = sigma.len();
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "need an even, nonzero number of spins, got {n}"
            )));
        }
        if eps.len() != n {
            return Err(Error::InvalidInput(format!("{} splittings for {n} spins", eps.len())));
        }
        let ensemble = (0..n)
            .map(|j| if j < n / 2 { Ensemble::Plus } else { Ensemble::Minus })
            .collect();
        Ok(SpinState {
            sigma,
            eps,
            g_weight: vec![1.0; n],
            ensemble,
        })
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn n_per_ensemble(&self) -> usize {
        self.sigma.len() / 2
    }

    /// Weighted collective lowering amplitude `Σⱼ gⱼ σ⁻ⱼ`.
    pub fn s_minus(&self) -> Complex64 {
        let (sx, sy) = self
            .sigma
            .iter()
            .zip(&self.g_weight)
            .fold((0.0, 0.0), |(x, y), (s, g)| (x + g * s[0], y + g * s[1]));
        Complex64::new(0.5 * sx, -0.5 * sy)
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.sigma.iter().map(|s| (norm(s) - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn mean_norm(&self) -> f64 {
        self.sigma.iter().map(norm).sum::<f64>() / self.len() as f64
    }
}

pub(crate) fn norm(s: &Bloch) -> f64 {
    (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SplittingKind {
    /// Midpoint grid of each ensemble's interval.
    #[default]
    EquallySpaced,
    UniformRandom {
        seed: u64,
    },
}

/// Splittings `εⱼ ∈ [±ε₀/2 − W/4, ±ε₀/2 + W/4]`, `N` per ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingSpec {
    pub kind: SplittingKind,
    pub eps0: f64,
    pub w: f64,
    pub n: usize,
}

/// Returns `2N` splittings, the `+` ensemble first.
pub fn sample_splittings(spec: &SplittingSpec) -> Vec<f64> {
    let n = spec.n;
    let half_width = 0.25 * spec.w;
    let mut out = Vec::with_capacity(2 * n);
    match spec.kind {
        SplittingKind::EquallySpaced => {
            let spacing = 0.5 * spec.w / n as f64;
            for center in [0.5 * spec.eps0, -0.5 * spec.eps0] {
                // integer step counts keep the offsets exactly antisymmetric
                out.extend((0..n).map(|k| {
                    let steps = (2 * k + 1) as f64 - n as f64;
                    center + 0.5 * steps * spacing
                }));
            }
        }
        SplittingKind::UniformRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for center in [0.5 * spec.eps0, -0.5 * spec.eps0] {
                for _ in 0..n {
                    let x: f64 = if half_width > 0.0 {
                        rng.random_range(-half_width..=half_width)
                    } else {
                        0.0
                    };
                    out.push(center + x);
                }
            }
        }
    }
    out
}

/// How the gap of a BCS-like initial state is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundGap {
    Fixed(f64),
    SelfConsistent { chi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum InitialStateSpec {
    /// `σ⃗ⱼ = (cos(Δφ₀/2), ±sin(Δφ₀/2), 0)`
    Azimuthal {
        angle: f64,
    },
    /// `σ⃗ⱼ = (cos(Δθ₀/2), 0, ±sin(Δθ₀/2))`
    Elevation {
        angle: f64,
    },
    BcsGround {
        gap: GroundGap,
    },
    /// Built by [`crate::cavity::prepare_cavity_state`].
    CavityRealistic {
        angle: f64,
    },
}

fn check_angle(angle: f64) -> Result<()> {
    if !(angle.abs() <= PI + 1e-12) {
        return Err(Error::InvalidInput(format!("angle {angle} outside [-pi, pi]")));
    }
    Ok(())
}

/// Ideal product states for the given splittings (`+` ensemble first).
pub fn prepare_initial_state(spec: &InitialStateSpec, splittings: &[f64]) -> Result<SpinState> {
    let n_total = splittings.len();
    let coherent = |per_ensemble: &dyn Fn(f64) -> Bloch| -> Result<SpinState> {
        let sigma = (0..n_total)
            .map(|j| per_ensemble(if j < n_total / 2 { 1.0 } else { -1.0 }))
            .collect();
        SpinState::new(sigma, splittings.to_vec())
    };
    match *spec {
        InitialStateSpec::Azimuthal { angle } => {
            check_angle(angle)?;
            let (s, c) = (0.5 * angle).sin_cos();
            coherent(&|pm| [c, pm * s, 0.0])
        }
        InitialStateSpec::Elevation { angle } => {
            check_angle(angle)?;
            let (s, c) = (0.5 * angle).sin_cos();
            coherent(&|pm| [c, 0.0, pm * s])
        }
        InitialStateSpec::BcsGround { gap } => match gap {
            GroundGap::Fixed(gap) => bcs_state_with_gap(gap, splittings),
            GroundGap::SelfConsistent { chi } => bcs_ground_state(chi, splittings),
        },
        InitialStateSpec::CavityRealistic { .. } => Err(Error::InvalidInput(
            "cavity_realistic states are prepared by cavity::prepare_cavity_state".into(),
        )),
    }
}

/// Gap function `1 − (χ/2) Σⱼ 1/√(Δ² + εⱼ²)`, increasing in `Δ > 0`.
fn gap_function(chi: f64, splittings: &[f64], gap: f64) -> f64 {
    1.0 - 0.5 * chi * splittings.iter().map(|e| 1.0 / (gap * gap + e * e).sqrt()).sum::<f64>()
}

/// Self-consistent gap `Δ = χ Σⱼ (1/2) Δ/√(Δ² + εⱼ²)` by bisection on `(0, 2Nχ]`.
///
/// Returns 0 when only the trivial solution exists.
pub fn solve_gap(chi: f64, splittings: &[f64]) -> Result<f64> {
    if !(chi > 0.0) {
        return Err(Error::InvalidInput(format!("chi must be > 0, got {chi}")));
    }
    if splittings.is_empty() {
        return Err(Error::InvalidInput("no splittings".into()));
    }
    let trivial_only = splittings.iter().all(|e| *e != 0.0)
        && 0.5 * chi * splittings.iter().map(|e| 1.0 / e.abs()).sum::<f64>() <= 1.0;
    if trivial_only {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = chi * splittings.len() as f64;
    // f(hi) >= 0 always since Σ 1/√(Δ²+ε²) <= 2N/Δ
    const MAX_ITER: usize = 400;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if gap_function(chi, splittings, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi.abs().max(f64::MIN_POSITIVE) {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::NoConvergence {
        what: "gap bisection",
        iterations: MAX_ITER,
        lo,
        hi,
    })
}

/// BCS-like state `⟨σ⁺ⱼ⟩ = Δ/(2√(Δ² + εⱼ²))`, `⟨σᶻⱼ⟩ = εⱼ/√(Δ² + εⱼ²)` for the
/// self-consistent gap.
///
/// This orientation (inversion following the sign of `εⱼ`) is stationary
/// under the repulsive sign; under the attractive sign the stationary state
/// has the inversion flipped.
pub fn bcs_ground_state(chi: f64, splittings: &[f64]) -> Result<SpinState> {
    let gap = solve_gap(chi, splittings)?;
    bcs_state_with_gap(gap, splittings)
}

pub fn bcs_state_with_gap(gap: f64, splittings: &[f64]) -> Result<SpinState> {
    if !(gap > 0.0) {
        return Err(Error::InvalidInput(format!(
            "gap {gap} <= 0: normal state, pairing phase undefined"
        )));
    }
    let sigma = splittings
        .iter()
        .map(|&e| {
            let r = gap.hypot(e);
            [gap / r, 0.0, e / r]
        })
        .collect();
    SpinState::new(sigma, splittings.to_vec())
}
