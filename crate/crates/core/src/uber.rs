//! Alternating waveform / phase-shift optimizer.
//!
//! Each outer iteration rebuilds `T` for the current waveform, runs the
//! penalty-coupled bi-quadratic PMLI on two copies of the phase profile,
//! keeps the copy with larger Fisher information, then takes PMLI step(s)
//! on `vec(X)` with the Gram matrix `G(ν)`.
//!
//! Internally the optimizer works with unit noise gain (`2/σ² = 1`), the
//! same normalization the quartic surrogate is derived in. The noise
//! variance only rescales the reported Fisher information, so the iterate
//! path does not depend on it.

use crate::error::{Error, Result};
use crate::fisher::{self, PhaseOperators, PhaseProfile, Waveform};
use crate::linalg::{self, CMatrix, CVector, UnitVector};
use crate::scene::{ChannelSet, Reflectivities, SceneConfig};
use crate::uqp;

#[derive(Debug, Clone, PartialEq)]
pub struct UberConfig {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Penalty weight on `‖ν₁ − ν₂‖²`.
    pub penalty: f64,
    /// PMLI steps on the waveform per outer iteration.
    pub waveform_steps: usize,
}

impl Default for UberConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 50,
            inner_iterations: 20,
            penalty: 0.1,
            waveform_steps: 1,
        }
    }
}

impl UberConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_iterations == 0 {
            return Err(Error::InvalidConfig("inner_iterations must be >= 1".into()));
        }
        if self.waveform_steps == 0 {
            return Err(Error::InvalidConfig("waveform_steps must be >= 1".into()));
        }
        if !self.penalty.is_finite() || self.penalty < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "penalty must be a finite non-negative number, got {}",
                self.penalty
            )));
        }
        Ok(())
    }
}

/// Starting point of the alternating loop.
#[derive(Debug, Clone)]
pub struct UberInit {
    pub waveform: Waveform,
    pub nu1: PhaseProfile,
    pub nu2: PhaseProfile,
}

impl UberInit {
    /// Zero-phase IRS profiles and a waveform whose entries are standard
    /// complex Gaussian samples projected onto the unit circle.
    pub fn standard(scene: &SceneConfig, seed: u64) -> Self {
        let sizes: Vec<usize> = scene.irs.iter().map(|p| p.n_elements).collect();
        Self {
            waveform: Waveform::random(scene.n_tx, scene.n_samples, seed),
            nu1: PhaseProfile::zero_phase(&sizes),
            nu2: PhaseProfile::zero_phase(&sizes),
        }
    }
}

/// Fisher information across one waveform PMLI step at fixed `ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformStep {
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone)]
pub struct UberResult {
    pub waveform: Waveform,
    pub phases: PhaseProfile,
    /// Initial bound followed by one entry per outer iteration.
    pub crlb_trace: Vec<f64>,
    pub fisher_trace: Vec<f64>,
    /// Surrogate `g(ν₁, ν₂)` after each inner step, per outer iteration.
    pub inner_traces: Vec<Vec<f64>>,
    pub waveform_steps: Vec<WaveformStep>,
}

impl UberResult {
    pub fn initial_crlb(&self) -> f64 {
        self.crlb_trace[0]
    }

    pub fn final_crlb(&self) -> f64 {
        *self.crlb_trace.last().unwrap()
    }

    pub fn final_fisher(&self) -> f64 {
        *self.fisher_trace.last().unwrap()
    }
}

/// Builds `Ê = λ̂ I − ℰ` with `ℰ = [[λ_M I − E, −η ν], [−η νᴴ, 2η n]]`,
/// `λ_M = λ_max(E)` and `λ̂ = λ_max(ℰ)`. The result is positive semidefinite.
pub fn augmented_matrix(e: &CMatrix, nu_other: &CVector, penalty: f64) -> Result<CMatrix> {
    let (_, lambda_max) = linalg::hermitian_extreme_eigs(e)?;
    let n = e.nrows();
    if nu_other.len() != n {
        return Err(Error::dims("augmented_matrix", n, nu_other.len()));
    }
    let mut big = CMatrix::zeros(n + 1, n + 1);
    let loaded = uqp::shift_diagonal(&(-linalg::symmetrize(e)), lambda_max);
    big.view_mut((0, 0), (n, n)).copy_from(&loaded);
    for i in 0..n {
        big[(i, n)] = -nu_other[i] * penalty;
        big[(n, i)] = -nu_other[i].conj() * penalty;
    }
    big[(n, n)] = (2.0 * penalty * n as f64).into();
    let (_, lambda_hat) = linalg::hermitian_extreme_eigs(&big)?;
    Ok(uqp::shift_diagonal(&(-big), lambda_hat))
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub nu1: PhaseProfile,
    pub nu2: PhaseProfile,
    pub g_trace: Vec<f64>,
}

fn anchored_update(
    t: &CMatrix,
    fixed: &PhaseProfile,
    moving: &PhaseProfile,
    penalty: f64,
) -> Result<(PhaseProfile, CMatrix)> {
    let e = fisher::e_matrix(fixed, t)?;
    let e_hat = augmented_matrix(&e, fixed.as_vector(), penalty)?;
    let head = UnitVector::new(moving.as_vector().clone())?;
    let next = uqp::pmli_step_anchored(&e_hat, &head)?;
    Ok((PhaseProfile::from_unit(next, moving.sizes())?, e))
}

/// `steps` rounds of: update `ν₁` against `Ê(ν₂)`, then `ν₂` against `Ê(ν₁)`.
pub fn beamformer_inner(
    t: &CMatrix,
    nu1: &PhaseProfile,
    nu2: &PhaseProfile,
    penalty: f64,
    steps: usize,
) -> Result<InnerOutcome> {
    let mut a = nu1.clone();
    let mut b = nu2.clone();
    let mut g_trace = Vec::with_capacity(steps);
    for _ in 0..steps {
        a = anchored_update(t, &b, &a, penalty)?.0;
        let (next_b, e_a) = anchored_update(t, &a, &b, penalty)?;
        b = next_b;
        // g(ν₁, ν₂) = ν₂ᴴ E(ν₁) ν₂ by symmetry
        g_trace.push(linalg::quadratic_form(&e_a, b.as_vector()));
    }
    Ok(InnerOutcome {
        nu1: a,
        nu2: b,
        g_trace,
    })
}

/// Keeps the profile with larger quartic Fisher information; ties go to `nu1`.
pub fn select_profile(nu1: &PhaseProfile, nu2: &PhaseProfile, t: &CMatrix) -> Result<PhaseProfile> {
    let f1 = fisher::fisher_quartic(nu1, t)?;
    let f2 = fisher::fisher_quartic(nu2, t)?;
    Ok(if f2 > f1 { nu2.clone() } else { nu1.clone() })
}

/// One PMLI step on `vec(X)` with `G = I_N ⊗ BᴴB`, applied as `BᴴB X`.
pub fn waveform_step(effective: &CMatrix, x: &Waveform) -> Waveform {
    let gram = effective.adjoint() * effective;
    let image = gram * x.as_matrix();
    let s = linalg::unit_modulus_project(&linalg::vec(&image));
    Waveform::from_unit_vec(&s, x.n_tx(), x.n_samples()).expect("shape preserved")
}

pub fn run_uber(
    scene: &SceneConfig,
    channels: &ChannelSet,
    alpha: &Reflectivities,
    cfg: &UberConfig,
    init: &UberInit,
) -> Result<UberResult> {
    cfg.validate()?;
    scene.validate()?;
    if init.waveform.n_tx() != channels.n_tx || init.waveform.n_samples() != scene.n_samples {
        return Err(Error::dims(
            "initial waveform",
            format!("{}x{}", channels.n_tx, scene.n_samples),
            format!("{}x{}", init.waveform.n_tx(), init.waveform.n_samples()),
        ));
    }
    let sizes = channels.irs_sizes();
    for nu in [&init.nu1, &init.nu2] {
        if nu.sizes() != sizes.as_slice() {
            return Err(Error::dims(
                "initial phases",
                format!("{sizes:?}"),
                format!("{:?}", nu.sizes()),
            ));
        }
    }
    if alpha.len() != channels.n_irs() {
        return Err(Error::dims("reflectivities", channels.n_irs(), alpha.len()));
    }

    let gain = fisher::noise_gain(scene.noise_variance);
    let ops: PhaseOperators = fisher::build_d(channels)?;
    let mut x = init.waveform.clone();
    let t0 = ops.t_matrix(&x, alpha, 1.0)?;
    let mut nu = select_profile(&init.nu1, &init.nu2, &t0)?;

    let fisher_of = |nu: &PhaseProfile, x: &Waveform| -> Result<(CMatrix, f64)> {
        let eff = fisher::effective_derivative(nu, alpha, channels)?;
        let f = fisher::fisher_from_derivative(&eff, x, gain);
        Ok((eff, f))
    };

    let (_, f0) = fisher_of(&nu, &x)?;
    let mut fisher_trace = vec![f0];
    let mut crlb_trace = vec![fisher::crlb(f0)?];
    let mut inner_traces = Vec::with_capacity(cfg.outer_iterations);
    let mut steps = Vec::with_capacity(cfg.outer_iterations * cfg.waveform_steps);
    let (mut nu1, mut nu2) = (init.nu1.clone(), init.nu2.clone());

    for _ in 0..cfg.outer_iterations {
        let t = ops.t_matrix(&x, alpha, 1.0)?;
        let inner = beamformer_inner(&t, &nu1, &nu2, cfg.penalty, cfg.inner_iterations)?;
        nu = select_profile(&inner.nu1, &inner.nu2, &t)?;
        inner_traces.push(inner.g_trace);

        let (eff, mut f) = fisher_of(&nu, &x)?;
        for _ in 0..cfg.waveform_steps {
            let next = waveform_step(&eff, &x);
            let after = fisher::fisher_from_derivative(&eff, &next, gain);
            steps.push(WaveformStep { before: f, after });
            x = next;
            f = after;
        }
        fisher_trace.push(f);
        crlb_trace.push(fisher::crlb(f)?);
        nu1 = nu.clone();
        nu2 = nu.clone();
    }

    Ok(UberResult {
        waveform: x,
        phases: nu,
        crlb_trace,
        fisher_trace,
        inner_traces,
        waveform_steps: steps,
    })
}
