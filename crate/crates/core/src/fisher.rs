//! Fisher information of the LoS direction of arrival and its three
//! algebraic forms.
//!
//! * direct: `F = (2/σ²)‖X̃ Ḣ̃ α‖²` with `X̃ = Xᵀ ⊗ I` and `Ḣ̃ = [vec Ḣ_1 … vec Ḣ_M]`;
//! * waveform-quadratic: `F = vec(X)ᴴ (I_N ⊗ B)ᴴ (I_N ⊗ B) vec(X)`;
//! * phase-quartic: `F = νᴴ Q₁(ν)ᴴ T Q₁(ν) ν`.
//!
//! The `2/σ²` prefactor is carried by every form (inside `B` and `T`), so the
//! three agree to roundoff. It is passed around as a `gain`.

use nalgebra::DVectorView;
use num_complex::Complex64;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, block_diag, commutation_matrix, identity, kron, unvec, vec, CMatrix, CVector, UnitVector,
    ONE, UNIT_MODULUS_TOLERANCE,
};
use crate::scene::{
    complex_normal, seeded_rng, steering, ChannelSet, Reflectivities, SceneConfig, WAVEFORM_STREAM,
};

/// Relative imaginary residue tolerated in the quartic form.
pub const QUARTIC_IMAG_TOLERANCE: f64 = 1e-9;

/// Noise prefactor `2/σ²`.
pub fn noise_gain(noise_variance: f64) -> f64 {
    2.0 / noise_variance
}

/// `N_t × N` transmit matrix with unit-modulus entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform(CMatrix);

impl Waveform {
    pub fn new(x: CMatrix) -> Result<Self> {
        for (index, z) in x.iter().enumerate() {
            let modulus = z.norm();
            if !modulus.is_finite() || (modulus - 1.0).abs() > UNIT_MODULUS_TOLERANCE {
                return Err(Error::NotUnimodular { index, modulus });
            }
        }
        Ok(Self(x))
    }

    /// Projects standard complex Gaussian samples onto the unit circle.
    pub fn random(n_tx: usize, n_samples: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, WAVEFORM_STREAM);
        let raw = CMatrix::from_fn(n_tx, n_samples, |_, _| complex_normal(&mut rng));
        Self(raw.map(linalg::project_entry))
    }

    /// Same as [`Waveform::random`] but from an arbitrary RNG.
    pub fn random_with(n_tx: usize, n_samples: usize, rng: &mut impl rand::Rng) -> Self {
        let mut inner = rand_chacha::ChaCha8Rng::seed_from_u64(rng.random());
        let raw = CMatrix::from_fn(n_tx, n_samples, |_, _| complex_normal(&mut inner));
        Self(raw.map(linalg::project_entry))
    }

    pub fn from_unit_vec(s: &UnitVector, n_tx: usize, n_samples: usize) -> Result<Self> {
        Ok(Self(unvec(s.as_vector(), n_tx, n_samples)?))
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn n_tx(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.0.ncols()
    }

    pub fn vec(&self) -> CVector {
        vec(&self.0)
    }

    /// `X̃ = Xᵀ ⊗ I_{N_r}`.
    pub fn expanded(&self, n_rx: usize) -> CMatrix {
        kron(&self.0.transpose(), &identity(n_rx))
    }
}

/// Stacked IRS phase shifts `ν = [v_1ᵀ, …, v_Mᵀ]ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    values: CVector,
    sizes: Vec<usize>,
}

impl PhaseProfile {
    pub fn new(values: CVector, sizes: Vec<usize>) -> Result<Self> {
        let total: usize = sizes.iter().sum();
        if total != values.len() || sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::dims(
                "PhaseProfile",
                format!("lengths {sizes:?}"),
                values.len(),
            ));
        }
        let values = UnitVector::new(values)?.into_inner();
        Ok(Self { values, sizes })
    }

    /// All-zero phases (every element passes the signal unchanged).
    pub fn zero_phase(sizes: &[usize]) -> Self {
        let total = sizes.iter().sum();
        Self {
            values: CVector::from_element(total, ONE),
            sizes: sizes.to_vec(),
        }
    }

    pub fn from_unit(values: UnitVector, sizes: &[usize]) -> Result<Self> {
        Self::new(values.into_inner(), sizes.to_vec())
    }

    pub fn random_with(sizes: &[usize], rng: &mut impl rand::Rng) -> Self {
        let total: usize = sizes.iter().sum();
        let phases: Vec<f64> = (0..total)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        Self {
            values: UnitVector::from_phases(&phases).into_inner(),
            sizes: sizes.to_vec(),
        }
    }

    pub fn as_vector(&self) -> &CVector {
        &self.values
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_irs(&self) -> usize {
        self.sizes.len()
    }

    pub fn offset(&self, m: usize) -> usize {
        self.sizes[..m].iter().sum()
    }

    /// Phase vector `v_m` of platform `m`.
    pub fn block(&self, m: usize) -> DVectorView<'_, Complex64> {
        self.values.rows(self.offset(m), self.sizes[m])
    }

    /// `Φ_m = Diag(v_m)`.
    pub fn phi(&self, m: usize) -> CMatrix {
        CMatrix::from_diagonal(&self.block(m))
    }

    pub fn truncated(&self, m: usize) -> Self {
        let sizes = self.sizes[..m].to_vec();
        let len = sizes.iter().sum();
        Self {
            values: self.values.rows(0, len).into_owned(),
            sizes,
        }
    }
}

fn irs_index(channels: &ChannelSet, m: usize, v_len: usize) -> Result<&crate::scene::IrsChannel> {
    let ch = channels
        .irs
        .get(m)
        .ok_or_else(|| Error::dims("irs index", format!("< {}", channels.n_irs()), m))?;
    if ch.n_elements != v_len {
        return Err(Error::dims("phase vector", ch.n_elements, v_len));
    }
    Ok(ch)
}

fn check_profile(nu: &PhaseProfile, channels: &ChannelSet) -> Result<()> {
    if nu.sizes() != channels.irs_sizes().as_slice() {
        return Err(Error::dims(
            "phase profile",
            format!("{:?}", channels.irs_sizes()),
            format!("{:?}", nu.sizes()),
        ));
    }
    Ok(())
}

fn check_alpha(alpha: &Reflectivities, channels: &ChannelSet) -> Result<()> {
    if alpha.len() != channels.n_irs() {
        return Err(Error::dims("reflectivities", channels.n_irs(), alpha.len()));
    }
    Ok(())
}

fn check_waveform(x: &Waveform, channels: &ChannelSet) -> Result<()> {
    if x.n_tx() != channels.n_tx {
        return Err(Error::dims("waveform rows", channels.n_tx, x.n_tx()));
    }
    Ok(())
}

/// `H_m = H_ir,m Φ_m b bᵀ Φ_m H_ri,m` with `b = b_m(θ_ti,m)`.
pub fn composite_channel(v_m: &CVector, channels: &ChannelSet, m: usize) -> Result<CMatrix> {
    let ch = irs_index(channels, m, v_m.len())?;
    let u = v_m.component_mul(ch.b_target.as_vector());
    let left = &ch.h_ir * &u;
    let right = ch.h_ri.transpose() * &u;
    Ok(left * right.transpose())
}

/// `∂H_m/∂θ` where every `θ_ti,m` moves with the LoS DoA.
pub fn channel_derivative(v_m: &CVector, channels: &ChannelSet, m: usize) -> Result<CMatrix> {
    let ch = irs_index(channels, m, v_m.len())?;
    let b = ch.b_target.as_vector();
    let ramp = CVector::from_fn(ch.n_elements, |k, _| Complex64::new(k as f64, 0.0));
    let u = v_m.component_mul(b);
    let w = u.component_mul(&ramp);
    let h_ri_t = ch.h_ri.transpose();
    let (hu, hw) = (&ch.h_ir * &u, &ch.h_ir * &w);
    let (ru, rw) = (&h_ri_t * &u, &h_ri_t * &w);
    let sum = hu * rw.transpose() + hw * ru.transpose();
    Ok(sum * ch.derivative_scale(channels.wavelength))
}

/// `Ḣ̃ = [vec Ḣ_1, …, vec Ḣ_M]`, an `N_r N_t × M` matrix.
pub fn stacked_derivative(nu: &PhaseProfile, channels: &ChannelSet) -> Result<CMatrix> {
    check_profile(nu, channels)?;
    let rows = channels.n_rx * channels.n_tx;
    let mut out = CMatrix::zeros(rows, channels.n_irs());
    for m in 0..channels.n_irs() {
        let d = channel_derivative(&nu.block(m).into_owned(), channels, m)?;
        out.set_column(m, &vec(&d));
    }
    Ok(out)
}

/// `Σ_m α_m Ḣ_m`, i.e. `unvec(Ḣ̃ α)`.
pub fn effective_derivative(
    nu: &PhaseProfile,
    alpha: &Reflectivities,
    channels: &ChannelSet,
) -> Result<CMatrix> {
    check_profile(nu, channels)?;
    check_alpha(alpha, channels)?;
    let mut acc = CMatrix::zeros(channels.n_rx, channels.n_tx);
    for m in 0..channels.n_irs() {
        acc += channel_derivative(&nu.block(m).into_owned(), channels, m)? * alpha.0[m];
    }
    Ok(acc)
}

/// Fisher information in direct form, built from `X̃ = Xᵀ ⊗ I_{N_r}` and `Ḣ̃`.
pub fn fisher_direct(
    x: &Waveform,
    nu: &PhaseProfile,
    alpha: &Reflectivities,
    channels: &ChannelSet,
    noise_variance: f64,
) -> Result<f64> {
    check_waveform(x, channels)?;
    check_alpha(alpha, channels)?;
    let h_dot = stacked_derivative(nu, channels)?;
    let mean_derivative = x.expanded(channels.n_rx) * (h_dot * alpha.as_vector());
    Ok(noise_gain(noise_variance) * mean_derivative.norm_squared())
}

/// `F = gain · ‖(Σ α_m Ḣ_m) X‖_F²` from a precomputed effective derivative.
pub fn fisher_from_derivative(effective: &CMatrix, x: &Waveform, gain: f64) -> f64 {
    gain * (effective * x.as_matrix()).norm_squared()
}

/// `B = (√2/σ) unvec(Ḣ̃ α)`, `N_r × N_t`.
pub fn b_matrix(
    nu: &PhaseProfile,
    alpha: &Reflectivities,
    channels: &ChannelSet,
    noise_variance: f64,
) -> Result<CMatrix> {
    let h_dot = stacked_derivative(nu, channels)?;
    check_alpha(alpha, channels)?;
    let b = unvec(&(h_dot * alpha.as_vector()), channels.n_rx, channels.n_tx)?;
    Ok(b * Complex64::from(noise_gain(noise_variance).sqrt()))
}

/// `G = (I_N ⊗ B)ᴴ (I_N ⊗ B)`, the `N_t N × N_t N` waveform Gram matrix.
pub fn waveform_gram(
    nu: &PhaseProfile,
    alpha: &Reflectivities,
    channels: &ChannelSet,
    noise_variance: f64,
    n_samples: usize,
) -> Result<CMatrix> {
    let b = b_matrix(nu, alpha, channels, noise_variance)?;
    let lifted = kron(&identity(n_samples), &b);
    Ok(lifted.adjoint() * lifted)
}

/// The linear maps `D_m` with `vec(Ḣ_m) = D_m vec(v_m v_mᵀ)`.
///
/// `D_m = b_m [(C_mᵀ diag(d) ⊗ C_mᵀ) + (C_mᵀ ⊗ C_mᵀ diag(d))]` with
/// `C_m = Diag(b_m(θ_ti,m)) H_ri,m`; the derivative scalar `b_m` is folded in.
#[derive(Debug, Clone)]
pub struct PhaseOperators {
    blocks: Vec<CMatrix>,
    sizes: Vec<usize>,
    n_rx: usize,
    n_tx: usize,
}

/// Builds `D_1 … D_M`. Requires the reciprocal model (`N_r = N_t`).
pub fn build_d(channels: &ChannelSet) -> Result<PhaseOperators> {
    if channels.n_rx != channels.n_tx {
        return Err(Error::ReciprocityRequired {
            n_tx: channels.n_tx,
            n_rx: channels.n_rx,
        });
    }
    let blocks = channels
        .irs
        .iter()
        .map(|ch| {
            let c_t = (CMatrix::from_diagonal(ch.b_target.as_vector()) * &ch.h_ri).transpose();
            let ramp = CVector::from_fn(ch.n_elements, |k, _| Complex64::new(k as f64, 0.0));
            let c_t_ramp = &c_t * CMatrix::from_diagonal(&ramp);
            (kron(&c_t_ramp, &c_t) + kron(&c_t, &c_t_ramp))
                * ch.derivative_scale(channels.wavelength)
        })
        .collect();
    Ok(PhaseOperators {
        blocks,
        sizes: channels.irs_sizes(),
        n_rx: channels.n_rx,
        n_tx: channels.n_tx,
    })
}

impl PhaseOperators {
    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [CMatrix] {
        &mut self.blocks
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `D = Diag(D_1, …, D_M)`.
    pub fn d_matrix(&self) -> CMatrix {
        block_diag(&self.blocks).expect("at least one IRS")
    }

    /// `T` assembled blockwise: `T_{m,m'} = gain · ᾱ_m α_{m'} D_mᴴ (X̃ᴴX̃) D_{m'}`.
    pub fn t_matrix(&self, x: &Waveform, alpha: &Reflectivities, gain: f64) -> Result<CMatrix> {
        if x.n_tx() != self.n_tx {
            return Err(Error::dims("waveform rows", self.n_tx, x.n_tx()));
        }
        if alpha.len() != self.blocks.len() {
            return Err(Error::dims(
                "reflectivities",
                self.blocks.len(),
                alpha.len(),
            ));
        }
        let xm = x.as_matrix();
        let outer = xm.conjugate() * xm.transpose();
        let w = kron(&outer, &identity(self.n_rx));
        let wd: Vec<CMatrix> = self.blocks.iter().map(|d| &w * d).collect();
        let squares: Vec<usize> = self.sizes.iter().map(|n| n * n).collect();
        let total: usize = squares.iter().sum();
        let mut t = CMatrix::zeros(total, total);
        let mut r0 = 0;
        for (m, dm) in self.blocks.iter().enumerate() {
            let mut c0 = 0;
            let dm_h = dm.adjoint();
            for (mp, wdp) in wd.iter().enumerate() {
                let coef = alpha.0[m].conj() * alpha.0[mp] * gain;
                let blk = &dm_h * wdp * coef;
                t.view_mut((r0, c0), (squares[m], squares[mp]))
                    .copy_from(&blk);
                c0 += squares[mp];
            }
            r0 += squares[m];
        }
        Ok(t)
    }
}

/// `T = Dᴴ Pᴴ Z* P D` assembled from the commutation matrix `P` and
/// `Z = (I_{N_rN_t} ⊗ α*αᵀ)ᵀ (X̃ᵀ X̃* ⊗ I_M)`, scaled by `2/σ²`.
pub fn build_t(
    x: &Waveform,
    alpha: &Reflectivities,
    channels: &ChannelSet,
    noise_variance: f64,
) -> Result<CMatrix> {
    let ops = build_d(channels)?;
    build_t_from(&ops, x, alpha, channels.n_rx, noise_variance)
}

/// [`build_t`] with a caller-supplied `D` stack.
pub fn build_t_from(
    ops: &PhaseOperators,
    x: &Waveform,
    alpha: &Reflectivities,
    n_rx: usize,
    noise_variance: f64,
) -> Result<CMatrix> {
    if alpha.len() != ops.blocks.len() {
        return Err(Error::dims("reflectivities", ops.blocks.len(), alpha.len()));
    }
    let m = alpha.len();
    let nn = n_rx * x.n_tx();
    let a = alpha.as_vector();
    let aa = a.conjugate() * a.transpose();
    let xt = x.expanded(n_rx);
    let z = kron(&identity(nn), &aa).transpose()
        * kron(&(xt.transpose() * xt.conjugate()), &identity(m));
    let p = commutation_matrix(nn, m);
    let d = ops.d_matrix();
    let pd = &p * &d;
    let t = pd.adjoint() * z.conjugate() * pd;
    Ok(t * Complex64::from(noise_gain(noise_variance)))
}

/// `Q₁(ν) = Diag(v_1 ⊗ I, …, v_M ⊗ I)`.
pub fn q1(nu: &PhaseProfile) -> CMatrix {
    let blocks: Vec<CMatrix> = (0..nu.n_irs())
        .map(|m| {
            let v = nu.block(m).into_owned();
            kron(
                &CMatrix::from_column_slice(v.len(), 1, v.as_slice()),
                &identity(v.len()),
            )
        })
        .collect();
    block_diag(&blocks).expect("nonempty profile")
}

/// `Q₂(ν) = Diag(I ⊗ v_1, …, I ⊗ v_M)`.
pub fn q2(nu: &PhaseProfile) -> CMatrix {
    let blocks: Vec<CMatrix> = (0..nu.n_irs())
        .map(|m| {
            let v = nu.block(m).into_owned();
            kron(
                &identity(v.len()),
                &CMatrix::from_column_slice(v.len(), 1, v.as_slice()),
            )
        })
        .collect();
    block_diag(&blocks).expect("nonempty profile")
}

/// Stacked `vec(v_m v_mᵀ)`, equal to `Q₁(ν)ν`.
pub fn lift(nu: &PhaseProfile) -> CVector {
    let total: usize = nu.sizes().iter().map(|n| n * n).sum();
    let mut z = CVector::zeros(total);
    let mut off = 0;
    for m in 0..nu.n_irs() {
        let v = nu.block(m);
        let n = v.len();
        for i in 0..n {
            for k in 0..n {
                z[off + i * n + k] = v[i] * v[k];
            }
        }
        off += n * n;
    }
    z
}

fn check_t(nu: &PhaseProfile, t: &CMatrix) -> Result<()> {
    let expected: usize = nu.sizes().iter().map(|n| n * n).sum();
    if t.shape() != (expected, expected) {
        return Err(Error::dims(
            "T",
            format!("{expected}x{expected}"),
            format!("{}x{}", t.nrows(), t.ncols()),
        ));
    }
    Ok(())
}

/// `νᴴ Q₁(ν)ᴴ T Q₁(ν) ν`. Errors when the imaginary part is not roundoff.
pub fn fisher_quartic(nu: &PhaseProfile, t: &CMatrix) -> Result<f64> {
    check_t(nu, t)?;
    let z = lift(nu);
    let value = z.dotc(&(t * &z));
    let scale = value.norm();
    if scale > 0.0 && value.im.abs() / scale > QUARTIC_IMAG_TOLERANCE {
        return Err(Error::ImaginaryResidue {
            relative: value.im.abs() / scale,
        });
    }
    Ok(value.re)
}

#[derive(Clone, Copy)]
enum Lift {
    First,
    Second,
}

/// `Q_iᴴ(ν) T Q_i(ν)` evaluated blockwise without forming `Q_i`.
fn lifted_gram(nu: &PhaseProfile, t: &CMatrix, kind: Lift) -> CMatrix {
    let n_total = nu.len();
    let mut out = CMatrix::zeros(n_total, n_total);
    let sizes = nu.sizes();
    let mut r_sq = 0;
    for m in 0..sizes.len() {
        let (vm, nm) = (nu.block(m), sizes[m]);
        let r_off = nu.offset(m);
        let mut c_sq = 0;
        for (mp, &np) in sizes.iter().enumerate() {
            let vp = nu.block(mp);
            let c_off = nu.offset(mp);
            for a in 0..nm {
                for b in 0..np {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..nm {
                        let ci = vm[i].conj();
                        for k in 0..np {
                            let (row, col) = match kind {
                                Lift::First => (i * nm + a, k * np + b),
                                Lift::Second => (a * nm + i, b * np + k),
                            };
                            acc += ci * vp[k] * t[(r_sq + row, c_sq + col)];
                        }
                    }
                    out[(r_off + a, c_off + b)] = acc;
                }
            }
            c_sq += np * np;
        }
        r_sq += nm * nm;
    }
    out
}

/// `G₁(ν) = Q₁(ν)ᴴ T Q₁(ν)`.
pub fn g1(nu: &PhaseProfile, t: &CMatrix) -> Result<CMatrix> {
    check_t(nu, t)?;
    Ok(lifted_gram(nu, t, Lift::First))
}

/// `G₂(ν) = Q₂(ν)ᴴ T Q₂(ν)`.
pub fn g2(nu: &PhaseProfile, t: &CMatrix) -> Result<CMatrix> {
    check_t(nu, t)?;
    Ok(lifted_gram(nu, t, Lift::Second))
}

/// `E(ν) = (G₁(ν) + G₂(ν)) / 2`, so that `ν₁ᴴ E(ν₂) ν₁ = g(ν₁, ν₂)`.
pub fn e_matrix(nu_fixed: &PhaseProfile, t: &CMatrix) -> Result<CMatrix> {
    check_t(nu_fixed, t)?;
    let sum = lifted_gram(nu_fixed, t, Lift::First) + lifted_gram(nu_fixed, t, Lift::Second);
    Ok(sum.scale(0.5))
}

/// Bi-quadratic surrogate `g(ν₁, ν₂) = ½(ν₁ᴴG₁(ν₂)ν₁ + ν₂ᴴG₁(ν₁)ν₂)`.
pub fn bi_quadratic(nu1: &PhaseProfile, nu2: &PhaseProfile, t: &CMatrix) -> Result<f64> {
    let a = linalg::quadratic_form(&g1(nu2, t)?, nu1.as_vector());
    let b = linalg::quadratic_form(&g1(nu1, t)?, nu2.as_vector());
    Ok(0.5 * (a + b))
}

/// LoS channel `a_r(θ) a_t(θ)ᵀ`.
pub fn los_channel(theta: f64, cfg: &SceneConfig) -> CMatrix {
    let a_r = steering(cfg.n_rx, cfg.radar_spacing, cfg.wavelength, theta);
    let a_t = steering(cfg.n_tx, cfg.radar_spacing, cfg.wavelength, theta);
    a_r.as_vector() * a_t.as_vector().transpose()
}

/// `∂(a_r a_tᵀ)/∂θ = j(2πd/λ) cos θ [(d′⊙a_r) a_tᵀ + a_r (d′⊙a_t)ᵀ]`.
pub fn los_derivative(theta: f64, cfg: &SceneConfig) -> Result<CMatrix> {
    if cfg.n_rx != cfg.n_tx {
        return Err(Error::ReciprocityRequired {
            n_tx: cfg.n_tx,
            n_rx: cfg.n_rx,
        });
    }
    let a_r = steering(cfg.n_rx, cfg.radar_spacing, cfg.wavelength, theta).into_inner();
    let a_t = steering(cfg.n_tx, cfg.radar_spacing, cfg.wavelength, theta).into_inner();
    let ramp = CVector::from_fn(cfg.n_rx, |k, _| Complex64::new(k as f64, 0.0));
    let scale = Complex64::new(
        0.0,
        2.0 * std::f64::consts::PI * cfg.radar_spacing / cfg.wavelength * theta.cos(),
    );
    let sum =
        ramp.component_mul(&a_r) * a_t.transpose() + &a_r * ramp.component_mul(&a_t).transpose();
    Ok(sum * scale)
}

/// Fisher information of the LoS-only radar, `(2|α|²/σ²)‖X̃ vec(Ḣ_rtr)‖²`.
pub fn fisher_no_irs(
    x: &Waveform,
    theta: f64,
    alpha_los: Complex64,
    cfg: &SceneConfig,
) -> Result<f64> {
    if x.n_tx() != cfg.n_tx {
        return Err(Error::dims("waveform rows", cfg.n_tx, x.n_tx()));
    }
    let h_dot = los_derivative(theta, cfg)?;
    let mean = x.expanded(cfg.n_rx) * vec(&h_dot);
    Ok(noise_gain(cfg.noise_variance) * alpha_los.norm_sqr() * mean.norm_squared())
}

/// `CRLB = 1/F`.
pub fn crlb(fisher: f64) -> Result<f64> {
    if fisher > 0.0 && fisher.is_finite() {
        Ok(1.0 / fisher)
    } else {
        Err(Error::SingularInformation { fisher })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_channels, draw_reflectivities, IrsConfig, Point};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_scene(nt: usize, nm: usize, m: usize) -> SceneConfig {
        let mut cfg = SceneConfig::reference(0);
        cfg.n_tx = nt;
        cfg.n_rx = nt;
        cfg.n_samples = 4;
        let sites = [
            Point::new(500.0, 500.0),
            Point::new(500.0, -800.0),
            Point::new(300.0, 1300.0),
        ];
        cfg.irs = sites[..m]
            .iter()
            .map(|&position| IrsConfig {
                position,
                n_elements: nm,
                spacing: cfg.wavelength / 2.0,
            })
            .collect();
        cfg
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn composite_with_identity_phases() {
        let ch = build_channels(&small_scene(3, 4, 1)).unwrap();
        let ones = CVector::from_element(4, ONE);
        let h = composite_channel(&ones, &ch, 0).unwrap();
        let b = ch.irs[0].b_target.as_vector();
        let expected = &ch.irs[0].h_ir * (b * b.transpose()) * &ch.irs[0].h_ri;
        assert!((&h - &expected).norm() < 1e-10 * expected.norm());
        assert_eq!(h.rank(1e-8 * h.norm()), 1);
    }

    #[test]
    fn composite_matches_five_factor_product() {
        let ch = build_channels(&small_scene(3, 4, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in 0..2 {
            let nu = PhaseProfile::random_with(&[4, 4], &mut rng);
            let v = nu.block(m).into_owned();
            let irs = &ch.irs[m];
            let oracle = &irs.h_ir * nu.phi(m) * irs.h_ti() * irs.h_it() * nu.phi(m) * &irs.h_ri;
            let h = composite_channel(&v, &ch, m).unwrap();
            assert!((&h - &oracle).norm() <= 1e-12 * oracle.norm());
        }
    }

    #[test]
    fn derivative_zero_cases() {
        let ch = build_channels(&small_scene(2, 1, 1)).unwrap();
        let d = channel_derivative(&CVector::from_element(1, ONE), &ch, 0).unwrap();
        assert_eq!(d.norm(), 0.0);

        let mut ch = build_channels(&small_scene(2, 3, 1)).unwrap();
        ch.irs[0].angle_target = std::f64::consts::FRAC_PI_2;
        let d = channel_derivative(&CVector::from_element(3, ONE), &ch, 0).unwrap();
        assert!(d.norm() < 1e-12);
    }

    #[test]
    fn derivative_rejects_bad_dims() {
        let ch = build_channels(&small_scene(2, 3, 1)).unwrap();
        assert!(channel_derivative(&CVector::from_element(2, ONE), &ch, 0).is_err());
        assert!(channel_derivative(&CVector::from_element(3, ONE), &ch, 1).is_err());
    }

    #[test]
    fn fisher_zero_alpha_and_noise_scaling() {
        let cfg = small_scene(2, 2, 2);
        let ch = build_channels(&cfg).unwrap();
        let x = Waveform::random(2, 4, 1);
        let nu = PhaseProfile::zero_phase(&[2, 2]);
        let zero = Reflectivities(CVector::zeros(2));
        assert_eq!(fisher_direct(&x, &nu, &zero, &ch, 0.1).unwrap(), 0.0);
        let alpha = draw_reflectivities(2, 3);
        let f1 = fisher_direct(&x, &nu, &alpha, &ch, 0.5).unwrap();
        let f2 = fisher_direct(&x, &nu, &alpha, &ch, 1.0).unwrap();
        assert!(f1 > 0.0);
        assert_eq!(f2, 0.5 * f1);
    }

    #[test]
    fn gram_matches_direct_and_is_psd() {
        let cfg = small_scene(2, 3, 2);
        let ch = build_channels(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let alpha = draw_reflectivities(2, 11);
        for _ in 0..100 {
            let nu = PhaseProfile::random_with(&[3, 3], &mut rng);
            let x = Waveform::random_with(2, 5, &mut rng);
            let g = waveform_gram(&nu, &alpha, &ch, 0.3, 5).unwrap();
            let quad = linalg::quadratic_form(&g, &x.vec());
            let direct = fisher_direct(&x, &nu, &alpha, &ch, 0.3).unwrap();
            assert!(rel(quad, direct) <= 1e-10);
            let b = b_matrix(&nu, &alpha, &ch, 0.3).unwrap();
            let eff = effective_derivative(&nu, &alpha, &ch).unwrap();
            assert!(rel(fisher_from_derivative(&eff, &x, noise_gain(0.3)), direct) <= 1e-10);
            assert!(
                (b.norm_squared() * 0.3 / 2.0 - eff.norm_squared()).abs()
                    <= 1e-9 * eff.norm_squared()
            );
        }
        let nu = PhaseProfile::random_with(&[3, 3], &mut rng);
        let g = waveform_gram(&nu, &alpha, &ch, 0.3, 3).unwrap();
        let (lo, _) = linalg::hermitian_extreme_eigs(&g).unwrap();
        assert!(lo >= -1e-10 * g.norm());
    }

    #[test]
    fn gram_vanishes_for_single_element_irs() {
        let ch = build_channels(&small_scene(2, 1, 1)).unwrap();
        let g = waveform_gram(
            &PhaseProfile::zero_phase(&[1]),
            &draw_reflectivities(1, 1),
            &ch,
            1.0,
            3,
        )
        .unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn d_reproduces_channel_derivative() {
        let ch = build_channels(&small_scene(3, 3, 2)).unwrap();
        let ops = build_d(&ch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let nu = PhaseProfile::random_with(&[3, 3], &mut rng);
            let z = lift(&nu);
            let mut off = 0;
            for m in 0..2 {
                let v = nu.block(m).into_owned();
                let direct = vec(&channel_derivative(&v, &ch, m).unwrap());
                let via_d = &ops.blocks()[m] * z.rows(off, 9);
                assert!((&direct - &via_d).norm() <= 1e-10 * direct.norm());
                off += 9;
            }
            let stacked = ops.d_matrix() * &z;
            let h_dot = stacked_derivative(&nu, &ch).unwrap();
            assert!((stacked - vec(&h_dot)).norm() <= 1e-10 * h_dot.norm());
        }
        let ch1 = build_channels(&small_scene(2, 1, 1)).unwrap();
        assert_eq!(build_d(&ch1).unwrap().blocks()[0].norm(), 0.0);
    }

    #[test]
    fn d_requires_reciprocity() {
        let mut ch = build_channels(&small_scene(2, 2, 1)).unwrap();
        ch.n_rx = 3;
        assert!(matches!(
            build_d(&ch),
            Err(Error::ReciprocityRequired { .. })
        ));
    }

    #[test]
    fn t_forms_agree() {
        let cfg = small_scene(2, 2, 2);
        let ch = build_channels(&cfg).unwrap();
        let ops = build_d(&ch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let alpha = draw_reflectivities(2, 14);
        for _ in 0..100 {
            let x = Waveform::random_with(2, 4, &mut rng);
            let nu = PhaseProfile::random_with(&[2, 2], &mut rng);
            let t = build_t(&x, &alpha, &ch, 0.7).unwrap();
            let t_fast = ops.t_matrix(&x, &alpha, noise_gain(0.7)).unwrap();
            assert!((&t - &t_fast).norm() <= 1e-10 * t.norm());
            assert!(linalg::hermitian_deviation(&t) <= 1e-9);
            let direct = fisher_direct(&x, &nu, &alpha, &ch, 0.7).unwrap();
            let quartic = fisher_quartic(&nu, &t).unwrap();
            assert!(rel(direct, quartic) <= 1e-9, "{direct} vs {quartic}");
        }
        let zero = Reflectivities(CVector::zeros(2));
        let t0 = build_t(&Waveform::random(2, 4, 0), &zero, &ch, 1.0).unwrap();
        assert_eq!(t0.norm(), 0.0);
    }

    #[test]
    fn q_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let sizes = [3, 2, 3];
        for _ in 0..50 {
            let a = PhaseProfile::random_with(&sizes, &mut rng);
            let b = PhaseProfile::random_with(&sizes, &mut rng);
            let za = q1(&a) * a.as_vector();
            assert!((&za - q2(&a) * a.as_vector()).norm() < 1e-13);
            assert!((&za - lift(&a)).norm() < 1e-13);
            let lhs = q1(&a) * b.as_vector();
            let rhs = q2(&b) * a.as_vector();
            assert!((lhs - rhs).norm() < 1e-13);
        }
        let single = PhaseProfile::from_unit(UnitVector::from_phases(&[0.4]), &[1]).unwrap();
        assert_eq!(
            q1(&single),
            CMatrix::from_element(1, 1, single.as_vector()[0])
        );
        assert_eq!(q2(&single), q1(&single));
    }

    #[test]
    fn quartic_double_form_and_g_consistency() {
        let cfg = small_scene(2, 3, 2);
        let ch = build_channels(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let alpha = draw_reflectivities(2, 17);
        let x = Waveform::random(2, 4, 18);
        let t = build_t(&x, &alpha, &ch, 1.0).unwrap();
        for _ in 0..30 {
            let n1 = PhaseProfile::random_with(&[3, 3], &mut rng);
            let n2 = PhaseProfile::random_with(&[3, 3], &mut rng);
            let f = fisher_quartic(&n1, &t).unwrap();
            let z2 = q2(&n1) * n1.as_vector();
            let via_q2 = z2.dotc(&(&t * &z2)).re;
            assert!(rel(f, via_q2) <= 1e-10);

            let explicit_g1 = q1(&n2).adjoint() * &t * q1(&n2);
            let explicit_g2 = q2(&n2).adjoint() * &t * q2(&n2);
            assert!((g1(&n2, &t).unwrap() - &explicit_g1).norm() <= 1e-10 * explicit_g1.norm());
            assert!((g2(&n2, &t).unwrap() - &explicit_g2).norm() <= 1e-10 * explicit_g2.norm());

            let e = e_matrix(&n2, &t).unwrap();
            assert!(linalg::hermitian_deviation(&e) <= 1e-9);
            let g = bi_quadratic(&n1, &n2, &t).unwrap();
            assert!(rel(linalg::quadratic_form(&e, n1.as_vector()), g) <= 1e-10);
            assert!(rel(g, bi_quadratic(&n2, &n1, &t).unwrap()) <= 1e-10);
            assert!(rel(bi_quadratic(&n1, &n1, &t).unwrap(), f) <= 1e-10);
        }
        let ones = PhaseProfile::zero_phase(&[3, 3]);
        let direct = fisher_direct(&x, &ones, &alpha, &ch, 1.0).unwrap();
        assert!(rel(fisher_quartic(&ones, &t).unwrap(), direct) <= 1e-9);
    }

    #[test]
    fn quartic_rejects_non_hermitian_t() {
        let nu = PhaseProfile::zero_phase(&[2]);
        let mut t = CMatrix::zeros(4, 4);
        t[(0, 1)] = Complex64::new(0.0, 1.0);
        assert!(matches!(
            fisher_quartic(&nu, &t),
            Err(Error::ImaginaryResidue { .. })
        ));
        assert!(fisher_quartic(&nu, &CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn no_irs_cases() {
        let cfg = small_scene(4, 2, 1);
        let x = Waveform::random(4, 6, 3);
        assert!(fisher_no_irs(&x, std::f64::consts::FRAC_PI_2, ONE, &cfg).unwrap() < 1e-20);
        assert_eq!(
            fisher_no_irs(&x, 0.3, Complex64::new(0.0, 0.0), &cfg).unwrap(),
            0.0
        );
        let f = fisher_no_irs(&x, 0.3, Complex64::new(0.6, -0.8), &cfg).unwrap();
        let direct = noise_gain(cfg.noise_variance)
            * (los_derivative(0.3, &cfg).unwrap() * x.as_matrix()).norm_squared();
        assert!(rel(f, direct) < 1e-12);
        let h = 1e-7;
        let fd =
            (los_channel(0.3 + h, &cfg) - los_channel(0.3 - h, &cfg)) / Complex64::from(2.0 * h);
        let an = los_derivative(0.3, &cfg).unwrap();
        assert!((fd - &an).norm() <= 1e-6 * an.norm());
    }

    #[test]
    fn crlb_inverts() {
        assert_eq!(crlb(2.0).unwrap(), 0.5);
        assert!(matches!(crlb(0.0), Err(Error::SingularInformation { .. })));
        assert!(crlb(-1.0).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(PhaseProfile::new(CVector::from_element(3, ONE), vec![2, 2]).is_err());
        assert!(
            PhaseProfile::new(CVector::from_element(2, Complex64::new(2.0, 0.0)), vec![2]).is_err()
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let _: f64 = rng.random();
        assert!(Waveform::new(CMatrix::from_element(2, 2, Complex64::new(0.5, 0.0))).is_err());
    }
}
