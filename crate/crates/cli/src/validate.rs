//! Randomized invariant suite behind the `validate` subcommand.

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use irsradar_core::fisher::{self, build_d, build_t_from, PhaseOperators};
use irsradar_core::linalg::{self, commutation_matrix, kron, unvec, vec, CMatrix, CVector};
use irsradar_core::scene::{build_channels, draw_reflectivities, seeded_rng};
use irsradar_core::uqp::{self, UqpProblem};
use irsradar_core::{
    IrsConfig, PhaseProfile, Point, Reflectivities, SceneConfig, UnitVector, Waveform,
};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Applied to the `D` operators before the quartic form is evaluated.
pub type DMutation = fn(&mut PhaseOperators);

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub quick: bool,
    pub seed: u64,
    pub d_mutation: Option<DMutation>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            quick: false,
            seed: 0x5eed,
            d_mutation: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub name: &'static str,
    pub cases: usize,
    pub worst_error: f64,
    pub tolerance: f64,
    pub elapsed: Duration,
    pub failure: Option<String>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.worst_error <= self.tolerance
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<24} cases={:<5} worst={:.3e} tol={:.0e} ({:.2?})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst_error,
            self.tolerance,
            self.elapsed
        )?;
        if let Some(msg) = &self.failure {
            write!(f, " error: {msg}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub properties: Vec<PropertyReport>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.properties.iter().all(PropertyReport::passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyReport> {
        self.properties.iter().find(|p| p.name == name)
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn rel_matrix_err(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

/// Dimensions of a randomized scene.
#[derive(Debug, Clone, Copy)]
pub struct SceneDims {
    pub n_antennas: usize,
    pub n_elements: usize,
    pub n_irs: usize,
    pub n_samples: usize,
}

impl SceneDims {
    /// `N_t = N_r ∈ 2..=4`, `N_m ∈ 2..=3`, `M ∈ 1..=3`, `N ∈ 4..=8`.
    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            n_antennas: rng.random_range(2..=4),
            n_elements: rng.random_range(2..=3),
            n_irs: rng.random_range(1..=3),
            n_samples: rng.random_range(4..=8),
        }
    }
}

/// Target at 2–8 km within ±60° of broadside, IRS platforms scattered
/// around the radar. Geometries with grazing target–IRS links are redrawn.
pub fn random_scene(rng: &mut impl Rng, dims: SceneDims) -> SceneConfig {
    loop {
        let mut cfg = SceneConfig::reference(0);
        cfg.n_tx = dims.n_antennas;
        cfg.n_rx = dims.n_antennas;
        cfg.n_samples = dims.n_samples;
        cfg.noise_variance = 10f64.powf(rng.random_range(-2.0..1.0));
        let range = rng.random_range(2000.0..8000.0);
        let bearing: f64 = rng.random_range(-PI / 3.0..PI / 3.0);
        cfg.target_position = Point::new(range * bearing.sin(), range * bearing.cos());
        cfg.irs = (0..dims.n_irs)
            .map(|_| IrsConfig {
                position: Point::new(
                    rng.random_range(-1500.0..1500.0),
                    rng.random_range(-1500.0..1500.0),
                ),
                n_elements: dims.n_elements,
                spacing: cfg.wavelength / 2.0,
            })
            .collect();
        let Ok(ch) = build_channels(&cfg) else {
            continue;
        };
        let grazing = ch
            .irs
            .iter()
            .any(|c| c.angle_target.cos().abs() < 0.05 || c.angle_radar.cos().abs() < 0.05);
        if !grazing {
            return cfg;
        }
    }
}

pub fn random_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| random_complex(rng))
}

/// `A Aᴴ` for a random square `A`, optionally rank-deficient.
pub fn random_psd(rng: &mut impl Rng, n: usize) -> CMatrix {
    let rank = rng.random_range(1..=n);
    let a = random_matrix(rng, n, rank);
    linalg::symmetrize(&(&a * a.adjoint()))
}

struct Tracker {
    worst: f64,
    failure: Option<String>,
}

impl Tracker {
    fn new() -> Self {
        Self {
            worst: 0.0,
            failure: None,
        }
    }

    fn record(&mut self, err: f64) {
        if err.is_nan() {
            self.worst = f64::INFINITY;
        } else {
            self.worst = self.worst.max(err);
        }
    }

    fn check<T>(&mut self, r: irsradar_core::Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.failure.get_or_insert_with(|| e.to_string());
                None
            }
        }
    }
}

fn property(
    name: &'static str,
    cases: usize,
    tolerance: f64,
    rng: &mut ChaCha8Rng,
    mut body: impl FnMut(&mut ChaCha8Rng, &mut Tracker),
) -> PropertyReport {
    let start = Instant::now();
    let mut t = Tracker::new();
    for _ in 0..cases {
        body(rng, &mut t);
    }
    PropertyReport {
        name,
        cases,
        worst_error: t.worst,
        tolerance,
        elapsed: start.elapsed(),
        failure: t.failure,
    }
}

/// Direct, waveform-quadratic and quartic Fisher forms on one instance.
/// Returns the worst pairwise relative discrepancy.
pub fn fisher_forms_discrepancy(
    rng: &mut impl Rng,
    d_mutation: Option<DMutation>,
) -> irsradar_core::Result<f64> {
    let dims = SceneDims::random(rng);
    let cfg = random_scene(rng, dims);
    let ch = build_channels(&cfg)?;
    let sizes = ch.irs_sizes();
    let nu = PhaseProfile::random_with(&sizes, rng);
    let x = Waveform::random_with(cfg.n_tx, cfg.n_samples, rng);
    let alpha = Reflectivities(CVector::from_fn(dims.n_irs, |_, _| random_complex(rng)));
    let sigma2 = cfg.noise_variance;

    let direct = fisher::fisher_direct(&x, &nu, &alpha, &ch, sigma2)?;
    let g = fisher::waveform_gram(&nu, &alpha, &ch, sigma2, cfg.n_samples)?;
    let quadratic = linalg::quadratic_form(&g, &x.vec());
    let mut ops = build_d(&ch)?;
    if let Some(mutate) = d_mutation {
        mutate(&mut ops);
    }
    let t = build_t_from(&ops, &x, &alpha, cfg.n_rx, sigma2)?;
    let quartic = fisher::fisher_quartic(&nu, &t)?;
    Ok(rel_err(direct, quadratic)
        .max(rel_err(direct, quartic))
        .max(rel_err(quadratic, quartic)))
}

/// Worst relative Frobenius error between `Ḣ_m` and a central difference of
/// `H_m` in the DoA, over all platforms of one random scene.
pub fn derivative_discrepancy(rng: &mut impl Rng, step: f64) -> irsradar_core::Result<f64> {
    let dims = SceneDims::random(rng);
    let cfg = random_scene(rng, dims);
    let ch = build_channels(&cfg)?;
    let plus = ch.with_doa_shift(step);
    let minus = ch.with_doa_shift(-step);
    let mut worst: f64 = 0.0;
    for m in 0..ch.n_irs() {
        let v = PhaseProfile::random_with(&[ch.irs[m].n_elements], rng)
            .as_vector()
            .clone();
        let analytic = fisher::channel_derivative(&v, &ch, m)?;
        let fd = (fisher::composite_channel(&v, &plus, m)?
            - fisher::composite_channel(&v, &minus, m)?)
            / Complex64::new(2.0 * step, 0.0);
        worst = worst.max(rel_matrix_err(&analytic, &fd));
    }
    let analytic = fisher::los_derivative(ch.theta, &cfg)?;
    let fd = (fisher::los_channel(ch.theta + step, &cfg)
        - fisher::los_channel(ch.theta - step, &cfg))
        / Complex64::new(2.0 * step, 0.0);
    Ok(worst.max(rel_matrix_err(&analytic, &fd)))
}

/// Largest relative decrease between consecutive PMLI objectives.
pub fn pmli_worst_decrease(
    rng: &mut impl Rng,
    n: usize,
    iterations: usize,
) -> irsradar_core::Result<f64> {
    let g = random_psd(rng, n);
    let start = UnitVector::from_phases(
        &(0..n)
            .map(|_| rng.random_range(-PI..PI))
            .collect::<Vec<_>>(),
    );
    let result = uqp::solve(
        &UqpProblem::new(g, start)?
            .with_max_iterations(iterations)
            .with_stall_tolerance(0.0),
    )?;
    Ok(result
        .objective_trace
        .windows(2)
        .map(|w| (w[0] - w[1]) / w[0].abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max))
}

pub fn q_identity(rng: &mut impl Rng) -> f64 {
    let sizes: Vec<usize> = (0..rng.random_range(1..=3))
        .map(|_| rng.random_range(1..=4))
        .collect();
    let nu1 = PhaseProfile::random_with(&sizes, rng);
    let nu2 = PhaseProfile::random_with(&sizes, rng);
    let lhs = fisher::q1(&nu1) * nu2.as_vector();
    let rhs = fisher::q2(&nu2) * nu1.as_vector();
    let lift = fisher::q1(&nu1) * nu1.as_vector();
    let lift_err = (&lift - fisher::lift(&nu1)).norm() / lift.norm();
    ((&lhs - &rhs).norm() / lhs.norm().max(rhs.norm())).max(lift_err)
}

pub fn vec_kron_identities(rng: &mut impl Rng) -> f64 {
    let (p, q, r) = (
        rng.random_range(1..=4),
        rng.random_range(1..=4),
        rng.random_range(1..=4),
    );
    let a = random_matrix(rng, p, q);
    let b = random_matrix(rng, q, r);
    let c = random_matrix(rng, r, p);
    // vec(ABC) = (Cᵀ ⊗ A) vec(B)
    let lhs = vec(&(&a * &b * &c));
    let rhs = kron(&c.transpose(), &a) * vec(&b);
    let e1 = (&lhs - &rhs).norm() / lhs.norm();
    // K vec(A) = vec(Aᵀ)
    let e2 = (commutation_matrix(p, q) * vec(&a) - vec(&a.transpose())).norm() / a.norm();
    // unvec ∘ vec = id
    let e3 = (unvec(&vec(&b), q, r).expect("shape") - &b).norm() / b.norm();
    // (A ⊗ B)(C ⊗ D) = AC ⊗ BD
    let c2 = random_matrix(rng, q, p);
    let d = random_matrix(rng, r, q);
    let e4 = rel_matrix_err(
        &(kron(&a, &b) * kron(&c2, &d)),
        &kron(&(&a * &c2), &(&b * &d)),
    );
    e1.max(e2).max(e3).max(e4)
}

/// `[ν;1]ᴴ ℰ [ν;1]` against `νᴴẼν + η‖ν_o − ν‖²` and against the form
/// recovered from `Ê`.
pub fn penalty_expansion(rng: &mut impl Rng) -> irsradar_core::Result<f64> {
    let n = rng.random_range(2..=9);
    let a = random_matrix(rng, n, n);
    let e = linalg::symmetrize(&(&a + a.adjoint()));
    let nu_other = PhaseProfile::random_with(&[n], rng).as_vector().clone();
    let nu = PhaseProfile::random_with(&[n], rng).as_vector().clone();
    let eta = rng.random_range(0.01..1.0);

    let (_, lambda_m) = linalg::hermitian_extreme_eigs(&e)?;
    let e_tilde = uqp::shift_diagonal(&(-&e), lambda_m);
    let expanded = linalg::quadratic_form(&e_tilde, &nu) + eta * (&nu_other - &nu).norm_squared();

    let e_hat = irsradar_core::uber::augmented_matrix(&e, &nu_other, eta)?;
    let lambda_hat = e_hat[(n, n)].re + 2.0 * eta * n as f64;
    let big = uqp::shift_diagonal(&(-&e_hat), lambda_hat);
    let from_hat = linalg::quadratic_form(&big, &uqp::augment(&nu));
    let (lo, _) = linalg::hermitian_extreme_eigs(&e_hat)?;
    let psd_violation = (-lo).max(0.0) / lambda_hat.abs().max(1.0);
    Ok(rel_err(expanded, from_hat).max(psd_violation))
}

pub fn d_operator_identity(
    rng: &mut impl Rng,
    d_mutation: Option<DMutation>,
) -> irsradar_core::Result<f64> {
    let dims = SceneDims::random(rng);
    let cfg = random_scene(rng, dims);
    let ch = build_channels(&cfg)?;
    let mut ops = build_d(&ch)?;
    if let Some(mutate) = d_mutation {
        mutate(&mut ops);
    }
    let nu = PhaseProfile::random_with(&ch.irs_sizes(), rng);
    let mut worst: f64 = 0.0;
    for m in 0..ch.n_irs() {
        let v = nu.block(m).into_owned();
        let direct = vec(&fisher::channel_derivative(&v, &ch, m)?);
        let via_d = &ops.blocks()[m] * vec(&(&v * v.transpose()));
        worst = worst.max((&direct - &via_d).norm() / direct.norm().max(via_d.norm()));
    }
    Ok(worst)
}

/// Runs every property. Quick mode shrinks case counts about tenfold.
pub fn run_suite(opts: &SuiteOptions) -> SuiteReport {
    let scale = |full: usize| if opts.quick { full.div_ceil(10) } else { full };
    let mut rng = seeded_rng(opts.seed, 7);
    let mutation = opts.d_mutation;
    let mut properties = Vec::new();

    properties.push(property(
        "fisher_forms",
        scale(1000),
        1e-9,
        &mut rng,
        |rng, t| {
            if let Some(e) = t.check(fisher_forms_discrepancy(rng, mutation)) {
                t.record(e);
            }
        },
    ));
    properties.push(property(
        "d_operator",
        scale(200),
        1e-10,
        &mut rng,
        |rng, t| {
            if let Some(e) = t.check(d_operator_identity(rng, mutation)) {
                t.record(e);
            }
        },
    ));
    properties.push(property(
        "derivative_fd",
        scale(200),
        1e-6,
        &mut rng,
        |rng, t| {
            if let Some(e) = t.check(derivative_discrepancy(rng, 1e-7)) {
                t.record(e);
            }
        },
    ));
    properties.push(property(
        "pmli_monotone",
        scale(500),
        1e-10,
        &mut rng,
        |rng, t| {
            let n = rng.random_range(1..=64);
            if let Some(e) = t.check(pmli_worst_decrease(rng, n, 50)) {
                t.record(e);
            }
        },
    ));
    properties.push(property(
        "q_identity",
        scale(500),
        1e-10,
        &mut rng,
        |rng, t| {
            t.record(q_identity(rng));
        },
    ));
    properties.push(property(
        "vec_kron",
        scale(500),
        1e-10,
        &mut rng,
        |rng, t| {
            t.record(vec_kron_identities(rng));
        },
    ));
    properties.push(property(
        "penalty_expansion",
        scale(500),
        1e-10,
        &mut rng,
        |rng, t| {
            if let Some(e) = t.check(penalty_expansion(rng)) {
                t.record(e);
            }
        },
    ));
    properties.push(property(
        "reflectivity_prefix",
        scale(50),
        0.0,
        &mut rng,
        |rng, t| {
            let seed = rng.random();
            let long = draw_reflectivities(3, seed);
            let short = draw_reflectivities(1, seed);
            t.record((long.0[0] - short.0[0]).norm());
        },
    ));

    SuiteReport { properties }
}

/// Negates the first `D_m` block.
pub fn flip_first_d_block(ops: &mut PhaseOperators) {
    if let Some(block) = ops.blocks_mut().first_mut() {
        *block = -block.clone();
    }
}
