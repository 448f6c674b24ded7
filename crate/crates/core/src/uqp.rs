//! Unimodular quadratic programs, `maximize sᴴ G s` over `|s_i| = 1`, solved
//! with power-method-like iterations `s ← exp(j·arg(G s))`.
//!
//! The iteration is monotone when `G` is positive semidefinite; indefinite
//! inputs are diagonally loaded first, which shifts the objective by the
//! constant `λ·n` and leaves the maximizer unchanged.

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, UnitVector};

/// Consecutive low-gain iterations before [`solve`] stops early.
pub const STALL_PATIENCE: usize = 3;

/// Returns `(G + λI, λ)` with the smallest `λ ≥ 0` (plus a small margin) that
/// makes the result positive semidefinite.
pub fn diagonal_load(g: &CMatrix) -> Result<(CMatrix, f64)> {
    let (min_eig, _) = linalg::hermitian_extreme_eigs(g)?;
    if min_eig >= 0.0 {
        return Ok((g.clone(), 0.0));
    }
    let margin = 1e-9 * min_eig.abs().max(1.0);
    let load = -min_eig + margin;
    Ok((shift_diagonal(g, load), load))
}

pub fn shift_diagonal(g: &CMatrix, shift: f64) -> CMatrix {
    let mut out = g.clone();
    for i in 0..out.nrows() {
        out[(i, i)] += shift;
    }
    out
}

/// One iteration `exp(j·arg(G s))`.
pub fn pmli_step(g: &CMatrix, s: &UnitVector) -> UnitVector {
    linalg::unit_modulus_project(&(g * s.as_vector()))
}

/// PMLI step on `[s; 1]` for an `(n+1) × (n+1)` matrix where the trailing
/// entry is pinned to one: only the first `n` entries of `G [s; 1]` are
/// projected and returned.
pub fn pmli_step_anchored(g: &CMatrix, head: &UnitVector) -> Result<UnitVector> {
    let n = head.len();
    if g.shape() != (n + 1, n + 1) {
        return Err(Error::dims(
            "pmli_step_anchored",
            format!("{0}x{0}", n + 1),
            format!("{}x{}", g.nrows(), g.ncols()),
        ));
    }
    let full = augment(head.as_vector());
    let image = g * full;
    Ok(linalg::unit_modulus_project(&image.rows(0, n).into_owned()))
}

/// `[s; 1]`.
pub fn augment(s: &CVector) -> CVector {
    let n = s.len();
    let mut out = CVector::from_element(n + 1, linalg::ONE);
    out.rows_mut(0, n).copy_from(s);
    out
}

/// Unit-modulus vector with the phases of the principal eigenvector of `g`.
pub fn spectral_start(g: &CMatrix) -> Result<UnitVector> {
    linalg::hermitian_extreme_eigs(g)?;
    let eig = linalg::symmetrize(g).symmetric_eigen();
    let (best, _) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
    Ok(linalg::unit_modulus_project(
        &eig.eigenvectors.column(best).into_owned(),
    ))
}

#[derive(Debug, Clone)]
pub struct UqpProblem {
    pub matrix: CMatrix,
    pub initial: UnitVector,
    pub max_iterations: usize,
    pub stall_tolerance: f64,
}

impl UqpProblem {
    pub fn new(matrix: CMatrix, initial: UnitVector) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                op: "UqpProblem",
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if matrix.nrows() != initial.len() {
            return Err(Error::dims("UqpProblem", matrix.nrows(), initial.len()));
        }
        Ok(Self {
            matrix,
            initial,
            max_iterations: 1000,
            stall_tolerance: 1e-12,
        })
    }

    pub fn with_max_iterations(mut self, iterations: usize) -> Self {
        self.max_iterations = iterations;
        self
    }

    pub fn with_stall_tolerance(mut self, tolerance: f64) -> Self {
        self.stall_tolerance = tolerance;
        self
    }
}

#[derive(Debug, Clone)]
pub struct UqpResult {
    pub solution: UnitVector,
    /// Unloaded objective `sᴴGs`; entry 0 is the starting point.
    pub objective_trace: Vec<f64>,
    pub iterations_used: usize,
    pub loading_applied: f64,
}

impl UqpResult {
    pub fn objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("trace holds the start value")
    }
}

pub fn solve(problem: &UqpProblem) -> Result<UqpResult> {
    let (loaded, load) = diagonal_load(&problem.matrix)?;
    let mut s = problem.initial.clone();
    let mut trace = vec![linalg::quadratic_form(&problem.matrix, s.as_vector())];
    let mut stalled = 0;
    let mut iterations = 0;
    while iterations < problem.max_iterations {
        let next = pmli_step(&loaded, &s);
        iterations += 1;
        let value = linalg::quadratic_form(&problem.matrix, next.as_vector());
        let previous = *trace.last().unwrap();
        trace.push(value);
        let unchanged = next == s;
        s = next;
        if unchanged {
            break;
        }
        let gain = (value - previous) / previous.abs().max(f64::MIN_POSITIVE);
        if gain < problem.stall_tolerance {
            stalled += 1;
            if stalled >= STALL_PATIENCE {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok(UqpResult {
        solution: s,
        objective_trace: trace,
        iterations_used: iterations,
        loading_applied: load,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, quadratic_form, ONE};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_phases(rng: &mut impl Rng, n: usize) -> UnitVector {
        let p: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        UnitVector::from_phases(&p)
    }

    fn random_psd(rng: &mut impl Rng, n: usize) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        &a * a.adjoint()
    }

    #[test]
    fn loading_psd_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_psd(&mut rng, 5);
        let (out, load) = diagonal_load(&g).unwrap();
        assert_eq!(load, 0.0);
        assert_eq!(out, g);
    }

    #[test]
    fn loading_shifts_indefinite() {
        let g = linalg::diag(&CVector::from_vec(vec![ONE, Complex64::new(-3.0, 0.0)]));
        let (out, load) = diagonal_load(&g).unwrap();
        let eps = 1e-9 * 3.0;
        assert!((load - (3.0 + eps)).abs() < 1e-15);
        assert!((out[(0, 0)].re - (4.0 + eps)).abs() < 1e-12);
        assert!((out[(1, 1)].re - eps).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_phases(&mut rng, 2);
        let diff = quadratic_form(&out, s.as_vector()) - quadratic_form(&g, s.as_vector());
        assert!((diff - 2.0 * load).abs() < 1e-12);
    }

    #[test]
    fn loading_rejects_non_hermitian() {
        let mut g = identity(2);
        g[(0, 1)] = ONE;
        assert!(matches!(diagonal_load(&g), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn identity_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_phases(&mut rng, 6);
        assert_eq!(pmli_step(&identity(6), &s), s);
        let res = solve(&UqpProblem::new(identity(6), s).unwrap()).unwrap();
        assert_eq!(res.iterations_used, 1);
        assert!((res.objective() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_reaches_optimum_in_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_phases(&mut rng, 7);
        let g = u.as_vector() * u.as_vector().adjoint();
        let s = random_phases(&mut rng, 7);
        let next = pmli_step(&g, &s);
        let ratio = next.as_vector().component_div(u.as_vector());
        for z in ratio.iter() {
            assert!((z - ratio[0]).norm() < 1e-12);
        }
        assert!((quadratic_form(&g, next.as_vector()) - 49.0).abs() < 1e-9);
    }

    #[test]
    fn step_never_decreases_psd_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(1..12);
            let g = random_psd(&mut rng, n);
            let s = random_phases(&mut rng, n);
            let before = quadratic_form(&g, s.as_vector());
            let after = quadratic_form(&g, pmli_step(&g, &s).as_vector());
            assert!(after >= before - 1e-10 * before.abs());
        }
    }

    #[test]
    fn anchored_step_matches_manual() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_psd(&mut rng, 5);
        let head = random_phases(&mut rng, 4);
        let out = pmli_step_anchored(&g, &head).unwrap();
        let full = &g * augment(head.as_vector());
        for i in 0..4 {
            assert!((out.as_vector()[i] - full[i] / full[i].norm()).norm() < 1e-14);
        }
        assert!(pmli_step_anchored(&g, &random_phases(&mut rng, 3)).is_err());
    }

    #[test]
    fn loading_offsets_trace_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = CMatrix::from_fn(6, 6, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let g = linalg::symmetrize(&a);
        let s = random_phases(&mut rng, 6);
        let plain = solve(
            &UqpProblem::new(g.clone(), s.clone())
                .unwrap()
                .with_max_iterations(30),
        )
        .unwrap();
        assert!(plain.loading_applied > 0.0);
        let shifted = shift_diagonal(&g, plain.loading_applied);
        let loaded = solve(&UqpProblem::new(shifted, s).unwrap().with_max_iterations(30)).unwrap();
        assert_eq!(loaded.loading_applied, 0.0);
        assert_eq!(plain.solution, loaded.solution);
        for (a, b) in plain.objective_trace.iter().zip(&loaded.objective_trace) {
            assert!((b - a - plain.loading_applied * 6.0).abs() < 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn beats_random_probes_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = CMatrix::from_fn(4, 4, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let g = linalg::symmetrize(&a);
        let start = spectral_start(&g).unwrap();
        let res = solve(&UqpProblem::new(g.clone(), start).unwrap()).unwrap();
        let best_probe = (0..10_000)
            .map(|_| quadratic_form(&g, random_phases(&mut rng, 4).as_vector()))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(res.objective() >= best_probe - 1e-12);
    }

    #[test]
    fn problem_validation() {
        let s = UnitVector::ones(3);
        assert!(UqpProblem::new(CMatrix::zeros(3, 2), s.clone()).is_err());
        assert!(UqpProblem::new(identity(4), s).is_err());
    }
}
