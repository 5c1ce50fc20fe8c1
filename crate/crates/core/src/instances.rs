//! Named example instances with closed-form expected outcomes. The CLI
//! demos regenerate these from their parameters, and the acceptance suite
//! replays them at scale.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{OperatorAlgebra, SConvention};
use crate::cmatrix::{C64, CMatrix, ONE};
use crate::error::{OatError, Result};
use crate::gen::random_unitary;
use crate::tol::Tolerance;

/// Factorization pair a = xy, b = yx in M_2, both inside the half-ball S
/// for small k, whose operator norms differ for k > 0. The norm gap rules
/// out unitary equivalence while the plain two-sided factorization holds,
/// and both sides collapse to the same element at k = 0.
pub fn counterexample_pair(k: f64) -> (CMatrix, CMatrix, CMatrix, CMatrix) {
    let s = 1.0 / 2.0f64.sqrt();
    let x = CMatrix::from_real_rows(2, 2, &[s, 0.0, 0.0, (1.0 + 3.0 * k) * s]).unwrap();
    let y = CMatrix::from_real_rows(2, 2, &[(1.0 + k) * s, 2.0f64.sqrt() * k, 0.0, s]).unwrap();
    (&x * &y, &y * &x, x, y)
}

/// The upper-triangular matrices inside M_n.
pub fn triangular_algebra(
    n: usize,
    convention: SConvention,
    tol: &Tolerance,
) -> Result<OperatorAlgebra> {
    let mut gens = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut m = CMatrix::zeros(n, n);
            m.set(i, j, ONE);
            gens.push(m);
        }
    }
    OperatorAlgebra::make_algebra(n, &gens, convention, tol)
}

/// The four-dimensional span algebra in M_4 whose off-diagonal legs carry
/// the weights R = diag(r, 1/r) and R^{-1}: the two diagonal corner units
/// a and b factor as a = (x/r')(y r') in the ambient algebra after
/// rescaling, but no contractive interpolant exists inside the span, so
/// the in-algebra equivalence fails while the ambient check passes.
pub fn weighted_span_algebra(
    r: f64,
    tol: &Tolerance,
) -> Result<(OperatorAlgebra, CMatrix, CMatrix, CMatrix, CMatrix)> {
    if !(r.is_finite() && r > 0.0) {
        return Err(OatError::invalid("weight must be positive and finite"));
    }
    let mut a = CMatrix::zeros(4, 4);
    a.set(0, 0, ONE);
    a.set(1, 1, ONE);
    let mut b = CMatrix::zeros(4, 4);
    b.set(2, 2, ONE);
    b.set(3, 3, ONE);
    let mut x = CMatrix::zeros(4, 4);
    x.set(0, 2, C64::new(r, 0.0));
    x.set(1, 3, C64::new(1.0 / r, 0.0));
    let mut y = CMatrix::zeros(4, 4);
    y.set(2, 0, C64::new(1.0 / r, 0.0));
    y.set(3, 1, C64::new(r, 0.0));
    let alg = OperatorAlgebra::make_algebra(
        4,
        &[a.clone(), b.clone(), x.clone(), y.clone()],
        SConvention::HalfBall,
        tol,
    )?;
    Ok((alg, a, b, x, y))
}

/// Minimum spectral gap enforced between the eigenvalue multisets of an
/// inequivalent `normal_pair`.
pub const NORMAL_PAIR_GAP: f64 = 0.03;

/// A pair of normal elements of the half-ball S in M_n: unitarily
/// equivalent by construction when `equivalent`, otherwise with one
/// eigenvalue moved at least `NORMAL_PAIR_GAP` away from the whole
/// original spectrum.
pub fn normal_pair(n: usize, equivalent: bool, rng: &mut ChaCha8Rng) -> (CMatrix, CMatrix) {
    let sample = |rng: &mut ChaCha8Rng| -> C64 {
        let rho: f64 = rng.gen_range(0.05..0.95);
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        C64::new(0.5 + 0.45 * rho * theta.cos(), 0.45 * rho * theta.sin())
    };
    let mut vals: Vec<C64> = Vec::with_capacity(n);
    while vals.len() < n {
        let z = sample(rng);
        if vals.iter().all(|w| (w - z).norm() >= 0.02) {
            vals.push(z);
        }
    }
    let diag = |vals: &[C64]| {
        CMatrix::from_fn(n, n, |i, j| if i == j { vals[i] } else { C64::new(0.0, 0.0) })
    };
    let u = random_unitary(n, rng);
    let w = random_unitary(n, rng);
    let a = &(&u * &diag(&vals)) * &u.adjoint();
    let mut vals_b = vals.clone();
    if !equivalent {
        loop {
            let z = sample(rng);
            if vals.iter().all(|p| (p - z).norm() >= NORMAL_PAIR_GAP) {
                vals_b[0] = z;
                break;
            }
        }
    }
    let b = &(&w * &diag(&vals_b)) * &w.adjoint();
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::satisfies_s_norms;
    use rand::SeedableRng;

    #[test]
    fn counterexample_collapses_at_zero() {
        let (a, b, x, y) = counterexample_pair(0.0);
        assert!(a.dist_op(&b) < 1e-12);
        assert!((&x * &y).dist_op(&a) < 1e-12);
        assert!((&y * &x).dist_op(&b) < 1e-12);
    }

    #[test]
    fn triangular_algebra_has_expected_dimension() {
        let t = Tolerance::default();
        let alg = triangular_algebra(3, SConvention::HalfBall, &t).unwrap();
        assert_eq!(alg.space().dim(), 6);
        assert_eq!(alg.diagonal().dim(), 3);
    }

    #[test]
    fn normal_pairs_stay_in_s_and_respect_the_gap() {
        let t = Tolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=4 {
            let (a, b) = normal_pair(n, true, &mut rng);
            assert!(satisfies_s_norms(&a, SConvention::HalfBall, t.eq_eps));
            assert!(satisfies_s_norms(&b, SConvention::HalfBall, t.eq_eps));
            let (a2, b2) = normal_pair(n, false, &mut rng);
            assert!(satisfies_s_norms(&a2, SConvention::HalfBall, t.eq_eps));
            assert!(satisfies_s_norms(&b2, SConvention::HalfBall, t.eq_eps));
        }
    }
}
