//! Deterministic random instance generators: Ginibre matrices, unitaries,
//! elements of the distinguished set with a convergence margin, cone
//! elements of prescribed rank with a known support oracle, block
//! C*-algebras with remembered structure, flag (block upper triangular)
//! algebras, partial isometries with a prescribed initial projection.
//!
//! Everything is driven by a caller-supplied ChaCha stream so test corpora
//! and CLI demo runs are reproducible bit for bit.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{OperatorAlgebra, SConvention};
use crate::cmatrix::{C64, CMatrix, ONE, ZERO};
use crate::error::{OatError, Result};
use crate::tol::Tolerance;

/// Standard complex Gaussian via Box-Muller.
pub fn complex_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    // Real and imaginary parts each N(0, 1/2) so E|z|^2 = 1.
    C64::new(
        r * theta.cos() / 2.0f64.sqrt(),
        r * theta.sin() / 2.0f64.sqrt(),
    )
}

pub fn ginibre(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Haar-like random unitary: polar factor of a Ginibre matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    loop {
        let g = ginibre(n, n, rng);
        if g.rank(1e-10) == n {
            return g.nearest_unitary();
        }
    }
}

/// Random n x r matrix with orthonormal columns.
pub fn random_isometry_cols(n: usize, r: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    assert!(r <= n, "cannot fit {r} orthonormal columns in dimension {n}");
    let u = random_unitary(n, rng);
    u.block(0, 0, n, r)
}

/// Random element of the distinguished set with margin: a = (1 - g)/2 with
/// ||g|| <= 1 - margin. Satisfies both conventions: ||1 - 2a|| = ||g|| < 1
/// and ||a|| <= (1 + ||g||)/2 < 1, ||1 - a|| < 1.
pub fn random_s_element(n: usize, margin: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = ginibre(n, n, rng);
    let target = (1.0 - margin) * rng.gen::<f64>();
    let g = if g.opnorm() > 1e-12 {
        g.scale_re(target / g.opnorm())
    } else {
        g
    };
    (&CMatrix::identity(n) - &g).scale_re(0.5)
}

/// Random element on the shifted-ball side: t (1 - g) pushed toward the
/// largest t keeping ||a|| <= 1 and ||1 - a|| <= 1. For t > 1/2 these
/// often violate the half-ball inequality, exercising the wider convention.
pub fn random_shifted_element(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = ginibre(n, n, rng);
    let g = if g.opnorm() > 1e-12 {
        g.scale_re(rng.gen::<f64>() * 0.9 / g.opnorm())
    } else {
        g
    };
    let base = &CMatrix::identity(n) - &g;
    let id = CMatrix::identity(n);
    let fits = |t: f64| {
        let a = base.scale_re(t);
        a.opnorm() <= 1.0 && (&id - &a).opnorm() <= 1.0
    };
    let mut lo = 0.5;
    let mut hi = 1.0;
    if !fits(lo) {
        return base.scale_re(0.45);
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Stay strictly inside the boundary for series headroom.
    base.scale_re(lo * 0.995)
}

/// Rank-deficient cone element with known support: U (a' + 0) U* where a'
/// is an invertible r x r element of S with margin, scaled by `scale`.
/// Returns (a, support projector, U).
pub fn random_cone_element(
    n: usize,
    rank: usize,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> (CMatrix, CMatrix, CMatrix) {
    assert!(rank <= n);
    let u = random_unitary(n, rng);
    let core = random_s_element(rank, 0.2, rng);
    let a_block = CMatrix::from_fn(n, n, |i, j| {
        if i < rank && j < rank {
            core.at(i, j)
        } else {
            ZERO
        }
    });
    let p_block = CMatrix::from_fn(n, n, |i, j| {
        if i == j && i < rank {
            ONE
        } else {
            ZERO
        }
    });
    let a = (&(&u * &a_block) * &u.adjoint()).scale_re(scale);
    let p = &(&u * &p_block) * &u.adjoint();
    (a, p, u)
}

/// Random orthogonal projection of the given rank.
pub fn random_projection(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let b = random_isometry_cols(n, rank, rng);
    &b * &b.adjoint()
}

/// Partial isometry v (m x n) with v* v equal to the given projection.
pub fn random_partial_isometry_with_initial(
    p: &CMatrix,
    m: usize,
    rank_eps: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CMatrix> {
    let r = p.rank(rank_eps);
    if r > m {
        return Err(OatError::dim(format!(
            "target dimension {m} cannot carry a rank-{r} isometry"
        )));
    }
    let b = p.range_basis(rank_eps);
    let w = random_isometry_cols(m, r, rng);
    Ok(&w * &b.adjoint())
}

/// Shape of one isotypic block: k x k matrices with multiplicity `mult`
/// (each matrix unit appears as an m-fold identity block).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub k: usize,
    pub mult: usize,
}

impl BlockSpec {
    pub fn ambient_size(&self) -> usize {
        self.k * self.mult
    }
}

/// A finite-dimensional C*-algebra in block form, conjugated by a unitary,
/// with the structure remembered for oracle constructions.
#[derive(Debug, Clone)]
pub struct BlockAlgebra {
    pub algebra: OperatorAlgebra,
    /// Conjugating unitary: the algebra is u (blocks) u*.
    pub u: CMatrix,
    pub spec: Vec<BlockSpec>,
    /// Start offset of each block in the un-conjugated coordinates.
    pub offsets: Vec<usize>,
    pub ambient: usize,
}

impl BlockAlgebra {
    /// The matrix unit e_{ab} of block `i` (tensored with the identity of
    /// the multiplicity space), in ambient coordinates.
    pub fn unit_elem(&self, i: usize, a: usize, b: usize) -> CMatrix {
        let spec = self.spec[i];
        let off = self.offsets[i];
        let m = spec.mult;
        let raw = CMatrix::from_fn(self.ambient, self.ambient, |r, c| {
            if r >= off && c >= off {
                let (ri, ci) = (r - off, c - off);
                if ri < spec.k * m && ci < spec.k * m && ri / m == a && ci / m == b && ri % m == ci % m
                {
                    return ONE;
                }
                ZERO
            } else {
                ZERO
            }
        });
        &(&self.u * &raw) * &self.u.adjoint()
    }

    /// Projection selecting `ranks[i]` diagonal cells in block i.
    pub fn projection_with_cells(&self, cells: &[usize]) -> CMatrix {
        assert_eq!(cells.len(), self.spec.len());
        let mut acc = CMatrix::zeros(self.ambient, self.ambient);
        for (i, &r) in cells.iter().enumerate() {
            assert!(r <= self.spec[i].k);
            for a in 0..r {
                acc = &acc + &self.unit_elem(i, a, a);
            }
        }
        acc
    }

    /// Central projection of block i.
    pub fn central_projection(&self, i: usize) -> CMatrix {
        self.projection_with_cells(
            &(0..self.spec.len())
                .map(|j| if j == i { self.spec[j].k } else { 0 })
                .collect::<Vec<_>>(),
        )
    }
}

/// Build the block C*-algebra for a spec (sum of k*mult must not exceed n;
/// leftover dimensions are annihilated, making the algebra non-unital in
/// the ambient).
pub fn block_algebra(
    n: usize,
    spec: &[BlockSpec],
    convention: SConvention,
    tol: &Tolerance,
    rng: &mut ChaCha8Rng,
) -> Result<BlockAlgebra> {
    let used: usize = spec.iter().map(|s| s.ambient_size()).sum();
    if used > n {
        return Err(OatError::dim(format!(
            "block spec needs {used} dimensions, ambient has {n}"
        )));
    }
    let u = random_unitary(n, rng);
    let mut offsets = Vec::with_capacity(spec.len());
    let mut off = 0;
    for s in spec {
        offsets.push(off);
        off += s.ambient_size();
    }
    let mut shell = BlockAlgebra {
        algebra: OperatorAlgebra::make_algebra(n, &[CMatrix::zeros(n, n)], convention, tol)?,
        u,
        spec: spec.to_vec(),
        offsets,
        ambient: n,
    };
    let mut gens = Vec::new();
    for (i, s) in spec.iter().enumerate() {
        for a in 0..s.k {
            for b in 0..s.k {
                gens.push(shell.unit_elem(i, a, b));
            }
        }
    }
    shell.algebra = OperatorAlgebra::make_algebra(n, &gens, convention, tol)?;
    Ok(shell)
}

/// Random partition of n into block specs with total ambient size n and
/// every k bounded by max_k.
pub fn random_block_spec(n: usize, max_k: usize, rng: &mut ChaCha8Rng) -> Vec<BlockSpec> {
    let mut remaining = n;
    let mut out = Vec::new();
    while remaining > 0 {
        let k = 1 + rng.gen_range(0..max_k.min(remaining));
        let max_mult = remaining / k;
        let mult = 1 + rng.gen_range(0..max_mult);
        out.push(BlockSpec { k, mult });
        remaining -= k * mult;
    }
    out
}

/// Flag algebra: block upper triangular with respect to a random
/// composition of n, conjugated by a random unitary. Non-self-adjoint as
/// soon as there is more than one part; its diagonal is the block-diagonal
/// C*-algebra of the parts.
pub fn random_flag_algebra(
    n: usize,
    convention: SConvention,
    tol: &Tolerance,
    rng: &mut ChaCha8Rng,
) -> Result<OperatorAlgebra> {
    let mut parts = Vec::new();
    let mut remaining = n;
    while remaining > 0 {
        let p = 1 + rng.gen_range(0..remaining);
        parts.push(p);
        remaining -= p;
    }
    let mut block_of = Vec::with_capacity(n);
    for (bi, &p) in parts.iter().enumerate() {
        for _ in 0..p {
            block_of.push(bi);
        }
    }
    let u = random_unitary(n, rng);
    let mut gens = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if block_of[i] <= block_of[j] {
                let e = CMatrix::from_fn(n, n, |r, c| if (r, c) == (i, j) { ONE } else { ZERO });
                gens.push(&(&u * &e) * &u.adjoint());
            }
        }
    }
    OperatorAlgebra::make_algebra(n, &gens, convention, tol)
}

/// A random *-open tripotent of A: the algebra-internal polar factor of a
/// random element of the diagonal. Retries until nonzero (None if the
/// diagonal is zero).
pub fn random_star_open_tripotent(
    algebra: &OperatorAlgebra,
    tol: &Tolerance,
    rng: &mut ChaCha8Rng,
) -> Option<crate::tripotent::Tripotent> {
    if algebra.diagonal().dim() == 0 {
        return None;
    }
    for _ in 0..20 {
        let x = crate::tripotent::random_element(algebra.diagonal(), rng);
        let v = crate::tripotent::algebra_polar_factor(&x, tol);
        if v.opnorm() < 0.5 {
            continue;
        }
        if let Ok(t) = crate::tripotent::Tripotent::new(v, tol) {
            return Some(t);
        }
    }
    None
}
