//! Operator algebras presented concretely: a product-closed subspace of
//! M_n(C) with a chosen convention for the set S of elements whose roots and
//! support projections the calculus manipulates. The diagonal A tied to A*
//! carries all the C*-structure used by decision procedures.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cmatrix::{C64, CMatrix, ONE, ZERO};
use crate::error::{OatError, Result};
use crate::subspace::{MatSubspace, SpanBuilder};
use crate::tol::Tolerance;
use crate::verdict::Verdict;

/// Which normalization of the set S the algebra uses.
///
/// `HalfBall`: ||1 - 2a|| <= 1. `Shifted`: ||a|| <= 1 and ||1 - a|| <= 1.
/// The half-ball is contained in the shifted ball; both force the numerical
/// range into the disk |1 - z| <= 1, which is what the root series needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SConvention {
    #[serde(rename = "half-ball")]
    HalfBall,
    #[serde(rename = "shifted")]
    Shifted,
}

/// A subalgebra of M_n(C), not necessarily unital or self-adjoint.
#[derive(Clone, Debug)]
pub struct OperatorAlgebra {
    ambient: usize,
    space: MatSubspace,
    convention: SConvention,
    unital: bool,
    diagonal: MatSubspace,
}

impl OperatorAlgebra {
    /// Close the span of the generators under multiplication.
    pub fn make_algebra(
        ambient: usize,
        generators: &[CMatrix],
        convention: SConvention,
        tol: &Tolerance,
    ) -> Result<Self> {
        for g in generators {
            if g.shape() != (ambient, ambient) {
                return Err(OatError::dim(format!(
                    "generator is {}x{}, ambient is {}",
                    g.rows(),
                    g.cols(),
                    ambient
                )));
            }
        }
        let mut space = MatSubspace::span(ambient, ambient, generators, tol)?;
        loop {
            let before = space.dim();
            let mut builder = SpanBuilder::new(ambient, ambient, tol.rank_eps);
            for b in space.basis() {
                builder.push(b);
            }
            for x in space.basis() {
                for y in space.basis() {
                    builder.push(&(x * y));
                }
            }
            let next = builder.finish();
            if next.dim() == before {
                space = next;
                break;
            }
            space = next;
        }
        Ok(Self::from_closed_space(ambient, space, convention, tol))
    }

    /// The full matrix algebra M_n.
    pub fn full_matrix_algebra(n: usize, convention: SConvention, tol: &Tolerance) -> Result<Self> {
        if n == 0 {
            return Err(OatError::dim("ambient dimension must be positive"));
        }
        let units: Vec<CMatrix> = (0..n * n)
            .map(|k| {
                CMatrix::from_fn(
                    n,
                    n,
                    |i, j| if (i, j) == (k / n, k % n) { ONE } else { ZERO },
                )
            })
            .collect();
        let space = MatSubspace::span(n, n, &units, tol)?;
        Ok(Self::from_closed_space(n, space, convention, tol))
    }

    /// Wrap a subspace already known to be product-closed (verified).
    pub fn from_space(
        ambient: usize,
        space: MatSubspace,
        convention: SConvention,
        tol: &Tolerance,
    ) -> Result<Self> {
        let prod = space.product(&space, tol)?;
        if !space.contains_subspace(&prod, tol) {
            return Err(OatError::precondition(
                "subspace is not closed under multiplication",
            ));
        }
        Ok(Self::from_closed_space(ambient, space, convention, tol))
    }

    pub(crate) fn from_closed_space(
        ambient: usize,
        space: MatSubspace,
        convention: SConvention,
        tol: &Tolerance,
    ) -> Self {
        let unital = space.contains(&CMatrix::identity(ambient), tol);
        let adj = space.adjoint_space(tol);
        let diagonal = space
            .intersect(&adj, tol)
            .expect("ambient shapes match by construction");
        OperatorAlgebra {
            ambient,
            space,
            convention,
            unital,
            diagonal,
        }
    }

    /// The algebra A + C.1 (returns a clone when I is already present).
    pub fn unitize(&self, tol: &Tolerance) -> Result<Self> {
        if self.unital {
            return Ok(self.clone());
        }
        let mut gens: Vec<CMatrix> = self.space.basis().to_vec();
        gens.push(CMatrix::identity(self.ambient));
        // A is already product-closed, so adjoining the identity closes in
        // one span (products only pick up A-terms and scalar multiples).
        let space = MatSubspace::span(self.ambient, self.ambient, &gens, tol)?;
        Ok(Self::from_closed_space(
            self.ambient,
            space,
            self.convention,
            tol,
        ))
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn space(&self) -> &MatSubspace {
        &self.space
    }

    pub fn basis(&self) -> &[CMatrix] {
        self.space.basis()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn convention(&self) -> SConvention {
        self.convention
    }

    pub fn is_unital(&self) -> bool {
        self.unital
    }

    /// The diagonal: A intersected with A*, the largest C*-subalgebra.
    pub fn diagonal(&self) -> &MatSubspace {
        &self.diagonal
    }

    pub fn contains(&self, m: &CMatrix, tol: &Tolerance) -> bool {
        self.space.contains(m, tol)
    }

    /// Is this concretely all of M_n?
    pub fn is_full(&self) -> bool {
        self.space.dim() == self.ambient * self.ambient
    }
}

/// Serialized algebra presentation.
#[derive(Serialize, Deserialize)]
pub struct AlgebraJson {
    pub ambient: usize,
    pub generators: Vec<CMatrix>,
    pub convention: SConvention,
}

impl OperatorAlgebra {
    pub fn from_json(json: &AlgebraJson, tol: &Tolerance) -> Result<Self> {
        Self::make_algebra(json.ambient, &json.generators, json.convention, tol)
    }

    pub fn to_json(&self) -> AlgebraJson {
        AlgebraJson {
            ambient: self.ambient,
            generators: self.space.basis().to_vec(),
            convention: self.convention,
        }
    }
}

/// Two-sided multiplicative identity of a subalgebra, required to have norm
/// one. Idempotents of larger norm (skew units) are rejected: the calculus
/// only ever uses norm-one units, which in the self-adjoint case are
/// projections.
pub fn unit_of(space: &MatSubspace, tol: &Tolerance) -> Option<CMatrix> {
    let d = space.dim();
    if d == 0 {
        return None;
    }
    let (n, _) = space.ambient_shape();
    let nn = n * n;
    let basis = space.basis();
    // Least squares for e = sum alpha_j b_j with e b_i = b_i e = b_i.
    let mut m = DMatrix::<C64>::zeros(2 * d * nn, d);
    let mut rhs = nalgebra::DVector::<C64>::zeros(2 * d * nn);
    for (i, bi) in basis.iter().enumerate() {
        let vi = bi.vectorize();
        for (j, bj) in basis.iter().enumerate() {
            let left = (bj * bi).vectorize();
            let right = (bi * bj).vectorize();
            for k in 0..nn {
                m[(2 * i * nn + k, j)] = left[k];
                m[(2 * i * nn + nn + k, j)] = right[k];
            }
        }
        for k in 0..nn {
            rhs[2 * i * nn + k] = vi[k];
            rhs[2 * i * nn + nn + k] = vi[k];
        }
    }
    // Normal equations; the nalgebra SVD least-squares path loses accuracy
    // on tall systems with degenerate singular values, which this one has.
    // The Gram matrix is hermitian PSD, so eigendecomposition inverts it
    // stably.
    let gram = CMatrix::from_inner(m.adjoint() * &m).ok()?;
    let cut = tol.rank_eps * (1.0 + gram.opnorm());
    let gram_inv = gram.herm_fn(|l| if l > cut { 1.0 / l } else { 0.0 });
    let mrhs = m.adjoint() * &rhs;
    let mut alpha = gram_inv.inner() * mrhs;
    // Two refinement passes keep the residual at roundoff even when the
    // normal equations square an unfavorable condition number.
    for _ in 0..2 {
        let r = &rhs - &m * &alpha;
        alpha += gram_inv.inner() * (m.adjoint() * &r);
    }
    let residual = (&m * &alpha - &rhs).norm();
    if residual > tol.eq_eps * (1.0 + rhs.norm()) {
        return None;
    }
    let e = space.element_from_coordinates(&alpha);
    if (e.opnorm() - 1.0).abs() > tol.eq_eps * 10.0 {
        return None;
    }
    Some(e)
}

/// One isotypic block of a finite-dimensional C*-algebra: minimal central
/// projection z, matrix size k, ambient multiplicity m (so rank z = k * m).
#[derive(Clone, Debug)]
pub struct Block {
    pub z: CMatrix,
    pub k: usize,
    pub multiplicity: usize,
    pub ambient_rank: usize,
}

/// Wedderburn data for a C*-subalgebra C of M_n: C ~ direct sum of M_{k_i},
/// each represented with uniform multiplicity m_i.
#[derive(Clone, Debug)]
pub struct BlockDecomposition {
    pub unit: CMatrix,
    pub blocks: Vec<Block>,
}

impl BlockDecomposition {
    /// Ambient ranks rank(z_i p) for a projection p commuting with the
    /// central projections (e.g. any projection in the algebra).
    pub fn block_ranks(&self, p: &CMatrix, tol: &Tolerance) -> Vec<usize> {
        self.blocks
            .iter()
            .map(|b| (&b.z * p).rank_scaled(tol.rank_eps, 1.0))
            .collect()
    }
}

pub const DEFAULT_SEED: u64 = 0x0a70_5eed;

/// Decompose a finite-dimensional C*-subalgebra (self-adjoint and
/// product-closed) into its isotypic blocks.
///
/// A random hermitian central element separates the blocks: its eigenvalue
/// clusters give the minimal central projections. Cluster assignments are
/// re-verified structurally (idempotent, central, membership, summing to the
/// unit); on any failure a fresh random element is drawn.
pub fn wedderburn(space: &MatSubspace, tol: &Tolerance, seed: u64) -> Result<BlockDecomposition> {
    let (n, nc) = space.ambient_shape();
    if n != nc {
        return Err(OatError::dim("wedderburn needs square matrices"));
    }
    if space.dim() == 0 {
        return Ok(BlockDecomposition {
            unit: CMatrix::zeros(n, n),
            blocks: Vec::new(),
        });
    }
    let adj = space.adjoint_space(tol);
    if !space.equal(&adj, tol) {
        return Err(OatError::precondition(
            "wedderburn input must be self-adjoint",
        ));
    }
    let prod = space.product(space, tol)?;
    if !space.contains_subspace(&prod, tol) {
        return Err(OatError::precondition(
            "wedderburn input must be product-closed",
        ));
    }
    let unit = unit_of(space, tol).ok_or_else(|| {
        OatError::precondition("wedderburn input has no norm-one unit")
    })?;
    let unit_rank = unit.rank(tol.rank_eps);

    // Center of the algebra: elements commuting with every basis element.
    let center = center_of(space, tol)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attempts = 12;
    for _ in 0..attempts {
        let h = random_hermitian_element(&center, &mut rng);
        match blocks_from_central_element(space, &center, &unit, unit_rank, &h, tol) {
            Some(blocks) => {
                return Ok(BlockDecomposition { unit, blocks });
            }
            None => continue,
        }
    }
    Err(OatError::internal(
        "wedderburn failed to separate blocks after repeated random central elements",
    ))
}

fn center_of(space: &MatSubspace, tol: &Tolerance) -> Result<MatSubspace> {
    let d = space.dim();
    let (n, _) = space.ambient_shape();
    let nn = n * n;
    let basis = space.basis();
    // Null space of z -> (z b_i - b_i z)_i over the coefficients of z.
    let mut m = DMatrix::<C64>::zeros(d * nn, d);
    for (j, zj) in basis.iter().enumerate() {
        for (i, bi) in basis.iter().enumerate() {
            let comm = (&(zj * bi) - &(bi * zj)).vectorize();
            for k in 0..nn {
                m[(i * nn + k, j)] = comm[k];
            }
        }
    }
    let scale = 1.0 + m.norm();
    let mut members = Vec::new();
    for alpha in crate::cmatrix::nullspace(&m, tol.rank_eps * scale) {
        members.push(space.element_from_coordinates(&alpha));
    }
    let (r, c) = space.ambient_shape();
    MatSubspace::span(r, c, &members, tol)
}

fn random_hermitian_element(space: &MatSubspace, rng: &mut impl Rng) -> CMatrix {
    let (n, _) = space.ambient_shape();
    let mut h = CMatrix::zeros(n, n);
    for b in space.basis() {
        let z = C64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0);
        h = &h + &b.scale(z);
    }
    (&h + &h.adjoint()).scale_re(0.5)
}

fn blocks_from_central_element(
    space: &MatSubspace,
    center: &MatSubspace,
    unit: &CMatrix,
    unit_rank: usize,
    h: &CMatrix,
    tol: &Tolerance,
) -> Option<Vec<Block>> {
    let n = h.rows();
    let (vals, u) = h.herm_eig();
    // Cluster eigenvalues; h lives under the unit, so exactly n - rank(unit)
    // eigenvalues sit at zero for the complement, which is not a block.
    let gap = 1e-6 * (1.0 + vals.iter().fold(0.0f64, |a, &v| a.max(v.abs())));
    let mut clusters: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &v) in vals.iter().enumerate() {
        match clusters.last_mut() {
            Some((rep, idx)) if (v - *rep).abs() <= gap => idx.push(i),
            _ => clusters.push((v, vec![i])),
        }
    }
    // Drop the kernel cluster belonging to the complement of the unit.
    let kernel_size = n - unit_rank;
    if kernel_size > 0 {
        let pos = clusters.iter().position(|(rep, _)| rep.abs() <= gap)?;
        if clusters[pos].1.len() != kernel_size {
            // A block collided with zero; resample.
            return None;
        }
        clusters.remove(pos);
    } else if clusters.iter().any(|(rep, _)| rep.abs() <= gap) {
        // Unit has full rank, so no eigenvalue may vanish.
        return None;
    }

    let mut blocks = Vec::new();
    let mut sum = CMatrix::zeros(n, n);
    for (_, idx) in &clusters {
        let cols: Vec<usize> = idx.clone();
        let mut uc = CMatrix::zeros(n, cols.len());
        for (c, &j) in cols.iter().enumerate() {
            for r in 0..n {
                uc.set(r, c, u.at(r, j));
            }
        }
        let z = &uc * &uc.adjoint();
        if !space.contains(&z, tol) || !center.contains(&z, tol) {
            return None;
        }
        let compressed = space.map_space(|x| &(&z * x) * &z, tol).ok()?;
        let dsq = compressed.dim();
        let k = (dsq as f64).sqrt().round() as usize;
        if k * k != dsq || k == 0 {
            return None;
        }
        let ambient_rank = z.rank(tol.rank_eps);
        if ambient_rank % k != 0 {
            return None;
        }
        sum = &sum + &z;
        blocks.push(Block {
            z,
            k,
            multiplicity: ambient_rank / k,
            ambient_rank,
        });
    }
    if sum.dist_op(unit) > tol.eq_eps * 100.0 * (1.0 + unit.opnorm()) {
        return None;
    }
    // Orthogonality of distinct central projections.
    for i in 0..blocks.len() {
        for j in 0..blocks.len() {
            if i != j {
                let prod = &blocks[i].z * &blocks[j].z;
                if prod.opnorm() > tol.eq_eps * 100.0 {
                    return None;
                }
            }
        }
    }
    Some(blocks)
}

/// Hereditary subalgebra check: S must sit inside A, satisfy S A S inside S,
/// and carry a norm-one unit (its support projection in the self-adjoint
/// case). The verdict's witness holds that unit.
pub fn hsa_check(algebra: &OperatorAlgebra, s: &MatSubspace, tol: &Tolerance) -> Result<Verdict> {
    if s.ambient_shape() != (algebra.ambient(), algebra.ambient()) {
        return Err(OatError::dim("subspace ambient does not match algebra"));
    }
    if !algebra.space().contains_subspace(s, tol) {
        return Ok(Verdict::no().note("subspace is not contained in the algebra"));
    }
    let sas = s.product(algebra.space(), tol)?.product(s, tol)?;
    if !s.contains_subspace(&sas, tol) {
        return Ok(Verdict::no().note("S A S is not contained in S"));
    }
    match unit_of(s, tol) {
        Some(e) => Ok(Verdict::yes()
            .with_matrix("unit", e)
            .note("S A S inside S and norm-one unit found")),
        None => Ok(Verdict::no().note("subspace has no norm-one unit")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmatrix::ONE;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn e(n: usize, i: usize, j: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        m.set(i, j, ONE);
        m
    }

    #[test]
    fn upper_triangular_closure() {
        let t = tol();
        let a = OperatorAlgebra::make_algebra(
            2,
            &[e(2, 0, 0), e(2, 0, 1), e(2, 1, 1)],
            SConvention::HalfBall,
            &t,
        )
        .unwrap();
        assert_eq!(a.dim(), 3);
        assert!(a.is_unital());
        // diagonal of T2 is the diagonal matrices
        assert_eq!(a.diagonal().dim(), 2);
        assert!(a.diagonal().contains(&e(2, 0, 0), &t));
        assert!(!a.diagonal().contains(&e(2, 0, 1), &t));
    }

    #[test]
    fn closure_generates_products() {
        let t = tol();
        // e12 and e21 generate all of M_2
        let a = OperatorAlgebra::make_algebra(
            2,
            &[e(2, 0, 1), e(2, 1, 0)],
            SConvention::HalfBall,
            &t,
        )
        .unwrap();
        assert_eq!(a.dim(), 4);
        assert!(a.is_full());
    }

    #[test]
    fn unitize_adds_identity_once() {
        let t = tol();
        let a = OperatorAlgebra::make_algebra(2, &[e(2, 0, 1)], SConvention::HalfBall, &t).unwrap();
        assert!(!a.is_unital());
        assert_eq!(a.dim(), 1);
        let u = a.unitize(&t).unwrap();
        assert!(u.is_unital());
        assert_eq!(u.dim(), 2);
        let uu = u.unitize(&t).unwrap();
        assert_eq!(uu.dim(), 2);
    }

    #[test]
    fn unit_of_rejects_skew_idempotent() {
        let t = tol();
        // span of [[1,1],[0,0]]: unit exists algebraically but has norm sqrt(2)
        let skew = CMatrix::from_real_rows(2, 2, &[1.0, 1.0, 0.0, 0.0]).unwrap();
        let s = MatSubspace::span(2, 2, &[skew], &t).unwrap();
        assert!(unit_of(&s, &t).is_none());
    }

    #[test]
    fn unit_of_finds_projection_unit() {
        let t = tol();
        let s = MatSubspace::span(2, 2, &[e(2, 0, 0)], &t).unwrap();
        let u = unit_of(&s, &t).unwrap();
        assert!(u.dist_op(&e(2, 0, 0)) < 1e-9);
    }

    #[test]
    fn wedderburn_of_diagonal_pair() {
        let t = tol();
        let s = MatSubspace::span(2, 2, &[e(2, 0, 0), e(2, 1, 1)], &t).unwrap();
        let bd = wedderburn(&s, &t, DEFAULT_SEED).unwrap();
        assert_eq!(bd.blocks.len(), 2);
        for b in &bd.blocks {
            assert_eq!(b.k, 1);
            assert_eq!(b.multiplicity, 1);
        }
        assert!(bd.unit.dist_op(&CMatrix::identity(2)) < 1e-9);
    }

    #[test]
    fn wedderburn_of_full_matrix_algebra() {
        let t = tol();
        let s = MatSubspace::full(3, 3);
        let bd = wedderburn(&s, &t, DEFAULT_SEED).unwrap();
        assert_eq!(bd.blocks.len(), 1);
        assert_eq!(bd.blocks[0].k, 3);
        assert_eq!(bd.blocks[0].multiplicity, 1);
    }

    #[test]
    fn wedderburn_detects_multiplicity() {
        let t = tol();
        // C ~ M_1 with multiplicity 2: span{I_2} inside M_2
        let s = MatSubspace::span(2, 2, &[CMatrix::identity(2)], &t).unwrap();
        let bd = wedderburn(&s, &t, DEFAULT_SEED).unwrap();
        assert_eq!(bd.blocks.len(), 1);
        assert_eq!(bd.blocks[0].k, 1);
        assert_eq!(bd.blocks[0].multiplicity, 2);
    }

    #[test]
    fn wedderburn_rejects_non_selfadjoint() {
        let t = tol();
        let s = MatSubspace::span(2, 2, &[e(2, 0, 0), e(2, 0, 1), e(2, 1, 1)], &t).unwrap();
        assert!(matches!(
            wedderburn(&s, &t, DEFAULT_SEED),
            Err(OatError::Precondition(_))
        ));
    }

    #[test]
    fn hsa_corner_of_m2() {
        let t = tol();
        let m2 = OperatorAlgebra::make_algebra(
            2,
            &[e(2, 0, 0), e(2, 0, 1), e(2, 1, 0), e(2, 1, 1)],
            SConvention::HalfBall,
            &t,
        )
        .unwrap();
        let corner = MatSubspace::span(2, 2, &[e(2, 0, 0)], &t).unwrap();
        let v = hsa_check(&m2, &corner, &t).unwrap();
        assert!(v.is_yes());
        assert!(v.witness_matrix("unit").unwrap().dist_op(&e(2, 0, 0)) < 1e-9);
        // span{e12} is an inner ideal but has no unit: not an HSA
        let shift = MatSubspace::span(2, 2, &[e(2, 0, 1)], &t).unwrap();
        let v2 = hsa_check(&m2, &shift, &t).unwrap();
        assert!(v2.is_no());
    }
}
