//! Linear subspaces of a matrix space, carried as orthonormal bases under
//! the trace inner product <x, y> = tr(y* x). All toolkit sets (algebras,
//! ideals, corners, Peirce spaces) are represented this way.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cmatrix::{rank_from_sigma, C64, CMatrix};
use crate::error::{OatError, Result};
use crate::tol::Tolerance;

/// A subspace of the rows x cols complex matrices.
///
/// The basis is orthonormal in the trace inner product; `q` stacks the
/// vectorized basis as columns, so `q* q = I` and `q q*` is the orthogonal
/// projector onto the subspace in vector form.
#[derive(Clone)]
pub struct MatSubspace {
    rows: usize,
    cols: usize,
    basis: Vec<CMatrix>,
    q: DMatrix<C64>,
}

impl MatSubspace {
    /// Span of the given matrices, orthonormalized by SVD with the relative
    /// rank cutoff from `tol`.
    pub fn span(rows: usize, cols: usize, mats: &[CMatrix], tol: &Tolerance) -> Result<Self> {
        for m in mats {
            if m.shape() != (rows, cols) {
                return Err(OatError::dim(format!(
                    "span expects {}x{} matrices, got {}x{}",
                    rows,
                    cols,
                    m.rows(),
                    m.cols()
                )));
            }
        }
        let n = rows * cols;
        if mats.is_empty() {
            return Ok(Self::empty(rows, cols));
        }
        let stacked = DMatrix::from_fn(n, mats.len(), |i, j| mats[j].vectorize()[i]);
        let svd = stacked.svd(true, false);
        let sigma = svd.singular_values.as_slice().to_vec();
        let d = rank_from_sigma(&sigma, tol.rank_eps);
        let u = svd.u.expect("svd requested u");
        let q = u.columns(0, d).into_owned();
        Ok(Self::from_q(rows, cols, q))
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        MatSubspace {
            rows,
            cols,
            basis: Vec::new(),
            q: DMatrix::zeros(rows * cols, 0),
        }
    }

    /// The full matrix space.
    pub fn full(rows: usize, cols: usize) -> Self {
        let n = rows * cols;
        Self::from_q(rows, cols, DMatrix::identity(n, n))
    }

    fn from_q(rows: usize, cols: usize, q: DMatrix<C64>) -> Self {
        let basis = (0..q.ncols())
            .map(|j| CMatrix::from_vectorized(rows, cols, &q.column(j).into_owned()))
            .collect();
        MatSubspace { rows, cols, basis, q }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ambient_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    /// Orthogonal projection of a matrix onto the subspace.
    pub fn project(&self, m: &CMatrix) -> CMatrix {
        let v = m.vectorize();
        let coeffs = self.q.adjoint() * &v;
        let proj = &self.q * coeffs;
        CMatrix::from_vectorized(self.rows, self.cols, &proj)
    }

    /// Frobenius norm of m minus its projection.
    pub fn residual(&self, m: &CMatrix) -> f64 {
        (m - &self.project(m)).norm_fro()
    }

    /// Least-squares membership: residual below eq_eps * (1 + ||m||_F).
    pub fn contains(&self, m: &CMatrix, tol: &Tolerance) -> bool {
        m.shape() == (self.rows, self.cols)
            && self.residual(m) <= tol.eq_eps * (1.0 + m.norm_fro())
    }

    /// Coefficients of m in the orthonormal basis (no membership check).
    pub fn coordinates(&self, m: &CMatrix) -> DVector<C64> {
        self.q.adjoint() * m.vectorize()
    }

    pub fn element_from_coordinates(&self, coeffs: &DVector<C64>) -> CMatrix {
        let v = &self.q * coeffs;
        CMatrix::from_vectorized(self.rows, self.cols, &v)
    }

    /// Subspace sum (span of the union of bases).
    pub fn sum(&self, other: &MatSubspace, tol: &Tolerance) -> Result<MatSubspace> {
        self.check_same_ambient(other)?;
        let mats: Vec<CMatrix> = self.basis.iter().chain(other.basis.iter()).cloned().collect();
        MatSubspace::span(self.rows, self.cols, &mats, tol)
    }

    /// Intersection, computed from the null space of [Q1 | -Q2]; a null
    /// direction pairs coefficients with Q1 a = Q2 b, i.e. a common vector.
    pub fn intersect(&self, other: &MatSubspace, tol: &Tolerance) -> Result<MatSubspace> {
        self.check_same_ambient(other)?;
        let (d1, d2) = (self.dim(), other.dim());
        if d1 == 0 || d2 == 0 {
            return Ok(Self::empty(self.rows, self.cols));
        }
        let n = self.rows * self.cols;
        let stacked = DMatrix::from_fn(n, d1 + d2, |i, j| {
            if j < d1 {
                self.q[(i, j)]
            } else {
                -other.q[(i, j - d1)]
            }
        });
        // Columns of [Q1 | -Q2] are unit vectors, so the scale is 1; null
        // directions are detected absolutely against rank_eps.
        let mut members = Vec::new();
        for alpha in crate::cmatrix::nullspace(&stacked, tol.rank_eps) {
            let a1 = alpha.rows(0, d1).into_owned();
            let v = &self.q * a1;
            members.push(CMatrix::from_vectorized(self.rows, self.cols, &v));
        }
        MatSubspace::span(self.rows, self.cols, &members, tol)
    }

    /// Span of all pairwise products {x y : x in self, y in other}.
    pub fn product(&self, other: &MatSubspace, tol: &Tolerance) -> Result<MatSubspace> {
        if self.cols != other.rows {
            return Err(OatError::dim(format!(
                "product of {}x{} and {}x{} subspaces",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut builder = SpanBuilder::new(self.rows, other.cols, tol.rank_eps);
        for x in &self.basis {
            for y in &other.basis {
                builder.push(&(x * y));
            }
        }
        Ok(builder.finish())
    }

    /// Equality: same dimension and mutual containment of bases.
    pub fn equal(&self, other: &MatSubspace, tol: &Tolerance) -> bool {
        if self.ambient_shape() != other.ambient_shape() || self.dim() != other.dim() {
            return false;
        }
        self.basis.iter().all(|b| other.contains(b, tol))
            && other.basis.iter().all(|b| self.contains(b, tol))
    }

    /// Is `other` a subspace of `self` (within tolerance)?
    pub fn contains_subspace(&self, other: &MatSubspace, tol: &Tolerance) -> bool {
        other.basis.iter().all(|b| self.contains(b, tol))
    }

    /// Image of the subspace under a linear matrix map.
    pub fn map_space(
        &self,
        f: impl Fn(&CMatrix) -> CMatrix,
        tol: &Tolerance,
    ) -> Result<MatSubspace> {
        let imgs: Vec<CMatrix> = self.basis.iter().map(|b| f(b)).collect();
        let (r, c) = imgs
            .first()
            .map(|m| m.shape())
            .unwrap_or((self.rows, self.cols));
        MatSubspace::span(r, c, &imgs, tol)
    }

    /// The adjoint subspace {x* : x in self}.
    pub fn adjoint_space(&self, tol: &Tolerance) -> MatSubspace {
        self.map_space(|b| b.adjoint(), tol)
            .expect("adjoint preserves shape")
    }

    /// Fixed points {x in self : f(x) = x} of a linear map, via the null
    /// space of the restriction of f - id to the subspace.
    pub fn fixed_points(
        &self,
        f: impl Fn(&CMatrix) -> CMatrix,
        tol: &Tolerance,
    ) -> Result<MatSubspace> {
        let d = self.dim();
        if d == 0 {
            return Ok(self.clone());
        }
        let n = self.rows * self.cols;
        let cols: Vec<DVector<C64>> = self
            .basis
            .iter()
            .map(|b| {
                let fb = f(b);
                fb.vectorize() - b.vectorize()
            })
            .collect();
        let stacked = DMatrix::from_fn(n, d, |i, j| cols[j][i]);
        let scale = 1.0 + stacked.norm();
        let mut members = Vec::new();
        for alpha in crate::cmatrix::nullspace(&stacked, tol.rank_eps * scale) {
            members.push(self.element_from_coordinates(&alpha));
        }
        MatSubspace::span(self.rows, self.cols, &members, tol)
    }

    /// Principal angles (radians, ascending) between two subspaces of the
    /// same ambient space, from the singular values of Q1* Q2.
    pub fn principal_angles(&self, other: &MatSubspace) -> Vec<f64> {
        if self.dim() == 0 || other.dim() == 0 {
            return Vec::new();
        }
        let m = self.q.adjoint() * &other.q;
        let mut sv = m.svd(false, false).singular_values.as_slice().to_vec();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv.iter().map(|&s| s.clamp(-1.0, 1.0).acos()).collect()
    }

    /// Largest principal angle; subspaces of equal dimension are equal iff
    /// this is ~0.
    pub fn max_principal_angle(&self, other: &MatSubspace) -> f64 {
        self.principal_angles(other)
            .last()
            .copied()
            .unwrap_or(if self.dim() == other.dim() { 0.0 } else { std::f64::consts::FRAC_PI_2 })
    }

    fn check_same_ambient(&self, other: &MatSubspace) -> Result<()> {
        if self.ambient_shape() != other.ambient_shape() {
            return Err(OatError::dim(format!(
                "subspaces live in {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

impl std::fmt::Debug for MatSubspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "MatSubspace(dim {} of {}x{})",
            self.dim(),
            self.rows,
            self.cols
        )
    }
}

/// Incremental orthonormal span with double Gram-Schmidt reorthogonalization.
/// Used where feeding all candidates to one SVD would be wasteful (iterated
/// closures, large product spans).
pub struct SpanBuilder {
    rows: usize,
    cols: usize,
    rank_eps: f64,
    columns: Vec<DVector<C64>>,
}

impl SpanBuilder {
    pub fn new(rows: usize, cols: usize, rank_eps: f64) -> Self {
        SpanBuilder {
            rows,
            cols,
            rank_eps,
            columns: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Add a matrix to the span. Returns true when it enlarged the span.
    pub fn push(&mut self, m: &CMatrix) -> bool {
        let norm0 = m.norm_fro();
        if norm0 <= self.rank_eps {
            return false;
        }
        let mut v = m.vectorize().scale(1.0 / norm0);
        for _ in 0..2 {
            for c in &self.columns {
                let coeff = c.dotc(&v);
                v -= c.scale_complex(coeff);
            }
        }
        let norm = v.norm();
        if norm <= self.rank_eps {
            return false;
        }
        self.columns.push(v.scale(1.0 / norm));
        true
    }

    pub fn finish(self) -> MatSubspace {
        let n = self.rows * self.cols;
        let q = DMatrix::from_fn(n, self.columns.len(), |i, j| self.columns[j][i]);
        MatSubspace {
            rows: self.rows,
            cols: self.cols,
            basis: (0..q.ncols())
                .map(|j| CMatrix::from_vectorized(self.rows, self.cols, &q.column(j).into_owned()))
                .collect(),
            q,
        }
    }
}

trait ScaleComplex {
    fn scale_complex(&self, s: C64) -> DVector<C64>;
}

impl ScaleComplex for DVector<C64> {
    fn scale_complex(&self, s: C64) -> DVector<C64> {
        self.map(|z| z * s)
    }
}

/// Serialized form: a list of basis matrices spanning the subspace.
#[derive(Serialize, Deserialize)]
pub struct SubspaceJson {
    pub basis: Vec<CMatrix>,
}

impl MatSubspace {
    pub fn to_json(&self) -> SubspaceJson {
        SubspaceJson {
            basis: self.basis.clone(),
        }
    }

    pub fn from_json(json: &SubspaceJson, rows: usize, cols: usize, tol: &Tolerance) -> Result<Self> {
        MatSubspace::span(rows, cols, &json.basis, tol)
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
    fn span_dedupes_dependent_generators() {
        let a = e(2, 0, 0);
        let b = a.scale_re(2.0);
        let s = MatSubspace::span(2, 2, &[a.clone(), b], &tol()).unwrap();
        assert_eq!(s.dim(), 1);
        assert!(s.contains(&a.scale_re(-3.5), &tol()));
    }

    #[test]
    fn intersect_of_overlapping_spans() {
        let t = tol();
        let s1 = MatSubspace::span(2, 2, &[e(2, 0, 0), e(2, 0, 1)], &t).unwrap();
        let s2 = MatSubspace::span(2, 2, &[e(2, 0, 1), e(2, 1, 1)], &t).unwrap();
        let cap = s1.intersect(&s2, &t).unwrap();
        assert_eq!(cap.dim(), 1);
        assert!(cap.contains(&e(2, 0, 1), &t));
        assert!(!cap.contains(&e(2, 0, 0), &t));
    }

    #[test]
    fn product_span_of_matrix_units() {
        let t = tol();
        let s1 = MatSubspace::span(2, 2, &[e(2, 0, 1)], &t).unwrap();
        let s2 = MatSubspace::span(2, 2, &[e(2, 1, 0), e(2, 1, 1)], &t).unwrap();
        let p = s1.product(&s2, &t).unwrap();
        assert_eq!(p.dim(), 2);
        assert!(p.contains(&e(2, 0, 0), &t));
        assert!(p.contains(&e(2, 0, 1), &t));
    }

    #[test]
    fn equality_is_basis_independent() {
        let t = tol();
        let mix1 = &e(2, 0, 0) + &e(2, 1, 1);
        let mix2 = &e(2, 0, 0) - &e(2, 1, 1);
        let s1 = MatSubspace::span(2, 2, &[mix1, mix2], &t).unwrap();
        let s2 = MatSubspace::span(2, 2, &[e(2, 0, 0), e(2, 1, 1)], &t).unwrap();
        assert!(s1.equal(&s2, &t));
        assert!(s1.max_principal_angle(&s2) < 1e-10);
    }

    #[test]
    fn fixed_points_of_compression() {
        // fixed points of x -> p x p in M_2, p = e11: span{e11}
        let t = tol();
        let p = e(2, 0, 0);
        let full = MatSubspace::full(2, 2);
        let fixed = full.fixed_points(|x| &(&p * x) * &p, &t).unwrap();
        assert_eq!(fixed.dim(), 1);
        assert!(fixed.contains(&e(2, 0, 0), &t));
    }

    #[test]
    fn builder_matches_batch_span() {
        let t = tol();
        let mats = [e(3, 0, 1), e(3, 1, 2), &e(3, 0, 1) + &e(3, 1, 2)];
        let batch = MatSubspace::span(3, 3, &mats, &t).unwrap();
        let mut b = SpanBuilder::new(3, 3, t.rank_eps);
        for m in &mats {
            b.push(m);
        }
        let inc = b.finish();
        assert!(batch.equal(&inc, &t));
    }
}
