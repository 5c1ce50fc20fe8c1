//! Ternary rings of operators: rectangular subspaces Z with Z Z* Z inside
//! Z, their corner algebras ZZ* and Z*Z, the linking algebra in M_{m+n},
//! tripotent-implemented equivalence of open projections, and the
//! decompositions of inner ideals as aZb.
//!
//! Multiplication of incompatible rectangular shapes always goes through
//! the canonical corner embedding into the linking algebra.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{hsa_check, OperatorAlgebra, SConvention};
use crate::bimodule::support_tripotent_search;
use crate::calculus::{in_s, power_t, support_projection};
use crate::cmatrix::{C64, CMatrix};
use crate::error::{OatError, Result};
use crate::gen::ginibre;
use crate::subspace::{MatSubspace, SpanBuilder};
use crate::tol::Tolerance;
use crate::tripotent::pz_verify;
use crate::verdict::Verdict;

/// A ternary ring of operators inside the m x n matrices, with its corner
/// algebras and linking algebra precomputed.
#[derive(Debug, Clone)]
pub struct TroSpace {
    /// The ternary-closed subspace of M_{m x n}.
    pub z: MatSubspace,
    /// span ZZ* inside M_m.
    pub left_algebra: MatSubspace,
    /// span Z*Z inside M_n.
    pub right_algebra: MatSubspace,
    /// [[ZZ*, Z], [Z*, Z*Z]] inside M_{m+n}.
    pub linking: MatSubspace,
}

/// JSON form: {"rows": m, "cols": n, "generators": [matrix...]}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TroJson {
    pub rows: usize,
    pub cols: usize,
    pub generators: Vec<CMatrix>,
}

impl TroSpace {
    pub fn rows(&self) -> usize {
        self.z.ambient_shape().0
    }

    pub fn cols(&self) -> usize {
        self.z.ambient_shape().1
    }

    /// Corner embedding of an element of Z into M_{m+n}.
    pub fn embed_z(&self, zm: &CMatrix) -> CMatrix {
        let (m, n) = self.z.ambient_shape();
        embed_rect(zm, 0, m, m + n)
    }

    /// The linking algebra as an operator algebra on M_{m+n}. The linking
    /// space is product-closed by the TRO identities, verified at
    /// construction.
    pub fn linking_algebra(&self, convention: SConvention, tol: &Tolerance) -> OperatorAlgebra {
        let (m, n) = self.z.ambient_shape();
        OperatorAlgebra::from_closed_space(m + n, self.linking.clone(), convention, tol)
    }

    pub fn left_corner_algebra(&self, convention: SConvention, tol: &Tolerance) -> OperatorAlgebra {
        let (m, _) = self.z.ambient_shape();
        OperatorAlgebra::from_closed_space(m, self.left_algebra.clone(), convention, tol)
    }

    pub fn right_corner_algebra(&self, convention: SConvention, tol: &Tolerance) -> OperatorAlgebra {
        let (_, n) = self.z.ambient_shape();
        OperatorAlgebra::from_closed_space(n, self.right_algebra.clone(), convention, tol)
    }

    pub fn to_json(&self) -> TroJson {
        TroJson {
            rows: self.rows(),
            cols: self.cols(),
            generators: self.z.basis().to_vec(),
        }
    }

    pub fn from_json(json: &TroJson, tol: &Tolerance) -> Result<Self> {
        for g in &json.generators {
            if g.shape() != (json.rows, json.cols) {
                return Err(OatError::dim("generator does not match the declared shape"));
            }
        }
        make_tro(&json.generators, tol)
    }
}

/// Place a block at (r0, c0) of a total x total matrix of zeros.
fn embed_rect(mat: &CMatrix, r0: usize, c0: usize, total: usize) -> CMatrix {
    let (r, c) = mat.shape();
    CMatrix::from_fn(total, total, |i, j| {
        if i >= r0 && i < r0 + r && j >= c0 && j < c0 + c {
            mat.at(i - r0, j - c0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Cut the block at (r0, c0) with shape (r, c) out of a square matrix.
fn extract_rect(mat: &CMatrix, r0: usize, c0: usize, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |i, j| mat.at(i + r0, j + c0))
}

/// The smallest ternary-closed subspace containing the generators,
/// together with its corner algebras and linking algebra. The corner and
/// linking closures are theorems once Z is ternary closed, so a failure
/// there raises an internal error.
pub fn make_tro(generators: &[CMatrix], tol: &Tolerance) -> Result<TroSpace> {
    let first = generators
        .first()
        .ok_or_else(|| OatError::invalid("at least one generator is required"))?;
    let (m, n) = first.shape();
    if m == 0 || n == 0 {
        return Err(OatError::dim("generators must be nonempty matrices"));
    }
    for g in generators {
        if g.shape() != (m, n) {
            return Err(OatError::dim("generators have mismatched shapes"));
        }
    }
    let mut z = MatSubspace::span(m, n, generators, tol)?;
    loop {
        let before = z.dim();
        let mut builder = SpanBuilder::new(m, n, tol.rank_eps);
        for b in z.basis() {
            builder.push(b);
        }
        for x in z.basis() {
            for w in z.basis() {
                let xw = x * &w.adjoint();
                for y in z.basis() {
                    builder.push(&(&xw * y));
                }
            }
        }
        let next = builder.finish();
        if next.dim() == before {
            z = next;
            break;
        }
        z = next;
    }

    let mut left_b = SpanBuilder::new(m, m, tol.rank_eps);
    let mut right_b = SpanBuilder::new(n, n, tol.rank_eps);
    for x in z.basis() {
        for w in z.basis() {
            left_b.push(&(x * &w.adjoint()));
            right_b.push(&(&x.adjoint() * w));
        }
    }
    let left_algebra = left_b.finish();
    let right_algebra = right_b.finish();
    for (name, s) in [("ZZ*", &left_algebra), ("Z*Z", &right_algebra)] {
        let prod = s.product(s, tol)?;
        if !s.contains_subspace(&prod, tol) {
            return Err(OatError::internal(format!("{name} is not product-closed")));
        }
        if !s.adjoint_space(tol).equal(s, tol) {
            return Err(OatError::internal(format!("{name} is not *-closed")));
        }
    }

    let total = m + n;
    let mut mats = Vec::new();
    for b in left_algebra.basis() {
        mats.push(embed_rect(b, 0, 0, total));
    }
    for b in z.basis() {
        mats.push(embed_rect(b, 0, m, total));
        mats.push(embed_rect(&b.adjoint(), m, 0, total));
    }
    for b in right_algebra.basis() {
        mats.push(embed_rect(b, m, m, total));
    }
    let linking = MatSubspace::span(total, total, &mats, tol)?;
    let lprod = linking.product(&linking, tol)?;
    if !linking.contains_subspace(&lprod, tol) {
        return Err(OatError::internal("linking space is not product-closed"));
    }
    if !linking.adjoint_space(tol).equal(&linking, tol) {
        return Err(OatError::internal("linking space is not *-closed"));
    }

    Ok(TroSpace {
        z,
        left_algebra,
        right_algebra,
        linking,
    })
}

/// Does v implement a TRO equivalence of its support projections?
///
/// With p = v*v and q = vv*, requires p in Z*Z and q in ZZ* (openness is
/// membership in finite dimension) and v (Z*Z)_p inside Z. The q-side
/// inclusion v* (ZZ*)_q inside Z* is implied and re-derived here, as is
/// the equivalent pair v* (qZp) inside Z*Z and v (pZ*q) inside ZZ*; a
/// failure of an implied inclusion raises an internal error.
pub fn tro_pz_verify(tro: &TroSpace, v: &CMatrix, tol: &Tolerance) -> Result<Verdict> {
    let (m, n) = tro.z.ambient_shape();
    if v.shape() != (m, n) {
        return Err(OatError::dim(format!(
            "candidate is {}x{}, the TRO ambient is {m}x{n}",
            v.rows(),
            v.cols()
        )));
    }
    let eps = tol.verify_eps();
    if (&(v * &v.adjoint()) * v).dist_op(v) > eps * (1.0 + v.opnorm()) {
        return Err(OatError::precondition("v is not a tripotent"));
    }
    let p = &v.adjoint() * v;
    let q = v * &v.adjoint();

    let mut verdict = Verdict::yes();
    let mut ok = true;
    if !tro.right_algebra.contains(&p, tol) {
        ok = false;
        verdict = verdict.note("p = v*v is not open: it lies outside Z*Z");
    }
    if !tro.left_algebra.contains(&q, tol) {
        ok = false;
        verdict = verdict.note("q = vv* is not open: it lies outside ZZ*");
    }
    let b_p = tro
        .right_algebra
        .fixed_points(|b| &(&p * b) * &p, tol)?;
    let mut p_side = true;
    for b in b_p.basis() {
        if !tro.z.contains(&(v * b), tol) {
            p_side = false;
            break;
        }
    }
    if !p_side {
        ok = false;
        verdict = verdict.note("v (Z*Z)_p is not contained in Z");
    }
    // Implied q-side inclusion.
    let a_q = tro
        .left_algebra
        .fixed_points(|a| &(&q * a) * &q, tol)?;
    let z_adj = tro.z.adjoint_space(tol);
    let mut q_side = true;
    for a in a_q.basis() {
        if !z_adj.contains(&(&v.adjoint() * a), tol) {
            q_side = false;
            break;
        }
    }
    if ok && !q_side {
        return Err(OatError::internal(
            "p-side TRO inclusions hold but the implied q-side inclusion fails",
        ));
    }
    if !q_side {
        verdict = verdict.note("v* (ZZ*)_q is not contained in Z*");
    }
    // Equivalent pair from the corner cut of Z.
    let qzp = tro.z.map_space(|zm| &(&q * zm) * &p, tol)?;
    let mut pair = true;
    for w in qzp.basis() {
        if !tro.right_algebra.contains(&(&v.adjoint() * w), tol) {
            pair = false;
        }
        if !tro.left_algebra.contains(&(v * &w.adjoint()), tol) {
            pair = false;
        }
    }
    if ok && !pair {
        return Err(OatError::internal(
            "TRO inclusions hold but the equivalent corner inclusions fail",
        ));
    }
    if !pair {
        verdict = verdict.note("corner inclusions v*(qZp), v(pZ*q) fail");
    }
    if !ok {
        return Ok(Verdict::no().notes_from(&verdict));
    }
    Ok(verdict
        .with_matrix("p", p)
        .with_matrix("q", q)
        .note("openness verified as membership of the supports and the corner inclusion"))
}

/// Data produced by `isu_construct`: the transported element with its
/// factorization and the corner spaces of the induced Morita equivalence.
#[derive(Debug, Clone)]
pub struct IsuData {
    /// a = v b v*.
    pub a: CMatrix,
    /// x = v b^{1/2}.
    pub x: CMatrix,
    /// y = b^{1/2} v*.
    pub y: CMatrix,
    /// span aZb = qZp, the equivalence bimodule.
    pub bimodule: MatSubspace,
    /// (ZZ*)_q = closure of aAa.
    pub left_corner: MatSubspace,
    /// (Z*Z)_p = closure of bBb.
    pub right_corner: MatSubspace,
}

/// Transport b in S of Z*Z through an open tripotent v with v*v = p_b:
/// a = v b v* lands in S of ZZ* with support vv*, and x = v b^{1/2},
/// y = b^{1/2} v* factor the pair as a = xy, b = yx inside Ball(Z). The
/// corner algebras are *-isomorphic via z -> v z v*, and the bimodule
/// aZb = qZp is ternary isomorphic to (Z*Z)_p via left multiplication by
/// v*; both maps are verified, the ternary one at matrix levels 1 and 2.
pub fn isu_construct(
    tro: &TroSpace,
    v: &CMatrix,
    b: &CMatrix,
    convention: SConvention,
    tol: &Tolerance,
) -> Result<(IsuData, Verdict)> {
    let open = tro_pz_verify(tro, v, tol)?;
    if !open.is_yes() {
        return Err(OatError::precondition("v is not an open tripotent of Z"));
    }
    let right = tro.right_corner_algebra(convention, tol);
    let left = tro.left_corner_algebra(convention, tol);
    let member = in_s(&right, b, tol)?;
    if !member.is_yes() {
        return Err(OatError::precondition("b is not in S of Z*Z"));
    }
    let p = &v.adjoint() * v;
    let q = v * &v.adjoint();
    let p_b = support_projection(b, tol)?.p;
    let eps = tol.verify_eps();
    if p_b.dist_op(&p) > 10.0 * eps {
        return Err(OatError::precondition(
            "support of b does not match v*v",
        ));
    }

    let a = &(v * b) * &v.adjoint();
    let half = power_t(b, 0.5, tol)?;
    let x = v * &half;
    let y = &half * &v.adjoint();

    let mut verdict = Verdict::yes();
    let mut ok = true;
    let am = in_s(&left, &a, tol)?;
    if !am.is_yes() {
        ok = false;
        verdict = verdict.note("a = v b v* is not in S of ZZ*").notes_from(&am);
    }
    let p_a = support_projection(&a, tol)?.p;
    let support_defect = p_a.dist_op(&q);
    if support_defect > 10.0 * eps {
        ok = false;
        verdict = verdict.note("support of a does not match vv*");
    }
    for (name, w) in [("x", &x), ("y*", &y.adjoint())] {
        if !tro.z.contains(w, tol) {
            ok = false;
            verdict = verdict.note(format!("{name} leaves Z"));
        }
    }
    if x.opnorm() > 1.0 + eps || y.opnorm() > 1.0 + eps {
        ok = false;
        verdict = verdict.note("factorization leaves the unit ball");
    }
    let xy_defect = (&x * &y).dist_op(&a);
    let yx_defect = (&y * &x).dist_op(b);
    if xy_defect > eps * (1.0 + a.opnorm()) || yx_defect > eps * (1.0 + b.opnorm()) {
        ok = false;
        verdict = verdict.note("xy = a or yx = b fails");
    }

    let bimodule = tro.z.map_space(|zm| &(&a * zm) * b, tol)?;
    let qzp = tro.z.map_space(|zm| &(&q * zm) * &p, tol)?;
    if !bimodule.equal(&qzp, tol) {
        ok = false;
        verdict = verdict.note("span aZb does not equal qZp");
    }
    let bza = tro.z.map_space(|zm| &(b * &zm.adjoint()) * &a, tol)?;
    if !bza.equal(&bimodule.adjoint_space(tol), tol) {
        ok = false;
        verdict = verdict.note("span bZ*a is not the adjoint of aZb");
    }
    let right_corner = tro
        .right_algebra
        .fixed_points(|w| &(&p * w) * &p, tol)?;
    let left_corner = tro
        .left_algebra
        .fixed_points(|w| &(&q * w) * &q, tol)?;
    let bbb = tro.right_algebra.map_space(|w| &(b * w) * b, tol)?;
    if !bbb.equal(&right_corner, tol) {
        ok = false;
        verdict = verdict.note("span bBb does not equal (Z*Z)_p");
    }
    let aaa = tro.left_algebra.map_space(|w| &(&a * w) * &a, tol)?;
    if !aaa.equal(&left_corner, tol) {
        ok = false;
        verdict = verdict.note("span aAa does not equal (ZZ*)_q");
    }

    // Ternary isomorphism w -> v* w from aZb onto (Z*Z)_p, checked at
    // levels 1 and 2.
    let bim_basis = bimodule.basis();
    let images: Vec<CMatrix> = bim_basis.iter().map(|w| &v.adjoint() * w).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x69_73_75);
    for img in &images {
        if !right_corner.contains(img, tol) {
            ok = false;
            verdict = verdict.note("v* (aZb) leaves (Z*Z)_p");
            break;
        }
    }
    let img_span = MatSubspace::span(tro.cols(), tro.cols(), &images, tol)?;
    if img_span.dim() != bimodule.dim() || right_corner.dim() != bimodule.dim() {
        ok = false;
        verdict = verdict.note("ternary map is not bijective onto (Z*Z)_p");
    }
    for (i, w1) in bim_basis.iter().enumerate() {
        for (j, w2) in bim_basis.iter().enumerate() {
            for (k, w3) in bim_basis.iter().enumerate() {
                let lhs = &v.adjoint() * &(&(w1 * &w2.adjoint()) * w3);
                let rhs = &(&images[i] * &images[j].adjoint()) * &images[k];
                if lhs.dist_op(&rhs) > eps * (1.0 + lhs.opnorm()) {
                    ok = false;
                    verdict = verdict.note("ternary morphism identity fails");
                }
            }
        }
    }
    for level in [1usize, 2] {
        let mut zsum = CMatrix::zeros(level * tro.rows(), level * tro.cols());
        let mut fsum = CMatrix::zeros(level * tro.cols(), level * tro.cols());
        for (s, w) in bim_basis.iter().enumerate() {
            let g = ginibre(level, level, &mut rng);
            zsum = &zsum + &g.kron(w);
            fsum = &fsum + &g.kron(&images[s]);
        }
        if (zsum.opnorm() - fsum.opnorm()).abs() > eps * (1.0 + zsum.opnorm()) {
            ok = false;
            verdict = verdict.note(format!("ternary map is not isometric at level {level}"));
        }
    }

    // Corner *-isomorphism z -> v z v* from (Z*Z)_p onto (ZZ*)_q.
    let rc_basis = right_corner.basis();
    let star_images: Vec<CMatrix> = rc_basis.iter().map(|w| &(v * w) * &v.adjoint()).collect();
    let star_span = MatSubspace::span(tro.rows(), tro.rows(), &star_images, tol)?;
    if star_span.dim() != right_corner.dim() || left_corner.dim() != right_corner.dim() {
        ok = false;
        verdict = verdict.note("corner map is not bijective onto (ZZ*)_q");
    }
    for (i, w1) in rc_basis.iter().enumerate() {
        if !left_corner.contains(&star_images[i], tol) {
            ok = false;
            verdict = verdict.note("corner map leaves (ZZ*)_q");
        }
        let star = &(v * &w1.adjoint()) * &v.adjoint();
        if star.dist_op(&star_images[i].adjoint()) > eps * (1.0 + star.opnorm()) {
            ok = false;
            verdict = verdict.note("corner map does not preserve the involution");
        }
        for (j, w2) in rc_basis.iter().enumerate() {
            let lhs = &(v * &(w1 * w2)) * &v.adjoint();
            let rhs = &star_images[i] * &star_images[j];
            if lhs.dist_op(&rhs) > eps * (1.0 + lhs.opnorm()) {
                ok = false;
                verdict = verdict.note("corner map is not multiplicative");
            }
        }
    }

    let data = IsuData {
        a: a.clone(),
        x: x.clone(),
        y: y.clone(),
        bimodule,
        left_corner,
        right_corner,
    };
    if !ok {
        return Ok((data, Verdict::no().notes_from(&verdict)));
    }
    Ok((
        data,
        verdict
            .with_matrix("a", a)
            .with_matrix("x", x)
            .with_matrix("y", y)
            .with_scalar("xy_defect", xy_defect)
            .with_scalar("yx_defect", yx_defect)
            .with_scalar("support_defect", support_defect),
    ))
}

/// Decompose an inner ideal D of Z as aZb, with a the unit of the
/// hereditary subalgebra DD* of ZZ* and b the unit of D*D. When D also
/// carries a C*-algebra structure (a support tripotent found inside the
/// linking algebra), the supports are certified Peligrad-Zsido equivalent
/// there. Separability hypotheses hold trivially in finite dimension,
/// which the verdict notes.
pub fn sep_decompose(
    tro: &TroSpace,
    d: &MatSubspace,
    convention: SConvention,
    tol: &Tolerance,
    seed: u64,
) -> Result<Verdict> {
    let (m, n) = tro.z.ambient_shape();
    if d.ambient_shape() != (m, n) {
        return Err(OatError::dim("D does not match the TRO ambient"));
    }
    if !tro.z.contains_subspace(d, tol) {
        return Err(OatError::precondition("D is not contained in Z"));
    }
    let dzd = d
        .product(&tro.z.adjoint_space(tol), tol)?
        .product(d, tol)?;
    if !d.contains_subspace(&dzd, tol) {
        return Err(OatError::precondition("D is not an inner ideal: D Z* D leaves D"));
    }
    if d.dim() == 0 {
        return Ok(Verdict::yes()
            .with_matrix("a", CMatrix::zeros(m, m))
            .with_matrix("b", CMatrix::zeros(n, n))
            .note("D is zero; a and b are zero")
            .note("separability is automatic in finite dimension"));
    }

    let left = tro.left_corner_algebra(convention, tol);
    let right = tro.right_corner_algebra(convention, tol);
    let dd = d.product(&d.adjoint_space(tol), tol)?;
    let d_d = d.adjoint_space(tol).product(d, tol)?;
    let hl = hsa_check(&left, &dd, tol)?;
    let a = match hl.witness_matrix("unit") {
        Some(u) if hl.is_yes() => u.clone(),
        _ => {
            return Err(OatError::internal(
                "DD* of an inner ideal is not a unital hereditary subalgebra of ZZ*",
            ))
        }
    };
    let hr = hsa_check(&right, &d_d, tol)?;
    let b = match hr.witness_matrix("unit") {
        Some(u) if hr.is_yes() => u.clone(),
        _ => {
            return Err(OatError::internal(
                "D*D of an inner ideal is not a unital hereditary subalgebra of Z*Z",
            ))
        }
    };
    let azb = tro.z.map_space(|zm| &(&a * zm) * &b, tol)?;
    if !azb.equal(d, tol) {
        return Err(OatError::internal("aZb does not reproduce D"));
    }

    let mut verdict = Verdict::yes()
        .with_matrix("a", a.clone())
        .with_matrix("b", b.clone())
        .note("separability is automatic in finite dimension");

    // C*-structure test: a support tripotent for D inside the linking
    // algebra. When it exists its supports are the units found above, and
    // they are PZ equivalent there.
    let linking_alg = tro.linking_algebra(convention, tol);
    let total = m + n;
    let embedded: Vec<CMatrix> = d
        .basis()
        .iter()
        .map(|w| embed_rect(w, 0, m, total))
        .collect();
    let d_embedded = MatSubspace::span(total, total, &embedded, tol)?;
    let sts = support_tripotent_search(&linking_alg, &d_embedded, tol, seed)?;
    if sts.is_yes() {
        let u_big = sts
            .witness_matrix("u")
            .ok_or_else(|| OatError::internal("support search returned yes without a witness"))?;
        let u_z = extract_rect(u_big, 0, m, m, n);
        let eps = tol.verify_eps();
        let uu = &u_z * &u_z.adjoint();
        let u_u = &u_z.adjoint() * &u_z;
        if uu.dist_op(&a) > 10.0 * eps || u_u.dist_op(&b) > 10.0 * eps {
            return Err(OatError::internal(
                "support tripotent of D does not carry the units of DD* and D*D",
            ));
        }
        let p_arg = embed_rect(&b, m, m, total);
        let q_arg = embed_rect(&a, 0, 0, total);
        let v_emb = embed_rect(&u_z, 0, m, total);
        let pz = pz_verify(&linking_alg, &p_arg, &q_arg, &v_emb, tol)?;
        if !pz.is_yes() {
            return Err(OatError::internal(
                "support tripotent of a C*-structured inner ideal fails PZ verification",
            ));
        }
        verdict = verdict
            .with_matrix("u", u_z)
            .note("D is ternary isomorphic to a C*-algebra; p_a ~ p_b certified in the linking algebra");
    } else if sts.is_no() {
        verdict = verdict.note("D carries no C*-structure; PZ certification does not apply");
    } else {
        verdict = verdict.note("C*-structure test inconclusive within the search budget");
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmatrix::ONE;
    use rand::Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn e(r: usize, c: usize, i: usize, j: usize) -> CMatrix {
        let mut m = CMatrix::zeros(r, c);
        m.set(i, j, ONE);
        m
    }

    fn full_rect(r: usize, c: usize, t: &Tolerance) -> TroSpace {
        let gens: Vec<CMatrix> = (0..r)
            .flat_map(|i| (0..c).map(move |j| (i, j)))
            .map(|(i, j)| e(r, c, i, j))
            .collect();
        make_tro(&gens, t).unwrap()
    }

    #[test]
    fn rank_one_rectangular_tro() {
        let t = tol();
        let tro = make_tro(&[e(1, 2, 0, 1)], &t).unwrap();
        assert_eq!(tro.z.dim(), 1);
        assert_eq!(tro.left_algebra.dim(), 1);
        assert!(tro.left_algebra.contains(&CMatrix::identity(1), &t));
        assert_eq!(tro.right_algebra.dim(), 1);
        assert!(tro.right_algebra.contains(&e(2, 2, 1, 1), &t));
        assert_eq!(tro.linking.dim(), 4);
    }

    #[test]
    fn full_rectangular_tro() {
        let t = tol();
        let tro = full_rect(2, 3, &t);
        assert_eq!(tro.z.dim(), 6);
        assert_eq!(tro.left_algebra.dim(), 4);
        assert_eq!(tro.right_algebra.dim(), 9);
        assert_eq!(tro.linking.dim(), 25);
    }

    #[test]
    fn singly_generated_tro_matches_singular_value_oracle() {
        // The ternary closure of {x} is span{ u sigma^{2k+1} v* }, whose
        // dimension is the number of distinct nonzero singular values.
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let distinct = |x: &CMatrix| -> usize {
            let sv: Vec<f64> = x
                .singular_values()
                .into_iter()
                .filter(|&s| s > 1e-9)
                .collect();
            let mut count = sv.len().min(1);
            for pair in sv.windows(2) {
                if (pair[0] - pair[1]).abs() > 1e-6 * pair[0].max(1.0) {
                    count += 1;
                }
            }
            count
        };
        // Rank 2 with distinct singular values.
        let g1 = ginibre(3, 2, &mut rng);
        let g2 = ginibre(4, 2, &mut rng);
        let u = g1.range_basis(1e-10);
        let w = g2.range_basis(1e-10);
        let sig = CMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                C64::new(if i == 0 { 1.7 } else { 0.6 }, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let x = &(&u * &sig) * &w.adjoint();
        assert_eq!(distinct(&x), 2);
        let tro = make_tro(&[x.clone()], &t).unwrap();
        assert_eq!(tro.z.dim(), 2);
        // Equal singular values collapse the closure to one dimension.
        let x1 = &u * &w.adjoint();
        assert_eq!(distinct(&x1), 1);
        let tro1 = make_tro(&[x1], &t).unwrap();
        assert_eq!(tro1.z.dim(), 1);
    }

    #[test]
    fn make_tro_rejects_shape_mismatch() {
        let t = tol();
        let err = make_tro(&[e(1, 2, 0, 0), e(2, 1, 0, 0)], &t).unwrap_err();
        assert!(matches!(err, OatError::Dim(_)));
    }

    #[test]
    fn tro_pz_on_full_square() {
        let t = tol();
        let tro = full_rect(2, 2, &t);
        for v in [e(2, 2, 0, 1), e(2, 2, 0, 0), CMatrix::identity(2)] {
            let verdict = tro_pz_verify(&tro, &v, &t).unwrap();
            assert!(verdict.is_yes());
        }
    }

    #[test]
    fn tro_pz_on_span_e12() {
        let t = tol();
        let tro = make_tro(&[e(2, 2, 0, 1)], &t).unwrap();
        let verdict = tro_pz_verify(&tro, &e(2, 2, 0, 1), &t).unwrap();
        assert!(verdict.is_yes());
        // E21 is a tripotent of the ambient but its supports live in the
        // wrong corners.
        let verdict = tro_pz_verify(&tro, &e(2, 2, 1, 0), &t).unwrap();
        assert!(verdict.is_no());
    }

    #[test]
    fn tro_pz_rejects_wrong_shape() {
        let t = tol();
        let tro = make_tro(&[e(1, 2, 0, 1)], &t).unwrap();
        let err = tro_pz_verify(&tro, &e(2, 1, 1, 0), &t).unwrap_err();
        assert!(matches!(err, OatError::Dim(_)));
    }

    #[test]
    fn tro_pz_rejects_non_tripotent() {
        let t = tol();
        let tro = full_rect(2, 2, &t);
        let err = tro_pz_verify(&tro, &e(2, 2, 0, 1).scale_re(0.5), &t).unwrap_err();
        assert!(matches!(err, OatError::Precondition(_)));
    }

    /// tro_pz_verify agrees with pz_verify in the linking algebra between
    /// 0+p and q+0, across yes and no instances.
    #[test]
    fn tro_pz_matches_linking_pz() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cases: Vec<(TroSpace, Vec<CMatrix>)> = vec![
            (full_rect(2, 3, &t), {
                let mut cands = vec![e(2, 3, 0, 0), e(2, 3, 1, 2)];
                for _ in 0..4 {
                    let g = ginibre(2, 3, &mut rng);
                    cands.push(g.polar(1e-8).r);
                }
                cands
            }),
            (make_tro(&[e(2, 2, 0, 1)], &t).unwrap(), vec![
                e(2, 2, 0, 1),
                e(2, 2, 1, 0),
                e(2, 2, 0, 0),
            ]),
            (make_tro(&[e(3, 3, 0, 1), e(3, 3, 0, 2)], &t).unwrap(), vec![
                e(3, 3, 0, 1),
                e(3, 3, 0, 2),
                &e(3, 3, 0, 1).scale_re(0.6) + &e(3, 3, 0, 2).scale_re(0.8),
                e(3, 3, 1, 0),
            ]),
        ];
        for (tro, cands) in &cases {
            let (m, n) = tro.z.ambient_shape();
            let linking_alg = tro.linking_algebra(SConvention::HalfBall, &t);
            for v in cands {
                if (&(v * &v.adjoint()) * v).dist_op(v) > 1e-10 {
                    continue;
                }
                let direct = tro_pz_verify(tro, v, &t).unwrap().is_yes();
                let p = &v.adjoint() * v;
                let q = v * &v.adjoint();
                let p_arg = embed_rect(&p, m, m, m + n);
                let q_arg = embed_rect(&q, 0, 0, m + n);
                let v_emb = embed_rect(v, 0, m, m + n);
                let via_linking = match pz_verify(&linking_alg, &p_arg, &q_arg, &v_emb, &t) {
                    Ok(verdict) => verdict.is_yes(),
                    Err(OatError::Precondition(_)) => false,
                    Err(e) => panic!("unexpected error: {e}"),
                };
                assert_eq!(direct, via_linking, "candidate disagrees");
            }
        }
    }

    #[test]
    fn isu_on_matrix_units() {
        let t = tol();
        let tro = full_rect(2, 2, &t);
        let v = e(2, 2, 0, 1);
        let b = e(2, 2, 1, 1);
        let (data, verdict) = isu_construct(&tro, &v, &b, SConvention::HalfBall, &t).unwrap();
        assert!(verdict.is_yes(), "{verdict:?}");
        assert!(data.a.dist_op(&e(2, 2, 0, 0)) < 1e-10);
        assert!(data.x.dist_op(&e(2, 2, 0, 1)) < 1e-10);
        assert!(data.y.dist_op(&e(2, 2, 1, 0)) < 1e-10);
    }

    #[test]
    fn isu_on_projection_is_identity() {
        let t = tol();
        let tro = full_rect(2, 2, &t);
        let v = e(2, 2, 0, 0);
        let b = e(2, 2, 0, 0).scale_re(0.7);
        let (data, verdict) = isu_construct(&tro, &v, &b, SConvention::HalfBall, &t).unwrap();
        assert!(verdict.is_yes(), "{verdict:?}");
        assert!(data.a.dist_op(&b) < 1e-10);
    }

    #[test]
    fn isu_rejects_support_mismatch() {
        let t = tol();
        let tro = full_rect(2, 2, &t);
        let v = e(2, 2, 0, 1);
        // b supported on the whole space, not on v*v = e22
        let b = CMatrix::identity(2).scale_re(0.5);
        let err = isu_construct(&tro, &v, &b, SConvention::HalfBall, &t).unwrap_err();
        assert!(matches!(err, OatError::Precondition(_)));
    }

    #[test]
    fn isu_on_random_rectangular_tro() {
        let t = tol();
        let tro = full_rect(2, 3, &t);
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for trial in 0..4 {
            // Random rank-2 partial isometry and a compatible b.
            let g = ginibre(2, 3, &mut rng);
            let v = g.polar(1e-8).r;
            let p = &v.adjoint() * &v;
            let h = ginibre(3, 3, &mut rng);
            let herm = &(&h + &h.adjoint()).scale_re(0.05);
            let pert = &(&p * herm) * &p;
            let b = &p.scale_re(0.5) + &pert;
            let (data, verdict) = isu_construct(&tro, &v, &b, SConvention::HalfBall, &t).unwrap();
            assert!(verdict.is_yes(), "trial {trial}: {verdict:?}");
            assert!(verdict.witness_scalar("xy_defect").unwrap() < 1e-8);
            assert!(verdict.witness_scalar("yx_defect").unwrap() < 1e-8);
            // norm and rank transport
            assert!((data.a.opnorm() - b.opnorm()).abs() < 1e-9);
            assert_eq!(data.a.rank(t.rank_eps), b.rank(t.rank_eps));
        }
    }

    #[test]
    fn sep_on_full_tro() {
        let t = tol();
        let tro = full_rect(2, 3, &t);
        let verdict = sep_decompose(&tro, &tro.z.clone(), SConvention::HalfBall, &t, 3).unwrap();
        assert!(verdict.is_yes(), "{verdict:?}");
        assert!(verdict.witness_matrix("a").unwrap().dist_op(&CMatrix::identity(2)) < 1e-9);
        assert!(verdict.witness_matrix("b").unwrap().dist_op(&CMatrix::identity(3)) < 1e-9);
    }

    #[test]
    fn sep_on_span_e12() {
        let t = tol();
        let tro = full_rect(2, 2, &t);
        let d = MatSubspace::span(2, 2, &[e(2, 2, 0, 1)], &t).unwrap();
        let verdict = sep_decompose(&tro, &d, SConvention::HalfBall, &t, 3).unwrap();
        assert!(verdict.is_yes(), "{verdict:?}");
        assert!(verdict.witness_matrix("a").unwrap().dist_op(&e(2, 2, 0, 0)) < 1e-9);
        assert!(verdict.witness_matrix("b").unwrap().dist_op(&e(2, 2, 1, 1)) < 1e-9);
        let u = verdict.witness_matrix("u").expect("C* structure should be found");
        assert!((u.at(0, 1).norm() - 1.0).abs() < 1e-9);
        assert!(verdict
            .notes
            .iter()
            .any(|n| n.contains("certified in the linking algebra")));
    }

    #[test]
    fn sep_on_random_corner_ideal() {
        let t = tol();
        let tro = full_rect(2, 3, &t);
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for trial in 0..3 {
            let g = ginibre(2, 1, &mut rng);
            let r = g.range_projector(1e-10);
            let h = ginibre(3, 2, &mut rng);
            let s = h.range_projector(1e-10);
            let d = tro.z.map_space(|zm| &(&r * zm) * &s, &t).unwrap();
            assert_eq!(d.dim(), 2);
            let verdict = sep_decompose(&tro, &d, SConvention::HalfBall, &t, 5).unwrap();
            assert!(verdict.is_yes(), "trial {trial}: {verdict:?}");
            assert!(verdict.witness_matrix("a").unwrap().dist_op(&r) < 1e-8);
            assert!(verdict.witness_matrix("b").unwrap().dist_op(&s) < 1e-8);
            let azb = tro
                .z
                .map_space(
                    |zm| {
                        let a = verdict.witness_matrix("a").unwrap();
                        let b = verdict.witness_matrix("b").unwrap();
                        &(a * zm) * b
                    },
                    &t,
                )
                .unwrap();
            assert!(azb.equal(&d, &t));
        }
    }

    #[test]
    fn sep_rejects_non_ideal() {
        let t = tol();
        let tro = full_rect(2, 2, &t);
        let d = MatSubspace::span(2, 2, &[&e(2, 2, 0, 0) + &e(2, 2, 1, 1)], &t).unwrap();
        let err = sep_decompose(&tro, &d, SConvention::HalfBall, &t, 3).unwrap_err();
        assert!(matches!(err, OatError::Precondition(_)));
    }

    #[test]
    fn tro_json_round_trip() {
        let t = tol();
        let tro = full_rect(2, 3, &t);
        let json = tro.to_json();
        let text = serde_json::to_string(&json).unwrap();
        let parsed: TroJson = serde_json::from_str(&text).unwrap();
        let back = TroSpace::from_json(&parsed, &t).unwrap();
        assert!(back.z.equal(&tro.z, &t));
        assert!(back.linking.equal(&tro.linking, &t));
    }

    #[test]
    fn random_unitary_conjugated_tro_keeps_structure() {
        // A TRO that is not spanned by matrix units: conjugate the full
        // rectangular space cut by projections on both sides.
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let raw = CMatrix::from_fn(3, 3, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let u = raw.polar(1e-8).r;
        let raw2 = CMatrix::from_fn(4, 4, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let w = raw2.polar(1e-8).r;
        let p = {
            let d = CMatrix::from_fn(3, 3, |i, j| {
                if i == j && i < 2 { ONE } else { C64::new(0.0, 0.0) }
            });
            &(&u * &d) * &u.adjoint()
        };
        let q = {
            let d = CMatrix::from_fn(4, 4, |i, j| {
                if i == j && i < 2 { ONE } else { C64::new(0.0, 0.0) }
            });
            &(&w * &d) * &w.adjoint()
        };
        let mut gens = Vec::new();
        for _ in 0..6 {
            let g = ginibre(3, 4, &mut rng);
            gens.push(&(&p * &g) * &q);
        }
        let tro = make_tro(&gens, &t).unwrap();
        assert_eq!(tro.z.dim(), 4);
        assert_eq!(tro.left_algebra.dim(), 4);
        assert_eq!(tro.right_algebra.dim(), 4);
        // A corner tripotent passes, and matches the linking route.
        let g = ginibre(3, 4, &mut rng);
        let v = (&(&p * &g) * &q).polar(1e-8).r;
        let verdict = tro_pz_verify(&tro, &v, &t).unwrap();
        assert!(verdict.is_yes(), "{verdict:?}");
    }
}
