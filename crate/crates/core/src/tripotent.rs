//! Tripotents, Peirce calculus, hat projections, the tripotent order and
//! joins, *-openness, and projection equivalence relative to a subalgebra
//! (verification and decision).
//!
//! A tripotent is a matrix with u u* u = u, i.e. a partial isometry. Its
//! Peirce 2-space inside an algebra A carries a product x u* y and an
//! involution u x* u that make it a unital *-algebra with unit u; left
//! multiplication by u* transports that structure onto an ordinary matrix
//! subalgebra, which is how everything here is computed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{self, OperatorAlgebra, SConvention};
use crate::cmatrix::{C64, CMatrix};
use crate::error::{OatError, Result};
use crate::subspace::MatSubspace;
use crate::tol::Tolerance;
use crate::verdict::Verdict;

/// A validated tripotent with its two support projections.
#[derive(Debug, Clone)]
pub struct Tripotent {
    v: CMatrix,
    /// v* v, the initial (right) support.
    p: CMatrix,
    /// v v*, the final (left) support.
    q: CMatrix,
}

impl Tripotent {
    pub fn new(v: CMatrix, tol: &Tolerance) -> Result<Self> {
        if !is_tripotent(&v, tol) {
            return Err(OatError::precondition("matrix is not a tripotent"));
        }
        let p = &v.adjoint() * &v;
        let q = &v * &v.adjoint();
        Ok(Tripotent { v, p, q })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.v
    }

    pub fn initial(&self) -> &CMatrix {
        &self.p
    }

    pub fn r#final(&self) -> &CMatrix {
        &self.q
    }

    pub fn adjoint(&self) -> Tripotent {
        Tripotent {
            v: self.v.adjoint(),
            p: self.q.clone(),
            q: self.p.clone(),
        }
    }
}

pub fn is_tripotent(v: &CMatrix, tol: &Tolerance) -> bool {
    let vvv = &(v * &v.adjoint()) * v;
    vvv.dist_op(v) <= tol.eq_eps * (1.0 + v.opnorm())
}

/// The range tripotent r(x): the partial isometry of the polar
/// decomposition, satisfying x = r(x) |x| = |x*| r(x) and rank r = rank x.
pub fn range_tripotent(x: &CMatrix, tol: &Tolerance) -> Result<Tripotent> {
    let polar = x.polar(tol.rank_eps);
    Tripotent::new(polar.r, tol)
}

/// The hat of a tripotent u (m by n): the (m+n)-square matrix
/// (1/2) [[uu*, u], [u*, u*u]], an orthogonal projection exactly when u is
/// a tripotent.
pub fn hat(u: &Tripotent) -> CMatrix {
    let v = u.matrix();
    CMatrix::from_blocks(u.r#final(), v, &v.adjoint(), u.initial())
        .expect("block shapes agree by construction")
        .scale_re(0.5)
}

/// Raw hat for possibly non-tripotent input (used to test the iff).
pub fn hat_raw(v: &CMatrix) -> CMatrix {
    CMatrix::from_blocks(&(v * &v.adjoint()), v, &v.adjoint(), &(&v.adjoint() * v))
        .expect("block shapes agree by construction")
        .scale_re(0.5)
}

/// The tripotent order u <= w, tested as u w* u = u and cross-checked
/// against the equivalent forms u = w u* u and u = u u* w; the three must
/// agree, and when they hold the support projections must be dominated as
/// well. Any disagreement is an internal inconsistency.
pub fn tripotent_leq(u: &Tripotent, w: &Tripotent, tol: &Tolerance) -> Result<bool> {
    if u.matrix().shape() != w.matrix().shape() {
        return Err(OatError::dim("tripotents must have equal shapes"));
    }
    let (um, wm) = (u.matrix(), w.matrix());
    let eps = tol.eq_eps * (1.0 + um.opnorm());
    let primary = (&(um * &wm.adjoint()) * um).dist_op(um) <= eps;
    let alt1 = (&(wm * &um.adjoint()) * um).dist_op(um) <= eps;
    let alt2 = (&(um * &um.adjoint()) * wm).dist_op(um) <= eps;
    if primary != alt1 || primary != alt2 {
        return Err(OatError::internal(format!(
            "order forms disagree: uw*u={primary}, wu*u={alt1}, uu*w={alt2}"
        )));
    }
    if primary {
        let pd = projection_leq(u.initial(), w.initial(), tol);
        let qd = projection_leq(u.r#final(), w.r#final(), tol);
        if !pd || !qd {
            return Err(OatError::internal(
                "order holds but support projections are not dominated",
            ));
        }
    }
    Ok(primary)
}

/// p <= q for orthogonal projections: p q = p.
pub fn projection_leq(p: &CMatrix, q: &CMatrix, tol: &Tolerance) -> bool {
    (p * q).dist_op(p) <= tol.eq_eps * (1.0 + 1.0)
}

/// Is u a *-open tripotent of A? Two characterizations are evaluated and
/// must agree: (a) u lies in its own Peirce space of A, u* is in A, and
/// A_u u* lands in A; (b) u is a tripotent lying in the diagonal
/// Delta(A) = A meet A*. Disagreement is an internal error.
pub fn is_star_open(algebra: &OperatorAlgebra, u: &Tripotent, tol: &Tolerance) -> Result<Verdict> {
    let n = algebra.ambient();
    let um = u.matrix();
    if um.shape() != (n, n) {
        return Err(OatError::dim("tripotent does not match the algebra ambient"));
    }
    let space = peirce_space(algebra, u, tol)?;
    let in_a = algebra.contains(um, tol);
    let in_peirce = in_a && space.contains(um, tol);
    let adj_in_a = algebra.contains(&um.adjoint(), tol);
    let mut products_ok = true;
    for b in space.basis() {
        if !algebra.contains(&(b * &um.adjoint()), tol) {
            products_ok = false;
            break;
        }
    }
    let direct = in_peirce && adj_in_a && products_ok;
    let diagonal = algebra.diagonal().contains(um, tol);
    if direct != diagonal {
        return Err(OatError::internal(format!(
            "*-openness characterizations disagree: peirce-route {direct}, diagonal-route {diagonal}"
        )));
    }
    let mut v = if direct { Verdict::yes() } else { Verdict::no() };
    if !direct {
        if !in_a {
            v = v.note("u is not in A");
        } else if !in_peirce {
            v = v.note("u is not in its own Peirce space");
        }
        if !adj_in_a {
            v = v.note("u* is not in A");
        }
        if !products_ok {
            v = v.note("A_u u* is not contained in A");
        }
    }
    Ok(v.with_scalar("peirce_dim", space.dim() as f64))
}

/// The Peirce 2-space {a in A : uu* a u*u = a}, as a subspace.
pub fn peirce_space(
    algebra: &OperatorAlgebra,
    u: &Tripotent,
    tol: &Tolerance,
) -> Result<MatSubspace> {
    let q = u.r#final().clone();
    let p = u.initial().clone();
    algebra.space().fixed_points(|a| &(&q * a) * &p, tol)
}

/// The Peirce 2-space of a *-open tripotent, as a unital *-algebra under
/// the Peirce product and involution.
#[derive(Debug, Clone)]
pub struct PeirceAlgebra {
    u: Tripotent,
    space: MatSubspace,
    convention: SConvention,
}

/// Build the Peirce algebra of u in A; errors unless u is *-open there.
pub fn peirce(algebra: &OperatorAlgebra, u: &Tripotent, tol: &Tolerance) -> Result<PeirceAlgebra> {
    let open = is_star_open(algebra, u, tol)?;
    if !open.is_yes() {
        return Err(OatError::precondition("u is not *-open in A"));
    }
    let space = peirce_space(algebra, u, tol)?;
    // Closure under the Peirce product is a theorem; verify it anyway.
    for x in space.basis() {
        for y in space.basis() {
            let prod = &(x * &u.matrix().adjoint()) * y;
            if !space.contains(&prod, tol) {
                return Err(OatError::internal(
                    "Peirce space is not closed under its product",
                ));
            }
        }
    }
    Ok(PeirceAlgebra {
        u: u.clone(),
        space,
        convention: algebra.convention(),
    })
}

impl PeirceAlgebra {
    pub fn unit(&self) -> &Tripotent {
        &self.u
    }

    pub fn space(&self) -> &MatSubspace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn convention(&self) -> SConvention {
        self.convention
    }

    /// Peirce product x u* y.
    pub fn product(&self, x: &CMatrix, y: &CMatrix) -> CMatrix {
        &(x * &self.u.matrix().adjoint()) * y
    }

    /// Peirce involution u x* u.
    pub fn involution(&self, x: &CMatrix) -> CMatrix {
        &(self.u.matrix() * &x.adjoint()) * self.u.matrix()
    }

    /// Transport z -> u* z, an isometric *-isomorphism onto an ordinary
    /// matrix subalgebra carrying the same structure.
    pub fn transport(&self, x: &CMatrix) -> CMatrix {
        &self.u.matrix().adjoint() * x
    }

    /// Inverse transport z -> u z.
    pub fn untransport(&self, z: &CMatrix) -> CMatrix {
        self.u.matrix() * z
    }

    /// The transported algebra u* A_u with ordinary operations; its unit is
    /// the projection u* u.
    pub fn transported(&self, tol: &Tolerance) -> Result<OperatorAlgebra> {
        let basis: Vec<CMatrix> = self
            .space
            .basis()
            .iter()
            .map(|b| self.transport(b))
            .collect();
        let n = self.u.matrix().rows();
        let space = MatSubspace::span(n, n, &basis, tol)?;
        OperatorAlgebra::from_space(n, space, self.convention, tol)
    }

    /// Membership in the distinguished set of the Peirce algebra, with u
    /// playing the role of the unit.
    pub fn in_s(&self, a: &CMatrix, tol: &Tolerance) -> bool {
        if !self.space.contains(a, tol) {
            return false;
        }
        peirce_s_norms_ok(self.u.matrix(), a, self.convention, tol.eq_eps)
    }

    /// A random element of the distinguished set, of the form (u - c)/2
    /// with c in the space and ||c|| <= rho < 1.
    pub fn random_s_element(&self, rho: f64, rng: &mut ChaCha8Rng) -> CMatrix {
        let d = self.space.dim();
        let mut c = CMatrix::zeros(self.u.matrix().rows(), self.u.matrix().cols());
        for b in self.space.basis().iter().take(d) {
            let coeff = C64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0);
            c = &c + &b.scale(coeff);
        }
        let norm = c.opnorm();
        if norm > 1e-12 {
            c = c.scale_re(rho / norm);
        }
        (self.u.matrix() - &c).scale_re(0.5)
    }
}

/// Norm test for S-membership relative to a tripotent unit.
pub fn peirce_s_norms_ok(unit: &CMatrix, a: &CMatrix, convention: SConvention, eps: f64) -> bool {
    match convention {
        SConvention::HalfBall => (unit - &a.scale_re(2.0)).opnorm() <= 1.0 + eps,
        SConvention::Shifted => a.opnorm() <= 1.0 + eps && (unit - a).opnorm() <= 1.0 + eps,
    }
}

/// All four equivalent forms of Peirce-order between *-open tripotents:
/// (i) the tripotent order, (ii) A_u sits inside A_w as a hereditary
/// subalgebra with matching products, (iii) the distinguished sets include
/// (exact subspace inclusion plus sampling), (iv) hat(u) <= hat(w). The
/// clauses are provably equivalent, so any split vote is an internal error.
pub fn peirce_order_check(
    algebra: &OperatorAlgebra,
    u: &Tripotent,
    w: &Tripotent,
    tol: &Tolerance,
    seed: u64,
) -> Result<Verdict> {
    for (name, t) in [("u", u), ("w", w)] {
        if !is_star_open(algebra, t, tol)?.is_yes() {
            return Err(OatError::precondition(format!("{name} is not *-open in A")));
        }
    }
    let clause_order = tripotent_leq(u, w, tol)?;

    let pu = peirce(algebra, u, tol)?;
    let pw = peirce(algebra, w, tol)?;
    let inclusion = pw.space().contains_subspace(pu.space(), tol);
    let mut clause_hsa = inclusion;
    if inclusion {
        // Products must agree on A_u, and A_u must be hereditary in A_w;
        // both are checked in the transported picture of w.
        for x in pu.space().basis() {
            for y in pu.space().basis() {
                if pu.product(x, y).dist_op(&pw.product(x, y)) > tol.eq_eps * 10.0 {
                    clause_hsa = false;
                }
            }
        }
        if clause_hsa {
            let ambient_w = pw.transported(tol)?;
            let inner: Vec<CMatrix> = pu
                .space()
                .basis()
                .iter()
                .map(|b| pw.transport(b))
                .collect();
            let n = algebra.ambient();
            let inner_space = MatSubspace::span(n, n, &inner, tol)?;
            clause_hsa = algebra::hsa_check(&ambient_w, &inner_space, tol)?.is_yes();
        }
    }

    let mut clause_s = inclusion;
    if clause_s {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..32 {
            let a = pu.random_s_element(0.9, &mut rng);
            if !pu.in_s(&a, tol) {
                return Err(OatError::internal("sampled element escaped its own S-set"));
            }
            if !pw.in_s(&a, tol) {
                clause_s = false;
                break;
            }
        }
    }

    let hu = hat(u);
    let hw = hat(w);
    let clause_hat = projection_leq(&hu, &hw, tol);

    let votes = [clause_order, clause_hsa, clause_s, clause_hat];
    if votes.iter().any(|&v| v != clause_order) {
        return Err(OatError::internal(format!(
            "equivalent order clauses split: order={clause_order}, hsa={clause_hsa}, s-set={clause_s}, hat={clause_hat}"
        )));
    }
    let v = if clause_order {
        Verdict::yes()
    } else {
        Verdict::no()
    };
    Ok(v
        .with_scalar("order", clause_order as u8 as f64)
        .with_scalar("hereditary", clause_hsa as u8 as f64)
        .with_scalar("s_inclusion", clause_s as u8 as f64)
        .with_scalar("hat_order", clause_hat as u8 as f64))
}

/// Join of two tripotents under a common dominating tripotent: computed as
/// the projection join of the hats, read back from the upper off-diagonal
/// block. The read-back is verified to be a tripotent dominating both
/// inputs; failure means no common dominating tripotent existed.
pub fn tripotent_join(u: &Tripotent, w: &Tripotent, tol: &Tolerance) -> Result<Tripotent> {
    if u.matrix().shape() != w.matrix().shape() {
        return Err(OatError::dim("tripotents must have equal shapes"));
    }
    let (m, n) = u.matrix().shape();
    let hu = hat(u);
    let hw = hat(w);
    // Join of projections: projector onto the sum of ranges.
    let stacked = CMatrix::from_fn(m + n, 2 * (m + n), |i, j| {
        if j < m + n {
            hu.at(i, j)
        } else {
            hw.at(i, j - (m + n))
        }
    });
    let join = stacked.range_projector(tol.rank_eps);
    let candidate = join.block(0, m, m, n).scale_re(2.0);
    let t = Tripotent::new(candidate, tol).map_err(|_| {
        OatError::precondition(
            "hat-join block is not a tripotent; the inputs have no common dominating tripotent",
        )
    })?;
    for (name, low) in [("u", u), ("w", w)] {
        if !tripotent_leq(low, &t, tol)? {
            return Err(OatError::precondition(format!(
                "join does not dominate {name}; the inputs have no common dominating tripotent"
            )));
        }
    }
    Ok(t)
}

/// Sharpened Peirce-space equality criterion: A_u = A_w as sets iff the
/// supports match, u*u = w*w and uu* = ww*. Both routes are computed and
/// compared; they are provably equivalent so disagreement is internal.
pub fn peirce_space_equality(
    algebra: &OperatorAlgebra,
    u: &Tripotent,
    w: &Tripotent,
    tol: &Tolerance,
) -> Result<Verdict> {
    let su = peirce_space(algebra, u, tol)?;
    let sw = peirce_space(algebra, w, tol)?;
    let spaces_equal = su.equal(&sw, tol);
    let supports_equal = u.initial().dist_op(w.initial()) <= tol.eq_eps * 2.0
        && u.r#final().dist_op(w.r#final()) <= tol.eq_eps * 2.0;
    if spaces_equal != supports_equal {
        return Err(OatError::internal(format!(
            "space equality ({spaces_equal}) and support equality ({supports_equal}) disagree"
        )));
    }
    Ok(if spaces_equal {
        Verdict::yes()
    } else {
        Verdict::no()
    })
}

/// Verify that v realizes the equivalence of open projections p and q
/// relative to A: v*v = p, vv* = q, v (pAp) lies in A, v* (qAq) lies in A,
/// and v is *-open. The q-side containment is implied by the p-side ones;
/// if the implication fails numerically that is an internal error.
pub fn pz_verify(
    algebra: &OperatorAlgebra,
    p: &CMatrix,
    q: &CMatrix,
    v: &CMatrix,
    tol: &Tolerance,
) -> Result<Verdict> {
    let n = algebra.ambient();
    for (name, m) in [("p", p), ("q", q), ("v", v)] {
        if m.shape() != (n, n) {
            return Err(OatError::dim(format!("{name} does not match the ambient")));
        }
    }
    for (name, m) in [("p", p), ("q", q)] {
        if !is_projection(m, tol) || !algebra.contains(m, tol) {
            return Err(OatError::precondition(format!(
                "{name} is not a projection in A"
            )));
        }
    }
    let eps = tol.verify_eps();
    let supports_ok =
        (&v.adjoint() * v).dist_op(p) <= eps && (v * &v.adjoint()).dist_op(q) <= eps;

    let corner_p = algebra.space().map_space(|b| &(p * b) * p, tol)?;
    let corner_q = algebra.space().map_space(|b| &(q * b) * q, tol)?;
    let mut p_side = true;
    for b in corner_p.basis() {
        if !algebra.contains(&(v * b), tol) {
            p_side = false;
            break;
        }
    }
    let mut q_side = true;
    for b in corner_q.basis() {
        if !algebra.contains(&(&v.adjoint() * b), tol) {
            q_side = false;
            break;
        }
    }
    let open = match Tripotent::new(v.clone(), tol) {
        Ok(t) => is_star_open(algebra, &t, tol)?.is_yes(),
        Err(_) => false,
    };
    if supports_ok && p_side && open && !q_side {
        return Err(OatError::internal(
            "p-side containments hold but the implied q-side containment fails",
        ));
    }
    let ok = supports_ok && p_side && q_side && open;
    let mut verdict = if ok { Verdict::yes() } else { Verdict::no() };
    if !supports_ok {
        verdict = verdict.note("v*v, vv* do not match p, q");
    }
    if !p_side {
        verdict = verdict.note("v (pAp) is not contained in A");
    }
    if !q_side {
        verdict = verdict.note("v* (qAq) is not contained in A");
    }
    if !open {
        verdict = verdict.note("v is not a *-open tripotent of A");
    }
    Ok(verdict)
}

pub fn is_projection(p: &CMatrix, tol: &Tolerance) -> bool {
    p.is_square()
        && p.is_hermitian(tol.eq_eps)
        && (p * p).dist_op(p) <= tol.eq_eps * (1.0 + p.opnorm())
}

/// Decide equivalence of open projections p, q relative to A.
///
/// Reduction: p ~ q iff rank(z p) = rank(z q) for every minimal central
/// projection z of Delta(A). On yes, a witness partial isometry is
/// built blockwise as the algebra-internal polar factor of z q w p for
/// random w in Delta(A), and must pass pz_verify.
pub fn pz_decide(
    algebra: &OperatorAlgebra,
    p: &CMatrix,
    q: &CMatrix,
    tol: &Tolerance,
    seed: u64,
) -> Result<Verdict> {
    let n = algebra.ambient();
    for (name, m) in [("p", p), ("q", q)] {
        if m.shape() != (n, n) {
            return Err(OatError::dim(format!("{name} does not match the ambient")));
        }
        if !is_projection(m, tol) {
            return Err(OatError::precondition(format!("{name} is not a projection")));
        }
        if !algebra.diagonal().contains(m, tol) {
            return Err(OatError::precondition(format!(
                "{name} is not open: it is outside the diagonal of A"
            )));
        }
    }
    let decomposition = algebra::wedderburn(algebra.diagonal(), tol, seed)?;
    let ranks_p = decomposition.block_ranks(p, tol);
    let ranks_q = decomposition.block_ranks(q, tol);
    if ranks_p != ranks_q {
        let mut v = Verdict::no().note("central block ranks differ");
        for (i, (rp, rq)) in ranks_p.iter().zip(&ranks_q).enumerate() {
            v = v.note(format!("block {i}: rank(z p) = {rp}, rank(z q) = {rq}"));
        }
        return Ok(v);
    }
    // Equal ranks: construct a witness inside Delta(A), blockwise.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let diag = algebra.diagonal();
    let mut witness = CMatrix::zeros(n, n);
    for (i, block) in decomposition.blocks.iter().enumerate() {
        let target_rank = ranks_p[i];
        if target_rank == 0 {
            continue;
        }
        let mut found = false;
        for _ in 0..40 {
            let w = random_element(diag, &mut rng);
            let x = &(&(&block.z * q) * &w) * p;
            let vi = algebra_polar_factor(&x, tol);
            let ok_rank = vi.rank(tol.rank_eps) == target_rank;
            if ok_rank
                && (&vi.adjoint() * &vi).dist_op(&(&(&block.z * p) * &block.z)) <= 1e-7
                && (&vi * &vi.adjoint()).dist_op(&(&(&block.z * q) * &block.z)) <= 1e-7
            {
                witness = &witness + &vi;
                found = true;
                break;
            }
        }
        if !found {
            return Err(OatError::Budget(format!(
                "failed to draw a full-rank witness in central block {i}"
            )));
        }
    }
    let check = pz_verify(algebra, p, q, &witness, tol)?;
    if !check.is_yes() {
        return Err(OatError::internal(
            "constructed witness failed re-verification",
        ));
    }
    Ok(Verdict::yes()
        .with_matrix("v", witness)
        .notes_from(&check))
}

/// Polar partial-isometry factor computed inside the C*-algebra generated
/// by x: x (x*x)^{-1/2 on the support}. Stays in any *-subalgebra
/// containing x since it is a limit of polynomials in x, x*.
pub fn algebra_polar_factor(x: &CMatrix, tol: &Tolerance) -> CMatrix {
    let gram = &x.adjoint() * x;
    let cut = tol.rank_eps * (1.0 + gram.opnorm());
    let inv_root = gram.herm_fn(|l| if l > cut { 1.0 / l.sqrt() } else { 0.0 });
    x * &inv_root
}

/// A random complex-coefficient combination of the basis of a subspace.
pub fn random_element(space: &MatSubspace, rng: &mut ChaCha8Rng) -> CMatrix {
    let (r, c) = space.ambient_shape();
    let mut acc = CMatrix::zeros(r, c);
    for b in space.basis() {
        let coeff = C64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0);
        acc = &acc + &b.scale(coeff);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::OperatorAlgebra;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn m2(entries: &[f64; 4]) -> CMatrix {
        CMatrix::from_real_rows(2, 2, entries).unwrap()
    }

    fn e(i: usize, j: usize, n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |r, c| {
            if (r, c) == (i, j) {
                crate::cmatrix::ONE
            } else {
                crate::cmatrix::ZERO
            }
        })
    }

    fn full_m2(t: &Tolerance) -> OperatorAlgebra {
        OperatorAlgebra::make_algebra(
            2,
            &[e(0, 0, 2), e(0, 1, 2), e(1, 0, 2), e(1, 1, 2)],
            SConvention::HalfBall,
            t,
        )
        .unwrap()
    }

    fn upper_t2(t: &Tolerance) -> OperatorAlgebra {
        OperatorAlgebra::make_algebra(
            2,
            &[e(0, 0, 2), e(0, 1, 2), e(1, 1, 2)],
            SConvention::HalfBall,
            t,
        )
        .unwrap()
    }

    #[test]
    fn tripotent_detection() {
        let t = tol();
        assert!(is_tripotent(&e(0, 1, 2), &t));
        assert!(is_tripotent(&e(0, 0, 2), &t));
        assert!(is_tripotent(&CMatrix::zeros(2, 2), &t));
        assert!(!is_tripotent(&e(0, 0, 2).scale_re(0.5), &t));
    }

    #[test]
    fn hat_is_projection_iff_tripotent() {
        let t = tol();
        let h = hat_raw(&e(0, 1, 2));
        assert!(is_projection(&h, &t));
        assert_eq!(h.rank(1e-9), 1);
        let bad = hat_raw(&e(0, 0, 2).scale_re(0.5));
        assert!(!is_projection(&bad, &t));
        // u = I gives (1/2) of the all-ones 2x2 block pattern
        let hid = hat_raw(&CMatrix::identity(2));
        assert!(is_projection(&hid, &t));
        assert_eq!(hid.rank(1e-9), 2);
    }

    #[test]
    fn order_examples() {
        let t = tol();
        let e11 = Tripotent::new(e(0, 0, 2), &t).unwrap();
        let id = Tripotent::new(CMatrix::identity(2), &t).unwrap();
        let e12 = Tripotent::new(e(0, 1, 2), &t).unwrap();
        let e21 = Tripotent::new(e(1, 0, 2), &t).unwrap();
        assert!(tripotent_leq(&e11, &id, &t).unwrap());
        assert!(tripotent_leq(&e12, &e12, &t).unwrap());
        assert!(!tripotent_leq(&e12, &e21, &t).unwrap());
        assert!(!tripotent_leq(&e12, &id, &t).unwrap());
    }

    #[test]
    fn star_openness_in_triangular_and_full() {
        let t = tol();
        let t2 = upper_t2(&t);
        let m2a = full_m2(&t);
        let e11 = Tripotent::new(e(0, 0, 2), &t).unwrap();
        let e12 = Tripotent::new(e(0, 1, 2), &t).unwrap();
        assert!(is_star_open(&t2, &e11, &t).unwrap().is_yes());
        assert!(is_star_open(&t2, &e12, &t).unwrap().is_no());
        assert!(is_star_open(&m2a, &e12, &t).unwrap().is_yes());
    }

    #[test]
    fn adjoint_of_star_open_is_star_open() {
        let t = tol();
        let m2a = full_m2(&t);
        let e12 = Tripotent::new(e(0, 1, 2), &t).unwrap();
        assert!(is_star_open(&m2a, &e12.adjoint(), &t).unwrap().is_yes());
    }

    #[test]
    fn peirce_of_partial_isometry_in_m2() {
        let t = tol();
        let m2a = full_m2(&t);
        let e12t = Tripotent::new(e(0, 1, 2), &t).unwrap();
        let pa = peirce(&m2a, &e12t, &t).unwrap();
        assert_eq!(pa.dim(), 1);
        // E12 is the unit: E12 . E12 = E12 E21 E12 = E12
        let prod = pa.product(&e(0, 1, 2), &e(0, 1, 2));
        assert!(prod.dist_op(&e(0, 1, 2)) < 1e-12);
        // involution fixes the unit
        assert!(pa.involution(&e(0, 1, 2)).dist_op(&e(0, 1, 2)) < 1e-12);
        // transported algebra is span{E22} with unit E22
        let amb = pa.transported(&t).unwrap();
        assert_eq!(amb.space().dim(), 1);
        assert!(amb.space().contains(&e(1, 1, 2), &t));
    }

    #[test]
    fn peirce_of_identity_is_whole_algebra() {
        let t = tol();
        let m2a = full_m2(&t);
        let idt = Tripotent::new(CMatrix::identity(2), &t).unwrap();
        let pa = peirce(&m2a, &idt, &t).unwrap();
        assert_eq!(pa.dim(), 4);
        let x = m2(&[0.3, 0.1, -0.2, 0.7]);
        let y = m2(&[0.5, -0.4, 0.9, 0.2]);
        assert!(pa.product(&x, &y).dist_op(&(&x * &y)) < 1e-12);
        assert!(pa.involution(&x).dist_op(&x.adjoint()) < 1e-12);
    }

    #[test]
    fn order_clauses_agree_in_m2() {
        let t = tol();
        let m2a = full_m2(&t);
        let e11 = Tripotent::new(e(0, 0, 2), &t).unwrap();
        let id = Tripotent::new(CMatrix::identity(2), &t).unwrap();
        let v = peirce_order_check(&m2a, &e11, &id, &t, 11).unwrap();
        assert!(v.is_yes());
        let refl = peirce_order_check(&m2a, &e11, &e11, &t, 11).unwrap();
        assert!(refl.is_yes());
        let e22 = Tripotent::new(e(1, 1, 2), &t).unwrap();
        let no = peirce_order_check(&m2a, &e11, &e22, &t, 11).unwrap();
        assert!(no.is_no());
    }

    #[test]
    fn join_of_orthogonal_projections_is_identity() {
        let t = tol();
        let e11 = Tripotent::new(e(0, 0, 2), &t).unwrap();
        let e22 = Tripotent::new(e(1, 1, 2), &t).unwrap();
        let j = tripotent_join(&e11, &e22, &t).unwrap();
        assert!(j.matrix().dist_op(&CMatrix::identity(2)) < 1e-9);
        // idempotent join
        let jj = tripotent_join(&e11, &e11, &t).unwrap();
        assert!(jj.matrix().dist_op(e11.matrix()) < 1e-9);
    }

    #[test]
    fn join_of_swap_pair_is_symmetric_unitary() {
        let t = tol();
        let e12 = Tripotent::new(e(0, 1, 2), &t).unwrap();
        let e21 = Tripotent::new(e(1, 0, 2), &t).unwrap();
        let j = tripotent_join(&e12, &e21, &t).unwrap();
        let swap = &e(0, 1, 2) + &e(1, 0, 2);
        assert!(j.matrix().dist_op(&swap) < 1e-9);
    }

    #[test]
    fn join_without_common_dominator_errors() {
        let t = tol();
        // u and -u admit no common dominating tripotent: domination would
        // force the same compression to be both u and -u.
        let u = Tripotent::new(e(0, 0, 2), &t).unwrap();
        let neg = Tripotent::new(e(0, 0, 2).scale_re(-1.0), &t).unwrap();
        assert!(matches!(
            tripotent_join(&u, &neg, &t),
            Err(OatError::Precondition(_))
        ));
    }

    #[test]
    fn space_equality_criterion() {
        let t = tol();
        let m2a = full_m2(&t);
        let e12 = Tripotent::new(e(0, 1, 2), &t).unwrap();
        // -E12 has the same supports, hence the same Peirce space
        let neg = Tripotent::new(e(0, 1, 2).scale_re(-1.0), &t).unwrap();
        let v = peirce_space_equality(&m2a, &e12, &neg, &t).unwrap();
        assert!(v.is_yes());
        let e11 = Tripotent::new(e(0, 0, 2), &t).unwrap();
        let w = peirce_space_equality(&m2a, &e12, &e11, &t).unwrap();
        assert!(w.is_no());
    }

    #[test]
    fn pz_examples_triangular_vs_full() {
        let t = tol();
        let t2 = upper_t2(&t);
        let m2a = full_m2(&t);
        let p = e(0, 0, 2);
        let q = e(1, 1, 2);
        let v = e(1, 0, 2);
        assert!(pz_verify(&m2a, &p, &q, &v, &t).unwrap().is_yes());
        assert!(pz_verify(&t2, &p, &q, &v, &t).unwrap().is_no());
        assert!(pz_verify(&m2a, &p, &p, &p, &t).unwrap().is_yes());

        let d_full = pz_decide(&m2a, &p, &q, &t, 5).unwrap();
        assert!(d_full.is_yes());
        let w = d_full.witness_matrix("v").unwrap();
        assert!(pz_verify(&m2a, &p, &q, w, &t).unwrap().is_yes());

        let d_tri = pz_decide(&t2, &p, &q, &t, 5).unwrap();
        assert!(d_tri.is_no());
    }

    #[test]
    fn pz_is_reflexive_and_symmetric_on_block_algebra() {
        let t = tol();
        // A = M2 + scalars on a third coordinate: Delta has two blocks
        let gens = [
            e(0, 0, 3),
            e(0, 1, 3),
            e(1, 0, 3),
            e(1, 1, 3),
            e(2, 2, 3),
        ];
        let a = OperatorAlgebra::make_algebra(3, &gens, SConvention::HalfBall, &t).unwrap();
        let p = e(0, 0, 3);
        let q = e(1, 1, 3);
        let r = e(2, 2, 3);
        assert!(pz_decide(&a, &p, &p, &t, 3).unwrap().is_yes());
        assert!(pz_decide(&a, &p, &q, &t, 3).unwrap().is_yes());
        assert!(pz_decide(&a, &q, &p, &t, 3).unwrap().is_yes());
        // p and r live in different central blocks
        assert!(pz_decide(&a, &p, &r, &t, 3).unwrap().is_no());
    }
}
