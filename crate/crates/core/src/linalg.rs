//! Exact-shape complex 2×2 matrix algebra.
//!
//! Everything downstream (transport, flows, conjugation) works with 2×2
//! complex matrices, so the representation is a fixed array rather than a
//! general dense type: no shape checks, no allocation, closed-form
//! eigenstructure. General p×p eigenproblems are out of scope.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

/// Default tolerance for rank/degeneracy decisions on exact or synthetic
/// matrices. Matrices produced by numerical transport carry larger errors;
/// classification of those should pass a looser tolerance explicitly.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Eigenvalue gaps in `(tol, NEAR_DEFECTIVE_FACTOR·tol]` are flagged: the
/// eigenvector matrix is returned but is numerically untrustworthy.
pub const NEAR_DEFECTIVE_FACTOR: f64 = 100.0;

/// A 2×2 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMatrix2 {
    pub e: [[Complex64; 2]; 2],
}

impl CMatrix2 {
    pub fn new(e: [[Complex64; 2]; 2]) -> Self {
        Self { e }
    }

    /// Constructor for untrusted input: rejects NaN/Inf entries.
    pub fn checked(e: [[Complex64; 2]; 2]) -> Result<Self> {
        let m = Self { e };
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::NonFiniteMatrix)
        }
    }

    pub fn zero() -> Self {
        Self::new([[Complex64::new(0.0, 0.0); 2]; 2])
    }

    pub fn identity() -> Self {
        Self::diag(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn diag(a: Complex64, d: Complex64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self::new([[a, z], [z, d]])
    }

    pub fn is_finite(&self) -> bool {
        self.e
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn trace(&self) -> Complex64 {
        self.e[0][0] + self.e[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.e[0][0] * self.e[1][1] - self.e[0][1] * self.e[1][0]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.e
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut r = *self;
        for row in r.e.iter_mut() {
            for z in row.iter_mut() {
                *z *= c;
            }
        }
        r
    }

    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        // Relative threshold: |det| against the squared entry scale.
        let scale = self.norm();
        let tol = f64::EPSILON * scale * scale;
        if d.norm() <= tol {
            return Err(Error::SingularMatrix { det: d.norm(), tol });
        }
        let inv_d = Complex64::new(1.0, 0.0) / d;
        Ok(Self::new([
            [self.e[1][1] * inv_d, -self.e[0][1] * inv_d],
            [-self.e[1][0] * inv_d, self.e[0][0] * inv_d],
        ]))
    }

    /// Matrix exponential in closed form.
    ///
    /// With μ = tr/2 and N = A − μI (traceless), Cayley–Hamilton gives
    /// N² = q²·I for q² = μ² − det A, so
    /// `exp(A) = e^μ (cosh(q)·I + sinh(q)/q · N)`.
    /// The `sinh(q)/q` factor is evaluated by series for small |q|, which also
    /// covers the defective case q = 0 exactly.
    pub fn expm(&self) -> Self {
        let mu = self.trace() * 0.5;
        let n = *self - Self::diag(mu, mu);
        let q2 = mu * mu - self.det();
        let q = q2.sqrt();
        let (cosh_q, sinhc_q) = if q.norm() < 1e-4 {
            // cosh q = 1 + q²/2 + q⁴/24, sinh(q)/q = 1 + q²/6 + q⁴/120
            let one = Complex64::new(1.0, 0.0);
            (
                one + q2 * 0.5 + q2 * q2 / 24.0,
                one + q2 / 6.0 + q2 * q2 / 120.0,
            )
        } else {
            (q.cosh(), q.sinh() / q)
        };
        let em = mu.exp();
        (Self::diag(cosh_q, cosh_q) + n.scale(sinhc_q)).scale(em)
    }
}

impl Index<(usize, usize)> for CMatrix2 {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.e[r][c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix2 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.e[r][c]
    }
}

impl Add for CMatrix2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut r = self;
        for i in 0..2 {
            for j in 0..2 {
                r.e[i][j] += o.e[i][j];
            }
        }
        r
    }
}

impl Sub for CMatrix2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut r = self;
        for i in 0..2 {
            for j in 0..2 {
                r.e[i][j] -= o.e[i][j];
            }
        }
        r
    }
}

impl Neg for CMatrix2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for CMatrix2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut r = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                r.e[i][j] = self.e[i][0] * o.e[0][j] + self.e[i][1] * o.e[1][j];
            }
        }
        r
    }
}

/// `[a, b] = ab − ba`. Traceless by construction.
pub fn commutator(a: &CMatrix2, b: &CMatrix2) -> CMatrix2 {
    *a * *b - *b * *a
}

/// Eigenstructure classification, in decision order.
///
/// `Scalar` ⊂ the defective locus, so it is tested first: a scalar matrix is
/// diagonal with equal eigenvalues, not a Jordan block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MatrixKind {
    Scalar,
    JordanBlock,
    Diagonalizable,
}

/// Eigenvalues, eigenvectors (diagonalizable case only) and the kind tag.
#[derive(Clone, Copy, Debug)]
pub struct Eigensystem2 {
    pub eigenvalues: [Complex64; 2],
    /// Columns are unit eigenvectors matching `eigenvalues` order; `None`
    /// unless `kind == Diagonalizable`.
    pub eigenvectors: Option<CMatrix2>,
    pub kind: MatrixKind,
    /// Set when the eigenvalue gap lies within a factor
    /// [`NEAR_DEFECTIVE_FACTOR`] of the classification tolerance: the
    /// eigenvector matrix is close to singular.
    pub condition_warning: bool,
}

/// Closed-form eigendecomposition of a 2×2 complex matrix.
///
/// Classification order: Scalar (‖A − (trA/2)I‖ ≤ tol), then Jordan block
/// (|tr² − 4 det| ≤ tol²), then diagonalizable. Eigenvectors of λ₁ are read
/// off the columns of (A − λ₂I), which annihilates the λ₂ direction; the
/// larger column is kept for stability.
pub fn eig2(a: &CMatrix2, tol: f64) -> Eigensystem2 {
    let mu = a.trace() * 0.5;
    let nilpotent_part = *a - CMatrix2::diag(mu, mu);
    if nilpotent_part.norm() <= tol {
        return Eigensystem2 {
            eigenvalues: [mu, mu],
            eigenvectors: None,
            kind: MatrixKind::Scalar,
            condition_warning: false,
        };
    }

    let disc = a.trace() * a.trace() - a.det() * 4.0;
    if disc.norm() <= tol * tol {
        return Eigensystem2 {
            eigenvalues: [mu, mu],
            eigenvectors: None,
            kind: MatrixKind::JordanBlock,
            condition_warning: false,
        };
    }

    let q = (mu * mu - a.det()).sqrt();
    let l1 = mu + q;
    let l2 = mu - q;
    let v1 = eigenvector_from_shift(a, l2);
    let v2 = eigenvector_from_shift(a, l1);
    let gap = (l1 - l2).norm();
    Eigensystem2 {
        eigenvalues: [l1, l2],
        eigenvectors: Some(CMatrix2::new([[v1[0], v2[0]], [v1[1], v2[1]]])),
        kind: MatrixKind::Diagonalizable,
        condition_warning: gap <= NEAR_DEFECTIVE_FACTOR * tol,
    }
}

/// Unit eigenvector for the eigenvalue *other than* `shift`: both columns of
/// (A − shift·I) lie in that eigendirection.
fn eigenvector_from_shift(a: &CMatrix2, shift: Complex64) -> [Complex64; 2] {
    let m = *a - CMatrix2::diag(shift, shift);
    let c0 = [m.e[0][0], m.e[1][0]];
    let c1 = [m.e[0][1], m.e[1][1]];
    let n0 = c0[0].norm_sqr() + c0[1].norm_sqr();
    let n1 = c1[0].norm_sqr() + c1[1].norm_sqr();
    let (c, n) = if n0 >= n1 { (c0, n0) } else { (c1, n1) };
    let inv = 1.0 / n.sqrt();
    [c[0] * inv, c[1] * inv]
}

/// Basis V with `A = V·J·V⁻¹`, J the Jordan block [[λ,1],[0,λ]].
///
/// Only meaningful when `A` is (numerically) a true Jordan block; the caller
/// decides that via [`eig2`]. Columns are balanced so ‖v₁‖·‖v₂‖ ≈ 1.
pub fn jordan_frame(a: &CMatrix2, lambda: Complex64) -> Result<CMatrix2> {
    let n = *a - CMatrix2::diag(lambda, lambda);
    let c0 = (n.e[0][0].norm_sqr() + n.e[1][0].norm_sqr()).sqrt();
    let c1 = (n.e[0][1].norm_sqr() + n.e[1][1].norm_sqr()).sqrt();
    let (w, nw_norm) = if c0 >= c1 {
        ([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], c0)
    } else {
        ([Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], c1)
    };
    if nw_norm == 0.0 {
        // A is scalar: no Jordan frame exists.
        return Err(Error::SingularMatrix { det: 0.0, tol: 0.0 });
    }
    let s = Complex64::new(1.0 / nw_norm.sqrt(), 0.0);
    let w = [w[0] * s, w[1] * s];
    let v1 = [
        n.e[0][0] * w[0] + n.e[0][1] * w[1],
        n.e[1][0] * w[0] + n.e[1][1] * w[1],
    ];
    Ok(CMatrix2::new([[v1[0], w[0]], [v1[1], w[1]]]))
}

/// A branch of the complex logarithm: sheet index `k` plus a reference ray.
///
/// `log t = ln|t| + i·(arg t + 2πk)` where `arg t` is taken in the window
/// `(ref_arg − π, ref_arg + π]`, i.e. the cut is opposite the reference ray.
/// Sampling along a ray of angle θ₀ with `ref_arg = θ₀` keeps the argument
/// continuous across the whole ladder.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogBranch {
    pub k: i32,
    pub ref_arg: f64,
}

impl LogBranch {
    pub fn principal() -> Self {
        Self { k: 0, ref_arg: 0.0 }
    }

    pub fn for_ray(theta0: f64) -> Self {
        Self {
            k: 0,
            ref_arg: theta0,
        }
    }

    pub fn log(&self, t: Complex64) -> Result<Complex64> {
        if t.norm() == 0.0 {
            return Err(Error::ZeroBase);
        }
        let raw = t.arg();
        let mut delta = raw - self.ref_arg;
        // Wrap into (−π, π].
        delta -= TAU * (delta / TAU).round();
        if delta <= -PI {
            delta += TAU;
        }
        let arg = self.ref_arg + delta + TAU * self.k as f64;
        Ok(Complex64::new(t.norm().ln(), arg))
    }
}

impl Default for LogBranch {
    fn default() -> Self {
        Self::principal()
    }
}

/// `t^A = exp(A·log t)` on the given branch, by eigenstructure:
/// scalar `λI ↦ t^λ I`; Jordan `λI+N ↦ t^λ (I + N·log t)`;
/// diagonalizable `V diag(t^λ1, t^λ2) V⁻¹`.
pub fn mat_power(a: &CMatrix2, t: Complex64, branch: &LogBranch) -> Result<CMatrix2> {
    let log_t = branch.log(t)?;
    let es = eig2(a, DEGENERACY_TOL);
    match es.kind {
        MatrixKind::Scalar => {
            let p = (es.eigenvalues[0] * log_t).exp();
            Ok(CMatrix2::diag(p, p))
        }
        MatrixKind::JordanBlock => {
            let lam = es.eigenvalues[0];
            let n = *a - CMatrix2::diag(lam, lam);
            let p = (lam * log_t).exp();
            Ok((CMatrix2::identity() + n.scale(log_t)).scale(p))
        }
        MatrixKind::Diagonalizable => {
            let v = es
                .eigenvectors
                .expect("diagonalizable carries eigenvectors");
            let v_inv = v.inverse()?;
            let d = CMatrix2::diag(
                (es.eigenvalues[0] * log_t).exp(),
                (es.eigenvalues[1] * log_t).exp(),
            );
            Ok(v * d * v_inv)
        }
    }
}

/// Classify a product of monodromy generators (or any 2×2 matrix that should
/// be invertible): rejects singular input, then returns the [`eig2`] kind.
pub fn classify_product(m: &CMatrix2, tol: f64) -> Result<MatrixKind> {
    if m.det().norm() <= tol {
        return Err(Error::SingularMatrix {
            det: m.det().norm(),
            tol,
        });
    }
    Ok(eig2(m, tol).kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn m(a: f64, b: f64, cc: f64, d: f64) -> CMatrix2 {
        CMatrix2::new([[c(a, 0.0), c(b, 0.0)], [c(cc, 0.0), c(d, 0.0)]])
    }

    #[test]
    fn commutator_of_elementary_matrices() {
        // [E12, E21] = diag(1, −1), hand value.
        let e12 = m(0.0, 1.0, 0.0, 0.0);
        let e21 = m(0.0, 0.0, 1.0, 0.0);
        let k = commutator(&e12, &e21);
        assert_eq!(k, CMatrix2::diag(c(1.0, 0.0), c(-1.0, 0.0)));
    }

    #[test]
    fn inverse_roundtrip_and_singular_rejection() {
        let a = CMatrix2::new([[c(1.0, 0.5), c(-0.3, 0.2)], [c(0.7, -0.1), c(0.4, 0.9)]]);
        let ai = a.inverse().unwrap();
        assert!((a * ai - CMatrix2::identity()).norm() < 1e-14);
        let rank1 = m(1.0, 2.0, 2.0, 4.0);
        assert!(matches!(rank1.inverse(), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn eig_classification_order_scalar_before_jordan() {
        let s = CMatrix2::diag(c(2.0, -1.0), c(2.0, -1.0));
        assert_eq!(eig2(&s, 1e-8).kind, MatrixKind::Scalar);

        let j = CMatrix2::new([[c(2.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(2.0, 0.0)]]);
        let es = eig2(&j, 1e-8);
        assert_eq!(es.kind, MatrixKind::JordanBlock);
        assert!((es.eigenvalues[0] - c(2.0, 0.0)).norm() < 1e-14);

        let d = m(1.0, 2.0, 3.0, 4.0);
        assert_eq!(eig2(&d, 1e-8).kind, MatrixKind::Diagonalizable);
    }

    #[test]
    fn eig_reconstruction_diagonalizable() {
        let a = CMatrix2::new([[c(1.0, 0.3), c(2.0, -0.4)], [c(0.5, 1.0), c(-1.0, 0.2)]]);
        let es = eig2(&a, 1e-8);
        let v = es.eigenvectors.unwrap();
        let d = CMatrix2::diag(es.eigenvalues[0], es.eigenvalues[1]);
        let back = v * d * v.inverse().unwrap();
        assert!((back - a).norm() < 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn eig_near_defective_flags_condition() {
        // Eigenvalue gap 1e-7 with tol 1e-8: diagonalizable but flagged.
        let a = CMatrix2::new([
            [c(1.0, 0.0), c(1.0, 0.0)],
            [c(0.0, 0.0), c(1.0 + 1e-7, 0.0)],
        ]);
        let es = eig2(&a, 1e-8);
        assert_eq!(es.kind, MatrixKind::Diagonalizable);
        assert!(es.condition_warning);
    }

    #[test]
    fn expm_against_series() {
        // Taylor series with 30 terms as an independent oracle.
        let a = CMatrix2::new([[c(0.3, 0.2), c(-0.5, 0.1)], [c(0.4, -0.3), c(-0.2, 0.6)]]);
        let mut term = CMatrix2::identity();
        let mut sum = CMatrix2::identity();
        for k in 1..30 {
            term = term * a.scale(c(1.0 / k as f64, 0.0));
            sum = sum + term;
        }
        assert!((a.expm() - sum).norm() < 1e-13);
    }

    #[test]
    fn expm_jordan_block() {
        // exp([[λ,1],[0,λ]]) = e^λ [[1,1],[0,1]] exactly.
        let lam = c(0.4, -0.7);
        let j = CMatrix2::new([[lam, c(1.0, 0.0)], [c(0.0, 0.0), lam]]);
        let e = j.expm();
        let el = lam.exp();
        let expect = CMatrix2::new([[el, el], [c(0.0, 0.0), el]]);
        assert!((e - expect).norm() < 1e-13);
    }

    #[test]
    fn log_branch_windows_and_sheets() {
        let b = LogBranch::principal();
        let l = b.log(c(0.0, 2.0)).unwrap(); // 2i: ln 2 + iπ/2
        assert!((l - c(2.0_f64.ln(), PI / 2.0)).norm() < 1e-15);

        // Sheet k = 1 adds 2πi.
        let b1 = LogBranch { k: 1, ref_arg: 0.0 };
        let l1 = b1.log(c(0.0, 2.0)).unwrap();
        assert!((l1 - (l + c(0.0, TAU))).norm() < 1e-15);

        // Reference ray near π keeps points just past the principal cut continuous:
        // arg(−1 − 0.01i) is ≈ −π principal, ≈ +π on the ray-π window.
        let bp = LogBranch::for_ray(PI);
        let lp = bp.log(c(-1.0, -0.01)).unwrap();
        assert!(lp.im > 3.0);

        assert!(matches!(b.log(c(0.0, 0.0)), Err(Error::ZeroBase)));
    }

    #[test]
    fn mat_power_derivative_matches_finite_differences() {
        // d/dt t^A = (A/t)·t^A, checked by central differences at t = 1.7 − 0.4i.
        let a = CMatrix2::new([[c(0.3, 0.1), c(0.2, -0.2)], [c(-0.1, 0.4), c(0.5, 0.0)]]);
        let t = c(1.7, -0.4);
        let h = 1e-6;
        let br = LogBranch::principal();
        let fp = mat_power(&a, t + c(h, 0.0), &br).unwrap();
        let fm = mat_power(&a, t - c(h, 0.0), &br).unwrap();
        let fd = (fp - fm).scale(c(1.0 / (2.0 * h), 0.0));
        let analytic = a.scale(c(1.0, 0.0) / t) * mat_power(&a, t, &br).unwrap();
        assert!((fd - analytic).norm() < 1e-8);
    }

    #[test]
    fn mat_power_jordan_has_log_term() {
        let j = CMatrix2::new([[c(0.5, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.5, 0.0)]]);
        let t = c(0.01, 0.0);
        let p = mat_power(&j, t, &LogBranch::principal()).unwrap();
        // t^J = t^0.5 [[1, ln t],[0, 1]]
        let tl = c(0.1, 0.0);
        assert!((p.e[0][0] - tl).norm() < 1e-14);
        assert!((p.e[0][1] - tl * t.ln()).norm() < 1e-13);
        assert!(p.e[1][0].norm() < 1e-16);
    }

    #[test]
    fn mat_power_zero_base_rejected() {
        let a = m(1.0, 0.0, 0.0, 2.0);
        assert!(matches!(
            mat_power(&a, c(0.0, 0.0), &LogBranch::principal()),
            Err(Error::ZeroBase)
        ));
    }

    #[test]
    fn jordan_frame_reconstructs() {
        let lam = c(-0.3, 0.8);
        // A = V0 J V0⁻¹ for a haphazard V0.
        let v0 = CMatrix2::new([[c(1.0, 0.2), c(0.3, -0.5)], [c(-0.7, 0.1), c(0.9, 0.4)]]);
        let j = CMatrix2::new([[lam, c(1.0, 0.0)], [c(0.0, 0.0), lam]]);
        let a = v0 * j * v0.inverse().unwrap();
        let v = jordan_frame(&a, lam).unwrap();
        let back = v * j * v.inverse().unwrap();
        assert!((back - a).norm() < 1e-12);
    }

    #[test]
    fn classify_product_rejects_singular() {
        let rank1 = m(1.0, 2.0, 2.0, 4.0);
        assert!(matches!(
            classify_product(&rank1, 1e-8),
            Err(Error::SingularMatrix { .. })
        ));
        let rot = CMatrix2::new([[c(0.0, 1.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, -1.0)]]);
        assert_eq!(
            classify_product(&rot, 1e-8).unwrap(),
            MatrixKind::Diagonalizable
        );
    }

    proptest! {
        #[test]
        fn commutator_is_traceless(
            ar in -2.0..2.0f64, ai in -2.0..2.0f64, br in -2.0..2.0f64, bi in -2.0..2.0f64,
            cr in -2.0..2.0f64, ci in -2.0..2.0f64, dr in -2.0..2.0f64, di in -2.0..2.0f64,
            er in -2.0..2.0f64, ei in -2.0..2.0f64, fr in -2.0..2.0f64, fi in -2.0..2.0f64,
            gr in -2.0..2.0f64, gi in -2.0..2.0f64, hr in -2.0..2.0f64, hi in -2.0..2.0f64,
        ) {
            let a = CMatrix2::new([[c(ar, ai), c(br, bi)], [c(cr, ci), c(dr, di)]]);
            let b = CMatrix2::new([[c(er, ei), c(fr, fi)], [c(gr, gi), c(hr, hi)]]);
            let k = commutator(&a, &b);
            prop_assert!(k.trace().norm() <= 1e-12 * (a.norm() * b.norm()).max(1.0));
        }

        #[test]
        fn mat_power_is_multiplicative_on_shared_branch(
            ar in -0.8..0.8f64, ai in -0.8..0.8f64, br in -0.8..0.8f64, bi in -0.8..0.8f64,
            cr in -0.8..0.8f64, ci in -0.8..0.8f64, dr in -0.8..0.8f64, di in -0.8..0.8f64,
            r1 in 0.3..2.0f64, th1 in -1.2..1.2f64,
            r2 in 0.3..2.0f64, th2 in -1.2..1.2f64,
        ) {
            // Args of t1, t2 in (−1.2, 1.2) keep arg t1 + arg t2 inside (−π, π],
            // so principal logs add and t1^A·t2^A = (t1 t2)^A.
            let a = CMatrix2::new([[c(ar, ai), c(br, bi)], [c(cr, ci), c(dr, di)]]);
            let t1 = Complex64::from_polar(r1, th1);
            let t2 = Complex64::from_polar(r2, th2);
            let br_ = LogBranch::principal();
            let lhs = mat_power(&a, t1, &br_).unwrap() * mat_power(&a, t2, &br_).unwrap();
            let rhs = mat_power(&a, t1 * t2, &br_).unwrap();
            let scale = lhs.norm().max(1.0);
            prop_assert!((lhs - rhs).norm() <= 1e-9 * scale);
        }

        #[test]
        fn eig_reconstruction_property(
            ar in -2.0..2.0f64, ai in -2.0..2.0f64, br in -2.0..2.0f64, bi in -2.0..2.0f64,
            cr in -2.0..2.0f64, ci in -2.0..2.0f64, dr in -2.0..2.0f64, di in -2.0..2.0f64,
        ) {
            let a = CMatrix2::new([[c(ar, ai), c(br, bi)], [c(cr, ci), c(dr, di)]]);
            let es = eig2(&a, 1e-8);
            if es.kind == MatrixKind::Diagonalizable && !es.condition_warning {
                let v = es.eigenvectors.unwrap();
                let d = CMatrix2::diag(es.eigenvalues[0], es.eigenvalues[1]);
                let back = v * d * v.inverse().unwrap();
                // Modest bound: the eigenbasis may still be mildly skew.
                let gap = (es.eigenvalues[0] - es.eigenvalues[1]).norm();
                let cond_like = (a.norm() / gap).max(1.0);
                prop_assert!((back - a).norm() <= 1e-11 * cond_like * a.norm().max(1.0));
            }
        }
    }
}
