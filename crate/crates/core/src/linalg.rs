//! Small dense linear algebra: the per-mode generators are 3x3 (6x6 for the
//! coupled split systems), so everything here is stack-allocated and direct.
//!
//! Matrix exponentials are computed by eigendecomposition (the blocks have
//! three distinct eigenvalues away from buckling thresholds) with a
//! scaling-and-squaring fallback whenever the characteristic discriminant is
//! small relative to the eigenvalue scale (near-defective block).

use num_complex::Complex;

use crate::scalar::{cast, Scalar};

type C<T> = Complex<T>;

/// Dense square matrix with compile-time dimension, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMat<T, const N: usize> {
    pub a: [[T; N]; N],
}

pub type Mat3<T> = SmallMat<T, 3>;
pub(crate) type Mat6<T> = SmallMat<T, 6>;

impl<T: Scalar, const N: usize> SmallMat<T, N> {
    pub fn zero() -> Self {
        Self {
            a: [[T::zero(); N]; N],
        }
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            m.a[i][i] = T::one();
        }
        m
    }

    pub fn scale(&self, c: T) -> Self {
        let mut out = *self;
        for row in out.a.iter_mut() {
            for x in row.iter_mut() {
                *x = *x * c;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..N {
            for j in 0..N {
                out.a[i][j] = out.a[i][j] + other.a[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..N {
            for j in 0..N {
                out.a[i][j] = out.a[i][j] - other.a[i][j];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for i in 0..N {
            for k in 0..N {
                let aik = self.a[i][k];
                for j in 0..N {
                    out.a[i][j] = out.a[i][j] + aik * other.a[k][j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T; N]) -> [T; N] {
        let mut out = [T::zero(); N];
        for i in 0..N {
            let mut acc = T::zero();
            for j in 0..N {
                acc = acc + self.a[i][j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Maximum absolute column sum (operator 1-norm).
    pub fn norm_one(&self) -> T {
        let mut best = T::zero();
        for j in 0..N {
            let mut s = T::zero();
            for i in 0..N {
                s = s + self.a[i][j].abs();
            }
            if s > best {
                best = s;
            }
        }
        best
    }
}

/// Roots of the monic cubic x^3 + a x^2 + b x + c with real coefficients.
///
/// Real roots come out with exactly zero imaginary part; complex roots as an
/// exact conjugate pair. The second return value is the discriminant of the
/// cubic relative to the root scale (zero means a repeated root).
pub(crate) fn cubic_roots<T: Scalar>(a: T, b: T, c: T) -> ([C<T>; 3], T) {
    let third = T::one() / cast::<T>(3.0);
    let q = (a * a - cast::<T>(3.0) * b) / cast::<T>(9.0);
    let r = (cast::<T>(2.0) * a * a * a - cast::<T>(9.0) * a * b + cast::<T>(27.0) * c)
        / cast::<T>(54.0);
    let r2 = r * r;
    let q3 = q * q * q;
    let shift = a * third;

    let roots = if r2 < q3 {
        // three real roots
        let theta = (r / q3.sqrt()).acos();
        let m = -cast::<T>(2.0) * q.sqrt();
        let two_pi = cast::<T>(2.0) * T::PI();
        let x0 = m * (theta * third).cos() - shift;
        let x1 = m * ((theta + two_pi) * third).cos() - shift;
        let x2 = m * ((theta - two_pi) * third).cos() - shift;
        [
            C::new(x0, T::zero()),
            C::new(x1, T::zero()),
            C::new(x2, T::zero()),
        ]
    } else {
        let big = -(r.abs() + (r2 - q3).sqrt()).cbrt() * r.signum();
        let small = if big == T::zero() { T::zero() } else { q / big };
        let x0 = big + small - shift;
        let re = -(big + small) / cast::<T>(2.0) - shift;
        let im = cast::<T>(0.75).sqrt() * (big - small);
        [
            C::new(x0, T::zero()),
            C::new(re, im),
            C::new(re, -im),
        ]
    };

    // discriminant = prod_{i<j} |x_i - x_j|^2, normalised by the root scale
    let scale = roots
        .iter()
        .map(|z| z.norm())
        .fold(T::zero(), |m, x| if x > m { x } else { m })
        .max(T::min_positive_value());
    let mut disc = T::one();
    for i in 0..3 {
        for j in (i + 1)..3 {
            let d = roots[i] - roots[j];
            disc = disc * (d.norm_sqr() / (scale * scale));
        }
    }
    (roots, disc)
}

/// Eigendecomposition of a real 3x3 matrix with distinct eigenvalues.
/// Used where eigenvectors themselves are needed; the propagator path works
/// with interpolation polynomials instead.
pub(crate) struct Eig3<T: Scalar> {
    pub vals: [C<T>; 3],
    /// Eigenvector matrix, columns normalised to unit length.
    pub vecs: [[C<T>; 3]; 3],
}

fn cross3<T: Scalar>(u: &[C<T>; 3], v: &[C<T>; 3]) -> [C<T>; 3] {
    [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ]
}

fn cnorm_sqr3<T: Scalar>(v: &[C<T>; 3]) -> T {
    v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()
}

pub(crate) fn cmat_inv3<T: Scalar>(m: &[[C<T>; 3]; 3]) -> Option<[[C<T>; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = (0..3)
        .map(|j| (0..3).map(|i| m[i][j].norm()).fold(T::zero(), |a, b| a + b))
        .fold(T::one(), |p, s| p * s);
    if !det.norm().is_finite() || det.norm() <= cast::<T>(1e-12) * scale {
        return None;
    }
    let inv_det = det.inv();
    let mut adj = [[C::new(T::zero(), T::zero()); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let r0 = (i + 1) % 3;
            let r1 = (i + 2) % 3;
            let c0 = (j + 1) % 3;
            let c1 = (j + 2) % 3;
            // adjugate: transpose of the cofactor matrix
            adj[j][i] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) * inv_det;
        }
    }
    Some(adj)
}

pub(crate) fn cmat_vec3<T: Scalar>(m: &[[C<T>; 3]; 3], v: &[C<T>; 3]) -> [C<T>; 3] {
    let mut out = [C::new(T::zero(), T::zero()); 3];
    for i in 0..3 {
        out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
    }
    out
}

/// Relative-discriminant threshold below which a block counts as
/// near-defective and the scaling-and-squaring fallback is used.
const DEFECT_TOL: f64 = 1e-8;

/// Eigenvalues of a 3x3 matrix when the spectrum is well separated.
pub(crate) fn spectrum3<T: Scalar>(m: &Mat3<T>) -> Option<[C<T>; 3]> {
    let a = m.a;
    let tr = a[0][0] + a[1][1] + a[2][2];
    let minors = a[1][1] * a[2][2] - a[1][2] * a[2][1] + a[0][0] * a[2][2]
        - a[0][2] * a[2][0]
        + a[0][0] * a[1][1]
        - a[0][1] * a[1][0];
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let (vals, disc) = cubic_roots(-tr, minors, -det);
    if !disc.is_finite() || disc < cast::<T>(DEFECT_TOL) {
        return None;
    }
    Some(vals)
}

/// Diagonal powers-of-two balancing: returns (d, B) with B = D m D^{-1} and
/// D = diag(d). Power-of-two factors keep the similarity exact in floating
/// point; the balanced matrix has comparable row and column norms, which is
/// what the polynomial evaluation of matrix functions needs.
pub(crate) fn balance3<T: Scalar>(m: &Mat3<T>) -> ([T; 3], Mat3<T>) {
    let mut b = *m;
    let mut d = [T::one(); 3];
    let two = cast::<T>(2.0);
    for _ in 0..8 {
        let mut converged = true;
        for i in 0..3 {
            let mut c = T::zero();
            let mut r = T::zero();
            for j in 0..3 {
                if j != i {
                    c = c + b.a[j][i].abs();
                    r = r + b.a[i][j].abs();
                }
            }
            if c == T::zero() || r == T::zero() || !c.is_finite() || !r.is_finite() {
                continue;
            }
            let k = ((r / c).log2() * cast::<T>(0.5)).round();
            let k_i = k.to_i32().unwrap_or(0).clamp(-120, 120);
            if k_i == 0 {
                continue;
            }
            let f = two.powi(k_i);
            for j in 0..3 {
                b.a[i][j] = b.a[i][j] / f;
                b.a[j][i] = b.a[j][i] * f;
            }
            d[i] = d[i] / f;
            converged = false;
        }
        if converged {
            break;
        }
    }
    (d, b)
}

/// B = D m D^{-1} for a given diagonal (shared balancing across a matrix
/// pair that differs in a single entry).
pub(crate) fn balance3_with<T: Scalar>(m: &Mat3<T>, d: &[T; 3]) -> Mat3<T> {
    let mut b = *m;
    for i in 0..3 {
        for j in 0..3 {
            b.a[i][j] = d[i] * m.a[i][j] / d[j];
        }
    }
    b
}

/// f(M) = D^{-1} f(B) D entrywise.
fn unbalance3<T: Scalar>(x: &Mat3<T>, d: &[T; 3]) -> Mat3<T> {
    let mut out = *x;
    for i in 0..3 {
        for j in 0..3 {
            out.a[i][j] = x.a[i][j] * d[j] / d[i];
        }
    }
    out
}

/// Coefficients (a2, a1, a0) of the quadratic interpolating f on a
/// conjugate-closed spectrum: f(M) = a2 M^2 + a1 M + a0 I. Real by the
/// conjugate symmetry of the nodes and values.
fn interp_quadratic<T: Scalar>(vals: &[C<T>; 3], f_vals: &[C<T>; 3]) -> (T, T, T) {
    let zero = C::new(T::zero(), T::zero());
    let mut a2 = zero;
    let mut a1 = zero;
    let mut a0 = zero;
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        let denom = (vals[i] - vals[j]) * (vals[i] - vals[k]);
        let w = f_vals[i] / denom;
        a2 = a2 + w;
        a1 = a1 - w * (vals[j] + vals[k]);
        a0 = a0 + w * vals[j] * vals[k];
    }
    (a2.re, a1.re, a0.re)
}

fn poly2<T: Scalar>(m: &Mat3<T>, m2: &Mat3<T>, c: (T, T, T)) -> Mat3<T> {
    let mut out = Mat3::zero();
    for i in 0..3 {
        for j in 0..3 {
            let mut v = m2.a[i][j] * c.0 + m.a[i][j] * c.1;
            if i == j {
                v = v + c.2;
            }
            out.a[i][j] = v;
        }
    }
    out
}

/// phi_1 from a cached exponential value, consistent with it.
fn phi1_from_exp<T: Scalar>(z: C<T>, ez: C<T>) -> C<T> {
    if z.norm() < cast::<T>(1e-3) {
        phi1_scalar(z)
    } else {
        (ez - T::one()) / z
    }
}

/// Exponentials of a conjugate-closed node triple, sharing the real exp and
/// the sine/cosine across a conjugate pair.
fn exp_nodes<T: Scalar>(vals: &[C<T>; 3]) -> [C<T>; 3] {
    if vals[1].im != T::zero() && vals[2].re == vals[1].re && vals[2].im == -vals[1].im {
        let e0 = C::new(vals[0].re.exp(), T::zero());
        let ex = vals[1].re.exp();
        let (s, c) = (vals[1].im.sin(), vals[1].im.cos());
        [e0, C::new(ex * c, ex * s), C::new(ex * c, -(ex * s))]
    } else {
        [
            C::new(vals[0].re.exp(), T::zero()),
            C::new(vals[1].re.exp(), T::zero()),
            C::new(vals[2].re.exp(), T::zero()),
        ]
    }
}

pub(crate) fn eig3<T: Scalar>(m: &Mat3<T>) -> Option<Eig3<T>> {
    let a = m.a;
    let vals = spectrum3(m)?;

    let zero = C::new(T::zero(), T::zero());
    let mut vecs = [[zero; 3]; 3];
    for (k, lam) in vals.iter().enumerate() {
        let mut rows = [[zero; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rows[i][j] = C::new(a[i][j], T::zero());
            }
            rows[i][i] = rows[i][i] - *lam;
        }
        let cands = [
            cross3(&rows[0], &rows[1]),
            cross3(&rows[0], &rows[2]),
            cross3(&rows[1], &rows[2]),
        ];
        let mut best = cands[0];
        let mut best_n = cnorm_sqr3(&cands[0]);
        for c in &cands[1..] {
            let n = cnorm_sqr3(c);
            if n > best_n {
                best = *c;
                best_n = n;
            }
        }
        let row_scale = rows.iter().map(cnorm_sqr3).fold(T::zero(), |s, x| s + x);
        if best_n <= cast::<T>(1e-24) * row_scale * row_scale {
            return None;
        }
        let inv_len = best_n.sqrt().recip();
        for i in 0..3 {
            vecs[i][k] = best[i] * inv_len;
        }
    }
    Some(Eig3 { vals, vecs })
}

/// phi_1(z) = (e^z - 1)/z, with the series for small |z|.
pub(crate) fn phi1_scalar<T: Scalar>(z: C<T>) -> C<T> {
    if z.norm() < cast::<T>(1e-3) {
        // 1 + z/2 + z^2/6 + z^3/24 + z^4/120; remainder < 1e-17 at |z| = 1e-3
        let c2 = cast::<T>(0.5);
        let c3 = T::one() / cast::<T>(6.0);
        let c4 = T::one() / cast::<T>(24.0);
        let c5 = T::one() / cast::<T>(120.0);
        C::new(T::one(), T::zero()) + z * c2 + z * z * c3 + z * z * z * c4 + z * z * z * z * c5
    } else {
        (z.exp() - T::one()) / z
    }
}

/// (exp(M), phi_1(M)) by Taylor series after scaling, then squaring with the
/// doubling identities  e_{2X} = e_X^2  and  phi1_{2X} = phi1_X (e_X + 1)/2.
pub(crate) fn expm_phi1_taylor<T: Scalar, const N: usize>(
    m: &SmallMat<T, N>,
) -> (SmallMat<T, N>, SmallMat<T, N>) {
    let mut k = 0u32;
    let quarter = cast::<T>(0.25);
    let mut norm = m.norm_one();
    while norm > quarter && k < 64 {
        norm = norm * cast::<T>(0.5);
        k += 1;
    }
    let s = m.scale(T::one() / cast::<T>((1u64 << k) as f64));

    let mut exp = SmallMat::<T, N>::identity();
    let mut phi = SmallMat::<T, N>::identity();
    let mut term = SmallMat::<T, N>::identity();
    let mut phi_term = SmallMat::<T, N>::identity();
    for j in 1..=14 {
        term = term.matmul(&s).scale(T::one() / cast::<T>(j as f64));
        exp = exp.add(&term);
        phi_term = phi_term
            .matmul(&s)
            .scale(T::one() / cast::<T>((j + 1) as f64));
        phi = phi.add(&phi_term);
    }
    let half = cast::<T>(0.5);
    for _ in 0..k {
        let e_plus_i = exp.add(&SmallMat::identity());
        phi = phi.matmul(&e_plus_i).scale(half);
        exp = exp.matmul(&exp);
    }
    (exp, phi)
}

/// (exp(M), phi_1(M)) for a 3x3 block: after balancing, both are evaluated
/// as the quadratic interpolation polynomial of the spectrum when it is well
/// separated, with scaling-and-squaring as the near-defective fallback.
pub fn expm_phi1<T: Scalar>(m: &Mat3<T>) -> (Mat3<T>, Mat3<T>) {
    let (d, b) = balance3(m);
    match spectrum3(&b) {
        Some(vals) => {
            let evs = exp_nodes(&vals);
            let pvs = [
                phi1_from_exp(vals[0], evs[0]),
                phi1_from_exp(vals[1], evs[1]),
                phi1_from_exp(vals[2], evs[2]),
            ];
            let b2 = b.matmul(&b);
            let eb = poly2(&b, &b2, interp_quadratic(&vals, &evs));
            let pb = poly2(&b, &b2, interp_quadratic(&vals, &pvs));
            (unbalance3(&eb, &d), unbalance3(&pb, &d))
        }
        None => {
            let (eb, pb) = expm_phi1_taylor(&b);
            (unbalance3(&eb, &d), unbalance3(&pb, &d))
        }
    }
}

/// One-step propagators for an (L, K) pair sharing a frozen coefficient:
/// K sees the coupling  c_scale * e2 e1^T  applied to the L state.
pub(crate) struct SplitOps<T: Scalar> {
    /// exp(dt G_L)
    pub e_l: Mat3<T>,
    /// exp(dt G_K)
    pub e_k: Mat3<T>,
    /// phi_1(dt G_K), for the constant forcing of the K system
    pub phi1_k: Mat3<T>,
    /// coupling propagator  int_0^dt exp((dt-s) G_K) C exp(s G_L) ds
    pub j: Mat3<T>,
}

/// Divided difference (e^p - e^q)/(p - q) with cached exponentials, switching
/// to the sinh series when p is near q.
fn exp_divided_diff_cached<T: Scalar>(p: C<T>, q: C<T>, ep: C<T>, eq: C<T>) -> C<T> {
    let d = p - q;
    if d.norm() > cast::<T>(0.1) {
        (ep - eq) / d
    } else {
        // e^{(p+q)/2} sinh(d/2)/(d/2) with the sinh series
        let h = d * cast::<T>(0.5);
        let h2 = h * h;
        let c3 = T::one() / cast::<T>(6.0);
        let c5 = T::one() / cast::<T>(120.0);
        let c7 = T::one() / cast::<T>(5040.0);
        let sinch = C::new(T::one(), T::zero()) + h2 * c3 + h2 * h2 * c5 + h2 * h2 * h2 * c7;
        ((p + q) * cast::<T>(0.5)).exp() * sinch
    }
}

pub(crate) fn split_ops<T: Scalar>(
    g_l: &Mat3<T>,
    g_k: &Mat3<T>,
    c_scale: T,
    dt: T,
) -> SplitOps<T> {
    let ml = g_l.scale(dt);
    let mk = g_k.scale(dt);
    // one balancing serves both blocks (they differ in a single entry)
    let (d, bk) = balance3(&mk);
    let bl = balance3_with(&ml, &d);
    let c_bal = c_scale * dt * d[1] / d[0];

    if let (Some(nu), Some(lam)) = (spectrum3(&bk), spectrum3(&bl)) {
        let enu = exp_nodes(&nu);
        let elam = exp_nodes(&lam);
        let pnu = [
            phi1_from_exp(nu[0], enu[0]),
            phi1_from_exp(nu[1], enu[1]),
            phi1_from_exp(nu[2], enu[2]),
        ];
        let bk2 = bk.matmul(&bk);
        let bl2 = bl.matmul(&bl);
        let e_k = poly2(&bk, &bk2, interp_quadratic(&nu, &enu));
        let phi1_k = poly2(&bk, &bk2, interp_quadratic(&nu, &pnu));
        let e_l = poly2(&bl, &bl2, interp_quadratic(&lam, &elam));

        // J = sum_{i,j} psi(nu_i, lam_j) P^K_i C P^L_j with C = c e2 e1^T:
        // columns P^K_i e2 and rows e1^T P^L_j come from the projector
        // polynomials applied to the fixed basis vectors.
        let zero = C::new(T::zero(), T::zero());
        let mut cols = [[zero; 3]; 3]; // cols[i] = P^K_i e2
        let mut rows = [[zero; 3]; 3]; // rows[j] = e1^T P^L_j
        for i in 0..3 {
            let a = (i + 1) % 3;
            let b = (i + 2) % 3;
            let denom = (nu[i] - nu[a]) * (nu[i] - nu[b]);
            let s = nu[a] + nu[b];
            let p = nu[a] * nu[b];
            for r in 0..3 {
                let quad = C::new(bk2.a[r][1], T::zero());
                let lin = C::new(bk.a[r][1], T::zero());
                let idm = if r == 1 { C::new(T::one(), T::zero()) } else { zero };
                cols[i][r] = (quad - lin * s + idm * p) / denom;
            }
        }
        for j in 0..3 {
            let a = (j + 1) % 3;
            let b = (j + 2) % 3;
            let denom = (lam[j] - lam[a]) * (lam[j] - lam[b]);
            let s = lam[a] + lam[b];
            let p = lam[a] * lam[b];
            for r in 0..3 {
                let quad = C::new(bl2.a[0][r], T::zero());
                let lin = C::new(bl.a[0][r], T::zero());
                let idm = if r == 0 { C::new(T::one(), T::zero()) } else { zero };
                rows[j][r] = (quad - lin * s + idm * p) / denom;
            }
        }
        let mut j_bal = Mat3::zero();
        for i in 0..3 {
            // srow = sum_j psi(nu_i, lam_j) rows[j]
            let mut srow = [zero; 3];
            for j in 0..3 {
                let psi = exp_divided_diff_cached(nu[i], lam[j], enu[i], elam[j]);
                for r in 0..3 {
                    srow[r] = srow[r] + psi * rows[j][r];
                }
            }
            for r in 0..3 {
                for cix in 0..3 {
                    j_bal.a[r][cix] = j_bal.a[r][cix] + (cols[i][r] * srow[cix]).re * c_bal;
                }
            }
        }
        SplitOps {
            e_l: unbalance3(&e_l, &d),
            e_k: unbalance3(&e_k, &d),
            phi1_k: unbalance3(&phi1_k, &d),
            j: unbalance3(&j_bal, &d),
        }
    } else {
        // near-defective block: exponentiate the coupled 6x6 system directly
        let mut m6 = Mat6::zero();
        for i in 0..3 {
            for j in 0..3 {
                m6.a[i][j] = bl.a[i][j];
                m6.a[i + 3][j + 3] = bk.a[i][j];
            }
        }
        m6.a[4][0] = c_bal;
        let (e6, p6) = expm_phi1_taylor(&m6);
        let mut e_l = Mat3::zero();
        let mut e_k = Mat3::zero();
        let mut phi1_k = Mat3::zero();
        let mut jmat = Mat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                e_l.a[i][j] = e6.a[i][j];
                e_k.a[i][j] = e6.a[i + 3][j + 3];
                jmat.a[i][j] = e6.a[i + 3][j];
                phi1_k.a[i][j] = p6.a[i + 3][j + 3];
            }
        }
        SplitOps {
            e_l: unbalance3(&e_l, &d),
            e_k: unbalance3(&e_k, &d),
            phi1_k: unbalance3(&phi1_k, &d),
            j: unbalance3(&jmat, &d),
        }
    }
}

/// Least-squares line fit: returns (slope, intercept).
pub fn linear_fit<T: Scalar>(xs: &[T], ys: &[T]) -> (T, T) {
    assert_eq!(xs.len(), ys.len());
    let n = cast::<T>(xs.len() as f64);
    let sx = crate::scalar::csum(xs.iter().copied());
    let sy = crate::scalar::csum(ys.iter().copied());
    let sxx = crate::scalar::csum(xs.iter().map(|&x| x * x));
    let sxy = crate::scalar::csum(xs.iter().zip(ys).map(|(&x, &y)| x * y));
    let denom = n * sxx - sx * sx;
    if denom == T::zero() {
        return (T::zero(), sy / n);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: [[f64; 3]; 3]) -> Mat3<f64> {
        Mat3 { a: rows }
    }

    fn max_abs_diff(a: &Mat3<f64>, b: &Mat3<f64>) -> f64 {
        let mut m = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((a.a[i][j] - b.a[i][j]).abs());
            }
        }
        m
    }

    #[test]
    fn cubic_roots_of_factored_polynomial() {
        // (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
        let (roots, disc) = cubic_roots(-6.0, 11.0, -6.0);
        let mut re: Vec<f64> = roots.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((re[0] - 1.0).abs() < 1e-12);
        assert!((re[1] - 2.0).abs() < 1e-12);
        assert!((re[2] - 3.0).abs() < 1e-12);
        assert!(disc > 1e-3);
    }

    #[test]
    fn cubic_roots_complex_pair_of_coupling_polynomial() {
        // x^3 - x^2 + 2x - 1: one real root near 0.5698, pair near 0.2151 +- 1.3071i
        let (roots, _) = cubic_roots::<f64>(-1.0, 2.0, -1.0);
        for z in &roots {
            let p = z * z * z - z * z + z * 2.0 - Complex::new(1.0, 0.0);
            assert!(p.norm() < 1e-12, "characteristic residual {}", p.norm());
        }
        let real = roots.iter().find(|z| z.im == 0.0).unwrap();
        assert!((real.re - 0.569840290998053).abs() < 1e-12);
    }

    #[test]
    fn expm_identity_at_zero() {
        let (e, p) = expm_phi1(&Mat3::<f64>::zero());
        assert!(max_abs_diff(&e, &Mat3::identity()) < 1e-15);
        assert!(max_abs_diff(&p, &Mat3::identity()) < 1e-15);
    }

    #[test]
    fn expm_matches_closed_form_for_diagonalizable_matrix() {
        // M = V D V^{-1} with D = diag(-1, -2, -3); exp(M) = V e^D V^{-1}.
        let v = mat([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]]);
        let vinv = mat([
            [0.5, -0.5, 0.5],
            [0.5, 0.5, -0.5],
            [-0.5, 0.5, 0.5],
        ]);
        let d = mat([[-1.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, -3.0]]);
        let m = v.matmul(&d).matmul(&vinv);
        let ed = mat([
            [(-1.0f64).exp(), 0.0, 0.0],
            [0.0, (-2.0f64).exp(), 0.0],
            [0.0, 0.0, (-3.0f64).exp()],
        ]);
        let expected = v.matmul(&ed).matmul(&vinv);
        let (e, _) = expm_phi1(&m);
        assert!(max_abs_diff(&e, &expected) < 1e-13);
    }

    #[test]
    fn eigen_route_agrees_with_taylor_fallback() {
        // dual-route consistency on a batch of deterministic pseudo-random blocks
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 6.0
        };
        for _ in 0..50 {
            let m = mat([
                [next(), next(), next()],
                [next(), next(), next()],
                [next(), next(), next()],
            ]);
            if eig3(&m).is_none() {
                continue;
            }
            let (e1, p1) = expm_phi1(&m);
            let (e2, p2) = expm_phi1_taylor(&m);
            let scale = 1.0 + e2.norm_one();
            assert!(max_abs_diff(&e1, &e2) / scale < 1e-11);
            assert!(max_abs_diff(&p1, &p2) / scale < 1e-11);
        }
    }

    #[test]
    fn high_mode_block_matches_taylor_route() {
        // stiffest block of a 32-mode truncation at dt = 1e-3: entries span
        // eight orders of magnitude, which is what the balancing is for
        let mu = (32.0f64 * std::f64::consts::PI).powi(2);
        let dt = 1e-3;
        let g = mat([
            [0.0, 1.0, 0.0],
            [-mu * (mu + 5.0), 0.0, mu],
            [0.0, -mu, -mu],
        ]);
        let m = g.scale(dt);
        let (e1, p1) = expm_phi1(&m);
        let (d, b) = balance3(&m);
        let (eb, pb) = expm_phi1_taylor(&b);
        // compare in balanced coordinates where all entries are O(1)
        let (_, e1b) = (0, super::balance3_with(&e1, &d));
        let (_, p1b) = (0, super::balance3_with(&p1, &d));
        assert!(max_abs_diff(&e1b, &eb) < 1e-12, "exp mismatch {}", max_abs_diff(&e1b, &eb));
        assert!(max_abs_diff(&p1b, &pb) < 1e-12, "phi1 mismatch {}", max_abs_diff(&p1b, &pb));
        // the defining identity must hold in the scaled frame as well
        let lhs = e1b.sub(&Mat3::identity());
        let rhs = b.matmul(&p1b);
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn balancing_is_exact_and_spectrum_preserving() {
        let m = mat([
            [0.0, 1.0, 0.0],
            [-1.0e8, 0.0, 1.0e4],
            [0.0, -1.0e4, -1.0e4],
        ]);
        let (d, b) = balance3(&m);
        // exact roundtrip (powers of two)
        let dinv = [1.0 / d[0], 1.0 / d[1], 1.0 / d[2]];
        let back = super::balance3_with(&b, &dinv);
        assert_eq!(back, m);
        // eigenvalues unchanged
        let sm = spectrum3(&m).unwrap();
        let sb = spectrum3(&b).unwrap();
        for zb in sb.iter() {
            let best = sm
                .iter()
                .map(|zm| (zm - zb).norm())
                .fold(f64::MAX, f64::min);
            assert!(best < 1e-8 * zb.norm().max(1.0));
        }
    }

    #[test]
    fn phi1_satisfies_defining_identity() {
        // exp(M) - I = M phi1(M)
        let m = mat([[0.0, 1.0, 0.0], [-4.0, 0.0, 1.0], [0.0, -1.0, -1.0]]);
        let (e, p) = expm_phi1(&m);
        let lhs = e.sub(&Mat3::identity());
        let rhs = m.matmul(&p);
        assert!(max_abs_diff(&lhs, &rhs) < 1e-13);
    }

    #[test]
    fn split_ops_reproduce_duhamel_identity() {
        // With G_K = G_L + C the exact flows satisfy exp(dt G_K) = exp(dt G_L) + J.
        let g_l = mat([
            [0.0, 1.0, 0.0],
            [-9.0, 0.0, 2.0],
            [0.0, -2.0, -2.0],
        ]);
        let c_scale = 3.5;
        let mut g_k = g_l;
        g_k.a[1][0] += c_scale;
        let dt = 0.05;
        let ops = split_ops(&g_l, &g_k, c_scale, dt);
        let sum = ops.e_l.add(&ops.j);
        assert!(max_abs_diff(&ops.e_k, &sum) < 1e-12);
    }

    #[test]
    fn split_ops_fallback_matches_eigen_route() {
        let g_l = mat([
            [0.0, 1.0, 0.0],
            [-16.0, 0.0, 4.0],
            [0.0, -4.0, -4.0],
        ]);
        let mut g_k = g_l;
        g_k.a[1][0] += 2.0;
        let dt = 0.01;
        let fast = split_ops(&g_l, &g_k, 2.0, dt);
        // force the 6x6 fallback by calling it directly
        let mut m6 = Mat6::zero();
        for i in 0..3 {
            for j in 0..3 {
                m6.a[i][j] = g_l.a[i][j] * dt;
                m6.a[i + 3][j + 3] = g_k.a[i][j] * dt;
            }
        }
        m6.a[4][0] = 2.0 * dt;
        let (e6, _) = expm_phi1_taylor(&m6);
        for i in 0..3 {
            for j in 0..3 {
                assert!((fast.j.a[i][j] - e6.a[i + 3][j]).abs() < 1e-12);
                assert!((fast.e_l.a[i][j] - e6.a[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -1.7 * x + 0.45).collect();
        let (slope, intercept) = linear_fit(&xs, &ys);
        assert!((slope + 1.7).abs() < 1e-12);
        assert!((intercept - 0.45).abs() < 1e-12);
    }
}
