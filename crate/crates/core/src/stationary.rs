//! Stationary states: solutions of  A u + (beta + ||u||_1^2) A^{1/2} u = h.
//!
//! Mode-wise the equation reads  mu_n (mu_n + beta + s) u_n = h_n  with
//! s = ||u||_1^2, so the problem reduces to the scalar fixed-point equation
//! F(s) = ||u(s)||_1^2 - s = 0 between the poles s = -beta - mu_n. Modes with
//! h_n = 0 can also carry a free kernel amplitude exactly at a pole value of
//! s; for h = 0 those kernel branches are the classical buckled states
//! u = +-c e_n with c^2 = -(beta + mu_n)/mu_n.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::{cast, csum, Scalar};
use crate::spectral::SpectralField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Trivial,
    /// Kernel branch on the given mode with positive amplitude.
    ModePlus(usize),
    ModeMinus(usize),
    /// Root of the scalar reduction with every forced mode active.
    Generic,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Trivial => write!(f, "trivial"),
            Branch::ModePlus(n) => write!(f, "mode-{n}-plus"),
            Branch::ModeMinus(n) => write!(f, "mode-{n}-minus"),
            Branch::Generic => write!(f, "generic"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StationaryPoint<T> {
    pub u: SpectralField<T>,
    /// s = ||u||_1^2.
    pub s: T,
    /// Norm of the elliptic defect.
    pub residual: T,
    pub branch: Branch,
    /// Set when the branch sits within 1e-6 of its buckling threshold.
    pub degenerate: bool,
}

/// Squared kernel amplitude c^2 = -(beta + mu_n)/mu_n of the buckled pair
/// u = +-c e_n, available when beta < -mu_n. Exactly at threshold the branch
/// merges with the trivial one (c^2 = 0).
pub fn branch_amplitude<T: Scalar>(n: usize, beta: T) -> Option<T> {
    let pi = T::PI();
    let mu = (cast::<T>(n as f64) * pi).powi(2);
    if beta <= -mu {
        Some(-(beta + mu) / mu)
    } else {
        None
    }
}

const POLE_TOL: f64 = 1e-10;

/// Unique solution of the frozen-s linear elliptic problem:
/// u_n = h_n / (mu_n (mu_n + beta + s)).
pub fn stationary_from_s<T: Scalar>(
    h: &SpectralField<T>,
    beta: T,
    s: T,
) -> Result<SpectralField<T>, T> {
    let basis = h.basis().clone();
    let mut u = SpectralField::zeros(&basis);
    for i in 0..basis.len() {
        let mu = basis.mus()[i];
        let denom = mu + beta + s;
        if h.coeffs()[i] != T::zero() && denom.abs() < cast::<T>(POLE_TOL) {
            return Err(Error::Pole { mode: i + 1, s });
        }
        if h.coeffs()[i] != T::zero() {
            u.coeffs_mut()[i] = h.coeffs()[i] / (mu * denom);
        }
    }
    Ok(u)
}

/// Scalar reduction F(s) = ||u(s)||_1^2 - s; its roots are exactly the
/// stationary values of s (with all kernel modes off).
pub fn scalar_defect<T: Scalar>(h: &SpectralField<T>, beta: T, s: T) -> Result<T, T> {
    let u = stationary_from_s(h, beta, s)?;
    Ok(u.norm_r_sq(T::one()) - s)
}

/// Elliptic defect norm || A u + (beta + ||u||_1^2) A^{1/2} u - h ||.
pub fn residual<T: Scalar>(u: &SpectralField<T>, h: &SpectralField<T>, beta: T) -> T {
    let basis = u.basis();
    let s = u.norm_r_sq(T::one());
    csum(u.coeffs().iter().zip(h.coeffs()).enumerate().map(|(i, (&un, &hn))| {
        let mu = basis.mus()[i];
        let d = basis.lambdas()[i] * un + (beta + s) * mu * un - hn;
        d * d
    }))
    .sqrt()
}

const RESIDUAL_CERT: f64 = 1e-10;
const ROOT_TOL: f64 = 1e-12;
const DEGENERACY_TOL: f64 = 1e-6;
const DEDUP_TOL: f64 = 1e-8;

/// Enumerate the stationary set with the default scan resolution.
pub fn enumerate_stationary<T: Scalar>(
    h: &SpectralField<T>,
    beta: T,
    p: &ModelParams<T>,
) -> Result<Vec<StationaryPoint<T>>, T> {
    let mu_max = p.basis.mu(p.basis.len());
    let s_max = cast::<T>(4.0) * (beta.abs() + mu_max);
    enumerate_stationary_with(h, beta, p, s_max, 10_000)
}

/// Enumeration over [0, s_max]: bracket the sign changes of F on each
/// pole-free interval, refine by safeguarded secant, then add kernel branches
/// at pole values carried by unforced modes. Every returned point is
/// certified by its elliptic residual.
pub fn enumerate_stationary_with<T: Scalar>(
    h: &SpectralField<T>,
    beta: T,
    p: &ModelParams<T>,
    s_max: T,
    grid: usize,
) -> Result<Vec<StationaryPoint<T>>, T> {
    let basis = &p.basis;
    let n = basis.len();
    if h.len() != n {
        return Err(Error::BasisMismatch {
            left: h.len(),
            right: n,
        });
    }

    // poles only matter on modes actually forced
    let mut poles: Vec<T> = (0..n)
        .filter(|&i| h.coeffs()[i] != T::zero())
        .map(|i| -beta - basis.mus()[i])
        .filter(|&sp| sp > T::zero() && sp < s_max)
        .collect();
    poles.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut edges = vec![T::zero()];
    edges.extend(poles.iter().copied());
    edges.push(s_max);

    let gap = cast::<T>(1e-9) * (T::one() + s_max);
    let mut points: Vec<StationaryPoint<T>> = Vec::new();

    let f = |s: T| scalar_defect(h, beta, s);
    for w in edges.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        if hi - lo <= cast::<T>(2.0) * gap {
            continue;
        }
        // stay clear of the pole singularities at interval ends
        if poles.iter().any(|&sp| (sp - lo).abs() < gap) {
            lo = lo + gap;
        }
        if poles.iter().any(|&sp| (sp - hi).abs() < gap) {
            hi = hi - gap;
        }
        let steps = grid.max(2);
        let dsg = (hi - lo) / cast::<T>(steps as f64);
        let mut prev_s = lo;
        let mut prev_f = match f(prev_s) {
            Ok(v) => v,
            Err(_) => continue,
        };
        for k in 1..=steps {
            let s = lo + dsg * cast::<T>(k as f64);
            let fs = match f(s) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let bracketed = prev_f == T::zero()
                || (prev_f > T::zero() && fs <= T::zero())
                || (prev_f < T::zero() && fs >= T::zero());
            if bracketed {
                if let Some(root) = refine_root(&f, prev_s, prev_f, s, fs) {
                    let u = stationary_from_s(h, beta, root)?;
                    push_point(&mut points, u, h, beta, Branch::Generic, false);
                }
            }
            prev_s = s;
            prev_f = fs;
        }
    }

    // kernel branches: pole values on unforced modes
    for i in 0..n {
        if h.coeffs()[i] != T::zero() {
            continue;
        }
        let mu = basis.mus()[i];
        let sp = -beta - mu;
        if sp < T::zero() || sp > s_max {
            continue;
        }
        let degenerate = (beta + mu).abs() < cast::<T>(DEGENERACY_TOL);
        let base = match stationary_from_s(h, beta, sp) {
            Ok(u) => u,
            Err(_) => continue, // another forced mode is singular at this s
        };
        let rem = sp - base.norm_r_sq(T::one());
        if rem < T::zero() {
            continue;
        }
        let c = (rem / mu).sqrt();
        if c == T::zero() {
            // threshold case: merges with the plain root of the scalar scan
            push_point(&mut points, base, h, beta, Branch::Generic, degenerate);
            continue;
        }
        for (sign, branch) in [(T::one(), Branch::ModePlus(i + 1)), (-T::one(), Branch::ModeMinus(i + 1))] {
            let mut u = base.clone();
            u.coeffs_mut()[i] = sign * c;
            push_point(&mut points, u, h, beta, branch, degenerate);
        }
    }

    // deterministic order: by s, then by the sign pattern
    points.sort_by(|a, b| {
        a.s.partial_cmp(&b.s)
            .unwrap()
            .then_with(|| cmp_coeffs(a.u.coeffs(), b.u.coeffs()))
    });
    Ok(points)
}

fn cmp_coeffs<T: Scalar>(a: &[T], b: &[T]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn push_point<T: Scalar>(
    points: &mut Vec<StationaryPoint<T>>,
    u: SpectralField<T>,
    h: &SpectralField<T>,
    beta: T,
    branch: Branch,
    degenerate: bool,
) {
    let s = u.norm_r_sq(T::one());
    let res = residual(&u, h, beta);
    if !res.is_finite() || res >= cast::<T>(RESIDUAL_CERT) {
        return;
    }
    let tol = cast::<T>(DEDUP_TOL);
    for existing in points.iter() {
        if (existing.s - s).abs() < tol {
            let d = existing
                .u
                .sub(&u)
                .map(|d| d.norm_r(cast::<T>(2.0)).unwrap_or(T::infinity()))
                .unwrap_or(T::infinity());
            if d < tol {
                return;
            }
        }
    }
    let branch = if branch == Branch::Generic && s < tol && u.coeffs().iter().all(|&c| c.abs() < tol)
    {
        Branch::Trivial
    } else {
        branch
    };
    points.push(StationaryPoint {
        u,
        s,
        residual: res,
        branch,
        degenerate,
    });
}

/// Bisection-safeguarded secant refinement of a bracketed root of F.
fn refine_root<T: Scalar>(
    f: &impl Fn(T) -> Result<T, T>,
    mut a: T,
    mut fa: T,
    mut b: T,
    mut fb: T,
) -> Option<T> {
    if fa == T::zero() {
        return Some(a);
    }
    if fb == T::zero() {
        return Some(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return None;
    }
    let tol = cast::<T>(ROOT_TOL);
    for _ in 0..200 {
        // secant candidate, clipped into the bracket
        let mut x = b - fb * (b - a) / (fb - fa);
        let mid = (a + b) / cast::<T>(2.0);
        if !(x > a.min(b) && x < a.max(b)) {
            x = mid;
        }
        let fx = f(x).ok()?;
        if fx.abs() < tol || (b - a).abs() < T::epsilon() * (T::one() + x.abs()) {
            return Some(x);
        }
        if (fx > T::zero()) == (fa > T::zero()) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    Some((a + b) / cast::<T>(2.0))
}
