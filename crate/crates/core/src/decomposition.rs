//! Splitting of the shifted semigroup into an exponentially decaying part L
//! and a more regular part K, verified by co-integration: one clock, three
//! systems sharing the frozen nonlocal coefficient read off the full
//! solution. The L system carries the extra shift  + alpha v  and no
//! forcing; the K system starts from zero, is forced by h, and receives the
//! coupling  + alpha v  from the co-evolved L solution, applied through the
//! exact in-step coupling propagator so that the superposition identity holds
//! at the integrator's algebra accuracy.
//!
//! The backward-uniqueness diagnostic evolves the difference of two
//! trajectories in the diagonalised coupling frame and monitors the
//! log-convexity ratio of its weighted norms.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Scheme};
use crate::linalg::{cmat_inv3, cmat_vec3, eig3, linear_fit, split_ops, Mat3};
use crate::model::{BeamState, ModelParams};
use crate::scalar::{cast, csum, Scalar};
use crate::spectral::SpectralField;

/// The three co-evolved states at one instant. The theta slot of `full`
/// holds omega, of `lpart` eta, of `kpart` rho.
#[derive(Debug, Clone)]
pub struct SplitState<T> {
    pub full: BeamState<T>,
    pub lpart: BeamState<T>,
    pub kpart: BeamState<T>,
    pub time: T,
}

#[derive(Debug, Clone)]
pub struct SplitTrajectory<T> {
    pub times: Vec<T>,
    /// ||L zeta||^2 in the phase-space norm.
    pub e0: Vec<T>,
    /// ||K zeta||^2 in the more regular norm.
    pub e1: Vec<T>,
    /// || full - (L + K) || in the phase-space norm.
    pub sum_defect: Vec<T>,
    /// ||du/dt||^2 of the full solution (plain norm), for dissipation checks.
    pub v_l2_full: Vec<T>,
    pub states: Vec<SplitState<T>>,
}

/// Co-integrate the full shifted system and its (L, K) split from initial
/// data `zeta` (given in omega variables). Requires autonomous forcing.
pub fn evolve_split<T: Scalar>(
    zeta: &BeamState<T>,
    p: &ModelParams<T>,
    t_end: T,
    cfg: &IntegratorConfig<T>,
    sample_every: T,
) -> Result<SplitTrajectory<T>, T> {
    // the shifted elastic form needs alpha >= beta^2 for its coercivity
    // (via ||u||_1^2 <= ||u|| ||u||_2); the default beta^2 + 1 has margin
    if p.alpha <= T::zero() || p.alpha < p.beta * p.beta {
        return Err(Error::InvalidParameter {
            what: "the split needs alpha >= beta^2 (default beta^2 + 1)".into(),
        });
    }
    if cfg.scheme != Scheme::ExponentialImex {
        return Err(Error::InvalidParameter {
            what: "the split co-integration uses the exponential scheme".into(),
        });
    }
    if !(t_end > zeta.t) {
        return Err(Error::InvalidParameter {
            what: "t_end must exceed the initial time".into(),
        });
    }
    let h = p.forcing.h(&p.basis)?;
    let basis = &p.basis;
    let n = basis.len();
    let dt = cfg.dt;
    let half = cast::<T>(0.5);
    let n_steps = ((t_end - zeta.t) / dt)
        .round()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let stride = (sample_every / dt).round().to_usize().unwrap_or(1).max(1);

    let mut full = zeta.clone();
    let mut lpart = zeta.clone();
    let mut kpart = BeamState::zero(basis);
    kpart.t = zeta.t;

    let mut traj = SplitTrajectory {
        times: Vec::new(),
        e0: Vec::new(),
        e1: Vec::new(),
        sum_defect: Vec::new(),
        v_l2_full: Vec::new(),
        states: Vec::new(),
    };

    let sample = |traj: &mut SplitTrajectory<T>,
                  full: &BeamState<T>,
                  lpart: &BeamState<T>,
                  kpart: &BeamState<T>|
     -> Result<(), T> {
        traj.times.push(full.t);
        traj.e0.push(lpart.norm_sq(p));
        traj.e1.push(kpart.norm_h2_sq(p));
        let sum = lpart.u.add(&kpart.u)?;
        let sumv = lpart.v.add(&kpart.v)?;
        let sumt = lpart.theta.add(&kpart.theta)?;
        let defect = BeamState {
            u: full.u.sub(&sum)?,
            v: full.v.sub(&sumv)?,
            theta: full.theta.sub(&sumt)?,
            t: full.t,
        };
        traj.sum_defect.push(defect.norm(p));
        traj.v_l2_full.push(full.v.norm_r_sq(T::zero()));
        traj.states.push(SplitState {
            full: full.clone(),
            lpart: lpart.clone(),
            kpart: kpart.clone(),
            time: full.t,
        });
        Ok(())
    };
    sample(&mut traj, &full, &lpart, &kpart)?;

    let mus = basis.mus();
    let t0 = zeta.t;
    for k in 0..n_steps {
        // midpoint coefficient from the full solution, with fixed-point sweeps
        let mut s_mid = csum((0..n).map(|i| {
            let uh = full.u.coeffs()[i] + half * dt * full.v.coeffs()[i];
            mus[i] * uh * uh
        }));
        let mut fu = vec![T::zero(); n];
        let mut fv = vec![T::zero(); n];
        let mut ft = vec![T::zero(); n];
        for _ in 1..cfg.fixed_point_iters {
            for i in 0..n {
                let g = crate::integrator::linear_block(i + 1, p, s_mid);
                let (e, phi) = crate::linalg::expm_phi1(&g.scale(dt));
                let z = [
                    full.u.coeffs()[i],
                    full.v.coeffs()[i],
                    full.theta.coeffs()[i],
                ];
                let fvec = [T::zero(), h.coeffs()[i] / p.mass(i), T::zero()];
                let ez = e.mul_vec(&z);
                let pf = phi.mul_vec(&fvec);
                fu[i] = ez[0] + dt * pf[0];
                fv[i] = ez[1] + dt * pf[1];
                ft[i] = ez[2] + dt * pf[2];
            }
            s_mid = csum((0..n).map(|i| {
                let um = half * (full.u.coeffs()[i] + fu[i]);
                mus[i] * um * um
            }));
        }

        // final sweep: the full and the K system share the same generator,
        // so one set of propagators advances all three systems; the K system
        // receives the coupling alpha * v through the exact in-step operator
        let mut lu = vec![T::zero(); n];
        let mut lv = vec![T::zero(); n];
        let mut lt = vec![T::zero(); n];
        let mut ku = vec![T::zero(); n];
        let mut kv = vec![T::zero(); n];
        let mut kt = vec![T::zero(); n];
        for i in 0..n {
            let mass = p.mass(i);
            let g_k = crate::integrator::linear_block(i + 1, p, s_mid);
            let mut g_l = g_k;
            g_l.a[1][0] = g_l.a[1][0] - p.alpha / mass;
            let ops = split_ops(&g_l, &g_k, p.alpha / mass, dt);
            let fvec = [T::zero(), h.coeffs()[i] / mass, T::zero()];
            let pf = ops.phi1_k.mul_vec(&fvec);

            let zf = [
                full.u.coeffs()[i],
                full.v.coeffs()[i],
                full.theta.coeffs()[i],
            ];
            let ef = ops.e_k.mul_vec(&zf);
            fu[i] = ef[0] + dt * pf[0];
            fv[i] = ef[1] + dt * pf[1];
            ft[i] = ef[2] + dt * pf[2];

            let zl = [
                lpart.u.coeffs()[i],
                lpart.v.coeffs()[i],
                lpart.theta.coeffs()[i],
            ];
            let el = ops.e_l.mul_vec(&zl);
            lu[i] = el[0];
            lv[i] = el[1];
            lt[i] = el[2];

            let zk = [
                kpart.u.coeffs()[i],
                kpart.v.coeffs()[i],
                kpart.theta.coeffs()[i],
            ];
            let ek = ops.e_k.mul_vec(&zk);
            let jl = ops.j.mul_vec(&zl);
            ku[i] = ek[0] + dt * pf[0] + jl[0];
            kv[i] = ek[1] + dt * pf[1] + jl[1];
            kt[i] = ek[2] + dt * pf[2] + jl[2];
        }

        let t_new = t0 + cast::<T>((k + 1) as f64) * dt;
        let thr = cfg.blowup_threshold;
        for (idx, slice) in [&fu, &fv, &ft, &lu, &lv, &lt, &ku, &kv, &kt].iter().enumerate() {
            for (i, &c) in slice.iter().enumerate() {
                if !c.is_finite() || c.abs() > thr {
                    let _ = idx;
                    return Err(Error::BlowUp {
                        time: t_new,
                        mode: i + 1,
                        last_state: Box::new(full.clone()),
                        partial: None,
                    });
                }
            }
        }
        full = BeamState {
            u: SpectralField::from_coeffs_unchecked(basis, fu),
            v: SpectralField::from_coeffs_unchecked(basis, fv),
            theta: SpectralField::from_coeffs_unchecked(basis, ft),
            t: t_new,
        };
        lpart = BeamState {
            u: SpectralField::from_coeffs_unchecked(basis, lu),
            v: SpectralField::from_coeffs_unchecked(basis, lv),
            theta: SpectralField::from_coeffs_unchecked(basis, lt),
            t: t_new,
        };
        kpart = BeamState {
            u: SpectralField::from_coeffs_unchecked(basis, ku),
            v: SpectralField::from_coeffs_unchecked(basis, kv),
            theta: SpectralField::from_coeffs_unchecked(basis, kt),
            t: t_new,
        };
        if (k + 1) % stride == 0 || k + 1 == n_steps {
            sample(&mut traj, &full, &lpart, &kpart)?;
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy)]
pub struct DecayFit<T> {
    /// Fitted decay rate of the norm (half the rate of the squared norm).
    pub kappa_hat: T,
    pub prefactor: T,
    /// Time window actually used by the fit.
    pub window: (T, T),
}

const DECAY_FLOOR: f64 = 1e-14;

/// Least-squares fit of log E0 over the post-transient window
/// [T_eff/4, T_eff], where T_eff is the time the series hits the 1e-14 floor
/// (or the end of the record). The series is a squared norm, so the fitted
/// rate of the norm is -slope/2.
pub fn decay_rate_fit<T: Scalar>(times: &[T], e0: &[T]) -> Result<DecayFit<T>, T> {
    if times.len() != e0.len() {
        return Err(Error::GridMismatch);
    }
    let floor = cast::<T>(DECAY_FLOOR);
    let mut cut = times.len();
    for (i, &v) in e0.iter().enumerate() {
        if v <= floor {
            cut = i;
            break;
        }
    }
    if cut < 2 {
        return Err(Error::SeriesTooShort { len: cut });
    }
    let t_start = times[0];
    let t_eff = times[cut - 1] - t_start;
    let w_lo = t_start + t_eff / cast::<T>(4.0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..cut {
        if times[i] >= w_lo && e0[i] > T::zero() {
            xs.push(times[i]);
            ys.push(e0[i].ln());
        }
    }
    if xs.len() < 5 {
        return Err(Error::SeriesTooShort { len: xs.len() });
    }
    let (slope, intercept) = linear_fit(&xs, &ys);
    Ok(DecayFit {
        kappa_hat: -slope / cast::<T>(2.0),
        prefactor: intercept.exp(),
        window: (w_lo, times[cut - 1]),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct H2Report<T> {
    pub sup_e1: T,
    /// Linear-fit slope of the running maximum of E1 over the final half.
    pub tail_slope: T,
}

/// Uniform regularity check of the K part: running maximum of E1 and the
/// growth trend of its tail.
pub fn h2_bound<T: Scalar>(traj: &SplitTrajectory<T>) -> H2Report<T> {
    let mut running = Vec::with_capacity(traj.e1.len());
    let mut m = T::zero();
    for &v in &traj.e1 {
        if v > m {
            m = v;
        }
        running.push(m);
    }
    let half = traj.e1.len() / 2;
    let tail_slope = if traj.e1.len() - half >= 2 {
        let (slope, _) = linear_fit(&traj.times[half..], &running[half..]);
        slope
    } else {
        T::zero()
    };
    H2Report {
        sup_e1: m,
        tail_slope,
    }
}

/// Spectrum and diagonaliser of the fixed coupling matrix
/// [[0, -1, 0], [1, 0, -1], [0, 1, 1]].
#[derive(Debug, Clone)]
pub struct MatrixBSpectrum<T: Scalar> {
    /// Real eigenvalue.
    pub a: T,
    /// Real and imaginary parts of the complex pair b +- i c.
    pub b: T,
    pub c: T,
    /// Diagonaliser with unit-length columns, ordered (a, b+ic, b-ic).
    pub diagonalizer: [[Complex<T>; 3]; 3],
    pub inverse: [[Complex<T>; 3]; 3],
    /// Frobenius condition number of the diagonaliser.
    pub condition: T,
}

pub fn coupling_matrix<T: Scalar>() -> Mat3<T> {
    let o = T::one();
    let z = T::zero();
    Mat3 {
        a: [[z, -o, z], [o, z, -o], [z, o, o]],
    }
}

pub fn matrix_b_spectrum<T: Scalar>() -> MatrixBSpectrum<T> {
    let m = coupling_matrix::<T>();
    let e = eig3(&m).expect("the coupling matrix has three distinct eigenvalues");
    // order: real eigenvalue first, then the +ic member of the pair
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| {
        let key = |k: usize| {
            if e.vals[k].im == T::zero() {
                (0, T::zero())
            } else if e.vals[k].im > T::zero() {
                (1, T::zero())
            } else {
                (2, T::zero())
            }
        };
        key(i).0.cmp(&key(j).0)
    });
    let vals = [e.vals[order[0]], e.vals[order[1]], e.vals[order[2]]];
    let zero = Complex::new(T::zero(), T::zero());
    let mut vecs = [[zero; 3]; 3];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..3 {
            vecs[row][col] = e.vecs[row][src];
        }
    }
    let inv = cmat_inv3(&vecs).expect("diagonaliser is invertible");
    let frob = |m: &[[Complex<T>; 3]; 3]| {
        m.iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    };
    MatrixBSpectrum {
        a: vals[0].re,
        b: vals[1].re,
        c: vals[1].im.abs(),
        diagonalizer: vecs,
        inverse: inv,
        condition: frob(&vecs) * frob(&inv),
    }
}

#[derive(Debug, Clone)]
pub struct GammaRatioReport<T> {
    pub times: Vec<T>,
    pub gamma: Vec<T>,
    /// Discrete slopes between consecutive samples.
    pub slopes: Vec<T>,
    pub max_slope: T,
    /// Empirical bound of ||G*||_W / ||xi*||_W along the run.
    pub k_hat: T,
    /// Running maximum of the empirical bound, per sample.
    pub k_series: Vec<T>,
    /// True when the series was truncated because the trajectories merged.
    pub truncated: bool,
}

/// Backward-uniqueness diagnostic: evolve two (omega-variable) states under
/// the shifted autonomous system, diagonalise the coupling of their
/// difference, and monitor the ratio of the weighted H^1-type norm to the
/// plain norm. Along exact dynamics the ratio grows at most like k^2 t.
/// Defined for the non-rotational model (gamma = 0).
pub fn gamma_ratio_monitor<T: Scalar>(
    z1: &BeamState<T>,
    z2: &BeamState<T>,
    p: &ModelParams<T>,
    t_end: T,
    cfg: &IntegratorConfig<T>,
    sample_every: T,
) -> Result<GammaRatioReport<T>, T> {
    if p.gamma != T::zero() {
        return Err(Error::InvalidParameter {
            what: "the ratio diagnostic is defined for gamma = 0".into(),
        });
    }
    let h = p.forcing.h(&p.basis)?;
    let d0 = z1.sub(z2)?.norm(p);
    if d0 == T::zero() {
        return Err(Error::ZeroSeparation);
    }
    // both trajectories evolve in omega variables: forcing (h, 0)
    let shifted =
        crate::model::Forcing::constant(h.clone(), SpectralField::zeros(&p.basis))?;
    let ps = ModelParams::with_alpha(p.beta, p.gamma, p.alpha, p.basis.clone(), shifted)?;
    let obs = crate::integrator::Observers {
        sample_every,
        keep_states: true,
        step_residuals: false,
    };
    let r1 = crate::integrator::simulate(z1, t_end, cfg, &ps, &obs)?;
    let r2 = crate::integrator::simulate(z2, t_end, cfg, &ps, &obs)?;
    let s1 = r1.states.as_ref().unwrap();
    let s2 = r2.states.as_ref().unwrap();

    let spec = matrix_b_spectrum::<T>();
    let (wa, wb) = (spec.a, spec.b);
    let uinv = spec.inverse;
    let g_col_sq: T = (0..3).map(|j| uinv[j][1].norm_sqr()).fold(T::zero(), |x, y| x + y);

    let basis = &p.basis;
    let n = basis.len();
    let mut times = Vec::new();
    let mut gamma_series = Vec::new();
    let mut k_hat = T::zero();
    let mut k_series = Vec::new();
    let mut truncated = false;
    let merge_floor = cast::<T>(1e-14);

    for (a, b) in s1.iter().zip(s2) {
        let mut w_plain = T::zero();
        let mut w_weighted = T::zero();
        for i in 0..n {
            let mu = basis.mus()[i];
            let xi = [
                Complex::new(mu * (a.u.coeffs()[i] - b.u.coeffs()[i]), T::zero()),
                Complex::new(a.v.coeffs()[i] - b.v.coeffs()[i], T::zero()),
                Complex::new(a.theta.coeffs()[i] - b.theta.coeffs()[i], T::zero()),
            ];
            let xs = cmat_vec3(&uinv, &xi);
            let plain = xs[0].norm_sqr() + xs[1].norm_sqr() + xs[2].norm_sqr();
            let weighted = wa * xs[0].norm_sqr() + wb * (xs[1].norm_sqr() + xs[2].norm_sqr());
            w_plain = w_plain + plain;
            w_weighted = w_weighted + mu * weighted;
        }
        if w_plain.sqrt() < merge_floor {
            truncated = true;
            break;
        }
        times.push(a.t);
        gamma_series.push(w_weighted / w_plain);

        // empirical k: ||G*||_W <= |U^{-1} e2| * ||G_2||, with
        // G_2 = (||u2||_1^2 - ||u1||_1^2) A^{1/2} u2 - (beta + ||u1||_1^2) A^{1/2}(u1 - u2)
        let s1n = a.u.norm_r_sq(T::one());
        let s2n = b.u.norm_r_sq(T::one());
        let g2_sq = csum((0..n).map(|i| {
            let mu = basis.mus()[i];
            let g2 = (s2n - s1n) * mu * b.u.coeffs()[i]
                - (p.beta + s1n) * mu * (a.u.coeffs()[i] - b.u.coeffs()[i]);
            g2 * g2
        }));
        let k_now = (g_col_sq * g2_sq).sqrt() / w_plain.sqrt();
        if k_now > k_hat {
            k_hat = k_now;
        }
        k_series.push(k_hat);
    }

    let mut slopes = Vec::new();
    let mut max_slope = T::neg_infinity();
    for i in 1..gamma_series.len() {
        let slope = (gamma_series[i] - gamma_series[i - 1]) / (times[i] - times[i - 1]);
        if slope > max_slope {
            max_slope = slope;
        }
        slopes.push(slope);
    }
    Ok(GammaRatioReport {
        times,
        gamma: gamma_series,
        slopes,
        max_slope,
        k_hat,
        k_series,
        truncated,
    })
}

/// Characteristic polynomial residual of the coupling matrix eigenvalues:
/// lambda^3 - lambda^2 + 2 lambda - 1.
pub fn coupling_characteristic_residual<T: Scalar>(spec: &MatrixBSpectrum<T>) -> T {
    let vals = [
        Complex::new(spec.a, T::zero()),
        Complex::new(spec.b, spec.c),
        Complex::new(spec.b, -spec.c),
    ];
    vals.iter()
        .map(|&z| {
            (z * z * z - z * z + z * cast::<T>(2.0) - Complex::new(T::one(), T::zero())).norm()
        })
        .fold(T::zero(), |m, x| if x > m { x } else { m })
}
