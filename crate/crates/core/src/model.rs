//! State space and right-hand side of the beam system, together with every
//! scalar functional the verification experiments track along trajectories.
//!
//! Mode-wise the system reads, with mu = mu_n, m = 1 + gamma mu and
//! s = ||u||_1^2:
//!
//! ```text
//! u'  = v
//! v'  = [ -mu^2 u + mu theta - (beta + s) mu u + f_n(t) ] / m
//! th' = -mu theta - mu v + g_n(t)
//! ```
//!
//! The rotational mass operator enters only through m, so gamma = 0 recovers
//! the plain model.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{cast, csum, Scalar};
use crate::spectral::{BasisSpec, SpectralField};

/// One forcing component, queryable at any time.
#[derive(Debug, Clone)]
pub enum ForcingTerm<T> {
    Constant(SpectralField<T>),
    /// profile * sin(omega t + phase)
    Sinusoidal {
        profile: SpectralField<T>,
        omega: T,
        phase: T,
    },
    /// Linear interpolation between tabulated samples; clamped outside the
    /// table range.
    Tabulated {
        times: Vec<T>,
        values: Vec<SpectralField<T>>,
    },
}

impl<T: Scalar> ForcingTerm<T> {
    pub fn zero(basis: &Arc<BasisSpec<T>>) -> Self {
        ForcingTerm::Constant(SpectralField::zeros(basis))
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ForcingTerm::Constant(_))
    }

    pub fn basis_len(&self) -> usize {
        match self {
            ForcingTerm::Constant(f) => f.len(),
            ForcingTerm::Sinusoidal { profile, .. } => profile.len(),
            ForcingTerm::Tabulated { values, .. } => values.first().map_or(0, |f| f.len()),
        }
    }

    /// Evaluate into a scratch buffer (hot path inside the integrator).
    pub fn eval_into(&self, t: T, out: &mut [T]) {
        match self {
            ForcingTerm::Constant(f) => out.copy_from_slice(f.coeffs()),
            ForcingTerm::Sinusoidal {
                profile,
                omega,
                phase,
            } => {
                let amp = (*omega * t + *phase).sin();
                for (o, &c) in out.iter_mut().zip(profile.coeffs()) {
                    *o = c * amp;
                }
            }
            ForcingTerm::Tabulated { times, values } => {
                if times.is_empty() {
                    out.iter_mut().for_each(|o| *o = T::zero());
                    return;
                }
                if t <= times[0] {
                    out.copy_from_slice(values[0].coeffs());
                    return;
                }
                if t >= *times.last().unwrap() {
                    out.copy_from_slice(values.last().unwrap().coeffs());
                    return;
                }
                let k = times.partition_point(|&tk| tk <= t) - 1;
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                for (i, o) in out.iter_mut().enumerate() {
                    let a = values[k].coeffs()[i];
                    let b = values[k + 1].coeffs()[i];
                    *o = a + (b - a) * w;
                }
            }
        }
    }

    pub fn value(&self, t: T, basis: &Arc<BasisSpec<T>>) -> SpectralField<T> {
        let mut out = SpectralField::zeros(basis);
        self.eval_into(t, out.coeffs_mut());
        out
    }
}

/// Lateral load f and heat supply g.
#[derive(Debug, Clone)]
pub struct Forcing<T> {
    pub f: ForcingTerm<T>,
    pub g: ForcingTerm<T>,
    /// theta_g = A^{-1/2} g, precomputed for constant g.
    theta_g: Option<SpectralField<T>>,
}

impl<T: Scalar> Forcing<T> {
    pub fn new(basis: &Arc<BasisSpec<T>>, f: ForcingTerm<T>, g: ForcingTerm<T>) -> Result<Self, T> {
        for (len, name) in [(f.basis_len(), "f"), (g.basis_len(), "g")] {
            if len != basis.len() {
                return Err(Error::InvalidParameter {
                    what: format!("forcing component {name} has {len} modes, basis has {}", basis.len()),
                });
            }
        }
        let theta_g = match &g {
            ForcingTerm::Constant(gf) => Some(gf.apply_a_power(cast::<T>(-0.5))),
            _ => None,
        };
        Ok(Self { f, g, theta_g })
    }

    pub fn zero(basis: &Arc<BasisSpec<T>>) -> Self {
        Self::new(basis, ForcingTerm::zero(basis), ForcingTerm::zero(basis)).unwrap()
    }

    pub fn constant(f: SpectralField<T>, g: SpectralField<T>) -> Result<Self, T> {
        let basis = Arc::clone(f.basis());
        Self::new(&basis, ForcingTerm::Constant(f), ForcingTerm::Constant(g))
    }

    pub fn is_autonomous(&self) -> bool {
        self.f.is_constant() && self.g.is_constant()
    }

    /// theta_g(t) = A^{-1/2} g(t); cached for time-independent g.
    pub fn theta_g(&self, t: T, basis: &Arc<BasisSpec<T>>) -> SpectralField<T> {
        match &self.theta_g {
            Some(cached) => cached.clone(),
            None => self.g.value(t, basis).apply_a_power(cast::<T>(-0.5)),
        }
    }

    /// h = f + g for autonomous forcing.
    pub fn h(&self, basis: &Arc<BasisSpec<T>>) -> Result<SpectralField<T>, T> {
        if !self.is_autonomous() {
            return Err(Error::TimeDependentForcing);
        }
        self.f
            .value(T::zero(), basis)
            .add(&self.g.value(T::zero(), basis))
    }
}

/// Model parameters: axial force beta, rotational parameter gamma, the
/// decomposition shift alpha, truncation, and forcing.
#[derive(Debug, Clone)]
pub struct ModelParams<T> {
    pub beta: T,
    pub gamma: T,
    pub alpha: T,
    pub basis: Arc<BasisSpec<T>>,
    pub forcing: Forcing<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// alpha defaults to beta^2 + 1, which keeps the shifted elastic energy
    /// coercive for every beta (via ||u||_1^2 <= ||u|| ||u||_2).
    pub fn new(
        beta: T,
        gamma: T,
        basis: Arc<BasisSpec<T>>,
        forcing: Forcing<T>,
    ) -> Result<Self, T> {
        Self::with_alpha(beta, gamma, beta * beta + T::one(), basis, forcing)
    }

    pub fn with_alpha(
        beta: T,
        gamma: T,
        alpha: T,
        basis: Arc<BasisSpec<T>>,
        forcing: Forcing<T>,
    ) -> Result<Self, T> {
        if gamma < T::zero() {
            return Err(Error::InvalidParameter {
                what: "gamma must be nonnegative".into(),
            });
        }
        if alpha <= T::zero() {
            return Err(Error::InvalidParameter {
                what: "alpha must be positive".into(),
            });
        }
        Ok(Self {
            beta,
            gamma,
            alpha,
            basis,
            forcing,
        })
    }

    /// Mass weight 1 + gamma mu_n for 0-based mode index.
    #[inline]
    pub(crate) fn mass(&self, idx: usize) -> T {
        T::one() + self.gamma * self.basis.mus()[idx]
    }
}

/// Phase-space point (u, v = du/dt, theta) at a time stamp. After the shift
/// to the equivalent autonomous problem the third slot holds omega instead.
#[derive(Debug, Clone)]
pub struct BeamState<T> {
    pub u: SpectralField<T>,
    pub v: SpectralField<T>,
    pub theta: SpectralField<T>,
    pub t: T,
}

impl<T: Scalar> BeamState<T> {
    pub fn new(
        u: SpectralField<T>,
        v: SpectralField<T>,
        theta: SpectralField<T>,
        t: T,
    ) -> Result<Self, T> {
        if u.len() != v.len() || u.len() != theta.len() {
            return Err(Error::BasisMismatch {
                left: u.len(),
                right: v.len().max(theta.len()),
            });
        }
        Ok(Self { u, v, theta, t })
    }

    pub fn zero(basis: &Arc<BasisSpec<T>>) -> Self {
        Self {
            u: SpectralField::zeros(basis),
            v: SpectralField::zeros(basis),
            theta: SpectralField::zeros(basis),
            t: T::zero(),
        }
    }

    pub fn basis(&self) -> &Arc<BasisSpec<T>> {
        self.u.basis()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.theta.is_finite()
    }

    /// s = ||u||_1^2, the nonlocal stiffness variable.
    pub fn stiffness(&self) -> T {
        self.u.norm_r_sq(T::one())
    }

    /// Squared phase-space norm ||u||_2^2 + ||v||_{1,gamma}^2 + ||theta||^2.
    pub fn norm_sq(&self, p: &ModelParams<T>) -> T {
        self.u.norm_r_sq(cast::<T>(2.0))
            + self.v.norm_gamma_sq(T::one(), p.gamma)
            + self.theta.norm_r_sq(T::zero())
    }

    pub fn norm(&self, p: &ModelParams<T>) -> T {
        self.norm_sq(p).sqrt()
    }

    /// Squared norm of the more regular space: ||u||_4^2 + ||v||_{3,gamma}^2
    /// + ||theta||_2^2.
    pub fn norm_h2_sq(&self, p: &ModelParams<T>) -> T {
        self.u.norm_r_sq(cast::<T>(4.0))
            + self.v.norm_gamma_sq(cast::<T>(3.0), p.gamma)
            + self.theta.norm_r_sq(cast::<T>(2.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, T> {
        Ok(Self {
            u: self.u.sub(&other.u)?,
            v: self.v.sub(&other.v)?,
            theta: self.theta.sub(&other.theta)?,
            t: self.t,
        })
    }
}

/// Time derivative of a state.
#[derive(Debug, Clone)]
pub struct StateDerivative<T> {
    pub du: SpectralField<T>,
    pub dv: SpectralField<T>,
    pub dtheta: SpectralField<T>,
}

/// Right-hand side of the evolution system at time t.
pub fn rhs<T: Scalar>(state: &BeamState<T>, t: T, p: &ModelParams<T>) -> Result<StateDerivative<T>, T> {
    if !state.is_finite() {
        return Err(Error::RangeError { what: "state" });
    }
    let basis = state.basis();
    let n = basis.len();
    let s = state.stiffness();
    let mut fbuf = vec![T::zero(); n];
    let mut gbuf = vec![T::zero(); n];
    p.forcing.f.eval_into(t, &mut fbuf);
    p.forcing.g.eval_into(t, &mut gbuf);

    let mut du = SpectralField::zeros(basis);
    let mut dv = SpectralField::zeros(basis);
    let mut dtheta = SpectralField::zeros(basis);
    for i in 0..n {
        let mu = basis.mus()[i];
        let m = p.mass(i);
        let u = state.u.coeffs()[i];
        let v = state.v.coeffs()[i];
        let th = state.theta.coeffs()[i];
        du.coeffs_mut()[i] = v;
        dv.coeffs_mut()[i] = (-mu * mu * u + mu * th - (p.beta + s) * mu * u + fbuf[i]) / m;
        dtheta.coeffs_mut()[i] = -mu * th - mu * v + gbuf[i];
    }
    Ok(StateDerivative { du, dv, dtheta })
}

/// Energy: (1/2)( ||u||_2^2 + ||v||_{1,gamma}^2 + ||theta||^2 )
/// + (1/4)(beta + ||u||_1^2)^2. Nonnegative as a sum of squares.
pub fn energy<T: Scalar>(state: &BeamState<T>, p: &ModelParams<T>) -> T {
    let half = cast::<T>(0.5);
    let quarter = cast::<T>(0.25);
    let s = state.stiffness();
    half * state.norm_sq(p) + quarter * (p.beta + s).powi(2)
}

/// theta_g = A^{-1/2} g and the induced stationary shift z_g = (0, 0, theta_g).
pub fn theta_g<T: Scalar>(p: &ModelParams<T>) -> Result<SpectralField<T>, T> {
    if !p.forcing.is_autonomous() {
        return Err(Error::TimeDependentForcing);
    }
    Ok(p.forcing.theta_g(T::zero(), &p.basis))
}

/// Replace theta by omega = theta - theta_g (autonomous forcing only).
pub fn shift_to_omega<T: Scalar>(state: &BeamState<T>, p: &ModelParams<T>) -> Result<BeamState<T>, T> {
    let tg = theta_g(p)?;
    Ok(BeamState {
        u: state.u.clone(),
        v: state.v.clone(),
        theta: state.theta.sub(&tg)?,
        t: state.t,
    })
}

/// Inverse of [`shift_to_omega`].
pub fn unshift_from_omega<T: Scalar>(
    state: &BeamState<T>,
    p: &ModelParams<T>,
) -> Result<BeamState<T>, T> {
    let tg = theta_g(p)?;
    Ok(BeamState {
        u: state.u.clone(),
        v: state.v.clone(),
        theta: state.theta.add(&tg)?,
        t: state.t,
    })
}

/// Lyapunov functional of the shifted problem evaluated on an (unshifted)
/// state: L0 = E0 - <h, u> with omega = theta - theta_g substituted
/// internally. Along exact trajectories dL0/dt = -||omega||_1^2.
pub fn lyapunov_shifted<T: Scalar>(state: &BeamState<T>, p: &ModelParams<T>) -> Result<T, T> {
    let shifted = shift_to_omega(state, p)?;
    let h = p.forcing.h(&p.basis)?;
    lyapunov_shifted_on_omega(&shifted, &h, p)
}

/// Same functional evaluated on a state already in omega variables.
pub fn lyapunov_shifted_on_omega<T: Scalar>(
    omega_state: &BeamState<T>,
    h: &SpectralField<T>,
    p: &ModelParams<T>,
) -> Result<T, T> {
    let e0 = energy(omega_state, p);
    Ok(e0 - omega_state.u.inner_r(h, T::zero())?)
}

/// Scalar functionals sampled along trajectories.
#[derive(Debug, Clone)]
pub struct FunctionalRecord<T> {
    /// Energy E.
    pub energy: T,
    /// L = E - <u, f(t)>.
    pub lyapunov: T,
    /// L0 of the shifted problem (autonomous forcing only).
    pub lyapunov_shifted: Option<T>,
    /// Phi = <M_gamma v, u>.
    pub phi: T,
    /// Psi = <M_gamma v, theta>_{-1}.
    pub psi: T,
    /// s = beta + ||u||_1^2 summand; stored as ||u||_1^2.
    pub s: T,
    /// ||theta||_1^2 (the slot holds omega on shifted trajectories).
    pub dissipation: T,
    /// ||v||_{1,gamma}^2.
    pub kinetic: T,
}

/// <M_gamma a, b>_r = sum mu^r (1 + gamma mu) a_n b_n.
pub(crate) fn inner_mass<T: Scalar>(
    a: &SpectralField<T>,
    b: &SpectralField<T>,
    r: T,
    p: &ModelParams<T>,
) -> T {
    let basis = a.basis();
    csum(a.coeffs().iter().zip(b.coeffs()).enumerate().map(|(i, (&x, &y))| {
        basis.mu_pow(i, r) * (T::one() + p.gamma * basis.mus()[i]) * x * y
    }))
}

/// Populate every functional at the state's own time stamp.
pub fn auxiliary_functionals<T: Scalar>(
    state: &BeamState<T>,
    p: &ModelParams<T>,
) -> Result<FunctionalRecord<T>, T> {
    let e = energy(state, p);
    let f_now = p.forcing.f.value(state.t, &p.basis);
    let l = e - state.u.inner_r(&f_now, T::zero())?;
    let l0 = if p.forcing.is_autonomous() {
        Some(lyapunov_shifted(state, p)?)
    } else {
        None
    };
    let phi = inner_mass(&state.v, &state.u, T::zero(), p);
    let psi = inner_mass(&state.v, &state.theta, -T::one(), p);
    Ok(FunctionalRecord {
        energy: e,
        lyapunov: l,
        lyapunov_shifted: l0,
        phi,
        psi,
        s: state.stiffness(),
        dissipation: state.theta.norm_r_sq(T::one()),
        kinetic: state.v.norm_gamma_sq(T::one(), p.gamma),
    })
}

/// Proof-level functionals of the decaying part of the semigroup split,
/// exposed read-only for inspection: Theta0, Upsilon0 and
/// Lambda0 = Theta0 + eps Upsilon0.
#[derive(Debug, Clone, Copy)]
pub struct DecayFunctionals<T> {
    pub theta0: T,
    pub upsilon0: T,
    pub lambda0: T,
}

pub fn decay_functionals<T: Scalar>(
    lpart: &BeamState<T>,
    u_full: &SpectralField<T>,
    p: &ModelParams<T>,
    eps: T,
) -> DecayFunctionals<T> {
    let e0 = lpart.norm_sq(p);
    let v1 = lpart.u.norm_r_sq(T::one());
    let v0 = lpart.u.norm_r_sq(T::zero());
    let u1 = u_full.norm_r_sq(T::one());
    let theta0 = e0 + p.beta * v1 + p.alpha * v0 + u1 * v1;
    let upsilon0 = inner_mass(&lpart.v, &lpart.u, T::zero(), p)
        + cast::<T>(2.0) * inner_mass(&lpart.v, &lpart.theta, -T::one(), p);
    DecayFunctionals {
        theta0,
        upsilon0,
        lambda0: theta0 + eps * upsilon0,
    }
}

/// Proof-level functionals of the regular part: Theta1, Upsilon1 and
/// Lambda1 = Theta1 + eps Upsilon1.
#[derive(Debug, Clone, Copy)]
pub struct RegularityFunctionals<T> {
    pub theta1: T,
    pub upsilon1: T,
    pub lambda1: T,
}

pub fn regularity_functionals<T: Scalar>(
    kpart: &BeamState<T>,
    u_full: &SpectralField<T>,
    h: &SpectralField<T>,
    p: &ModelParams<T>,
    eps: T,
) -> RegularityFunctionals<T> {
    let two = cast::<T>(2.0);
    let e1 = kpart.norm_h2_sq(p);
    let w3 = kpart.u.norm_r_sq(cast::<T>(3.0));
    let u1 = u_full.norm_r_sq(T::one());
    // <A w, h> = sum lambda_n w_n h_n
    let basis = kpart.u.basis();
    let aw_h = csum(
        kpart
            .u
            .coeffs()
            .iter()
            .zip(h.coeffs())
            .enumerate()
            .map(|(i, (&w, &hh))| basis.lambdas()[i] * w * hh),
    );
    let theta1 = e1 + (p.beta + u1) * w3 - two * aw_h;
    let upsilon1 = inner_mass(&kpart.v, &kpart.u, two, p)
        + two * inner_mass(&kpart.v, &kpart.theta, T::one(), p);
    RegularityFunctionals {
        theta1,
        upsilon1,
        lambda1: theta1 + eps * upsilon1,
    }
}

/// Empirical continuous-dependence constant between two trajectories.
#[derive(Debug, Clone)]
pub struct GrowthReport<T> {
    /// max over sampled t > 0 of log(||zbar(t)|| / ||zbar(0)||) / t.
    pub empirical_c: T,
    /// max over sampled t of ||zbar(t)|| / ||zbar(0)||.
    pub max_ratio: T,
    pub samples: Vec<(T, T)>,
}

/// Simulate both states and report the worst exponential separation rate.
pub fn continuous_dependence_check<T: Scalar>(
    z1: &BeamState<T>,
    z2: &BeamState<T>,
    p: &ModelParams<T>,
    t_end: T,
    cfg: &crate::integrator::IntegratorConfig<T>,
) -> Result<GrowthReport<T>, T> {
    let d0 = z1.sub(z2)?.norm(p);
    if d0 == T::zero() {
        return Err(Error::ZeroSeparation);
    }
    let obs = crate::integrator::Observers {
        keep_states: true,
        ..Default::default()
    };
    let r1 = crate::integrator::simulate(z1, t_end, cfg, p, &obs)?;
    let r2 = crate::integrator::simulate(z2, t_end, cfg, p, &obs)?;
    let s1 = r1.states.as_ref().unwrap();
    let s2 = r2.states.as_ref().unwrap();
    let mut samples = Vec::with_capacity(s1.len());
    let mut empirical_c = T::neg_infinity();
    let mut max_ratio = T::zero();
    for (a, b) in s1.iter().zip(s2) {
        let t = a.t - z1.t;
        let ratio = a.sub(b)?.norm(p) / d0;
        samples.push((t, ratio));
        if ratio > max_ratio {
            max_ratio = ratio;
        }
        if t > T::zero() && ratio > T::zero() {
            let c = ratio.ln() / t;
            if c > empirical_c {
                empirical_c = c;
            }
        }
    }
    Ok(GrowthReport {
        empirical_c,
        max_ratio,
        samples,
    })
}
