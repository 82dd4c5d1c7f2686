//! Standalone verifiers for the two differential-inequality lemmas the
//! asymptotic estimates lean on: the superlinear absorbing-level lemma and
//! the exponential-decay lemma with an integrally-bounded coefficient. Both
//! work on synthetic scalar data and on functional series extracted from
//! simulations.

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};

/// Verdict of one inequality check on a time grid.
#[derive(Debug, Clone, Copy)]
pub struct InequalityReport<T> {
    pub satisfied: bool,
    pub first_violation_time: Option<T>,
    /// Minimal slack (negative when violated).
    pub margin: T,
}

impl<T: Scalar> InequalityReport<T> {
    fn from_scan(margin: T, first_violation_time: Option<T>) -> Self {
        Self {
            satisfied: first_violation_time.is_none(),
            first_violation_time,
            margin,
        }
    }
}

/// Source term for the superlinear comparison problem.
#[derive(Debug, Clone)]
pub enum PhiInput<T> {
    Constant(T),
    /// Linear interpolation, clamped outside the table.
    Series { times: Vec<T>, values: Vec<T> },
}

impl<T: Scalar> PhiInput<T> {
    fn eval(&self, t: T) -> T {
        match self {
            PhiInput::Constant(q) => *q,
            PhiInput::Series { times, values } => {
                if times.is_empty() {
                    return T::zero();
                }
                if t <= times[0] {
                    return values[0];
                }
                if t >= *times.last().unwrap() {
                    return *values.last().unwrap();
                }
                let k = times.partition_point(|&tk| tk <= t) - 1;
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                values[k] + (values[k + 1] - values[k]) * w
            }
        }
    }
}

/// Result of integrating the worst-case superlinear comparison problem
///   Lambda' = -eps Lambda + K eps^2 Lambda^{3/2} + eps^{-2/3} phi(t),
/// with eps picked adaptively as min(eps0, 1/(2 K sqrt(Lambda))) so the
/// dissipative term dominates the superlinear one at the current level.
#[derive(Debug, Clone)]
pub struct SuperlinearReport<T> {
    /// A finite absorbing level was reached and kept until the horizon.
    pub absorbed: bool,
    pub blew_up: bool,
    /// Empirical absorbing level (twice the tail maximum).
    pub r1_emp: T,
    /// First time after which the trajectory stays at or below `r1_emp`.
    pub entering_time: T,
    pub final_value: T,
    /// Comparison trajectory, decimated for reporting.
    pub trajectory: Vec<(T, T)>,
}

const ODE_DT: f64 = 1e-4;
const BLOWUP: f64 = 1e12;

/// Integrate the worst-case comparison problem and report the empirical
/// absorbing level and entering time. Uses the default level-adaptive
/// epsilon schedule; [`verify_superlinear_with_schedule`] accepts any other.
pub fn verify_superlinear<T: Scalar>(
    k_coef: T,
    q: T,
    eps0: T,
    lambda0: T,
    phi: &PhiInput<T>,
    horizon: T,
) -> Result<SuperlinearReport<T>, T> {
    let eps_of = move |lam: T| -> T {
        if k_coef == T::zero() || lam <= T::zero() {
            eps0
        } else {
            eps0.min(T::one() / (cast::<T>(2.0) * k_coef * lam.sqrt()))
        }
    };
    verify_superlinear_with_schedule(k_coef, q, eps0, lambda0, phi, horizon, eps_of)
}

/// Same comparison run with a caller-supplied epsilon schedule (a map from
/// the current level to the epsilon used in the inequality).
pub fn verify_superlinear_with_schedule<T: Scalar>(
    k_coef: T,
    q: T,
    eps0: T,
    lambda0: T,
    phi: &PhiInput<T>,
    horizon: T,
    schedule: impl Fn(T) -> T,
) -> Result<SuperlinearReport<T>, T> {
    if k_coef < T::zero() || q < T::zero() {
        return Err(Error::InvalidParameter {
            what: "K and Q must be nonnegative".into(),
        });
    }
    if !(eps0 > T::zero()) {
        return Err(Error::InvalidParameter {
            what: "eps0 must be positive".into(),
        });
    }
    if lambda0 < T::zero() {
        return Err(Error::InvalidParameter {
            what: "Lambda(0) must be nonnegative".into(),
        });
    }
    if !(horizon > T::zero()) {
        return Err(Error::InvalidParameter {
            what: "horizon must be positive".into(),
        });
    }

    let dt = cast::<T>(ODE_DT);
    let n = (horizon / dt).ceil().to_usize().unwrap_or(1).max(1);
    let rate = |t: T, lam: T| -> T {
        let lam = lam.max(T::zero());
        let eps = schedule(lam).min(eps0).max(T::min_positive_value());
        -eps * lam
            + k_coef * eps * eps * lam.powf(cast::<T>(1.5))
            + eps.powf(cast::<T>(-2.0 / 3.0)) * phi.eval(t)
    };

    let integrate = |lambda_start: T| -> (Vec<(T, T)>, Vec<T>, bool) {
        let keep_every = (n / 2000).max(1);
        let mut lam = lambda_start;
        let mut t = T::zero();
        let mut traj = vec![(t, lam)];
        let mut values = Vec::with_capacity(n + 1);
        values.push(lam);
        let mut blew_up = false;
        for i in 0..n {
            let half = cast::<T>(0.5);
            let k1 = rate(t, lam);
            let k2 = rate(t + half * dt, lam + half * dt * k1);
            let k3 = rate(t + half * dt, lam + half * dt * k2);
            let k4 = rate(t + dt, lam + dt * k3);
            lam = lam + dt / cast::<T>(6.0) * (k1 + cast::<T>(2.0) * (k2 + k3) + k4);
            lam = lam.max(T::zero());
            t = dt * cast::<T>((i + 1) as f64);
            values.push(lam);
            if !lam.is_finite() || lam > cast::<T>(BLOWUP) {
                blew_up = true;
                break;
            }
            if (i + 1) % keep_every == 0 {
                traj.push((t, lam));
            }
        }
        (traj, values, blew_up)
    };

    // pilot from zero data fixes a level that does not depend on Lambda(0),
    // so entering times across initial values refer to one common target
    let (_, pilot_values, pilot_blew_up) = integrate(T::zero());
    let (traj, values, blew_up) = integrate(lambda0);
    if blew_up || pilot_blew_up {
        return Ok(SuperlinearReport {
            absorbed: false,
            blew_up: true,
            r1_emp: T::infinity(),
            entering_time: T::infinity(),
            final_value: *values.last().unwrap(),
            trajectory: traj,
        });
    }
    let tail_start = pilot_values.len() - pilot_values.len() / 4 - 1;
    let tail_max = pilot_values[tail_start..]
        .iter()
        .copied()
        .fold(T::zero(), |m, x| if x > m { x } else { m });
    let r1_emp = cast::<T>(2.0) * tail_max + T::min_positive_value();
    let mut last_exceed: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v > r1_emp {
            last_exceed = Some(i);
        }
    }
    let entering_idx = last_exceed.map_or(0, |i| i + 1);
    let entering_time = dt * cast::<T>(entering_idx as f64);
    let absorbed = entering_idx < values.len();
    Ok(SuperlinearReport {
        absorbed,
        blew_up: false,
        r1_emp,
        entering_time,
        final_value: *values.last().unwrap(),
        trajectory: traj,
    })
}

/// Entering times of the comparison problem across initial levels, for the
/// growth-trend comparison.
pub fn superlinear_entering_times<T: Scalar>(
    k_coef: T,
    q: T,
    eps0: T,
    lambda0_list: &[T],
    phi: &PhiInput<T>,
    horizon: T,
) -> Result<Vec<(T, T)>, T> {
    lambda0_list
        .iter()
        .map(|&l0| {
            verify_superlinear(k_coef, q, eps0, l0, phi, horizon)
                .map(|r| (l0, r.entering_time))
        })
        .collect()
}

/// Closed-form solution of the K = 0, constant-phi comparison problem.
pub fn superlinear_linear_closed_form<T: Scalar>(eps0: T, q: T, lambda0: T, t: T) -> T {
    let level = q * eps0.powf(cast::<T>(-5.0 / 3.0));
    level + (lambda0 - level) * (-eps0 * t).exp()
}

/// Both sides of the exponential lemma on a common grid: the hypothesis
/// int_s^t psi <= nu (t - s) + K for all grid pairs, and the conclusion
/// Lambda(t) <= e^K Lambda(0) e^{-nu (t - t0)} pointwise.
#[derive(Debug, Clone)]
pub struct ExponentialCheck<T> {
    pub hypothesis: InequalityReport<T>,
    pub conclusion: InequalityReport<T>,
}

pub fn verify_exponential<T: Scalar>(
    times: &[T],
    lambda: &[T],
    psi: &[T],
    nu: T,
    k: T,
) -> Result<ExponentialCheck<T>, T> {
    if times.len() != lambda.len() || times.len() != psi.len() {
        return Err(Error::GridMismatch);
    }
    if times.len() < 2 {
        return Err(Error::SeriesTooShort { len: times.len() });
    }
    if !(nu > T::zero()) || k < T::zero() {
        return Err(Error::InvalidParameter {
            what: "nu must be positive and K nonnegative".into(),
        });
    }

    // prefix trapezoid integrals of psi
    let m = times.len();
    let mut prefix = vec![T::zero(); m];
    let half = cast::<T>(0.5);
    for i in 1..m {
        prefix[i] =
            prefix[i - 1] + half * (times[i] - times[i - 1]) * (psi[i] + psi[i - 1]);
    }
    let mut hyp_margin = T::infinity();
    let mut hyp_violation: Option<T> = None;
    'outer: for j in 1..m {
        for i in 0..j {
            let integral = prefix[j] - prefix[i];
            let slack = nu * (times[j] - times[i]) + k - integral;
            if slack < hyp_margin {
                hyp_margin = slack;
            }
            if slack < T::zero() {
                hyp_violation = Some(times[j]);
                break 'outer;
            }
        }
    }

    let mut con_margin = T::infinity();
    let mut con_violation: Option<T> = None;
    let bound0 = k.exp() * lambda[0];
    for j in 0..m {
        let bound = bound0 * (-nu * (times[j] - times[0])).exp();
        let slack = bound - lambda[j];
        if slack < con_margin {
            con_margin = slack;
        }
        if slack < T::zero() && con_violation.is_none() {
            con_violation = Some(times[j]);
        }
    }

    Ok(ExponentialCheck {
        hypothesis: InequalityReport::from_scan(hyp_margin, hyp_violation),
        conclusion: InequalityReport::from_scan(con_margin, con_violation),
    })
}
