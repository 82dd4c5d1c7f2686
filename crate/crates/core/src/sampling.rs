//! Deterministic ensemble sampling: random coefficient profiles with
//! quadratic spectral decay, rescaled to hit a target energy or phase-space
//! radius. A seeded generator fully determines the ensemble.

use rand::Rng;

use crate::model::{energy, BeamState, ModelParams};
use crate::scalar::{cast, Scalar};
use crate::spectral::SpectralField;

fn normal_pair<T: Scalar>(rng: &mut impl Rng) -> (T, T) {
    // Box-Muller on uniform doubles, converted into the scalar type
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let a = 2.0 * std::f64::consts::PI * u2;
    (cast(r * a.cos()), cast(r * a.sin()))
}

fn decay_profile<T: Scalar>(p: &ModelParams<T>, rng: &mut impl Rng) -> SpectralField<T> {
    let n = p.basis.len();
    let mut coeffs = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let (a, b) = normal_pair::<T>(rng);
        coeffs.push(a / cast::<T>(((i + 1) * (i + 1)) as f64));
        if i + 1 < n {
            coeffs.push(b / cast::<T>(((i + 2) * (i + 2)) as f64));
        }
        i += 2;
    }
    SpectralField::from_coeffs(&p.basis, coeffs).unwrap()
}

fn raw_state<T: Scalar>(p: &ModelParams<T>, rng: &mut impl Rng) -> BeamState<T> {
    BeamState {
        u: decay_profile(p, rng),
        v: decay_profile(p, rng),
        theta: decay_profile(p, rng),
        t: T::zero(),
    }
}

fn scaled<T: Scalar>(state: &BeamState<T>, c: T) -> BeamState<T> {
    BeamState {
        u: state.u.scaled(c),
        v: state.v.scaled(c),
        theta: state.theta.scaled(c),
        t: state.t,
    }
}

/// Draw a random smooth state and rescale it so its energy hits `target`.
/// Targets below the zero-state energy (a quarter of beta squared) are
/// unreachable; the zero state is returned for those.
pub fn sample_state_with_energy<T: Scalar>(
    p: &ModelParams<T>,
    target: T,
    rng: &mut impl Rng,
) -> BeamState<T> {
    let raw = raw_state(p, rng);
    let zero_energy = energy(&BeamState::zero(&p.basis), p);
    if target <= zero_energy {
        return BeamState::zero(&p.basis);
    }
    // bracket a scale with energy above the target, then bisect
    let mut hi = T::one();
    for _ in 0..200 {
        if energy(&scaled(&raw, hi), p) >= target {
            break;
        }
        hi = hi * cast::<T>(2.0);
    }
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) * cast::<T>(0.5);
        if energy(&scaled(&raw, mid), p) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    scaled(&raw, hi)
}

/// Draw a random smooth state scaled to the given phase-space norm.
pub fn sample_state_with_norm<T: Scalar>(
    p: &ModelParams<T>,
    radius: T,
    rng: &mut impl Rng,
) -> BeamState<T> {
    let raw = raw_state(p, rng);
    let norm = raw.norm(p);
    if norm == T::zero() || radius <= T::zero() {
        return BeamState::zero(&p.basis);
    }
    scaled(&raw, radius / norm)
}
