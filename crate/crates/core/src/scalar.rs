use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating point type the closed-form kernel is written against.
pub trait Scalar: Float + FromPrimitive + NumCast + Debug + Send + Sync + 'static {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal fits the scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub fn ln_gamma<T: Scalar>(x: T) -> T {
    let v = x.to_f64().expect("finite scalar");
    T::lit(statrs::function::gamma::ln_gamma(v))
}

/// s-volume of the unit ball of R^{d+1}, i.e. the integral of (1 - |x|²)^{s/2} over B^d.
pub fn kappa_s<T: Scalar>(d: usize, s: T) -> T {
    let half = T::lit(0.5);
    let dd = T::lit(d as f64);
    let log = dd * half * T::lit(std::f64::consts::PI).ln() + ln_gamma(s * half + T::one()) - ln_gamma(s * half + dd * half + T::one());
    log.exp()
}

/// κ_s α^s det A, evaluated on the log scale.
pub fn s_volume_formula<T: Scalar>(d: usize, s: T, alpha: T, det_a: T) -> T {
    (kappa_s(d, s).ln() + s * alpha.ln() + det_a.ln()).exp()
}

/// Height α√(1-q) for the squared normalized radius q, zero outside the domain.
pub fn height_from_q<T: Scalar>(alpha: T, q: T) -> T {
    if q >= T::one() {
        T::zero()
    } else {
        alpha * (T::one() - q).sqrt()
    }
}

/// Tail bound w^s exp(-(s/w²)⟨u, x-u⟩) with w² = 1-|u|², given |u|² and ⟨u, x-u⟩.
pub fn tangent_tail_scalar<T: Scalar>(u_norm2: T, s: T, inner: T) -> T {
    let w2 = T::one() - u_norm2;
    (s * T::lit(0.5) * w2.ln() - s / w2 * inner).exp()
}

/// φ_s(ρ) = max_{0≤r<1} rρ + (s/2)log(1-r²) with its first two derivatives.
///
/// The maximizer is r* = 2ρ/(s + √(s²+4ρ²)) and φ' = r*.
pub fn lift_profile<T: Scalar>(s: T, rho: T) -> (T, T, T) {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let disc = (s * s + four * rho * rho).sqrt();
    let r = two * rho / (s + disc);
    // 1 - r computed without cancellation
    let one_minus_r = (s + s * s / (disc + two * rho)) / (s + disc);
    let one_minus_r2 = one_minus_r * (T::one() + r);
    let phi = r * rho + s * T::lit(0.5) * one_minus_r2.ln();
    let dr = two * s / (disc * (s + disc));
    (phi, r, dr)
}
