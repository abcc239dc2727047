//! Rate formulas, all evaluated as `ln β` so that the very large values
//! produced by the envelope routes stay representable.

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineBeta;
use crate::error::{Error, Result};
use crate::geometry::Envelope;
use crate::scalar::{count, lit, log_space, softplus, Real};

use super::Assumption;

/// Default `ε` grid `{0.05, 0.10, …, 0.95}`.
pub fn default_eps_grid<T: Real>() -> Vec<T> {
    (1..=19).map(|k| lit::<T>(0.05) * count::<T>(k)).collect()
}

/// Scalar functions used as `η`, `γ` and `θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case", bound = "T: Real")]
pub enum ScalarFn<T> {
    /// `coef·u^exp` (for `u ≥ 0`, zero below)
    Power { coef: T, exp: T },
    /// `coef·e^{rate·u}`
    Exp { coef: T, rate: T },
    Const { value: T },
}

impl<T: Real> ScalarFn<T> {
    pub fn identity() -> Self {
        ScalarFn::Power { coef: T::one(), exp: T::one() }
    }

    pub fn eval(&self, u: T) -> T {
        match *self {
            ScalarFn::Power { coef, exp } => coef * u.max(T::zero()).powf(exp),
            ScalarFn::Exp { coef, rate } => coef * (rate * u).exp(),
            ScalarFn::Const { value } => value,
        }
    }

    pub fn ln_eval(&self, u: T) -> T {
        match *self {
            ScalarFn::Power { coef, exp } => coef.ln() + exp * u.max(T::zero()).ln(),
            ScalarFn::Exp { coef, rate } => coef.ln() + rate * u,
            ScalarFn::Const { value } => value.ln(),
        }
    }

    /// Whether the function increases to `+∞`.
    pub fn is_increasing_unbounded(&self) -> bool {
        match *self {
            ScalarFn::Power { coef, exp } => coef > T::zero() && exp > T::zero(),
            ScalarFn::Exp { coef, rate } => coef > T::zero() && rate > T::zero(),
            ScalarFn::Const { .. } => false,
        }
    }

    /// `inf{u ≥ 0 : f(u) ≥ y}` by bisection.
    pub fn inverse(&self, y: T) -> T {
        if self.eval(T::zero()) >= y {
            return T::zero();
        }
        let mut hi = T::one();
        let mut guard = 0;
        while self.eval(hi) < y {
            hi = hi * lit(2.0);
            guard += 1;
            if guard > 2_000 || hi.is_infinite() {
                return T::infinity();
            }
        }
        let mut lo = T::zero();
        for _ in 0..2_000 {
            let mid = lo + (hi - lo) / lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// `ln α(s)` for the first envelope route:
/// `inf_ε (5/2ε)·β(εs/10 ∧ ε/16 ∧ 2(1−ε)/G(r))·e^{g(r)}` with
/// `r = Φ⁻¹(4b/ε ∨ 4/(sε))`, floored at the smallest admissible parameter.
pub fn ln_alpha_route_one<T: Real, E: Envelope<T> + ?Sized>(
    base: &BaselineBeta<T>,
    env: &E,
    b_const: T,
    eps_grid: &[T],
    s: T,
) -> T {
    if !(s > T::zero()) {
        return T::infinity();
    }
    let four = lit::<T>(4.0);
    eps_grid
        .iter()
        .map(|&eps| {
            let y = (four * b_const / eps).max(four / (s * eps));
            let r = env.phi_inverse(y).max(env.min_param());
            if !r.is_finite() {
                return T::infinity();
            }
            let big_g = env.big_g(r);
            let cap = if big_g > T::zero() { lit::<T>(2.0) * (T::one() - eps) / big_g } else { T::infinity() };
            let arg = (eps * s / lit(10.0)).min(eps / lit(16.0)).min(cap);
            (lit::<T>(5.0) / (lit::<T>(2.0) * eps)).ln() + base.ln_value(arg) + env.g(r)
        })
        .fold(T::infinity(), T::min)
}

pub fn alpha_route_one<T: Real, E: Envelope<T> + ?Sized>(
    base: &BaselineBeta<T>,
    env: &E,
    b_const: T,
    eps_grid: &[T],
    s: T,
) -> T {
    ln_alpha_route_one(base, env, b_const, eps_grid, s).exp()
}

/// Largest `s` at which the second route is evaluated; beyond it the
/// value at this point is used.
pub fn route_two_s_cap<T: Real>(b_const: T) -> T {
    if b_const > T::zero() {
        (lit::<T>(8.0) / b_const).sqrt()
    } else {
        T::infinity()
    }
}

/// `ln α(s)` for the second envelope route:
/// `2·e^{2H(r*)}·β((s/8)e^{−H(r*)})` with `r* = r0 ∨ Φ⁻¹(4/s ∨ bs/2)`.
pub fn ln_alpha_route_two<T: Real, E: Envelope<T> + ?Sized>(
    base: &BaselineBeta<T>,
    env: &E,
    b_const: T,
    r0: T,
    s: T,
) -> T {
    if !(s > T::zero()) {
        return T::infinity();
    }
    let s = s.min(route_two_s_cap(b_const));
    let y = (lit::<T>(4.0) / s).max(b_const * s / lit(2.0));
    let r = env.phi_inverse(y).max(r0);
    if !r.is_finite() {
        return T::infinity();
    }
    let h = env.osc(r);
    lit::<T>(2.0).ln() + lit::<T>(2.0) * h + base.ln_value_at_ln((s / lit(8.0)).ln() - h)
}

pub fn alpha_route_two<T: Real, E: Envelope<T> + ?Sized>(base: &BaselineBeta<T>, env: &E, b_const: T, r0: T, s: T) -> T {
    ln_alpha_route_two(base, env, b_const, r0, s).exp()
}

/// `ln α(s)` for the local-rate route. Plain mode: `β(Φ⁻¹(2/s), s/2)`.
/// Exact chaining: with `k(r) = 1 + b/Φ(r)`, the smallest `k·β(r, s/(2k))`
/// over `r = Φ⁻¹(2/s)` and the nodes of [`chaining_radii`] above it; any
/// such `r` satisfies `Φ(r) ≥ 2/s`, and the candidate set only grows with
/// `s`, so the rate is non-increasing.
pub fn ln_alpha_general<T: Real, E: Envelope<T> + ?Sized>(
    ln_beta_local: &dyn Fn(T, T) -> T,
    env: &E,
    b_const: T,
    s: T,
    exact_chaining: bool,
) -> T {
    if !(s > T::zero()) {
        return T::infinity();
    }
    let two = lit::<T>(2.0);
    let r_star = env.phi_inverse(two / s).max(env.min_param());
    if !r_star.is_finite() {
        return T::infinity();
    }
    if !exact_chaining || b_const == T::zero() {
        return ln_beta_local(r_star, s / two);
    }
    let at = |r: T| {
        let phi = env.phi(r);
        if !(phi > T::zero()) {
            return T::infinity();
        }
        let k = T::one() + b_const / phi;
        k.ln() + ln_beta_local(r, s / (two * k))
    };
    let hi = env.max_param();
    chaining_radii()
        .into_iter()
        .filter(|&r| r > r_star && r <= hi)
        .map(at)
        .fold(at(r_star), |a, b| if b < a { b } else { a })
}

/// Fixed radii tried by exact chaining: 16 per decade on `[1e−3, 1e6]`.
pub fn chaining_radii<T: Real>() -> Vec<T> {
    log_space(lit(1e-3), lit(1e6), 145)
}

pub fn alpha_general<T: Real, E: Envelope<T> + ?Sized>(
    ln_beta_local: &dyn Fn(T, T) -> T,
    env: &E,
    b_const: T,
    s: T,
    exact_chaining: bool,
) -> T {
    ln_alpha_general(ln_beta_local, env, b_const, s, exact_chaining).exp()
}

/// Which intermediate form of the log-density theorem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogDensityVariant {
    /// Gradient bound `|∇V| ≤ γ(V)`.
    Gradient,
    /// Hessian bound `|∂²V| ≤ θ(V)`.
    Hessian,
}

impl LogDensityVariant {
    pub fn from_index(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Self::Gradient),
            2 => Ok(Self::Hessian),
            _ => Err(Error::InvalidArgument(format!("log-density variant must be 1 or 2, got {k}"))),
        }
    }
}

/// `ln β(s)`, with `u = η⁻¹(c/s)`:
/// variant 1 `C(1 + e^u γⁿ(u))`, variant 2 `C(1 + θⁿ(u) s^{−n/2} e^{(n+4)u/2})`.
pub fn ln_beta_logdensity<T: Real>(
    variant: LogDensityVariant,
    eta: &ScalarFn<T>,
    shape: &ScalarFn<T>,
    n: usize,
    c: T,
    big_c: T,
    s: T,
) -> T {
    if !(s > T::zero()) {
        return T::infinity();
    }
    let u = eta.inverse(c / s);
    if !u.is_finite() {
        return T::infinity();
    }
    let nf = count::<T>(n);
    let inner = match variant {
        LogDensityVariant::Gradient => u + nf * shape.ln_eval(u),
        LogDensityVariant::Hessian => {
            nf * shape.ln_eval(u) - nf / lit(2.0) * s.ln() + (nf + lit(4.0)) * u / lit(2.0)
        }
    };
    big_c.ln() + softplus(inner)
}

pub fn beta_logdensity<T: Real>(
    variant: LogDensityVariant,
    eta: &ScalarFn<T>,
    shape: &ScalarFn<T>,
    n: usize,
    c: T,
    big_c: T,
    s: T,
) -> T {
    ln_beta_logdensity(variant, eta, shape, n, c, big_c, s).exp()
}

/// Premises each curvature case requires.
pub fn distance_case_premises(case: u8) -> &'static [&'static str] {
    match case {
        1 => &["curvature_nonneg", "growth_lemma", "lower_growth"],
        2 => &["curvature_nonneg", "growth_lemma", "lower_growth", "upper_growth"],
        3 => &["curvature_nonpos", "growth_lemma", "quadratic_dominance"],
        4 => &["curvature_nonpos", "growth_lemma", "lower_growth", "upper_growth"],
        _ => &[],
    }
}

/// Exponent `p` of `β(s) = C e^{c s^{−p}}` for each curvature case.
pub fn distance_exponent<T: Real>(case: u8, b: T, b_prime: T) -> Result<T> {
    if !(b > T::one()) {
        return Err(Error::InvalidArgument(format!("growth exponent b must exceed 1, got {b}")));
    }
    match case {
        1 => Ok(b / (lit::<T>(2.0) * (b - T::one()).min(T::one()))),
        2 | 4 => {
            if !(b_prime >= b) {
                return Err(Error::InvalidArgument(format!("need b' >= b, got b'={b_prime} b={b}")));
            }
            Ok(b_prime / (b_prime + b - lit(2.0)))
        }
        3 => Ok(T::one()),
        _ => Err(Error::InvalidArgument(format!("curvature case must be 1..4, got {case}"))),
    }
}

/// `ln β(s) = ln C + c s^{−p}` for the curvature cases, after checking that
/// every premise of the case is recorded and holds.
pub fn ln_beta_distance<T: Real>(
    case: u8,
    b: T,
    b_prime: T,
    c: T,
    big_c: T,
    s: T,
    assumptions: &[Assumption<T>],
) -> Result<T> {
    require_premises(case, assumptions)?;
    let p = distance_exponent(case, b, b_prime)?;
    Ok(closed_form_ln(big_c.ln(), T::zero(), c, p, s))
}

pub fn beta_distance<T: Real>(
    case: u8,
    b: T,
    b_prime: T,
    c: T,
    big_c: T,
    s: T,
    assumptions: &[Assumption<T>],
) -> Result<T> {
    ln_beta_distance(case, b, b_prime, c, big_c, s, assumptions).map(T::exp)
}

pub(crate) fn require_premises<T: Real>(case: u8, assumptions: &[Assumption<T>]) -> Result<()> {
    let needed = distance_case_premises(case);
    if needed.is_empty() {
        return Err(Error::InvalidArgument(format!("curvature case must be 1..4, got {case}")));
    }
    for name in needed {
        match assumptions.iter().find(|a| a.name == *name) {
            Some(a) if a.holds => {}
            Some(_) => return Err(Error::CasePremiseUnchecked(format!("{name} does not hold"))),
            None => return Err(Error::CasePremiseUnchecked(format!("{name} missing"))),
        }
    }
    Ok(())
}

/// `ln C + k ln(1/s) + c s^{−p}`.
pub(crate) fn closed_form_ln<T: Real>(ln_c: T, k: T, c: T, p: T, s: T) -> T {
    if !(s > T::zero()) {
        return T::infinity();
    }
    let tail = if c == T::zero() { T::zero() } else { c * s.powf(-p) };
    ln_c - k * s.ln() + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FnProfile, GeometryProfile, SetFamily};
    use crate::lyapunov::PhiShape;
    use crate::potential::PotentialSpec;
    use std::f64::consts::E;

    fn gauss_env() -> GeometryProfile<f64> {
        let spec = PotentialSpec::<f64>::gaussian(0.5, 1).unwrap();
        GeometryProfile::from_parts(spec.radial().clone(), PhiShape::RadialPower { coef: 0.125, p: 2.0 }, SetFamily::balls(), 2.0)
    }

    #[test]
    fn route_one_singleton_matches_hand_evaluation() {
        let env = gauss_env();
        let base = BaselineBeta::lebesgue(1);
        // ε = 1/2, s = 1: r = Φ⁻¹(8) = 8, g = 50, G = 100, argument 0.01
        let got = ln_alpha_route_one(&base, &env, 0.5, &[0.5], 1.0);
        let want = 5.0f64.ln() + (-0.5) * (4.0 * std::f64::consts::PI * 0.01).ln() + 50.0;
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn route_one_refinement_never_increases() {
        let env = gauss_env();
        let base = BaselineBeta::lebesgue(1);
        let coarse: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        let fine = default_eps_grid::<f64>();
        let mut union = coarse.clone();
        union.extend(fine.iter().copied());
        for s in [0.01, 0.1, 1.0] {
            assert!(ln_alpha_route_one(&base, &env, 0.5, &union, s) <= ln_alpha_route_one(&base, &env, 0.5, &coarse, s));
        }
    }

    #[test]
    fn route_two_hand_chain() {
        let env = gauss_env();
        let base = BaselineBeta::lebesgue(1);
        let r = 32f64.sqrt();
        let h = (r + 2.0) * (r + 2.0) / 2.0;
        let want = 2f64.ln() + 2.0 * h + base.ln_value(0.125 * (-h).exp());
        let got = ln_alpha_route_two(&base, &env, 0.5, 2.0, 1.0);
        assert!((got - want).abs() < 1e-9 * want, "{got} vs {want}");
    }

    #[test]
    fn route_two_flat_stub() {
        let flat = FnProfile::flat(|r: f64| r * r);
        let base = BaselineBeta::lebesgue(1);
        for s in [0.1, 1.0, 3.0] {
            let got = alpha_route_two(&base, &flat, 0.0, 0.0, s);
            let want = 2.0 * base.value(s / 8.0);
            assert!((got - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn general_modes() {
        let env = FnProfile::flat(|r: f64| r / 2.0);
        let local = |r: f64, s: f64| r - 0.5 * s.ln();
        let plain = alpha_general(&local, &env, 0.0, 1.0, false);
        assert!((plain - E.powi(4) * 0.5f64.powf(-0.5)).abs() < 1e-9);
        assert_eq!(plain, alpha_general(&local, &env, 0.0, 1.0, true));
        assert!(alpha_general(&local, &env, 0.7, 1.0, true) >= alpha_general(&local, &env, 0.7, 1.0, false));
        let lebesgue = |_: f64, t: f64| crate::baseline::lebesgue_ln_beta(1, t);
        let steep = FnProfile::flat(|r: f64| r * r / 8.0);
        let vals: Vec<f64> =
            log_space(1e-3, 1e3, 200).into_iter().map(|s| ln_alpha_general(&lebesgue, &steep, 0.5, s, true)).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn logdensity_examples() {
        let id = ScalarFn::<f64>::identity();
        let one = ScalarFn::Const { value: 1.0 };
        let v1 = beta_logdensity(LogDensityVariant::Gradient, &id, &one, 1, 1.0, 1.0, 1.0);
        assert!((v1 - (1.0 + E)).abs() < 1e-12);
        let v2 = beta_logdensity(LogDensityVariant::Hessian, &id, &one, 1, 1.0, 1.0, 1.0);
        assert!((v2 - (1.0 + E.powf(2.5))).abs() < 1e-12);
    }

    #[test]
    fn distance_exponents() {
        assert_eq!(distance_exponent(1, 2.0, 2.0).unwrap(), 1.0);
        assert_eq!(distance_exponent(1, 1.5, 1.5).unwrap(), 1.5);
        assert_eq!(distance_exponent(3, 4.0, 4.0).unwrap(), 1.0);
        assert!((distance_exponent(2, 2.0f64, 4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(distance_exponent(2, 3.0, 2.0).is_err());
    }

    #[test]
    fn distance_requires_premises() {
        let err = beta_distance(3, 2.0, 2.0, 1.0, 1.0, 0.5, &[]);
        assert!(matches!(err, Err(Error::CasePremiseUnchecked(_))));
        let ok: Vec<Assumption<f64>> =
            distance_case_premises(3).iter().map(|n| Assumption::checked(n, true)).collect();
        let v = beta_distance(3, 2.0, 2.0, 1.0, 1.0, 0.5, &ok).unwrap();
        assert!((v - E.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn eta_inverse_is_generalized() {
        let eta = ScalarFn::Power { coef: 1.0f64, exp: 1.5 };
        let u = eta.inverse(8.0);
        assert!((u - 4.0).abs() < 1e-12);
        assert!(eta.eval(u) >= 8.0);
    }
}
