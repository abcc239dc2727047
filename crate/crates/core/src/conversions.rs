//! Dictionary between super-Poincaré rates and F-Sobolev functions:
//! `ξ(t) = sup_u (1/u − β(u)/(ut))`, `F(u) = (C1/u)∫₀ᵘ ξ(t/2)dt − C2`,
//! and back `β(u) = C1·F⁻¹(C2(1 + 1/u))`.
//!
//! Rates of log-Sobolev type are `e^{c/u}`, so everything runs on
//! logarithms: `ln β`, `ln t` and `ln v` for the argument of `F`.

use serde::{Deserialize, Serialize};

use crate::certificates::{RateEvaluator, RateFunction};
use crate::error::{Error, Result};
use crate::scalar::{lit, log_space, Real};

/// Something that yields `ln β(u)`.
pub trait LnRate<T> {
    fn ln_beta(&self, u: T) -> T;
}

impl<T: Real, F: Fn(T) -> T> LnRate<T> for F {
    fn ln_beta(&self, u: T) -> T {
        self(u)
    }
}

impl<T: Real> LnRate<T> for RateFunction<T> {
    fn ln_beta(&self, u: T) -> T {
        self.ln_value(u)
    }
}

impl<T: Real> LnRate<T> for RateEvaluator<'_, T> {
    fn ln_beta(&self, u: T) -> T {
        self.ln_value(u)
    }
}

/// Log-spaced grid over which the supremum in `ξ` is taken.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UGrid<T> {
    pub lo: T,
    pub hi: T,
    pub points: usize,
}

impl<T: Real> Default for UGrid<T> {
    fn default() -> Self {
        Self { lo: lit(1e-12), hi: lit(1e12), points: 481 }
    }
}

fn xi_integrand<T: Real>(beta: &impl LnRate<T>, ln_t: T, u: T) -> T {
    let v = (T::one() - (beta.ln_beta(u) - ln_t).exp()) / u;
    if v.is_nan() {
        T::neg_infinity()
    } else {
        v
    }
}

/// `ξ(e^{ln_t})`: grid supremum with golden-section refinement; 0 when
/// the integrand is never positive, `+∞` when it still grows at the lower
/// end of the grid.
pub fn xi_at_ln<T: Real>(beta: &impl LnRate<T>, ln_t: T, grid: &UGrid<T>) -> T {
    let us = log_space(grid.lo, grid.hi, grid.points);
    let vals: Vec<T> = us.iter().map(|&u| xi_integrand(beta, ln_t, u)).collect();
    let (idx, best) = vals.iter().copied().enumerate().fold((0, T::neg_infinity()), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if !(best > T::zero()) {
        return T::zero();
    }
    if idx == 0 {
        return T::infinity();
    }
    let mut a = us[idx - 1].ln();
    let mut b = us[(idx + 1).min(us.len() - 1)].ln();
    let f = |x: T| xi_integrand(beta, ln_t, x.exp());
    let g = (lit::<T>(5.0).sqrt() - T::one()) / lit(2.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    best.max(fc).max(fd)
}

/// `ξ(t)`.
pub fn xi_from_beta<T: Real>(beta: &impl LnRate<T>, t: T, grid: &UGrid<T>) -> T {
    if !(t > T::zero()) {
        return T::zero();
    }
    xi_at_ln(beta, t.ln(), grid)
}

/// Width in `ln t` of the integration range below `u`; the omitted part
/// `∫₀^{u e^{−W}} ξ(t/2)dt` is dropped, which only lowers `F`.
const LN_WINDOW: f64 = 50.0;

struct Simpson<'a, T, B> {
    beta: &'a B,
    grid: &'a UGrid<T>,
    ln_u: T,
    tol: T,
}

impl<T: Real, B: LnRate<T>> Simpson<'_, T, B> {
    /// `ξ(e^{x}/2)·e^{x − ln u}`: integrand in `x = ln t`.
    fn h(&self, x: T) -> Result<T> {
        let xi = xi_at_ln(self.beta, x - lit::<T>(2.0).ln(), self.grid);
        if xi.is_infinite() {
            return Err(Error::XiDiverges { t: x.exp().to_f64().unwrap_or(f64::INFINITY) });
        }
        Ok(xi * (x - self.ln_u).exp())
    }

    fn rule(a: T, fa: T, fm: T, b: T, fb: T) -> T {
        (b - a) / lit(6.0) * (fa + lit::<T>(4.0) * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn adapt(&self, a: T, fa: T, m: T, fm: T, b: T, fb: T, whole: T, depth: u32) -> Result<T> {
        let two = lit::<T>(2.0);
        let (lm, rm) = ((a + m) / two, (m + b) / two);
        let (flm, frm) = (self.h(lm)?, self.h(rm)?);
        let left = Self::rule(a, fa, flm, m, fm);
        let right = Self::rule(m, fm, frm, b, fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= lit::<T>(15.0) * self.tol {
            return Ok(left + right + diff / lit(15.0));
        }
        Ok(self.adapt(a, fa, lm, flm, m, fm, left, depth - 1)? + self.adapt(m, fm, rm, frm, b, fb, right, depth - 1)?)
    }
}

/// `F(e^{ln_u})`.
pub fn fsob_at_ln<T: Real, B: LnRate<T>>(beta: &B, c1: T, c2: T, ln_u: T, grid: &UGrid<T>) -> Result<T> {
    if c1 == T::zero() {
        return Ok(-c2);
    }
    let a = ln_u - lit(LN_WINDOW);
    let b = ln_u;
    let mut s = Simpson { beta, grid, ln_u, tol: T::zero() };
    s.tol = lit::<T>(1e-10) * s.h(b)?.abs().max(lit(1e-3));
    // fixed panels first so that narrow features are not skipped
    let pieces = 16;
    let mut total = T::zero();
    let width = (b - a) / lit(pieces as f64);
    for k in 0..pieces {
        let lo = a + width * lit(k as f64);
        let hi = lo + width;
        let mid = (lo + hi) / lit(2.0);
        let (flo, fmid, fhi) = (s.h(lo)?, s.h(mid)?, s.h(hi)?);
        let w = Simpson::<T, B>::rule(lo, flo, fmid, hi, fhi);
        total = total + s.adapt(lo, flo, mid, fmid, hi, fhi, w, 24)?;
    }
    Ok(c1 * total - c2)
}

/// `F(u) = (C1/u)∫₀ᵘ ξ(t/2)dt − C2`.
pub fn fsob_from_beta<T: Real>(beta: &impl LnRate<T>, c1: T, c2: T, u: T) -> Result<T> {
    if !(u > T::zero()) {
        return Err(Error::InvalidArgument(format!("F needs u > 0, got {u}")));
    }
    fsob_at_ln(beta, c1, c2, u.ln(), &UGrid::default())
}

/// Shape of an F-Sobolev function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", bound = "T: Real")]
pub enum FForm<T: Real> {
    /// `log₊^α(u)`.
    LogPower { alpha: T },
    /// `F(u) = u`.
    Linear,
    /// `F` obtained from a rate.
    FromBeta { rate: RateFunction<T>, c1: T, c2: T },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FSobDescriptor<T: Real> {
    pub form: FForm<T>,
    /// Constants of the inequality `μ(f²F(f²)) ≤ c1·E(f,f) + c2`.
    pub c1: T,
    pub c2: T,
    /// `F` is non-decreasing on `[u_star, ∞)`.
    pub u_star: T,
    pub exponent_tag: Option<T>,
}

impl<T: Real> FSobDescriptor<T> {
    pub fn log_power(alpha: T) -> Self {
        Self { form: FForm::LogPower { alpha }, c1: T::one(), c2: T::one(), u_star: T::one(), exponent_tag: Some(alpha) }
    }

    pub fn linear() -> Self {
        Self { form: FForm::Linear, c1: T::one(), c2: T::one(), u_star: T::zero(), exponent_tag: None }
    }

    pub fn from_beta(rate: RateFunction<T>, c1: T, c2: T) -> Self {
        Self { form: FForm::FromBeta { rate, c1, c2 }, c1, c2, u_star: T::one(), exponent_tag: None }
    }

    /// `F(e^{ln_v})`.
    pub fn eval_ln(&self, ln_v: T) -> Result<T> {
        match &self.form {
            FForm::LogPower { alpha } => Ok(ln_v.max(T::zero()).powf(*alpha)),
            FForm::Linear => Ok(ln_v.exp()),
            FForm::FromBeta { rate, c1, c2 } => fsob_at_ln(&rate.evaluator(), *c1, *c2, ln_v, &UGrid::default()),
        }
    }

    pub fn eval(&self, v: T) -> Result<T> {
        self.eval_ln(v.ln())
    }

    /// `ln F⁻¹(y)`, the generalized inverse on `[u_star, ∞)`.
    pub fn inverse_ln(&self, y: T) -> Result<T> {
        match &self.form {
            FForm::FromBeta { rate, c1, c2 } => {
                let eval = rate.evaluator();
                let f = |x: T| fsob_at_ln(&eval, *c1, *c2, x, &UGrid::default());
                invert_ln(f, self.u_star, y)
            }
            _ => invert_ln(|x| self.eval_ln(x), self.u_star, y),
        }
    }
}

fn invert_ln<T: Real>(f: impl Fn(T) -> Result<T>, u_star: T, y: T) -> Result<T> {
    let lo0 = if u_star > T::zero() { u_star.ln() } else { lit(-700.0) };
    let floor = f(lo0)?;
    if y < floor {
        return Err(Error::NotInvertible {
            target: y.to_f64().unwrap_or(f64::NAN),
            floor: floor.to_f64().unwrap_or(f64::NAN),
        });
    }
    if floor >= y {
        return Ok(lo0);
    }
    let mut step = T::one();
    let mut hi = lo0 + step;
    while f(hi)? < y {
        step = step * lit(2.0);
        hi = lo0 + step;
        if step > lit(1e7) {
            return Ok(T::infinity());
        }
    }
    let mut lo = lo0;
    let tol = lit::<T>(1e-12);
    for _ in 0..200 {
        if hi - lo <= tol * hi.abs().max(T::one()) {
            break;
        }
        let mid = (lo + hi) / lit(2.0);
        if f(mid)? >= y {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `ln β(u) = ln C1 + ln F⁻¹(C2(1 + 1/u))`.
pub fn ln_beta_from_fsob<T: Real>(f: &FSobDescriptor<T>, c1: T, c2: T, u: T) -> Result<T> {
    if !(u > T::zero()) {
        return Err(Error::InvalidArgument(format!("beta needs u > 0, got {u}")));
    }
    Ok(c1.ln() + f.inverse_ln(c2 * (T::one() + T::one() / u))?)
}

/// `β(u) = C1·F⁻¹(C2(1 + 1/u))`.
pub fn beta_from_fsob<T: Real>(f: &FSobDescriptor<T>, c1: T, c2: T, u: T) -> Result<T> {
    ln_beta_from_fsob(f, c1, c2, u).map(T::exp)
}

/// Result of fitting `β(u) = c·e^{c′/u}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DlsiReport<T> {
    pub is_dlsi: bool,
    pub c: T,
    pub c_prime: T,
    /// `max |ln β − fit| / max(max |ln β|, 1)`.
    pub residual: T,
    /// `c′ = 0`: a constant rate.
    pub degenerate: bool,
}

/// Default residual threshold for [`detect_dlsi`].
pub const DLSI_THRESHOLD: f64 = 0.05;

/// Least-squares fit of `ln β` against `1/u` from `(u, ln β)` samples.
pub fn detect_dlsi_ln<T: Real>(samples: &[(T, T)], threshold: T) -> Result<DlsiReport<T>> {
    if samples.len() < 8 {
        return Err(Error::InvalidArgument(format!("need at least 8 samples, got {}", samples.len())));
    }
    let (umin, umax) = samples.iter().fold((T::infinity(), T::zero()), |(a, b), (u, _)| (a.min(*u), b.max(*u)));
    if !(umax >= lit::<T>(100.0) * umin) || !(umin > T::zero()) {
        return Err(Error::InvalidArgument("samples must span two decades of u".into()));
    }
    if samples.iter().any(|(_, y)| !y.is_finite()) {
        return Ok(DlsiReport { is_dlsi: false, c: T::nan(), c_prime: T::nan(), residual: T::infinity(), degenerate: false });
    }
    let n = lit::<T>(samples.len() as f64);
    let mx = samples.iter().map(|(u, _)| T::one() / *u).sum::<T>() / n;
    let my = samples.iter().map(|(_, y)| *y).sum::<T>() / n;
    let sxy: T = samples.iter().map(|(u, y)| (T::one() / *u - mx) * (*y - my)).sum();
    let sxx: T = samples.iter().map(|(u, _)| (T::one() / *u - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let scale = samples.iter().map(|(_, y)| y.abs()).fold(T::one(), T::max);
    let resid = samples.iter().map(|(u, y)| (*y - icpt - slope / *u).abs()).fold(T::zero(), T::max) / scale;
    let degenerate = slope.abs() <= lit::<T>(1e-12) * scale;
    let c_prime = if degenerate { T::zero() } else { slope };
    Ok(DlsiReport { is_dlsi: resid < threshold && c_prime >= T::zero(), c: icpt.exp(), c_prime, residual: resid, degenerate })
}

/// [`detect_dlsi_ln`] on `(u, β)` samples with the default threshold.
pub fn detect_dlsi<T: Real>(samples: &[(T, T)]) -> Result<DlsiReport<T>> {
    let logged: Vec<(T, T)> = samples.iter().map(|(u, b)| (*u, b.ln())).collect();
    detect_dlsi_ln(&logged, lit(DLSI_THRESHOLD))
}

/// Tight log-Sobolev constant from a defective one and a Poincaré
/// constant: `C_LS + (D_LS + 2)·C_P`.
pub fn rothaus_tighten<T: Real>(c_ls: T, d_ls: T, c_p: T) -> T {
    c_ls + (d_ls + lit(2.0)) * c_p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::lebesgue_ln_beta;

    #[test]
    fn xi_closed_forms() {
        let c = 0.3f64;
        let beta = |u: f64| (c / u).ln();
        for t in [0.01, 1.0, 20.0] {
            let got = xi_from_beta(&beta, t, &UGrid::default());
            assert!((got - t / (4.0 * c)).abs() < 1e-10 * t / c, "t={t}: {got}");
        }
        let flat = |_: f64| 2f64.ln();
        assert_eq!(xi_from_beta(&flat, 1.5, &UGrid::default()), 0.0);
        assert_eq!(xi_from_beta(&flat, 2.0, &UGrid::default()), 0.0);
        assert_eq!(xi_from_beta(&flat, 3.0, &UGrid::default()), f64::INFINITY);
    }

    #[test]
    fn fsob_linear_case() {
        let c = 0.3f64;
        let beta = |u: f64| (c / u).ln();
        for u in [0.5, 4.0, 30.0] {
            let got = fsob_from_beta(&beta, 1.0, 1.0, u).unwrap();
            let want = u / (16.0 * c) - 1.0;
            assert!((got - want).abs() < 1e-7 * (1.0 + want.abs()), "u={u}: {got} vs {want}");
        }
        assert_eq!(fsob_from_beta(&beta, 0.0, 2.5, 3.0).unwrap(), -2.5);
        let flat = |_: f64| 2f64.ln();
        assert!(matches!(fsob_from_beta(&flat, 1.0, 1.0, 10.0), Err(Error::XiDiverges { .. })));
    }

    #[test]
    fn nash_to_sobolev_slope() {
        for n in [1usize, 2] {
            let beta = move |u: f64| lebesgue_ln_beta(n, u);
            let f = |u: f64| fsob_from_beta(&beta, 1.0, 1.0, u).unwrap();
            let slope = (f(1e4).ln() - f(10.0).ln()) / (1e4f64.ln() - 10f64.ln());
            assert!((slope - 2.0 / n as f64).abs() < 0.1, "n={n}: {slope}");
        }
    }

    #[test]
    fn inverse_examples() {
        let log = FSobDescriptor::<f64>::log_power(1.0);
        let b = beta_from_fsob(&log, 1.0, 1.0, 1.0).unwrap();
        assert!((b - std::f64::consts::E.powi(2)).abs() < 1e-9);
        let lin = FSobDescriptor::<f64>::linear();
        for u in [0.5, 2.0] {
            let b = beta_from_fsob(&lin, 1.5, 2.0, u).unwrap();
            assert!((b - 1.5 * 2.0 * (1.0 + 1.0 / u)).abs() < 1e-9);
        }
        let mut high = FSobDescriptor::<f64>::log_power(1.0);
        high.u_star = 10.0;
        assert!(matches!(high.inverse_ln(1.0), Err(Error::NotInvertible { .. })));
    }

    #[test]
    fn dlsi_detection() {
        let us = log_space(1e-2f64, 1.0, 12);
        let exp: Vec<(f64, f64)> = us.iter().map(|&u| (u, (1.0 / u).exp())).collect();
        let r = detect_dlsi(&exp).unwrap();
        assert!(r.is_dlsi && (r.c - 1.0).abs() < 1e-6 && (r.c_prime - 1.0).abs() < 1e-6);
        let poly: Vec<(f64, f64)> = us.iter().map(|&u| (u, u.powi(-2))).collect();
        assert!(!detect_dlsi(&poly).unwrap().is_dlsi);
        let small = log_space(1e-4f64, 1e-2, 12);
        let poly: Vec<(f64, f64)> = small.iter().map(|&u| (u, u.powi(-2))).collect();
        assert!(!detect_dlsi(&poly).unwrap().is_dlsi);
        let flat: Vec<(f64, f64)> = us.iter().map(|&u| (u, 3.0)).collect();
        let r = detect_dlsi(&flat).unwrap();
        assert!(r.is_dlsi && r.degenerate && r.c_prime == 0.0);
    }

    #[test]
    fn rothaus_examples() {
        assert_eq!(rothaus_tighten(4.0, 1.0, 1.0), 7.0);
        assert_eq!(rothaus_tighten(4.0, 0.0, 1.5), 7.0);
        let base = rothaus_tighten(1.0f64, 3.0, 2.0);
        assert!((rothaus_tighten(1.0, 3.0, 4.0) - base - 5.0 * 2.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn xi_non_decreasing_in_t(c in 0.1f64..10.0, p in 0.3f64..3.0, dlsi in any::<bool>()) {
                let beta = move |u: f64| if dlsi { c.ln() + p / u } else { c.ln() - p * u.ln() };
                let grid = UGrid::default();
                let ts = crate::scalar::log_space(1e-2, 1e3, 30);
                let xs: Vec<f64> = ts.iter().map(|&t| xi_from_beta(&beta, t, &grid)).collect();
                prop_assert!(xs.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)), "{:?}", xs);
            }

            #[test]
            fn fsob_non_decreasing_for_polynomial_rates(c in 0.1f64..10.0, p in 0.5f64..2.0) {
                let beta = move |u: f64| c.ln() - p * u.ln();
                let us = crate::scalar::log_space(1e-2, 1e4, 30);
                let fs: Vec<f64> = us.iter().map(|&u| fsob_from_beta(&beta, 1.0, 1.0, u).unwrap()).collect();
                let first = fs.iter().position(|f| *f > 0.0).unwrap_or(fs.len());
                prop_assert!(fs[first..].windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)), "{:?}", fs);
            }

        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(4))]

            #[test]
            fn dlsi_class_survives_round_trip(ln_c in -2.0f64..2.0, cp in 0.2f64..5.0) {
                let rate = crate::certificates::RateFunction::new(
                    crate::certificates::RateRecipe::ClosedForm { ln_c, k: 0.0, c: cp, p: 1.0 },
                    Default::default(),
                );
                let f = FSobDescriptor::from_beta(rate, 1.0, 1.0);
                let samples: Vec<(f64, f64)> = crate::scalar::log_space(1e-4, 1e-2, 8)
                    .into_iter()
                    .map(|u| (u, ln_beta_from_fsob(&f, 1.0, 1.0, u).unwrap()))
                    .collect();
                prop_assert!(detect_dlsi_ln(&samples, lit(DLSI_THRESHOLD)).unwrap().is_dlsi);
            }
        }
    }
}
