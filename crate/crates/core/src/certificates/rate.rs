//! Serializable rate functions `s ↦ β(s)` and their growth classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baseline::{lebesgue_ln_beta, BaselineBeta};
use crate::geometry::{Envelope, GeometryProfile, SetFamily};
use crate::lyapunov::LyapunovWitness;
use crate::scalar::{log_space, lit, Real};

use super::routes::{
    closed_form_ln, distance_exponent, ln_alpha_general, ln_alpha_route_one, ln_alpha_route_two, ln_beta_logdensity,
    LogDensityVariant, ScalarFn,
};

/// Local rate on `A_r` for the local-rate route.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", bound = "T: Real")]
pub enum LocalBeta<T> {
    /// Lebesgue rate, independent of `r`.
    Lebesgue { n: usize },
    /// `C(n)·θⁿ(r)·(1 + s^{−n/2})` with `θ` taken on the shell `{V = r}`.
    Bord { n: usize, c_n: Option<T> },
}

/// Everything needed to re-evaluate a rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case", bound = "T: Real")]
pub enum RateRecipe<T: Real> {
    Baseline {
        base: BaselineBeta<T>,
    },
    RouteOne {
        base: BaselineBeta<T>,
        witness: LyapunovWitness<T>,
        sets: SetFamily<T>,
        eps_grid: Vec<T>,
    },
    RouteTwo {
        base: BaselineBeta<T>,
        witness: LyapunovWitness<T>,
        sets: SetFamily<T>,
    },
    General {
        witness: LyapunovWitness<T>,
        sets: SetFamily<T>,
        local: LocalBeta<T>,
        exact_chaining: bool,
    },
    LogDensity {
        variant: LogDensityVariant,
        eta: ScalarFn<T>,
        shape: ScalarFn<T>,
        n: usize,
        c: T,
        big_c: T,
    },
    Distance {
        case: u8,
        b: T,
        b_prime: T,
        c: T,
        big_c: T,
    },
    /// `ln β = ln_c + k ln(1/s) + c s^{−p}`.
    ClosedForm {
        ln_c: T,
        k: T,
        c: T,
        p: T,
    },
    /// Left-node step function, `+∞` below the first node.
    Tabulated {
        #[serde(with = "crate::scalar::ext::vec")]
        s: Vec<T>,
        #[serde(with = "crate::scalar::ext::vec")]
        beta: Vec<T>,
    },
    Scaled {
        factor: T,
        inner: Box<RateRecipe<T>>,
    },
}

/// Growth class of `β` as `s → 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", bound = "T: Real")]
pub enum ClassTag<T> {
    /// `β ~ s^{−exponent}`
    Polynomial { exponent: T },
    /// `β ~ e^{c s^{−p}}`
    Exponential { p: T, c: T },
    DoublyExponential,
    Tabulated,
}

/// `s` range on which the rate is emitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Validity<T> {
    #[serde(with = "crate::scalar::ext")]
    pub s_min: T,
    #[serde(with = "crate::scalar::ext")]
    pub s_max: T,
}

impl<T: Real> Validity<T> {
    pub fn all() -> Self {
        Self { s_min: T::zero(), s_max: T::infinity() }
    }

    pub fn contains(&self, s: T) -> bool {
        s > self.s_min && s <= self.s_max
    }

    /// `count` log-spaced probes inside the range, clipped to `[1e−6, 1e6]`.
    pub fn probe(&self, count: usize) -> Vec<T> {
        let lo = self.s_min.max(lit(1e-6));
        let lo = if lo == self.s_min { lo * lit(1.0 + 1e-9) } else { lo };
        let hi = self.s_max.min(lit(1e6));
        log_space(lo, hi.max(lo), count)
    }
}

/// Sampled copy of the rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RateTable<T> {
    #[serde(with = "crate::scalar::ext::vec")]
    pub s: Vec<T>,
    #[serde(with = "crate::scalar::ext::vec")]
    pub beta: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RateFunction<T: Real> {
    pub recipe: RateRecipe<T>,
    pub class_tag: ClassTag<T>,
    #[serde(with = "crate::scalar::ext_map")]
    pub params: BTreeMap<String, T>,
    pub validity: Validity<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<RateTable<T>>,
}

/// Window on which growth classes are fitted: two decades of small `s`.
pub const CLASS_WINDOW: (f64, f64) = (1e-4, 1e-2);

impl<T: Real> RateFunction<T> {
    /// Wraps a recipe, fitting its class on [`CLASS_WINDOW`].
    pub fn new(recipe: RateRecipe<T>, params: BTreeMap<String, T>) -> Self {
        let validity = Validity::all();
        let mut rate = Self { recipe, class_tag: ClassTag::Tabulated, params, validity, table: None };
        rate.class_tag = rate.analytic_class().unwrap_or_else(|| {
            let eval = rate.evaluator();
            fit_class(|s| eval.ln_value(s), lit(CLASS_WINDOW.0), lit(CLASS_WINDOW.1))
        });
        rate
    }

    fn analytic_class(&self) -> Option<ClassTag<T>> {
        let two = lit::<T>(2.0);
        match &self.recipe {
            RateRecipe::Baseline { base } => Some(ClassTag::Polynomial { exponent: lit::<T>(base.dim() as f64) / two }),
            RateRecipe::Distance { case, b, b_prime, c, .. } => {
                distance_exponent(*case, *b, *b_prime).ok().map(|p| ClassTag::Exponential { p, c: *c })
            }
            RateRecipe::ClosedForm { k, c, p, .. } => Some(if *c == T::zero() {
                ClassTag::Polynomial { exponent: *k }
            } else {
                ClassTag::Exponential { p: *p, c: *c }
            }),
            RateRecipe::Tabulated { .. } => Some(ClassTag::Tabulated),
            _ => None,
        }
    }

    /// Evaluator with any geometry profile built once.
    pub fn evaluator(&self) -> RateEvaluator<'_, T> {
        RateEvaluator::new(&self.recipe, self.validity)
    }

    pub fn ln_value(&self, s: T) -> T {
        self.evaluator().ln_value(s)
    }

    pub fn value(&self, s: T) -> T {
        self.ln_value(s).exp()
    }

    pub fn with_table(mut self, s_grid: &[T]) -> Self {
        let eval = self.evaluator();
        let beta = s_grid.iter().map(|&s| eval.value(s)).collect();
        self.table = Some(RateTable { s: s_grid.to_vec(), beta });
        self
    }
}

/// Evaluates a recipe, caching the geometry profile of envelope routes.
pub struct RateEvaluator<'a, T: Real> {
    recipe: &'a RateRecipe<T>,
    validity: Validity<T>,
    profile: Option<GeometryProfile<T>>,
    inner: Option<Box<RateEvaluator<'a, T>>>,
}

impl<'a, T: Real> RateEvaluator<'a, T> {
    fn new(recipe: &'a RateRecipe<T>, validity: Validity<T>) -> Self {
        let profile = match recipe {
            RateRecipe::RouteOne { witness, sets, .. }
            | RateRecipe::RouteTwo { witness, sets, .. }
            | RateRecipe::General { witness, sets, .. } => Some(GeometryProfile::new(witness, *sets)),
            _ => None,
        };
        let inner = match recipe {
            RateRecipe::Scaled { inner, .. } => Some(Box::new(RateEvaluator::new(inner, Validity::all()))),
            _ => None,
        };
        Self { recipe, validity, profile, inner }
    }

    pub fn value(&self, s: T) -> T {
        self.ln_value(s).exp()
    }

    pub fn ln_value(&self, s: T) -> T {
        if !self.validity.contains(s) {
            return T::infinity();
        }
        let ln = match self.recipe {
            RateRecipe::Baseline { base } => base.ln_value(s),
            RateRecipe::RouteOne { base, witness, eps_grid, .. } => {
                ln_alpha_route_one(base, self.env(), witness.b_const, eps_grid, s)
            }
            RateRecipe::RouteTwo { base, witness, .. } => {
                let env = self.env();
                ln_alpha_route_two(base, env, witness.b_const, env.min_param(), s)
            }
            RateRecipe::General { witness, local, exact_chaining, .. } => {
                let env = self.env();
                let local_ln = |r: T, t: T| match *local {
                    LocalBeta::Lebesgue { n } => lebesgue_ln_beta(n, t),
                    LocalBeta::Bord { n, c_n } => BaselineBeta::bord(n, env.theta_on_shell(r), c_n).ln_value(t),
                };
                ln_alpha_general(&local_ln, env, witness.b_const, s, *exact_chaining)
            }
            RateRecipe::LogDensity { variant, eta, shape, n, c, big_c } => {
                ln_beta_logdensity(*variant, eta, shape, *n, *c, *big_c, s)
            }
            RateRecipe::Distance { case, b, b_prime, c, big_c } => match distance_exponent(*case, *b, *b_prime) {
                Ok(p) => closed_form_ln(big_c.ln(), T::zero(), *c, p, s),
                Err(_) => T::infinity(),
            },
            RateRecipe::ClosedForm { ln_c, k, c, p } => closed_form_ln(*ln_c, *k, *c, *p, s),
            RateRecipe::Tabulated { s: nodes, beta } => {
                let idx = nodes.partition_point(|&x| x <= s);
                if idx == 0 {
                    T::infinity()
                } else {
                    beta[idx - 1].ln()
                }
            }
            RateRecipe::Scaled { factor, .. } => {
                factor.ln() + self.inner.as_ref().map(|e| e.ln_value(s)).unwrap_or(T::infinity())
            }
        };
        if ln.is_nan() {
            T::infinity()
        } else {
            ln
        }
    }

    fn env(&self) -> &GeometryProfile<T> {
        self.profile.as_ref().expect("envelope routes carry a profile")
    }
}

fn linear_fit<T: Real>(x: &[T], y: &[T]) -> (T, T, T) {
    let n = lit::<T>(x.len() as f64);
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let sxx: T = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let resid = x.iter().zip(y).map(|(&a, &b)| (b - icpt - slope * a).abs()).fold(T::zero(), T::max);
    (slope, icpt, resid)
}

/// Fits a growth class to `ln β` on `[lo, hi]`: linear in `ln(1/s)` is
/// polynomial; otherwise `ln ln β` linear in `ln(1/s)` gives `e^{c s^{−p}}`.
pub fn fit_class<T: Real>(ln_beta: impl Fn(T) -> T, lo: T, hi: T) -> ClassTag<T> {
    let mut s = log_space(lo, hi, 21);
    // ascending in ln(1/s)
    s.reverse();
    let x: Vec<T> = s.iter().map(|v| -v.ln()).collect();
    let y: Vec<T> = s.iter().map(|&v| ln_beta(v)).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return ClassTag::Tabulated;
    }
    let span = (y[y.len() - 1] - y[0]).abs().max(T::one());
    let (k, _, resid) = linear_fit(&x, &y);
    if resid <= lit::<T>(0.01) * span {
        return ClassTag::Polynomial { exponent: k };
    }
    if y.iter().all(|v| *v > T::zero()) {
        let ly: Vec<T> = y.iter().map(|v| v.ln()).collect();
        let (p, icpt, resid) = linear_fit(&x, &ly);
        if resid <= lit(0.05) {
            return ClassTag::Exponential { p, c: icpt.exp() };
        }
        let half = x.len() / 2;
        let (p1, _, _) = linear_fit(&x[..=half], &ly[..=half]);
        let (p2, _, _) = linear_fit(&x[half..], &ly[half..]);
        if p2 > lit::<T>(2.0) * p1 && p1 > T::zero() {
            return ClassTag::DoublyExponential;
        }
    }
    ClassTag::Tabulated
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::canonical_json;

    #[test]
    fn fit_recovers_known_shapes() {
        match fit_class(|s: f64| 3.0 - 1.5 * s.ln(), 1e-4, 1e-2) {
            ClassTag::Polynomial { exponent } => assert!((exponent - 1.5).abs() < 1e-9),
            t => panic!("{t:?}"),
        }
        match fit_class(|s: f64| 2.0 * s.powf(-0.75), 1e-4, 1e-2) {
            ClassTag::Exponential { p, c } => {
                assert!((p - 0.75).abs() < 1e-9);
                assert!((c - 2.0).abs() < 1e-9);
            }
            t => panic!("{t:?}"),
        }
        assert!(matches!(fit_class(|s: f64| 1.0 / s, 1e-4, 1e-2), ClassTag::Exponential { p, .. } if (p - 1.0).abs() < 1e-9));
        assert_eq!(fit_class(|s: f64| (0.1 / s).exp(), 1e-2, 1.0), ClassTag::DoublyExponential);
        assert_eq!(fit_class(|_: f64| f64::INFINITY, 1e-4, 1e-2), ClassTag::Tabulated);
    }

    #[test]
    fn tabulated_is_left_step() {
        let r = RateFunction::new(RateRecipe::Tabulated { s: vec![0.1f64, 1.0], beta: vec![5.0, 2.0] }, BTreeMap::new());
        assert_eq!(r.value(0.05), f64::INFINITY);
        assert!((r.value(0.5) - 5.0).abs() < 1e-12);
        assert!((r.value(3.0) - 2.0).abs() < 1e-12);
        assert_eq!(r.class_tag, ClassTag::Tabulated);
    }

    #[test]
    fn scaled_and_json() {
        let inner = RateRecipe::ClosedForm { ln_c: 0.0f64, k: 0.0, c: 1.0, p: 1.0 };
        let r = RateFunction::new(RateRecipe::Scaled { factor: 0.5, inner: Box::new(inner) }, BTreeMap::new());
        assert!((r.value(1.0) - 0.5 * std::f64::consts::E).abs() < 1e-12);
        let text = canonical_json(&r).unwrap();
        let back: RateFunction<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(canonical_json(&back).unwrap(), text);
    }
}
