//! Checks of the hypotheses behind the log-density and curvature routes.
//! Each check produces a named [`Assumption`] with the numbers it found.

use crate::lyapunov::{curvature_growth_gap, PhiShape, GROWTH_TOL};
use crate::potential::{PotentialSpec, RadialPotential};
use crate::radial::{cell_edges, Monomial, PowerSum};
use crate::scalar::{lit, Real};

use super::routes::{LogDensityVariant, ScalarFn};
use super::Assumption;

const CELLS: usize = 10_000;

/// Eventual size of `f(V(r))` given the leading monomial of `V`.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Growth<T> {
    Poly(Monomial<T>),
    /// Faster than any power.
    Super,
}

fn compose<T: Real>(f: &ScalarFn<T>, lead: Monomial<T>) -> Growth<T> {
    match *f {
        ScalarFn::Power { coef, exp } => Growth::Poly(Monomial { coef: coef * lead.coef.powf(exp), exp: lead.exp * exp }),
        ScalarFn::Exp { coef, rate } if coef > T::zero() && rate > T::zero() => Growth::Super,
        ScalarFn::Exp { coef, .. } => Growth::Poly(Monomial { coef, exp: T::zero() }),
        ScalarFn::Const { value } => Growth::Poly(Monomial { coef: value, exp: T::zero() }),
    }
}

/// `a(r) ≤ b(r)` for all large `r`, judged on leading monomials.
fn eventually_le<T: Real>(a: Monomial<T>, b: Growth<T>) -> bool {
    match b {
        Growth::Super => true,
        Growth::Poly(b) => a.exp < b.exp || (a.exp == b.exp && a.coef <= b.coef),
    }
}

fn leading_of<T: Real>(p: &PowerSum<T>) -> Monomial<T> {
    p.leading().unwrap_or(Monomial { coef: T::zero(), exp: T::zero() })
}

/// `V → ∞` at infinity.
pub fn coercive<T: Real>(v: &RadialPotential<T>) -> Assumption<T> {
    let lead = leading_of(&v.v);
    Assumption::checked("coercive", lead.coef > T::zero() && lead.exp > T::zero())
        .with_value("lead_coef", lead.coef)
        .with_value("lead_exp", lead.exp)
}

/// `(1 − a0)|∇V|² − ΔV ≥ η(V) + b0·1_{|x|<R}`: finds `R` on a grid below
/// the radius where the leading term takes over, and records `b0 ≤ 0`.
pub fn drift_gap<T: Real>(v: &RadialPotential<T>, a0: T, eta: &ScalarFn<T>) -> Assumption<T> {
    let base = v.grad_sq().scale(T::one() - a0).sub(&v.laplacian());
    let failed = |why: &str| Assumption::checked("drift_gap", false).with_note(why);
    if !(a0 > T::zero() && a0 < T::one()) {
        return failed("a0 outside (0, 1)");
    }
    if !eta.is_increasing_unbounded() {
        return failed("eta must increase to infinity");
    }
    let (shape, tail) = match *eta {
        ScalarFn::Power { coef, exp } => {
            let s = PhiShape::PotentialPower { coef, q: exp };
            (s, s.tail_majorant(v))
        }
        _ => return failed("only power eta admits a polynomial tail bound"),
    };
    let tail_gap = base.sub(&tail);
    let rho = match tail_gap.leading() {
        Some(t) if t.coef > T::zero() => tail_gap.settling_radius().unwrap_or(T::one()).max(T::one()),
        _ => return failed("leading term of the gap is not positive"),
    };
    let edges = cell_edges(T::zero(), rho, CELLS);
    let lower: Vec<T> = edges
        .windows(2)
        .map(|w| {
            let d = base.enclose(w[0], w[1]).lo - shape.enclose(v, w[0], w[1]).hi;
            if d.is_nan() {
                T::neg_infinity()
            } else {
                d
            }
        })
        .collect();
    let mut start = lower.len();
    while start > 0 && lower[start - 1] >= T::zero() {
        start -= 1;
    }
    let radius = edges[start];
    let b0 = lower[..start].iter().copied().fold(T::zero(), T::min);
    Assumption::checked("drift_gap", b0.is_finite())
        .with_value("a0", a0)
        .with_value("R", radius)
        .with_value("b0", b0)
        .with_value("tail_from", rho)
}

/// `limsup η(V)/|∇V|²`, recorded but not used by the rate.
pub fn eta_gradient_ratio<T: Real>(v: &RadialPotential<T>, eta: &ScalarFn<T>) -> Assumption<T> {
    let grad = leading_of(&v.grad_sq());
    let limsup = match compose(eta, leading_of(&v.v)) {
        Growth::Super => T::infinity(),
        Growth::Poly(m) if m.exp < grad.exp => T::zero(),
        Growth::Poly(m) if m.exp == grad.exp && grad.coef > T::zero() => m.coef / grad.coef,
        Growth::Poly(_) => T::infinity(),
    };
    Assumption::checked("eta_gradient_ratio", limsup.is_finite()).with_value("limsup", limsup)
}

/// `|∇V| ≤ γ(V)` (gradient form) or `|∂²V| ≤ θ(V)` (Hessian form) for
/// large `|x|`.
pub fn shape_bound<T: Real>(v: &RadialPotential<T>, variant: LogDensityVariant, shape: &ScalarFn<T>) -> Assumption<T> {
    let bound = compose(shape, leading_of(&v.v));
    let (name, target) = match variant {
        LogDensityVariant::Gradient => ("gradient_bound", abs_lead(&v.dv)),
        LogDensityVariant::Hessian => {
            // largest entry is at most max(|v''|, |v'/r|) in any dimension
            let a = abs_lead(&v.d2v);
            let b = abs_lead(&v.dv_over_r);
            let m = if a.exp > b.exp || (a.exp == b.exp && a.coef >= b.coef) { a } else { b };
            ("hessian_bound", m)
        }
    };
    Assumption::checked(name, eventually_le(target, bound))
        .with_value("target_coef", target.coef)
        .with_value("target_exp", target.exp)
}

fn abs_lead<T: Real>(p: &PowerSum<T>) -> Monomial<T> {
    let m = leading_of(p);
    Monomial { coef: m.coef.abs(), exp: m.exp }
}

/// Premises of the log-density route, in order.
pub fn logdensity_premises<T: Real>(
    spec: &PotentialSpec<T>,
    variant: LogDensityVariant,
    a0: T,
    eta: &ScalarFn<T>,
    shape: &ScalarFn<T>,
) -> Vec<Assumption<T>> {
    let v = spec.radial();
    vec![coercive(v), drift_gap(v, a0, eta), eta_gradient_ratio(v, eta), shape_bound(v, variant, shape)]
}

/// Curvature lower bound used by a case: cases 3 and 4 only need an upper
/// bound on `c0` from below zero, so a positive constant is lowered to 0.
pub fn case_curvature<T: Real>(case: u8, c0: T) -> T {
    match case {
        3 | 4 => c0.min(T::zero()),
        _ => c0,
    }
}

/// Premises of the curvature route for `case`, with growth exponents
/// `b ≤ b'` for `c|x|^b ≤ V ≤ C|x|^{b'}`.
pub fn distance_premises<T: Real>(spec: &PotentialSpec<T>, case: u8, b: T, b_prime: T) -> Vec<Assumption<T>> {
    let v = spec.radial();
    let c0 = spec.global_curvature_lower_bound();
    let c0_used = case_curvature(case, c0);
    let lead = leading_of(&v.v);
    let mut out = Vec::new();
    match case {
        1 | 2 => out.push(Assumption::checked("curvature_nonneg", c0 >= T::zero()).with_value("c0", c0)),
        _ => out.push(
            Assumption::checked("curvature_nonpos", c0_used <= T::zero())
                .with_value("c0", c0)
                .with_value("c0_used", c0_used),
        ),
    }
    out.push(growth_lemma(spec, c0_used));
    let positive = lead.coef > T::zero();
    let lower = Assumption::checked("lower_growth", positive && lead.exp >= b)
        .with_value("b", b)
        .with_value("lead_exp", lead.exp);
    let upper = Assumption::checked("upper_growth", positive && lead.exp <= b_prime)
        .with_value("b_prime", b_prime)
        .with_value("lead_exp", lead.exp);
    match case {
        1 => out.push(lower),
        2 | 4 => {
            out.push(lower);
            out.push(upper);
        }
        _ => {
            let two = lit::<T>(2.0);
            let dominates = positive && (lead.exp > two || (lead.exp == two && lead.coef > -c0_used / two));
            out.push(
                Assumption::checked("quadratic_dominance", dominates)
                    .with_value("lead_coef", lead.coef)
                    .with_value("lead_exp", lead.exp),
            );
        }
    }
    out
}

/// `x·∇V ≥ V(x) − V(0) + c0|x|²/2` everywhere: grid enclosure up to the
/// settling radius of the gap, sign of the leading term beyond.
pub fn growth_lemma<T: Real>(spec: &PotentialSpec<T>, c0: T) -> Assumption<T> {
    let gap = curvature_growth_gap(spec, c0);
    let tol = lit::<T>(GROWTH_TOL);
    let (holds, sup, radius) = match gap.leading() {
        None => (true, T::zero(), T::zero()),
        Some(t) => {
            let radius = gap.settling_radius().unwrap_or(T::one()).max(lit(8.0));
            let sup = gap.sup_bound(T::zero(), radius, CELLS);
            (t.coef < T::zero() && sup <= tol, sup, radius)
        }
    };
    Assumption::checked("growth_lemma", holds)
        .with_value("c0", c0)
        .with_value("max_violation", sup)
        .with_value("radius", radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn holds(list: &[Assumption<f64>], name: &str) -> bool {
        list.iter().find(|a| a.name == name).map(|a| a.holds).unwrap_or(false)
    }

    #[test]
    fn gaussian_case_three() {
        let spec = PotentialSpec::<f64>::gaussian(0.5, 1).unwrap();
        let p = distance_premises(&spec, 3, 2.0, 2.0);
        for name in ["curvature_nonpos", "growth_lemma", "quadratic_dominance"] {
            assert!(holds(&p, name), "{name}: {p:?}");
        }
    }

    #[test]
    fn power_and_double_well_cases() {
        let p = PotentialSpec::<f64>::power(1.0, 1.5, 1).unwrap();
        let list = distance_premises(&p, 1, 1.5, 1.5);
        assert!(list.iter().all(|a| a.holds), "{list:?}");
        let dw = PotentialSpec::<f64>::double_well(1.0, 1.0, 1).unwrap();
        let list = distance_premises(&dw, 3, 4.0, 4.0);
        assert!(list.iter().all(|a| a.holds), "{list:?}");
        assert!(!holds(&distance_premises(&dw, 1, 4.0, 4.0), "curvature_nonneg"));
    }

    #[test]
    fn quartic_logdensity() {
        let spec = PotentialSpec::<f64>::power(1.0, 4.0, 1).unwrap();
        let eta = ScalarFn::Power { coef: 1.0, exp: 1.5 };
        let gamma = ScalarFn::Power { coef: 4.0, exp: 0.75 };
        let list = logdensity_premises(&spec, LogDensityVariant::Gradient, 0.5, &eta, &gamma);
        assert!(list.iter().all(|a| a.holds), "{list:?}");
        let gap = &list[1];
        assert!(gap.values["b0"] <= 0.0 && gap.values["R"] < 2.0);
        // 8r⁶ − 12r² ≥ r⁶ fails near 1 and holds from about 1.15
        assert!(gap.values["R"] > 1.0);
        let tight = ScalarFn::Power { coef: 3.0, exp: 0.75 };
        assert!(!shape_bound(spec.radial(), LogDensityVariant::Gradient, &tight).holds);
    }

    #[test]
    fn limsup_is_recorded() {
        let spec = PotentialSpec::<f64>::gaussian(0.5, 1).unwrap();
        let a = eta_gradient_ratio(spec.radial(), &ScalarFn::identity());
        assert!(a.holds);
        assert!((a.values["limsup"] - 0.5).abs() < 1e-15);
        let fast = eta_gradient_ratio(spec.radial(), &ScalarFn::Power { coef: 1.0, exp: 2.0 });
        assert!(!fast.holds);
    }
}
