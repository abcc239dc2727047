//! Lyapunov witnesses `W = e^{aV}` or `W = e^{a|x|^b}` for the drift
//! condition `LW/W ≤ −φ + b·1_{B(o, r0)}` with `L = Δ − ∇V·∇`.
//!
//! Both witness families give drift ratios that are radial power sums, so
//! a witness is validated by interval enclosures on a finite grid plus an
//! analytic sign argument beyond the settling radius of the leading term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{norm, PotentialSpec, RadialPotential};
use crate::radial::{cell_edges, Interval, PowerSum};
use crate::scalar::{count, lit, Real};

/// Witness family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", bound = "T: Real")]
pub enum WitnessFamily<T> {
    /// `W = e^{aV}`, `0 < a < 1`.
    #[serde(rename = "exp_aV")]
    ExpAV { a: T },
    /// `W = e^{a|x|^b}`, `a > 0`, `b > 1`.
    ExpDist { a: T, b_exp: T },
}

impl<T: Real> WitnessFamily<T> {
    fn validate(&self) -> Result<()> {
        match *self {
            WitnessFamily::ExpAV { a } if !(a > T::zero() && a < T::one()) => {
                Err(Error::InvalidArgument(format!("exp_aV needs 0 < a < 1, got {a}")))
            }
            WitnessFamily::ExpDist { a, b_exp } if !(a > T::zero() && b_exp > T::one() && b_exp.is_finite()) => {
                Err(Error::InvalidArgument(format!("exp_dist needs a > 0 and b > 1, got a={a} b={b_exp}")))
            }
            _ => Ok(()),
        }
    }

    /// `LW/W` as a radial power sum.
    pub fn drift_profile(&self, v: &RadialPotential<T>) -> PowerSum<T> {
        match *self {
            WitnessFamily::ExpAV { a } => v.laplacian().sub(&v.grad_sq().scale(T::one() - a)).scale(a),
            WitnessFamily::ExpDist { a, b_exp } => {
                let ab = a * b_exp;
                let psi = v
                    .radial_derivative()
                    .sub(&PowerSum::constant(count::<T>(v.n) + b_exp - lit(2.0)))
                    .sub(&PowerSum::monomial(ab, b_exp));
                psi.shift(b_exp - lit(2.0)).scale(-ab)
            }
        }
    }
}

/// `(LW/W)(x)` from the closed-form family formula.
pub fn drift_ratio<T: Real>(spec: &PotentialSpec<T>, family: &WitnessFamily<T>, x: &[T]) -> Result<T> {
    let r = norm(x);
    match *family {
        WitnessFamily::ExpAV { a } if a == T::zero() => Ok(T::zero()),
        WitnessFamily::ExpDist { b_exp, .. } if r == T::zero() && b_exp < lit(2.0) => Err(Error::SingularOrigin),
        _ => Ok(family.drift_profile(spec.radial()).eval(r)),
    }
}

/// Symbolic shape of `φ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", bound = "T: Real")]
pub enum PhiShape<T> {
    /// `coef·|x|^p`
    RadialPower { coef: T, p: T },
    /// `coef·max(V, 0)^q`
    PotentialPower { coef: T, q: T },
}

impl<T: Real> PhiShape<T> {
    pub fn at_radius(&self, v: &RadialPotential<T>, r: T) -> T {
        match *self {
            PhiShape::RadialPower { coef, p } => coef * r.powf(p),
            PhiShape::PotentialPower { coef, q } => coef * v.v.eval(r).max(T::zero()).powf(q),
        }
    }

    /// Exact power-sum form when it exists.
    pub fn power_sum(&self, v: &RadialPotential<T>) -> Option<PowerSum<T>> {
        match *self {
            PhiShape::RadialPower { coef, p } => Some(PowerSum::monomial(coef, p)),
            PhiShape::PotentialPower { coef, q } => {
                let k = q.to_usize().filter(|&k| count::<T>(k) == q && (1..=4).contains(&k))?;
                if v.inf_value() < T::zero() {
                    return None;
                }
                let mut acc = PowerSum::constant(coef);
                for _ in 0..k {
                    acc = acc.mul(&v.v);
                }
                Some(acc)
            }
        }
    }

    pub fn enclose(&self, v: &RadialPotential<T>, lo: T, hi: T) -> Interval<T> {
        match *self {
            PhiShape::RadialPower { coef, p } => PowerSum::monomial(coef, p).enclose(lo, hi),
            PhiShape::PotentialPower { coef, q } => {
                let e = v.v.enclose(lo, hi);
                let f = |y: T| coef * y.max(T::zero()).powf(q);
                Interval { lo: f(e.lo), hi: f(e.hi) }
            }
        }
    }

    /// Monomial majorant of `φ` valid for `r ≥ 1`.
    pub(crate) fn tail_majorant(&self, v: &RadialPotential<T>) -> PowerSum<T> {
        match *self {
            PhiShape::RadialPower { coef, p } => PowerSum::monomial(coef, p),
            PhiShape::PotentialPower { coef, q } => {
                let pos: T = v.v.terms().iter().filter(|t| t.coef > T::zero()).map(|t| t.coef).sum();
                let top = v.v.leading().map_or(T::zero(), |t| t.exp.max(T::zero()));
                PowerSum::monomial(coef * pos.powf(q), q * top)
            }
        }
    }

    /// Whether `φ(r)` is non-decreasing in `r` on `[0, ∞)`.
    pub fn is_monotone_radial(&self, v: &RadialPotential<T>) -> bool {
        match *self {
            PhiShape::RadialPower { coef, p } => coef >= T::zero() && p >= T::zero(),
            PhiShape::PotentialPower { .. } => v.v.nondecreasing_from(T::zero(), 2_000),
        }
    }

    /// Whether `φ → ∞` at infinity.
    pub fn is_coercive(&self, v: &RadialPotential<T>) -> bool {
        match *self {
            PhiShape::RadialPower { coef, p } => coef > T::zero() && p > T::zero(),
            PhiShape::PotentialPower { coef, q } => {
                coef > T::zero() && q > T::zero() && v.v.leading().is_some_and(|t| t.coef > T::zero() && t.exp > T::zero())
            }
        }
    }

    /// Lower bound of `inf_{r' ≥ r} φ(r')`, exact when `φ` is monotone.
    pub fn inf_beyond(&self, v: &RadialPotential<T>, r: T) -> T {
        if self.is_monotone_radial(v) {
            return self.at_radius(v, r);
        }
        let knee = v.dv.settling_radius().unwrap_or(T::one()).max(r);
        let body = cell_edges(r, knee, 10_000).windows(2).map(|w| self.enclose(v, w[0], w[1]).lo).fold(T::infinity(), T::min);
        body.min(self.at_radius(v, knee))
    }
}

/// Strength of a witness: `φ → ∞` gives super-Poincaré routes, a bounded
/// `φ` only a Poincaré inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessGrade {
    Super,
    PoincareOnly,
}

/// Where a witness was checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ValidationDomain<T> {
    pub radius: T,
    pub cells: usize,
    /// Radius beyond which the sign is fixed by the leading term.
    pub tail_from: T,
}

/// A validated witness for the drift condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LyapunovWitness<T: Real> {
    pub potential: PotentialSpec<T>,
    pub family: WitnessFamily<T>,
    pub phi: PhiShape<T>,
    pub phi0: T,
    #[serde(with = "crate::scalar::ext")]
    pub b_const: T,
    pub r0: T,
    pub grade: WitnessGrade,
    pub validated_on: ValidationDomain<T>,
}

impl<T: Real> LyapunovWitness<T> {
    pub fn phi_at(&self, x: &[T]) -> T {
        self.phi.at_radius(self.potential.radial(), norm(x))
    }

    pub fn drift_at(&self, x: &[T]) -> Result<T> {
        drift_ratio(&self.potential, &self.family, x)
    }
}

/// Grid descriptor for drift reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GridDescriptor<T> {
    pub radius: T,
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DriftReport<T: Real> {
    #[serde(with = "crate::scalar::ext")]
    pub max_violation: T,
    pub witness: Option<LyapunovWitness<T>>,
    pub grid: GridDescriptor<T>,
}

impl<T: Real> DriftReport<T> {
    pub fn passed(&self) -> bool {
        self.max_violation <= T::zero()
    }
}

/// Search configuration for [`fit_witness`].
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessSearch<T> {
    pub r0_step: T,
    pub r0_max: T,
    /// `None` derives candidates from the leading drift term.
    pub candidates: Option<Vec<PhiShape<T>>>,
    pub cells: usize,
}

impl<T: Real> Default for WitnessSearch<T> {
    fn default() -> Self {
        Self { r0_step: lit(0.25), r0_max: lit(8.0), candidates: None, cells: 10_000 }
    }
}

/// Resolution used when rounding `b` upward.
const B_QUANTUM: f64 = 1.0 / 1_048_576.0;

/// Ratio between consecutive geometric cells beyond the uniform grid.
const GEOMETRIC_RATIO: f64 = 1.001;

/// Default `φ` candidates: fractions of the leading term of `−LW/W`, then
/// the matching power of `V`.
pub fn default_candidates<T: Real>(v: &RadialPotential<T>, drift: &PowerSum<T>) -> Vec<PhiShape<T>> {
    let Some(lead) = drift.leading() else { return Vec::new() };
    if lead.coef >= T::zero() {
        return Vec::new();
    }
    let kappa = -lead.coef;
    let mut out: Vec<PhiShape<T>> =
        [2.0, 4.0, 8.0].iter().map(|d| PhiShape::RadialPower { coef: kappa / lit(*d), p: lead.exp }).collect();
    if let Some(vl) = v.v.leading().filter(|t| t.coef > T::zero() && t.exp > T::zero()) {
        let q = lead.exp / vl.exp;
        if q > T::zero() {
            out.push(PhiShape::PotentialPower { coef: kappa / lit::<T>(2.0) / vl.coef.powf(q), q });
        }
    }
    out
}

struct Checker<'a, T: Real> {
    v: &'a RadialPotential<T>,
    drift: PowerSum<T>,
    phi: PhiShape<T>,
    exact: Option<PowerSum<T>>,
}

impl<'a, T: Real> Checker<'a, T> {
    fn new(v: &'a RadialPotential<T>, drift: &PowerSum<T>, phi: PhiShape<T>) -> Self {
        let exact = phi.power_sum(v).map(|p| drift.add(&p));
        Self { v, drift: drift.clone(), phi, exact }
    }

    /// Upper bound of `LW/W + φ` on `[lo, hi]`.
    fn upper(&self, lo: T, hi: T) -> T {
        match &self.exact {
            Some(h) => h.enclose(lo, hi).hi,
            None => {
                let s = self.drift.enclose(lo, hi).hi + self.phi.enclose(self.v, lo, hi).hi;
                if s.is_nan() {
                    T::infinity()
                } else {
                    s
                }
            }
        }
    }

    /// Radius beyond which `LW/W + φ < 0` analytically, if any.
    fn tail_radius(&self) -> Option<T> {
        let h = match &self.exact {
            Some(h) => h.clone(),
            None => self.drift.add(&self.phi.tail_majorant(self.v)),
        };
        match h.leading() {
            None => None,
            Some(t) if t.coef >= T::zero() => None,
            Some(_) => Some(h.settling_radius().unwrap_or(T::one()).max(T::one())),
        }
    }

    fn sup_on(&self, edges: &[T]) -> T {
        edges.windows(2).map(|w| self.upper(w[0], w[1])).fold(T::neg_infinity(), T::max)
    }
}

fn geometric_edges<T: Real>(lo: T, hi: T) -> Vec<T> {
    let mut out = vec![lo];
    let ratio = lit::<T>(GEOMETRIC_RATIO);
    let mut r = lo;
    while r < hi {
        r = (r * ratio).min(hi);
        out.push(r);
    }
    out
}

/// Finds the first candidate `φ` (in order) that validates for some `r0`
/// on the search grid, at its smallest such `r0`.
pub fn fit_witness<T: Real>(
    spec: &PotentialSpec<T>,
    family: WitnessFamily<T>,
    search: &WitnessSearch<T>,
) -> Result<LyapunovWitness<T>> {
    family.validate()?;
    if !(search.r0_step > T::zero() && search.r0_max >= search.r0_step) {
        return Err(Error::InvalidArgument("r0 grid must be positive and non-empty".into()));
    }
    let v = spec.radial();
    let drift = family.drift_profile(v);
    let candidates = match &search.candidates {
        Some(c) => c.clone(),
        None => default_candidates(v, &drift),
    };
    if candidates.is_empty() {
        return Err(Error::NoWitnessFound("drift ratio is not eventually negative".into()));
    }
    let grid_radius = lit::<T>(4.0) * search.r0_max;
    let steps = (search.r0_max / search.r0_step).floor().to_usize().unwrap_or(0);
    for phi in candidates {
        let checker = Checker::new(v, &drift, phi);
        let Some(tail) = checker.tail_radius() else { continue };
        let outer = if tail > grid_radius { checker.sup_on(&geometric_edges(grid_radius, tail)) } else { T::neg_infinity() };
        if outer > T::zero() {
            continue;
        }
        for k in 1..=steps {
            let r0 = search.r0_step * count::<T>(k);
            if checker.sup_on(&cell_edges(r0, grid_radius, search.cells)) > T::zero() {
                continue;
            }
            let phi0 = phi.inf_beyond(v, r0);
            if !(phi0 > T::zero()) {
                continue;
            }
            let inner = checker.sup_on(&cell_edges(T::zero(), r0, search.cells));
            let b_const = round_up(inner.max(T::zero()));
            let grade = if phi.is_coercive(v) { WitnessGrade::Super } else { WitnessGrade::PoincareOnly };
            return Ok(LyapunovWitness {
                potential: spec.clone(),
                family,
                phi,
                phi0,
                b_const,
                r0,
                grade,
                validated_on: ValidationDomain { radius: grid_radius, cells: search.cells, tail_from: tail.max(grid_radius) },
            });
        }
    }
    Err(Error::NoWitnessFound(format!("no candidate validated with r0 <= {}", search.r0_max)))
}

fn round_up<T: Real>(x: T) -> T {
    if !x.is_finite() {
        return x;
    }
    let q = lit::<T>(B_QUANTUM);
    (x / q).ceil() * q
}

/// Re-validates a witness on a grid with `cells` cells: the report's
/// violation is the larger of `sup_{r ≥ r0}(LW/W + φ)` and
/// `sup_{r < r0}(LW/W + φ − b)`.
pub fn check_witness<T: Real>(witness: &LyapunovWitness<T>, cells: usize) -> DriftReport<T> {
    let v = witness.potential.radial();
    let drift = witness.family.drift_profile(v);
    let checker = Checker::new(v, &drift, witness.phi);
    let radius = witness.validated_on.radius;
    let outer = match checker.tail_radius() {
        None => T::infinity(),
        Some(tail) => {
            let mut m = checker.sup_on(&cell_edges(witness.r0, radius, cells));
            if tail > radius {
                m = m.max(checker.sup_on(&geometric_edges(radius, tail)));
            }
            m
        }
    };
    let inner = checker.sup_on(&cell_edges(T::zero(), witness.r0, cells)) - witness.b_const;
    let inner = if inner.is_nan() { T::zero() } else { inner };
    DriftReport {
        max_violation: outer.max(inner),
        witness: Some(witness.clone()),
        grid: GridDescriptor { radius, cells },
    }
}

/// `V(x) − V(0) + c0|x|²/2 − x·∇V` as a radial power sum.
pub fn curvature_growth_gap<T: Real>(spec: &PotentialSpec<T>, c0: T) -> PowerSum<T> {
    let v = spec.radial();
    v.v.sub(&PowerSum::constant(v.v.eval(T::zero())))
        .add(&PowerSum::monomial(c0 / lit(2.0), lit(2.0)))
        .sub(&v.radial_derivative())
}

/// Tolerance for the curvature-growth check.
pub const GROWTH_TOL: f64 = 1e-10;

/// Checks `x·∇V ≥ V(x) − V(0) + c0|x|²/2` on `|x| ≤ radius`; the report's
/// violation is the enclosure supremum of `RHS − LHS`.
pub fn check_curvature_growth<T: Real>(spec: &PotentialSpec<T>, c0: T, radius: T, cells: usize) -> DriftReport<T> {
    let gap = curvature_growth_gap(spec, c0);
    DriftReport {
        max_violation: gap.sup_bound(T::zero(), radius, cells),
        witness: None,
        grid: GridDescriptor { radius, cells },
    }
}
