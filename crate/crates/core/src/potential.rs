//! Potentials `V` on ℝⁿ from a closed family of radial profiles.
//!
//! Every family is a function of `|x|`, so the whole potential is carried as a
//! [`PowerSum`] in the radius. Gradient and Hessian come from exact
//! derivatives of that sum: `∇V = v'(r) x/r` and
//! `Hess V = v''(r) x̂x̂ᵀ + (v'(r)/r)(I − x̂x̂ᵀ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{Monomial, PowerSum};
use crate::scalar::{count, lit, Real};

/// Cells used for grid extrema of radial profiles.
pub const PROFILE_CELLS: usize = 10_000;

/// A potential family. Serialized with an internal `family` tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
#[serde(bound = "T: Real")]
pub enum Family<T> {
    /// `c |x|²`
    Gaussian { c: T },
    /// `c |x|^b_pow`
    Power { c: T, b_pow: T },
    /// `a4 |x|⁴ − a2 |x|²`
    DoubleWell { a4: T, a2: T },
    /// Sum of the listed families.
    Sum { terms: Vec<Family<T>> },
}

impl<T: Real> Family<T> {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPotential(m));
        match self {
            Family::Gaussian { c } if !(*c > T::zero() && c.is_finite()) => bad(format!("gaussian needs c > 0, got {c}")),
            Family::Power { c, b_pow } => {
                if !(*c > T::zero() && c.is_finite()) {
                    bad(format!("power needs c > 0, got {c}"))
                } else if !(*b_pow > T::one() && b_pow.is_finite()) {
                    bad(format!("power needs b_pow > 1, got {b_pow}"))
                } else {
                    Ok(())
                }
            }
            Family::DoubleWell { a4, a2 } => {
                if !(*a4 > T::zero() && a4.is_finite() && a2.is_finite()) {
                    bad(format!("double_well needs a4 > 0, got {a4}"))
                } else {
                    Ok(())
                }
            }
            Family::Sum { terms } => {
                if terms.is_empty() {
                    return bad("sum needs at least one term".into());
                }
                terms.iter().try_for_each(Family::validate)
            }
            _ => Ok(()),
        }
    }

    fn profile(&self) -> PowerSum<T> {
        match self {
            Family::Gaussian { c } => PowerSum::monomial(*c, lit(2.0)),
            Family::Power { c, b_pow } => PowerSum::monomial(*c, *b_pow),
            Family::DoubleWell { a4, a2 } => {
                PowerSum::from_terms(vec![Monomial { coef: *a4, exp: lit(4.0) }, Monomial { coef: -*a2, exp: lit(2.0) }])
            }
            Family::Sum { terms } => terms.iter().fold(PowerSum::zero(), |acc, t| acc.add(&t.profile())),
        }
    }

    /// Whether `V` only depends on `|x|` through a non-decreasing profile.
    pub fn is_radial_monotone(&self) -> bool {
        match self {
            Family::Gaussian { .. } | Family::Power { .. } => true,
            Family::DoubleWell { a2, .. } => *a2 <= T::zero(),
            Family::Sum { terms } => terms.iter().all(Family::is_radial_monotone),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct RawPotential<T> {
    #[serde(flatten)]
    family: Family<T>,
    n: usize,
    #[serde(default)]
    offset: T,
}

/// A validated potential `V(x) = family(|x|) + offset` on ℝⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential<T>", into = "RawPotential<T>", bound = "T: Real")]
pub struct PotentialSpec<T: Real> {
    family: Family<T>,
    n: usize,
    offset: T,
    profile: RadialPotential<T>,
}

impl<T: Real> TryFrom<RawPotential<T>> for PotentialSpec<T> {
    type Error = Error;
    fn try_from(raw: RawPotential<T>) -> Result<Self> {
        Self::with_offset(raw.family, raw.n, raw.offset)
    }
}

impl<T: Real> From<PotentialSpec<T>> for RawPotential<T> {
    fn from(p: PotentialSpec<T>) -> Self {
        RawPotential { family: p.family, n: p.n, offset: p.offset }
    }
}

/// Value, gradient and smallest Hessian eigenvalue at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult<T> {
    pub v: T,
    pub grad: Vec<T>,
    pub hess_min_eig: T,
}

impl<T: Real> PotentialSpec<T> {
    pub fn new(family: Family<T>, n: usize) -> Result<Self> {
        Self::with_offset(family, n, T::zero())
    }

    pub fn with_offset(family: Family<T>, n: usize, offset: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPotential("dimension must be positive".into()));
        }
        if !offset.is_finite() {
            return Err(Error::InvalidPotential("offset must be finite".into()));
        }
        family.validate()?;
        let v = family.profile().add(&PowerSum::constant(offset));
        Ok(Self { profile: RadialPotential::new(v, n), family, n, offset })
    }

    pub fn gaussian(c: T, n: usize) -> Result<Self> {
        Self::new(Family::Gaussian { c }, n)
    }

    pub fn power(c: T, b_pow: T, n: usize) -> Result<Self> {
        Self::new(Family::Power { c, b_pow }, n)
    }

    pub fn double_well(a4: T, a2: T, n: usize) -> Result<Self> {
        Self::new(Family::DoubleWell { a4, a2 }, n)
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    /// The same potential shifted by an additive constant.
    pub fn shifted(&self, delta: T) -> Result<Self> {
        Self::with_offset(self.family.clone(), self.n, self.offset + delta)
    }

    /// Radial view used by the geometry and drift computations.
    pub fn radial(&self) -> &RadialPotential<T> {
        &self.profile
    }

    pub fn value(&self, x: &[T]) -> T {
        self.profile.v.eval(norm(x))
    }

    /// Exact value, gradient and smallest Hessian eigenvalue at `x`.
    pub fn eval(&self, x: &[T]) -> EvalResult<T> {
        assert_eq!(x.len(), self.n, "point dimension mismatch");
        let r = norm(x);
        let p = &self.profile;
        let grad = if r == T::zero() {
            vec![T::zero(); self.n]
        } else {
            let k = p.dv.eval(r) / r;
            x.iter().map(|&xi| k * xi).collect()
        };
        EvalResult { v: p.v.eval(r), grad, hess_min_eig: p.min_eig_at(r) }
    }

    /// Upper bound on `∫_{|x| > R} e^{−V}` from the tangent-line envelope of
    /// the radial profile, valid where `v` is increasing and convex.
    pub fn tail_mass_bound(&self, radius: T) -> T {
        let p = &self.profile;
        let slope = p.dv.eval(radius);
        if !(radius > T::zero() && slope > T::zero()) || !p.dv.nondecreasing_from(radius, 2_000) {
            return T::infinity();
        }
        let head = (-p.v.eval(radius)).exp();
        match self.n {
            1 => lit::<T>(2.0) * head / slope,
            n => {
                // ∫_R^∞ ω r^{n-1} e^{-v(R) - k(r-R)} dr with ω the sphere area
                let area = sphere_area::<T>(n);
                let mut acc = T::zero();
                let mut fact = T::one();
                for j in 0..n {
                    if j > 0 {
                        fact = fact * count::<T>(j);
                    }
                    let binom = binomial::<T>(n - 1, j);
                    acc = acc + binom * radius.powi((n - 1 - j) as i32) * fact / slope.powi(j as i32 + 1);
                }
                area * head * acc
            }
        }
    }

    /// `Z = ∫ e^{−V}` by composite trapezoid on `[−L, L]ⁿ`, `m` nodes per axis.
    pub fn normalizing_constant(&self, half_width: T, nodes: usize) -> Result<T> {
        if self.n > 2 {
            return Err(Error::InvalidArgument("tensor quadrature supports n <= 2".into()));
        }
        if nodes < 3 || !(half_width > T::one()) {
            return Err(Error::InvalidArgument("need L > 1 and at least 3 nodes".into()));
        }
        let h = lit::<T>(2.0) * half_width / count::<T>(nodes - 1);
        let xs: Vec<T> = (0..nodes).map(|i| -half_width + h * count::<T>(i)).collect();
        let wt = |i: usize| if i == 0 || i == nodes - 1 { h / lit(2.0) } else { h };
        let z = match self.n {
            1 => xs.iter().enumerate().map(|(i, &x)| wt(i) * (-self.profile.v.eval(x.abs())).exp()).sum(),
            _ => {
                let mut acc = T::zero();
                for (i, &x) in xs.iter().enumerate() {
                    let mut row = T::zero();
                    for (j, &y) in xs.iter().enumerate() {
                        row = row + wt(j) * (-self.profile.v.eval((x * x + y * y).sqrt())).exp();
                    }
                    acc = acc + wt(i) * row;
                }
                acc
            }
        };
        let tail = self.tail_mass_bound(half_width - T::one());
        if !(tail <= lit::<T>(1e-10) * z) {
            return Err(Error::TailMassTooLarge { tail: tail.to_f64().unwrap_or(f64::INFINITY), mass: z.to_f64().unwrap_or(0.0) });
        }
        Ok(z)
    }

    /// Lower bound on `inf` of the smallest Hessian eigenvalue over `[−R, R]ⁿ`.
    pub fn curvature_lower_bound(&self, radius: T) -> T {
        let reach = radius * count::<T>(self.n).sqrt();
        self.profile.min_eig_bound(T::zero(), reach, PROFILE_CELLS)
    }

    /// Lower bound on `inf` of the smallest Hessian eigenvalue over all of ℝⁿ.
    pub fn global_curvature_lower_bound(&self) -> T {
        self.profile.global_min_eig_bound()
    }

    /// Whether `V` depends only on `|x|` (always true for this family set).
    pub fn is_radial(&self) -> bool {
        true
    }
}

/// Radial profile `v(r)` of a potential with its derivative sums.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialPotential<T> {
    pub n: usize,
    pub v: PowerSum<T>,
    pub dv: PowerSum<T>,
    pub d2v: PowerSum<T>,
    /// `v'(r)/r`, the tangential Hessian eigenvalue.
    pub dv_over_r: PowerSum<T>,
}

impl<T: Real> RadialPotential<T> {
    pub fn new(v: PowerSum<T>, n: usize) -> Self {
        let dv = v.derivative();
        let d2v = dv.derivative();
        let dv_over_r = dv.shift(-T::one());
        Self { n, v, dv, d2v, dv_over_r }
    }

    /// `|∇V|² = v'(r)²`.
    pub fn grad_sq(&self) -> PowerSum<T> {
        self.dv.mul(&self.dv)
    }

    /// `ΔV = v'' + (n − 1) v'/r`.
    pub fn laplacian(&self) -> PowerSum<T> {
        self.d2v.add(&self.dv_over_r.scale(count::<T>(self.n - 1)))
    }

    /// `x·∇V = r v'(r)`.
    pub fn radial_derivative(&self) -> PowerSum<T> {
        self.dv.shift(T::one())
    }

    pub fn min_eig_at(&self, r: T) -> T {
        let radial = self.d2v.eval(r);
        if self.n >= 2 {
            radial.min(self.dv_over_r.eval(r))
        } else {
            radial
        }
    }

    fn min_eig_bound(&self, lo: T, hi: T, cells: usize) -> T {
        let mut b = self.d2v.inf_bound(lo, hi, cells);
        if self.n >= 2 {
            b = b.min(self.dv_over_r.inf_bound(lo, hi, cells));
        }
        b
    }

    fn global_min_eig_bound(&self) -> T {
        let mut knee = self.d2v.settling_radius().unwrap_or(T::one());
        if self.n >= 2 {
            knee = knee.max(self.dv_over_r.settling_radius().unwrap_or(T::one()));
        }
        let mut tail = self.d2v.enclose(knee, T::infinity()).lo;
        if self.n >= 2 {
            tail = tail.min(self.dv_over_r.enclose(knee, T::infinity()).lo);
        }
        self.min_eig_bound(T::zero(), knee, PROFILE_CELLS).min(tail)
    }

    /// Lower bound of `inf v` over `[0, ∞)`.
    pub fn inf_value(&self) -> T {
        let knee = self.dv.settling_radius().unwrap_or(T::one());
        let lead_up = self.dv.leading().map_or(true, |m| m.coef > T::zero());
        let tail = if lead_up { self.v.eval(knee) } else { T::neg_infinity() };
        self.v.inf_bound(T::zero(), knee, PROFILE_CELLS).min(tail)
    }
}

pub(crate) fn norm<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}

fn sphere_area<T: Real>(n: usize) -> T {
    // 2 π^{n/2} / Γ(n/2)
    let half = count::<T>(n) / lit(2.0);
    lit::<T>(2.0) * T::PI().powf(half) / gamma_half_integer::<T>(n)
}

fn gamma_half_integer<T: Real>(n: usize) -> T {
    // Γ(n/2) for positive integer n
    if n % 2 == 0 {
        (1..n / 2).fold(T::one(), |acc, k| acc * count::<T>(k))
    } else {
        let mut g = T::PI().sqrt();
        let mut k = lit::<T>(0.5);
        while k < count::<T>(n) / lit(2.0) - lit(0.25) {
            g = g * k;
            k = k + T::one();
        }
        g
    }
}

fn binomial<T: Real>(n: usize, k: usize) -> T {
    (0..k).fold(T::one(), |acc, i| acc * count::<T>(n - i) / count::<T>(i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let g = PotentialSpec::gaussian(0.5, 1).unwrap();
        let e = g.eval(&[2.0]);
        assert_eq!((e.v, e.grad[0], e.hess_min_eig), (2.0, 2.0, 1.0));

        let p = PotentialSpec::power(1.0, 4.0, 2).unwrap();
        assert_eq!(p.eval(&[1.0, 0.0]).v, 1.0);

        let d = PotentialSpec::double_well(1.0, 1.0, 1).unwrap();
        let e = d.eval(&[1.0]);
        assert_eq!((e.v, e.grad[0]), (0.0, 2.0));
    }

    #[test]
    fn rejects_bad_families() {
        assert!(PotentialSpec::gaussian(0.0, 1).is_err());
        assert!(PotentialSpec::power(1.0, 1.0, 1).is_err());
        assert!(PotentialSpec::double_well(-1.0, 1.0, 1).is_err());
        assert!(PotentialSpec::<f64>::new(Family::Sum { terms: vec![] }, 1).is_err());
        assert!(PotentialSpec::gaussian(1.0, 0).is_err());
    }

    #[test]
    fn json_shape() {
        let g: PotentialSpec<f64> = serde_json::from_str(r#"{"family":"gaussian","c":0.5,"n":1,"offset":0}"#).unwrap();
        assert_eq!(g, PotentialSpec::gaussian(0.5, 1).unwrap());
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"family":"gaussian","c":0.5,"n":1,"offset":0.0}"#);
        let sum: PotentialSpec<f64> = serde_json::from_str(
            r#"{"family":"sum","terms":[{"family":"gaussian","c":1},{"family":"power","c":2,"b_pow":4}],"n":2}"#,
        )
        .unwrap();
        assert_eq!(sum.value(&[1.0, 0.0]), 3.0);
        assert!(serde_json::from_str::<PotentialSpec<f64>>(r#"{"family":"power","c":1,"b_pow":0.5,"n":1}"#).is_err());
    }

    #[test]
    fn normalizing_constants() {
        let z = PotentialSpec::gaussian(0.5, 1).unwrap().normalizing_constant(8.0, 4001).unwrap();
        assert!(((z - (2.0 * std::f64::consts::PI).sqrt()) / z).abs() < 1e-8);
        let z1 = PotentialSpec::gaussian(1.0, 1).unwrap().normalizing_constant(8.0, 4001).unwrap();
        assert!((z1 - std::f64::consts::PI.sqrt()).abs() < 1e-8);
        let shifted = PotentialSpec::gaussian(1.0, 1).unwrap().shifted(1.0).unwrap();
        let zs = shifted.normalizing_constant(8.0, 4001).unwrap();
        assert!((zs - z1 * (-1.0_f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn normalizing_constant_two_dims() {
        let z = PotentialSpec::gaussian(0.5, 2).unwrap().normalizing_constant(8.0, 801).unwrap();
        assert!((z - 2.0 * std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn tail_check_rejects_short_truncation() {
        let p = PotentialSpec::power(1.0, 1.5, 1).unwrap();
        assert!(matches!(p.normalizing_constant(4.0, 1001), Err(Error::TailMassTooLarge { .. })));
        assert!(p.normalizing_constant(12.0, 4001).is_ok());
    }

    #[test]
    fn curvature_examples() {
        assert_eq!(PotentialSpec::gaussian(0.5, 1).unwrap().curvature_lower_bound(3.0), 1.0);
        assert_eq!(PotentialSpec::double_well(1.0, 1.0, 1).unwrap().curvature_lower_bound(3.0), -2.0);
        let c0 = PotentialSpec::power(1.0, 4.0, 1).unwrap().curvature_lower_bound(3.0);
        assert!(c0 <= 0.0 && c0 > -1e-6, "{c0}");
        assert_eq!(PotentialSpec::power(1.0, 1.5, 1).unwrap().global_curvature_lower_bound(), 0.0);
        assert_eq!(PotentialSpec::double_well(1.0, 1.0, 2).unwrap().global_curvature_lower_bound(), -2.0);
    }

    #[test]
    fn f32_evaluation() {
        let g = PotentialSpec::<f32>::gaussian(0.5, 1).unwrap();
        assert_eq!(g.eval(&[2.0]).v, 2.0f32);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn families() -> Vec<PotentialSpec<f64>> {
            vec![
                PotentialSpec::gaussian(0.7, 3).unwrap(),
                PotentialSpec::power(1.3, 1.5, 3).unwrap(),
                PotentialSpec::power(0.5, 4.0, 3).unwrap(),
                PotentialSpec::double_well(1.0, 2.0, 3).unwrap(),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn gradient_matches_central_difference(x in prop::array::uniform3(0.2f64..3.0), signs in prop::array::uniform3(any::<bool>())) {
                let x: Vec<f64> = x.iter().zip(signs).map(|(v, s)| if s { *v } else { -*v }).collect();
                let h = 1e-5;
                for spec in families() {
                    let g = spec.eval(&x).grad;
                    for i in 0..3 {
                        let mut up = x.clone();
                        let mut dn = x.clone();
                        up[i] += h;
                        dn[i] -= h;
                        let fd = (spec.value(&up) - spec.value(&dn)) / (2.0 * h);
                        let scale = g[i].abs().max(1.0);
                        prop_assert!((fd - g[i]).abs() / scale < 1e-6, "{:?} {} {}", spec.family(), fd, g[i]);
                    }
                }
            }

            #[test]
            fn radial_families_are_even(x in prop::array::uniform3(-5.0f64..5.0)) {
                let neg: Vec<f64> = x.iter().map(|v| -v).collect();
                for spec in families() {
                    prop_assert_eq!(spec.eval(&x).v, spec.eval(&neg).v);
                }
            }

            #[test]
            fn normalizing_constant_decreases_with_offset(lo in -3.0f64..3.0, step in 0.0f64..2.0) {
                let z = |off: f64| {
                    PotentialSpec::with_offset(Family::Power { c: 1.0, b_pow: 2.0 }, 1, off)
                        .unwrap()
                        .normalizing_constant(8.0, 801)
                        .unwrap()
                };
                prop_assert!(z(lo + step) <= z(lo));
            }
        }
    }
}
