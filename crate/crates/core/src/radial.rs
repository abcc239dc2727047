//! Radial profiles as finite sums of real-exponent monomials `Σ c_k r^{p_k}`.
//!
//! Every potential family in the engine is radial, and so are all derived
//! quantities (gradient norm, Laplacian, drift ratios). A monomial is
//! monotone on any interval of `[0, ∞]`, so a sum can be enclosed on an
//! interval term by term. Those enclosures are what make the grid extrema
//! in `geometry` and `lyapunov` one-sided conservative.

use serde::{Deserialize, Serialize};

use crate::scalar::{count, lit, Real};

/// Closed interval `[lo, hi]`, endpoints may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn point(x: T) -> Self {
        Self { lo: x, hi: x }
    }

    fn add(self, o: Self) -> Self {
        Self { lo: nan_to(self.lo + o.lo, T::neg_infinity()), hi: nan_to(self.hi + o.hi, T::infinity()) }
    }
}

fn nan_to<T: Real>(x: T, fallback: T) -> T {
    if x.is_nan() {
        fallback
    } else {
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial<T> {
    pub coef: T,
    pub exp: T,
}

impl<T: Real> Monomial<T> {
    /// Value at `r >= 0`; `r` may be `+∞`.
    pub fn eval(&self, r: T) -> T {
        let zero = T::zero();
        if self.exp == zero {
            return self.coef;
        }
        if r == zero {
            return if self.exp > zero { zero } else { self.coef.signum() * T::infinity() };
        }
        if r.is_infinite() {
            return if self.exp > zero { self.coef.signum() * T::infinity() } else { zero };
        }
        self.coef * r.powf(self.exp)
    }

    fn enclose(&self, lo: T, hi: T) -> Interval<T> {
        let (a, b) = (self.eval(lo), self.eval(hi));
        Interval { lo: a.min(b), hi: a.max(b) }
    }
}

/// `Σ c_k r^{p_k}` on `r ≥ 0`, terms kept sorted by exponent with like
/// exponents merged and zero coefficients dropped.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PowerSum<T> {
    terms: Vec<Monomial<T>>,
}

impl<T: Real> PowerSum<T> {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::monomial(c, T::zero())
    }

    pub fn monomial(coef: T, exp: T) -> Self {
        Self::from_terms(vec![Monomial { coef, exp }])
    }

    pub fn from_terms(mut terms: Vec<Monomial<T>>) -> Self {
        terms.sort_by(|a, b| a.exp.partial_cmp(&b.exp).expect("finite exponents"));
        let mut merged: Vec<Monomial<T>> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.exp == t.exp => last.coef = last.coef + t.coef,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coef != T::zero());
        Self { terms: merged }
    }

    pub fn terms(&self) -> &[Monomial<T>] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut t = self.terms.clone();
        t.extend_from_slice(&other.terms);
        Self::from_terms(t)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn scale(&self, k: T) -> Self {
        Self::from_terms(self.terms.iter().map(|t| Monomial { coef: t.coef * k, exp: t.exp }).collect())
    }

    /// Multiplies by `r^k`.
    pub fn shift(&self, k: T) -> Self {
        Self::from_terms(self.terms.iter().map(|t| Monomial { coef: t.coef, exp: t.exp + k }).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                out.push(Monomial { coef: a.coef * b.coef, exp: a.exp + b.exp });
            }
        }
        Self::from_terms(out)
    }

    pub fn derivative(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|t| t.exp != T::zero())
                .map(|t| Monomial { coef: t.coef * t.exp, exp: t.exp - T::one() })
                .collect(),
        )
    }

    pub fn eval(&self, r: T) -> T {
        let mut acc = T::zero();
        for t in &self.terms {
            acc = acc + t.eval(r);
        }
        acc
    }

    /// Term-wise enclosure of the sum on `[lo, hi]` (`hi` may be `+∞`).
    pub fn enclose(&self, lo: T, hi: T) -> Interval<T> {
        self.terms.iter().fold(Interval::point(T::zero()), |acc, t| acc.add(t.enclose(lo, hi)))
    }

    /// Highest-exponent term.
    pub fn leading(&self) -> Option<Monomial<T>> {
        self.terms.last().copied()
    }

    /// Radius `ρ ≥ 1` beyond which the sign of the sum equals the sign of
    /// its leading coefficient (strictly). `None` for the zero sum.
    pub fn settling_radius(&self) -> Option<T> {
        let lead = self.leading()?;
        let mut opposite: Vec<Monomial<T>> =
            self.terms[..self.terms.len() - 1].iter().copied().filter(|t| t.coef * lead.coef < T::zero()).collect();
        let m = count::<T>(opposite.len() + 1);
        let mut rho = T::one();
        for t in opposite.drain(..) {
            let need = (m * t.coef.abs() / lead.coef.abs()).powf(T::one() / (lead.exp - t.exp));
            rho = rho.max(need);
        }
        Some(rho)
    }

    /// Upper bound of `sup` over `[lo, hi]` from `cells` uniform sub-cells.
    pub fn sup_bound(&self, lo: T, hi: T, cells: usize) -> T {
        cell_edges(lo, hi, cells).windows(2).map(|w| self.enclose(w[0], w[1]).hi).fold(T::neg_infinity(), T::max)
    }

    /// Lower bound of `inf` over `[lo, hi]` from `cells` uniform sub-cells.
    pub fn inf_bound(&self, lo: T, hi: T, cells: usize) -> T {
        cell_edges(lo, hi, cells).windows(2).map(|w| self.enclose(w[0], w[1]).lo).fold(T::infinity(), T::min)
    }

    /// True when every term has the same coefficient sign and a non-negative
    /// exponent sign agreement, i.e. the sum is monotone on `[0, ∞)` by
    /// construction. Returns `Some(true)` for non-decreasing, `Some(false)`
    /// for non-increasing.
    pub fn structurally_monotone(&self) -> Option<bool> {
        let zero = T::zero();
        let mut dir: Option<bool> = None;
        for t in &self.terms {
            if t.exp == zero {
                continue;
            }
            let up = (t.coef > zero) == (t.exp > zero);
            match dir {
                None => dir = Some(up),
                Some(d) if d != up => return None,
                _ => {}
            }
        }
        Some(dir.unwrap_or(true))
    }

    /// Whether the sum is non-decreasing on `[lo, ∞)`: derivative enclosure
    /// non-negative on uniform cells up to its settling radius and a
    /// positive leading term beyond.
    pub fn nondecreasing_from(&self, lo: T, cells: usize) -> bool {
        if self.structurally_monotone() == Some(true) {
            return true;
        }
        let d = self.derivative();
        let Some(lead) = d.leading() else { return true };
        if lead.coef < T::zero() {
            return false;
        }
        let rho = d.settling_radius().unwrap_or(T::one()).max(lo);
        if rho <= lo {
            return true;
        }
        d.inf_bound(lo, rho, cells) >= T::zero()
    }

    /// Rigorous upper bound on `sup{t ∈ [lo, hi] : f(t) ≤ level}`; `None` if
    /// the enclosure proves `f > level` on the whole range.
    pub fn last_at_most(&self, level: T, lo: T, hi: T, cells: usize) -> Option<T> {
        let edges = cell_edges(lo, hi, cells);
        let idx = edges.windows(2).rposition(|w| self.enclose(w[0], w[1]).lo <= level)?;
        let (a, mut b) = (lo, edges[idx + 1]);
        // peel proven pieces `(b − step, b]` off the top until none remain
        for _ in 0..400 {
            let mut step = (b - a) / lit(2.0);
            let mut moved = false;
            while b - step < b && b - step >= a {
                if self.enclose(b - step, b).lo > level {
                    b = b - step;
                    moved = true;
                    break;
                }
                step = step / lit(2.0);
            }
            if !moved {
                break;
            }
        }
        Some(b)
    }

    /// Rigorous lower bound on `inf{t ∈ [lo, hi] : f(t) ≥ level}`; `None` if
    /// the enclosure proves `f < level` on the whole range.
    pub fn first_at_least(&self, level: T, lo: T, hi: T, cells: usize) -> Option<T> {
        let edges = cell_edges(lo, hi, cells);
        let idx = edges.windows(2).position(|w| self.enclose(w[0], w[1]).hi >= level)?;
        let (mut a, b) = (edges[idx], hi);
        for _ in 0..400 {
            let mut step = (b - a) / lit(2.0);
            let mut moved = false;
            while a + step > a && a + step <= b {
                if self.enclose(a, a + step).hi < level {
                    a = a + step;
                    moved = true;
                    break;
                }
                step = step / lit(2.0);
            }
            if !moved {
                break;
            }
        }
        Some(a)
    }
}

/// `cells + 1` uniform edges of `[lo, hi]`.
pub fn cell_edges<T: Real>(lo: T, hi: T, cells: usize) -> Vec<T> {
    let cells = cells.max(1);
    let n = count::<T>(cells);
    (0..=cells).map(|i| if i == cells { hi } else { lo + (hi - lo) * count::<T>(i) / n }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dw() -> PowerSum<f64> {
        PowerSum::from_terms(vec![Monomial { coef: 1.0, exp: 4.0 }, Monomial { coef: -1.0, exp: 2.0 }])
    }

    #[test]
    fn merges_like_terms() {
        let p = PowerSum::monomial(2.0, 2.0).add(&PowerSum::monomial(-2.0, 2.0));
        assert!(p.is_zero());
        let q = PowerSum::monomial(1.0, 1.0).mul(&PowerSum::monomial(3.0, 1.0));
        assert_eq!(q.terms(), &[Monomial { coef: 3.0, exp: 2.0 }]);
    }

    #[test]
    fn derivative_of_double_well() {
        let d = dw().derivative();
        assert_eq!(d.eval(1.0), 2.0);
        assert_eq!(d.derivative().eval(0.0), -2.0);
    }

    #[test]
    fn enclosure_contains_samples() {
        let f = dw();
        let enc = f.enclose(0.2, 1.3);
        for i in 0..=100 {
            let r = 0.2 + 1.1 * i as f64 / 100.0;
            let v = f.eval(r);
            assert!(enc.lo <= v && v <= enc.hi);
        }
    }

    #[test]
    fn settling_radius_bounds_sign() {
        let f = PowerSum::from_terms(vec![
            Monomial { coef: -1.0, exp: 3.0 },
            Monomial { coef: 5.0, exp: 2.0 },
            Monomial { coef: 7.0, exp: 0.5 },
        ]);
        let rho = f.settling_radius().unwrap();
        for k in 0..200 {
            let r = rho * (1.0 + k as f64 * 0.1);
            assert!(f.eval(r) < 0.0);
        }
    }

    #[test]
    fn crossings_bracket_the_root() {
        let f = PowerSum::monomial(0.5, 2.0);
        let up = f.last_at_most(2.0, 0.0, 10.0, 100).unwrap();
        let down = f.first_at_least(2.0, 0.0, 10.0, 100).unwrap();
        assert!(up >= 2.0 && up - 2.0 < 1e-12);
        assert!(down <= 2.0 && 2.0 - down < 1e-12);
    }

    #[test]
    fn singular_terms_at_origin() {
        let f = PowerSum::monomial(0.75, -0.5);
        assert_eq!(f.eval(0.0), f64::INFINITY);
        assert_eq!(f.enclose(0.0, 1.0).lo, 0.75);
        assert_eq!(f.enclose(1.0, f64::INFINITY).lo, 0.0);
    }

    #[test]
    fn monotonicity_detection() {
        assert_eq!(PowerSum::monomial(1.0, 2.0).structurally_monotone(), Some(true));
        assert!(dw().structurally_monotone().is_none());
        assert!(dw().nondecreasing_from(1.0, 100));
        assert!(!dw().nondecreasing_from(0.1, 100));
    }
}
