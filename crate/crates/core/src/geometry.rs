//! Envelope quantities over a family of sets `A_r`:
//! `Φ(r) = inf_{A_rᶜ} φ`, and `g`, `G`, `H` (sup of `|V|`, sup of `|∇V|²`,
//! oscillation of `V`) over the enlargement of `A_r`.
//!
//! Sets are radial (balls or level sets of a radial profile), so every
//! supremum reduces to an interval of radii and is bounded by monomial
//! enclosures. Monotone profiles are evaluated exactly at the endpoint.

use serde::{Deserialize, Serialize};

use crate::lyapunov::{LyapunovWitness, PhiShape};
use crate::potential::RadialPotential;
use crate::radial::PowerSum;
use crate::scalar::{lit, Real};

/// Cells used by grid bounds in this module.
const CELLS: usize = 2_000;

/// Largest parameter for which envelope inversions are attempted.
pub const MAX_PARAM: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum SetKind<T> {
    /// `A_r = B(o, r)`
    Balls,
    /// `A_r = {V < r}`
    VLevels,
    /// `A_r = {V + c0|x|²/2 < r}`
    HLevels { c0: T },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Enlargement {
    /// Points within distance 2 of `A_r`, bounded by a ball.
    Metric,
    /// The level set two units higher, `V̄_{r+2}`.
    Level,
    /// `A_r` itself, for local inequalities stated on `A_r`.
    Local,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SetFamily<T> {
    pub kind: SetKind<T>,
    pub enlargement: Enlargement,
}

impl<T: Real> SetFamily<T> {
    pub fn balls() -> Self {
        Self { kind: SetKind::Balls, enlargement: Enlargement::Metric }
    }

    pub fn v_levels(enlargement: Enlargement) -> Self {
        Self { kind: SetKind::VLevels, enlargement }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    GridWithMargin,
}

/// The five envelope functions consumed by the rate formulas.
pub trait Envelope<T: Real> {
    /// `Φ(r)`.
    fn phi(&self, r: T) -> T;
    /// `g(r)`.
    fn g(&self, r: T) -> T;
    /// `G(r)`.
    fn big_g(&self, r: T) -> T;
    /// `H(r)`.
    fn osc(&self, r: T) -> T;
    /// Smallest parameter with `A_r ⊇ B(o, r0)`.
    fn min_param(&self) -> T {
        T::zero()
    }
    /// End of the range on which `Φ` is trusted.
    fn max_param(&self) -> T {
        lit(MAX_PARAM)
    }
    fn provenance(&self) -> Provenance {
        Provenance::GridWithMargin
    }

    /// `Φ⁻¹(y) = inf{s ≥ 0 : Φ(s) ≥ y}` by bisection down to adjacent
    /// floats; `+∞` if `Φ` stays below `y` on the trusted range.
    fn phi_inverse(&self, y: T) -> T {
        if y.is_nan() || y == T::infinity() {
            return T::infinity();
        }
        if self.phi(T::zero()) >= y {
            return T::zero();
        }
        let mut hi = self.max_param();
        if !(self.phi(hi) >= y) {
            return T::infinity();
        }
        let mut lo = T::zero();
        for _ in 0..2_000 {
            let mid = lo + (hi - lo) / lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.phi(mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Envelope profile of a potential and a witness over a set family.
#[derive(Clone, Debug)]
pub struct GeometryProfile<T: Real> {
    v: RadialPotential<T>,
    phi: PhiShape<T>,
    family: SetFamily<T>,
    r0: T,
    force_grid: bool,
    inf_v: T,
    monotone_v: bool,
    monotone_dv: bool,
}

impl<T: Real> GeometryProfile<T> {
    pub fn new(witness: &LyapunovWitness<T>, family: SetFamily<T>) -> Self {
        Self::from_parts(witness.potential.radial().clone(), witness.phi, family, witness.r0)
    }

    pub fn from_parts(v: RadialPotential<T>, phi: PhiShape<T>, family: SetFamily<T>, r0: T) -> Self {
        let inf_v = v.inf_value();
        let monotone_v = v.v.nondecreasing_from(T::zero(), CELLS);
        let abs_dv_monotone = v.dv.eval(T::zero()) >= T::zero() && v.dv.nondecreasing_from(T::zero(), CELLS);
        Self { v, phi, family, r0, force_grid: false, inf_v, monotone_v, monotone_dv: abs_dv_monotone }
    }

    /// Disables every exact shortcut (for cross-checks).
    pub fn grid_only(mut self) -> Self {
        self.force_grid = true;
        self
    }

    pub fn family(&self) -> SetFamily<T> {
        self.family
    }

    fn exact_v(&self) -> bool {
        self.monotone_v && !self.force_grid
    }

    /// Profile whose sublevel sets are the `A_r` (`None` for balls).
    fn level_profile(&self) -> Option<PowerSum<T>> {
        match self.family.kind {
            SetKind::Balls => None,
            SetKind::VLevels => Some(self.v.v.clone()),
            SetKind::HLevels { c0 } => Some(self.v.v.add(&PowerSum::monomial(c0 / lit(2.0), lit(2.0)))),
        }
    }

    /// Radius of the smallest ball containing `A_r`.
    pub fn outer_radius(&self, r: T) -> T {
        match self.level_profile() {
            None => r.max(T::zero()),
            Some(h) => level_outer_radius(&h, r, !self.force_grid),
        }
    }

    /// Radius of the largest ball inside `A_r` (so `A_rᶜ ⊆ {|x| ≥ ρ_in}`).
    pub fn inner_radius(&self, r: T) -> T {
        match self.level_profile() {
            None => r.max(T::zero()),
            Some(h) => level_inner_radius(&h, r, !self.force_grid),
        }
    }

    /// Radius of a ball containing the enlargement of `A_r`.
    fn enlarged_radius(&self, r: T) -> T {
        match self.family.enlargement {
            Enlargement::Metric => self.outer_radius(r) + lit(2.0),
            Enlargement::Level => self.outer_radius(r + lit(2.0)),
            Enlargement::Local => self.outer_radius(r),
        }
    }

    fn sup_abs_v(&self, radius: T) -> T {
        if self.exact_v() {
            return self.v.v.eval(radius).abs().max(self.v.v.eval(T::zero()).abs());
        }
        let hi = self.v.v.sup_bound(T::zero(), radius, CELLS);
        let lo = self.v.v.inf_bound(T::zero(), radius, CELLS);
        hi.abs().max(lo.abs())
    }

    fn osc_v(&self, radius: T) -> T {
        if self.exact_v() {
            return self.v.v.eval(radius) - self.v.v.eval(T::zero());
        }
        self.v.v.sup_bound(T::zero(), radius, CELLS) - self.v.v.inf_bound(T::zero(), radius, CELLS)
    }

    fn sup_grad_sq(&self, radius: T) -> T {
        if self.monotone_dv && !self.force_grid {
            let d = self.v.dv.eval(radius);
            return d * d;
        }
        let hi = self.v.dv.sup_bound(T::zero(), radius, CELLS);
        let lo = self.v.dv.inf_bound(T::zero(), radius, CELLS);
        let m = hi.abs().max(lo.abs());
        m * m
    }

    /// `θ(r)`: bound on the largest Hessian entry over the shell `{V = r}`.
    pub fn theta_on_shell(&self, level: T) -> T {
        let prof = &self.v.v;
        let lo = level_inner_radius(prof, level, !self.force_grid);
        let hi = level_outer_radius(prof, level, !self.force_grid).max(lo);
        let sup_abs = |s: &PowerSum<T>| {
            let a = s.sup_bound(lo, hi, CELLS);
            let b = s.inf_bound(lo, hi, CELLS);
            a.abs().max(b.abs())
        };
        if self.v.n == 1 {
            return sup_abs(&self.v.d2v);
        }
        let p = &self.v.dv_over_r;
        let q = self.v.d2v.sub(p);
        sup_abs(p).max(sup_abs(&self.v.d2v)).max(sup_abs(&q) / lit(2.0))
    }
}

impl<T: Real> Envelope<T> for GeometryProfile<T> {
    fn phi(&self, r: T) -> T {
        if let (SetKind::VLevels, PhiShape::PotentialPower { coef, q }) = (self.family.kind, self.phi) {
            if !self.force_grid {
                return coef * r.max(T::zero()).powf(q);
            }
        }
        let rho = self.inner_radius(r);
        if self.force_grid {
            let knee = self.v.dv.settling_radius().unwrap_or(T::one()).max(rho) * lit(2.0);
            let body = crate::radial::cell_edges(rho, knee, CELLS)
                .windows(2)
                .map(|w| self.phi.enclose(&self.v, w[0], w[1]).lo)
                .fold(T::infinity(), T::min);
            return body.min(self.phi.inf_beyond(&self.v, knee)).max(T::zero());
        }
        self.phi.inf_beyond(&self.v, rho).max(T::zero())
    }

    fn g(&self, r: T) -> T {
        match self.family.enlargement {
            Enlargement::Level if !matches!(self.family.kind, SetKind::Balls) => (r + lit(2.0)).max(-self.inf_v),
            _ => self.sup_abs_v(self.enlarged_radius(r)),
        }
    }

    fn big_g(&self, r: T) -> T {
        self.sup_grad_sq(self.enlarged_radius(r))
    }

    fn osc(&self, r: T) -> T {
        match self.family.enlargement {
            Enlargement::Level if matches!(self.family.kind, SetKind::VLevels) => (r + lit(2.0) - self.inf_v).max(T::zero()),
            _ => self.osc_v(self.enlarged_radius(r)),
        }
    }

    fn min_param(&self) -> T {
        match self.level_profile() {
            None => self.r0,
            Some(h) => {
                // A_r ⊇ B(o, r0) iff r > sup_{|x| ≤ r0} level
                if !self.force_grid && h.nondecreasing_from(T::zero(), CELLS) {
                    h.eval(self.r0)
                } else {
                    h.sup_bound(T::zero(), self.r0, CELLS)
                }
            }
        }
    }

    fn provenance(&self) -> Provenance {
        let exact_phi = self.phi.is_monotone_radial(&self.v);
        if !self.force_grid && matches!(self.family.kind, SetKind::Balls) && self.monotone_v && self.monotone_dv && exact_phi {
            Provenance::Exact
        } else {
            Provenance::GridWithMargin
        }
    }
}

/// Closed-form inverse of `c·t^p + k` when the profile has that shape.
fn monomial_inverse<T: Real>(h: &PowerSum<T>, level: T) -> Option<T> {
    let terms = h.terms();
    let (k, m) = match terms {
        [m] => (T::zero(), *m),
        [c, m] if c.exp == T::zero() => (c.coef, *m),
        _ => return None,
    };
    if !(m.coef > T::zero() && m.exp > T::zero()) {
        return None;
    }
    Some(((level - k).max(T::zero()) / m.coef).powf(T::one() / m.exp))
}

/// A radius beyond which `h > level` and `h` is increasing.
fn escape_radius<T: Real>(h: &PowerSum<T>, level: T) -> Option<T> {
    let lead = h.leading()?;
    if !(lead.coef > T::zero() && lead.exp > T::zero()) {
        return None;
    }
    let mut t = h.derivative().settling_radius().unwrap_or(T::one()).max(T::one());
    for _ in 0..200 {
        if h.enclose(t, t).lo > level {
            return Some(t);
        }
        t = t * lit(2.0);
    }
    None
}

fn level_outer_radius<T: Real>(h: &PowerSum<T>, level: T, exact: bool) -> T {
    if exact {
        if let Some(t) = monomial_inverse(h, level) {
            return t;
        }
    }
    let Some(top) = escape_radius(h, level) else { return T::infinity() };
    h.last_at_most(level, T::zero(), top, CELLS).unwrap_or(T::zero())
}

fn level_inner_radius<T: Real>(h: &PowerSum<T>, level: T, exact: bool) -> T {
    if exact {
        if let Some(t) = monomial_inverse(h, level) {
            return t;
        }
    }
    let Some(top) = escape_radius(h, level) else { return T::zero() };
    h.first_at_least(level, T::zero(), top, CELLS).unwrap_or(top)
}

type ScalarMap<T> = Box<dyn Fn(T) -> T + Send + Sync>;

/// Envelope built from closures, for tests and hand-specified profiles.
pub struct FnProfile<T> {
    pub phi: ScalarMap<T>,
    pub g: ScalarMap<T>,
    pub big_g: ScalarMap<T>,
    pub osc: ScalarMap<T>,
    pub min_param: T,
    pub max_param: T,
}

impl<T: Real> FnProfile<T> {
    /// Flat potential (`g = G = H = 0`) with the given `Φ`.
    pub fn flat(phi: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self {
            phi: Box::new(phi),
            g: Box::new(|_| T::zero()),
            big_g: Box::new(|_| T::zero()),
            osc: Box::new(|_| T::zero()),
            min_param: T::zero(),
            max_param: lit(MAX_PARAM),
        }
    }
}

impl<T: Real> Envelope<T> for FnProfile<T> {
    fn phi(&self, r: T) -> T {
        (self.phi)(r)
    }
    fn g(&self, r: T) -> T {
        (self.g)(r)
    }
    fn big_g(&self, r: T) -> T {
        (self.big_g)(r)
    }
    fn osc(&self, r: T) -> T {
        (self.osc)(r)
    }
    fn min_param(&self) -> T {
        self.min_param
    }
    fn max_param(&self) -> T {
        self.max_param
    }
}

/// One row of a sampled profile table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileRow<T> {
    pub r: T,
    pub phi: T,
    pub g: T,
    pub big_g: T,
    pub osc: T,
}

pub fn sample_profile<T: Real, E: Envelope<T> + ?Sized>(env: &E, rs: &[T]) -> Vec<ProfileRow<T>> {
    rs.iter().map(|&r| ProfileRow { r, phi: env.phi(r), g: env.g(r), big_g: env.big_g(r), osc: env.osc(r) }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;
    use crate::scalar::lin_space;

    fn gauss_profile(family: SetFamily<f64>, phi: PhiShape<f64>) -> GeometryProfile<f64> {
        let spec = PotentialSpec::<f64>::gaussian(0.5, 1).unwrap();
        GeometryProfile::from_parts(spec.radial().clone(), phi, family, 2.0)
    }

    const EIGHTH: PhiShape<f64> = PhiShape::RadialPower { coef: 0.125, p: 2.0 };

    #[test]
    fn phi_examples() {
        let p = gauss_profile(SetFamily::balls(), EIGHTH);
        assert_eq!(p.phi(4.0), 2.0);
        assert_eq!(p.phi(0.0), 0.0);
        let lv = gauss_profile(SetFamily::v_levels(Enlargement::Level), PhiShape::PotentialPower { coef: 0.5, q: 1.0 });
        assert_eq!(lv.phi(4.0), 2.0);
        assert_eq!(p.provenance(), Provenance::Exact);
    }

    #[test]
    fn phi_inverse_examples() {
        let p = gauss_profile(SetFamily::balls(), EIGHTH);
        assert_eq!(p.phi_inverse(2.0), 4.0);
        assert_eq!(p.phi_inverse(0.0), 0.0);
        let mut capped = FnProfile::flat(|r: f64| r.min(5.0));
        capped.max_param = 100.0;
        assert_eq!(capped.phi_inverse(6.0), f64::INFINITY);
    }

    #[test]
    fn envelope_examples() {
        let p = gauss_profile(SetFamily::balls(), EIGHTH);
        assert_eq!((p.g(3.0), p.big_g(3.0), p.osc(3.0)), (12.5, 25.0, 12.5));
        assert_eq!((p.g(0.0), p.big_g(0.0), p.osc(0.0)), (2.0, 4.0, 2.0));
        let flat = GeometryProfile::from_parts(
            RadialPotential::new(PowerSum::constant(-3.0), 1),
            EIGHTH,
            SetFamily::balls(),
            1.0,
        );
        assert_eq!((flat.g(2.0), flat.big_g(2.0), flat.osc(2.0)), (3.0, 0.0, 0.0));
    }

    #[test]
    fn level_enlargement_gaussian() {
        let lv = gauss_profile(SetFamily::v_levels(Enlargement::Level), PhiShape::PotentialPower { coef: 0.5, q: 1.0 });
        for r in [0.5, 1.0, 4.0, 10.0] {
            assert_eq!(lv.phi(r), r / 2.0);
            assert_eq!(lv.g(r), r + 2.0);
            assert!((lv.big_g(r) - 2.0 * (r + 2.0)).abs() < 1e-12 * (r + 2.0));
        }
        assert_eq!(lv.min_param(), 2.0);
    }

    #[test]
    fn grid_dominates_exact() {
        for spec in [PotentialSpec::<f64>::gaussian(0.5, 1).unwrap(), PotentialSpec::power(1.0, 4.0, 1).unwrap()] {
            let exact = GeometryProfile::from_parts(spec.radial().clone(), EIGHTH, SetFamily::balls(), 1.0);
            let grid = exact.clone().grid_only();
            for r in lin_space(0.1, 6.0, 12) {
                assert!(grid.g(r) >= exact.g(r));
                assert!(grid.big_g(r) >= exact.big_g(r));
                assert!(grid.osc(r) >= exact.osc(r));
                assert!(grid.phi(r) <= exact.phi(r));
            }
        }
    }

    #[test]
    fn double_well_levels_are_conservative() {
        let spec = PotentialSpec::<f64>::double_well(1.0, 1.0, 1).unwrap();
        let p = GeometryProfile::from_parts(spec.radial().clone(), EIGHTH, SetFamily::v_levels(Enlargement::Metric), 1.0);
        // {x⁴ − x² < 2} = (−√2, √2)
        let out = p.outer_radius(2.0);
        assert!(out >= 2f64.sqrt() && out < 2f64.sqrt() + 1e-9);
        let inn = p.inner_radius(2.0);
        assert!(inn <= 2f64.sqrt() && inn > 2f64.sqrt() - 1e-9);
        assert!(p.osc(2.0) >= 0.25 + (out + 2.0).powi(4) - (out + 2.0).powi(2) - 1e-6);
        assert!(p.min_param() >= 0.0);
    }

    #[test]
    fn theta_shell() {
        let spec = PotentialSpec::<f64>::power(1.0, 4.0, 1).unwrap();
        let p = GeometryProfile::from_parts(spec.radial().clone(), EIGHTH, SetFamily::balls(), 1.0);
        // shell {x⁴ = 16} at |x| = 2, V'' = 48
        assert!((p.theta_on_shell(16.0) - 48.0).abs() < 1e-6);
        let g2 = PotentialSpec::<f64>::gaussian(0.5, 2).unwrap();
        let p2 = GeometryProfile::from_parts(g2.radial().clone(), EIGHTH, SetFamily::balls(), 1.0);
        assert_eq!(p2.theta_on_shell(3.0), 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn inverse_never_overshoots(r in 0.01f64..50.0, c in 0.05f64..3.0, p in 0.5f64..6.0) {
                let prof = gauss_profile(SetFamily::balls(), PhiShape::RadialPower { coef: c, p });
                let y = prof.phi(r);
                let back = prof.phi_inverse(y);
                prop_assert!(back <= r);
                prop_assert!(prof.phi(back) >= y);
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]

            #[test]
            fn envelopes_monotone(c in 0.1f64..2.0, b in 1.1f64..5.0, a2 in 0.0f64..2.0) {
                for spec in [PotentialSpec::<f64>::power(c, b, 1).unwrap(), PotentialSpec::double_well(c, a2, 2).unwrap()] {
                    let prof = GeometryProfile::from_parts(spec.radial().clone(), EIGHTH, SetFamily::balls(), 1.0);
                    let rows = sample_profile(&prof, &lin_space(0.05, 8.0, 50));
                    for w in rows.windows(2) {
                        prop_assert!(w[1].g >= w[0].g && w[1].big_g >= w[0].big_g && w[1].osc >= w[0].osc);
                        prop_assert!(w[1].phi >= w[0].phi);
                    }
                }
            }
        }
    }
}
