//! Reference-measure super-Poincaré inputs: the Lebesgue rate, the Nash
//! constant, the Neumann heat-kernel bound on an interval, and the local
//! rate on a level set with a second-derivative envelope `θ`.

use serde::{Deserialize, Serialize};

use crate::scalar::{count, lit, softplus, Real};

/// `β(s) = (4πs)^{−n/2}`.
pub fn lebesgue_beta<T: Real>(n: usize, s: T) -> T {
    (lit::<T>(4.0) * T::PI() * s).powf(-count::<T>(n) / lit(2.0))
}

/// `ln β(s)` for the Lebesgue rate.
pub fn lebesgue_ln_beta<T: Real>(n: usize, s: T) -> T {
    -count::<T>(n) / lit::<T>(2.0) * (lit::<T>(4.0) * T::PI() * s).ln()
}

/// `C_n = 2(1 + 2/n)(1 + n/2)^{2/n}(8π)^{−n/4}`.
pub fn nash_constant<T: Real>(n: usize) -> T {
    let nf = count::<T>(n);
    let two = lit::<T>(2.0);
    two * (T::one() + two / nf) * (T::one() + nf / two).powf(two / nf) * (lit::<T>(8.0) * T::PI()).powf(-nf / lit(4.0))
}

/// Nash constant implied by the Lebesgue rate itself: minimizing
/// `sE + (4πs)^{−n/2}M²` over `s` and raising to `(n+2)/n` gives
/// `‖f‖₂^{2+4/n} ≤ K_n E ‖f‖₁^{4/n}` with this `K_n`.
pub fn nash_constant_from_spi<T: Real>(n: usize) -> T {
    let nf = count::<T>(n);
    let two = lit::<T>(2.0);
    (T::one() + two / nf) * (T::one() + nf / two).powf(two / nf) / (lit::<T>(4.0) * T::PI())
}

/// `min_s (sE + β(s)M²)` for the Lebesgue rate by golden-section search in
/// `ln s`, without using the closed form.
pub fn optimize_spi_bound<T: Real>(n: usize, energy: T, mass: T) -> T {
    let objective = |ln_s: T| {
        let s = ln_s.exp();
        s * energy + lebesgue_beta(n, s) * mass * mass
    };
    // bracket the minimum on a coarse log grid first
    let (lo, hi) = (lit::<T>(-60.0), lit::<T>(60.0));
    let steps = 240;
    let mut best = 0;
    let mut best_val = T::infinity();
    for i in 0..=steps {
        let x = lo + (hi - lo) * count::<T>(i) / count::<T>(steps);
        let v = objective(x);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let width = (hi - lo) / count::<T>(steps);
    let mut a = lo + width * count::<T>(best.saturating_sub(1));
    let mut b = lo + width * count::<T>((best + 1).min(steps));
    let inv_phi = (lit::<T>(5.0).sqrt() - T::one()) / lit(2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    for _ in 0..200 {
        if objective(c) < objective(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    objective((a + b) / lit(2.0)).min(best_val)
}

/// Nash constant recovered from an optimized super-Poincaré bound at a
/// given `(E, M)`: `Q^{(n+2)/n} / (E M^{4/n})`.
pub fn nash_constant_by_optimization<T: Real>(n: usize, energy: T, mass: T) -> T {
    let nf = count::<T>(n);
    let q = optimize_spi_bound(n, energy, mass);
    q.powf((nf + lit(2.0)) / nf) / (energy * mass.powf(lit::<T>(4.0) / nf))
}

/// Image-charge bound on the Neumann heat kernel of an interval of length
/// `r`: `(2πt)^{−1/2}(2 + Σ_{k≥1}[e^{−((2k−1)r)²/2t} + e^{−(2kr)²/2t}])`,
/// summed until the next term drops below `tol` times the partial sum.
pub fn neumann_kernel_sup<T: Real>(r: T, t: T, tol: T) -> T {
    let two = lit::<T>(2.0);
    let term = |k: usize| {
        let odd = (count::<T>(2 * k - 1) * r).powi(2) / (two * t);
        let even = (count::<T>(2 * k) * r).powi(2) / (two * t);
        (-odd).exp() + (-even).exp()
    };
    let mut sum = two;
    let mut k = 1;
    loop {
        let next = term(k);
        if next < tol * sum || k > 1_000_000 {
            break;
        }
        sum = sum + next;
        k += 1;
    }
    sum / (two * T::PI() * t).sqrt()
}

/// `β_r(s) = C θⁿ (1 + s^{−n/2})`.
pub fn bord_beta<T: Real>(n: usize, theta: T, s: T, c_n: T) -> T {
    let nf = count::<T>(n);
    c_n * theta.powf(nf) * (T::one() + s.powf(-nf / lit(2.0)))
}

/// A baseline rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", bound = "T: Real")]
pub enum BaselineBeta<T> {
    Lebesgue { n: usize },
    /// `θ` fixed; `c_n_set` records whether the constant was supplied.
    Bord { n: usize, theta: T, c_n: T, c_n_set: bool },
}

impl<T: Real> BaselineBeta<T> {
    pub fn lebesgue(n: usize) -> Self {
        BaselineBeta::Lebesgue { n }
    }

    pub fn bord(n: usize, theta: T, c_n: Option<T>) -> Self {
        BaselineBeta::Bord { n, theta, c_n: c_n.unwrap_or(T::one()), c_n_set: c_n.is_some() }
    }

    pub fn dim(&self) -> usize {
        match self {
            BaselineBeta::Lebesgue { n } | BaselineBeta::Bord { n, .. } => *n,
        }
    }

    pub fn value(&self, s: T) -> T {
        self.ln_value(s).exp()
    }

    /// `ln β(s)`; `+∞` for `s ≤ 0`.
    pub fn ln_value(&self, s: T) -> T {
        if !(s > T::zero()) {
            return T::infinity();
        }
        self.ln_value_at_ln(s.ln())
    }

    /// `ln β(e^{ln_s})`, for arguments too small to represent.
    pub fn ln_value_at_ln(&self, ln_s: T) -> T {
        if ln_s.is_nan() || ln_s == T::neg_infinity() {
            return T::infinity();
        }
        let two = lit::<T>(2.0);
        match *self {
            BaselineBeta::Lebesgue { n } => -count::<T>(n) / two * ((lit::<T>(4.0) * T::PI()).ln() + ln_s),
            BaselineBeta::Bord { n, theta, c_n, .. } => {
                let nf = count::<T>(n);
                c_n.ln() + nf * theta.ln() + softplus(-nf / two * ln_s)
            }
        }
    }

    /// Names of constants left at their placeholder values.
    pub fn unnormalized(&self) -> Vec<String> {
        match self {
            BaselineBeta::Bord { c_n_set: false, .. } => vec!["C(n)".into()],
            _ => Vec::new(),
        }
    }
}
