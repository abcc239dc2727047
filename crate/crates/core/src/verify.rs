//! One-dimensional finite-difference oracle: a Neumann truncation of
//! `L = Δ − V′∂` on `[−L, L]`, its spectral gap by two independent
//! eigensolvers, empirical super-Poincaré and log-Sobolev ratios over a
//! battery of explicit test functions, and soundness checks of
//! certificates against those ratios.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{Certificate, CertificateKind};
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovWitness;
use crate::potential::PotentialSpec;
use crate::scalar::{count, lit, Real};

/// Discrete carrier of `μ` and of `E(f,f) = ∫|f′|²dμ`.
#[derive(Clone, Debug)]
pub struct DiscreteModel<T> {
    pub x: Vec<T>,
    pub h: T,
    /// `e^{−V(x_i)}h`, normalized to sum 1.
    pub node_weights: Vec<T>,
    /// `e^{−V(midpoint)}h` with the same normalization.
    pub edge_weights: Vec<T>,
}

/// Smallest admissible number of nodes.
pub const MIN_NODES: usize = 201;

impl<T: Real> DiscreteModel<T> {
    /// Model of `e^{−v}` on `[lo, hi]` with `m` nodes.
    pub fn from_fn(v: impl Fn(T) -> T, lo: T, hi: T, m: usize) -> Result<Self> {
        if m < MIN_NODES {
            return Err(Error::InvalidArgument(format!("need at least {MIN_NODES} nodes, got {m}")));
        }
        if !(hi > lo) {
            return Err(Error::InvalidArgument("empty interval".into()));
        }
        let h = (hi - lo) / count::<T>(m - 1);
        let mut x: Vec<T> = (0..m).map(|i| lo + h * count::<T>(i)).collect();
        x[m - 1] = hi;
        // mirror so that symmetric intervals give exactly symmetric nodes
        if lo == -hi {
            for i in 0..m / 2 {
                x[m - 1 - i] = -x[i];
            }
            if m % 2 == 1 {
                x[m / 2] = T::zero();
            }
        }
        let two = lit::<T>(2.0);
        let vn: Vec<T> = x.iter().map(|&t| v(t)).collect();
        let ve: Vec<T> = x.windows(2).map(|w| v((w[0] + w[1]) / two)).collect();
        let floor = vn.iter().chain(ve.iter()).copied().fold(T::infinity(), T::min);
        let node: Vec<T> = vn.iter().map(|&a| (floor - a).exp() * h).collect();
        let z: T = node.iter().copied().sum();
        let node_weights = node.iter().map(|&a| a / z).collect();
        let edge_weights = ve.iter().map(|&a| (floor - a).exp() * h / z).collect();
        Ok(Self { x, h, node_weights, edge_weights })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sample(&self, f: impl Fn(T) -> T) -> Vec<T> {
        self.x.iter().map(|&t| f(t)).collect()
    }
}

/// Model of a one-dimensional potential on `[−L, L]`.
pub fn build_model<T: Real>(spec: &PotentialSpec<T>, half_width: T, nodes: usize) -> Result<DiscreteModel<T>> {
    if spec.dim() != 1 {
        return Err(Error::InvalidArgument(format!("the oracle is one-dimensional, got n = {}", spec.dim())));
    }
    let model = DiscreteModel::from_fn(|t| spec.value(&[t]), -half_width, half_width, nodes)?;
    // mass on the grid, in the units of e^{−V}
    let mass: T = model.x.iter().map(|&t| (-spec.value(&[t])).exp()).sum::<T>() * model.h;
    let tail = spec.tail_mass_bound(half_width - T::one());
    if !(tail <= lit::<T>(1e-10) * mass) {
        return Err(Error::TailMassTooLarge {
            tail: tail.to_f64().unwrap_or(f64::INFINITY),
            mass: mass.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(model)
}

/// Functional of a grid function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Mean,
    Variance,
    /// `Ent_μ(f²)`.
    Entropy,
    /// `μ(|f|)`.
    L1,
    /// `μ(f²)`.
    SecondMoment,
    Energy,
}

pub fn functional<T: Real>(model: &DiscreteModel<T>, f: &[T], kind: Functional) -> T {
    let w = &model.node_weights;
    let dot = |g: &dyn Fn(T) -> T| f.iter().zip(w).map(|(&a, &b)| g(a) * b).sum::<T>();
    match kind {
        Functional::Mean => dot(&|a| a),
        Functional::SecondMoment => dot(&|a| a * a),
        Functional::L1 => dot(&|a| a.abs()),
        Functional::Variance => {
            let m = dot(&|a| a);
            dot(&|a| (a - m) * (a - m))
        }
        Functional::Entropy => {
            let m2 = dot(&|a| a * a);
            if m2 == T::zero() {
                return T::zero();
            }
            // each term q ln(q/m2) − q + m2 is non-negative, avoiding cancellation
            dot(&|a| {
                let q = a * a;
                let base = if q > T::zero() { q * (q / m2).ln() } else { T::zero() };
                base - q + m2
            })
        }
        Functional::Energy => {
            let h = model.h;
            f.windows(2)
                .zip(&model.edge_weights)
                .map(|(p, &e)| {
                    let d = (p[1] - p[0]) / h;
                    d * d * e
                })
                .sum()
        }
    }
}

/// Symmetric tridiagonal form `M^{−1/2} K M^{−1/2}` of the generator pencil.
struct Tridiagonal<T> {
    diag: Vec<T>,
    off: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    fn of(model: &DiscreteModel<T>) -> Self {
        let m = model.len();
        let h2 = model.h * model.h;
        let e = &model.edge_weights;
        let w = &model.node_weights;
        let diag = (0..m)
            .map(|i| {
                let left = if i > 0 { e[i - 1] } else { T::zero() };
                let right = if i + 1 < m { e[i] } else { T::zero() };
                (left + right) / h2 / w[i]
            })
            .collect();
        let off = (0..m - 1).map(|i| -e[i] / h2 / (w[i] * w[i + 1]).sqrt()).collect();
        Self { diag, off }
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence).
    fn count_below(&self, x: T) -> usize {
        let tiny = T::min_positive_value();
        let mut q = self.diag[0] - x;
        let mut n = usize::from(q < T::zero());
        for i in 1..self.diag.len() {
            let prev = if q == T::zero() { tiny } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / prev;
            if q < T::zero() {
                n += 1;
            }
        }
        n
    }

    fn gershgorin(&self) -> (T, T) {
        let m = self.diag.len();
        (0..m).fold((T::infinity(), T::neg_infinity()), |(lo, hi), i| {
            let r = if i > 0 { self.off[i - 1].abs() } else { T::zero() }
                + if i + 1 < m { self.off[i].abs() } else { T::zero() };
            (lo.min(self.diag[i] - r), hi.max(self.diag[i] + r))
        })
    }

    /// `k`-th smallest eigenvalue by bisection.
    fn eigenvalue(&self, k: usize) -> T {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..400 {
            let mid = (lo + hi) / lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo + hi) / lit(2.0)
    }

    /// Solves `(A − σ)y = b` by the Thomas algorithm.
    fn solve_shifted(&self, sigma: T, b: &[T]) -> Result<Vec<T>> {
        let m = self.diag.len();
        let mut c = vec![T::zero(); m];
        let mut d = vec![T::zero(); m];
        let mut denom = self.diag[0] - sigma;
        for i in 0..m {
            if i > 0 {
                denom = self.diag[i] - sigma - self.off[i - 1] * c[i - 1];
            }
            if denom == T::zero() || !denom.is_finite() {
                return Err(Error::SolverFailure("zero pivot in tridiagonal solve".into()));
            }
            c[i] = if i + 1 < m { self.off[i] / denom } else { T::zero() };
            d[i] = (b[i] - if i > 0 { self.off[i - 1] * d[i - 1] } else { T::zero() }) / denom;
        }
        for i in (0..m - 1).rev() {
            d[i] = d[i] - c[i] * d[i + 1];
        }
        Ok(d)
    }

    fn apply(&self, v: &[T]) -> Vec<T> {
        let m = v.len();
        (0..m)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s = s + self.off[i - 1] * v[i - 1];
                }
                if i + 1 < m {
                    s = s + self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn normalize<T: Real>(v: &mut [T]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|a| *a = *a / n);
}

fn orthogonalize<T: Real>(v: &mut [T], basis: &[Vec<T>]) {
    for q in basis {
        let c = dot(v, q);
        v.iter_mut().zip(q).for_each(|(a, &b)| *a = *a - c * b);
    }
}

/// Spectral gap and Poincaré constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport<T> {
    pub gap: T,
    pub poincare_constant: T,
    /// Gap from the Sturm-sequence bisection.
    pub sturm: T,
    /// Gap from deflated inverse iteration.
    pub inverse_iteration: T,
}

/// Agreement required between the two eigensolvers.
pub const SOLVER_AGREEMENT: f64 = 1e-6;

/// Smallest non-zero eigenvalue of the generator pencil.
pub fn spectral_gap<T: Real>(model: &DiscreteModel<T>) -> Result<GapReport<T>> {
    let a = Tridiagonal::of(model);
    let sturm = a.eigenvalue(1);
    let inverse = gap_by_inverse_iteration(model, &a)?;
    if (sturm - inverse).abs() > lit::<T>(SOLVER_AGREEMENT) * sturm.abs().max(T::one()) {
        return Err(Error::SolverFailure(format!("eigensolvers disagree: {sturm} vs {inverse}")));
    }
    Ok(GapReport { gap: sturm, poincare_constant: T::one() / sturm, sturm, inverse_iteration: inverse })
}

fn gap_by_inverse_iteration<T: Real>(model: &DiscreteModel<T>, a: &Tridiagonal<T>) -> Result<T> {
    let mut null: Vec<T> = model.node_weights.iter().map(|w| w.sqrt()).collect();
    normalize(&mut null);
    let basis = vec![null];
    // shift below the spectrum keeps the solve positive definite
    let sigma = -T::one();
    let mut v: Vec<T> = model.x.iter().map(|&t| t + lit::<T>(0.1) * (t * t)).collect();
    orthogonalize(&mut v, &basis);
    normalize(&mut v);
    let mut last = T::infinity();
    for _ in 0..5_000 {
        let mut y = a.solve_shifted(sigma, &v)?;
        orthogonalize(&mut y, &basis);
        normalize(&mut y);
        let rq = dot(&y, &a.apply(&y));
        v = y;
        if (rq - last).abs() <= lit::<T>(1e-14) * rq.abs().max(T::one()) {
            return Ok(rq);
        }
        last = rq;
    }
    Err(Error::SolverFailure("inverse iteration did not converge".into()))
}

/// First `k` eigenpairs `(λ, f)` with `f` normalized in `L²(μ)`.
pub fn eigenpairs<T: Real>(model: &DiscreteModel<T>, k: usize) -> Result<Vec<(T, Vec<T>)>> {
    let a = Tridiagonal::of(model);
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut out = Vec::new();
    for j in 0..k.min(model.len()) {
        if j == 0 {
            // the Neumann null space is spanned by constants
            let mut v: Vec<T> = model.node_weights.iter().map(|w| w.sqrt()).collect();
            normalize(&mut v);
            basis.push(v);
            out.push((T::zero(), model.sample(|_| T::one())));
            continue;
        }
        let lambda = a.eigenvalue(j);
        let sigma = lambda - lit::<T>(1e-9) * lambda.abs().max(T::one());
        let mut v: Vec<T> = (0..model.len()).map(|i| T::one() + lit::<T>(1e-3) * count::<T>(i % 7)).collect();
        for _ in 0..4 {
            orthogonalize(&mut v, &basis);
            normalize(&mut v);
            v = a.solve_shifted(sigma, &v)?;
        }
        orthogonalize(&mut v, &basis);
        normalize(&mut v);
        let f: Vec<T> = v.iter().zip(&model.node_weights).map(|(&y, &w)| y / w.sqrt()).collect();
        basis.push(v);
        out.push((lambda, f));
    }
    Ok(out)
}

/// Named test functions on the model grid.
#[derive(Clone, Debug)]
pub struct TestBattery<T> {
    pub members: Vec<(String, Vec<T>)>,
}

/// Largest magnitude allowed in a battery function.
pub const CLIP: f64 = 1e8;

impl<T: Real> TestBattery<T> {
    /// Full battery: constant, polynomials with a Gaussian cutoff, hats,
    /// clipped exponentials, smoothed indicators and eigenvectors.
    pub fn standard(model: &DiscreteModel<T>) -> Result<Self> {
        let half = model.x[model.len() - 1];
        let clip = lit::<T>(CLIP);
        let mut members: Vec<(String, Vec<T>)> = Vec::new();
        members.push(("const".into(), model.sample(|_| T::one())));
        let width = half / lit(4.0);
        for k in 0..=6 {
            members.push((format!("poly{k}"), model.sample(|t| t.powi(k) * (-(t / width).powi(2) / lit(2.0)).exp())));
        }
        for (i, c) in [-0.5, -0.25, 0.0, 0.25, 0.5].iter().enumerate() {
            let c = lit::<T>(*c) * half;
            members.push((format!("hat{i}"), model.sample(|t| (T::one() - (t - c).abs() / width).max(T::zero()))));
        }
        for lambda in [-1.0, -0.5, -0.25, 0.25, 0.5, 1.0] {
            let l = lit::<T>(lambda);
            members.push((format!("exp{lambda:+}"), model.sample(|t| (l * t).exp().min(clip))));
        }
        let delta = lit::<T>(0.25);
        for (i, (a, b)) in [(-1.0, 1.0), (0.0, 2.0), (-3.0, -1.0), (2.0, 5.0)].iter().enumerate() {
            let (a, b) = (lit::<T>(*a), lit::<T>(*b));
            members.push((
                format!("ind{i}"),
                model.sample(|t| (((t - a) / delta).tanh() - ((t - b) / delta).tanh()) / lit(2.0)),
            ));
        }
        for (j, (_, f)) in eigenpairs(model, 8)?.into_iter().enumerate() {
            members.push((format!("eig{j}"), f.into_iter().map(|v| v.max(-clip).min(clip)).collect()));
        }
        members.retain(|(_, f)| f.iter().all(|v| v.is_finite()) && f.iter().any(|v| *v != T::zero()));
        Ok(Self { members })
    }

    pub fn only_constant(model: &DiscreteModel<T>) -> Self {
        Self { members: vec![("const".into(), model.sample(|_| T::one()))] }
    }

    pub fn push(&mut self, name: &str, f: Vec<T>) {
        self.members.push((name.into(), f));
    }
}

/// Per-function quantities needed by the empirical ratios.
#[derive(Clone, Debug)]
pub struct BatteryStats<T> {
    pub name: String,
    pub second_moment: T,
    pub l1: T,
    pub energy: T,
    pub entropy: T,
}

pub fn battery_stats<T: Real>(model: &DiscreteModel<T>, battery: &TestBattery<T>) -> Vec<BatteryStats<T>> {
    battery
        .members
        .par_iter()
        .map(|(name, f)| BatteryStats {
            name: name.clone(),
            second_moment: functional(model, f, Functional::SecondMoment),
            l1: functional(model, f, Functional::L1),
            energy: functional(model, f, Functional::Energy),
            entropy: functional(model, f, Functional::Entropy),
        })
        .collect()
}

/// `max_f (μ(f²) − sE(f,f))₊ / μ(|f|)²` and the function attaining it.
pub fn empirical_beta_from<T: Real>(stats: &[BatteryStats<T>], s: T) -> (T, String) {
    stats
        .iter()
        .map(|st| {
            let num = (st.second_moment - s * st.energy).max(T::zero());
            (num / (st.l1 * st.l1), st.name.clone())
        })
        .fold((T::zero(), String::new()), |acc, cur| if cur.0 > acc.0 { cur } else { acc })
}

pub fn empirical_beta<T: Real>(model: &DiscreteModel<T>, battery: &TestBattery<T>, s: T) -> T {
    empirical_beta_from(&battery_stats(model, battery), s).0
}

/// `max_f Ent(f²)/E(f,f)` over members with positive energy.
pub fn empirical_lsi<T: Real>(model: &DiscreteModel<T>, battery: &TestBattery<T>) -> Result<(T, String)> {
    let best = battery_stats(model, battery)
        .into_iter()
        .filter(|s| s.energy > T::zero())
        .map(|s| (s.entropy / s.energy, s.name))
        .fold(None, |acc: Option<(T, String)>, cur| match acc {
            Some(a) if a.0 >= cur.0 => Some(a),
            _ => Some(cur),
        });
    best.ok_or_else(|| Error::InvalidArgument("battery has no member with positive energy".into()))
}

/// One row of the drift-energy check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DriftEnergyRow<T> {
    pub witness_fn: String,
    /// `Σ f²·(−LW/W)·w`.
    pub lhs: T,
    /// `E(f,f)`.
    pub energy: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DriftEnergyReport<T> {
    pub tol: T,
    pub rows: Vec<DriftEnergyRow<T>>,
    pub violations: Vec<String>,
}

impl<T> DriftEnergyReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Default relative allowance for discretization in the drift-energy check.
pub const DRIFT_TOL: f64 = 1e-3;

/// Checks `∫f²(−LW/W)dμ ≤ E(f,f)(1 + tol)` for every battery member.
pub fn check_drift_energy<T: Real>(
    model: &DiscreteModel<T>,
    witness: &LyapunovWitness<T>,
    battery: &TestBattery<T>,
    tol: T,
) -> Result<DriftEnergyReport<T>> {
    let drift: Vec<T> = model.x.iter().map(|&t| witness.drift_at(&[t])).collect::<Result<_>>()?;
    let rows: Vec<DriftEnergyRow<T>> = battery
        .members
        .par_iter()
        .map(|(name, f)| {
            let lhs = f.iter().zip(&drift).zip(&model.node_weights).map(|((&a, &d), &w)| -a * a * d * w).sum();
            DriftEnergyRow { witness_fn: name.clone(), lhs, energy: functional(model, f, Functional::Energy) }
        })
        .collect();
    let violations =
        rows.iter().filter(|r| r.lhs > r.energy * (T::one() + tol)).map(|r| r.witness_fn.clone()).collect();
    Ok(DriftEnergyReport { tol, rows, violations })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", bound = "T: Real")]
pub enum CheckMode<T> {
    /// `β_cert(s) ≥ β_emp(s)`.
    Absolute,
    /// `κ·β_cert(s) ≥ β_emp(s)`; `κ` is fitted when absent.
    ShapeUpToConstant { kappa: Option<T> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Violation<T> {
    pub s: T,
    pub emp: T,
    #[serde(with = "crate::scalar::ext")]
    pub cert: T,
    pub witness_fn: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SoundnessReport<T> {
    #[serde(with = "crate::scalar::ext::vec")]
    pub s_grid: Vec<T>,
    #[serde(with = "crate::scalar::ext::vec")]
    pub empirical: Vec<T>,
    pub empirical_witness: Vec<String>,
    #[serde(with = "crate::scalar::ext::vec")]
    pub certified: Vec<T>,
    pub violations: Vec<Violation<T>>,
    pub mode: CheckMode<T>,
    pub kappa: Option<T>,
    pub flags: Vec<String>,
    pub certificate_id: String,
}

impl<T> SoundnessReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares a certified rate with the empirical one on `s_grid`.
pub fn check_certificate<T: Real>(
    cert: &Certificate<T>,
    model: &DiscreteModel<T>,
    battery: &TestBattery<T>,
    s_grid: &[T],
    mode: CheckMode<T>,
) -> Result<SoundnessReport<T>> {
    let rate = match (&cert.kind, &cert.rate) {
        (CertificateKind::Spi | CertificateKind::Dlsi { .. } | CertificateKind::FSob { .. }, Some(r)) => r,
        _ => return Err(Error::InvalidArgument("certificate carries no rate function".into())),
    };
    if mode == CheckMode::Absolute && !cert.is_normalized() {
        return Err(Error::ModeMismatch(cert.unnormalized_constants.clone()));
    }
    let stats = battery_stats(model, battery);
    let eval = rate.evaluator();
    let certified: Vec<T> = s_grid.iter().map(|&s| eval.value(s)).collect();
    let emp: Vec<(T, String)> = s_grid.par_iter().map(|&s| empirical_beta_from(&stats, s)).collect();
    let mut flags = Vec::new();
    if certified.iter().all(|c| c.is_infinite()) {
        flags.push("uninformative".to_string());
    }
    let kappa = match mode {
        CheckMode::Absolute => None,
        CheckMode::ShapeUpToConstant { kappa: Some(k) } => Some(k),
        CheckMode::ShapeUpToConstant { kappa: None } => Some(
            emp.iter()
                .zip(&certified)
                .filter(|(_, c)| c.is_finite() && **c > T::zero())
                .map(|((e, _), c)| *e / *c)
                .fold(T::one(), T::max),
        ),
    };
    let scale = kappa.unwrap_or(T::one());
    let violations = s_grid
        .iter()
        .zip(&emp)
        .zip(&certified)
        .filter(|((_, (e, _)), c)| !(scale * **c >= *e))
        .map(|((&s, (e, w)), &c)| Violation { s, emp: *e, cert: c, witness_fn: w.clone() })
        .collect();
    let (empirical, empirical_witness) = emp.into_iter().unzip();
    Ok(SoundnessReport {
        s_grid: s_grid.to_vec(),
        empirical,
        empirical_witness,
        certified,
        violations,
        mode,
        kappa,
        flags,
        certificate_id: cert.id.clone(),
    })
}
