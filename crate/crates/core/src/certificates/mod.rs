//! Certificates: an inequality kind, a rate function, the checked premises
//! it rests on, and where it came from.

pub mod premises;
pub mod rate;
pub mod routes;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineBeta;
use crate::error::{Error, Result};
use crate::geometry::{Envelope, GeometryProfile, SetFamily, SetKind};
use crate::io::{content_id, SCHEMA_VERSION};
use crate::lyapunov::{check_witness, LyapunovWitness, WitnessGrade};
use crate::potential::PotentialSpec;
use crate::scalar::{lit, Real};

pub use rate::{fit_class, ClassTag, LocalBeta, RateEvaluator, RateFunction, RateRecipe, RateTable, Validity};
pub use routes::{
    alpha_general, alpha_route_one, alpha_route_two, beta_distance, beta_logdensity, default_eps_grid,
    distance_exponent, LogDensityVariant, ScalarFn,
};

/// A named premise and whether it was verified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Assumption<T: Real> {
    pub name: String,
    pub holds: bool,
    #[serde(with = "crate::scalar::ext_map")]
    pub values: BTreeMap<String, T>,
    /// Content id of the artifact the check ran on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl<T: Real> Assumption<T> {
    pub fn checked(name: &str, holds: bool) -> Self {
        Self { name: name.into(), holds, values: BTreeMap::new(), artifact: None, note: None }
    }

    pub fn with_value(mut self, key: &str, v: T) -> Self {
        self.values.insert(key.into(), v);
        self
    }

    pub fn with_artifact(mut self, id: String) -> Self {
        self.artifact = Some(id);
        self
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Inequality certified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", bound = "T: Real")]
pub enum CertificateKind<T> {
    Spi,
    /// Defective log-Sobolev; constants are absent when only the shape of
    /// `β` is known.
    Dlsi { c_ls: Option<T>, d_ls: Option<T> },
    Lsi { c_ls: T },
    /// `F(u) = log₊^{exponent} u`.
    FSob { exponent: T },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub route: String,
    pub parents: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Certificate<T: Real> {
    pub schema_version: u32,
    /// SHA-256 of the canonical encoding with this field empty.
    pub id: String,
    pub kind: CertificateKind<T>,
    pub rate: Option<RateFunction<T>>,
    pub assumptions: Vec<Assumption<T>>,
    pub provenance: Derivation,
    pub unnormalized_constants: Vec<String>,
    pub tags: Vec<String>,
}

impl<T: Real> Certificate<T> {
    fn assemble(
        kind: CertificateKind<T>,
        rate: Option<RateFunction<T>>,
        assumptions: Vec<Assumption<T>>,
        route: &str,
        parents: Vec<String>,
        unnormalized: Vec<String>,
    ) -> Result<Self> {
        let mut cert = Self {
            schema_version: SCHEMA_VERSION,
            id: String::new(),
            kind,
            rate,
            assumptions,
            provenance: Derivation { route: route.into(), parents },
            unnormalized_constants: unnormalized,
            tags: Vec::new(),
        };
        cert.reseal()?;
        Ok(cert)
    }

    /// Recomputes the content id.
    pub fn reseal(&mut self) -> Result<()> {
        self.id.clear();
        self.id = content_id(self)?;
        Ok(())
    }

    /// True when the stored id matches the content.
    pub fn id_is_valid(&self) -> Result<bool> {
        let mut copy = self.clone();
        copy.reseal()?;
        Ok(copy.id == self.id)
    }

    pub fn is_normalized(&self) -> bool {
        self.unnormalized_constants.is_empty()
    }

    pub fn assumption(&self, name: &str) -> Option<&Assumption<T>> {
        self.assumptions.iter().find(|a| a.name == name)
    }
}

fn witness_premise<T: Real>(witness: &LyapunovWitness<T>) -> Result<Assumption<T>> {
    if witness.grade != WitnessGrade::Super {
        return Err(Error::RouteRejected("witness has bounded phi (Poincare grade only)".into()));
    }
    let report = check_witness(witness, 2 * witness.validated_on.cells);
    if !report.passed() {
        return Err(Error::RouteRejected(format!("witness fails re-check, violation {}", report.max_violation)));
    }
    Ok(Assumption::checked("lyapunov_witness", true)
        .with_value("b_const", witness.b_const)
        .with_value("r0", witness.r0)
        .with_value("phi0", witness.phi0)
        .with_value("recheck_violation", report.max_violation)
        .with_artifact(content_id(witness)?))
}

fn profile_premise<T: Real>(witness: &LyapunovWitness<T>, sets: SetFamily<T>) -> Result<Assumption<T>> {
    let profile = GeometryProfile::new(witness, sets);
    let phi_min = profile.phi(profile.min_param());
    Ok(Assumption::checked("geometry_profile", phi_min >= T::zero())
        .with_value("min_param", profile.min_param())
        .with_value("phi_at_min_param", phi_min)
        .with_artifact(content_id(&sets)?))
}

fn baseline_premise<T: Real>(base: &BaselineBeta<T>) -> Result<Assumption<T>> {
    Ok(Assumption::checked("baseline", true).with_value("n", lit(base.dim() as f64)).with_artifact(content_id(base)?))
}

fn envelope_params<T: Real>(w: &LyapunovWitness<T>) -> BTreeMap<String, T> {
    [("b_const", w.b_const), ("r0", w.r0), ("phi0", w.phi0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Baseline rate as a certificate of the reference measure.
pub fn certify_baseline<T: Real>(base: &BaselineBeta<T>) -> Result<Certificate<T>> {
    let rate = RateFunction::new(RateRecipe::Baseline { base: base.clone() }, BTreeMap::new());
    Certificate::assemble(CertificateKind::Spi, Some(rate), vec![baseline_premise(base)?], "baseline", Vec::new(), base.unnormalized())
}

/// First envelope route (or the level-set variant when `sets` uses the
/// level enlargement).
pub fn certify_route_one<T: Real>(
    witness: &LyapunovWitness<T>,
    base: &BaselineBeta<T>,
    sets: SetFamily<T>,
    eps_grid: Option<Vec<T>>,
) -> Result<Certificate<T>> {
    let eps_grid = eps_grid.unwrap_or_else(default_eps_grid);
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e > T::zero() && *e < T::one())) {
        return Err(Error::InvalidArgument("eps grid must be non-empty inside (0, 1)".into()));
    }
    let assumptions = vec![witness_premise(witness)?, profile_premise(witness, sets)?, baseline_premise(base)?];
    let route = match sets.enlargement {
        crate::geometry::Enlargement::Level => "level",
        _ => "main1",
    };
    let recipe = RateRecipe::RouteOne { base: base.clone(), witness: witness.clone(), sets, eps_grid };
    let rate = RateFunction::new(recipe, envelope_params(witness));
    Certificate::assemble(CertificateKind::Spi, Some(rate), assumptions, route, Vec::new(), base.unnormalized())
}

/// Second envelope route.
pub fn certify_route_two<T: Real>(
    witness: &LyapunovWitness<T>,
    base: &BaselineBeta<T>,
    sets: SetFamily<T>,
) -> Result<Certificate<T>> {
    let assumptions = vec![witness_premise(witness)?, profile_premise(witness, sets)?, baseline_premise(base)?];
    let recipe = RateRecipe::RouteTwo { base: base.clone(), witness: witness.clone(), sets };
    let mut params = envelope_params(witness);
    params.insert("s_clamp".into(), routes::route_two_s_cap(witness.b_const));
    let rate = RateFunction::new(recipe, params);
    Certificate::assemble(CertificateKind::Spi, Some(rate), assumptions, "main2", Vec::new(), base.unnormalized())
}

/// Local-rate route on level sets.
pub fn certify_general<T: Real>(
    witness: &LyapunovWitness<T>,
    sets: SetFamily<T>,
    local: LocalBeta<T>,
    exact_chaining: bool,
) -> Result<Certificate<T>> {
    if matches!(local, LocalBeta::Bord { .. }) && !matches!(sets.kind, SetKind::VLevels) {
        return Err(Error::InvalidArgument("the shell-curvature local rate needs level sets of V".into()));
    }
    let assumptions = vec![witness_premise(witness)?, profile_premise(witness, sets)?];
    let unnormalized = match local {
        LocalBeta::Bord { c_n: None, .. } => vec!["C(n)".to_string()],
        _ => Vec::new(),
    };
    let recipe = RateRecipe::General { witness: witness.clone(), sets, local, exact_chaining };
    let rate = RateFunction::new(recipe, envelope_params(witness));
    Certificate::assemble(CertificateKind::Spi, Some(rate), assumptions, "general", Vec::new(), unnormalized)
}

/// Constants `c`, `C` of the existence-only routes; unset ones default to 1
/// and are reported as unnormalized.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ShapeConstants<T> {
    pub c: Option<T>,
    pub big_c: Option<T>,
}

impl<T: Real> ShapeConstants<T> {
    fn resolve(&self) -> (T, T, Vec<String>) {
        let mut missing = Vec::new();
        if self.c.is_none() {
            missing.push("c".to_string());
        }
        if self.big_c.is_none() {
            missing.push("C".to_string());
        }
        (self.c.unwrap_or(T::one()), self.big_c.unwrap_or(T::one()), missing)
    }
}

/// Log-density route: every premise must hold.
pub fn certify_logdensity<T: Real>(
    spec: &PotentialSpec<T>,
    variant: LogDensityVariant,
    a0: T,
    eta: ScalarFn<T>,
    shape: ScalarFn<T>,
    constants: ShapeConstants<T>,
) -> Result<Certificate<T>> {
    let mut assumptions = premises::logdensity_premises(spec, variant, a0, &eta, &shape);
    if let Some(bad) = assumptions.iter().find(|a| !a.holds) {
        return Err(Error::CasePremiseUnchecked(format!("{} does not hold", bad.name)));
    }
    let potential_id = content_id(spec)?;
    for a in &mut assumptions {
        a.artifact = Some(potential_id.clone());
    }
    let (c, big_c, missing) = constants.resolve();
    let n = spec.dim();
    let recipe = RateRecipe::LogDensity { variant, eta, shape, n, c, big_c };
    let params = [("c", c), ("C", big_c), ("a0", a0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let rate = RateFunction::new(recipe, params);
    let route = match variant {
        LogDensityVariant::Gradient => "logdensity1",
        LogDensityVariant::Hessian => "logdensity2",
    };
    Certificate::assemble(CertificateKind::Spi, Some(rate), assumptions, route, Vec::new(), missing)
}

/// Curvature route for `case`; premises are computed from the potential.
pub fn certify_distance<T: Real>(
    spec: &PotentialSpec<T>,
    case: u8,
    b: T,
    b_prime: T,
    constants: ShapeConstants<T>,
) -> Result<Certificate<T>> {
    let p = distance_exponent(case, b, b_prime)?;
    let mut assumptions = premises::distance_premises(spec, case, b, b_prime);
    routes::require_premises(case, &assumptions)?;
    let potential_id = content_id(spec)?;
    for a in &mut assumptions {
        a.artifact = Some(potential_id.clone());
    }
    let (c, big_c, missing) = constants.resolve();
    let recipe = RateRecipe::Distance { case, b, b_prime, c, big_c };
    let params = [("case", lit::<T>(case as f64)), ("b", b), ("b_prime", b_prime), ("c", c), ("C", big_c), ("p", p)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let rate = RateFunction::new(recipe, params);
    Certificate::assemble(CertificateKind::Spi, Some(rate), assumptions, &format!("distance{case}"), Vec::new(), missing)
}

/// Tolerance on `p = 1` for the log-Sobolev shape.
pub const DLSI_P_TOL: f64 = 0.05;

/// Refines the kind of an SPI certificate from the class of its rate.
pub fn classify<T: Real>(cert: &Certificate<T>) -> Result<Certificate<T>> {
    let mut out = cert.clone();
    let Some(rate) = &cert.rate else { return Ok(out) };
    if cert.kind != CertificateKind::Spi {
        return Ok(out);
    }
    let (one, two) = (T::one(), lit::<T>(2.0));
    match rate.class_tag {
        ClassTag::Exponential { p, .. } if (p - one).abs() <= lit(DLSI_P_TOL) => {
            out.kind = CertificateKind::Dlsi { c_ls: None, d_ls: None };
            out.tags.push("log_sobolev_shape".into());
        }
        ClassTag::Exponential { p, .. } if p > one => {
            let exponent = match rate.params.get("b") {
                Some(&b) if b > one && b < two => two * (one - one / b),
                _ => one / p,
            };
            out.kind = CertificateKind::FSob { exponent };
        }
        ClassTag::Polynomial { .. } => out.tags.push("nash_type".into()),
        _ => return Ok(out),
    }
    out.provenance.parents.push(cert.id.clone());
    out.reseal()?;
    Ok(out)
}

/// Tight log-Sobolev certificate from a defective one with explicit
/// constants and a Poincaré constant.
pub fn certify_lsi_rothaus<T: Real>(dlsi: &Certificate<T>, c_p: T) -> Result<Certificate<T>> {
    let CertificateKind::Dlsi { c_ls: Some(c_ls), d_ls: Some(d_ls) } = dlsi.kind else {
        return Err(Error::InvalidArgument("tightening needs a defective log-Sobolev certificate with constants".into()));
    };
    let c = crate::conversions::rothaus_tighten(c_ls, d_ls, c_p);
    let premise = Assumption::checked("poincare", c_p > T::zero()).with_value("c_p", c_p);
    Certificate::assemble(
        CertificateKind::Lsi { c_ls: c },
        None,
        vec![premise],
        "rothaus",
        vec![dlsi.id.clone()],
        dlsi.unnormalized_constants.clone(),
    )
}

/// Defective log-Sobolev certificate with given constants.
pub fn certify_dlsi<T: Real>(c_ls: T, d_ls: T, assumptions: Vec<Assumption<T>>) -> Result<Certificate<T>> {
    Certificate::assemble(
        CertificateKind::Dlsi { c_ls: Some(c_ls), d_ls: Some(d_ls) },
        None,
        assumptions,
        "given",
        Vec::new(),
        Vec::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Enlargement;
    use crate::io::canonical_json;
    use crate::lyapunov::{fit_witness, PhiShape, WitnessFamily, WitnessSearch};

    fn gauss_witness() -> LyapunovWitness<f64> {
        let spec = PotentialSpec::<f64>::gaussian(0.5, 1).unwrap();
        let search = WitnessSearch {
            candidates: Some(vec![PhiShape::RadialPower { coef: 0.125, p: 2.0 }]),
            ..WitnessSearch::default()
        };
        fit_witness(&spec, WitnessFamily::ExpAV { a: 0.5 }, &search).unwrap()
    }

    #[test]
    fn route_two_certificate_round_trips() {
        let w = gauss_witness();
        let cert = certify_route_two(&w, &BaselineBeta::lebesgue(1), SetFamily::balls()).unwrap();
        assert!(cert.id_is_valid().unwrap());
        assert!(cert.is_normalized());
        let text = canonical_json(&cert).unwrap();
        let back: Certificate<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(canonical_json(&back).unwrap(), text);
        let r = 32f64.sqrt();
        let h = (r + 2.0) * (r + 2.0) / 2.0;
        let want = 2f64.ln() + 2.0 * h - 0.5 * (4.0 * std::f64::consts::PI * 0.125 * (-h).exp()).ln();
        assert!((back.rate.unwrap().ln_value(1.0) - want).abs() < 1e-9 * want);
    }

    #[test]
    fn gaussian_routes_have_log_sobolev_shape() {
        let w = gauss_witness();
        let base = BaselineBeta::lebesgue(1);
        for cert in [
            certify_route_two(&w, &base, SetFamily::balls()).unwrap(),
            certify_route_one(&w, &base, SetFamily::balls(), None).unwrap(),
        ] {
            let c = classify(&cert).unwrap();
            assert!(matches!(c.kind, CertificateKind::Dlsi { .. }), "{:?}", cert.rate.unwrap().class_tag);
            assert_eq!(c.provenance.parents, vec![cert.id.clone()]);
        }
    }

    #[test]
    fn classification_of_curvature_cases() {
        for b in [1.25, 1.5, 1.75] {
            let spec = PotentialSpec::<f64>::power(1.0, b, 1).unwrap();
            let cert = certify_distance(&spec, 1, b, b, ShapeConstants::default()).unwrap();
            assert_eq!(cert.unnormalized_constants, vec!["c".to_string(), "C".to_string()]);
            match classify(&cert).unwrap().kind {
                CertificateKind::FSob { exponent } => assert_eq!(exponent, 2.0 * (1.0 - 1.0 / b)),
                k => panic!("{k:?}"),
            }
        }
        let gauss = PotentialSpec::<f64>::gaussian(0.5, 1).unwrap();
        let c3 = certify_distance(&gauss, 3, 2.0, 2.0, ShapeConstants::default()).unwrap();
        assert!(matches!(classify(&c3).unwrap().kind, CertificateKind::Dlsi { .. }));
        let base = certify_baseline(&BaselineBeta::<f64>::lebesgue(2)).unwrap();
        let nash = classify(&base).unwrap();
        assert_eq!(nash.kind, CertificateKind::Spi);
        assert_eq!(nash.tags, vec!["nash_type".to_string()]);
    }

    #[test]
    fn distance_rejects_unmet_case() {
        let dw = PotentialSpec::<f64>::double_well(1.0, 1.0, 1).unwrap();
        assert!(matches!(
            certify_distance(&dw, 1, 4.0, 4.0, ShapeConstants::default()),
            Err(Error::CasePremiseUnchecked(_))
        ));
        assert!(certify_distance(&dw, 3, 4.0, 4.0, ShapeConstants::default()).is_ok());
    }

    #[test]
    fn logdensity_quartic() {
        let spec = PotentialSpec::<f64>::power(1.0, 4.0, 1).unwrap();
        let cert = certify_logdensity(
            &spec,
            LogDensityVariant::Gradient,
            0.5,
            ScalarFn::Power { coef: 1.0, exp: 1.5 },
            ScalarFn::Power { coef: 4.0, exp: 0.75 },
            ShapeConstants::default(),
        )
        .unwrap();
        match cert.rate.as_ref().unwrap().class_tag {
            ClassTag::Exponential { p, .. } => assert!((p - 2.0 / 3.0).abs() < 0.05 * 2.0 / 3.0, "{p}"),
            t => panic!("{t:?}"),
        }
        assert!(cert.assumption("eta_gradient_ratio").unwrap().values.contains_key("limsup"));
    }

    #[test]
    fn logdensity_identity_eta_exponential_gamma_is_dlsi_shape() {
        let spec = PotentialSpec::<f64>::gaussian(0.5, 1).unwrap();
        let cert = certify_logdensity(
            &spec,
            LogDensityVariant::Gradient,
            0.5,
            ScalarFn::Power { coef: 0.1, exp: 1.0 },
            ScalarFn::Exp { coef: 1.0, rate: 1.0 },
            ShapeConstants::default(),
        )
        .unwrap();
        assert!(matches!(classify(&cert).unwrap().kind, CertificateKind::Dlsi { .. }));
    }

    #[test]
    fn level_route_and_poincare_grade() {
        let spec = PotentialSpec::<f64>::gaussian(0.5, 1).unwrap();
        let search = WitnessSearch {
            candidates: Some(vec![PhiShape::PotentialPower { coef: 0.25, q: 1.0 }]),
            ..WitnessSearch::default()
        };
        let w = fit_witness(&spec, WitnessFamily::ExpAV { a: 0.5 }, &search).unwrap();
        let cert = certify_route_one(&w, &BaselineBeta::lebesgue(1), SetFamily::v_levels(Enlargement::Level), None).unwrap();
        assert_eq!(cert.provenance.route, "level");
        assert!(cert.rate.unwrap().value(0.1).is_finite());
        let mut weak = w.clone();
        weak.grade = WitnessGrade::PoincareOnly;
        assert!(matches!(
            certify_route_two(&weak, &BaselineBeta::lebesgue(1), SetFamily::balls()),
            Err(Error::RouteRejected(_))
        ));
    }

    mod props {
        use super::*;
        use crate::certificates::routes::{ln_alpha_route_one, ln_alpha_route_two};
        use crate::geometry::GeometryProfile;
        use crate::io::canonical_json;
        use proptest::prelude::*;

        fn probes_monotone(rate: &RateFunction<f64>) -> bool {
            let eval = rate.evaluator();
            let v: Vec<f64> = rate.validity.probe(40).into_iter().map(|s| eval.ln_value(s)).collect();
            v.windows(2).all(|w| w[1] <= w[0])
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn curvature_rates_are_monotone_and_fit(b in 1.05f64..1.95) {
                let spec = PotentialSpec::power(1.0, b, 1).unwrap();
                let cert = certify_distance(&spec, 1, b, b, ShapeConstants::default()).unwrap();
                let rate = cert.rate.as_ref().unwrap();
                prop_assert!(probes_monotone(rate));
                let want = b / (2.0 * (b - 1.0));
                let fitted = fit_class(|s| rate.ln_value(s), 1e-4, 1e-2);
                match fitted {
                    ClassTag::Exponential { p, .. } => prop_assert!((p - want).abs() <= 0.05 * want, "{} {}", p, want),
                    t => prop_assert!(false, "{:?}", t),
                }
            }

            #[test]
            fn logdensity_rates_are_monotone(q in 1.1f64..2.0, coef in 0.5f64..4.0) {
                let spec = PotentialSpec::power(1.0, 4.0, 1).unwrap();
                if let Ok(cert) = certify_logdensity(
                    &spec,
                    LogDensityVariant::Gradient,
                    0.5,
                    ScalarFn::Power { coef: 1.0, exp: q },
                    ScalarFn::Power { coef, exp: 0.75 },
                    ShapeConstants::default(),
                ) {
                    prop_assert!(probes_monotone(cert.rate.as_ref().unwrap()));
                }
            }

            #[test]
            fn larger_baseline_gives_larger_alpha(c1 in 0.1f64..5.0, extra in 0.0f64..5.0, s in 0.01f64..10.0) {
                let w = gauss_witness();
                let env = GeometryProfile::new(&w, SetFamily::balls());
                let small = BaselineBeta::bord(1, 1.0, Some(c1));
                let large = BaselineBeta::bord(1, 1.0, Some(c1 + extra));
                let eps = routes::default_eps_grid();
                prop_assert!(ln_alpha_route_one(&small, &env, w.b_const, &eps, s) <= ln_alpha_route_one(&large, &env, w.b_const, &eps, s));
                prop_assert!(ln_alpha_route_two(&small, &env, w.b_const, w.r0, s) <= ln_alpha_route_two(&large, &env, w.b_const, w.r0, s));
            }

            #[test]
            fn closed_form_certificates_round_trip(ln_c in -5.0f64..5.0, c in 0.0f64..3.0, p in 0.1f64..3.0) {
                let rate = RateFunction::new(RateRecipe::ClosedForm { ln_c, k: 0.5, c, p }, Default::default());
                let cert = Certificate::assemble(CertificateKind::Spi, Some(rate), Vec::new(), "closed_form", Vec::new(), Vec::new()).unwrap();
                let text = canonical_json(&cert).unwrap();
                let back: Certificate<f64> = serde_json::from_str(&text).unwrap();
                prop_assert_eq!(&back, &cert);
                prop_assert_eq!(canonical_json(&back).unwrap(), text);
                prop_assert!(back.id_is_valid().unwrap());
            }
        }
    }
}
