//! Compact textual forms accepted on the command line.

use anyhow::{anyhow, bail, ensure, Context, Result};
use ineqforge::baseline::BaselineBeta;
use ineqforge::certificates::rate::LocalBeta;
use ineqforge::certificates::routes::ScalarFn;
use ineqforge::geometry::{Enlargement, SetFamily, SetKind};
use ineqforge::lyapunov::{PhiShape, WitnessFamily};
use ineqforge::potential::PotentialSpec;
use ineqforge::scalar::{lin_space, log_space};

fn nums(parts: &[&str]) -> Result<Vec<f64>> {
    parts.iter().map(|p| p.parse::<f64>().with_context(|| format!("`{p}` is not a number"))).collect()
}

fn split(text: &str) -> (&str, Vec<&str>) {
    let mut it = text.split(':');
    let head = it.next().unwrap_or_default();
    (head, it.collect())
}

/// `from:to:steps[:log|:lin]`, strictly positive.
pub fn s_grid(text: &str) -> Result<Vec<f64>> {
    let (head, rest) = split(text);
    let mut all = vec![head];
    all.extend(rest);
    let (spacing, bounds) = match all.last() {
        Some(&"log") => ("log", &all[..all.len() - 1]),
        Some(&"lin") => ("lin", &all[..all.len() - 1]),
        _ => ("log", &all[..]),
    };
    ensure!(bounds.len() == 3, "grid `{text}` must be from:to:steps[:log|:lin]");
    let v = nums(&bounds[..2])?;
    let steps: usize = bounds[2].parse().with_context(|| format!("bad step count in `{text}`"))?;
    ensure!(steps >= 1, "grid `{text}` needs at least one step");
    ensure!(v[0] > 0.0 && v[1] >= v[0] && v[1].is_finite(), "grid `{text}` must be positive and increasing");
    Ok(if steps == 1 {
        vec![v[0]]
    } else if spacing == "log" {
        log_space(v[0], v[1], steps)
    } else {
        lin_space(v[0], v[1], steps)
    })
}

/// `L:m`.
pub fn model_grid(text: &str) -> Result<(f64, usize)> {
    let (l, rest) = text.split_once(':').ok_or_else(|| anyhow!("grid `{text}` must be L:m"))?;
    let half: f64 = l.parse().with_context(|| format!("bad half-width `{l}`"))?;
    let m: usize = rest.parse().with_context(|| format!("bad node count `{rest}`"))?;
    ensure!(half > 0.0, "half-width must be positive");
    Ok((half, m))
}

/// `expaV:a` or `expdist:a:b`.
pub fn witness(text: &str) -> Result<WitnessFamily<f64>> {
    let (head, rest) = split(text);
    match (head, rest.as_slice()) {
        ("expaV", [a]) => Ok(WitnessFamily::ExpAV { a: nums(&[a])?[0] }),
        ("expdist", [a, b]) => {
            let v = nums(&[a, b])?;
            Ok(WitnessFamily::ExpDist { a: v[0], b_exp: v[1] })
        }
        _ => bail!("witness `{text}` must be expaV:a or expdist:a:b"),
    }
}

/// `radial:coef:p` or `potential:coef:q`.
pub fn phi(text: &str) -> Result<PhiShape<f64>> {
    let (head, rest) = split(text);
    let v = nums(&rest)?;
    match (head, v.as_slice()) {
        ("radial", [coef, p]) => Ok(PhiShape::RadialPower { coef: *coef, p: *p }),
        ("potential", [coef, q]) => Ok(PhiShape::PotentialPower { coef: *coef, q: *q }),
        _ => bail!("phi `{text}` must be radial:coef:p or potential:coef:q"),
    }
}

/// `balls`, `levels[:metric|:level|:local]` or `hlevels:c0[:...]`.
pub fn sets(text: &str) -> Result<SetFamily<f64>> {
    let (head, rest) = split(text);
    let enlargement = |t: Option<&&str>| -> Result<Enlargement> {
        match t.copied() {
            None | Some("metric") => Ok(Enlargement::Metric),
            Some("level") => Ok(Enlargement::Level),
            Some("local") => Ok(Enlargement::Local),
            Some(o) => bail!("unknown enlargement `{o}`"),
        }
    };
    match head {
        "balls" if rest.is_empty() => Ok(SetFamily::balls()),
        "levels" => Ok(SetFamily::v_levels(enlargement(rest.first())?)),
        "hlevels" => {
            let c0 = nums(&rest[..1.min(rest.len())])?.first().copied().ok_or_else(|| anyhow!("hlevels needs c0"))?;
            Ok(SetFamily { kind: SetKind::HLevels { c0 }, enlargement: enlargement(rest.get(1))? })
        }
        _ => bail!("sets `{text}` must be balls, levels[:enlargement] or hlevels:c0[:enlargement]"),
    }
}

/// `lebesgue` or `bord:theta[:c_n]`; the dimension comes from the potential.
pub fn baseline(text: &str, n: usize) -> Result<BaselineBeta<f64>> {
    let (head, rest) = split(text);
    let v = nums(&rest)?;
    match (head, v.as_slice()) {
        ("lebesgue", []) => Ok(BaselineBeta::lebesgue(n)),
        ("bord", [theta]) => Ok(BaselineBeta::bord(n, *theta, None)),
        ("bord", [theta, c_n]) => Ok(BaselineBeta::bord(n, *theta, Some(*c_n))),
        _ => bail!("baseline `{text}` must be lebesgue or bord:theta[:c_n]"),
    }
}

/// `lebesgue` or `bord[:c_n]`.
pub fn local(text: &str, n: usize) -> Result<LocalBeta<f64>> {
    let (head, rest) = split(text);
    let v = nums(&rest)?;
    match (head, v.as_slice()) {
        ("lebesgue", []) => Ok(LocalBeta::Lebesgue { n }),
        ("bord", []) => Ok(LocalBeta::Bord { n, c_n: None }),
        ("bord", [c_n]) => Ok(LocalBeta::Bord { n, c_n: Some(*c_n) }),
        _ => bail!("local rate `{text}` must be lebesgue or bord[:c_n]"),
    }
}

/// `id`, `pow:coef:exp`, `exp:coef:rate` or `const:value`.
pub fn scalar_fn(text: &str) -> Result<ScalarFn<f64>> {
    let (head, rest) = split(text);
    let v = nums(&rest)?;
    match (head, v.as_slice()) {
        ("id", []) => Ok(ScalarFn::identity()),
        ("pow", [coef, exp]) => Ok(ScalarFn::Power { coef: *coef, exp: *exp }),
        ("exp", [coef, rate]) => Ok(ScalarFn::Exp { coef: *coef, rate: *rate }),
        ("const", [value]) => Ok(ScalarFn::Const { value: *value }),
        _ => bail!("function `{text}` must be id, pow:coef:exp, exp:coef:rate or const:value"),
    }
}

/// Inline JSON when the text starts with `{`, otherwise a file path.
pub fn potential(text: &str) -> Result<(PotentialSpec<f64>, String)> {
    let body = if text.trim_start().starts_with('{') {
        text.to_string()
    } else {
        std::fs::read_to_string(text).with_context(|| format!("cannot read potential `{text}`"))?
    };
    let spec: PotentialSpec<f64> =
        serde_json::from_str(&body).with_context(|| format!("invalid potential specification `{text}`"))?;
    let canonical = ineqforge::io::canonical_json(&spec)?;
    Ok((spec, canonical))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = s_grid("0.01:1:20:log").unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.01);
        assert!((g[19] - 1.0).abs() < 1e-15);
        assert_eq!(s_grid("1:3:3:lin").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(s_grid("0:1:5").is_err());
        assert!(s_grid("1:2").is_err());
        assert_eq!(model_grid("8:2001").unwrap(), (8.0, 2001));
    }

    #[test]
    fn families() {
        assert_eq!(witness("expaV:0.5").unwrap(), WitnessFamily::ExpAV { a: 0.5 });
        assert_eq!(witness("expdist:1:2").unwrap(), WitnessFamily::ExpDist { a: 1.0, b_exp: 2.0 });
        assert!(witness("exp:1").is_err());
        assert_eq!(sets("levels:level").unwrap(), SetFamily::v_levels(Enlargement::Level));
        assert!(matches!(scalar_fn("pow:1:1.5").unwrap(), ScalarFn::Power { .. }));
        assert!(baseline("bord:0.5", 2).is_ok());
    }
}
