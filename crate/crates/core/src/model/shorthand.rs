//! Compact `name:key=value,key=value` family grammar used on the command line.
//!
//! | shorthand | family |
//! |---|---|
//! | `iid-normal`, `iid-exp[:rate=]`, `iid-uniform[:half_width=]`, `iid-rademacher` | i.i.d. |
//! | `geo-gauss:rho=0.5[,var=1]` | Gaussian, `gamma(k) = var * rho^k` |
//! | `gauss-cov:gamma=1/0.5/0.25` | Gaussian, explicit autocovariance |
//! | `ma:w=1/1[,innov=normal]` | moving average |
//! | `common-factor[:dist=exp]` | common factor |
//! | `markov:p0=0.9,p1=0.9[,centered=true]` | two-state chain |
//! | `antithetic[:dist=normal]` | adversarial pairs |
//! | `transform:map=tanh[,recenter=true],base=<family>` | monotone transform; `base` takes the rest |

use super::dist::BaseDist;
use super::family::{Autocov, FamilyKind, FamilySpec};
use super::maps::MonotoneMap;
use crate::error::{Error, Result};

fn bad(s: &str, why: impl std::fmt::Display) -> Error {
    Error::InvalidFamily(format!("`{s}`: {why}"))
}

fn num(src: &str, key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| bad(src, format!("`{key}` expects a number, got `{v}`")))
}

fn list(src: &str, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split('/').map(|x| num(src, key, x)).collect()
}

fn flag(src: &str, key: &str, v: &str) -> Result<bool> {
    v.parse().map_err(|_| bad(src, format!("`{key}` expects true/false, got `{v}`")))
}

/// Parses a family shorthand.
pub fn parse_family(s: &str) -> Result<FamilySpec> {
    let s = s.trim();
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));

    // `base=` swallows the remainder so nested shorthands keep their commas.
    let (rest, base) = match rest.find("base=") {
        Some(i) => (rest[..i].trim_end_matches(','), Some(&rest[i + 5..])),
        None => (rest, None),
    };
    let mut kv = Vec::new();
    for item in rest.split(',').filter(|x| !x.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| bad(s, format!("expected key=value, got `{item}`")))?;
        kv.push((k.trim(), v.trim()));
    }
    let get = |k: &str| kv.iter().find(|(key, _)| *key == k).map(|(_, v)| *v);
    let allowed = |keys: &[&str]| -> Result<()> {
        for (k, _) in &kv {
            if !keys.contains(k) {
                return Err(bad(s, format!("unknown key `{k}` for `{name}`")));
            }
        }
        Ok(())
    };
    let dist_arg = |default: &str| -> Result<BaseDist> { BaseDist::from_id(get("dist").unwrap_or(default)) };

    let spec = match name {
        "iid-normal" => {
            allowed(&[])?;
            FamilySpec::iid(BaseDist::Normal)
        }
        "iid-exp" => {
            allowed(&["rate"])?;
            let rate = get("rate").map(|v| num(s, "rate", v)).transpose()?.unwrap_or(1.0);
            FamilySpec::iid(BaseDist::CenteredExponential { rate })
        }
        "iid-uniform" => {
            allowed(&["half_width"])?;
            let half_width = get("half_width")
                .map(|v| num(s, "half_width", v))
                .transpose()?
                .unwrap_or(3f64.sqrt());
            FamilySpec::iid(BaseDist::CenteredUniform { half_width })
        }
        "iid-rademacher" => {
            allowed(&[])?;
            FamilySpec::iid(BaseDist::Rademacher)
        }
        "iid" => {
            allowed(&["dist"])?;
            FamilySpec::iid(dist_arg("normal")?)
        }
        "geo-gauss" => {
            allowed(&["rho", "var"])?;
            let rho = num(s, "rho", get("rho").ok_or_else(|| bad(s, "missing `rho`"))?)?;
            let variance = get("var").map(|v| num(s, "var", v)).transpose()?.unwrap_or(1.0);
            FamilySpec::new(FamilyKind::GaussianCov {
                autocov: Autocov::Geometric { rho, variance },
            })
        }
        "gauss-cov" => {
            allowed(&["gamma"])?;
            FamilySpec::gaussian_explicit(list(s, "gamma", get("gamma").ok_or_else(|| bad(s, "missing `gamma`"))?)?)
        }
        "ma" => {
            allowed(&["w", "innov"])?;
            let w = list(s, "w", get("w").ok_or_else(|| bad(s, "missing `w`"))?)?;
            FamilySpec::moving_average(w, BaseDist::from_id(get("innov").unwrap_or("normal"))?)
        }
        "common-factor" => {
            allowed(&["dist"])?;
            FamilySpec::common_factor(dist_arg("normal")?)
        }
        "markov" => {
            allowed(&["p0", "p1", "centered"])?;
            let p0 = num(s, "p0", get("p0").ok_or_else(|| bad(s, "missing `p0`"))?)?;
            let p1 = num(s, "p1", get("p1").ok_or_else(|| bad(s, "missing `p1`"))?)?;
            let centered = get("centered").map(|v| flag(s, "centered", v)).transpose()?.unwrap_or(true);
            FamilySpec::markov(p0, p1, centered)
        }
        "antithetic" => {
            allowed(&["dist"])?;
            FamilySpec::antithetic(dist_arg("normal")?)
        }
        "transform" => {
            allowed(&["map", "recenter"])?;
            let map = MonotoneMap::from_id(get("map").unwrap_or("identity"))?;
            let recenter = get("recenter").map(|v| flag(s, "recenter", v)).transpose()?.unwrap_or(true);
            let base = parse_family(base.ok_or_else(|| bad(s, "missing `base=`"))?)?;
            FamilySpec::transform(base, map, recenter)
        }
        _ => return Err(bad(s, format!("unknown family `{name}`"))),
    };
    if base.is_some() && name != "transform" {
        return Err(bad(s, "`base=` is only valid for `transform`"));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_shorthand() {
        assert_eq!(parse_family("iid-normal").unwrap(), FamilySpec::iid_normal());
        let g = parse_family("geo-gauss:rho=0.5,var=2").unwrap();
        assert_eq!(
            g.kind,
            FamilyKind::GaussianCov {
                autocov: Autocov::Geometric { rho: 0.5, variance: 2.0 }
            }
        );
        assert_eq!(
            parse_family("gauss-cov:gamma=1/0.5").unwrap(),
            FamilySpec::gaussian_explicit(vec![1.0, 0.5])
        );
        assert_eq!(
            parse_family("ma:w=1/0/2,innov=exp").unwrap(),
            FamilySpec::moving_average(vec![1.0, 0.0, 2.0], BaseDist::CenteredExponential { rate: 1.0 })
        );
        assert_eq!(
            parse_family("common-factor:dist=exp").unwrap(),
            FamilySpec::common_factor(BaseDist::CenteredExponential { rate: 1.0 })
        );
        assert_eq!(
            parse_family("markov:p0=0.9,p1=0.8,centered=false").unwrap(),
            FamilySpec::markov(0.9, 0.8, false)
        );
        let t = parse_family("transform:map=tanh,base=geo-gauss:rho=0.5").unwrap();
        assert_eq!(
            t,
            FamilySpec::transform(FamilySpec::geometric_gaussian(0.5), MonotoneMap::Tanh { scale: 1.0 }, true)
        );
    }

    #[test]
    fn rejects_garbage() {
        for s in ["nope", "geo-gauss", "geo-gauss:rho=x", "iid-normal:foo=1", "ma:w=1,base=iid-normal"] {
            assert!(parse_family(s).is_err(), "{s}");
        }
    }
}
