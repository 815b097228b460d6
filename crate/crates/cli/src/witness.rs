//! Report envelope and offline verification.
//!
//! Reports carry their maps as exact literals. Every exact claim is stored
//! as a witness that `verify` recomputes with the exact algebra alone; it
//! never trusts the values the producing run computed.

use num_rational::BigRational;
use ratsemi_core::algebra::{maps_equal, ExtPoint};
use ratsemi_core::orbits::{monomial_degree, DipReport};
use ratsemi_core::ruelle::postcritical_certificate;
use ratsemi_core::semigroup::{theta_defect, LevinFunction};
use ratsemi_core::RatMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::io::{map_value, point_from_json, point_to_json};
use crate::CliError;

pub const SCHEMA: &str = "ratsemi-report/1";

#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub schema: &'static str,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub result: T,
    pub witness: Witness,
}

/// `f_{i1}^{k1} o f_{i2}^{k2} o ...` over the witness map list.
pub type Word = Vec<(usize, u32)>;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Witness {
    /// Exact map literals referenced by index from `words`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub maps: Vec<Value>,
    /// Identities between compositions of `maps`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub words: Vec<WordIdentity>,
    /// Identities between explicitly written maps.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explicit: Vec<ExplicitIdentity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit: Option<OrbitWitness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub postcritical: Option<PostcriticalWitness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaWitness>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordIdentity {
    pub statement: String,
    pub lhs: Word,
    pub rhs: Word,
    pub equal: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitIdentity {
    pub statement: String,
    pub lhs: Value,
    pub rhs: Value,
    pub equal: bool,
}

/// `P^j(z0) = Q^k(z0)` for each match.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitWitness {
    pub p: Value,
    pub q: Value,
    pub z0: Value,
    /// `exact`: evaluate both orbits; `exponent`: compare `deg P^j` and `deg Q^k`
    /// for monic monomials.
    pub mode: String,
    pub matches: Vec<(usize, usize)>,
}

/// `set` contains every critical value of `map` and is forward invariant.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostcriticalWitness {
    pub map: Value,
    pub set: Vec<Value>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaWitness {
    pub n: usize,
    pub values: Vec<Vec<String>>,
    /// `(h, defect, bound)` as exact rationals.
    pub defects: Vec<(usize, String, String)>,
}

impl Witness {
    pub fn with_maps(maps: &[RatMap]) -> Self {
        Witness { maps: maps.iter().map(|m| serde_json::to_value(m).expect("serializable")).collect(), ..Default::default() }
    }

    pub fn push_word(&mut self, statement: impl Into<String>, lhs: Word, rhs: Word, equal: bool) {
        self.words.push(WordIdentity { statement: statement.into(), lhs, rhs, equal });
    }

    pub fn push_explicit(&mut self, statement: impl Into<String>, lhs: &RatMap, rhs: &RatMap, equal: bool) {
        self.explicit.push(ExplicitIdentity {
            statement: statement.into(),
            lhs: serde_json::to_value(lhs).expect("serializable"),
            rhs: serde_json::to_value(rhs).expect("serializable"),
            equal,
        });
    }

    pub fn orbit(p: &RatMap, q: &RatMap, z0: &ExtPoint, report: &DipReport) -> OrbitWitness {
        let mode = match report.mode {
            ratsemi_core::orbits::OrbitMode::Exponent => "exponent",
            _ => "exact",
        };
        OrbitWitness {
            p: serde_json::to_value(p).expect("serializable"),
            q: serde_json::to_value(q).expect("serializable"),
            z0: point_to_json(z0),
            mode: mode.into(),
            matches: report.matches.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyOutcome {
    pub schema: &'static str,
    pub report_schema: String,
    pub command: String,
    pub checks: usize,
    pub failures: Vec<String>,
    pub verified: bool,
}

fn compose_word(maps: &[RatMap], word: &Word) -> Result<RatMap, String> {
    let mut acc: Option<RatMap> = None;
    for &(i, k) in word {
        let f = maps.get(i).ok_or_else(|| format!("word refers to map {i} of {}", maps.len()))?;
        if k == 0 {
            return Err("zero exponent in word".into());
        }
        let fk = f.iterate(k).map_err(|e| e.to_string())?;
        acc = Some(match acc {
            None => fk,
            Some(a) => a.compose(&fk).map_err(|e| e.to_string())?,
        });
    }
    acc.ok_or_else(|| "empty word".to_string())
}

fn check(checks: &mut usize, failures: &mut Vec<String>, label: &str, r: Result<bool, String>) {
    *checks += 1;
    match r {
        Ok(true) => {}
        Ok(false) => failures.push(format!("{label}: does not hold")),
        Err(e) => failures.push(format!("{label}: {e}")),
    }
}

fn parse_map(v: &Value) -> Result<RatMap, String> {
    map_value(v).map_err(|e| e.to_string())
}

fn verify_orbit(w: &OrbitWitness) -> Result<bool, String> {
    let (p, q) = (parse_map(&w.p)?, parse_map(&w.q)?);
    let z0 = point_from_json(&w.z0).map_err(|e| e.to_string())?;
    for &(j, k) in &w.matches {
        let ok = match w.mode.as_str() {
            "exponent" => match (monomial_degree(&p), monomial_degree(&q)) {
                (Some(a), Some(b)) => {
                    num_bigint::BigUint::from(a).pow(j as u32) == num_bigint::BigUint::from(b).pow(k as u32)
                }
                _ => return Err("exponent witness needs monic monomials".into()),
            },
            "exact" => {
                let walk = |f: &RatMap, n: usize| (0..n).try_fold(z0.clone(), |x, _| f.eval(&x));
                walk(&p, j).map_err(|e| e.to_string())? == walk(&q, k).map_err(|e| e.to_string())?
            }
            other => return Err(format!("unknown orbit mode {other:?}")),
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

fn verify_theta(w: &ThetaWitness) -> Result<bool, String> {
    let values = w
        .values
        .iter()
        .map(|row| row.iter().map(|s| s.parse::<BigRational>().map_err(|_| format!("bad rational {s:?}"))).collect())
        .collect::<Result<Vec<Vec<_>>, _>>()?;
    let phi = LevinFunction::new(values).map_err(|e| e.to_string())?;
    for (h, defect, bound) in &w.defects {
        let d = theta_defect(w.n, *h, &phi).map_err(|e| e.to_string())?;
        if d.defect.to_string() != *defect || d.bound.to_string() != *bound {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Re-checks every witness in a report document.
pub fn verify_document(doc: &Value) -> Result<VerifyOutcome, CliError> {
    let schema = doc.get("schema").and_then(Value::as_str).unwrap_or_default();
    if schema != SCHEMA {
        return Err(CliError::Config(format!("unsupported report schema {schema:?}")));
    }
    let command = doc.get("command").and_then(Value::as_str).unwrap_or_default().to_string();
    let witness: Witness = serde_json::from_value(doc.get("witness").cloned().unwrap_or(Value::Null))
        .map_err(|e| CliError::Config(format!("bad witness block: {e}")))?;
    let (mut checks, mut failures) = (0, Vec::new());
    let maps: Vec<RatMap> = witness.maps.iter().map(map_value).collect::<Result<_, _>>()?;
    for id in &witness.words {
        let r = compose_word(&maps, &id.lhs)
            .and_then(|l| compose_word(&maps, &id.rhs).map(|r| maps_equal(&l, &r) == id.equal));
        check(&mut checks, &mut failures, &id.statement, r);
    }
    for id in &witness.explicit {
        let r = parse_map(&id.lhs).and_then(|l| parse_map(&id.rhs).map(|r| maps_equal(&l, &r) == id.equal));
        check(&mut checks, &mut failures, &id.statement, r);
    }
    if let Some(o) = &witness.orbit {
        check(&mut checks, &mut failures, "orbit matches", verify_orbit(o));
    }
    if let Some(pc) = &witness.postcritical {
        let r = parse_map(&pc.map).and_then(|f| {
            let set = pc.set.iter().map(point_from_json).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
            postcritical_certificate(&f, &set).map(|c| c.holds()).map_err(|e| e.to_string())
        });
        check(&mut checks, &mut failures, "postcritical certificate", r);
    }
    if let Some(t) = &witness.theta {
        check(&mut checks, &mut failures, "theta defects", verify_theta(t));
    }
    Ok(VerifyOutcome {
        schema: SCHEMA,
        report_schema: schema.to_string(),
        command,
        checks,
        verified: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ratsemi_core::Poly;

    fn doc(w: &Witness) -> Value {
        serde_json::json!({"schema": SCHEMA, "command": "relations", "witness": w})
    }

    #[test]
    fn word_identities_are_recomputed() {
        let z2 = RatMap::power(2);
        let neg = RatMap::poly(Poly::from_ints(&[0, 0, -1])).unwrap();
        let mut w = Witness::with_maps(&[z2, neg]);
        w.push_word("Q o R = Q o Q", vec![(0, 1), (1, 1)], vec![(0, 1), (0, 1)], true);
        w.push_word("P^2 = Q^2", vec![(0, 2)], vec![(1, 2)], false);
        let out = verify_document(&doc(&w)).unwrap();
        assert!(out.verified && out.checks == 2, "{out:?}");

        // a forged claim is caught
        w.words[1].equal = true;
        let out = verify_document(&doc(&w)).unwrap();
        assert!(!out.verified);
        assert_eq!(out.failures.len(), 1);
    }

    #[test]
    fn bad_references_fail_cleanly() {
        let mut w = Witness::with_maps(&[RatMap::power(2)]);
        w.push_word("bogus", vec![(3, 1)], vec![(0, 1)], true);
        let out = verify_document(&doc(&w)).unwrap();
        assert!(!out.verified);
        assert!(verify_document(&serde_json::json!({"schema": "other"})).is_err());
    }
}
