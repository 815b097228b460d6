//! JSON map literals.
//!
//! `{"num": [[re_num, re_den, im_num, im_den], ...], "den": [...]}` with
//! exponent-indexed coefficient quadruples. `den` may be omitted for
//! polynomials. An optional `"rotation": [k, n]` multiplies the map by
//! `e^{2 pi i k/n}`. Integers that do not fit in an `i64` are written as
//! decimal strings.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use super::gaussian::GaussianRational as Q;
use super::poly::Poly;
use super::ratmap::RatMap;
use crate::error::{Error, Result};

fn int_to_json(b: &BigInt) -> Value {
    match b.to_i64() {
        Some(v) => json!(v),
        None => json!(b.to_string()),
    }
}

fn int_from_json(v: &Value) -> Result<BigInt> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(BigInt::from)
            .ok_or_else(|| Error::Invalid(format!("non-integer coefficient {n}"))),
        Value::String(s) => s.trim().parse().map_err(|_| Error::Invalid(format!("bad integer {s:?}"))),
        other => Err(Error::Invalid(format!("expected integer, got {other}"))),
    }
}

pub fn poly_to_json(p: &Poly) -> Value {
    Value::Array(
        p.coeffs()
            .iter()
            .map(|c| Value::Array(c.to_quad().iter().map(int_to_json).collect()))
            .collect(),
    )
}

pub fn poly_from_json(v: &Value) -> Result<Poly> {
    let arr = v.as_array().ok_or_else(|| Error::Invalid("coefficient list must be an array".into()))?;
    let mut coeffs = Vec::with_capacity(arr.len());
    for q in arr {
        let parts = q.as_array().filter(|a| a.len() == 4).ok_or_else(|| {
            Error::Invalid("each coefficient must be [re_num, re_den, im_num, im_den]".into())
        })?;
        let quad = [
            int_from_json(&parts[0])?,
            int_from_json(&parts[1])?,
            int_from_json(&parts[2])?,
            int_from_json(&parts[3])?,
        ];
        coeffs.push(Q::from_quad(quad).ok_or_else(|| Error::Invalid("zero denominator in coefficient".into()))?);
    }
    Ok(Poly::new(coeffs))
}

pub fn map_to_json(f: &RatMap) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert("num".into(), poly_to_json(f.num()));
    if f.den().degree() > 0 {
        obj.insert("den".into(), poly_to_json(f.den()));
    }
    if f.is_twisted() {
        let a = f.twist().angle();
        obj.insert("rotation".into(), json!([a.numer(), a.denom()]));
    }
    Value::Object(obj)
}

pub fn map_from_json(v: &Value) -> Result<RatMap> {
    let obj = v.as_object().ok_or_else(|| Error::Invalid("map literal must be an object".into()))?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "num" | "den" | "rotation" | "name") {
            return Err(Error::Invalid(format!("unknown key {key:?} in map literal")));
        }
    }
    let num = poly_from_json(obj.get("num").ok_or_else(|| Error::Invalid("missing \"num\"".into()))?)?;
    let den = match obj.get("den") {
        Some(d) => poly_from_json(d)?,
        None => Poly::one(),
    };
    let f = RatMap::new(num, den)?;
    match obj.get("rotation") {
        None => Ok(f),
        Some(r) => {
            let pair = r
                .as_array()
                .filter(|a| a.len() == 2)
                .and_then(|a| Some((a[0].as_i64()?, a[1].as_i64()?)))
                .filter(|&(_, n)| n > 0)
                .ok_or_else(|| Error::Invalid("rotation must be [k, n] with n > 0".into()))?;
            Ok(f.rotate(Ratio::new(pair.0, pair.1)))
        }
    }
}

/// Accepts a single map literal, an array of literals, or `{"maps": [...]}`.
pub fn maps_from_json(v: &Value) -> Result<Vec<RatMap>> {
    match v {
        Value::Array(items) => items.iter().map(map_from_json).collect(),
        Value::Object(o) if o.contains_key("maps") => maps_from_json(&o["maps"]),
        Value::Object(_) => Ok(vec![map_from_json(v)?]),
        _ => Err(Error::Invalid("expected a map literal or a list of them".into())),
    }
}

impl Serialize for Poly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        poly_to_json(self).serialize(s)
    }
}

impl Serialize for RatMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        map_to_json(self).serialize(s)
    }
}

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Value::Array(self.to_quad().iter().map(int_to_json).collect()).serialize(s)
    }
}

/// Serializes an exact rational as `"p/q"` (or `"p"` when integral).
pub fn serialize_rational<S: Serializer>(r: &num_rational::BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

pub fn serialize_rational_rows<S: Serializer>(
    rows: &[Vec<num_rational::BigRational>],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let v: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect();
    v.serialize(s)
}
