//! File formats: map literals, CSV clouds, binary PGM rasters, atomic writes.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use ratsemi_core::algebra::literal::{map_from_json, maps_from_json, poly_from_json};
use ratsemi_core::algebra::ExtPoint;
use ratsemi_core::entropy::{MeasureCloud, SpherePoint};
use ratsemi_core::{GaussianRational as Q, RatMap};
use serde_json::{json, Value};

use crate::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Io { path: path.to_path_buf(), source: e };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn load_maps(path: &Path) -> Result<Vec<RatMap>, CliError> {
    let maps = maps_from_json(&read_json(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if maps.is_empty() {
        return Err(CliError::Config(format!("{}: no maps", path.display())));
    }
    Ok(maps)
}

pub fn load_map(path: &Path) -> Result<RatMap, CliError> {
    let maps = load_maps(path)?;
    if maps.len() != 1 {
        return Err(CliError::Config(format!("{}: expected one map, found {}", path.display(), maps.len())));
    }
    Ok(maps.into_iter().next().unwrap())
}

pub fn load_pair(path: &Path) -> Result<(RatMap, RatMap), CliError> {
    let maps = load_maps(path)?;
    match <[RatMap; 2]>::try_from(maps) {
        Ok([p, q]) => Ok((p, q)),
        Err(v) => Err(CliError::Config(format!("{}: expected two maps, found {}", path.display(), v.len()))),
    }
}

pub fn map_value(v: &Value) -> Result<RatMap, CliError> {
    map_from_json(v).map_err(|e| CliError::Config(format!("bad map literal: {e}")))
}

/// Exact point literal: `"inf"` or a coefficient quadruple.
pub fn point_to_json(p: &ExtPoint) -> Value {
    match p {
        ExtPoint::Infinity => json!("inf"),
        ExtPoint::Finite(q) => serde_json::to_value(q).expect("serializable"),
    }
}

pub fn point_from_json(v: &Value) -> Result<ExtPoint, CliError> {
    if v.as_str() == Some("inf") {
        return Ok(ExtPoint::Infinity);
    }
    let poly = poly_from_json(&Value::Array(vec![v.clone()])).map_err(|e| CliError::Config(format!("bad point: {e}")))?;
    Ok(ExtPoint::Finite(poly.coeff(0)))
}

/// Parses `re,im` with rational parts (`2/1,0/1`, `3,-1/2`), a single real
/// rational, or `inf`.
pub fn parse_exact_point(text: &str) -> Result<ExtPoint, CliError> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("inf") {
        return Ok(ExtPoint::Infinity);
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<num_rational::BigRational>()
            .map_err(|_| CliError::Config(format!("bad rational {s:?} in point {text:?}")))
    };
    let (re, im) = match t.split_once(',') {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => (parse(t)?, num_rational::BigRational::from_integer(0.into())),
    };
    Ok(ExtPoint::Finite(Q::new(re, im)))
}

pub fn parse_float_point(text: &str) -> Result<SpherePoint, CliError> {
    let bad = || CliError::Config(format!("bad point {text:?}; expected re,im"));
    if text.trim().eq_ignore_ascii_case("inf") {
        return Ok(SpherePoint::Infinity);
    }
    let (a, b) = text.split_once(',').unwrap_or((text, "0"));
    let re: f64 = a.trim().parse().map_err(|_| bad())?;
    let im: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(re.is_finite() && im.is_finite()) {
        return Err(bad());
    }
    Ok(SpherePoint::new(re, im))
}

/// `re,im,weight` rows; the point at infinity is written `inf,inf,w`.
pub fn cloud_to_csv(cloud: &MeasureCloud) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(["re", "im", "weight"]).map_err(err)?;
    for (p, wt) in cloud.points.iter().zip(&cloud.weights) {
        let (re, im) = match p {
            SpherePoint::Finite(z) => (z.re.to_string(), z.im.to_string()),
            SpherePoint::Infinity => ("inf".to_string(), "inf".to_string()),
        };
        w.write_record([re, im, wt.to_string()]).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))
}

pub fn cloud_from_csv(path: &Path) -> Result<MeasureCloud, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io { path: path.to_path_buf(), source },
        other => bad(format!("{other:?}")),
    })?;
    let (mut points, mut weights) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 3 {
            return Err(bad(format!("row {} has {} fields", i + 1, rec.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("row {}: bad number {s:?}", i + 1)));
        let p = if rec[0].trim() == "inf" {
            SpherePoint::Infinity
        } else {
            SpherePoint::Finite(Complex64::new(num(&rec[0])?, num(&rec[1])?))
        };
        points.push(p);
        weights.push(num(&rec[2])?);
    }
    MeasureCloud::from_points(points, weights).map_err(|e| bad(e.to_string()))
}

/// Binary greyscale PGM, row 0 at the top.
pub fn pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Scales non-negative values to 0..=255 by the square root of value/max.
pub fn grey(values: &[f64]) -> Vec<u8> {
    let max = values.iter().copied().fold(0.0, f64::max);
    values
        .iter()
        .map(|v| if max > 0.0 { (255.0 * (v / max).sqrt()).round() as u8 } else { 0 })
        .collect()
}

pub const HEATMAP_SIZE: usize = 512;
pub const HEATMAP_EXTENT: f64 = 2.0;

/// Cloud mass per pixel over `[-2, 2]^2`, row-major with `im = +2` on top.
pub fn heatmap(cloud: &MeasureCloud) -> Vec<u8> {
    let n = HEATMAP_SIZE;
    let mut mass = vec![0.0; n * n];
    for (p, w) in cloud.points.iter().zip(&cloud.weights) {
        let Some(z) = p.finite() else { continue };
        let x = (z.re + HEATMAP_EXTENT) / (2.0 * HEATMAP_EXTENT) * n as f64;
        let y = (HEATMAP_EXTENT - z.im) / (2.0 * HEATMAP_EXTENT) * n as f64;
        if x >= 0.0 && y >= 0.0 && x < n as f64 && y < n as f64 {
            mass[y as usize * n + x as usize] += w;
        }
    }
    pgm(n, n, &grey(&mass))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_points_parse() {
        assert_eq!(parse_exact_point("2/1,0/1").unwrap(), ExtPoint::Finite(Q::from_ints(2, 0)));
        assert_eq!(parse_exact_point(" 3 , -1/2").unwrap(), ExtPoint::Finite(Q::from_fracs(3, 1, -1, 2)));
        assert_eq!(parse_exact_point("inf").unwrap(), ExtPoint::Infinity);
        assert!(parse_exact_point("2/0,1").is_err());
        let p = ExtPoint::Finite(Q::from_fracs(1, 3, -2, 5));
        assert_eq!(point_from_json(&point_to_json(&p)).unwrap(), p);
    }

    #[test]
    fn csv_round_trip() {
        let cloud = MeasureCloud::from_points(
            vec![SpherePoint::new(0.1, -2.5), SpherePoint::Infinity, SpherePoint::new(1e-300, 3.0)],
            vec![0.25, 0.25, 0.5],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_atomic(&path, &cloud_to_csv(&cloud).unwrap()).unwrap();
        let back = cloud_from_csv(&path).unwrap();
        assert_eq!(back.points, cloud.points);
        assert_eq!(back.weights, cloud.weights);
    }

    #[test]
    fn pgm_layout() {
        let img = pgm(2, 1, &grey(&[1.0, 0.25]));
        assert_eq!(&img[..11], b"P5\n2 1\n255\n");
        assert_eq!(&img[11..], &[255, 128]);
    }
}
