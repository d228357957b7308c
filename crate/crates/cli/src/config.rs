//! Experiment configuration: one JSON schema shared by every command.
//!
//! Complex scalars are `[re, im]` pairs, matrices row-major 2×2 nested arrays
//! of them — the same wire convention the reports use. Validation errors name
//! the offending location as a JSON pointer (`/residues/B0`), so a config can
//! be fixed without reading source code. Unknown keys are rejected: a typo'd
//! optional key would otherwise silently fall back to a default.
//!
//! Two modes. `n4-normalized` is the four-pole setup with poles fixed at
//! 0 and 1, the moving pole starting at `t0`, and the residue at infinity
//! implied by B∞ = −(B₀+B_t+B₁); it needs exactly the three finite residues.
//! `general` takes explicit pole and residue lists plus the index of the
//! moving pole.

use num_complex::Complex64;
use schlesinger_lab::{CMatrix2, Error, Result, SchlesingerState, ToleranceSpec};
use serde_json::{Map, Value};
use std::f64::consts::FRAC_PI_4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    N4Normalized,
    General,
}

/// Integration path for the deformation parameter, anchored at the state's
/// starting `t`.
#[derive(Clone, Debug)]
pub enum PathSpec {
    /// Radially along `arg t = arg t₀` until `|t| = r_end`.
    Ray { r_end: f64 },
    /// Polyline from `t₀` through the listed points.
    Segments { points: Vec<Complex64> },
}

/// Sector for sampling and fitting: the ray `arg t = theta0`, half-width
/// `psi`, outer radius `r`.
#[derive(Clone, Copy, Debug)]
pub struct SectorConfig {
    pub theta0: f64,
    pub psi: f64,
    pub r: f64,
}

/// Geometric sampling ladder parameters for the fit commands.
#[derive(Clone, Copy, Debug)]
pub struct LadderConfig {
    pub t_start: f64,
    pub ratio: f64,
    pub count: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct FitConfig {
    /// Highest integer power M in the basis.
    pub order: i32,
    /// Lowest integer power m₀.
    pub m_min: i32,
    pub ladder: LadderConfig,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Initial data, poles at their starting positions.
    pub state: SchlesingerState,
    /// The designated merging pair (indices into the finite pole list), when
    /// one is defined: implied `[0, 1]` in n4-normalized mode, explicit in
    /// general mode.
    pub pair: Option<(usize, usize)>,
    pub path: Option<PathSpec>,
    pub sector: SectorConfig,
    pub tolerances: ToleranceSpec,
    pub fit: FitConfig,
}

fn invalid(pointer: impl Into<String>, message: impl Into<String>) -> Error {
    Error::ConfigInvalid {
        pointer: pointer.into(),
        message: message.into(),
    }
}

fn as_object<'v>(v: &'v Value, ptr: &str) -> Result<&'v Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| invalid(ptr, "expected an object"))
}

fn as_array<'v>(v: &'v Value, ptr: &str) -> Result<&'v Vec<Value>> {
    v.as_array()
        .ok_or_else(|| invalid(ptr, "expected an array"))
}

fn as_f64(v: &Value, ptr: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| invalid(ptr, "expected a number"))?;
    if !x.is_finite() {
        return Err(invalid(ptr, "number must be finite"));
    }
    Ok(x)
}

fn as_usize(v: &Value, ptr: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| invalid(ptr, "expected a non-negative integer"))
}

fn as_i32(v: &Value, ptr: &str) -> Result<i32> {
    v.as_i64()
        .and_then(|x| i32::try_from(x).ok())
        .ok_or_else(|| invalid(ptr, "expected an integer"))
}

fn as_bool(v: &Value, ptr: &str) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| invalid(ptr, "expected true or false"))
}

fn as_complex(v: &Value, ptr: &str) -> Result<Complex64> {
    let arr = as_array(v, ptr)?;
    if arr.len() != 2 {
        return Err(invalid(ptr, "complex scalars are [re, im]"));
    }
    Ok(Complex64::new(
        as_f64(&arr[0], &format!("{ptr}/0"))?,
        as_f64(&arr[1], &format!("{ptr}/1"))?,
    ))
}

fn as_matrix(v: &Value, ptr: &str) -> Result<CMatrix2> {
    let rows = as_array(v, ptr)?;
    if rows.len() != 2 {
        return Err(invalid(ptr, "matrices are row-major 2×2 arrays"));
    }
    let mut e = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (k, row_v) in rows.iter().enumerate() {
        let row_ptr = format!("{ptr}/{k}");
        let row = as_array(row_v, &row_ptr)?;
        if row.len() != 2 {
            return Err(invalid(&row_ptr, "matrix rows have two entries"));
        }
        for (l, entry) in row.iter().enumerate() {
            e[k][l] = as_complex(entry, &format!("{row_ptr}/{l}"))?;
        }
    }
    Ok(CMatrix2::new(e))
}

fn require<'v>(map: &'v Map<String, Value>, ptr: &str, key: &str) -> Result<&'v Value> {
    map.get(key)
        .ok_or_else(|| invalid(format!("{ptr}/{key}"), "missing required key"))
}

fn check_keys(map: &Map<String, Value>, ptr: &str, allowed: &[&str]) -> Result<()> {
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(invalid(
                format!("{ptr}/{key}"),
                format!("unknown key (allowed here: {})", allowed.join(", ")),
            ));
        }
    }
    Ok(())
}

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| invalid("", format!("not valid JSON: {e}")))?;
    let map = as_object(&root, "")?;
    check_keys(
        map,
        "",
        &[
            "mode",
            "residues",
            "t0",
            "poles",
            "moving_index",
            "infinity",
            "pair",
            "path",
            "sector",
            "tolerances",
            "fit",
        ],
    )?;

    let mode = match require(map, "", "mode")?.as_str() {
        Some("n4-normalized") => Mode::N4Normalized,
        Some("general") => Mode::General,
        _ => {
            return Err(invalid(
                "/mode",
                "expected \"n4-normalized\" or \"general\"",
            ))
        }
    };
    // The residues key is required in both modes; name it before mode-specific
    // shape checks so the most common omission gets the most direct message.
    let residues_v = require(map, "", "residues")?;

    let (state, pair) = match mode {
        Mode::N4Normalized => {
            for key in ["poles", "moving_index", "infinity"] {
                if map.contains_key(key) {
                    return Err(invalid(
                        format!("/{key}"),
                        "implied by n4-normalized mode; remove it or use mode \"general\"",
                    ));
                }
            }
            let res = as_object(residues_v, "/residues")?;
            check_keys(res, "/residues", &["B0", "Bt", "B1"])?;
            let b0 = as_matrix(require(res, "/residues", "B0")?, "/residues/B0")?;
            let bt = as_matrix(require(res, "/residues", "Bt")?, "/residues/Bt")?;
            let b1 = as_matrix(require(res, "/residues", "B1")?, "/residues/B1")?;
            let t0 = as_complex(require(map, "", "t0")?, "/t0")?;
            let state = SchlesingerState::n4_normalized(b0, bt, b1, t0)
                .map_err(|e| invalid("/t0", e.to_string()))?;
            let pair = parse_pair(map, state.config.n())?.or(Some((0, 1)));
            (state, pair)
        }
        Mode::General => {
            if map.contains_key("t0") {
                return Err(invalid(
                    "/t0",
                    "read from poles[moving_index] in general mode; remove it",
                ));
            }
            let poles_v = as_array(require(map, "", "poles")?, "/poles")?;
            if poles_v.len() < 2 {
                return Err(invalid("/poles", "need at least two poles"));
            }
            let poles: Vec<Complex64> = poles_v
                .iter()
                .enumerate()
                .map(|(i, v)| as_complex(v, &format!("/poles/{i}")))
                .collect::<Result<_>>()?;
            let res_v = as_array(residues_v, "/residues")?;
            if res_v.len() != poles.len() {
                return Err(invalid(
                    "/residues",
                    format!("expected {} residues, one per pole", poles.len()),
                ));
            }
            let residues: Vec<CMatrix2> = res_v
                .iter()
                .enumerate()
                .map(|(i, v)| as_matrix(v, &format!("/residues/{i}")))
                .collect::<Result<_>>()?;
            let moving = as_usize(require(map, "", "moving_index")?, "/moving_index")?;
            if moving >= poles.len() {
                return Err(invalid(
                    "/moving_index",
                    format!("index {moving} out of range for {} poles", poles.len()),
                ));
            }
            let infinity = match map.get("infinity") {
                Some(v) => as_bool(v, "/infinity")?,
                None => true,
            };
            let state = SchlesingerState::general(poles, residues, moving, infinity)
                .map_err(|e| invalid("/poles", e.to_string()))?;
            let pair = parse_pair(map, state.config.n())?;
            (state, pair)
        }
    };

    let path = match map.get("path") {
        Some(v) => Some(parse_path(v)?),
        None => None,
    };
    let sector = parse_sector(map.get("sector"), state.t)?;
    let tolerances = parse_tolerances(map.get("tolerances"))?;
    let fit = parse_fit(map.get("fit"))?;

    Ok(ExperimentConfig {
        mode,
        state,
        pair,
        path,
        sector,
        tolerances,
        fit,
    })
}

fn parse_pair(map: &Map<String, Value>, n: usize) -> Result<Option<(usize, usize)>> {
    let Some(v) = map.get("pair") else {
        return Ok(None);
    };
    let arr = as_array(v, "/pair")?;
    if arr.len() != 2 {
        return Err(invalid("/pair", "expected two pole indices [i, j]"));
    }
    let i = as_usize(&arr[0], "/pair/0")?;
    let j = as_usize(&arr[1], "/pair/1")?;
    if i == j || i >= n || j >= n {
        return Err(invalid(
            "/pair",
            format!("indices must be distinct and below {n}"),
        ));
    }
    Ok(Some((i, j)))
}

fn parse_path(v: &Value) -> Result<PathSpec> {
    let map = as_object(v, "/path")?;
    match require(map, "/path", "type")?.as_str() {
        Some("ray") => {
            check_keys(map, "/path", &["type", "r_end"])?;
            let r_end = as_f64(require(map, "/path", "r_end")?, "/path/r_end")?;
            if r_end <= 0.0 {
                return Err(invalid("/path/r_end", "must be positive"));
            }
            Ok(PathSpec::Ray { r_end })
        }
        Some("segments") => {
            check_keys(map, "/path", &["type", "points"])?;
            let pts = as_array(require(map, "/path", "points")?, "/path/points")?;
            if pts.is_empty() {
                return Err(invalid("/path/points", "need at least one point"));
            }
            let points = pts
                .iter()
                .enumerate()
                .map(|(i, p)| as_complex(p, &format!("/path/points/{i}")))
                .collect::<Result<_>>()?;
            Ok(PathSpec::Segments { points })
        }
        _ => Err(invalid("/path/type", "expected \"ray\" or \"segments\"")),
    }
}

fn parse_sector(v: Option<&Value>, t0: Complex64) -> Result<SectorConfig> {
    let mut sector = SectorConfig {
        theta0: t0.arg(),
        psi: FRAC_PI_4,
        r: 0.12,
    };
    let Some(v) = v else { return Ok(sector) };
    let map = as_object(v, "/sector")?;
    check_keys(map, "/sector", &["theta0", "psi", "r"])?;
    if let Some(x) = map.get("theta0") {
        sector.theta0 = as_f64(x, "/sector/theta0")?;
    }
    if let Some(x) = map.get("psi") {
        sector.psi = as_f64(x, "/sector/psi")?;
        if sector.psi <= 0.0 {
            return Err(invalid("/sector/psi", "must be positive"));
        }
    }
    if let Some(x) = map.get("r") {
        sector.r = as_f64(x, "/sector/r")?;
        if sector.r <= 0.0 {
            return Err(invalid("/sector/r", "must be positive"));
        }
    }
    Ok(sector)
}

fn parse_tolerances(v: Option<&Value>) -> Result<ToleranceSpec> {
    let mut tol = ToleranceSpec::default();
    let Some(v) = v else { return Ok(tol) };
    let map = as_object(v, "/tolerances")?;
    check_keys(map, "/tolerances", &["rel", "abs", "max_steps"])?;
    if let Some(x) = map.get("rel") {
        tol.rel = as_f64(x, "/tolerances/rel")?;
        if tol.rel <= 0.0 {
            return Err(invalid("/tolerances/rel", "must be positive"));
        }
    }
    if let Some(x) = map.get("abs") {
        tol.abs = as_f64(x, "/tolerances/abs")?;
        if tol.abs <= 0.0 {
            return Err(invalid("/tolerances/abs", "must be positive"));
        }
    }
    if let Some(x) = map.get("max_steps") {
        tol.max_steps = as_usize(x, "/tolerances/max_steps")?;
        if tol.max_steps == 0 {
            return Err(invalid("/tolerances/max_steps", "must be at least 1"));
        }
    }
    Ok(tol)
}

fn parse_fit(v: Option<&Value>) -> Result<FitConfig> {
    let mut fit = FitConfig {
        order: 4,
        m_min: 0,
        ladder: LadderConfig {
            t_start: 0.1,
            ratio: 0.7,
            count: 48,
        },
    };
    let Some(v) = v else { return Ok(fit) };
    let map = as_object(v, "/fit")?;
    check_keys(map, "/fit", &["M", "m0", "ladder"])?;
    if let Some(x) = map.get("M") {
        fit.order = as_i32(x, "/fit/M")?;
    }
    if let Some(x) = map.get("m0") {
        fit.m_min = as_i32(x, "/fit/m0")?;
    }
    if fit.m_min > fit.order {
        return Err(invalid("/fit/m0", "must not exceed M"));
    }
    if let Some(x) = map.get("ladder") {
        let map = as_object(x, "/fit/ladder")?;
        check_keys(map, "/fit/ladder", &["t_start", "ratio", "count"])?;
        if let Some(x) = map.get("t_start") {
            fit.ladder.t_start = as_f64(x, "/fit/ladder/t_start")?;
            if fit.ladder.t_start <= 0.0 {
                return Err(invalid("/fit/ladder/t_start", "must be positive"));
            }
        }
        if let Some(x) = map.get("ratio") {
            fit.ladder.ratio = as_f64(x, "/fit/ladder/ratio")?;
            if fit.ladder.ratio <= 0.0 || fit.ladder.ratio >= 1.0 {
                return Err(invalid(
                    "/fit/ladder/ratio",
                    "must lie strictly between 0 and 1",
                ));
            }
        }
        if let Some(x) = map.get("count") {
            fit.ladder.count = as_usize(x, "/fit/ladder/count")?;
            if fit.ladder.count < 2 {
                return Err(invalid("/fit/ladder/count", "need at least two rungs"));
            }
        }
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "mode": "n4-normalized",
        "residues": {
            "B0": [[[0.1, 0.0], [0.2, 0.0]], [[0.05, 0.0], [-0.1, 0.0]]],
            "Bt": [[[0.0, 0.1], [0.1, 0.0]], [[0.0, 0.0], [0.0, -0.1]]],
            "B1": [[[0.2, 0.0], [0.0, 0.0]], [[0.1, 0.0], [-0.2, 0.0]]]
        },
        "t0": [0.5, 0.0]
    }"#;

    #[test]
    fn minimal_n4_config_parses_with_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.mode, Mode::N4Normalized);
        assert_eq!(cfg.state.config.n(), 3);
        assert_eq!(cfg.pair, Some((0, 1)));
        assert!(cfg.path.is_none());
        assert_eq!(cfg.fit.order, 4);
        assert_eq!(cfg.tolerances.rel, ToleranceSpec::default().rel);
        assert_eq!(cfg.sector.theta0, 0.0);
    }

    #[test]
    fn missing_residues_names_the_pointer() {
        let err = parse(r#"{"mode": "n4-normalized", "t0": [0.5, 0.0]}"#).unwrap_err();
        match err {
            Error::ConfigInvalid { pointer, .. } => assert_eq!(pointer, "/residues"),
            other => panic!("expected ConfigInvalid, got {other}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"t0\"", "\"t_zero\"");
        let err = parse(&text).unwrap_err();
        match err {
            Error::ConfigInvalid { pointer, .. } => assert_eq!(pointer, "/t_zero"),
            other => panic!("expected ConfigInvalid, got {other}"),
        }
    }

    #[test]
    fn general_mode_round_trips_pole_lists() {
        let text = r#"{
            "mode": "general",
            "poles": [[0.0, 0.0], [0.4, 0.1], [1.0, 0.0]],
            "residues": [
                [[[0.1, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-0.1, 0.0]]],
                [[[0.0, 0.1], [0.1, 0.0]], [[0.0, 0.0], [0.0, -0.1]]],
                [[[0.2, 0.0], [0.0, 0.0]], [[0.1, 0.0], [-0.2, 0.0]]]
            ],
            "moving_index": 1,
            "pair": [0, 1]
        }"#;
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.mode, Mode::General);
        assert_eq!(cfg.state.t, Complex64::new(0.4, 0.1));
        assert_eq!(cfg.pair, Some((0, 1)));
    }

    #[test]
    fn bad_matrix_shape_points_into_the_residue() {
        let text = MINIMAL.replace(
            "[[[0.1, 0.0], [0.2, 0.0]], [[0.05, 0.0], [-0.1, 0.0]]]",
            "[[[0.1, 0.0], [0.2, 0.0]]]",
        );
        let err = parse(&text).unwrap_err();
        match err {
            Error::ConfigInvalid { pointer, .. } => assert_eq!(pointer, "/residues/B0"),
            other => panic!("expected ConfigInvalid, got {other}"),
        }
    }

    #[test]
    fn ray_path_requires_a_positive_endpoint() {
        let text = MINIMAL.replace(
            "\"t0\": [0.5, 0.0]",
            "\"t0\": [0.5, 0.0], \"path\": {\"type\": \"ray\", \"r_end\": -0.1}",
        );
        let err = parse(&text).unwrap_err();
        match err {
            Error::ConfigInvalid { pointer, .. } => assert_eq!(pointer, "/path/r_end"),
            other => panic!("expected ConfigInvalid, got {other}"),
        }
    }
}
