//! The seven commands, each writing its artifacts into the output directory.
//!
//! Every JSON report embeds the metadata block (tool version, config hash);
//! the CSV artifacts are paired with a JSON summary that carries it for them.
//! Sub-computations run sequentially, which honors any fan-out cap.

use crate::config::{ExperimentConfig, LadderConfig, Mode, PathSpec};
use crate::report::{cpx, mat, write_csv, write_json};
use crate::Failure;
use num_complex::Complex64;
use schlesinger_lab::canonical::{defect_ladder, log_log_slope, CanonicalFamily, GAUGE_SIGN};
use schlesinger_lab::fit::{
    fit_log_model, fit_power_model, refine_phi, suggest_m_min, ExpansionFit, SampleSet,
};
use schlesinger_lab::monodromy::{
    monodromy_set, phi_from_monodromy, ExpansionCase, FuchsianSystem, PhiClassification,
    MONODROMY_CLASS_TOL,
};
use schlesinger_lab::p6::{cross_validate_with, p6_params_from_state};
use schlesinger_lab::schlesinger::{
    conservation_report, flow, flow_with_clearance, CONSERVATION_THRESHOLD,
};
use schlesinger_lab::{
    CMatrix2, ComplexPath, Error, LogBranch, ModelCase, Result, SchlesingerState, Segment,
};
use serde_json::{json, Value};
use std::path::Path;

pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub out: &'a Path,
    /// `--format csv`: plot-ready tables also written where a report has one.
    pub csv_extras: bool,
    pub meta: Value,
}

fn invalid(pointer: &str, message: impl Into<String>) -> Failure {
    Failure::Validation(Error::ConfigInvalid {
        pointer: pointer.into(),
        message: message.into(),
    })
}

/// The deformation path demanded by flow-driven commands.
fn build_path(cfg: &ExperimentConfig) -> std::result::Result<ComplexPath, Failure> {
    let t0 = cfg.state.t;
    let spec = cfg
        .path
        .as_ref()
        .ok_or_else(|| invalid("/path", "required by this command"))?;
    match spec {
        PathSpec::Ray { r_end } => {
            if t0.norm() == 0.0 {
                return Err(invalid("/path", "ray from t₀ = 0 has no direction"));
            }
            let end = Complex64::from_polar(*r_end, t0.arg());
            if (end - t0).norm() < 1e-15 * t0.norm() {
                return Err(invalid("/path/r_end", "coincides with |t0|: empty path"));
            }
            Ok(ComplexPath::line(t0, end)?)
        }
        PathSpec::Segments { points } => {
            let mut segments = Vec::with_capacity(points.len());
            let mut from = t0;
            for &p in points {
                segments.push(Segment::Line {
                    start: from,
                    end: p,
                });
                from = p;
            }
            Ok(ComplexPath::new(segments)?)
        }
    }
}

fn pair_of(cfg: &ExperimentConfig) -> std::result::Result<(usize, usize), Failure> {
    cfg.pair
        .ok_or_else(|| invalid("/pair", "required by this command in general mode"))
}

pub fn run_flow(ctx: &Ctx) -> std::result::Result<Vec<SchlesingerState>, Failure> {
    let path = build_path(ctx.cfg)?;
    let traj = flow(&ctx.cfg.state, &path, &ctx.cfg.tolerances)?;
    write_trajectory_csv(ctx, &traj)?;
    let conservation = conservation_report(&traj, CONSERVATION_THRESHOLD);
    let value = json!({
        "meta": ctx.meta,
        "samples": traj.len(),
        "t_start": cpx(traj[0].t),
        "t_end": cpx(traj.last().expect("flow returns samples").t),
        "conservation": serde_json::to_value(&conservation).expect("report serializes"),
    });
    write_json(ctx.out, "flow.json", &value)?;
    Ok(traj)
}

fn write_trajectory_csv(ctx: &Ctx, traj: &[SchlesingerState]) -> std::io::Result<()> {
    let n = traj[0].config.n();
    let mut header = vec!["t_re".to_string(), "t_im".to_string()];
    for i in 0..n {
        for k in 0..2 {
            for l in 0..2 {
                header.push(format!("b_{i}_{k}{l}_re"));
                header.push(format!("b_{i}_{k}{l}_im"));
            }
        }
    }
    let rows: Vec<Vec<Option<f64>>> = traj
        .iter()
        .map(|s| {
            let mut row = Vec::with_capacity(header.len());
            row.push(Some(s.t.re));
            row.push(Some(s.t.im));
            for b in &s.residues {
                for k in 0..2 {
                    for l in 0..2 {
                        row.push(Some(b.e[k][l].re));
                        row.push(Some(b.e[k][l].im));
                    }
                }
            }
            row
        })
        .collect();
    write_csv(ctx.out, "trajectory.csv", &header, &rows)?;
    Ok(())
}

pub fn run_monodromy(ctx: &Ctx) -> std::result::Result<(), Failure> {
    let sys = FuchsianSystem::from_state(&ctx.cfg.state);
    let set = monodromy_set(&sys, None, &ctx.cfg.tolerances)?;
    let value = json!({
        "meta": ctx.meta,
        "base": cpx(set.base),
        "generators": set.generators.iter().map(mat).collect::<Vec<_>>(),
        "ordering": set.ordering,
        "invariants": set.invariants.iter().copied().map(cpx).collect::<Vec<_>>(),
        "product_defect": set.product_defect,
        "g_infinity": mat(&set.g_infinity),
    });
    write_json(ctx.out, "monodromy.json", &value)?;
    Ok(())
}

fn case_str(case: ExpansionCase) -> &'static str {
    match case {
        ExpansionCase::Power => "power",
        ExpansionCase::Logarithmic => "log",
        ExpansionCase::Resonant => "resonant",
    }
}

fn classify_pair(
    cfg: &ExperimentConfig,
    i: usize,
    j: usize,
) -> Result<(PhiClassification, Complex64, CMatrix2)> {
    let sys = FuchsianSystem::from_state(&cfg.state);
    let m_pair = sys.pair_monodromy(i, j, &cfg.tolerances)?;
    let hint = sys.pair_exponent_gap(i, j);
    let cls = phi_from_monodromy(&m_pair, Some(hint), MONODROMY_CLASS_TOL)?;
    Ok((cls, hint, m_pair))
}

pub fn run_classify(ctx: &Ctx) -> std::result::Result<(), Failure> {
    let (i, j) = pair_of(ctx.cfg)?;
    let (cls, hint, m_pair) = classify_pair(ctx.cfg, i, j)?;
    let value = json!({
        "meta": ctx.meta,
        "pair": [i, j],
        "case": case_str(cls.case),
        "phi": cls.phi.map(cpx),
        "monodromy_kind": serde_json::to_value(cls.monodromy_kind).expect("kind serializes"),
        "exponent_gap_hint": cpx(hint),
        "pair_trace": cpx(m_pair.trace()),
    });
    write_json(ctx.out, "classify.json", &value)?;
    Ok(())
}

pub fn run_canonical(ctx: &Ctx) -> std::result::Result<(), Failure> {
    let cfg = ctx.cfg;
    let (i, j) = pair_of(cfg)?;
    let family = CanonicalFamily::new(cfg.state.residues[i], cfg.state.residues[j]);
    let flipped =
        CanonicalFamily::with_sign(cfg.state.residues[i], cfg.state.residues[j], -GAUGE_SIGN);
    let theta = cfg.sector.theta0;
    let branch = LogBranch::for_ray(theta);
    let ratio = cfg.fit.ladder.ratio;

    let mut locked = 0.0f64;
    let mut wrong_sign = 0.0f64;
    for k in 0..3 {
        let t = Complex64::from_polar(cfg.sector.r * ratio.powi(k), theta);
        locked = locked.max(family.flow_residual(t, &branch)?);
        wrong_sign = wrong_sign.max(flipped.flow_residual(t, &branch)?);
    }

    let gap = family.exponent_gap();
    // The limit system only exists under the eigenvalue-gap window; outside
    // it the decay ladder is meaningless, not an error in the configuration.
    let (ladder_json, slope, predicted) =
        match defect_ladder(&family, theta, cfg.sector.r, ratio, cfg.fit.ladder.count) {
            Ok(ladder) => {
                let slope = match log_log_slope(&ladder) {
                    Ok(s) => Some(s),
                    Err(Error::InsufficientSamples { .. }) => None,
                    Err(e) => return Err(e.into()),
                };
                if ctx.csv_extras {
                    let header = vec!["t_abs".to_string(), "defect".to_string()];
                    let rows: Vec<Vec<Option<f64>>> = ladder
                        .iter()
                        .map(|s| vec![Some(s.t_abs), Some(s.defect)])
                        .collect();
                    write_csv(ctx.out, "defect_ladder.csv", &header, &rows)?;
                }
                (
                    serde_json::to_value(&ladder).expect("ladder serializes"),
                    slope,
                    Some(1.0 - gap.re.abs()),
                )
            }
            Err(Error::ExponentGapOutOfRange { .. }) => (Value::Null, None, None),
            Err(e) => return Err(e.into()),
        };

    let value = json!({
        "meta": ctx.meta,
        "pair": [i, j],
        "gauge_sign": GAUGE_SIGN,
        "exponent_gap": cpx(gap),
        "flow_residual": locked,
        "flipped_sign_residual": wrong_sign,
        "defect_slope": slope,
        "predicted_slope": predicted,
        "ladder": ladder_json,
    });
    write_json(ctx.out, "canonical.json", &value)?;
    Ok(())
}

/// Flow down the ladder rungs once, recording the state at each.
fn walk_ladder(
    state: &SchlesingerState,
    theta: f64,
    ladder: &LadderConfig,
    tol: &schlesinger_lab::ToleranceSpec,
) -> std::result::Result<Vec<SchlesingerState>, Failure> {
    let radii: Vec<f64> = (0..ladder.count)
        .map(|k| ladder.t_start * ladder.ratio.powi(k as i32))
        .collect();
    let clearance = 0.5 * radii.last().expect("ladder has rungs");
    let mut states = Vec::with_capacity(radii.len());
    let mut current = state.clone();
    for &r in &radii {
        let target = Complex64::from_polar(r, theta);
        if (target - current.t).norm() > 1e-15 * (1.0 + current.t.norm()) {
            let path = ComplexPath::line(current.t, target)?;
            let traj = flow_with_clearance(&current, &path, tol, clearance)?;
            current = traj.last().expect("flow returns samples").clone();
        }
        if (current.t - target).norm() > 1e-9 * (1.0 + target.norm()) {
            return Err(invalid(
                "/fit/ladder",
                format!(
                    "flow stopped {:.3e} short of the rung at |t| = {r:.3e}",
                    (current.t - target).norm()
                ),
            ));
        }
        states.push(current.clone());
    }
    Ok(states)
}

/// Coefficients grouped into the three basis families, in ladder order:
/// integer powers, then the two φ-shifted (or log¹/log²) families.
fn family_split(fit: &ExpansionFit) -> (Vec<Value>, Vec<Value>, Vec<Value>) {
    let len = (fit.model.order - fit.model.m_min + 1) as usize;
    let coeffs: Vec<Value> = fit.model.coefficients.iter().map(mat).collect();
    if coeffs.len() == 3 * len {
        (
            coeffs[..len].to_vec(),
            coeffs[len..2 * len].to_vec(),
            coeffs[2 * len..].to_vec(),
        )
    } else {
        // A collapsed exponent gap leaves only the integer family.
        (coeffs, Vec::new(), Vec::new())
    }
}

fn fit_entry(track: usize, fit: &ExpansionFit, suggested_m0: i32) -> Value {
    let (f1, f2, f3) = family_split(fit);
    let (case, phi) = match fit.model.case {
        ModelCase::Power { phi } => ("power", Some(cpx(phi))),
        ModelCase::Logarithmic => ("log", None),
    };
    json!({
        "residue": track,
        "case": case,
        "phi": phi,
        "m0": fit.model.m_min,
        "M": fit.model.order,
        "coeffs": {"F1": f1, "F2": f2, "F3": f3},
        "residual_max": fit.residual,
        "entry_residuals": fit.entry_residuals,
        "basis_condition": fit.basis_condition,
        "suggested_m0": suggested_m0,
        "sector": {
            "theta0": fit.model.sector.theta,
            "psi": fit.model.sector.half_width,
            "r": fit.model.sector.r_max,
        },
    })
}

pub fn run_fit(ctx: &Ctx) -> std::result::Result<(), Failure> {
    let cfg = ctx.cfg;
    let (i, j) = pair_of(cfg)?;
    let (cls, _, _) = classify_pair(cfg, i, j)?;

    let theta = cfg.sector.theta0;
    let states = walk_ladder(&cfg.state, theta, &cfg.fit.ladder, &cfg.tolerances)?;
    let branch = LogBranch::for_ray(theta);
    let n = cfg.state.config.n();
    let sets: Vec<SampleSet> = (0..n)
        .map(|track| SampleSet {
            points: states.iter().map(|s| s.t).collect(),
            values: states.iter().map(|s| s.residues[track]).collect(),
            theta,
            branch,
        })
        .collect();
    let moving = cfg.state.config.moving_index();
    let (m0, order) = (cfg.fit.m_min, cfg.fit.order);

    // The power basis needs the exponent gap sharpened on real samples; the
    // moving residue sees the collision most directly, so refine there. In
    // the resonant case neither basis is implied — fit both and keep the
    // better residual per track.
    let mut refined: Option<Complex64> = None;
    let mut resonant_choice: Option<&'static str> = None;
    let fits: Vec<ExpansionFit> = match (cls.case, cls.phi) {
        (ExpansionCase::Power, Some(phi0)) => {
            let refinement = refine_phi(&sets[moving], phi0, m0, order)?;
            refined = Some(refinement.phi);
            sets.iter()
                .map(|s| fit_power_model(s, refinement.phi, m0, order))
                .collect::<Result<_>>()?
        }
        (ExpansionCase::Resonant, Some(phi0)) => {
            let refinement = refine_phi(&sets[moving], phi0, m0, order)?;
            let power: Vec<ExpansionFit> = sets
                .iter()
                .map(|s| fit_power_model(s, refinement.phi, m0, order))
                .collect::<Result<_>>()?;
            let log: Vec<ExpansionFit> = sets
                .iter()
                .map(|s| fit_log_model(s, m0, order))
                .collect::<Result<_>>()?;
            let worst =
                |fits: &[ExpansionFit]| fits.iter().map(|f| f.residual).fold(0.0f64, f64::max);
            if worst(&power) <= worst(&log) {
                refined = Some(refinement.phi);
                resonant_choice = Some("power");
                power
            } else {
                resonant_choice = Some("log");
                log
            }
        }
        _ => sets
            .iter()
            .map(|s| fit_log_model(s, m0, order))
            .collect::<Result<_>>()?,
    };

    let entries: Vec<Value> = fits
        .iter()
        .enumerate()
        .map(|(track, fit)| {
            let phi = match fit.model.case {
                ModelCase::Power { phi } => Some(phi),
                ModelCase::Logarithmic => None,
            };
            fit_entry(track, fit, suggest_m_min(&sets[track], phi))
        })
        .collect();
    let value = json!({
        "meta": ctx.meta,
        "pair": [i, j],
        "classification": {
            "case": case_str(cls.case),
            "phi": cls.phi.map(cpx),
            "monodromy_kind": serde_json::to_value(cls.monodromy_kind).expect("kind serializes"),
        },
        "refined_phi": refined.map(cpx),
        "resonant_choice": resonant_choice,
        "fits": entries,
    });
    write_json(ctx.out, "fit.json", &value)?;
    Ok(())
}

pub fn run_p6_check(
    ctx: &Ctx,
    traj: Option<&[SchlesingerState]>,
) -> std::result::Result<(), Failure> {
    let cfg = ctx.cfg;
    if cfg.mode != Mode::N4Normalized {
        return Err(invalid("/mode", "p6-check needs mode \"n4-normalized\""));
    }
    let owned;
    let traj = match traj {
        Some(t) => t,
        None => {
            let path = build_path(cfg)?;
            owned = flow(&cfg.state, &path, &cfg.tolerances)?;
            &owned
        }
    };
    let params = p6_params_from_state(&traj[0])?;
    let check = cross_validate_with(traj, &params, &cfg.tolerances)?;

    let header: Vec<String> = [
        "t_re",
        "t_im",
        "w_schlesinger_re",
        "w_schlesinger_im",
        "w_direct_re",
        "w_direct_im",
        "rel_dev",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    let rows: Vec<Vec<Option<f64>>> = check
        .rows
        .iter()
        .map(|r| {
            vec![
                Some(r.t.re),
                Some(r.t.im),
                r.w_matrix.map(|w| w.re),
                r.w_matrix.map(|w| w.im),
                r.w_scalar.map(|w| w.re),
                r.w_scalar.map(|w| w.im),
                r.deviation,
            ]
        })
        .collect();
    write_csv(ctx.out, "p6_comparison.csv", &header, &rows)?;

    let value = json!({
        "meta": ctx.meta,
        "params": serde_json::to_value(&params).expect("params serialize"),
        "checked": check.checked,
        "skipped": check.skipped,
        "max_deviation": check.max_deviation,
    });
    write_json(ctx.out, "p6_check.json", &value)?;
    Ok(())
}

pub fn run_all(ctx: &Ctx) -> std::result::Result<(), Failure> {
    let cfg = ctx.cfg;
    let mut ran: Vec<&'static str> = Vec::new();
    let mut skipped: Vec<Value> = Vec::new();
    let skip = |step: &str, reason: &str| -> Value { json!({"step": step, "reason": reason}) };

    let traj = if cfg.path.is_some() {
        let traj = run_flow(ctx)?;
        ran.push("flow");
        Some(traj)
    } else {
        skipped.push(skip("flow", "no path in config"));
        None
    };

    run_monodromy(ctx)?;
    ran.push("monodromy");

    if cfg.pair.is_some() {
        run_classify(ctx)?;
        ran.push("classify");
        run_canonical(ctx)?;
        ran.push("canonical");
        run_fit(ctx)?;
        ran.push("fit");
    } else {
        for step in ["classify", "canonical", "fit"] {
            skipped.push(skip(step, "no pair in config"));
        }
    }

    if cfg.mode != Mode::N4Normalized {
        skipped.push(skip("p6-check", "mode is not n4-normalized"));
    } else if let Err(e) = p6_params_from_state(&cfg.state) {
        skipped.push(skip("p6-check", &e.to_string()));
    } else if let Some(traj) = &traj {
        run_p6_check(ctx, Some(traj))?;
        ran.push("p6-check");
    } else {
        skipped.push(skip("p6-check", "no path in config"));
    }

    let value = json!({
        "meta": ctx.meta,
        "ran": ran,
        "skipped": skipped,
    });
    write_json(ctx.out, "all.json", &value)?;
    Ok(())
}
