//! Least-squares fits of residue entries near a pole collision.
//!
//! On a ray t = r·e^{iθ}, r ↓ 0, a residue matrix B(t) of a converging
//! deformation follows one of two local models:
//!
//! - power: B(t) = Σ_m (C_m t^m + D_m t^{m+φ} + E_m t^{m−φ}),
//! - logarithmic: B(t) = Σ_m t^m (C_m + D_m log t + E_m log² t),
//!
//! with φ the exponent gap of the merging pair. Samples taken along a
//! geometric ladder ([`sample_ray`]) feed a column-pivoted least-squares fit
//! ([`fit_power_model`], [`fit_log_model`]); all four matrix entries share
//! one factorization. The fits report the basis condition number and refuse
//! to solve past [`CONDITION_LIMIT`], which is what a resonant φ (the basis
//! families collide) looks like numerically.
//!
//! [`refine_phi`] sharpens an approximate exponent gap by minimizing the fit
//! residual over complex φ, and [`suggest_m_min`] reads the leading growth
//! off the ladder to decide how far below m = 0 the basis must start.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix2, LogBranch};
use crate::lstsq::solve_least_squares;
use crate::path::{ComplexPath, ToleranceSpec};
use crate::schlesinger::{flow_with_clearance, SchlesingerState};

/// Basis condition estimate above which a fit refuses to report coefficients.
pub const CONDITION_LIMIT: f64 = 1e12;

/// |φ| below which the shifted families t^{m±φ} coincide with the integer
/// family and the power basis collapses to plain powers.
pub const PHI_COLLAPSE_TOL: f64 = 1e-9;

/// Angular half-width assigned to fitted models around their sampling ray.
pub const DEFAULT_SECTOR_HALF_WIDTH: f64 = PI / 4.0;

/// A punctured sector 0 < |t| ≤ r_max, |arg t − θ| ≤ half-width, the domain
/// on which a fitted model is declared valid.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct SectorSpec {
    pub theta: f64,
    pub half_width: f64,
    pub r_max: f64,
}

impl SectorSpec {
    pub fn contains(&self, t: Complex64) -> bool {
        let r = t.norm();
        if !(r > 0.0 && r <= self.r_max * (1.0 + 1e-12)) {
            return false;
        }
        let mut delta = t.arg() - self.theta;
        delta -= std::f64::consts::TAU * (delta / std::f64::consts::TAU).round();
        delta.abs() <= self.half_width + 1e-12
    }
}

/// Which local basis a model uses.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum ModelCase {
    Power {
        #[serde(with = "crate::serial::complex")]
        phi: Complex64,
    },
    Logarithmic,
}

/// One basis function t^{exponent}·log^{log_power} t.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct BasisTerm {
    #[serde(with = "crate::serial::complex")]
    pub exponent: Complex64,
    pub log_power: u8,
}

/// A fitted local expansion: matrix coefficients over the model's basis.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ExpansionModel {
    pub case: ModelCase,
    /// Lowest integer power in the basis (usually 0; negative when the data
    /// grows toward the collision).
    pub m_min: i32,
    /// Highest integer power in the basis.
    pub order: i32,
    pub sector: SectorSpec,
    pub branch: LogBranch,
    /// One matrix per term of [`Self::basis_terms`], in that order.
    pub coefficients: Vec<CMatrix2>,
}

impl ExpansionModel {
    /// The basis, ordered family by family: integer powers first, then (for
    /// the power case) the +φ and −φ ladders, or (logarithmic case) the
    /// log and log² ladders.
    pub fn basis_terms(&self) -> Vec<BasisTerm> {
        basis_terms(&self.case, self.m_min, self.order)
    }

    /// Evaluate the model inside its sector.
    pub fn evaluate(&self, t: Complex64) -> Result<CMatrix2> {
        if !self.sector.contains(t) {
            return Err(Error::OutOfSector { t });
        }
        let w = self.branch.log(t)?;
        let mut out = CMatrix2::zero();
        for (term, coeff) in self.basis_terms().iter().zip(&self.coefficients) {
            out = out + coeff.scale(eval_term(term, w));
        }
        Ok(out)
    }
}

fn basis_terms(case: &ModelCase, m_min: i32, order: i32) -> Vec<BasisTerm> {
    assert!(m_min <= order, "basis range must be non-empty");
    let powers = m_min..=order;
    let mut terms: Vec<BasisTerm> = powers
        .clone()
        .map(|m| BasisTerm {
            exponent: Complex64::new(m as f64, 0.0),
            log_power: 0,
        })
        .collect();
    match case {
        ModelCase::Power { phi } => {
            if phi.norm() > PHI_COLLAPSE_TOL {
                for sign in [1.0, -1.0] {
                    terms.extend(powers.clone().map(|m| BasisTerm {
                        exponent: Complex64::new(m as f64, 0.0) + phi * sign,
                        log_power: 0,
                    }));
                }
            }
        }
        ModelCase::Logarithmic => {
            for k in [1u8, 2] {
                terms.extend(powers.clone().map(|m| BasisTerm {
                    exponent: Complex64::new(m as f64, 0.0),
                    log_power: k,
                }));
            }
        }
    }
    terms
}

fn eval_term(term: &BasisTerm, log_t: Complex64) -> Complex64 {
    (term.exponent * log_t).exp() * log_t.powu(term.log_power as u32)
}

/// Matrix samples along one ray, with the branch the ladder was cut on.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pub points: Vec<Complex64>,
    pub values: Vec<CMatrix2>,
    pub theta: f64,
    pub branch: LogBranch,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn entry(&self, r: usize, c: usize) -> Vec<Complex64> {
        self.values.iter().map(|b| b.e[r][c]).collect()
    }
}

/// Geometric sampling ladder on the ray arg t = θ: |t| = t_start·ratio^k.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct RayLadder {
    pub theta: f64,
    pub t_start: f64,
    pub ratio: f64,
    pub count: usize,
}

impl RayLadder {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            t_start: 0.1,
            ratio: 0.7,
            count: 48,
        }
    }
}

/// Anything that can produce the tracked matrix at a requested t. Sampling
/// proceeds from large |t| inward, so stateful sources may continue from
/// their previous position.
pub trait TrajectorySource {
    fn sample(&mut self, t: Complex64) -> Result<CMatrix2>;
}

impl<F> TrajectorySource for F
where
    F: FnMut(Complex64) -> Result<CMatrix2>,
{
    fn sample(&mut self, t: Complex64) -> Result<CMatrix2> {
        self(t)
    }
}

/// Tracks one residue of a deformation state by integrating the flow from
/// rung to rung (each sample continues where the previous one stopped).
pub struct FlowSampler {
    state: SchlesingerState,
    track: usize,
    tol: ToleranceSpec,
    clearance: f64,
}

impl FlowSampler {
    /// `track` is the residue index to report; `clearance` must lie below the
    /// smallest ladder rung or sampling will stop short of it.
    pub fn new(state: SchlesingerState, track: usize, tol: ToleranceSpec, clearance: f64) -> Self {
        assert!(track < state.residues.len(), "tracked index in range");
        Self {
            state,
            track,
            tol,
            clearance,
        }
    }
}

impl TrajectorySource for FlowSampler {
    fn sample(&mut self, t: Complex64) -> Result<CMatrix2> {
        let here = self.state.t;
        if (t - here).norm() > 1e-15 * (1.0 + here.norm()) {
            let path = ComplexPath::line(here, t)?;
            let traj = flow_with_clearance(&self.state, &path, &self.tol, self.clearance)?;
            let end = traj.last().expect("flow returns at least the start state");
            if (end.t - t).norm() > 1e-9 * (1.0 + t.norm()) {
                return Err(Error::ConfigInvalid {
                    pointer: "/clearance".into(),
                    message: format!(
                        "ladder rung |t| = {:.3e} is unreachable: the flow stopped at \
                         |t| = {:.3e} (clearance {:.3e})",
                        t.norm(),
                        end.t.norm(),
                        self.clearance
                    ),
                });
            }
            self.state = end.clone();
        }
        Ok(self.state.residues[self.track])
    }
}

/// Sample a source along a geometric ladder, outermost rung first.
pub fn sample_ray<S: TrajectorySource>(source: &mut S, ladder: &RayLadder) -> Result<SampleSet> {
    assert!(ladder.t_start > 0.0, "ladder must start at positive |t|");
    assert!(
        ladder.ratio > 0.0 && ladder.ratio < 1.0,
        "ladder ratio must shrink toward the collision"
    );
    assert!(ladder.count > 0, "empty ladder");
    let branch = LogBranch::for_ray(ladder.theta);
    let mut points = Vec::with_capacity(ladder.count);
    let mut values = Vec::with_capacity(ladder.count);
    for k in 0..ladder.count {
        let t = Complex64::from_polar(ladder.t_start * ladder.ratio.powi(k as i32), ladder.theta);
        values.push(source.sample(t)?);
        points.push(t);
    }
    Ok(SampleSet {
        points,
        values,
        theta: ladder.theta,
        branch,
    })
}

/// A completed fit: the model plus its quality measures.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ExpansionFit {
    pub model: ExpansionModel,
    /// Relative ℓ² misfit per matrix entry, with every ladder point weighted
    /// by its sample's own magnitude (see the solve in `fit_model`).
    pub entry_residuals: [[f64; 2]; 2],
    /// Max of the entry residuals.
    pub residual: f64,
    /// Condition estimate of the weighted, column-equilibrated basis matrix.
    pub basis_condition: f64,
}

/// Fit the power model with the given exponent gap.
pub fn fit_power_model(
    samples: &SampleSet,
    phi: Complex64,
    m_min: i32,
    order: i32,
) -> Result<ExpansionFit> {
    fit_model(samples, ModelCase::Power { phi }, m_min, order)
}

/// Fit the logarithmic model (integer powers times log-powers up to log²).
pub fn fit_log_model(samples: &SampleSet, m_min: i32, order: i32) -> Result<ExpansionFit> {
    fit_model(samples, ModelCase::Logarithmic, m_min, order)
}

fn fit_model(samples: &SampleSet, case: ModelCase, m_min: i32, order: i32) -> Result<ExpansionFit> {
    let terms = basis_terms(&case, m_min, order);
    let m = samples.len();
    if m < terms.len() {
        return Err(Error::InsufficientSamples {
            needed: terms.len(),
            got: m,
        });
    }
    let logs: Vec<Complex64> = samples
        .points
        .iter()
        .map(|&t| samples.branch.log(t))
        .collect::<Result<_>>()?;
    // The expansion's magnitude can sweep several decades along the ladder
    // (a t^{-φ} family blows up toward the origin), and an absolute-residual
    // solve would let roundoff from the loudest rungs drown the terms that
    // are only visible where the data is small. Each row is therefore scaled
    // by its sample's own magnitude, so every rung counts equally in
    // relative terms — the same scale the reported residuals use. One weight
    // per point keeps a single factorization serving all four entries.
    let sample_norms: Vec<f64> = samples.values.iter().map(|b| b.norm()).collect();
    let max_norm = sample_norms.iter().copied().fold(0.0f64, f64::max);
    let weights: Vec<f64> = if max_norm == 0.0 {
        vec![1.0; m]
    } else {
        sample_norms
            .iter()
            .map(|&s| 1.0 / s.max(1e-12 * max_norm))
            .collect()
    };
    let columns: Vec<Vec<Complex64>> = terms
        .iter()
        .map(|term| {
            logs.iter()
                .zip(&weights)
                .map(|(&w, &wt)| eval_term(term, w) * wt)
                .collect()
        })
        .collect();
    let rhs: Vec<Vec<Complex64>> = (0..4)
        .map(|e| {
            samples
                .entry(e / 2, e % 2)
                .into_iter()
                .zip(&weights)
                .map(|(z, &wt)| z * wt)
                .collect()
        })
        .collect();
    let rhs_norms: Vec<f64> = rhs
        .iter()
        .map(|b| b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();

    let ls = solve_least_squares(columns, rhs)?;
    if ls.condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            cond: ls.condition,
            limit: CONDITION_LIMIT,
        });
    }

    let mut coefficients = vec![CMatrix2::zero(); terms.len()];
    for e in 0..4 {
        for (k, coeff) in coefficients.iter_mut().enumerate() {
            coeff.e[e / 2][e % 2] = ls.solutions[e][k];
        }
    }
    let mut entry_residuals = [[0.0f64; 2]; 2];
    let mut residual = 0.0f64;
    for e in 0..4 {
        let rel = if rhs_norms[e] > 0.0 {
            ls.residuals[e] / rhs_norms[e]
        } else {
            0.0
        };
        entry_residuals[e / 2][e % 2] = rel;
        residual = residual.max(rel);
    }

    let r_max = samples.points.iter().map(|t| t.norm()).fold(0.0, f64::max);
    Ok(ExpansionFit {
        model: ExpansionModel {
            case,
            m_min,
            order,
            sector: SectorSpec {
                theta: samples.theta,
                half_width: DEFAULT_SECTOR_HALF_WIDTH,
                r_max,
            },
            branch: samples.branch,
            coefficients,
        },
        entry_residuals,
        residual,
        basis_condition: ls.condition,
    })
}

/// Result of the residual-descent refinement of the exponent gap.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct PhiRefinement {
    #[serde(with = "crate::serial::complex")]
    pub phi: Complex64,
    pub residual: f64,
    pub evaluations: usize,
}

/// Search radius of the initial refinement grid around the starting φ.
const REFINE_RADIUS: f64 = 0.1;
/// Stencil size at which the descent stops (≈ the achievable resolution).
const REFINE_STEP_FLOOR: f64 = 1e-7;
const REFINE_EVAL_CAP: usize = 4000;

/// Sharpen an approximate exponent gap by minimizing the power-fit residual
/// over complex φ: an 11×11 grid on a disc of radius [`REFINE_RADIUS`]
/// around the start, then a shrinking compass descent.
///
/// Ill-conditioned trial values (φ crossing a resonance) are treated as
/// infinitely bad rather than as errors.
pub fn refine_phi(
    samples: &SampleSet,
    phi0: Complex64,
    m_min: i32,
    order: i32,
) -> Result<PhiRefinement> {
    let evaluations = std::cell::Cell::new(0usize);
    let objective = |phi: Complex64| -> Result<f64> {
        evaluations.set(evaluations.get() + 1);
        match fit_power_model(samples, phi, m_min, order) {
            Ok(fit) => Ok(fit.residual),
            Err(Error::IllConditioned { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };

    let mut best_phi = phi0;
    let mut best = objective(phi0)?;
    let grid_step = REFINE_RADIUS / 5.0;
    for i in -5i32..=5 {
        for j in -5i32..=5 {
            let delta = Complex64::new(i as f64 * grid_step, j as f64 * grid_step);
            if delta.norm() > REFINE_RADIUS * (1.0 + 1e-12) || (i == 0 && j == 0) {
                continue;
            }
            let trial = phi0 + delta;
            let val = objective(trial)?;
            if val < best {
                best = val;
                best_phi = trial;
            }
        }
    }

    let mut step = grid_step;
    while step > REFINE_STEP_FLOOR && evaluations.get() < REFINE_EVAL_CAP {
        let mut moved = false;
        for i in -1i32..=1 {
            for j in -1i32..=1 {
                if i == 0 && j == 0 {
                    continue;
                }
                let trial = best_phi + Complex64::new(i as f64 * step, j as f64 * step);
                let val = objective(trial)?;
                if val < best {
                    best = val;
                    best_phi = trial;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }

    Ok(PhiRefinement {
        phi: best_phi,
        residual: best,
        evaluations: evaluations.get(),
    })
}

/// Estimate the lowest integer power a basis needs from the ladder's growth:
/// the log-log slope of ‖B(t)‖ over the inner half of the ladder, credited
/// with |Re φ| (the shifted families reach that much below each integer).
/// Returns 0 for bounded data; never positive.
pub fn suggest_m_min(samples: &SampleSet, phi: Option<Complex64>) -> i32 {
    let n = samples.len();
    if n < 4 {
        return 0;
    }
    let inner = n / 2..n;
    let pts: Vec<(f64, f64)> = inner
        .filter_map(|k| {
            let r = samples.points[k].norm();
            let v = samples.values[k].norm();
            (r > 0.0 && v > 0.0).then(|| (r.ln(), v.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return 0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let reach = slope + phi.map(|p| p.re.abs()).unwrap_or(0.0) + 0.01;
    (reach.floor() as i32).min(0)
}
