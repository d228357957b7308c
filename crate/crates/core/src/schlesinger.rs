//! The deformation equations for the residue matrices of a Fuchsian system
//! and their integration along paths of the moving pole.
//!
//! With poles a_1,…,a_n and residues B_1,…,B_n, the deformation system is
//!
//! ```text
//! dB_i = − Σ_{j≠i} [B_i, B_j] / (a_i − a_j) · d(a_i − a_j)
//! ```
//!
//! Here exactly one pole moves (position t); the right-hand side then reads
//! `dB_i/dt = [B_i, B_m]/(a_i − t)` for fixed poles and
//! `dB_m/dt = −Σ_{j≠m} [B_m, B_j]/(t − a_j)` for the moving one. The flow is
//! isospectral (each dB_i is a commutator with B_i) and conserves ΣB_i.

use crate::error::{Error, Result};
use crate::linalg::{commutator, eig2, CMatrix2, DEGENERACY_TOL};
use crate::path::{integrate_ode, ComplexPath, Segment, ToleranceSpec};
use num_complex::Complex64;

/// Pole pairs closer than this (relative to the configuration scale) are on
/// the collision divisor and rejected at construction.
pub const DIVISOR_FLOOR: f64 = 1e-12;

/// Default flow clearance: stop radial flows at
/// `DEFAULT_CLEARANCE_FACTOR × configuration diameter` from a collision.
pub const DEFAULT_CLEARANCE_FACTOR: f64 = 1e-6;

/// Finite poles plus an optional pole at infinity (residue −ΣB_i), with a
/// mask singling out which finite pole moves under the deformation.
#[derive(Clone, Debug)]
pub struct PoleConfiguration {
    pub finite_poles: Vec<Complex64>,
    pub has_pole_at_infinity: bool,
    pub moving_mask: Vec<bool>,
}

impl PoleConfiguration {
    pub fn new(
        finite_poles: Vec<Complex64>,
        has_pole_at_infinity: bool,
        moving_mask: Vec<bool>,
    ) -> Result<Self> {
        assert_eq!(
            finite_poles.len(),
            moving_mask.len(),
            "mask length must match pole count"
        );
        let cfg = Self {
            finite_poles,
            has_pole_at_infinity,
            moving_mask,
        };
        let gap = cfg.min_gap();
        if gap <= DIVISOR_FLOOR * cfg.scale() {
            return Err(Error::PoleCollision { gap });
        }
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.finite_poles.len()
    }

    /// Index of the single moving pole.
    pub fn moving_index(&self) -> usize {
        self.moving_mask
            .iter()
            .position(|&m| m)
            .expect("configuration has a moving pole")
    }

    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for i in 0..self.finite_poles.len() {
            for j in (i + 1)..self.finite_poles.len() {
                gap = gap.min((self.finite_poles[i] - self.finite_poles[j]).norm());
            }
        }
        gap
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.finite_poles.len() {
            for j in (i + 1)..self.finite_poles.len() {
                d = d.max((self.finite_poles[i] - self.finite_poles[j]).norm());
            }
        }
        d
    }

    fn scale(&self) -> f64 {
        self.finite_poles
            .iter()
            .map(|a| a.norm())
            .fold(1.0, f64::max)
    }
}

/// Residue matrices at a given position of the moving pole.
#[derive(Clone, Debug)]
pub struct SchlesingerState {
    pub config: PoleConfiguration,
    pub residues: Vec<CMatrix2>,
    /// Current position of the moving pole (duplicated in
    /// `config.finite_poles` at the moving index).
    pub t: Complex64,
}

impl SchlesingerState {
    /// The normalized four-pole configuration {0, t, 1, ∞} with traceless
    /// residues B₀, B_t, B₁ and B_∞ = −(B₀+B_t+B₁). Residue order follows
    /// pole order [0, t, 1].
    pub fn n4_normalized(b0: CMatrix2, bt: CMatrix2, b1: CMatrix2, t0: Complex64) -> Result<Self> {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let config = PoleConfiguration::new(vec![zero, t0, one], true, vec![false, true, false])?;
        Ok(Self {
            config,
            residues: vec![b0, bt, b1],
            t: t0,
        })
    }

    pub fn general(
        poles: Vec<Complex64>,
        residues: Vec<CMatrix2>,
        moving_index: usize,
        has_pole_at_infinity: bool,
    ) -> Result<Self> {
        assert_eq!(poles.len(), residues.len(), "one residue per pole");
        assert!(moving_index < poles.len(), "moving index in range");
        let t = poles[moving_index];
        let mut mask = vec![false; poles.len()];
        mask[moving_index] = true;
        let config = PoleConfiguration::new(poles, has_pole_at_infinity, mask)?;
        Ok(Self {
            config,
            residues,
            t,
        })
    }

    /// Residue at infinity, −ΣB_i.
    pub fn b_infinity(&self) -> CMatrix2 {
        -self
            .residues
            .iter()
            .fold(CMatrix2::zero(), |acc, b| acc + *b)
    }

    pub fn pack(&self) -> Vec<Complex64> {
        let mut y = Vec::with_capacity(4 * self.residues.len());
        for b in &self.residues {
            for r in 0..2 {
                for c in 0..2 {
                    y.push(b.e[r][c]);
                }
            }
        }
        y
    }

    pub fn unpack(&self, t: Complex64, y: &[Complex64]) -> Self {
        let mut state = self.clone();
        state.t = t;
        let mi = state.config.moving_index();
        state.config.finite_poles[mi] = t;
        for (i, b) in state.residues.iter_mut().enumerate() {
            for r in 0..2 {
                for c in 0..2 {
                    b.e[r][c] = y[4 * i + 2 * r + c];
                }
            }
        }
        state
    }
}

/// Right-hand side dB_i/dt at the state's own t.
pub fn schlesinger_rhs(state: &SchlesingerState) -> Result<Vec<CMatrix2>> {
    let y = state.pack();
    let mut out = vec![Complex64::default(); y.len()];
    packed_rhs(
        &state.config.finite_poles,
        state.config.moving_index(),
        state.config.scale(),
        state.t,
        &y,
        &mut out,
    )?;
    Ok((0..state.config.n()).map(|i| mat_at(&out, i)).collect())
}

#[inline]
fn mat_at(y: &[Complex64], i: usize) -> CMatrix2 {
    CMatrix2::new([[y[4 * i], y[4 * i + 1]], [y[4 * i + 2], y[4 * i + 3]]])
}

/// The right-hand side on packed states. `poles[m]` is ignored in favor of
/// the live position `t`.
fn packed_rhs(
    poles: &[Complex64],
    m: usize,
    scale: f64,
    t: Complex64,
    y: &[Complex64],
    out: &mut [Complex64],
) -> Result<()> {
    let bm = mat_at(y, m);
    let mut dbm = CMatrix2::zero();
    for i in 0..poles.len() {
        if i == m {
            continue;
        }
        let gap = poles[i] - t;
        if gap.norm() <= DIVISOR_FLOOR * scale {
            return Err(Error::PoleCollision { gap: gap.norm() });
        }
        let k = commutator(&mat_at(y, i), &bm).scale(Complex64::new(1.0, 0.0) / gap);
        out[4 * i] = k.e[0][0];
        out[4 * i + 1] = k.e[0][1];
        out[4 * i + 2] = k.e[1][0];
        out[4 * i + 3] = k.e[1][1];
        // dB_m = −Σ_{j≠m} [B_m,B_j]/(t−a_j) = −Σ of the fixed-pole terms.
        dbm = dbm - k;
    }
    out[4 * m] = dbm.e[0][0];
    out[4 * m + 1] = dbm.e[0][1];
    out[4 * m + 2] = dbm.e[1][0];
    out[4 * m + 3] = dbm.e[1][1];
    Ok(())
}

/// Integrate the deformation equations along a path of the moving pole, with
/// the default divisor clearance.
pub fn flow(
    state0: &SchlesingerState,
    t_path: &ComplexPath,
    tol: &ToleranceSpec,
) -> Result<Vec<SchlesingerState>> {
    let clearance = DEFAULT_CLEARANCE_FACTOR * state0.config.diameter().max(1.0);
    flow_with_clearance(state0, t_path, tol, clearance)
}

/// As [`flow`], with an explicit clearance.
///
/// Segments ending inside a fixed pole's clearance disk are truncated at the
/// disk boundary ("flow toward the collision stops at the clearance and the
/// reached t is reported"); a segment whose interior dips inside a disk is
/// rejected as a collision. Radial line segments are re-parametrized by
/// u = log t, on which the right-hand side is bounded all the way down.
pub fn flow_with_clearance(
    state0: &SchlesingerState,
    t_path: &ComplexPath,
    tol: &ToleranceSpec,
    clearance: f64,
) -> Result<Vec<SchlesingerState>> {
    let start_gap = (t_path.start() - state0.t).norm();
    if start_gap > 1e-9 * state0.t.norm().max(1.0) {
        return Err(Error::ConfigInvalid {
            pointer: "/path".into(),
            message: format!(
                "path starts at {} but the state's moving pole is at {}",
                t_path.start(),
                state0.t
            ),
        });
    }

    let m = state0.config.moving_index();
    let scale = state0.config.scale();
    let fixed: Vec<Complex64> = state0
        .config
        .finite_poles
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != m)
        .map(|(_, &a)| a)
        .collect();
    // packed_rhs skips index m; park the live t there.
    let mut poles = state0.config.finite_poles.clone();

    let mut trajectory = vec![state0.clone()];
    let mut current = state0.clone();

    for seg in t_path.segments() {
        let clipped = truncate_at_clearance(seg, &fixed, clearance)?;
        let (seg, stopped) = match clipped {
            Clip::Full(s) => (s, false),
            Clip::Stopped(s) => (s, true),
            // Segment starts already at/inside the clearance: flow is over.
            Clip::Exhausted => break,
        };
        let y0 = current.pack();
        let template = current.clone();
        poles[m] = Complex64::default();

        let log_param = radial_ratio(&seg).is_some();
        let integration = if log_param {
            // u = log t along the ray: dB/du = t · dB/dt.
            let (u0, u1) = log_endpoints(&seg);
            let u_path = ComplexPath::line(u0, u1)?;
            integrate_ode(
                |u, y, out| {
                    let t = u.exp();
                    packed_rhs(&poles, m, scale, t, y, out)?;
                    for v in out.iter_mut() {
                        *v *= t;
                    }
                    Ok(())
                },
                &u_path,
                &y0,
                tol,
            )?
        } else {
            let t_seg = ComplexPath::new(vec![seg])?;
            integrate_ode(
                |t, y, out| packed_rhs(&poles, m, scale, t, y, out),
                &t_seg,
                &y0,
                tol,
            )?
        };

        for sample in integration.samples.iter().skip(1) {
            let t = if log_param { sample.z.exp() } else { sample.z };
            trajectory.push(template.unpack(t, &sample.y));
        }
        current = trajectory.last().expect("nonempty trajectory").clone();
        if stopped {
            break;
        }
    }

    Ok(trajectory)
}

/// Is the segment a straight ray through the origin? Returns the modulus
/// ratio end/start if so.
fn radial_ratio(seg: &Segment) -> Option<f64> {
    let Segment::Line { start, end } = *seg else {
        return None;
    };
    if start.norm() == 0.0 || end.norm() == 0.0 {
        return None;
    }
    let r = end / start;
    if r.re > 0.0 && r.im.abs() <= 1e-12 * r.re.abs() {
        Some(r.re)
    } else {
        None
    }
}

fn log_endpoints(seg: &Segment) -> (Complex64, Complex64) {
    let Segment::Line { start, end } = *seg else {
        unreachable!("radial segments are lines");
    };
    let u0 = Complex64::new(start.norm().ln(), start.arg());
    // Same ray: keep the argument literally identical so the u-path is a
    // horizontal line.
    let u1 = Complex64::new(end.norm().ln(), start.arg());
    (u0, u1)
}

enum Clip {
    /// Segment untouched.
    Full(Segment),
    /// Segment shortened to stop at a clearance disk; the flow ends there.
    Stopped(Segment),
    /// Segment starts at or inside a clearance disk; nothing to integrate.
    Exhausted,
}

/// Clip a segment against the fixed poles' clearance disks.
fn truncate_at_clearance(seg: &Segment, fixed: &[Complex64], clearance: f64) -> Result<Clip> {
    match *seg {
        Segment::Arc { .. } => {
            for &p in fixed {
                let d = seg.distance_to(p);
                if d < clearance {
                    return Err(Error::PoleCollision { gap: d });
                }
            }
            Ok(Clip::Full(*seg))
        }
        Segment::Line { start, end } => {
            let mut s_stop = 1.0f64;
            for &p in fixed {
                if (start - p).norm() <= clearance {
                    return Ok(Clip::Exhausted);
                }
                // First entry of |start + s·d − p| into the clearance disk.
                let d = end - start;
                let w = start - p;
                let a = d.norm_sqr();
                if a == 0.0 {
                    continue;
                }
                let b = 2.0 * (w.re * d.re + w.im * d.im);
                let c = w.norm_sqr() - clearance * clearance;
                let disc = b * b - 4.0 * a * c;
                if disc <= 0.0 {
                    continue;
                }
                let sq = disc.sqrt();
                let s_in = (-b - sq) / (2.0 * a);
                let s_out = (-b + sq) / (2.0 * a);
                if s_in >= 1.0 || s_out <= 0.0 {
                    continue;
                }
                // The path enters this disk. Stopping there is only
                // legitimate when the disk contains the segment's end
                // (a flow aimed at the collision); crossing it sideways
                // is a routing error.
                if (end - p).norm() <= clearance {
                    s_stop = s_stop.min(s_in.max(0.0));
                } else {
                    return Err(Error::PoleCollision {
                        gap: seg.distance_to(p),
                    });
                }
            }
            if s_stop <= 0.0 {
                return Ok(Clip::Exhausted);
            }
            if s_stop >= 1.0 {
                return Ok(Clip::Full(*seg));
            }
            Ok(Clip::Stopped(Segment::Line {
                start,
                end: start + (end - start) * s_stop,
            }))
        }
    }
}

/// Eigenvalue of a residue by the canonical pick: Re ≥ 0, ties by Im ≥ 0.
/// For traceless matrices the eigenvalues are ±λ and this selects λ.
pub fn canonical_lambda(b: &CMatrix2) -> Complex64 {
    let es = eig2(b, DEGENERACY_TOL);
    let [l1, l2] = es.eigenvalues;
    let pick_first = match l1.re.partial_cmp(&l2.re) {
        Some(std::cmp::Ordering::Greater) => true,
        Some(std::cmp::Ordering::Less) => false,
        _ => l1.im >= l2.im,
    };
    if pick_first {
        l1
    } else {
        l2
    }
}

/// Local exponents: one eigenvalue per finite pole plus λ_∞, all by the
/// canonical Re ≥ 0 pick.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub lambda_per_pole: Vec<Complex64>,
    pub lambda_infinity: Complex64,
}

impl SpectralData {
    pub fn from_state(state: &SchlesingerState) -> Self {
        Self {
            lambda_per_pole: state.residues.iter().map(canonical_lambda).collect(),
            lambda_infinity: canonical_lambda(&state.b_infinity()),
        }
    }
}

/// Drift of the conserved quantities over a trajectory.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ConservationReport {
    /// Max |λ(t) − λ(t₀)| per pole, eigenvalues matched canonically.
    pub eigenvalue_drift: Vec<f64>,
    /// Max ‖ΣB(t) − ΣB(t₀)‖_F.
    pub sum_drift: f64,
    /// The moving pole and its merge partner (nearest pole at the final t).
    pub pair: (usize, usize),
    /// Max |tr(B_i B_j)(t) − tr(B_i B_j)(t₀)| for that pair. Conserved
    /// exactly only for two-pole configurations; reported as a diagnostic
    /// otherwise.
    pub pair_trace_drift: f64,
    pub threshold: f64,
    /// Which thresholded metrics broke the bound.
    pub breaches: Vec<String>,
}

pub const CONSERVATION_THRESHOLD: f64 = 1e-8;

pub fn conservation_report(traj: &[SchlesingerState], threshold: f64) -> ConservationReport {
    assert!(!traj.is_empty(), "empty trajectory");
    let first = &traj[0];
    let n = first.config.n();
    let m = first.config.moving_index();

    let last = traj.last().expect("nonempty");
    let partner = (0..n)
        .filter(|&i| i != m)
        .min_by(|&i, &j| {
            let di = (last.config.finite_poles[i] - last.t).norm();
            let dj = (last.config.finite_poles[j] - last.t).norm();
            di.partial_cmp(&dj).expect("finite distances")
        })
        .expect("at least two poles");

    let eigs0: Vec<[Complex64; 2]> = first.residues.iter().map(sorted_eigs).collect();
    let sum0 = -first.b_infinity();
    let pair0 = (first.residues[m] * first.residues[partner]).trace();

    let mut eigenvalue_drift = vec![0.0f64; n];
    let mut sum_drift = 0.0f64;
    let mut pair_trace_drift = 0.0f64;
    for st in traj.iter().skip(1) {
        for i in 0..n {
            let e = sorted_eigs(&st.residues[i]);
            let d = (e[0] - eigs0[i][0]).norm().max((e[1] - eigs0[i][1]).norm());
            eigenvalue_drift[i] = eigenvalue_drift[i].max(d);
        }
        sum_drift = sum_drift.max(((-st.b_infinity()) - sum0).norm());
        let p = (st.residues[m] * st.residues[partner]).trace();
        pair_trace_drift = pair_trace_drift.max((p - pair0).norm());
    }

    let mut breaches = Vec::new();
    for (i, d) in eigenvalue_drift.iter().enumerate() {
        if *d > threshold {
            breaches.push(format!("eigenvalues of residue {i}: drift {d:.3e}"));
        }
    }
    if sum_drift > threshold {
        breaches.push(format!("residue sum: drift {sum_drift:.3e}"));
    }
    if n == 2 && pair_trace_drift > threshold {
        breaches.push(format!("pair product trace: drift {pair_trace_drift:.3e}"));
    }

    ConservationReport {
        eigenvalue_drift,
        sum_drift,
        pair: (m, partner),
        pair_trace_drift,
        threshold,
        breaches,
    }
}

fn sorted_eigs(b: &CMatrix2) -> [Complex64; 2] {
    let es = eig2(b, DEGENERACY_TOL);
    let [l1, l2] = es.eigenvalues;
    let first = match l1.re.partial_cmp(&l2.re) {
        Some(std::cmp::Ordering::Greater) => true,
        Some(std::cmp::Ordering::Less) => false,
        _ => l1.im >= l2.im,
    };
    if first {
        [l1, l2]
    } else {
        [l2, l1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::ComplexPath;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn m(a: f64, b: f64, cc: f64, d: f64) -> CMatrix2 {
        CMatrix2::new([[c(a, 0.0), c(b, 0.0)], [c(cc, 0.0), c(d, 0.0)]])
    }

    /// The differential form of the deformation equations, transcribed
    /// independently of the library's loop: coefficients of (da_i − da_j)
    /// with da = e_m.
    fn rhs_by_differential(state: &SchlesingerState) -> Vec<CMatrix2> {
        let n = state.config.n();
        let mi = state.config.moving_index();
        let mut da = vec![c(0.0, 0.0); n];
        da[mi] = c(1.0, 0.0);
        let mut out = vec![CMatrix2::zero(); n];
        for i in 0..n {
            for j in 0..n {
                if j == i {
                    continue;
                }
                let gap = state.config.finite_poles[i] - state.config.finite_poles[j];
                let k = commutator(&state.residues[i], &state.residues[j]);
                let coeff = -(da[i] - da[j]) / gap;
                out[i] = out[i] + k.scale(coeff);
            }
        }
        out
    }

    #[test]
    fn rhs_two_pole_hand_value() {
        // Poles {0, t=1}, B₀ = E₁₂, B_t = E₂₁:
        // dB₀/dt = [B₀,B_t]/(0−1) = −diag(1,−1); dB_t/dt = +diag(1,−1).
        let state = SchlesingerState::general(
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![m(0.0, 1.0, 0.0, 0.0), m(0.0, 0.0, 1.0, 0.0)],
            1,
            false,
        )
        .unwrap();
        let rhs = schlesinger_rhs(&state).unwrap();
        assert!((rhs[0] - CMatrix2::diag(c(-1.0, 0.0), c(1.0, 0.0))).norm() < 1e-15);
        assert!((rhs[1] - CMatrix2::diag(c(1.0, 0.0), c(-1.0, 0.0))).norm() < 1e-15);
    }

    #[test]
    fn rhs_matches_independent_differential_form() {
        let state = SchlesingerState::n4_normalized(
            CMatrix2::new([[c(0.2, 0.1), c(0.3, -0.2)], [c(-0.1, 0.4), c(-0.2, -0.1)]]),
            CMatrix2::new([[c(0.1, -0.3), c(-0.2, 0.2)], [c(0.4, 0.1), c(-0.1, 0.3)]]),
            CMatrix2::new([[c(-0.3, 0.2), c(0.1, 0.1)], [c(0.2, -0.4), c(0.3, -0.2)]]),
            c(0.37, 0.11),
        )
        .unwrap();
        let a = schlesinger_rhs(&state).unwrap();
        let b = rhs_by_differential(&state);
        for i in 0..3 {
            assert!((a[i] - b[i]).norm() < 1e-14, "residue {i}");
        }
        // The Σ dB_i = 0 identity, entrywise.
        let total = a.iter().fold(CMatrix2::zero(), |acc, x| acc + *x);
        assert!(total.norm() < 1e-15);
    }

    #[test]
    fn rhs_is_traceless_for_traceless_data() {
        // Commutators are traceless, so traceless residues stay traceless.
        let state = SchlesingerState::n4_normalized(
            m(0.3, 0.5, 0.2, -0.3),
            m(-0.1, 0.4, 0.3, 0.1),
            m(0.2, -0.2, 0.5, -0.2),
            c(0.4, 0.0),
        )
        .unwrap();
        for b in schlesinger_rhs(&state).unwrap() {
            assert!(b.trace().norm() < 1e-15);
        }
    }

    #[test]
    fn collision_rejected_at_construction() {
        let r = SchlesingerState::n4_normalized(
            m(0.1, 0.0, 0.0, -0.1),
            m(0.1, 0.0, 0.0, -0.1),
            m(0.1, 0.0, 0.0, -0.1),
            c(1e-14, 0.0),
        );
        assert!(matches!(r, Err(Error::PoleCollision { .. })));
    }

    #[test]
    fn commuting_residues_flow_is_constant() {
        // Diagonal residues commute: rhs ≡ 0, trajectory constant.
        let state = SchlesingerState::n4_normalized(
            CMatrix2::diag(c(0.3, 0.0), c(-0.3, 0.0)),
            CMatrix2::diag(c(0.1, 0.2), c(-0.1, -0.2)),
            CMatrix2::diag(c(-0.2, 0.1), c(0.2, -0.1)),
            c(0.5, 0.0),
        )
        .unwrap();
        let path = ComplexPath::line(c(0.5, 0.0), c(0.01, 0.0)).unwrap();
        let traj = flow(&state, &path, &ToleranceSpec::default()).unwrap();
        let last = traj.last().unwrap();
        for i in 0..3 {
            assert!((last.residues[i] - state.residues[i]).norm() < 1e-14);
        }
        assert!((last.t - c(0.01, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn conserved_quantities_on_generic_flow() {
        let state = SchlesingerState::n4_normalized(
            CMatrix2::new([[c(0.2, 0.1), c(0.3, -0.1)], [c(0.25, 0.15), c(-0.2, -0.1)]]),
            CMatrix2::new([[c(0.1, -0.2), c(-0.15, 0.2)], [c(0.3, 0.1), c(-0.1, 0.2)]]),
            CMatrix2::new([
                [c(-0.25, 0.1), c(0.12, 0.08)],
                [c(0.2, -0.3), c(0.25, -0.1)],
            ]),
            c(0.5, 0.0),
        )
        .unwrap();
        let path = ComplexPath::line(c(0.5, 0.0), c(0.01, 0.0)).unwrap();
        let traj = flow(&state, &path, &ToleranceSpec::default()).unwrap();
        assert!(traj.len() > 3);
        let report = conservation_report(&traj, CONSERVATION_THRESHOLD);
        assert!(report.sum_drift < 1e-10, "sum drift {}", report.sum_drift);
        for d in &report.eigenvalue_drift {
            assert!(*d < 1e-8, "eigenvalue drift {d}");
        }
        assert!(report.breaches.is_empty(), "{:?}", report.breaches);
        assert_eq!(report.pair, (1, 0)); // moving pole merges toward 0
    }

    #[test]
    fn two_pole_pair_trace_is_conserved() {
        let state = SchlesingerState::general(
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![
                m(0.3, 0.4, 0.2, -0.3),
                CMatrix2::new([[c(0.1, 0.2), c(-0.3, 0.1)], [c(0.2, -0.1), c(-0.1, -0.2)]]),
            ],
            1,
            true,
        )
        .unwrap();
        let path = ComplexPath::line(c(1.0, 0.0), c(0.02, 0.0)).unwrap();
        let traj = flow(&state, &path, &ToleranceSpec::default()).unwrap();
        let report = conservation_report(&traj, CONSERVATION_THRESHOLD);
        assert!(
            report.pair_trace_drift < 1e-9,
            "{}",
            report.pair_trace_drift
        );
        assert!(report.breaches.is_empty());
    }

    #[test]
    fn loose_tolerance_is_flagged() {
        let state = SchlesingerState::n4_normalized(
            CMatrix2::new([[c(0.4, 0.2), c(0.6, -0.2)], [c(0.5, 0.3), c(-0.4, -0.2)]]),
            CMatrix2::new([[c(0.2, -0.4), c(-0.3, 0.4)], [c(0.6, 0.2), c(-0.2, 0.4)]]),
            CMatrix2::new([[c(-0.5, 0.2), c(0.24, 0.16)], [c(0.4, -0.6), c(0.5, -0.2)]]),
            c(0.5, 0.0),
        )
        .unwrap();
        let path = ComplexPath::line(c(0.5, 0.0), c(0.005, 0.0)).unwrap();
        let loose = ToleranceSpec {
            rel: 1e-3,
            abs: 1e-5,
            max_steps: 1_000_000,
        };
        let traj = flow(&state, &path, &loose).unwrap();
        let report = conservation_report(&traj, 1e-10);
        assert!(
            !report.breaches.is_empty(),
            "loose run should breach a 1e-10 threshold: {report:?}"
        );
    }

    #[test]
    fn flow_stops_at_divisor_clearance() {
        let state = SchlesingerState::n4_normalized(
            m(0.3, 0.4, 0.2, -0.3),
            m(-0.1, 0.3, 0.2, 0.1),
            m(0.2, -0.2, 0.4, -0.2),
            c(0.5, 0.0),
        )
        .unwrap();
        // Aim right at the collision t = 0; the flow must stop at the clearance.
        let path = ComplexPath::line(c(0.5, 0.0), c(0.0, 0.0)).unwrap();
        let clearance = 1e-3;
        let traj =
            flow_with_clearance(&state, &path, &ToleranceSpec::default(), clearance).unwrap();
        let reached = traj.last().unwrap().t;
        assert!(
            (reached.norm() - clearance).abs() < 1e-9,
            "reached {reached}"
        );
    }

    #[test]
    fn flow_crossing_a_pole_sideways_is_rejected() {
        let state = SchlesingerState::n4_normalized(
            m(0.3, 0.4, 0.2, -0.3),
            m(-0.1, 0.3, 0.2, 0.1),
            m(0.2, -0.2, 0.4, -0.2),
            c(0.5, 0.0),
        )
        .unwrap();
        // Straight through the fixed pole at 1.
        let path = ComplexPath::line(c(0.5, 0.0), c(1.5, 0.0)).unwrap();
        let r = flow(&state, &path, &ToleranceSpec::default());
        assert!(matches!(r, Err(Error::PoleCollision { .. })));
    }

    #[test]
    fn spectral_data_canonical_sign() {
        // Traceless with eigenvalues ±(0.3 − 0.1i): canonical pick has Re ≥ 0.
        let b = CMatrix2::new([[c(0.3, -0.1), c(0.0, 0.0)], [c(0.7, 0.0), c(-0.3, 0.1)]]);
        let lam = canonical_lambda(&b);
        assert!((lam - c(0.3, -0.1)).norm() < 1e-12);
    }
}
