//! Monodromy of rank-2 Fuchsian systems by numerical analytic continuation.
//!
//! A [`FuchsianSystem`] is the coefficient A(z) = Σ B_i/(z−a_i); transporting
//! the identity frame along a closed loop yields the monodromy of that loop.
//! Generator loops share a base point far to the left of the pole cluster and
//! consist of a connector, one counterclockwise circle, and the connector
//! reversed. Connectors are straight chords that detour along circular arcs
//! wherever the chord would enter another pole's clearance disk, always
//! passing the obstacle on the same side so the homotopy class is
//! deterministic.
//!
//! The generator set is cross-checked against an independently transported
//! big circle enclosing every pole: the ordered product of the generators
//! must reproduce it, and [`monodromy_set`] fails with
//! [`Error::ProductDefect`] when it does not. Conjugation-invariant data
//! (generator traces and pairwise product traces) feed the isomonodromy
//! drift check, and [`phi_from_monodromy`] converts a two-pole pair loop
//! into the exponent gap that drives the local expansion.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{eig2, CMatrix2, MatrixKind, DEGENERACY_TOL};
use crate::path::{integrate_ode, ComplexPath, Segment, ToleranceSpec};
use crate::schlesinger::{SchlesingerState, DIVISOR_FLOOR};

/// Loop radius around a pole, as a fraction of its distance to the nearest
/// other pole.
const LOOP_RADIUS_FACTOR: f64 = 0.3;

/// Clearance-disk radius used by connector detours. Two disks of this size
/// around distinct poles are always disjoint (0.45 + 0.45 < 1), and every
/// loop circle (factor 0.3) stays strictly inside its own disk.
const DETOUR_RADIUS_FACTOR: f64 = 0.45;

/// Relative mismatch allowed between the ordered generator product and the
/// independently transported big loop.
pub const PRODUCT_DEFECT_LIMIT: f64 = 1e-6;

/// Classification tolerance for *numerically computed* monodromy matrices:
/// loose enough to absorb transport error, far below genuine eigenvalue gaps.
pub const MONODROMY_CLASS_TOL: f64 = 1e-5;

/// |Re φ| distance to the nearest integer below which the exponent gap is
/// flagged as resonant.
pub const RESONANCE_TOL: f64 = 1e-4;

/// The linear system dy/dz = (Σ B_i/(z−a_i))·y.
#[derive(Clone, Debug)]
pub struct FuchsianSystem {
    pub poles: Vec<Complex64>,
    pub residues: Vec<CMatrix2>,
}

impl FuchsianSystem {
    pub fn new(poles: Vec<Complex64>, residues: Vec<CMatrix2>) -> Result<Self> {
        assert_eq!(poles.len(), residues.len(), "one residue per pole");
        assert!(!poles.is_empty(), "at least one pole");
        let sys = Self { poles, residues };
        for b in &sys.residues {
            if !b.is_finite() {
                return Err(Error::NonFiniteMatrix);
            }
        }
        let scale = sys.scale();
        for i in 0..sys.poles.len() {
            for j in (i + 1)..sys.poles.len() {
                let gap = (sys.poles[i] - sys.poles[j]).norm();
                if gap <= DIVISOR_FLOOR * scale {
                    return Err(Error::PoleCollision { gap });
                }
            }
        }
        Ok(sys)
    }

    /// The system induced by a deformation state at its current t.
    pub fn from_state(state: &SchlesingerState) -> Self {
        Self {
            poles: state.config.finite_poles.clone(),
            residues: state.residues.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.poles.len()
    }

    pub fn b_infinity(&self) -> CMatrix2 {
        -self
            .residues
            .iter()
            .fold(CMatrix2::zero(), |acc, b| acc + *b)
    }

    fn scale(&self) -> f64 {
        self.poles.iter().map(|a| a.norm()).fold(1.0, f64::max)
    }

    /// A(z), rejecting evaluation on (or numerically at) a pole.
    pub fn coefficient(&self, z: Complex64) -> Result<CMatrix2> {
        let floor = DIVISOR_FLOOR * self.scale();
        let mut a = CMatrix2::zero();
        for (pole, b) in self.poles.iter().zip(&self.residues) {
            let gap = z - pole;
            if gap.norm() <= floor {
                return Err(Error::PoleCollision { gap: gap.norm() });
            }
            a = a + b.scale(Complex64::new(1.0, 0.0) / gap);
        }
        Ok(a)
    }

    /// Frame transport along a path: solve dY/dz = A(z)·Y with Y = I at the
    /// start and return Y at the end. Composition runs right-to-left: for a
    /// path γ followed by δ, the transport is T_δ·T_γ.
    pub fn transport(&self, path: &ComplexPath, tol: &ToleranceSpec) -> Result<CMatrix2> {
        let floor = DIVISOR_FLOOR * self.scale();
        for &pole in &self.poles {
            let d = path.min_distance_to(pole);
            if d <= floor {
                return Err(Error::PoleCollision { gap: d });
            }
        }
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let y0 = [one, zero, zero, one];
        let integ = integrate_ode(
            |z, y, out| {
                let a = self.coefficient(z)?;
                out[0] = a.e[0][0] * y[0] + a.e[0][1] * y[2];
                out[1] = a.e[0][0] * y[1] + a.e[0][1] * y[3];
                out[2] = a.e[1][0] * y[0] + a.e[1][1] * y[2];
                out[3] = a.e[1][0] * y[1] + a.e[1][1] * y[3];
                Ok(())
            },
            path,
            &y0,
            tol,
        )?;
        let y = integ.y_end;
        Ok(CMatrix2::new([[y[0], y[1]], [y[2], y[3]]]))
    }

    /// Default base point: on the negative real axis, twice the pole cluster's
    /// magnitude away, so every pole is swept from one side.
    pub fn default_base(&self) -> Complex64 {
        let r = self.poles.iter().map(|a| a.norm()).fold(0.0, f64::max);
        Complex64::new(-2.0 * (1.0 + r), 0.0)
    }

    /// Distance from pole i to its nearest neighbour (to the base for a
    /// single-pole system).
    fn neighbour_gap(&self, i: usize, base: Complex64) -> f64 {
        let mut gap = f64::INFINITY;
        for (j, &a) in self.poles.iter().enumerate() {
            if j != i {
                gap = gap.min((a - self.poles[i]).norm());
            }
        }
        if gap.is_finite() {
            gap
        } else {
            (base - self.poles[i]).norm()
        }
    }

    /// Pole indices ordered by the sweep seen from the base: by argument of
    /// a_i − base, ties broken by distance.
    pub fn sweep_order(&self, base: Complex64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n()).collect();
        idx.sort_by(|&i, &j| {
            let u = self.poles[i] - base;
            let v = self.poles[j] - base;
            (u.arg(), u.norm())
                .partial_cmp(&(v.arg(), v.norm()))
                .expect("pole angles are finite")
        });
        idx
    }

    /// The generator loop for pole i: detoured connector from the base to the
    /// loop circle's entry point, one counterclockwise revolution, connector
    /// reversed.
    pub fn generator_loop(&self, i: usize, base: Complex64) -> Result<ComplexPath> {
        assert!(i < self.n(), "pole index in range");
        let target = self.poles[i];
        let radius = LOOP_RADIUS_FACTOR
            * self
                .neighbour_gap(i, base)
                .min((base - target).norm() / LOOP_RADIUS_FACTOR * 0.25);
        let toward_base = (base - target) / (base - target).norm();
        let entry = target + toward_base * radius;
        let obstacles: Vec<(Complex64, f64)> = (0..self.n())
            .filter(|&j| j != i)
            .map(|j| {
                (
                    self.poles[j],
                    DETOUR_RADIUS_FACTOR * self.neighbour_gap(j, base),
                )
            })
            .collect();
        let connector = detoured_path(base, entry, &obstacles)?;
        let arg0 = (entry - target).arg();
        let circle = ComplexPath::new(vec![Segment::Arc {
            center: target,
            radius,
            arg_start: arg0,
            arg_end: arg0 + TAU,
        }])?;
        let back = connector.reversed();
        connector.concat(&circle)?.concat(&back)
    }

    /// A counterclockwise circle through the base enclosing every pole,
    /// centered at the pole centroid.
    pub fn big_loop(&self, base: Complex64) -> Result<ComplexPath> {
        let n = Complex64::new(self.n() as f64, 0.0);
        let centroid = self.poles.iter().sum::<Complex64>() / n;
        let radius = (base - centroid).norm();
        for &a in &self.poles {
            let inside = (a - centroid).norm();
            if inside >= 0.8 * radius {
                return Err(Error::RadiusTooLarge {
                    radius: inside,
                    clearance: radius,
                });
            }
        }
        ComplexPath::circle(centroid, radius, (base - centroid).arg())
    }

    /// Monodromy of the generator loop around pole i.
    pub fn monodromy_generator(
        &self,
        i: usize,
        base: Complex64,
        tol: &ToleranceSpec,
    ) -> Result<CMatrix2> {
        let path = self.generator_loop(i, base)?;
        self.transport(&path, tol)
    }

    /// A counterclockwise circle enclosing exactly the poles i and j,
    /// centered at their midpoint.
    pub fn pair_loop(&self, i: usize, j: usize) -> Result<ComplexPath> {
        assert!(i < self.n() && j < self.n() && i != j, "distinct poles");
        let mid = (self.poles[i] + self.poles[j]) * Complex64::new(0.5, 0.0);
        let inner = (self.poles[i] - self.poles[j]).norm() * 0.5;
        let mut outer = f64::INFINITY;
        for (k, &a) in self.poles.iter().enumerate() {
            if k != i && k != j {
                outer = outer.min((a - mid).norm());
            }
        }
        if outer <= 1.25 * inner {
            return Err(Error::RadiusTooLarge {
                radius: inner,
                clearance: outer,
            });
        }
        let radius = 0.5 * (inner + outer.min(3.0 * inner));
        ComplexPath::circle(mid, radius, PI)
    }

    /// Monodromy of the pair loop (the conjugacy class is start-point-free).
    pub fn pair_monodromy(&self, i: usize, j: usize, tol: &ToleranceSpec) -> Result<CMatrix2> {
        let path = self.pair_loop(i, j)?;
        self.transport(&path, tol)
    }

    /// Eigenvalue gap of B_i + B_j, the natural hint for
    /// [`phi_from_monodromy`] on the matching pair loop.
    pub fn pair_exponent_gap(&self, i: usize, j: usize) -> Complex64 {
        let es = eig2(&(self.residues[i] + self.residues[j]), DEGENERACY_TOL);
        es.eigenvalues[0] - es.eigenvalues[1]
    }
}

/// Straight chord from `from` to `to`, replaced by boundary arcs wherever it
/// enters an obstacle disk. Every obstacle is passed on the same side: the
/// detour arc is the one through the disk's leftmost point relative to the
/// travel direction, so the obstacle always ends up on the path's right.
fn detoured_path(
    from: Complex64,
    to: Complex64,
    obstacles: &[(Complex64, f64)],
) -> Result<ComplexPath> {
    let dir = to - from;
    let len = dir.norm();
    if len == 0.0 {
        return ComplexPath::line(from, to);
    }
    let unit = dir / len;

    struct Crossing {
        s_in: f64,
        s_out: f64,
        center: Complex64,
        radius: f64,
    }
    let mut crossings: Vec<Crossing> = Vec::new();
    for &(center, radius) in obstacles {
        // |from + s·dir − center|² = radius², as a real quadratic in s.
        let w = from - center;
        let a = len * len;
        let b = 2.0 * (dir.re * w.re + dir.im * w.im);
        let c = w.norm_sqr() - radius * radius;
        let disc = b * b - 4.0 * a * c;
        if disc <= 0.0 {
            continue; // misses or grazes the disk
        }
        let sq = disc.sqrt();
        let s_in = (-b - sq) / (2.0 * a);
        let s_out = (-b + sq) / (2.0 * a);
        if s_out <= 0.0 || s_in >= 1.0 {
            continue; // chord's carrier line crosses, the chord itself does not
        }
        if s_in < 0.0 || s_out > 1.0 {
            // An endpoint sits inside the clearance disk: the caller's
            // geometry is broken (base or entry point too close to a pole).
            return Err(Error::RadiusTooLarge {
                radius,
                clearance: (from - center).norm().min((to - center).norm()),
            });
        }
        if s_out - s_in < 1e-12 {
            continue;
        }
        crossings.push(Crossing {
            s_in,
            s_out,
            center,
            radius,
        });
    }
    crossings.sort_by(|p, q| p.s_in.partial_cmp(&q.s_in).expect("finite parameters"));

    let mut segs: Vec<Segment> = Vec::new();
    let mut cursor = from;
    for x in &crossings {
        let arg_in = (from + dir * x.s_in - x.center).arg();
        let arg_out = (from + dir * x.s_out - x.center).arg();
        // Anchor the chord endpoints on the circle so continuity is exact.
        let p_in = x.center + Complex64::from_polar(x.radius, arg_in);
        if (p_in - cursor).norm() > 0.0 {
            segs.push(Segment::Line {
                start: cursor,
                end: p_in,
            });
        }
        // Pick the arc through the leftmost point (direction i·û from the
        // obstacle center).
        let arg_left = (unit * Complex64::new(0.0, 1.0)).arg();
        let ccw_to_left = wrap_positive(arg_left - arg_in);
        let ccw_to_out = wrap_positive(arg_out - arg_in);
        let arg_end = if ccw_to_left < ccw_to_out {
            arg_in + ccw_to_out
        } else {
            arg_in + ccw_to_out - TAU
        };
        segs.push(Segment::Arc {
            center: x.center,
            radius: x.radius,
            arg_start: arg_in,
            arg_end,
        });
        cursor = x.center + Complex64::from_polar(x.radius, arg_end);
    }
    if (to - cursor).norm() > 0.0 || segs.is_empty() {
        segs.push(Segment::Line {
            start: cursor,
            end: to,
        });
    }
    ComplexPath::new(segs)
}

/// Wrap an angle into [0, 2π).
fn wrap_positive(theta: f64) -> f64 {
    let mut t = theta % TAU;
    if t < 0.0 {
        t += TAU;
    }
    t
}

/// Generators, their product check, and conjugation invariants.
#[derive(Clone, Debug)]
pub struct MonodromySet {
    pub base: Complex64,
    /// One generator per pole, indexed like the system's pole list.
    pub generators: Vec<CMatrix2>,
    /// Pole indices in sweep order; the product below multiplies in this
    /// order (first swept pole applied first).
    pub ordering: Vec<usize>,
    /// Transport around the big circle, computed independently of the
    /// generators.
    pub g_infinity: CMatrix2,
    /// Relative mismatch ‖ordered product − g_infinity‖ / ‖g_infinity‖.
    pub product_defect: f64,
    /// tr M_i for each pole, then tr(M_i·M_j) for i < j in pole order.
    pub invariants: Vec<Complex64>,
}

/// Compute all generators from one base, verify them against the big loop,
/// and collect the conjugation invariants.
pub fn monodromy_set(
    sys: &FuchsianSystem,
    base: Option<Complex64>,
    tol: &ToleranceSpec,
) -> Result<MonodromySet> {
    let base = base.unwrap_or_else(|| sys.default_base());
    let generators: Vec<CMatrix2> = (0..sys.n())
        .map(|i| sys.monodromy_generator(i, base, tol))
        .collect::<Result<_>>()?;
    let ordering = sys.sweep_order(base);
    let g_infinity = sys.transport(&sys.big_loop(base)?, tol)?;

    // Loops compose left-to-right along the sweep; transports therefore
    // multiply right-to-left: the first swept generator is applied first.
    let mut product = CMatrix2::identity();
    for &i in &ordering {
        product = generators[i] * product;
    }
    let product_defect = (product - g_infinity).norm() / g_infinity.norm().max(1.0);
    if product_defect > PRODUCT_DEFECT_LIMIT {
        return Err(Error::ProductDefect {
            defect: product_defect,
            limit: PRODUCT_DEFECT_LIMIT,
        });
    }

    let mut invariants: Vec<Complex64> = generators.iter().map(|m| m.trace()).collect();
    for i in 0..sys.n() {
        for j in (i + 1)..sys.n() {
            invariants.push((generators[i] * generators[j]).trace());
        }
    }
    Ok(MonodromySet {
        base,
        generators,
        ordering,
        g_infinity,
        product_defect,
        invariants,
    })
}

/// Max deviation of the monodromy invariants across a deformation trajectory.
#[derive(Clone, Debug, serde::Serialize)]
pub struct IsomonodromyDrift {
    /// |t| positions of the sampled states.
    pub sampled_t: Vec<[f64; 2]>,
    /// Per-sample max deviation from the first sample's invariants.
    pub per_sample: Vec<f64>,
    /// Overall max deviation.
    pub drift: f64,
}

/// Sample `samples` states evenly along a trajectory and compare monodromy
/// invariants against the first state's.
///
/// Valid while the deformation does not braid poles across each other's
/// connectors: individual traces are conjugation invariants throughout, and
/// pairwise product traces are stable under loop deformations that follow
/// the moving pole continuously.
pub fn isomonodromy_drift(
    traj: &[SchlesingerState],
    samples: usize,
    tol: &ToleranceSpec,
) -> Result<IsomonodromyDrift> {
    if traj.len() < 2 || samples < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: traj.len().min(samples),
        });
    }
    let samples = samples.min(traj.len());
    let picks: Vec<usize> = (0..samples)
        .map(|k| k * (traj.len() - 1) / (samples - 1))
        .collect();

    let mut reference: Option<Vec<Complex64>> = None;
    let mut per_sample = Vec::with_capacity(samples);
    let mut sampled_t = Vec::with_capacity(samples);
    for &p in &picks {
        let state = &traj[p];
        let sys = FuchsianSystem::from_state(state);
        let set = monodromy_set(&sys, None, tol)?;
        sampled_t.push([state.t.re, state.t.im]);
        match &reference {
            None => {
                reference = Some(set.invariants);
                per_sample.push(0.0);
            }
            Some(base_inv) => {
                let dev = base_inv
                    .iter()
                    .zip(&set.invariants)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0f64, f64::max);
                per_sample.push(dev);
            }
        }
    }
    let drift = per_sample.iter().copied().fold(0.0f64, f64::max);
    Ok(IsomonodromyDrift {
        sampled_t,
        per_sample,
        drift,
    })
}

/// Which local model the expansion at a pole collision follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ExpansionCase {
    /// Distinct non-resonant exponents: pure power series in t^{±φ}·t^m.
    Power,
    /// Defective pair monodromy: powers of log t enter.
    Logarithmic,
    /// Exponent gap (numerically) an integer: the power basis degenerates.
    Resonant,
}

/// The exponent gap extracted from a pair monodromy, with its model case.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct PhiClassification {
    pub case: ExpansionCase,
    /// The gap φ; `None` for a defective (Jordan) pair monodromy, where only
    /// the logarithmic model applies.
    #[serde(with = "crate::serial::complex_opt")]
    pub phi: Option<Complex64>,
    pub monodromy_kind: MatrixKind,
}

/// Extract the exponent gap φ from a pair monodromy M ≈ C·exp(2πi·Λ)·C⁻¹.
///
/// For a unimodular pair (traceless residues) the eigenvalues are e^{±πiφ},
/// and for |Re φ| < 1 neither argument wraps: the principal logs recover φ
/// exactly, up to the eigenvalue-ordering sign. The `hint` (typically the
/// eigenvalue gap of B_i + B_j) picks the sign; without one, Re φ ≥ 0 is
/// preferred. A scalar pair monodromy only determines φ ∈ ℤ; the hint picks
/// the integer (0 without one).
pub fn phi_from_monodromy(
    m_pair: &CMatrix2,
    hint: Option<Complex64>,
    class_tol: f64,
) -> Result<PhiClassification> {
    let det = m_pair.det().norm();
    if det <= class_tol {
        return Err(Error::SingularMatrix {
            det,
            tol: class_tol,
        });
    }
    let es = eig2(m_pair, class_tol);
    match es.kind {
        MatrixKind::JordanBlock => Ok(PhiClassification {
            case: ExpansionCase::Logarithmic,
            phi: None,
            monodromy_kind: es.kind,
        }),
        MatrixKind::Scalar => {
            let k = hint.map(|h| h.re.round()).unwrap_or(0.0);
            let phi = Complex64::new(k, 0.0);
            Ok(PhiClassification {
                case: if k == 0.0 {
                    ExpansionCase::Power
                } else {
                    ExpansionCase::Resonant
                },
                phi: Some(phi),
                monodromy_kind: es.kind,
            })
        }
        MatrixKind::Diagonalizable => {
            let two_pi_i = Complex64::new(0.0, TAU);
            let raw = (es.eigenvalues[0].ln() - es.eigenvalues[1].ln()) / two_pi_i;
            let phi = match hint {
                Some(h) => {
                    if (raw - h).norm() <= (-raw - h).norm() {
                        raw
                    } else {
                        -raw
                    }
                }
                None => {
                    if raw.re > 0.0 || (raw.re == 0.0 && raw.im >= 0.0) {
                        raw
                    } else {
                        -raw
                    }
                }
            };
            let resonant = (phi.re - phi.re.round()).abs() <= RESONANCE_TOL;
            Ok(PhiClassification {
                case: if resonant {
                    ExpansionCase::Resonant
                } else {
                    ExpansionCase::Power
                },
                phi: Some(phi),
                monodromy_kind: es.kind,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::CanonicalFamily;
    use crate::linalg::LogBranch;
    use crate::path::ToleranceSpec;
    use crate::schlesinger::flow;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tm(a: f64, b: f64, cc: f64) -> CMatrix2 {
        // Traceless matrix [[a, b], [c, −a]] with a small imaginary twist.
        CMatrix2::new([[c(a, 0.02), c(b, -0.01)], [c(cc, 0.03), c(-a, -0.02)]])
    }

    fn three_pole_system() -> FuchsianSystem {
        FuchsianSystem::new(
            vec![c(0.0, 0.0), c(0.4, 0.5), c(1.0, 0.0)],
            vec![
                tm(0.11, 0.23, 0.17),
                tm(-0.08, 0.14, 0.21),
                tm(0.05, -0.19, 0.12),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_pole_loop_recovers_the_exponential() {
        // With one pole everything commutes along the loop, so the full
        // generator transport is exactly exp(2πiB).
        let b = tm(0.2, 0.3, -0.1);
        let sys = FuchsianSystem::new(vec![c(0.3, 0.1)], vec![b]).unwrap();
        let m = sys
            .monodromy_generator(0, sys.default_base(), &ToleranceSpec::default())
            .unwrap();
        let oracle = b.scale(c(0.0, TAU)).expm();
        assert!(
            (m - oracle).norm() < 1e-9,
            "generator vs exp(2πiB): {:.3e}",
            (m - oracle).norm()
        );
    }

    #[test]
    fn connector_detours_keep_their_distance() {
        // Base, pole 0 and pole 1 are exactly collinear: the chord to pole 1
        // must route around pole 0's clearance disk.
        let sys = FuchsianSystem::new(
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![tm(0.1, 0.2, 0.3), tm(0.2, -0.1, 0.15)],
        )
        .unwrap();
        let base = sys.default_base();
        let path = sys.generator_loop(1, base).unwrap();
        assert!((path.start() - base).norm() < 1e-12);
        assert!((path.end() - base).norm() < 1e-12);
        // Detour disk around pole 0 has radius 0.45·gap = 0.45.
        let d = path.min_distance_to(c(0.0, 0.0));
        assert!(d > 0.449, "loop for pole 1 dips to {d:.4} from pole 0");
        // The loop winds once around its own pole, zero times around pole 0.
        assert!((path.winding_number(c(1.0, 0.0)) - 1.0).abs() < 1e-6);
        assert!(path.winding_number(c(0.0, 0.0)).abs() < 1e-6);
    }

    #[test]
    fn transport_rejects_a_path_through_a_pole() {
        let sys = FuchsianSystem::new(vec![c(0.0, 0.0)], vec![tm(0.1, 0.2, 0.3)]).unwrap();
        let path = ComplexPath::line(c(-1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!(matches!(
            sys.transport(&path, &ToleranceSpec::default()),
            Err(Error::PoleCollision { .. })
        ));
    }

    #[test]
    fn zero_sum_three_pole_big_loop_is_trivial() {
        // B_∞ = 0 makes ∞ a regular point: the big-circle transport is the
        // identity, and the ordered generator product must reproduce it.
        let b0 = tm(0.11, 0.23, 0.17);
        let b1 = tm(-0.08, 0.14, 0.21);
        let b2 = -b0 - b1;
        let sys = FuchsianSystem::new(
            vec![c(0.0, 0.0), c(0.4, 0.5), c(1.0, 0.0)],
            vec![b0, b1, b2],
        )
        .unwrap();
        let set = monodromy_set(&sys, None, &ToleranceSpec::default()).unwrap();
        assert!(
            (set.g_infinity - CMatrix2::identity()).norm() < 1e-8,
            "big loop should be trivial, off by {:.3e}",
            (set.g_infinity - CMatrix2::identity()).norm()
        );
        assert!(set.product_defect < 1e-7);
    }

    #[test]
    fn ordered_product_matches_an_independent_big_loop() {
        // Nonzero B_∞: the big-loop transport is a nontrivial matrix computed
        // without the generators, so the product check has teeth.
        let sys = three_pole_system();
        let set = monodromy_set(&sys, None, &ToleranceSpec::default()).unwrap();
        assert!(
            set.product_defect < 1e-7,
            "product defect {:.3e}",
            set.product_defect
        );
        // In the chart w = 1/z the local residue at w = 0 is B_∞ and the big
        // z-circle runs clockwise there, so for non-resonant B_∞ the big-loop
        // eigenvalues are exactly e^{−2πiλ} over the eigenvalues λ of B_∞.
        let es_binf = eig2(&sys.b_infinity(), DEGENERACY_TOL);
        let expect = (Complex64::new(0.0, -TAU) * es_binf.eigenvalues[0]).exp()
            + (Complex64::new(0.0, -TAU) * es_binf.eigenvalues[1]).exp();
        assert!(
            (set.g_infinity.trace() - expect).norm() < 1e-8,
            "tr G_∞ = {} vs {}",
            set.g_infinity.trace(),
            expect
        );
    }

    #[test]
    fn reversed_product_order_misses_the_big_loop() {
        // Guards the composition convention: applying the sweep in reverse
        // produces a genuinely different matrix for non-commuting generators.
        let sys = three_pole_system();
        let set = monodromy_set(&sys, None, &ToleranceSpec::default()).unwrap();
        let mut reversed = CMatrix2::identity();
        for &i in set.ordering.iter().rev() {
            reversed = set.generators[i] * reversed;
        }
        let defect = (reversed - set.g_infinity).norm() / set.g_infinity.norm();
        assert!(
            defect > 1e-3,
            "reversed order should not reproduce the big loop (defect {defect:.3e})"
        );
    }

    #[test]
    fn pair_loop_eigenvalues_track_the_pair_exponents() {
        // For a two-pole system from the conjugated family, the pair loop is
        // the loop at infinity: its eigenvalue gap is the gap of B₀+B_t for
        // every t, an exact closed-form oracle.
        let b0 = CMatrix2::new([
            [c(0.21, 0.05), c(0.30, -0.10)],
            [c(0.12, 0.08), c(-0.21, -0.05)],
        ]);
        let bt = CMatrix2::new([
            [c(0.10, -0.03), c(-0.22, 0.07)],
            [c(0.25, 0.11), c(-0.10, 0.03)],
        ]);
        let fam = CanonicalFamily::new(b0, bt);
        let state = fam.state_at(c(0.4, 0.15), &LogBranch::principal()).unwrap();
        let sys = FuchsianSystem::from_state(&state);
        let m = sys.pair_monodromy(0, 1, &ToleranceSpec::default()).unwrap();
        let hint = sys.pair_exponent_gap(0, 1);
        let cls = phi_from_monodromy(&m, Some(hint), MONODROMY_CLASS_TOL).unwrap();
        assert_eq!(cls.case, ExpansionCase::Power);
        let phi = cls.phi.unwrap();
        assert!(
            (phi - hint).norm() < 1e-9,
            "φ from monodromy {phi} vs exponent gap {hint}"
        );
    }

    #[test]
    fn defective_pair_classifies_logarithmic() {
        // Traceless Jordan pair sum ⇒ nilpotent B₀+B_t ⇒ defective pair
        // monodromy I + 2πi·N.
        let b0 = CMatrix2::new([[c(0.15, 0.0), c(0.40, 0.0)], [c(0.10, 0.0), c(-0.15, 0.0)]]);
        // Choose bt so b0 + bt = [[0, 1], [0, 0]].
        let target = CMatrix2::new([[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
        let bt = target - b0;
        let fam = CanonicalFamily::new(b0, bt);
        let state = fam.state_at(c(0.3, 0.1), &LogBranch::principal()).unwrap();
        let sys = FuchsianSystem::from_state(&state);
        let m = sys.pair_monodromy(0, 1, &ToleranceSpec::default()).unwrap();
        let cls = phi_from_monodromy(&m, None, MONODROMY_CLASS_TOL).unwrap();
        assert_eq!(cls.monodromy_kind, MatrixKind::JordanBlock);
        assert_eq!(cls.case, ExpansionCase::Logarithmic);
        assert!(cls.phi.is_none());
    }

    #[test]
    fn resonant_gap_is_flagged() {
        // Gap exactly 1 ⇒ eigenvalues −1, −1 ⇒ scalar monodromy; the hint
        // decides between φ = 0 and the resonant integer.
        let m = CMatrix2::diag(c(-1.0, 0.0), c(-1.0, 0.0));
        let cls = phi_from_monodromy(&m, Some(c(1.0, 0.0)), MONODROMY_CLASS_TOL).unwrap();
        assert_eq!(cls.case, ExpansionCase::Resonant);
        assert_eq!(cls.phi.unwrap(), c(1.0, 0.0));
        let cls0 = phi_from_monodromy(&m, None, MONODROMY_CLASS_TOL).unwrap();
        assert_eq!(cls0.case, ExpansionCase::Power);
        assert_eq!(cls0.phi.unwrap(), c(0.0, 0.0));

        // Gap near (but not at) 1 stays diagonalizable yet is still resonant.
        let phi = 1.0 - 3e-5;
        let lam = 0.5 * phi;
        let m = CMatrix2::diag(
            Complex64::from_polar(1.0, TAU * lam),
            Complex64::from_polar(1.0, -TAU * lam),
        );
        let cls = phi_from_monodromy(&m, Some(c(phi, 0.0)), 1e-8).unwrap();
        assert_eq!(cls.case, ExpansionCase::Resonant);
        assert!((cls.phi.unwrap().re - phi).abs() < 1e-12);
    }

    #[test]
    fn phi_sign_follows_the_hint() {
        let phi = c(0.32, 0.05);
        let m = CMatrix2::diag(
            (Complex64::new(0.0, PI) * phi).exp(),
            (Complex64::new(0.0, -PI) * phi).exp(),
        );
        let no_hint = phi_from_monodromy(&m, None, 1e-8).unwrap().phi.unwrap();
        assert!((no_hint - phi).norm() < 1e-12, "Re ≥ 0 pick");
        let hinted = phi_from_monodromy(&m, Some(-phi), 1e-8)
            .unwrap()
            .phi
            .unwrap();
        assert!((hinted + phi).norm() < 1e-12, "hint flips the sign");
    }

    #[test]
    fn invariants_are_flat_along_an_isomonodromic_flow() {
        let b0 = tm(0.11, 0.23, 0.17);
        let bt = tm(-0.08, 0.14, 0.21);
        let b1 = tm(0.05, -0.19, 0.12);
        let state = SchlesingerState::n4_normalized(b0, bt, b1, c(0.4, 0.5)).unwrap();
        let path = ComplexPath::line(c(0.4, 0.5), c(0.55, 0.3)).unwrap();
        let traj = flow(&state, &path, &ToleranceSpec::default()).unwrap();
        let report = isomonodromy_drift(&traj, 4, &ToleranceSpec::default()).unwrap();
        assert!(
            report.drift < 1e-7,
            "invariants drifted by {:.3e}",
            report.drift
        );

        // Negative control: a non-isomonodromic trajectory (perturbed
        // endpoint residues) must show a visible drift.
        let mut broken = traj.clone();
        let last = broken.last_mut().unwrap();
        for b in &mut last.residues {
            *b = b.scale(c(1.01, 0.0));
        }
        let report = isomonodromy_drift(&broken, 4, &ToleranceSpec::default()).unwrap();
        assert!(
            report.drift > 1e-4,
            "perturbed trajectory should drift, got {:.3e}",
            report.drift
        );
    }

    #[test]
    fn pair_loop_needs_room() {
        // Third pole sits closer to the pair midpoint than the pair radius
        // allows.
        let sys = FuchsianSystem::new(
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.1)],
            vec![tm(0.1, 0.2, 0.3), tm(0.2, -0.1, 0.15), tm(0.05, 0.1, -0.2)],
        )
        .unwrap();
        assert!(matches!(
            sys.pair_loop(0, 1),
            Err(Error::RadiusTooLarge { .. })
        ));
    }
}
