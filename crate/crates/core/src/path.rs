//! Piecewise paths in ℂ and adaptive integration of complex ODE systems
//! along them.
//!
//! Paths are chains of straight lines and circular arcs; each segment is
//! parametrized by a real fraction s ∈ [0,1], and the integrator steps in s
//! with an embedded Dormand–Prince 5(4) pair under PI step-size control.
//! States are packed slices of complex numbers so the same core moves
//! fundamental 2×2 matrices (4 entries) and whole residue tuples (4n entries).

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Endpoint mismatch at or below this is considered contiguous.
pub const CONTINUITY_TOL: f64 = 1e-12;

/// A step whose arclength falls below `UNDERFLOW_FACTOR × total path length`
/// aborts the integration: something singular sits on or near the path.
pub const UNDERFLOW_FACTOR: f64 = 1e-14;

const SAFETY: f64 = 0.9;
const SHRINK_LIMIT: f64 = 0.2;
const GROWTH_LIMIT: f64 = 5.0;
// PI controller exponents for a 5(4) pair (error estimator of order 5).
const PI_ALPHA: f64 = 0.14;
const PI_BETA: f64 = 0.08;

#[derive(Clone, Copy, Debug)]
pub enum Segment {
    Line {
        start: Complex64,
        end: Complex64,
    },
    /// Circular arc `center + radius·e^{iθ}`, θ from `arg_start` to `arg_end`.
    /// `arg_end > arg_start` runs counterclockwise.
    Arc {
        center: Complex64,
        radius: f64,
        arg_start: f64,
        arg_end: f64,
    },
}

impl Segment {
    pub fn point(&self, s: f64) -> Complex64 {
        match *self {
            Segment::Line { start, end } => start + (end - start) * s,
            Segment::Arc {
                center,
                radius,
                arg_start,
                arg_end,
            } => {
                let th = arg_start + (arg_end - arg_start) * s;
                center + Complex64::from_polar(radius, th)
            }
        }
    }

    /// dz/ds.
    pub fn tangent(&self, s: f64) -> Complex64 {
        match *self {
            Segment::Line { start, end } => end - start,
            Segment::Arc {
                center: _,
                radius,
                arg_start,
                arg_end,
            } => {
                let dth = arg_end - arg_start;
                let th = arg_start + dth * s;
                Complex64::new(0.0, dth) * Complex64::from_polar(radius, th)
            }
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { start, end } => (end - start).norm(),
            Segment::Arc {
                radius,
                arg_start,
                arg_end,
                ..
            } => radius * (arg_end - arg_start).abs(),
        }
    }

    pub fn start(&self) -> Complex64 {
        self.point(0.0)
    }

    pub fn end(&self) -> Complex64 {
        self.point(1.0)
    }

    pub fn reversed(&self) -> Segment {
        match *self {
            Segment::Line { start, end } => Segment::Line {
                start: end,
                end: start,
            },
            Segment::Arc {
                center,
                radius,
                arg_start,
                arg_end,
            } => Segment::Arc {
                center,
                radius,
                arg_start: arg_end,
                arg_end: arg_start,
            },
        }
    }

    /// Minimum distance from `p` to the segment (exact for lines, sampled
    /// for arcs; fine for clearance checks).
    pub fn distance_to(&self, p: Complex64) -> f64 {
        match *self {
            Segment::Line { start, end } => {
                let d = end - start;
                let len2 = d.norm_sqr();
                if len2 == 0.0 {
                    return (p - start).norm();
                }
                let s = ((p - start).re * d.re + (p - start).im * d.im) / len2;
                let s = s.clamp(0.0, 1.0);
                (p - (start + d * s)).norm()
            }
            Segment::Arc {
                center,
                radius,
                arg_start,
                arg_end,
            } => {
                let arg_p = (p - center).arg();
                let (lo, hi) = if arg_start <= arg_end {
                    (arg_start, arg_end)
                } else {
                    (arg_end, arg_start)
                };
                // Does some representative arg_p + 2πk fall inside [lo, hi]?
                let k0 = ((lo - arg_p) / TAU).floor();
                let inside = (0..3).any(|i| {
                    let cand = arg_p + (k0 + i as f64) * TAU;
                    cand >= lo - 1e-15 && cand <= hi + 1e-15
                });
                if inside {
                    ((p - center).norm() - radius).abs()
                } else {
                    let a = center + Complex64::from_polar(radius, arg_start);
                    let b = center + Complex64::from_polar(radius, arg_end);
                    (p - a).norm().min((p - b).norm())
                }
            }
        }
    }
}

/// A contiguous chain of segments.
#[derive(Clone, Debug)]
pub struct ComplexPath {
    segments: Vec<Segment>,
}

impl ComplexPath {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyPath);
        }
        let mut scale: f64 = 1.0;
        for seg in &segments {
            scale = scale.max(seg.start().norm()).max(seg.end().norm());
        }
        for i in 1..segments.len() {
            let gap = (segments[i].start() - segments[i - 1].end()).norm();
            if gap > CONTINUITY_TOL * scale {
                return Err(Error::BrokenPath { segment: i, gap });
            }
        }
        if segments.iter().map(Segment::length).sum::<f64>() == 0.0 {
            return Err(Error::EmptyPath);
        }
        Ok(Self { segments })
    }

    pub fn line(start: Complex64, end: Complex64) -> Result<Self> {
        Self::new(vec![Segment::Line { start, end }])
    }

    /// Full counterclockwise circle, entered at angle `arg_start`.
    pub fn circle(center: Complex64, radius: f64, arg_start: f64) -> Result<Self> {
        Self::new(vec![Segment::Arc {
            center,
            radius,
            arg_start,
            arg_end: arg_start + TAU,
        }])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn start(&self) -> Complex64 {
        self.segments[0].start()
    }

    pub fn end(&self) -> Complex64 {
        self.segments[self.segments.len() - 1].end()
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn reversed(&self) -> Self {
        Self {
            segments: self.segments.iter().rev().map(Segment::reversed).collect(),
        }
    }

    pub fn concat(mut self, other: &ComplexPath) -> Result<Self> {
        self.segments.extend_from_slice(&other.segments);
        Self::new(self.segments)
    }

    pub fn min_distance_to(&self, p: Complex64) -> f64 {
        self.segments
            .iter()
            .map(|s| s.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Winding number of the path around `p`, by accumulating continuous
    /// argument increments over a fine discretization. Integer-valued (up to
    /// discretization error) for closed paths.
    pub fn winding_number(&self, p: Complex64) -> f64 {
        let mut total = 0.0;
        for seg in &self.segments {
            const N: usize = 256;
            let mut prev = (seg.point(0.0) - p).arg();
            for i in 1..=N {
                let cur = (seg.point(i as f64 / N as f64) - p).arg();
                let mut d = cur - prev;
                if d > std::f64::consts::PI {
                    d -= TAU;
                } else if d < -std::f64::consts::PI {
                    d += TAU;
                }
                total += d;
                prev = cur;
            }
        }
        total / TAU
    }
}

/// Tolerances for adaptive integration.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct ToleranceSpec {
    pub rel: f64,
    pub abs: f64,
    pub max_steps: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            rel: 1e-10,
            abs: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

impl ToleranceSpec {
    pub fn tight() -> Self {
        Self {
            rel: 1e-12,
            abs: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

/// State snapshot at an accepted step.
#[derive(Clone, Debug)]
pub struct TrajectorySample {
    pub z: Complex64,
    pub y: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct Integration {
    pub y_end: Vec<Complex64>,
    /// Accepted-step samples, including both endpoints.
    pub samples: Vec<TrajectorySample>,
    pub accepted: usize,
    pub rejected: usize,
}

// Dormand–Prince 5(4) tableau (FSAL: the 7th stage is the next step's first).
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// b⁵ − b⁴: weights of the embedded error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `dy/dz = f(z, y)` along `path` from `y0`.
///
/// The field writes its value into the output slice and may fail (e.g. a
/// coefficient matrix is evaluated on a pole); failures abort the run.
/// Samples are recorded at every accepted step.
pub fn integrate_ode<F>(
    mut field: F,
    path: &ComplexPath,
    y0: &[Complex64],
    tol: &ToleranceSpec,
) -> Result<Integration>
where
    F: FnMut(Complex64, &[Complex64], &mut [Complex64]) -> Result<()>,
{
    let dim = y0.len();
    let total_len = path.total_length();
    let mut y = y0.to_vec();
    let mut samples = vec![TrajectorySample {
        z: path.start(),
        y: y.clone(),
    }];
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    // Stage buffers, reused across steps.
    let mut k: Vec<Vec<Complex64>> = (0..7).map(|_| vec![Complex64::default(); dim]).collect();
    let mut y_stage = vec![Complex64::default(); dim];
    let mut y_new = vec![Complex64::default(); dim];

    for (seg_idx, seg) in path.segments().iter().enumerate() {
        let seg_len = seg.length();
        if seg_len == 0.0 {
            continue;
        }
        let mut s = 0.0f64;
        let mut h = 0.05f64;
        let mut err_prev: f64 = 1.0;
        // First stage of the segment (and FSAL refill after acceptance).
        eval_scaled(&mut field, seg, s, &y, &mut k[0])?;

        while s < 1.0 {
            if accepted + rejected >= tol.max_steps {
                return Err(Error::MaxStepsExceeded { max: tol.max_steps });
            }
            if h * seg_len < UNDERFLOW_FACTOR * total_len {
                return Err(Error::StepUnderflow {
                    segment: seg_idx,
                    s,
                    step: h * seg_len,
                });
            }
            let h_eff = h.min(1.0 - s);

            for stage in 0..6 {
                for i in 0..dim {
                    let mut acc = Complex64::default();
                    for (j, kj) in k.iter().enumerate().take(stage + 1) {
                        let a = A[stage][j];
                        if a != 0.0 {
                            acc += kj[i] * a;
                        }
                    }
                    y_stage[i] = y[i] + acc * h_eff;
                }
                let s_stage = s + C[stage] * h_eff;
                eval_scaled(
                    &mut field,
                    seg,
                    s_stage.min(1.0),
                    &y_stage,
                    &mut k[stage + 1],
                )?;
            }
            // Stage 6 used the 5th-order weights: y_stage currently holds y_new.
            y_new.copy_from_slice(&y_stage);

            // Weighted RMS of the embedded error.
            let mut err_sq = 0.0f64;
            for i in 0..dim {
                let mut e = Complex64::default();
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        e += kj[i] * E[j];
                    }
                }
                let e = e * h_eff;
                let sc = tol.abs + tol.rel * y[i].norm().max(y_new[i].norm());
                err_sq += (e.norm() / sc).powi(2);
            }
            let err = (err_sq / dim as f64).sqrt().max(1e-300);

            if err <= 1.0 {
                accepted += 1;
                s += h_eff;
                std::mem::swap(&mut y, &mut y_new);
                // FSAL: stage 7 of the accepted step is stage 1 of the next.
                let (head, tail) = k.split_at_mut(6);
                head[0].copy_from_slice(&tail[0]);
                samples.push(TrajectorySample {
                    z: seg.point(s.min(1.0)),
                    y: y.clone(),
                });
                let fac = SAFETY * err.powf(-PI_ALPHA) * err_prev.powf(PI_BETA);
                h = (h_eff * fac.clamp(SHRINK_LIMIT, GROWTH_LIMIT)).min(1.0);
                err_prev = err;
            } else {
                rejected += 1;
                let fac = SAFETY * err.powf(-PI_ALPHA);
                h = h_eff * fac.clamp(SHRINK_LIMIT, 1.0);
            }
        }
    }

    Ok(Integration {
        y_end: y,
        samples,
        accepted,
        rejected,
    })
}

/// Evaluate the field at a segment parameter and scale by dz/ds.
fn eval_scaled<F>(
    field: &mut F,
    seg: &Segment,
    s: f64,
    y: &[Complex64],
    out: &mut [Complex64],
) -> Result<()>
where
    F: FnMut(Complex64, &[Complex64], &mut [Complex64]) -> Result<()>,
{
    let z = seg.point(s);
    field(z, y, out)?;
    let dz = seg.tangent(s);
    for v in out.iter_mut() {
        *v *= dz;
    }
    Ok(())
}

/// Simple positive loop around `center` based at `base`: straight to the
/// circle's nearest point, one full counterclockwise revolution, straight
/// back. The connector is a bare segment — callers with poles between `base`
/// and `center` must route around them themselves.
///
/// Preconditions: `radius` under half the distance from `center` to `base`
/// and to every point of `others`.
pub fn loop_around(
    center: Complex64,
    base: Complex64,
    radius: f64,
    others: &[Complex64],
) -> Result<ComplexPath> {
    let mut clearance = (base - center).norm();
    for &p in others {
        clearance = clearance.min((p - center).norm());
    }
    if !(radius > 0.0) || radius >= 0.5 * clearance {
        return Err(Error::RadiusTooLarge { radius, clearance });
    }
    let dir = (base - center) / (base - center).norm();
    let entry = center + dir * radius;
    let arg0 = (entry - center).arg();
    let segs = vec![
        Segment::Line {
            start: base,
            end: entry,
        },
        Segment::Arc {
            center,
            radius,
            arg_start: arg0,
            arg_end: arg0 + TAU,
        },
        Segment::Line {
            start: entry,
            end: base,
        },
    ];
    ComplexPath::new(segs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn path_continuity_enforced() {
        let segs = vec![
            Segment::Line {
                start: c(0.0, 0.0),
                end: c(1.0, 0.0),
            },
            Segment::Line {
                start: c(1.1, 0.0),
                end: c(2.0, 0.0),
            },
        ];
        assert!(matches!(
            ComplexPath::new(segs),
            Err(Error::BrokenPath { segment: 1, .. })
        ));
    }

    #[test]
    fn reversal_preserves_endpoints_and_length() {
        let p = loop_around(c(0.0, 0.0), c(-2.0, 0.0), 0.4, &[c(1.0, 0.0)]).unwrap();
        let r = p.reversed();
        assert!((r.start() - p.end()).norm() < 1e-15);
        assert!((r.end() - p.start()).norm() < 1e-15);
        assert!((r.total_length() - p.total_length()).abs() < 1e-12);
    }

    #[test]
    fn loop_around_radius_guard() {
        // Base at distance 2: radius must be < 1.
        assert!(matches!(
            loop_around(c(0.0, 0.0), c(-2.0, 0.0), 1.2, &[]),
            Err(Error::RadiusTooLarge { .. })
        ));
        // An `other` at distance 0.8 shrinks the allowance below 0.4.
        assert!(matches!(
            loop_around(c(0.0, 0.0), c(-2.0, 0.0), 0.5, &[c(0.8, 0.0)]),
            Err(Error::RadiusTooLarge { .. })
        ));
    }

    #[test]
    fn winding_numbers_of_standard_loop() {
        // Hand-checkable geometry: loop around 0 based at −2 with radius 0.4
        // winds once around 0 and zero times around 1.
        let p = loop_around(c(0.0, 0.0), c(-2.0, 0.0), 0.4, &[c(1.0, 0.0)]).unwrap();
        assert!((p.winding_number(c(0.0, 0.0)) - 1.0).abs() < 1e-6);
        assert!(p.winding_number(c(1.0, 0.0)).abs() < 1e-6);
    }

    #[test]
    fn quadrature_of_analytic_function() {
        // dy/dz = 2z from 0 to 1+i: y = z² = 2i at the end.
        let path = ComplexPath::line(c(0.0, 0.0), c(1.0, 1.0)).unwrap();
        let res = integrate_ode(
            |z, _y, out| {
                out[0] = z * 2.0;
                Ok(())
            },
            &path,
            &[c(0.0, 0.0)],
            &ToleranceSpec::default(),
        )
        .unwrap();
        assert!((res.y_end[0] - c(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn cauchy_integral_around_pole() {
        // dy/dz = 1/z once counterclockwise around 0: Δy = 2πi exactly.
        let path = ComplexPath::circle(c(0.0, 0.0), 0.7, 0.3).unwrap();
        let res = integrate_ode(
            |z, _y, out| {
                out[0] = Complex64::new(1.0, 0.0) / z;
                Ok(())
            },
            &path,
            &[c(0.0, 0.0)],
            &ToleranceSpec::default(),
        )
        .unwrap();
        assert!((res.y_end[0] - c(0.0, TAU)).norm() < 1e-10);
    }

    #[test]
    fn matrix_transport_matches_closed_form() {
        // dY/dz = B/z·Y around the unit circle from Y = I gives exp(2πi B).
        let b = CMatrix2::new([[c(0.3, 0.1), c(0.2, -0.4)], [c(-0.1, 0.2), c(0.4, 0.3)]]);
        let path = ComplexPath::circle(c(0.0, 0.0), 1.0, 0.0).unwrap();
        let y0 = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let res = integrate_ode(
            |z, y, out| {
                let inv_z = Complex64::new(1.0, 0.0) / z;
                // out = (B/z)·Y, row-major packing.
                for r in 0..2 {
                    for cc in 0..2 {
                        out[2 * r + cc] = (b.e[r][0] * y[cc] + b.e[r][1] * y[2 + cc]) * inv_z;
                    }
                }
                Ok(())
            },
            &path,
            &y0,
            &ToleranceSpec::default(),
        )
        .unwrap();
        let expect = b.scale(c(0.0, TAU)).expm();
        let got = CMatrix2::new([[res.y_end[0], res.y_end[1]], [res.y_end[2], res.y_end[3]]]);
        assert!((got - expect).norm() < 1e-9);
    }

    #[test]
    fn reversed_loop_inverts_transport() {
        let b = CMatrix2::new([[c(0.2, 0.0), c(0.5, 0.1)], [c(-0.3, 0.2), c(-0.2, 0.0)]]);
        let field = |z: Complex64, y: &[Complex64], out: &mut [Complex64]| {
            let inv_z = Complex64::new(1.0, 0.0) / z;
            for r in 0..2 {
                for cc in 0..2 {
                    out[2 * r + cc] = (b.e[r][0] * y[cc] + b.e[r][1] * y[2 + cc]) * inv_z;
                }
            }
            Ok(())
        };
        let y0 = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let tol = ToleranceSpec::default();
        let path = loop_around(c(0.0, 0.0), c(-2.0, 0.0), 0.5, &[]).unwrap();
        let fwd = integrate_ode(field, &path, &y0, &tol).unwrap();
        let bwd = integrate_ode(field, &path.reversed(), &y0, &tol).unwrap();
        let m_f = CMatrix2::new([[fwd.y_end[0], fwd.y_end[1]], [fwd.y_end[2], fwd.y_end[3]]]);
        let m_b = CMatrix2::new([[bwd.y_end[0], bwd.y_end[1]], [bwd.y_end[2], bwd.y_end[3]]]);
        assert!((m_f * m_b - CMatrix2::identity()).norm() < 1e-9);
    }

    #[test]
    fn singularity_on_path_underflows() {
        // 1/z integrated straight through the origin.
        let path = ComplexPath::line(c(-1.0, 0.0), c(1.0, 0.0)).unwrap();
        let res = integrate_ode(
            |z, _y, out| {
                out[0] = Complex64::new(1.0, 0.0) / z;
                Ok(())
            },
            &path,
            &[c(0.0, 0.0)],
            &ToleranceSpec::default(),
        );
        assert!(matches!(
            res,
            Err(Error::StepUnderflow { .. }) | Err(Error::MaxStepsExceeded { .. })
        ));
    }

    #[test]
    fn tolerance_scaling_improves_accuracy() {
        // Halving rel tolerance by 1e3 should cut the error by roughly that factor.
        let path = ComplexPath::circle(c(0.0, 0.0), 1.0, 0.0).unwrap();
        let run = |rel: f64| {
            let tol = ToleranceSpec {
                rel,
                abs: 1e-16,
                max_steps: 1_000_000,
            };
            let res = integrate_ode(
                |z, y, out| {
                    out[0] = y[0] * 0.5 / z;
                    Ok(())
                },
                &path,
                &[c(1.0, 0.0)],
                &tol,
            )
            .unwrap();
            // y = z^{1/2}: around the circle once, y(end) = e^{iπ} = −1.
            (res.y_end[0] - c(-1.0, 0.0)).norm()
        };
        let coarse = run(1e-6);
        let fine = run(1e-11);
        assert!(fine < coarse * 1e-2, "coarse {coarse:.2e}, fine {fine:.2e}");
        assert!(fine < 1e-9);
    }
}
