//! Column-pivoted Householder least squares over ℂ.
//!
//! Small dense problems only (dozens of rows, a handful of columns): the
//! expansion fits need multi-right-hand-side solves with a condition
//! estimate, nothing more. Columns are scaled to unit max-magnitude before
//! factorization so geometric ladders (t^m spans many decades) do not fake
//! ill-conditioning. The reported condition is ‖R‖_F · max_j ‖R⁻¹e_j‖ of the
//! scaled, pivoted triangle — the diagonal ratio alone underestimates badly
//! when a column concentrates its mass on a few deep-ladder rows.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) struct LeastSquares {
    /// One coefficient vector per right-hand side, in original column order.
    pub solutions: Vec<Vec<Complex64>>,
    /// Euclidean residual norm ‖A·x − b‖ per right-hand side.
    pub residuals: Vec<f64>,
    /// ‖R‖_F · max_j ‖R⁻¹e_j‖ after pivoting and column scaling: a two-sided
    /// estimate of κ₂ within a factor of √n.
    pub condition: f64,
}

/// Minimize ‖A·x − b‖₂ for each right-hand side. `columns` are the columns
/// of A (all of equal length m ≥ n); both inputs are consumed as workspace.
pub(crate) fn solve_least_squares(
    mut columns: Vec<Vec<Complex64>>,
    mut rhs: Vec<Vec<Complex64>>,
) -> Result<LeastSquares> {
    let n = columns.len();
    assert!(n > 0, "at least one basis column");
    let m = columns[0].len();
    assert!(columns.iter().all(|c| c.len() == m), "ragged columns");
    assert!(rhs.iter().all(|b| b.len() == m), "ragged right-hand sides");
    if m < n {
        return Err(Error::InsufficientSamples { needed: n, got: m });
    }

    // Scale columns to unit max-magnitude; remember the inverse scales.
    let mut scales = vec![1.0f64; n];
    for (j, col) in columns.iter_mut().enumerate() {
        let max = col.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        if max > 0.0 {
            let inv = Complex64::new(1.0 / max, 0.0);
            for z in col.iter_mut() {
                *z *= inv;
            }
            scales[j] = 1.0 / max;
        }
    }

    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut betas: Vec<f64> = Vec::with_capacity(n);

    for k in 0..n {
        // Pivot: bring the column with the largest remaining tail forward.
        let (pivot, _) = (k..n)
            .map(|j| {
                let tail: f64 = columns[j][k..].iter().map(|z| z.norm_sqr()).sum();
                (j, tail)
            })
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite norms"))
            .expect("non-empty pivot range");
        columns.swap(k, pivot);
        perm.swap(k, pivot);

        // Householder reflector annihilating column k below the diagonal.
        let tail_norm: f64 = columns[k][k..]
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if tail_norm == 0.0 {
            reflectors.push(Vec::new());
            betas.push(0.0);
            continue;
        }
        let x0 = columns[k][k];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * tail_norm;
        let mut v: Vec<Complex64> = columns[k][k..].to_vec();
        v[0] -= alpha;
        let v_norm_sqr: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let beta = if v_norm_sqr > 0.0 {
            2.0 / v_norm_sqr
        } else {
            0.0
        };

        columns[k][k] = alpha;
        for z in columns[k][k + 1..].iter_mut() {
            *z = Complex64::new(0.0, 0.0);
        }
        for col in columns[k + 1..].iter_mut() {
            apply_reflector(&v, beta, &mut col[k..]);
        }
        for b in rhs.iter_mut() {
            apply_reflector(&v, beta, &mut b[k..]);
        }
        reflectors.push(v);
        betas.push(beta);
    }

    // R[j][l] lives in columns[l][j] for j ≤ l. A zero diagonal means exact
    // rank deficiency; otherwise estimate κ₂ from the triangle.
    if columns
        .iter()
        .enumerate()
        .any(|(j, col)| col[j].norm() == 0.0)
    {
        return Err(Error::IllConditioned {
            cond: f64::INFINITY,
            limit: f64::MAX,
        });
    }
    let r_frobenius = columns
        .iter()
        .enumerate()
        .map(|(l, col)| col[..=l].iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    let mut inv_norm_max = 0.0f64;
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        // Solve R·y = e_j; columns of R⁻¹ bound ‖R⁻¹‖₂ within √n.
        y[j] = Complex64::new(1.0, 0.0) / columns[j][j];
        for i in (0..j).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in (i + 1)..=j {
                acc -= columns[l][i] * y[l];
            }
            y[i] = acc / columns[i][i];
        }
        let norm = y[..=j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        inv_norm_max = inv_norm_max.max(norm);
        y[..=j]
            .iter_mut()
            .for_each(|z| *z = Complex64::new(0.0, 0.0));
    }
    let condition = r_frobenius * inv_norm_max;

    let mut solutions = Vec::with_capacity(rhs.len());
    let mut residuals = Vec::with_capacity(rhs.len());
    for b in &rhs {
        // Back substitution on the pivoted triangle.
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for j in (0..n).rev() {
            let mut acc = b[j];
            for l in (j + 1)..n {
                acc -= columns[l][j] * y[l];
            }
            y[j] = acc / columns[j][j];
        }
        // Undo pivoting and column scaling.
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (j, &orig) in perm.iter().enumerate() {
            x[orig] = y[j] * scales[orig];
        }
        solutions.push(x);
        residuals.push(b[n..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
    }

    Ok(LeastSquares {
        solutions,
        residuals,
        condition,
    })
}

/// y ← (I − β·v·vᴴ)·y on the trailing slice.
fn apply_reflector(v: &[Complex64], beta: f64, y: &mut [Complex64]) {
    if beta == 0.0 {
        return;
    }
    let mut dot = Complex64::new(0.0, 0.0);
    for (vi, yi) in v.iter().zip(y.iter()) {
        dot += vi.conj() * yi;
    }
    let f = dot * beta;
    for (vi, yi) in v.iter().zip(y.iter_mut()) {
        *yi -= vi * f;
    }
}
