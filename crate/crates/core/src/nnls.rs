//! Non-negative least squares: `min ‖Aw − b‖²` subject to `w ≥ 0`.
//!
//! Lawson–Hanson active-set method. The passive-set subproblem is solved
//! through the normal equations with a Cholesky factorization (plus one step
//! of iterative refinement). Columns are scaled to unit norm internally.
//! Ties are broken towards the smallest column index, both when a variable
//! enters the passive set and when one leaves it.

use std::fmt;

/// Dense row-major `m × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnlsError> {
        if data.len() != rows * cols {
            return Err(NnlsError::Dimension(format!(
                "{rows}×{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(DesignMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, NnlsError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(NnlsError::Dimension(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Aᵀ y`
    pub fn tmul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    /// Tab-separated rows, for debugging dumps.
    pub fn to_tsv(&self, b: &[f64]) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(f64::to_string).collect();
            out.push_str(&cells.join("\t"));
            out.push('\t');
            out.push_str(&b.get(i).map_or(String::new(), f64::to_string));
            out.push('\n');
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub weights: Vec<f64>,
    /// `‖Aw − b‖`
    pub residual_norm: f64,
    /// Outer (variable-entering) iterations performed.
    pub iterations: usize,
    /// Residual norm after each outer iteration, starting from `w = 0`.
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnlsError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("no convergence after {iterations} iterations (best residual {})", best.residual_norm)]
    NoConvergence {
        iterations: usize,
        best: Box<NnlsSolution>,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct NnlsOptions {
    /// Dual-feasibility tolerance, relative to `‖Aᵀb‖∞`.
    pub tol: f64,
    /// Outer iteration cap; `None` means `3n`.
    pub max_iter: Option<usize>,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        NnlsOptions {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

/// Solves with the default iteration cap.
pub fn solve_nnls(a: &DesignMatrix, b: &[f64], tol: f64) -> Result<NnlsSolution, NnlsError> {
    solve_nnls_with(a, b, NnlsOptions { tol, max_iter: None })
}

// Relative pivot below which a candidate column is treated as dependent on
// the passive set.
const PIVOT_EPS: f64 = 1e-10;

pub fn solve_nnls_with(a: &DesignMatrix, b: &[f64], opts: NnlsOptions) -> Result<NnlsSolution, NnlsError> {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return Err(NnlsError::Dimension(format!("empty problem ({m}×{n})")));
    }
    if b.len() != m {
        return Err(NnlsError::Dimension(format!("targets have length {}, expected {m}", b.len())));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(NnlsError::Dimension(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if let Some(k) = a.data.iter().position(|v| !v.is_finite()) {
        return Err(NnlsError::NonFinite(format!("matrix entry ({}, {})", k / n, k % n)));
    }
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(NnlsError::NonFinite(format!("target {i}")));
    }
    let max_iter = opts.max_iter.unwrap_or(3 * n);

    // Column scaling.
    let col_norm: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| a.get(i, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    let scaled: Vec<f64> = (0..m * n)
        .map(|k| {
            let d = col_norm[k % n];
            if d > 0.0 { a.data[k] / d } else { 0.0 }
        })
        .collect();
    let scaled = DesignMatrix { rows: m, cols: n, data: scaled };
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..m).map(|r| scaled.get(r, i) * scaled.get(r, j)).sum())
                .collect()
        })
        .collect();
    let atb = scaled.tmul_vec(b);
    let scale = {
        let s = atb.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if s > 0.0 { s } else { 1.0 }
    };
    let threshold = opts.tol * scale;

    let residual = |x: &[f64]| -> f64 {
        let ax = scaled.mul_vec(x);
        norm(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>())
    };

    let mut x = vec![0.0; n];
    let mut passive: Vec<usize> = Vec::new();
    let mut history = vec![residual(&x)];
    let mut iterations = 0;

    let finish = |x: &[f64], history: Vec<f64>, iterations: usize| -> NnlsSolution {
        let weights: Vec<f64> = x
            .iter()
            .zip(&col_norm)
            .map(|(&v, &d)| if d > 0.0 && v > 0.0 { v / d } else { 0.0 })
            .collect();
        let r: Vec<f64> = a.mul_vec(&weights).iter().zip(b).map(|(p, q)| p - q).collect();
        NnlsSolution {
            residual_norm: norm(&r),
            weights,
            iterations,
            residual_history: history,
        }
    };

    loop {
        let dual: Vec<f64> = (0..n)
            .map(|j| atb[j] - dot(&gram[j], &x))
            .collect();
        let mut candidates: Vec<usize> = (0..n)
            .filter(|j| col_norm[*j] > 0.0 && !passive.contains(j) && dual[*j] > threshold)
            .collect();
        if candidates.is_empty() {
            break;
        }
        if iterations >= max_iter {
            return Err(NnlsError::NoConvergence {
                iterations,
                best: Box::new(finish(&x, history, iterations)),
            });
        }
        // Largest dual first; stable sort keeps the smaller index on ties.
        candidates.sort_by(|&p, &q| dual[q].partial_cmp(&dual[p]).unwrap());

        let mut entered = None;
        for &j in &candidates {
            let mut trial = passive.clone();
            trial.push(j);
            trial.sort_unstable();
            if let Some(z) = solve_passive(&gram, &atb, &trial) {
                let pos = trial.iter().position(|&k| k == j).unwrap();
                if z[pos] > 0.0 {
                    entered = Some((trial, z));
                    break;
                }
            }
        }
        let Some((mut trial, mut z)) = entered else {
            // Every improving column is dependent on the passive set.
            break;
        };
        iterations += 1;

        // Inner loop: step back towards feasibility until z > 0 on the passive set.
        let mut inner = 0;
        while z.iter().any(|&v| v <= 0.0) {
            inner += 1;
            if inner > 3 * n + 3 {
                return Err(NnlsError::NoConvergence {
                    iterations,
                    best: Box::new(finish(&x, history, iterations)),
                });
            }
            let mut alpha = f64::INFINITY;
            let mut leave = usize::MAX;
            for (pos, &k) in trial.iter().enumerate() {
                if z[pos] <= 0.0 {
                    let step = x[k] / (x[k] - z[pos]);
                    if step < alpha || (step == alpha && k < leave) {
                        alpha = step;
                        leave = k;
                    }
                }
            }
            for (pos, &k) in trial.iter().enumerate() {
                x[k] += alpha * (z[pos] - x[k]);
            }
            x[leave] = 0.0;
            trial.retain(|&k| k != leave);
            z = solve_passive(&gram, &atb, &trial).unwrap_or_else(|| vec![0.0; trial.len()]);
        }
        for (pos, &k) in trial.iter().enumerate() {
            x[k] = z[pos];
        }
        for (k, xk) in x.iter_mut().enumerate() {
            if !trial.contains(&k) {
                *xk = 0.0;
            }
        }
        passive = trial;
        history.push(residual(&x));
    }

    Ok(finish(&x, history, iterations))
}

/// Solves `G[P,P] z = c[P]`; `None` when the submatrix is numerically singular.
fn solve_passive(gram: &[Vec<f64>], atb: &[f64], set: &[usize]) -> Option<Vec<f64>> {
    let k = set.len();
    let g: Vec<Vec<f64>> = set.iter().map(|&i| set.iter().map(|&j| gram[i][j]).collect()).collect();
    let rhs: Vec<f64> = set.iter().map(|&i| atb[i]).collect();
    let l = cholesky(&g)?;
    let mut z = cholesky_solve(&l, &rhs);
    let r: Vec<f64> = (0..k).map(|i| rhs[i] - dot(&g[i], &z)).collect();
    let dz = cholesky_solve(&l, &r);
    for (zi, di) in z.iter_mut().zip(dz) {
        *zi += di;
    }
    Some(z)
}

/// Lower-triangular `L` with `L Lᵀ = G`.
fn cholesky(g: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let k = g.len();
    let mut l = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = (0..j).map(|p| l[i][p] * l[j][p]).sum();
            if i == j {
                let pivot = g[i][i] - s;
                if pivot.is_nan() || pivot <= PIVOT_EPS * g[i][i].max(f64::MIN_POSITIVE) {
                    return None;
                }
                l[i][i] = pivot.sqrt();
            } else {
                l[i][j] = (g[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let k = rhs.len();
    let mut y = vec![0.0; k];
    for i in 0..k {
        y[i] = (rhs[i] - (0..i).map(|p| l[i][p] * y[p]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        x[i] = (y[i] - (i + 1..k).map(|p| l[p][i] * x[p]).sum::<f64>()) / l[i][i];
    }
    x
}

/// Largest KKT violation of `w` relative to `scale = ‖Aᵀb‖∞` (or 1).
///
/// Positive weights need a zero gradient; zero weights need a non-positive
/// dual `Aᵀ(b − Aw)`. Negative weights count as infinite violation.
pub fn kkt_violation(a: &DesignMatrix, b: &[f64], w: &[f64]) -> KktReport {
    let r: Vec<f64> = b.iter().zip(a.mul_vec(w)).map(|(bi, ai)| bi - ai).collect();
    let dual = a.tmul_vec(&r);
    let scale = {
        let s = a.tmul_vec(b).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if s > 0.0 { s } else { 1.0 }
    };
    let mut worst: f64 = 0.0;
    for (&wk, &dk) in w.iter().zip(&dual) {
        let v = if wk < 0.0 {
            f64::INFINITY
        } else if wk > 0.0 {
            dk.abs()
        } else {
            dk.max(0.0)
        };
        worst = worst.max(v);
    }
    KktReport { violation: worst, scale }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub violation: f64,
    pub scale: f64,
}

impl KktReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.violation <= tol * self.scale
    }
}

impl fmt::Display for KktReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "kkt violation {:.3e} (scale {:.3e})", self.violation, self.scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(rows: &[&[f64]], b: &[f64]) -> NnlsSolution {
        let a = DesignMatrix::from_rows(rows).unwrap();
        solve_nnls(&a, b, 1e-10).unwrap()
    }

    #[test]
    fn identity_clamps_negative_component() {
        let s = solve(&[&[1.0, 0.0], &[0.0, 1.0]], &[3.0, -2.0]);
        assert!((s.weights[0] - 3.0).abs() < 1e-12);
        assert_eq!(s.weights[1], 0.0);
        assert!((s.residual_norm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_column_mean() {
        let s = solve(&[&[1.0], &[1.0]], &[1.0, 2.0]);
        assert!((s.weights[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn all_negative_targets_give_zero() {
        let s = solve(&[&[1.0, 2.0], &[3.0, 1.0]], &[-1.0, -1.0]);
        assert_eq!(s.weights, vec![0.0, 0.0]);
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn zero_columns_stay_zero() {
        let s = solve(&[&[0.0, 1.0], &[0.0, 1.0]], &[1.0, 1.0]);
        assert_eq!(s.weights[0], 0.0);
        assert!((s.weights[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_columns_do_not_break_factorization() {
        let s = solve(&[&[1.0, 1.0], &[2.0, 2.0], &[0.0, 0.0]], &[1.0, 2.0, 5.0]);
        assert!((s.weights[0] + s.weights[1] - 1.0).abs() < 1e-10);
        assert!((s.residual_norm - 5.0).abs() < 1e-10);
    }

    #[test]
    fn underdetermined_system() {
        let a = DesignMatrix::from_rows(&[[1.0, 2.0, -1.0]]).unwrap();
        let s = solve_nnls(&a, &[4.0], 1e-10).unwrap();
        assert!(s.residual_norm < 1e-10);
        assert!(kkt_violation(&a, &[4.0], &s.weights).holds(1e-8));
    }

    #[test]
    fn input_errors() {
        let a = DesignMatrix::from_rows(&[[1.0, f64::NAN]]).unwrap();
        assert!(matches!(solve_nnls(&a, &[1.0], 1e-10), Err(NnlsError::NonFinite(_))));
        let a = DesignMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(solve_nnls(&a, &[f64::INFINITY], 1e-10), Err(NnlsError::NonFinite(_))));
        assert!(matches!(solve_nnls(&a, &[1.0, 2.0], 1e-10), Err(NnlsError::Dimension(_))));
        assert!(matches!(solve_nnls(&a, &[1.0], 0.0), Err(NnlsError::Dimension(_))));
        assert!(DesignMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let empty = DesignMatrix::new(0, 2, vec![]).unwrap();
        assert!(solve_nnls(&empty, &[], 1e-10).is_err());
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let a = DesignMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let err = solve_nnls_with(&a, &[1.0, 1.0], NnlsOptions { tol: 1e-10, max_iter: Some(1) }).unwrap_err();
        match err {
            NnlsError::NoConvergence { iterations, best } => {
                assert_eq!(iterations, 1);
                assert!(best.weights.iter().all(|&w| w >= 0.0));
                assert!(best.residual_norm < 2f64.sqrt());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tsv_dump_has_one_line_per_row() {
        let a = DesignMatrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert_eq!(a.to_tsv(&[1.0, 2.0]), "1\t0.5\t1\n0\t1\t2\n");
    }
}
