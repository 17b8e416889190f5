//! Dense numerical helpers shared by the lift, certification and
//! reconstruction code. Everything here is small and dense: matrices are at
//! most a few hundred wide.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and each eigenvector signed so that its first entry
/// above `1e-12` in magnitude is positive.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    /// Column `k` belongs to `values[k]`.
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(matrix: &DMatrix<f64>) -> SortedEigen {
    let n = matrix.nrows();
    debug_assert_eq!(n, matrix.ncols());
    if n == 0 {
        return SortedEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        if let Some(lead) = col.iter().copied().find(|v| v.abs() > 1e-12) {
            if lead < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(k, &col);
    }
    SortedEigen { values, vectors }
}

/// Singular values (descending) and a full `cols x cols` set of right
/// singular vectors, also for wide matrices. Wide inputs are padded with zero
/// rows so the decomposition returns the whole nullspace.
pub fn svd_right(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, rows).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .total_cmp(&svd.singular_values[i])
            .then(i.cmp(&j))
    });
    let sigmas = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(cols, order.len());
    for (k, &i) in order.iter().enumerate() {
        v.set_column(k, &v_t.row(i).transpose());
    }
    (sigmas, v)
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values strictly above `rel_tol * sigma_max`.
pub fn rank_from_singular_values(sigmas: &[f64], rel_tol: f64) -> usize {
    let smax = sigmas.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sigmas.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Moore-Penrose pseudoinverse with relative singular value cutoff.
pub fn pseudo_inverse(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if a.is_empty() {
        return DMatrix::zeros(cols, rows);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let u = svd.u.as_ref().unwrap();
    let v_t = svd.v_t.as_ref().unwrap();
    let mut out = DMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * smax && s > 0.0 {
            out += (v_t.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    out
}

/// Numeric rank of a set of complex column vectors by modified Gram-Schmidt,
/// counting a column as new when its residual exceeds `rel_tol` times the
/// largest column norm. Stops early once `target` independent columns are
/// found.
pub fn complex_column_rank<'a, I>(columns: I, m: usize, rel_tol: f64, target: usize) -> usize
where
    I: IntoIterator<Item = &'a [Complex64]>,
{
    let cols: Vec<&[Complex64]> = columns.into_iter().collect();
    let scale = cols
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    let mut work = vec![Complex64::new(0.0, 0.0); m];
    for col in cols {
        work.copy_from_slice(col);
        // Two passes of MGS keep the residual honest in floating point.
        for _ in 0..2 {
            for q in &basis {
                let proj: Complex64 = q.iter().zip(&work).map(|(qi, wi)| qi.conj() * wi).sum();
                for (wi, qi) in work.iter_mut().zip(q) {
                    *wi -= proj * qi;
                }
            }
        }
        let norm = work.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > rel_tol * scale {
            basis.push(work.iter().map(|z| z / norm).collect());
            if basis.len() >= target {
                break;
            }
        }
    }
    basis.len()
}

pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

pub fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// In-place Cholesky of a dense row-major `n x n` SPD matrix into its lower
/// factor. Returns false if a pivot is not positive.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// A nonlinear least-squares problem `min ||r(p)||^2` with a dense Jacobian.
pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    /// Writes `r(p)` and, when requested, the row-major Jacobian
    /// (`n_residuals x n_params`).
    fn eval(&self, p: &[f64], r: &mut [f64], jac: Option<&mut [f64]>);
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop as soon as `||r||^2` falls to this level.
    pub cost_tol: f64,
    /// Stop after this many consecutive iterations that were rejected or
    /// improved the cost by less than `stall_rel` relative.
    pub stall_window: usize,
    pub stall_rel: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            cost_tol: 1e-28,
            stall_window: 6,
            stall_rel: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmReport {
    pub cost: f64,
    pub iterations: usize,
}

/// Scratch buffers for [`levenberg_marquardt`], reusable across restarts.
#[derive(Debug, Default)]
pub struct LmWorkspace {
    r: Vec<f64>,
    r_new: Vec<f64>,
    jac: Vec<f64>,
    normal: Vec<f64>,
    rhs: Vec<f64>,
    step: Vec<f64>,
    p_new: Vec<f64>,
}

impl LmWorkspace {
    fn resize(&mut self, n_res: usize, n_par: usize) {
        let k = n_res.min(n_par);
        self.r.resize(n_res, 0.0);
        self.r_new.resize(n_res, 0.0);
        self.jac.resize(n_res * n_par, 0.0);
        self.normal.resize(k * k, 0.0);
        self.rhs.resize(k, 0.0);
        self.step.resize(n_par, 0.0);
        self.p_new.resize(n_par, 0.0);
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Levenberg-Marquardt with identity damping. The damped system is solved in
/// whichever of the residual or parameter space is smaller, which gives the
/// same step either way.
pub fn levenberg_marquardt<P: LeastSquares + ?Sized>(
    problem: &P,
    p: &mut [f64],
    ws: &mut LmWorkspace,
    opts: &LmOptions,
) -> LmReport {
    let n_res = problem.n_residuals();
    let n_par = problem.n_params();
    debug_assert_eq!(p.len(), n_par);
    ws.resize(n_res, n_par);
    let wide = n_res <= n_par;
    let k = n_res.min(n_par);

    problem.eval(p, &mut ws.r, Some(&mut ws.jac));
    let mut cost = sq(&ws.r);
    let mut mu = {
        let mut dmax: f64 = 0.0;
        for i in 0..n_res {
            dmax = dmax.max(sq(&ws.jac[i * n_par..(i + 1) * n_par]));
        }
        1e-3 * dmax.max(1e-12)
    };
    let mut stall = 0;
    let mut iterations = 0;

    while iterations < opts.max_iter && cost > opts.cost_tol {
        iterations += 1;
        let jac = &ws.jac;
        if wide {
            for i in 0..n_res {
                for j in 0..=i {
                    let ri = &jac[i * n_par..(i + 1) * n_par];
                    let rj = &jac[j * n_par..(j + 1) * n_par];
                    let s: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                    ws.normal[i * k + j] = s;
                    ws.normal[j * k + i] = s;
                }
                ws.normal[i * k + i] += mu;
                ws.rhs[i] = ws.r[i];
            }
        } else {
            for a in 0..n_par {
                for b in 0..=a {
                    let mut s = 0.0;
                    for i in 0..n_res {
                        s += jac[i * n_par + a] * jac[i * n_par + b];
                    }
                    ws.normal[a * k + b] = s;
                    ws.normal[b * k + a] = s;
                }
                ws.normal[a * k + a] += mu;
                let mut g = 0.0;
                for i in 0..n_res {
                    g += jac[i * n_par + a] * ws.r[i];
                }
                ws.rhs[a] = g;
            }
        }
        if !cholesky_in_place(&mut ws.normal, k) {
            mu *= 10.0;
            if mu > 1e20 {
                break;
            }
            continue;
        }
        cholesky_solve(&ws.normal, k, &mut ws.rhs);
        if wide {
            for a in 0..n_par {
                let mut s = 0.0;
                for i in 0..n_res {
                    s += ws.jac[i * n_par + a] * ws.rhs[i];
                }
                ws.step[a] = -s;
            }
        } else {
            for a in 0..n_par {
                ws.step[a] = -ws.rhs[a];
            }
        }
        for a in 0..n_par {
            ws.p_new[a] = p[a] + ws.step[a];
        }
        problem.eval(&ws.p_new, &mut ws.r_new, None);
        let cost_new = sq(&ws.r_new);
        if cost_new < cost {
            p.copy_from_slice(&ws.p_new);
            problem.eval(p, &mut ws.r, Some(&mut ws.jac));
            if cost - cost_new < opts.stall_rel * cost {
                stall += 1;
            } else {
                stall = 0;
            }
            cost = sq(&ws.r);
            mu = (mu / 3.0).max(1e-300);
            if stall >= opts.stall_window {
                break;
            }
        } else {
            mu *= 4.0;
            stall += 1;
            if mu > 1e20 || stall >= opts.stall_window {
                break;
            }
        }
    }
    LmReport { cost, iterations }
}
