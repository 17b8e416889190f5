//! Randomized multistart search for witness pairs.
//!
//! Parametrize `x = a + ib`, `y = c + id` by `p = (a, b, c, d)` in `R^{4M}`
//! and minimize with Levenberg-Marquardt
//!
//! ```text
//! sum_n g_n(p)^2 + 1e3 * max(0, delta - ||W||_F)^2 + (||p||^2 - 1)^2
//! g_n = (phi_n.a)^2 + (phi_n.b)^2 - (phi_n.c)^2 - (phi_n.d)^2
//! W   = aa^T + bb^T - cc^T - dd^T = Re(xx* - yy*)
//! ```
//!
//! so `g_n` is the measurement gap and `||W||_F` the class distance. The
//! pair lives on the joint sphere `||x||^2 + ||y||^2 = 1` rather than on a
//! product of unit spheres: a witness with `||x|| = ||y||` has `tr W = 0`,
//! which a generic kernel element of `Omega` does not satisfy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{conj_class_distance, ComplexSignal};
use crate::error::{Error, Result};
use crate::frames::RealFrame;
use crate::lift::measure_clean;
use crate::linalg::{self, LeastSquares, LmOptions, LmWorkspace};
use crate::rng::{normal, stream_rng, streams};
use crate::witness::WitnessPair;

const PENALTY_WEIGHT: f64 = 1e3;
const ACCEPT_OBJECTIVE: f64 = 1e-12;
/// Accepted pairs must also have `||b(x) - b(y)|| <= ACCEPT_GAP * ||b(x)||`.
const ACCEPT_GAP: f64 = 1e-9;
/// Restarts heading for a nonzero local minimum crawl; give up on them once
/// `STALL_WINDOW` accepted steps in a row gain less than `STALL_REL`.
const STALL_WINDOW: usize = 4;
const STALL_REL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Number of restarts.
    pub budget: usize,
    pub seed: u64,
    /// Levenberg-Marquardt iterations per restart.
    pub max_iter: usize,
    /// Minimum class distance of an accepted pair.
    pub delta: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            budget: 10_000,
            seed: 0,
            max_iter: 100,
            delta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Restarts that count towards the result: all of them on failure, up
    /// to and including the successful one otherwise.
    pub restarts_run: usize,
    pub best_objective: f64,
    pub successful_restart: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub witness: Option<WitnessPair>,
    pub stats: SearchStats,
}

struct GapProblem<'a> {
    columns: Vec<&'a [f64]>,
    m: usize,
    delta: f64,
}

impl GapProblem<'_> {
    /// `(u_i . u_j)` for the four blocks of `p`.
    fn grams(&self, p: &[f64]) -> [[f64; 4]; 4] {
        let m = self.m;
        let mut g = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                let s: f64 = (0..m).map(|t| p[i * m + t] * p[j * m + t]).sum();
                g[i][j] = s;
                g[j][i] = s;
            }
        }
        g
    }
}

const SIGNS: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

impl LeastSquares for GapProblem<'_> {
    fn n_params(&self) -> usize {
        4 * self.m
    }

    fn n_residuals(&self) -> usize {
        self.columns.len() + 2
    }

    fn eval(&self, p: &[f64], r: &mut [f64], jac: Option<&mut [f64]>) {
        let m = self.m;
        let np = 4 * m;
        let n = self.columns.len();
        let mut jac = jac;
        for (row, phi) in self.columns.iter().enumerate() {
            let mut dots = [0.0; 4];
            for (i, d) in dots.iter_mut().enumerate() {
                *d = (0..m).map(|t| phi[t] * p[i * m + t]).sum();
            }
            r[row] = (0..4).map(|i| SIGNS[i] * dots[i] * dots[i]).sum();
            if let Some(j) = jac.as_deref_mut() {
                let jr = &mut j[row * np..(row + 1) * np];
                for i in 0..4 {
                    let f = 2.0 * SIGNS[i] * dots[i];
                    for t in 0..m {
                        jr[i * m + t] = f * phi[t];
                    }
                }
            }
        }

        // ||W||_F^2 = sum_ij s_i s_j (u_i . u_j)^2
        let g = self.grams(p);
        let mut w2 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                w2 += SIGNS[i] * SIGNS[j] * g[i][j] * g[i][j];
            }
        }
        let w = w2.max(0.0).sqrt();
        let weight = PENALTY_WEIGHT.sqrt();
        let active = w < self.delta;
        r[n] = if active { weight * (self.delta - w) } else { 0.0 };
        let norm2: f64 = g[0][0] + g[1][1] + g[2][2] + g[3][3];
        r[n + 1] = norm2 - 1.0;

        if let Some(j) = jac {
            let jr = &mut j[n * np..(n + 1) * np];
            if active && w > 0.0 {
                // d||W||/du_i = 2 s_i W u_i / ||W||, W u_i = sum_j s_j (u_j.u_i) u_j
                for i in 0..4 {
                    for t in 0..m {
                        let wu: f64 = (0..4).map(|k| SIGNS[k] * g[k][i] * p[k * m + t]).sum();
                        jr[i * m + t] = -weight * 2.0 * SIGNS[i] * wu / w;
                    }
                }
            } else {
                jr.fill(0.0);
            }
            let jr = &mut j[(n + 1) * np..(n + 2) * np];
            for (dst, &v) in jr.iter_mut().zip(p) {
                *dst = 2.0 * v;
            }
        }
    }
}

struct RestartResult {
    objective: f64,
    witness: Option<WitnessPair>,
}

fn split(p: &[f64], m: usize) -> (ComplexSignal, ComplexSignal) {
    let x = ComplexSignal::from_parts(&p[..m], &p[m..2 * m]).expect("finite parameters");
    let y = ComplexSignal::from_parts(&p[2 * m..3 * m], &p[3 * m..]).expect("finite parameters");
    (x, y)
}

fn accept(frame: &RealFrame, x: &ComplexSignal, y: &ComplexSignal, delta: f64) -> bool {
    let (Ok(bx), Ok(by)) = (measure_clean(frame, x), measure_clean(frame, y)) else {
        return false;
    };
    let gap: Vec<f64> = bx.values.iter().zip(&by.values).map(|(a, b)| a - b).collect();
    let d = conj_class_distance(x, y).unwrap_or(0.0);
    d >= delta && linalg::vec_norm(&gap) <= ACCEPT_GAP * bx.norm()
}

fn run_restart(
    frame: &RealFrame,
    problem: &GapProblem<'_>,
    options: &SearchOptions,
    index: usize,
    ws: &mut LmWorkspace,
) -> RestartResult {
    let m = problem.m;
    let mut rng = stream_rng(options.seed, streams::FALSIFY + index as u64);
    let mut p: Vec<f64> = (0..4 * m).map(|_| normal(&mut rng)).collect();
    let norm = linalg::vec_norm(&p);
    // a zero draw has probability zero; fall back to a fixed direction
    if norm > 0.0 {
        p.iter_mut().for_each(|v| *v /= norm);
    } else {
        p[0] = 1.0;
    }
    let opts = LmOptions {
        max_iter: options.max_iter,
        cost_tol: 1e-30,
        stall_window: STALL_WINDOW,
        stall_rel: STALL_REL,
    };
    let report = linalg::levenberg_marquardt(problem, &mut p, ws, &opts);
    let objective = report.cost;
    if !(objective <= ACCEPT_OBJECTIVE) || p.iter().any(|v| !v.is_finite()) {
        return RestartResult {
            objective,
            witness: None,
        };
    }
    let (x, y) = split(&p, m);
    let witness = accept(frame, &x, &y, options.delta).then(|| {
        let target = crate::algebra::lift_difference(&x, &y);
        WitnessPair::new(x, y, target)
    });
    RestartResult { objective, witness }
}

/// Multistart search for `(x, y)` with equal measurements and class
/// distance at least `delta`.
///
/// Restart `i` draws its start from stream `FALSIFY + i` of `seed`. Restarts
/// run in parallel batches, and the lowest-index success wins, so the result
/// equals that of a sequential loop. Failure to find a pair is not evidence
/// of retrievability.
pub fn falsify_search(frame: &RealFrame, options: &SearchOptions) -> Result<SearchOutcome> {
    if options.budget == 0 {
        return Err(Error::InvalidInput("search budget must be >= 1".into()));
    }
    if !(options.delta > 0.0 && options.delta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "search delta must be positive, got {}",
            options.delta
        )));
    }
    let problem = GapProblem {
        columns: frame.columns().collect(),
        m: frame.m(),
        delta: options.delta,
    };
    let batch = 256 * rayon::current_num_threads().max(1);
    let mut best = f64::INFINITY;
    let mut start = 0;
    while start < options.budget {
        let end = (start + batch).min(options.budget);
        let results: Vec<RestartResult> = (start..end)
            .into_par_iter()
            .map_init(LmWorkspace::default, |ws, i| {
                run_restart(frame, &problem, options, i, ws)
            })
            .collect();
        for (offset, res) in results.into_iter().enumerate() {
            best = best.min(res.objective);
            if let Some(w) = res.witness {
                let index = start + offset;
                log::debug!("falsify_search: witness at restart {index}");
                return Ok(SearchOutcome {
                    witness: Some(w),
                    stats: SearchStats {
                        restarts_run: index + 1,
                        best_objective: best,
                        successful_restart: Some(index),
                    },
                });
            }
        }
        start = end;
    }
    Ok(SearchOutcome {
        witness: None,
        stats: SearchStats {
            restarts_run: options.budget,
            best_objective: best,
            successful_restart: None,
        },
    })
}
