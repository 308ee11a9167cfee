//! Frank-Wolfe minimization with exact line search and certified lower bounds.

use nalgebra::DMatrix;

use super::problem::Problem;
use super::sdp::{SdpOptions, SdpStatus};
use super::{IterationRecord, SolverConfig, Status};
use crate::error::Result;

#[derive(Debug, Clone)]
pub(crate) struct FwOutcome {
    pub x: Vec<DMatrix<f64>>,
    pub primal: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: Status,
    pub log: Vec<IterationRecord>,
}

fn dot(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(u, v)| u * v).sum::<f64>())
        .sum()
}

fn combine(x: &[DMatrix<f64>], d: &[DMatrix<f64>], gamma: f64) -> Vec<DMatrix<f64>> {
    x.iter().zip(d).map(|(a, b)| a + b * gamma).collect()
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimizer of a convex function on `[0, 1]`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Runs until convergence, or until the objective (an upper bound on the
/// minimum, up to smoothing) drops below `threshold`.
pub(crate) fn frank_wolfe(p: &Problem, cfg: &SolverConfig, threshold: f64) -> Result<FwOutcome> {
    let opts = SdpOptions {
        tolerance: cfg.subproblem_tolerance,
        max_iterations: 100,
    };
    let n_lp = p.sdp.layout().lp_bounds.len();
    let zero_lp = vec![0.0; n_lp];
    let mut x = p.sdp.find_feasible(&opts)?.x;
    let mut best_lb = f64::NEG_INFINITY;
    let mut log = Vec::new();
    let mut status = Status::MaxIterations;
    let mut gap = f64::INFINITY;
    let mut f = p.value(&x);
    let mut iterations = 0;
    for it in 0..cfg.max_iterations {
        let (fv, grad) = p.value_and_gradient(&x);
        f = fv;
        let sol = p.sdp.minimize(&grad, &zero_lp, &opts)?;
        let gx = dot(&grad, &x);
        let gs = dot(&grad, &sol.x);
        gap = gx - gs;
        let lb = f - gx + sol.certified_bound - p.zeta;
        best_lb = best_lb.max(lb);
        iterations = it + 1;
        // Relative accuracy is wanted in what callers keep, `min f − threshold`.
        let scale = if threshold.is_finite() { (f - threshold).abs() } else { f.abs() };
        let tol = cfg.gap_tolerance + cfg.rel_gap_tolerance * scale;
        let done = gap.abs() <= tol || f - best_lb <= tol;
        if cfg.record_log || done || f + p.zeta < threshold {
            log.push(IterationRecord {
                iteration: it,
                objective: f,
                gap,
                lower_bound: best_lb,
                step: 0.0,
                subproblem_iterations: sol.iterations,
                subproblem_optimal: sol.status == SdpStatus::Optimal,
            });
        }
        if done {
            status = Status::Converged;
            break;
        }
        if f + p.zeta < threshold {
            status = Status::BelowThreshold;
            break;
        }
        if !(sol.primal_residual <= cfg.feasibility_tolerance) || gap < 0.0 {
            // An infeasible direction would leave the feasible set, and a
            // negative gap means the subproblem was not solved.
            status = Status::Stalled;
            break;
        }
        let dir: Vec<DMatrix<f64>> = sol.x.iter().zip(&x).map(|(s, xb)| s - xb).collect();
        let (gamma, fg) = golden_section(|g| p.value(&combine(&x, &dir, g)), cfg.line_search_tolerance);
        let (gamma, fg) = {
            let f1 = p.value(&sol.x);
            if f1 < fg {
                (1.0, f1)
            } else {
                (gamma, fg)
            }
        };
        if fg > f || gamma == 0.0 {
            // No descent along the direction: the iterate is optimal to working precision.
            status = Status::Stalled;
            break;
        }
        if let Some(last) = log.last_mut() {
            last.step = gamma;
        }
        x = combine(&x, &dir, gamma);
    }
    if status == Status::MaxIterations {
        f = p.value(&x);
    }
    Ok(FwOutcome {
        x,
        primal: f,
        lower_bound: best_lb,
        gap,
        iterations,
        status,
        log,
    })
}
