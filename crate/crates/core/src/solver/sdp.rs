//! Dense primal-dual interior-point solver for small block-diagonal real SDPs.
//!
//! Primal: `min Σ_b ⟨C_b, X_b⟩ + cᵀx` subject to `Σ_b ⟨A_ib, X_b⟩ + a_iᵀx = b_i`,
//! `X_b ⪰ 0`, `x ≥ 0`.  Search directions use the HKM scaling with a Mehrotra
//! predictor-corrector.  Every solve also returns a dual value that is a valid
//! lower bound on the true optimum even when the dual iterate is slightly
//! infeasible, using known trace bounds on each block.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// One linear equality row.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpRow {
    /// `(block, A_ib)` for blocks where the coefficient is nonzero.
    pub blocks: Vec<(usize, DMatrix<f64>)>,
    /// `(index, a_il)` for nonnegative scalar variables.
    pub lp: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Variable layout and a priori bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpLayout {
    pub block_dims: Vec<usize>,
    /// Upper bound on `Tr X_b` for every feasible point.
    pub trace_bounds: Vec<f64>,
    /// Upper bound on each scalar variable for every feasible point.
    pub lp_bounds: Vec<f64>,
    /// Positive rescaling `X_b = s_b X̃_b` applied internally for conditioning.
    pub block_scales: Vec<f64>,
}

impl SdpLayout {
    /// Single PSD block with unit scale.
    pub fn single(dim: usize, trace_bound: f64) -> Self {
        Self {
            block_dims: vec![dim],
            trace_bounds: vec![trace_bound],
            lp_bounds: Vec::new(),
            block_scales: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 80,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// Primal feasible interior point found (feasibility mode).
    Feasible,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<DMatrix<f64>>,
    pub x_lp: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    /// Rigorous lower bound on the optimum.
    pub certified_bound: f64,
    /// `‖b − A(X)‖ / (1 + ‖b‖)` over the normalized rows.
    pub primal_residual: f64,
    pub iterations: usize,
    pub status: SdpStatus,
}

/// Preprocessed problem: scaled, normalized, independent rows.
#[derive(Debug, Clone)]
pub struct BlockSdp {
    layout: SdpLayout,
    rows: Vec<SdpRow>,
    /// Per block: `(row, position in row.blocks)`.
    active: Vec<Vec<(usize, usize)>>,
    dropped: usize,
    b_norm: f64,
    /// Residual accepted as feasible when the iteration stalls above `tolerance`.
    consistency_tol: f64,
    lp_scales: Vec<f64>,
}

/// Iterations without merit improvement before giving up.
const STALL_LIMIT: usize = 8;

/// Weight of the duality gap relative to the residuals when ranking iterates.
const GAP_WEIGHT: f64 = 1e-2;

fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl BlockSdp {
    /// Scales blocks, normalizes rows and removes linearly dependent rows.
    /// Dependent rows whose right-hand side is inconsistent make the problem
    /// infeasible.
    pub fn new(layout: SdpLayout, rows: Vec<SdpRow>, consistency_tol: f64) -> Result<Self> {
        let nb = layout.block_dims.len();
        if layout.trace_bounds.len() != nb || layout.block_scales.len() != nb {
            return Err(Error::Dimension("SDP layout vectors disagree in length".into()));
        }
        for row in &rows {
            for (b, a) in &row.blocks {
                let d = *layout.block_dims.get(*b).ok_or_else(|| {
                    Error::Dimension(format!("row references missing block {b}"))
                })?;
                if a.nrows() != d || a.ncols() != d {
                    return Err(Error::Dimension(format!(
                        "coefficient for block {b} is {}×{}, expected {d}×{d}",
                        a.nrows(),
                        a.ncols()
                    )));
                }
            }
            if row.lp.iter().any(|(l, _)| *l >= layout.lp_bounds.len()) {
                return Err(Error::Dimension("row references a missing scalar variable".into()));
            }
        }
        // Scalar variables are rescaled to unit bounds.
        let lp_scales: Vec<f64> = layout
            .lp_bounds
            .iter()
            .map(|&u| if u > 0.0 && u.is_finite() { u } else { 1.0 })
            .collect();
        // Scale and normalize.
        let mut scaled: Vec<SdpRow> = rows
            .into_iter()
            .map(|r| SdpRow {
                blocks: r
                    .blocks
                    .into_iter()
                    .map(|(b, a)| (b, sym(&a) * layout.block_scales[b]))
                    .collect(),
                lp: r.lp.into_iter().map(|(l, v)| (l, v * lp_scales[l])).collect(),
                rhs: r.rhs,
            })
            .collect();
        for r in &mut scaled {
            let n = row_dot(r, r).sqrt();
            if n > 0.0 {
                r.blocks.iter_mut().for_each(|(_, a)| *a /= n);
                r.lp.iter_mut().for_each(|(_, v)| *v /= n);
                r.rhs /= n;
            }
        }
        // Modified Gram-Schmidt, carrying the right-hand side along.
        let mut basis: Vec<(SdpRow, f64)> = Vec::new();
        let mut kept = Vec::new();
        let mut dropped = 0;
        for r in scaled {
            let mut res = r.clone();
            let mut rb = r.rhs;
            for (q, qb) in &basis {
                let c = row_dot(&res, q);
                if c != 0.0 {
                    row_axpy(&mut res, -c, q);
                    rb -= c * qb;
                }
            }
            let n = row_dot(&res, &res).sqrt();
            if n < 1e-9 {
                if rb.abs() > consistency_tol {
                    return Err(Error::Infeasible { residual: rb.abs() });
                }
                dropped += 1;
                continue;
            }
            res.blocks.iter_mut().for_each(|(_, a)| *a /= n);
            res.lp.iter_mut().for_each(|(_, v)| *v /= n);
            basis.push((res, rb / n));
            kept.push(r);
        }
        let mut active = vec![Vec::new(); nb];
        for (i, r) in kept.iter().enumerate() {
            for (p, (b, _)) in r.blocks.iter().enumerate() {
                active[*b].push((i, p));
            }
        }
        let b_norm = kept.iter().map(|r| r.rhs * r.rhs).sum::<f64>().sqrt();
        Ok(Self {
            layout,
            rows: kept,
            active,
            dropped,
            b_norm,
            consistency_tol,
            lp_scales,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped
    }

    pub fn layout(&self) -> &SdpLayout {
        &self.layout
    }

    /// Minimizes `Σ ⟨C_b, X_b⟩ + c_lpᵀ x`.
    pub fn minimize(&self, c: &[DMatrix<f64>], c_lp: &[f64], opts: &SdpOptions) -> Result<SdpSolution> {
        self.check_cost(c, c_lp)?;
        let cs: Vec<DMatrix<f64>> = c
            .iter()
            .zip(&self.layout.block_scales)
            .map(|(m, s)| sym(m) * *s)
            .collect();
        let c_lp: Vec<f64> = c_lp.iter().zip(&self.lp_scales).map(|(v, s)| v * s).collect();
        self.run(&cs, &c_lp, false, opts)
    }

    /// Interior point satisfying the constraints.
    pub fn find_feasible(&self, opts: &SdpOptions) -> Result<SdpSolution> {
        let cs: Vec<DMatrix<f64>> = self
            .layout
            .block_dims
            .iter()
            .map(|&d| DMatrix::zeros(d, d))
            .collect();
        let c_lp = vec![0.0; self.layout.lp_bounds.len()];
        let sol = self.run(&cs, &c_lp, true, opts)?;
        if sol.status != SdpStatus::Feasible && !(sol.primal_residual <= self.consistency_tol) {
            return Err(Error::Infeasible {
                residual: sol.primal_residual,
            });
        }
        Ok(sol)
    }

    fn check_cost(&self, c: &[DMatrix<f64>], c_lp: &[f64]) -> Result<()> {
        if c.len() != self.layout.block_dims.len() || c_lp.len() != self.layout.lp_bounds.len() {
            return Err(Error::Dimension("cost does not match the SDP layout".into()));
        }
        for (m, &d) in c.iter().zip(&self.layout.block_dims) {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::Dimension(format!(
                    "cost block is {}×{}, expected {d}×{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(())
    }

    fn apply_a(&self, x: &[DMatrix<f64>], x_lp: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| {
                r.blocks.iter().map(|(b, a)| frob(a, &x[*b])).sum::<f64>()
                    + r.lp.iter().map(|(l, v)| v * x_lp[*l]).sum::<f64>()
            }),
        )
    }

    fn apply_at(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        let mut blocks: Vec<DMatrix<f64>> = self
            .layout
            .block_dims
            .iter()
            .map(|&d| DMatrix::zeros(d, d))
            .collect();
        let mut lp = vec![0.0; self.layout.lp_bounds.len()];
        for (r, &yi) in self.rows.iter().zip(y.iter()) {
            for (b, a) in &r.blocks {
                blocks[*b].zip_apply(a, |d, v| *d += yi * v);
            }
            for (l, v) in &r.lp {
                lp[*l] += yi * v;
            }
        }
        (blocks, lp)
    }

    fn run(&self, c: &[DMatrix<f64>], c_lp: &[f64], feasibility: bool, opts: &SdpOptions) -> Result<SdpSolution> {
        let m = self.rows.len();
        let nb = self.layout.block_dims.len();
        let nl = self.layout.lp_bounds.len();
        let n_total = (self.layout.block_dims.iter().sum::<usize>() + nl) as f64;
        let b = DVector::from_iterator(m, self.rows.iter().map(|r| r.rhs));
        let c_norm = 1.0
            + (c.iter().map(|m| m.norm_squared()).sum::<f64>() + c_lp.iter().map(|v| v * v).sum::<f64>())
                .sqrt();

        let mut x: Vec<DMatrix<f64>> = self.layout.block_dims.iter().map(|&d| DMatrix::identity(d, d)).collect();
        let mut z: Vec<DMatrix<f64>> = c
            .iter()
            .map(|cb| DMatrix::identity(cb.nrows(), cb.ncols()) * (1.0 + cb.norm()))
            .collect();
        let mut x_lp = vec![1.0; nl];
        let mut z_lp: Vec<f64> = c_lp.iter().map(|v| 1.0 + v.abs()).collect();
        let mut y = DVector::zeros(m);

        let mut status = SdpStatus::MaxIterations;
        let mut iterations = 0;
        let mut relp = f64::INFINITY;
        // Best iterate by merit, restored when progress stops short of the tolerance.
        let mut best = (x.clone(), x_lp.clone(), y.clone(), f64::INFINITY);
        let mut stall = 0;
        for it in 0..opts.max_iterations {
            iterations = it;
            let rp = &b - self.apply_a(&x, &x_lp);
            let (aty, aty_lp) = self.apply_at(&y);
            let rd: Vec<DMatrix<f64>> = (0..nb).map(|k| &c[k] - &aty[k] - &z[k]).collect();
            let rd_lp: Vec<f64> = (0..nl).map(|l| c_lp[l] - aty_lp[l] - z_lp[l]).collect();
            let xz: f64 = (0..nb).map(|k| frob(&x[k], &z[k])).sum::<f64>()
                + x_lp.iter().zip(&z_lp).map(|(a, b)| a * b).sum::<f64>();
            let mu = xz / n_total;
            let pobj: f64 = (0..nb).map(|k| frob(&c[k], &x[k])).sum::<f64>()
                + c_lp.iter().zip(&x_lp).map(|(a, b)| a * b).sum::<f64>();
            let dobj = b.dot(&y);
            relp = rp.norm() / (1.0 + self.b_norm);
            let reld = (rd.iter().map(|m| m.norm_squared()).sum::<f64>()
                + rd_lp.iter().map(|v| v * v).sum::<f64>())
            .sqrt()
                / c_norm;
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            // Primal feasibility dominates: a slightly suboptimal point is
            // harmless to callers, an infeasible one is not.
            let merit = if feasibility {
                relp
            } else {
                relp.max(reld).max(GAP_WEIGHT * gap)
            };
            if merit < best.3 {
                best = (x.clone(), x_lp.clone(), y.clone(), merit);
                stall = 0;
            } else {
                stall += 1;
            }
            if feasibility && relp < opts.tolerance {
                status = SdpStatus::Feasible;
                break;
            }
            if !feasibility && relp < opts.tolerance && reld < opts.tolerance && gap < opts.tolerance {
                status = SdpStatus::Optimal;
                break;
            }
            if stall >= STALL_LIMIT || mu < f64::EPSILON * f64::EPSILON {
                break;
            }

            let Some(zinv) = z.iter().map(spd_inverse).collect::<Option<Vec<_>>>() else {
                break;
            };
            let schur = self.schur(&x, &zinv, &x_lp, &z_lp);
            let chol = match cholesky_regularized(schur.clone()) {
                Some(ch) => ch,
                None => break,
            };
            // X Rd Z⁻¹ is shared by predictor and corrector.
            let x_rd_zinv: Vec<DMatrix<f64>> = (0..nb).map(|k| &x[k] * &rd[k] * &zinv[k]).collect();

            let direction = |rc_zinv: &[DMatrix<f64>], rc_lp: &[f64]| {
                let t: Vec<DMatrix<f64>> = (0..nb).map(|k| &rc_zinv[k] - &x_rd_zinv[k]).collect();
                let t_lp: Vec<f64> = (0..nl).map(|l| rc_lp[l] - x_lp[l] * rd_lp[l] / z_lp[l]).collect();
                let rhs = &rp - self.apply_a(&t, &t_lp);
                let mut dy = chol.solve(&rhs);
                // Iterative refinement against the unregularized Schur complement.
                for _ in 0..2 {
                    let r = &rhs - &schur * &dy;
                    dy += chol.solve(&r);
                }
                let (ady, ady_lp) = self.apply_at(&dy);
                let dz: Vec<DMatrix<f64>> = (0..nb).map(|k| &rd[k] - &ady[k]).collect();
                let dz_lp: Vec<f64> = (0..nl).map(|l| rd_lp[l] - ady_lp[l]).collect();
                let dx: Vec<DMatrix<f64>> = (0..nb)
                    .map(|k| sym(&(&rc_zinv[k] - &x[k] * &dz[k] * &zinv[k])))
                    .collect();
                let dx_lp: Vec<f64> = (0..nl).map(|l| rc_lp[l] - x_lp[l] * dz_lp[l] / z_lp[l]).collect();
                (dx, dx_lp, dy, dz, dz_lp)
            };

            // Predictor.
            let neg_x: Vec<DMatrix<f64>> = x.iter().map(|m| -m).collect();
            let neg_xl: Vec<f64> = x_lp.iter().map(|v| -v).collect();
            let (dxa, dxa_lp, _, dza, dza_lp) = direction(&neg_x, &neg_xl);
            let ap = max_step(&x, &dxa, &x_lp, &dxa_lp).min(1.0);
            let ad = max_step(&z, &dza, &z_lp, &dza_lp).min(1.0);
            let mu_aff = ((0..nb)
                .map(|k| frob(&(&x[k] + &dxa[k] * ap), &(&z[k] + &dza[k] * ad)))
                .sum::<f64>()
                + (0..nl)
                    .map(|l| (x_lp[l] + ap * dxa_lp[l]) * (z_lp[l] + ad * dza_lp[l]))
                    .sum::<f64>())
                / n_total;
            let sigma = if feasibility {
                0.5
            } else {
                (mu_aff / mu).clamp(0.0, 1.0).powi(3)
            };

            // Corrector.
            let rc_zinv: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| &zinv[k] * (sigma * mu) - &x[k] - &dxa[k] * &dza[k] * &zinv[k])
                .collect();
            let rc_lp: Vec<f64> = (0..nl)
                .map(|l| (sigma * mu - x_lp[l] * z_lp[l] - dxa_lp[l] * dza_lp[l]) / z_lp[l])
                .collect();
            let (dx, dx_lp, dy, dz, dz_lp) = direction(&rc_zinv, &rc_lp);
            let tau = 0.98;
            let ap = (tau * max_step(&x, &dx, &x_lp, &dx_lp)).min(1.0);
            let ad = (tau * max_step(&z, &dz, &z_lp, &dz_lp)).min(1.0);
            for k in 0..nb {
                x[k] += &dx[k] * ap;
                z[k] += &dz[k] * ad;
            }
            for l in 0..nl {
                x_lp[l] += ap * dx_lp[l];
                z_lp[l] += ad * dz_lp[l];
            }
            y += dy * ad;
            iterations = it + 1;
        }
        if status == SdpStatus::MaxIterations {
            (x, x_lp, y, _) = best;
            relp = (&b - self.apply_a(&x, &x_lp)).norm() / (1.0 + self.b_norm);
            if feasibility && relp < opts.tolerance {
                status = SdpStatus::Feasible;
            }
        }

        // Certified bound from the final multipliers.
        let (aty, aty_lp) = self.apply_at(&y);
        let mut bound = b.dot(&y);
        for k in 0..nb {
            let zk = sym(&(&c[k] - &aty[k]));
            let lmin = if zk.nrows() == 0 {
                0.0
            } else {
                zk.symmetric_eigenvalues().min()
            };
            bound += lmin.min(0.0) * self.layout.trace_bounds[k] / self.layout.block_scales[k];
        }
        for l in 0..nl {
            bound += (c_lp[l] - aty_lp[l]).min(0.0) * self.layout.lp_bounds[l] / self.lp_scales[l];
        }
        let primal_value = (0..nb).map(|k| frob(&c[k], &x[k])).sum::<f64>()
            + c_lp.iter().zip(&x_lp).map(|(a, b)| a * b).sum::<f64>();
        let x_out = x
            .into_iter()
            .zip(&self.layout.block_scales)
            .map(|(m, s)| m * *s)
            .collect();
        let x_lp = x_lp.iter().zip(&self.lp_scales).map(|(v, s)| v * s).collect();
        Ok(SdpSolution {
            x: x_out,
            x_lp,
            primal_value,
            dual_value: b.dot(&y),
            certified_bound: bound,
            primal_residual: relp,
            iterations,
            status,
        })
    }

    /// `M_ik = Σ_b ⟨A_kb, X_b A_ib Z_b⁻¹⟩ + Σ_l a_il a_kl x_l / z_l`.
    fn schur(&self, x: &[DMatrix<f64>], zinv: &[DMatrix<f64>], x_lp: &[f64], z_lp: &[f64]) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut schur = DMatrix::zeros(m, m);
        for (k, act) in self.active.iter().enumerate() {
            let g: Vec<DMatrix<f64>> = act
                .iter()
                .map(|&(i, p)| &x[k] * &self.rows[i].blocks[p].1 * &zinv[k])
                .collect();
            for (a, &(i, _)) in act.iter().enumerate() {
                for &(j, q) in &act[a..] {
                    let v = frob(&self.rows[j].blocks[q].1, &g[a]);
                    schur[(i, j)] += v;
                    if i != j {
                        schur[(j, i)] += v;
                    }
                }
            }
        }
        if !x_lp.is_empty() {
            let w: Vec<f64> = x_lp.iter().zip(z_lp).map(|(a, b)| a / b).collect();
            let lp_rows: Vec<usize> = (0..m).filter(|&i| !self.rows[i].lp.is_empty()).collect();
            for (a, &i) in lp_rows.iter().enumerate() {
                for &j in &lp_rows[a..] {
                    let mut v = 0.0;
                    for (li, ci) in &self.rows[i].lp {
                        for (lj, cj) in &self.rows[j].lp {
                            if li == lj {
                                v += ci * cj * w[*li];
                            }
                        }
                    }
                    schur[(i, j)] += v;
                    if i != j {
                        schur[(j, i)] += v;
                    }
                }
            }
        }
        schur
    }
}

fn row_dot(a: &SdpRow, b: &SdpRow) -> f64 {
    let mut s = 0.0;
    for (ba, ma) in &a.blocks {
        for (bb, mb) in &b.blocks {
            if ba == bb {
                s += frob(ma, mb);
            }
        }
    }
    for (la, va) in &a.lp {
        for (lb, vb) in &b.lp {
            if la == lb {
                s += va * vb;
            }
        }
    }
    s
}

fn row_axpy(dst: &mut SdpRow, alpha: f64, src: &SdpRow) {
    for (b, m) in &src.blocks {
        match dst.blocks.iter_mut().find(|(bd, _)| bd == b) {
            Some((_, md)) => md.zip_apply(m, |d, v| *d += alpha * v),
            None => dst.blocks.push((*b, m * alpha)),
        }
    }
    for (l, v) in &src.lp {
        match dst.lp.iter_mut().find(|(ld, _)| ld == l) {
            Some((_, vd)) => *vd += alpha * v,
            None => dst.lp.push((*l, alpha * v)),
        }
    }
}

fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(m.clone()).map(|c| c.inverse())
}

fn cholesky_regularized(mut m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = m.diagonal().amax().max(1e-300);
    for k in 0..6 {
        if let Some(c) = Cholesky::new(m.clone()) {
            return Some(c);
        }
        let shift = scale * 1e-14 * 100f64.powi(k);
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
    }
    None
}

/// Largest `α` keeping `X + αΔX ⪰ 0` and `x + αΔx ≥ 0`.
fn max_step(x: &[DMatrix<f64>], dx: &[DMatrix<f64>], x_lp: &[f64], dx_lp: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xk, dk) in x.iter().zip(dx) {
        if xk.nrows() == 0 {
            continue;
        }
        let Some(ch) = Cholesky::new(xk.clone()) else {
            return 0.0;
        };
        let l = ch.l();
        let Some(w) = l.solve_lower_triangular(dk) else {
            return 0.0;
        };
        let Some(w) = l.solve_lower_triangular(&w.transpose()) else {
            return 0.0;
        };
        let lmin = sym(&w).symmetric_eigenvalues().min();
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    for (v, d) in x_lp.iter().zip(dx_lp) {
        if *d < 0.0 {
            alpha = alpha.min(-v / d);
        }
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trace_row(d: usize) -> SdpRow {
        SdpRow {
            blocks: vec![(0, DMatrix::identity(d, d))],
            lp: vec![],
            rhs: 1.0,
        }
    }

    #[test]
    fn eigenvalue_extremum() {
        let sdp = BlockSdp::new(SdpLayout::single(2, 1.0), vec![trace_row(2)], 1e-9).unwrap();
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let sol = sdp.minimize(&[c], &[], &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_abs_diff_eq!(sol.primal_value, -1.0, epsilon = 1e-8);
        assert!(sol.certified_bound <= -1.0 + 1e-9);
        assert!(sol.certified_bound >= -1.0 - 1e-8);
        assert_abs_diff_eq!(sol.x[0][(1, 1)], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn zero_cost_gives_zero() {
        let sdp = BlockSdp::new(SdpLayout::single(3, 1.0), vec![trace_row(3)], 1e-9).unwrap();
        let sol = sdp.minimize(&[DMatrix::zeros(3, 3)], &[], &SdpOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.primal_value, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut p = DMatrix::zeros(2, 2);
        p[(0, 0)] = 1.0;
        let rows = vec![
            SdpRow { blocks: vec![(0, p.clone())], lp: vec![], rhs: 0.0 },
            SdpRow { blocks: vec![(0, p)], lp: vec![], rhs: 1.0 },
        ];
        assert!(matches!(
            BlockSdp::new(SdpLayout::single(2, 1.0), rows, 1e-9),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn interval_with_slacks() {
        // min −X_00 s.t. Tr X = 1, 0.2 ≤ X_00 ≤ 0.7
        let mut p = DMatrix::zeros(2, 2);
        p[(0, 0)] = 1.0;
        let rows = vec![
            trace_row(2),
            SdpRow { blocks: vec![(0, p.clone())], lp: vec![(0, -1.0)], rhs: 0.2 },
            SdpRow { blocks: vec![(0, p.clone())], lp: vec![(1, 1.0)], rhs: 0.7 },
        ];
        let layout = SdpLayout {
            block_dims: vec![2],
            trace_bounds: vec![1.0],
            lp_bounds: vec![0.5, 0.5],
            block_scales: vec![1.0],
        };
        let sdp = BlockSdp::new(layout, rows, 1e-9).unwrap();
        let sol = sdp.minimize(&[-p], &[0.0, 0.0], &SdpOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.primal_value, -0.7, epsilon = 1e-8);
        assert!(sol.certified_bound <= -0.7 + 1e-9);
        let feas = sdp.find_feasible(&SdpOptions::default()).unwrap();
        let x00 = feas.x[0][(0, 0)];
        assert!(x00 > 0.2 && x00 < 0.7);
    }
}
