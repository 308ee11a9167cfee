//! Assembly of the key-rate problem as a small block SDP.
//!
//! Every shield block `ρ_n` lives on `supp(ρ_{A,n}) ⊗ B`.  In the default
//! [`Structure::Split`] layout, Bob's qubit and vacuum sectors are further
//! separated: all observables are block diagonal in that split and every Kraus
//! operator annihilates the vacuum, so dropping the qubit-vacuum coherences
//! changes neither the feasible statistics nor the objective.

use nalgebra::DMatrix;

use super::sdp::{BlockSdp, SdpLayout, SdpRow};
use super::{ConstraintSet, Relation, Structure};
use crate::error::Result;
use crate::numerics::herm_eig;
use crate::protocol::GMap;

/// Columns `offset..offset+w` of a block correspond to `embed` (12 × w) inside
/// shield slot `slot`.
#[derive(Debug, Clone)]
pub(crate) struct Piece {
    pub slot: usize,
    pub offset: usize,
    pub embed: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct BlockSpec {
    pub dim: usize,
    pub pieces: Vec<Piece>,
    /// Upper bound on the block trace; also its conditioning scale.
    pub scale: f64,
}

/// One entropy term `S(Z(G)) − S(G)` with `G = op X_b opᵀ`.
#[derive(Debug, Clone)]
pub(crate) struct Term {
    pub block: usize,
    pub op: DMatrix<f64>,
    /// Row indices grouped by key value.
    pub groups: Vec<Vec<usize>>,
    /// Additive smoothing of the spectrum.
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub slots: usize,
    pub blocks: Vec<BlockSpec>,
    pub sdp: BlockSdp,
    pub terms: Vec<Term>,
    /// Upper bound on `|f_ε − f|` over the feasible set.
    pub zeta: f64,
}

const SUPPORT_TOL: f64 = 1e-12;

fn support(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let eig = herm_eig(m).expect("Alice blocks are validated symmetric");
    let top = eig.values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.values.len())
        .filter(|&i| eig.values[i] > SUPPORT_TOL * top)
        .collect();
    let u = DMatrix::from_fn(4, keep.len(), |a, j| eig.vectors[(a, keep[j])]);
    (u, keep.iter().map(|&i| eig.values[i]).collect())
}

/// `U ⊗ [e_j for j in sectors]` as a 12 × (r·|sectors|) matrix.
fn embedding(u: &DMatrix<f64>, sectors: &[usize]) -> DMatrix<f64> {
    let r = u.ncols();
    let w = sectors.len();
    let mut e = DMatrix::zeros(12, r * w);
    for a in 0..4 {
        for k in 0..r {
            for (s, &j) in sectors.iter().enumerate() {
                e[(a * 3 + j, k * w + s)] = u[(a, k)];
            }
        }
    }
    e
}

impl Problem {
    pub fn build(g: &GMap, cs: &ConstraintSet, structure: Structure, eps: f64, tol: f64) -> Result<Self> {
        let slots = cs.alice_blocks.len();
        let supports: Vec<Option<(DMatrix<f64>, Vec<f64>)>> = cs
            .alice_blocks
            .iter()
            .map(|m| (m.trace() > 0.0).then(|| support(m)))
            .collect();

        let mut blocks = Vec::new();
        match structure {
            Structure::Split | Structure::PerSlot => {
                for (n, s) in supports.iter().enumerate() {
                    let Some((u, lam)) = s else { continue };
                    let scale: f64 = lam.iter().sum();
                    let sectors: &[&[usize]] = if structure == Structure::Split {
                        &[&[0, 1], &[2]]
                    } else {
                        &[&[0, 1, 2]]
                    };
                    for sec in sectors {
                        let embed = embedding(u, sec);
                        blocks.push(BlockSpec {
                            dim: embed.ncols(),
                            pieces: vec![Piece {
                                slot: n,
                                offset: 0,
                                embed,
                            }],
                            scale,
                        });
                    }
                }
            }
            Structure::Single => {
                let mut pieces = Vec::new();
                let mut offset = 0;
                for (n, s) in supports.iter().enumerate() {
                    let Some((u, _)) = s else { continue };
                    let embed = embedding(u, &[0, 1, 2]);
                    let w = embed.ncols();
                    pieces.push(Piece {
                        slot: n,
                        offset,
                        embed,
                    });
                    offset += w;
                }
                let scale = cs.alice_blocks.iter().map(|m| m.trace()).sum();
                blocks.push(BlockSpec {
                    dim: offset,
                    pieces,
                    scale,
                });
            }
        }

        // Linear rows.
        let coefficient = |block: &BlockSpec, obs_for_slot: &dyn Fn(usize) -> Option<DMatrix<f64>>| {
            let mut a = DMatrix::zeros(block.dim, block.dim);
            let mut any = false;
            for p in &block.pieces {
                if let Some(o) = obs_for_slot(p.slot) {
                    let local = p.embed.transpose() * o * &p.embed;
                    if local.iter().any(|v| *v != 0.0) {
                        any = true;
                        a.view_mut((p.offset, p.offset), local.shape()).copy_from(&local);
                    }
                }
            }
            any.then_some(a)
        };
        let row_for = |obs_for_slot: &dyn Fn(usize) -> Option<DMatrix<f64>>| -> Vec<(usize, DMatrix<f64>)> {
            blocks
                .iter()
                .enumerate()
                .filter_map(|(b, spec)| coefficient(spec, obs_for_slot).map(|a| (b, a)))
                .collect()
        };

        let mut rows = Vec::new();
        let id3 = DMatrix::<f64>::identity(3, 3);
        for (n, s) in supports.iter().enumerate() {
            let Some((u, lam)) = s else { continue };
            let r = u.ncols();
            for i in 0..r {
                for j in i..r {
                    let ui = u.column(i);
                    let uj = u.column(j);
                    let a = (ui * uj.transpose() + uj * ui.transpose()) * 0.5;
                    let obs = a.kronecker(&id3);
                    let blocks_row = row_for(&|slot| (slot == n).then(|| obs.clone()));
                    rows.push(SdpRow {
                        blocks: blocks_row,
                        lp: vec![],
                        rhs: if i == j { lam[i] } else { 0.0 },
                    });
                }
            }
        }
        let mut lp_bounds = Vec::new();
        for c in &cs.constraints {
            let coeffs = row_for(&|_| Some(c.observable.clone()));
            match c.relation {
                Relation::Equal(v) => rows.push(SdpRow {
                    blocks: coeffs,
                    lp: vec![],
                    rhs: v,
                }),
                Relation::Interval { lo, hi } => {
                    let width = hi - lo;
                    if width <= 0.0 {
                        rows.push(SdpRow {
                            blocks: coeffs,
                            lp: vec![],
                            rhs: lo,
                        });
                        continue;
                    }
                    let l = lp_bounds.len();
                    lp_bounds.extend([width, width]);
                    rows.push(SdpRow {
                        blocks: coeffs.clone(),
                        lp: vec![(l, -1.0)],
                        rhs: lo,
                    });
                    rows.push(SdpRow {
                        blocks: coeffs,
                        lp: vec![(l + 1, 1.0)],
                        rhs: hi,
                    });
                }
            }
        }
        let layout = SdpLayout {
            block_dims: blocks.iter().map(|b| b.dim).collect(),
            trace_bounds: blocks.iter().map(|b| b.scale).collect(),
            lp_bounds,
            block_scales: blocks.iter().map(|b| b.scale).collect(),
        };
        let sdp = BlockSdp::new(layout, rows, tol)?;

        // Entropy terms.
        let kraus = g.block_kraus();
        let mut terms = Vec::new();
        let mut zeta = 0.0;
        let per_eig = 3.0 * eps * (eps.log2().abs() + std::f64::consts::LOG2_E);
        for (b, spec) in blocks.iter().enumerate() {
            for k in &kraus {
                let mut op_rows: Vec<Vec<f64>> = Vec::new();
                let mut keys = Vec::new();
                for p in &spec.pieces {
                    let local = &k.op * &p.embed;
                    for r in 0..local.nrows() {
                        if local.row(r).iter().all(|v| v.abs() < 1e-15) {
                            continue;
                        }
                        let mut full = vec![0.0; spec.dim];
                        for c in 0..local.ncols() {
                            full[p.offset + c] = local[(r, c)];
                        }
                        op_rows.push(full);
                        keys.push(k.keys[r]);
                    }
                }
                if op_rows.is_empty() {
                    continue;
                }
                let op = DMatrix::from_fn(op_rows.len(), spec.dim, |i, j| op_rows[i][j]);
                let groups: Vec<Vec<usize>> = [0u8, 1]
                    .iter()
                    .map(|&key| (0..keys.len()).filter(|&i| keys[i] == key).collect::<Vec<_>>())
                    .filter(|g| !g.is_empty())
                    .collect();
                zeta += spec.scale * 2.0 * op.nrows() as f64 * per_eig;
                terms.push(Term {
                    block: b,
                    op,
                    groups,
                    eps: eps * spec.scale,
                });
            }
        }
        Ok(Self {
            slots,
            blocks,
            sdp,
            terms,
            zeta,
        })
    }

    /// Full real state over `[AS, A, B]`.
    pub fn embed(&self, x: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut rho = DMatrix::zeros(12 * self.slots, 12 * self.slots);
        for (spec, xb) in self.blocks.iter().zip(x) {
            for p in &spec.pieces {
                for q in &spec.pieces {
                    let sub = xb.view((p.offset, q.offset), (p.embed.ncols(), q.embed.ncols()));
                    let part = &p.embed * sub * q.embed.transpose();
                    let mut dst = rho.view_mut((12 * p.slot, 12 * q.slot), (12, 12));
                    dst += part;
                }
            }
        }
        rho
    }

    /// Projects a full operator over `[AS, A, B]` onto the block variables
    /// (the adjoint of [`embed`](Self::embed)).
    pub fn restrict(&self, c: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        self.blocks
            .iter()
            .map(|spec| {
                let mut out = DMatrix::zeros(spec.dim, spec.dim);
                for p in &spec.pieces {
                    for q in &spec.pieces {
                        let sub = c.view((12 * p.slot, 12 * q.slot), (12, 12));
                        let part = p.embed.transpose() * sub * &q.embed;
                        let mut dst = out.view_mut((p.offset, q.offset), part.shape());
                        dst += part;
                    }
                }
                out
            })
            .collect()
    }

    fn term_matrix(&self, t: &Term, x: &[DMatrix<f64>]) -> DMatrix<f64> {
        let g = &t.op * &x[t.block] * t.op.transpose();
        (&g + g.transpose()) * 0.5
    }

    /// Smoothed objective `Σ_t S(Z(G_t)+ε) − S(G_t+ε)` in bits.
    pub fn value(&self, x: &[DMatrix<f64>]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let g = self.term_matrix(t, x);
                let s_full = smoothed_entropy(&g, t.eps);
                let s_pinched: f64 = t
                    .groups
                    .iter()
                    .map(|idx| smoothed_entropy(&g.select_rows(idx).select_columns(idx), t.eps))
                    .sum();
                s_pinched - s_full
            })
            .sum()
    }

    /// Value and gradient with respect to each block variable.
    pub fn value_and_gradient(&self, x: &[DMatrix<f64>]) -> (f64, Vec<DMatrix<f64>>) {
        let mut grad: Vec<DMatrix<f64>> = self.blocks.iter().map(|b| DMatrix::zeros(b.dim, b.dim)).collect();
        let mut f = 0.0;
        for t in &self.terms {
            let g = self.term_matrix(t, x);
            let (s_full, log_full) = smoothed_entropy_and_log(&g, t.eps);
            let mut log_diff = log_full;
            let mut s_pinched = 0.0;
            for idx in &t.groups {
                let (s, l) = smoothed_entropy_and_log(&g.select_rows(idx).select_columns(idx), t.eps);
                s_pinched += s;
                for (a, &i) in idx.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        log_diff[(i, j)] -= l[(a, b)];
                    }
                }
            }
            f += s_pinched - s_full;
            grad[t.block] += t.op.transpose() * log_diff * &t.op;
        }
        for gr in &mut grad {
            *gr = (&*gr + gr.transpose()) * 0.5;
        }
        (f, grad)
    }
}

fn smoothed_entropy(g: &DMatrix<f64>, eps: f64) -> f64 {
    g.symmetric_eigenvalues()
        .iter()
        .map(|&l| {
            let v = l.max(0.0) + eps;
            -v * v.log2()
        })
        .sum()
}

fn smoothed_entropy_and_log(g: &DMatrix<f64>, eps: f64) -> (f64, DMatrix<f64>) {
    let eig = g.clone().symmetric_eigen();
    let mut s = 0.0;
    let mut scaled = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let v = l.max(0.0) + eps;
        let lg = v.log2();
        s -= v * lg;
        scaled.column_mut(j).scale_mut(lg);
    }
    (s, scaled * eig.eigenvectors.transpose())
}
