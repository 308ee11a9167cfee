//! Asymptotic key rate: minimization of `D(G(ρ) ‖ Z(G(ρ)))` over the states
//! compatible with Alice's source and the observed statistics.

mod frank_wolfe;
mod problem;
pub mod sdp;

use nalgebra::DMatrix;

use crate::channel::ExpectedFrequencies;
use crate::error::{Error, Result};
use crate::measure::Outcome;
use crate::numerics::{herm_eig, perturbed_log, ComplexMatrix, RegisterShape};
use crate::protocol::{apply_gmap, apply_gmap_adjoint, apply_zmap, cell_observable, GMap};
use crate::source::{alice_blocks, signal_gram, Signal, SourceConfig};

use problem::Problem;
use sdp::SdpOptions;

/// Target of a linear constraint `Tr(Γ ρ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relation {
    Equal(f64),
    Interval { lo: f64, hi: f64 },
}

impl Relation {
    pub fn violation(&self, value: f64) -> f64 {
        match *self {
            Relation::Equal(t) => (value - t).abs(),
            Relation::Interval { lo, hi } => (lo - value).max(value - hi).max(0.0),
        }
    }
}

/// `Tr((1_{A_S} ⊗ observable) ρ)` constrained by `relation`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    /// Symmetric 12 × 12 operator on `A ⊗ B`, applied to every shield block.
    pub observable: DMatrix<f64>,
    pub relation: Relation,
}

/// Feasible set: the fixed Alice marginal plus linear statistics constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    /// `ρ_{A_S A}` as one 4 × 4 block per shield slot.
    pub alice_blocks: Vec<DMatrix<f64>>,
    pub constraints: Vec<Constraint>,
}

fn is_qubit_vacuum_diagonal(o: &DMatrix<f64>) -> bool {
    (0..12).all(|i| (0..12).all(|j| ((i % 3 == 2) == (j % 3 == 2)) || o[(i, j)] == 0.0))
}

impl ConstraintSet {
    pub fn new(alice_blocks: Vec<DMatrix<f64>>, constraints: Vec<Constraint>) -> Result<Self> {
        if alice_blocks.is_empty() {
            return Err(Error::Dimension("at least one shield block is required".into()));
        }
        for m in &alice_blocks {
            if m.shape() != (4, 4) {
                return Err(Error::Dimension(format!("Alice block is {:?}, expected 4×4", m.shape())));
            }
            let eig = herm_eig(m)?;
            if eig.min_value() < -1e-12 {
                return Err(Error::NotPsd {
                    min_eigenvalue: eig.min_value(),
                });
            }
        }
        for c in &constraints {
            if c.observable.shape() != (12, 12) {
                return Err(Error::Dimension(format!(
                    "observable `{}` is {:?}, expected 12×12",
                    c.label,
                    c.observable.shape()
                )));
            }
            herm_eig(&c.observable)?;
            if !is_qubit_vacuum_diagonal(&c.observable) {
                return Err(Error::Config(format!(
                    "observable `{}` couples Bob's qubit and vacuum sectors",
                    c.label
                )));
            }
            if let Relation::Interval { lo, hi } = c.relation {
                if !(lo <= hi) {
                    return Err(Error::Config(format!("empty interval [{lo}, {hi}] for `{}`", c.label)));
                }
            }
        }
        Ok(Self {
            alice_blocks,
            constraints,
        })
    }

    /// Equality constraints on all twenty `(x, y)` cells of `F̄`.
    pub fn from_frequencies(src: &SourceConfig, f: &ExpectedFrequencies) -> Result<Self> {
        Self::new(alice_blocks(src), cell_constraints(f.p_z, &f.table)?)
    }

    /// Single-photon restriction: one shield block holding the one-photon
    /// signals, with the statistics conditioned on one photon sent.
    pub fn single_photon(src: &SourceConfig, f: &ExpectedFrequencies) -> Result<Self> {
        let mut table = [[0.0; 5]; 4];
        for x in 0..4 {
            for y in 0..5 {
                table[x][y] = src.signal_probs[x] * f.per_photon[1][x][y];
            }
        }
        Self::new(vec![signal_gram(src, 1)], cell_constraints(f.p_z, &table)?)
    }

    pub fn shield_dim(&self) -> usize {
        self.alice_blocks.len()
    }

    /// Registers `[AS, A, B]` of the optimization variable.
    pub fn shape(&self) -> RegisterShape {
        RegisterShape::new([("AS", self.shield_dim()), ("A", 4), ("B", 3)]).expect("fixed layout")
    }

    /// Largest violation of the marginal or statistics constraints by a full state.
    pub fn residual(&self, rho: &DMatrix<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for (n, m) in self.alice_blocks.iter().enumerate() {
            let blk = rho.view((12 * n, 12 * n), (12, 12));
            let marg = DMatrix::from_fn(4, 4, |a, b| (0..3).map(|j| blk[(3 * a + j, 3 * b + j)]).sum::<f64>());
            worst = worst.max((marg - m).amax());
        }
        for c in &self.constraints {
            worst = worst.max(c.relation.violation(self.expectation(rho, &c.observable)));
        }
        worst
    }

    /// `Tr((1 ⊗ O) ρ)` for a full state.
    pub fn expectation(&self, rho: &DMatrix<f64>, o: &DMatrix<f64>) -> f64 {
        (0..self.shield_dim())
            .map(|n| {
                let blk = rho.view((12 * n, 12 * n), (12, 12));
                blk.iter().zip(o.iter()).map(|(a, b)| a * b).sum::<f64>()
            })
            .sum()
    }
}

fn cell_constraints(p_z: f64, table: &[[f64; 5]; 4]) -> Result<Vec<Constraint>> {
    let mut out = Vec::with_capacity(20);
    for x in Signal::ALL {
        for y in Outcome::ALL {
            out.push(Constraint {
                label: format!("{}_{}", x.label(), y.label()),
                observable: cell_observable(p_z, x, y)?,
                relation: Relation::Equal(table[x.index()][y.index()]),
            });
        }
    }
    Ok(out)
}

/// Block layout of the optimization variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// Per shield slot, separate qubit and vacuum blocks for Bob.
    Split,
    /// One block per shield slot.
    PerSlot,
    /// One block for everything, keeping cross-slot coherences.
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Absolute Frank-Wolfe gap (bits) at which to stop.
    pub gap_tolerance: f64,
    /// Gap at which to stop, relative to the objective's distance above the
    /// threshold (or to the objective when there is none). Either the
    /// Frank-Wolfe gap or the certified gap `f − lower_bound` may meet it.
    pub rel_gap_tolerance: f64,
    /// Spectral smoothing of the logarithms, relative to each block's trace bound.
    pub eps: f64,
    pub subproblem_tolerance: f64,
    /// Tolerance for accepting dependent constraints as consistent.
    pub feasibility_tolerance: f64,
    pub line_search_tolerance: f64,
    pub structure: Structure,
    pub record_log: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 400,
            gap_tolerance: 1e-9,
            rel_gap_tolerance: 1e-3,
            eps: 1e-12,
            subproblem_tolerance: 1e-10,
            feasibility_tolerance: 1e-7,
            line_search_tolerance: 1e-7,
            structure: Structure::Split,
            record_log: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gap_tolerance", self.gap_tolerance),
            ("eps", self.eps),
            ("subproblem_tolerance", self.subproblem_tolerance),
            ("feasibility_tolerance", self.feasibility_tolerance),
            ("line_search_tolerance", self.line_search_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    domain: "(0, inf)",
                });
            }
        }
        if !(self.rel_gap_tolerance >= 0.0) {
            return Err(Error::Domain {
                name: "rel_gap_tolerance",
                value: self.rel_gap_tolerance,
                domain: "[0, inf)",
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    /// Line search found no descent before the gap tolerance was met.
    Stalled,
    MaxIterations,
    Infeasible,
    /// The objective fell below the caller's threshold, so the rate is zero.
    BelowThreshold,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::Stalled => "stalled",
            Status::MaxIterations => "max_iter",
            Status::BelowThreshold => "below_threshold",
            Status::Infeasible => "infeasible",
        }
    }
}

/// One Frank-Wolfe iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub gap: f64,
    /// Best certified lower bound so far.
    pub lower_bound: f64,
    pub step: f64,
    pub subproblem_iterations: usize,
    pub subproblem_optimal: bool,
}

impl IterationRecord {
    pub fn to_line(&self) -> String {
        format!(
            "iter={} objective={:.12e} gap={:.3e} lower_bound={:.12e} step={:.6} sdp_iters={} sdp_optimal={}",
            self.iteration,
            self.objective,
            self.gap,
            self.lower_bound,
            self.step,
            self.subproblem_iterations,
            self.subproblem_optimal
        )
    }
}

/// Outcome of minimizing the relative-entropy objective.
#[derive(Debug, Clone)]
pub struct Minimization {
    pub primal_value: f64,
    /// Certified lower bound on the minimum (smoothing error already removed).
    pub lower_bound: f64,
    pub iterations: usize,
    pub final_gap: f64,
    pub feasibility_residual: f64,
    pub status: Status,
    /// Bound on the smoothing error subtracted from `lower_bound`.
    pub smoothing_correction: f64,
    /// Optimal state over `[AS, A, B]`.
    pub state: DMatrix<f64>,
    pub log: Vec<IterationRecord>,
}

/// Asymptotic key rate and diagnostics (bits per signal).
#[derive(Debug, Clone)]
pub struct KeyRateResult {
    pub rate: f64,
    pub primal_value: f64,
    pub lower_bound: f64,
    /// `f_EC · δ_leak`.
    pub leakage: f64,
    pub iterations: usize,
    pub final_gap: f64,
    pub feasibility_residual: f64,
    pub status: Status,
    pub log: Vec<IterationRecord>,
}

/// Minimizes `f(ρ) = D(G(ρ) ‖ Z(G(ρ)))` over the constraint set.
pub fn minimize_objective(g: &GMap, cs: &ConstraintSet, cfg: &SolverConfig) -> Result<Minimization> {
    minimize_above(g, cs, cfg, f64::NEG_INFINITY)
}

/// As [`minimize_objective`], but stops with [`Status::BelowThreshold`] once
/// the objective at a feasible point shows that `min f < threshold`.
pub fn minimize_above(g: &GMap, cs: &ConstraintSet, cfg: &SolverConfig, threshold: f64) -> Result<Minimization> {
    cfg.validate()?;
    let p = Problem::build(g, cs, cfg.structure, cfg.eps, cfg.feasibility_tolerance)?;
    let out = frank_wolfe::frank_wolfe(&p, cfg, threshold)?;
    let state = p.embed(&out.x);
    Ok(Minimization {
        primal_value: out.primal,
        lower_bound: out.lower_bound,
        iterations: out.iterations,
        final_gap: out.gap,
        feasibility_residual: cs.residual(&state),
        status: out.status,
        smoothing_correction: p.zeta,
        state,
        log: out.log,
    })
}

/// `R_∞ = max(0, min f − f_EC · δ_leak)` using the certified lower bound.
pub fn asymptotic_rate(
    g: &GMap,
    cs: &ConstraintSet,
    dleak: f64,
    f_ec: f64,
    cfg: &SolverConfig,
) -> Result<KeyRateResult> {
    let leakage = f_ec * dleak;
    let m = minimize_above(g, cs, cfg, leakage)?;
    Ok(KeyRateResult {
        rate: (m.lower_bound - leakage).max(0.0),
        primal_value: m.primal_value,
        lower_bound: m.lower_bound,
        leakage,
        iterations: m.iterations,
        final_gap: m.final_gap,
        feasibility_residual: m.feasibility_residual,
        status: m.status,
        log: m.log,
    })
}

/// An interior point of the constraint set, as a full state over `[AS, A, B]`.
pub fn find_feasible(g: &GMap, cs: &ConstraintSet, cfg: &SolverConfig) -> Result<DMatrix<f64>> {
    let p = Problem::build(g, cs, cfg.structure, cfg.eps, cfg.feasibility_tolerance)?;
    let sol = p.sdp.find_feasible(&SdpOptions {
        tolerance: cfg.subproblem_tolerance,
        max_iterations: 100,
    })?;
    Ok(p.embed(&sol.x))
}

/// Result of a linear minimization over the constraint set.
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub state: DMatrix<f64>,
    pub value: f64,
    /// Certified lower bound on the minimum.
    pub lower_bound: f64,
}

/// `min Tr(c σ)` over the constraint set for a symmetric `c` on `[AS, A, B]`.
pub fn linear_sdp_subproblem(
    c: &DMatrix<f64>,
    g: &GMap,
    cs: &ConstraintSet,
    cfg: &SolverConfig,
) -> Result<LinearSolution> {
    let d = 12 * cs.shield_dim();
    if c.shape() != (d, d) {
        return Err(Error::Dimension(format!("cost is {:?}, expected {d}×{d}", c.shape())));
    }
    let p = Problem::build(g, cs, cfg.structure, cfg.eps, cfg.feasibility_tolerance)?;
    let cost = p.restrict(&((c + c.transpose()) * 0.5));
    let n_lp = p.sdp.layout().lp_bounds.len();
    let sol = p.sdp.minimize(
        &cost,
        &vec![0.0; n_lp],
        &SdpOptions {
            tolerance: cfg.subproblem_tolerance,
            max_iterations: 100,
        },
    )?;
    Ok(LinearSolution {
        state: p.embed(&sol.x),
        value: sol.primal_value,
        lower_bound: sol.certified_bound,
    })
}

/// Value and gradient of the smoothed objective on a full state, using the
/// compact block representation.
pub fn objective_and_gradient(
    g: &GMap,
    cs: &ConstraintSet,
    rho: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<(f64, DMatrix<f64>)> {
    let p = Problem::build(g, cs, Structure::Single, cfg.eps, cfg.feasibility_tolerance)?;
    let x = p.restrict(rho);
    // Single structure: the block coordinates are orthonormal, so restriction
    // is a left inverse of embedding on the support.
    let (f, grad) = p.value_and_gradient(&x);
    Ok((f, p.embed(&grad)))
}

/// `∇f(ρ) = G†(log₂ G(ρ) − log₂ Z(G(ρ)))` on the full operators, with both
/// logarithms perturbed by `eps`.
pub fn gradient(rho: &ComplexMatrix, g: &GMap, eps: f64) -> Result<ComplexMatrix> {
    let gr = apply_gmap(g, rho)?;
    let zr = apply_zmap(&gr, &g.output_shape())?;
    let diff = perturbed_log(&gr, eps)? - perturbed_log(&zr, eps)?;
    apply_gmap_adjoint(g, &diff)
}
