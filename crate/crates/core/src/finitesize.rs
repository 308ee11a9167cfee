//! Variable-length finite-size key length: acceptance intervals from beta
//! quantiles, the Rényi order and the correction terms.

use nalgebra::DMatrix;

use crate::channel::ExpectedFrequencies;
use crate::error::{check_domain, Error, Result};
use crate::numerics::{beta_quantile, beta_quantile_upper};
use crate::protocol::{sift_statistics, GMap, ProtocolSpec};
use crate::solver::{minimize_above, Constraint, ConstraintSet, Relation, SolverConfig, Status};
use crate::source::{alice_blocks, SourceConfig};

/// Security parameters; `ε_sec = ε_EV + ε_PA + ε_AT`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityParams {
    pub eps_ev: f64,
    pub eps_pa: f64,
    pub eps_at: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        let e = 1e-12 / 3.0;
        Self {
            eps_ev: e,
            eps_pa: e,
            eps_at: e,
        }
    }
}

impl SecurityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps_ev", self.eps_ev), ("eps_pa", self.eps_pa), ("eps_at", self.eps_at)] {
            check_domain(name, v, v > 0.0 && v < 1.0, "(0, 1)")?;
        }
        Ok(())
    }

    pub fn eps_sec(&self) -> f64 {
        self.eps_ev + self.eps_pa + self.eps_at
    }
}

/// Protocol run of `N` signals whose observed statistics equal the expected ones.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteScenario {
    /// Total number of signals `N`.
    pub n_signals: f64,
    /// Probability that a round is a key-generation round.
    pub p_gen: f64,
    /// Dimension entering the `√n_sift` correction.
    pub dim_a: usize,
    pub source: SourceConfig,
    /// Test-round statistics `F^obs`.
    pub observed: ExpectedFrequencies,
    /// When false the acceptance intervals collapse to the observed values.
    pub fluctuations: bool,
}

impl FiniteScenario {
    pub fn new(n_signals: f64, p_gen: f64, source: SourceConfig, observed: ExpectedFrequencies) -> Result<Self> {
        let fs = Self {
            n_signals,
            p_gen,
            dim_a: 4,
            source,
            observed,
            fluctuations: true,
        };
        fs.validate()?;
        Ok(fs)
    }

    pub fn with_dim_a(mut self, dim_a: usize) -> Self {
        self.dim_a = dim_a;
        self
    }

    pub fn without_fluctuations(mut self) -> Self {
        self.fluctuations = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_domain("N", self.n_signals, self.n_signals >= 1.0 && self.n_signals.is_finite(), "[1, inf)")?;
        check_domain("p_gen", self.p_gen, self.p_gen > 0.0 && self.p_gen <= 1.0, "(0, 1]")?;
        if self.dim_a == 0 {
            return Err(Error::Config("dim_a must be positive".into()));
        }
        self.source.validate()
    }

    /// Number of test rounds `(1 − p_Gen) N`.
    pub fn n_test(&self) -> f64 {
        (1.0 - self.p_gen) * self.n_signals
    }
}

/// Deviations `(κ_L, κ_U)` of the Clopper–Pearson interval for an observed
/// frequency `f` over `trials` rounds, at confidence `ε_AT / (2 card Σ)` per side.
pub fn kappa_bounds(f: f64, trials: f64, eps_at: f64, card_sigma: usize) -> Result<(f64, f64)> {
    check_domain("F_k", f, (0.0..=1.0).contains(&f), "[0, 1]")?;
    check_domain("trials", trials, trials > 0.0 && trials.is_finite(), "(0, inf)")?;
    check_domain("eps_at", eps_at, eps_at > 0.0 && eps_at < 1.0, "(0, 1)")?;
    if card_sigma == 0 {
        return Err(Error::Config("card(Σ) must be positive".into()));
    }
    let delta = eps_at / (2.0 * card_sigma as f64);
    let k = trials * f;
    let lower = if k <= 0.0 {
        0.0
    } else {
        beta_quantile(delta, k, trials - k + 1.0)?
    };
    let upper = if k >= trials {
        1.0
    } else {
        beta_quantile_upper(delta, k + 1.0, trials - k)?
    };
    Ok(((f - lower).max(0.0), (upper - f).max(0.0)))
}

/// Index set `Σ`: the twenty test cells plus `sift∧gen` and `⊥`.
pub const CARD_SIGMA: usize = 22;

/// Feasible set `V(F^obs)`: the Alice marginal plus one interval per element of `Σ`.
///
/// Test cells are frequencies over the `N_test` test rounds. The `sift∧gen`
/// and `⊥` events are frequencies over all `N` rounds.
pub fn build_finite_constraints(
    fs: &FiniteScenario,
    sp: &SecurityParams,
    g: &GMap,
    proto: &ProtocolSpec,
) -> Result<ConstraintSet> {
    fs.validate()?;
    sp.validate()?;
    let asym = ConstraintSet::from_frequencies(&fs.source, &fs.observed)?;
    let n_test = fs.n_test();
    if fs.fluctuations && n_test < 1.0 {
        return Err(Error::Config("no test rounds: (1 − p_gen) N < 1".into()));
    }
    let interval = |f: f64, trials: f64| -> Result<Relation> {
        if !fs.fluctuations {
            return Ok(Relation::Equal(f));
        }
        let (kl, ku) = kappa_bounds(f.clamp(0.0, 1.0), trials, sp.eps_at, CARD_SIGMA)?;
        Ok(Relation::Interval {
            lo: f - kl,
            hi: f + ku,
        })
    };
    let mut constraints = Vec::with_capacity(CARD_SIGMA);
    for c in asym.constraints {
        let Relation::Equal(f) = c.relation else {
            unreachable!("asymptotic constraints are equalities")
        };
        constraints.push(Constraint {
            relation: interval(f, n_test)?,
            ..c
        });
    }
    let p_sift = sift_statistics(proto, &fs.observed)?.p_sift;
    let s = g.sift_operator();
    let f_sg = fs.p_gen * p_sift;
    constraints.push(Constraint {
        label: "sift_gen".into(),
        observable: &s * fs.p_gen,
        relation: interval(f_sg, fs.n_signals)?,
    });
    constraints.push(Constraint {
        label: "discard_gen".into(),
        observable: (DMatrix::identity(12, 12) - s) * fs.p_gen,
        relation: interval(fs.p_gen * (1.0 - p_sift), fs.n_signals)?,
    });
    ConstraintSet::new(alice_blocks(&fs.source), constraints)
}

/// Optimal Rényi order `α = 1 + √(log₂(1/ε_PA) / (log₂²(dim_A + 1) · n_sift))`.
pub fn alpha_opt(eps_pa: f64, dim_a: usize, n_sift: f64) -> Result<f64> {
    check_domain("eps_pa", eps_pa, eps_pa > 0.0 && eps_pa < 1.0, "(0, 1)")?;
    check_domain("n_sift", n_sift, n_sift > 0.0 && n_sift.is_finite(), "(0, inf)")?;
    let l = ((dim_a + 1) as f64).log2();
    Ok(1.0 + ((1.0 / eps_pa).log2() / (l * l * n_sift)).sqrt())
}

/// Terms of the finite key length, all in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyLengthTerms {
    /// `n_sift · p_Gen min f / (F_sg + κ_U)`.
    pub entropy: f64,
    /// `f_EC · n_sift · H(key | Bob)`.
    pub leakage: f64,
    /// `√n_sift (α − 1) log₂²(dim_A + 1)`.
    pub renyi: f64,
    /// `log₂(2 / ε_EV)`.
    pub verification: f64,
    /// `α/(α−1) (log₂(1/(2ε_PA)) + 2/α)`.
    pub privacy_amplification: f64,
}

impl KeyLengthTerms {
    pub fn corrections(&self) -> f64 {
        self.renyi + self.verification + self.privacy_amplification
    }

    pub fn unclamped(&self) -> f64 {
        self.entropy - self.leakage - self.corrections()
    }
}

#[derive(Debug, Clone)]
pub struct FiniteKeyResult {
    /// Key length `ℓ` in bits, clamped at zero.
    pub key_length: f64,
    /// `ℓ / N`.
    pub rate: f64,
    pub n_sift: f64,
    pub alpha: f64,
    pub terms: KeyLengthTerms,
    /// Primal value of `p_Gen f` on the inflated set (bits per signal).
    pub primal_value: f64,
    /// Certified lower bound of `p_Gen min f` (bits per signal).
    pub lower_bound: f64,
    pub iterations: usize,
    pub final_gap: f64,
    pub feasibility_residual: f64,
    pub status: Status,
}

/// Finite key length `ℓ` for `N` signals.
pub fn finite_key_length(
    fs: &FiniteScenario,
    sp: &SecurityParams,
    g: &GMap,
    proto: &ProtocolSpec,
    f_ec: f64,
    cfg: &SolverConfig,
) -> Result<FiniteKeyResult> {
    check_domain("f_ec", f_ec, f_ec >= 0.0 && f_ec.is_finite(), "[0, inf)")?;
    let cs = build_finite_constraints(fs, sp, g, proto)?;
    let sift = sift_statistics(proto, &fs.observed)?;
    let f_sg = fs.p_gen * sift.p_sift;
    let n_sift = fs.n_signals * f_sg;

    let ku = if fs.fluctuations {
        kappa_bounds(f_sg, fs.n_signals, sp.eps_at, CARD_SIGMA)?.1
    } else {
        0.0
    };
    let leakage = f_ec * n_sift * sift.cond_entropy()?;
    let (alpha, renyi, pa) = if n_sift > 0.0 {
        let alpha = alpha_opt(sp.eps_pa, fs.dim_a, n_sift)?;
        let l = ((fs.dim_a + 1) as f64).log2();
        let renyi = n_sift.sqrt() * (alpha - 1.0) * l * l;
        let pa = alpha / (alpha - 1.0) * ((1.0 / (2.0 * sp.eps_pa)).log2() + 2.0 / alpha);
        (alpha, renyi, pa)
    } else {
        (f64::INFINITY, 0.0, 0.0)
    };
    let verification = (2.0 / sp.eps_ev).log2();
    // Entropy per unit of `min f` that the key length gains.
    let gain = if f_sg + ku > 0.0 {
        n_sift * fs.p_gen / (f_sg + ku)
    } else {
        0.0
    };
    let threshold = if gain > 0.0 {
        (leakage + renyi + verification + pa) / gain
    } else {
        f64::INFINITY
    };
    let m = minimize_above(g, &cs, cfg, threshold)?;
    let terms = KeyLengthTerms {
        entropy: gain * m.lower_bound.max(0.0),
        leakage,
        renyi,
        verification,
        privacy_amplification: pa,
    };
    let key_length = terms.unclamped().max(0.0);
    Ok(FiniteKeyResult {
        key_length,
        rate: key_length / fs.n_signals,
        n_sift,
        alpha,
        terms,
        primal_value: fs.p_gen * m.primal_value,
        lower_bound: fs.p_gen * m.lower_bound,
        iterations: m.iterations,
        final_gap: m.final_gap,
        feasibility_residual: m.feasibility_residual,
        status: m.status,
    })
}
