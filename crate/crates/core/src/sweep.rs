//! Optimization of the signal intensity and the NPAB preparation angle, and
//! parameter sweeps over channel, device and block-size axes.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::channel::{expected_frequencies, ChannelScenario};
use crate::error::{check_domain, Error, Result};
use crate::finitesize::{finite_key_length, FiniteScenario, SecurityParams};
use crate::measure::Outcome;
use crate::protocol::{build_gmap, delta_leak, GMap, ProtocolKind, ProtocolSpec};
use crate::solver::{asymptotic_rate, ConstraintSet, SolverConfig, Status};
use crate::source::{Signal, SourceConfig};

/// Default search interval for the mean photon number.
pub const MU_BRACKET: (f64, f64) = (1e-4, 2.0);
/// Points of the log-spaced grid that seeds the intensity search.
pub const MU_GRID_POINTS: usize = 9;
/// Relative width at which the intensity search stops.
pub const MU_REL_WIDTH: f64 = 1e-3;
/// Absolute width (radians) at which the angle search stops.
pub const THETA_TOLERANCE: f64 = 1e-4;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of [`optimize_mu`].
#[derive(Debug, Clone)]
pub struct MuOptimum<T> {
    pub mu: f64,
    pub rate: f64,
    /// Every grid rate was zero; `mu` is then the first grid point.
    pub flat: bool,
    /// The grid profile has more than one local maximum.
    pub multimodal: bool,
    pub evaluations: usize,
    /// Payload returned by the evaluation at `mu`.
    pub best: T,
}

/// Maximizes `eval(μ).0` over `bracket` by golden-section search in `log μ`,
/// seeded by a log-spaced grid.
pub fn optimize_mu<T>(
    mut eval: impl FnMut(f64) -> Result<(f64, T)>,
    bracket: (f64, f64),
) -> Result<MuOptimum<T>> {
    let (lo, hi) = bracket;
    check_domain("mu_lo", lo, lo > 0.0 && lo.is_finite(), "(0, inf)")?;
    check_domain("mu_hi", hi, hi > lo && hi.is_finite(), "(mu_lo, inf)")?;
    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / (MU_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..MU_GRID_POINTS).map(|i| llo + step * i as f64).collect();

    let mut evaluations = 0;
    let mut best: Option<(f64, f64, T)> = None;
    let mut consider = |lmu: f64, best: &mut Option<(f64, f64, T)>| -> Result<f64> {
        let mu = lmu.exp();
        let (r, payload) = eval(mu)?;
        evaluations += 1;
        let r = if r.is_nan() { f64::NEG_INFINITY } else { r };
        if best.as_ref().map_or(true, |b| r > b.1) {
            *best = Some((mu, r, payload));
        }
        Ok(r)
    };

    let mut rates = Vec::with_capacity(grid.len());
    for &l in &grid {
        rates.push(consider(l, &mut best)?);
    }
    let peaks = (0..rates.len())
        .filter(|&i| {
            rates[i] > 0.0
                && (i == 0 || rates[i] > rates[i - 1])
                && (i + 1 == rates.len() || rates[i] >= rates[i + 1])
        })
        .count();
    let flat = rates.iter().all(|&r| r <= 0.0);
    if !flat {
        let i = rates
            .iter()
            .enumerate()
            .fold(0, |bi, (j, &r)| if r > rates[bi] { j } else { bi });
        let mut a = grid[i.saturating_sub(1)];
        let mut b = grid[(i + 1).min(grid.len() - 1)];
        let min_width = (1.0 + MU_REL_WIDTH).ln();
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = consider(c, &mut best)?;
        let mut fd = consider(d, &mut best)?;
        while b - a > min_width {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = consider(c, &mut best)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = consider(d, &mut best)?;
            }
        }
    }
    let (mu, rate, payload) = best.expect("grid is nonempty");
    Ok(MuOptimum {
        mu,
        rate: rate.max(0.0),
        flat,
        multimodal: peaks > 1,
        evaluations,
        best: payload,
    })
}

/// Probability that Alice's bit and Bob's measured bit agree, over all
/// signals and detected outcomes.
pub fn bit_match_probability(src: &SourceConfig, ch: &ChannelScenario, proto: &ProtocolSpec) -> Result<f64> {
    let f = expected_frequencies(src, ch, proto)?;
    let f = &f;
    Ok(Signal::ALL
        .iter()
        .flat_map(|&x| {
            Outcome::ALL
                .iter()
                .filter(move |y| y.bit() == Some(x.bit()))
                .map(move |&y| f.get(x, y))
        })
        .sum())
}

/// Z-basis preparation offset in `[0, π/4]` that maximizes the bit-match
/// probability. `ch` should be the error-free channel: misalignment errors
/// are applied on top of the returned angle.
pub fn optimize_theta_npab(src: &SourceConfig, ch: &ChannelScenario, proto: &ProtocolSpec) -> Result<f64> {
    if proto.kind != ProtocolKind::Npab {
        return Err(Error::Config(format!(
            "preparation angle optimization applies to NPAB only, got {}",
            proto.kind
        )));
    }
    let eval = |t: f64| bit_match_probability(&src.clone().with_z_offset(t), ch, proto);
    let (mut a, mut b) = (0.0, std::f64::consts::FRAC_PI_4);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    while b - a > THETA_TOLERANCE {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    LossDb,
    Visibility,
    /// Channel misalignment error (radians).
    Misalignment,
    CutoffK,
    /// Number of signals; implies finite-size evaluation.
    N,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::LossDb, Axis::Visibility, Axis::Misalignment, Axis::CutoffK, Axis::N];

    pub fn name(self) -> &'static str {
        match self {
            Axis::LossDb => "loss_db",
            Axis::Visibility => "visibility",
            Axis::Misalignment => "misalignment",
            Axis::CutoffK => "cutoff_K",
            Axis::N => "N",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Axis::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown axis `{t}` (expected one of loss_db, visibility, misalignment, cutoff_K, N)"
                ))
            })
    }
}

/// Finite-size settings of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSettings {
    pub n_signals: f64,
    pub p_gen: f64,
    pub security: SecurityParams,
    pub dim_a: usize,
}

impl Default for FiniteSettings {
    fn default() -> Self {
        Self {
            n_signals: 1e12,
            p_gen: 0.85,
            security: SecurityParams::default(),
            dim_a: 4,
        }
    }
}

/// Parameters held fixed while one axis is swept.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedParams {
    pub loss_db: f64,
    pub visibility: f64,
    /// Channel misalignment error (radians).
    pub misalignment: f64,
    /// Intensity used when it is not optimized.
    pub mu: f64,
    pub p_z: f64,
    pub f_ec: f64,
    /// Photon cutoff; `None` uses each protocol's default.
    pub cutoff: Option<usize>,
    /// NPAB preparation offset used when it is not optimized.
    pub theta: f64,
    /// `None` evaluates the asymptotic rate.
    pub finite: Option<FiniteSettings>,
}

impl Default for FixedParams {
    fn default() -> Self {
        Self {
            loss_db: 0.0,
            visibility: 1.0,
            misalignment: 0.0,
            mu: 0.1,
            p_z: 0.5,
            f_ec: 1.0,
            cutoff: None,
            theta: 0.0,
            finite: None,
        }
    }
}

/// A sweep of one axis for a list of protocols.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub protocols: Vec<ProtocolKind>,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub fixed: FixedParams,
    pub optimize_mu: bool,
    /// Optimize the NPAB preparation offset (ignored for other protocols).
    pub optimize_theta: bool,
    pub mu_bracket: (f64, f64),
    pub solver: SolverConfig,
}

impl SweepPlan {
    pub fn new(protocols: Vec<ProtocolKind>, axis: Axis, values: Vec<f64>) -> Self {
        Self {
            protocols,
            axis,
            values,
            fixed: FixedParams::default(),
            optimize_mu: true,
            optimize_theta: true,
            mu_bracket: MU_BRACKET,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.protocols.is_empty() {
            return Err(Error::Config("sweep needs at least one protocol".into()));
        }
        if self.values.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep grid values must be finite".into()));
        }
        if self.values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("sweep grid values must be sorted ascending".into()));
        }
        if self.axis == Axis::CutoffK && self.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
            return Err(Error::Config("cutoff_K values must be positive integers".into()));
        }
        let f = &self.fixed;
        ChannelScenario::new(f.loss_db, f.misalignment, f.visibility)?;
        check_domain("mu", f.mu, f.mu >= 0.0 && f.mu.is_finite(), "[0, inf)")?;
        check_domain("p_z", f.p_z, f.p_z > 0.0 && f.p_z < 1.0, "(0, 1)")?;
        check_domain("f_ec", f.f_ec, f.f_ec >= 0.0 && f.f_ec.is_finite(), "[0, inf)")?;
        check_domain("theta", f.theta, f.theta.is_finite(), "finite")?;
        if f.cutoff == Some(0) {
            return Err(Error::Config("cutoff must be positive".into()));
        }
        if let Some(fin) = &f.finite {
            check_domain("N", fin.n_signals, fin.n_signals >= 1.0 && fin.n_signals.is_finite(), "[1, inf)")?;
            check_domain("p_gen", fin.p_gen, fin.p_gen > 0.0 && fin.p_gen < 1.0, "(0, 1)")?;
            fin.security.validate()?;
        }
        if self.optimize_mu {
            let (lo, hi) = self.mu_bracket;
            check_domain("mu_lo", lo, lo > 0.0 && lo.is_finite(), "(0, inf)")?;
            check_domain("mu_hi", hi, hi > lo && hi.is_finite(), "(mu_lo, inf)")?;
        }
        self.solver.validate()
    }

    /// Settings of the cell at `value` for protocol `kind`.
    pub fn point(&self, kind: ProtocolKind, value: f64) -> PointSettings {
        let f = &self.fixed;
        let mut p = PointSettings {
            kind,
            cutoff: f.cutoff.unwrap_or_else(|| kind.default_cutoff()),
            p_z: f.p_z,
            mu: f.mu,
            theta: if kind == ProtocolKind::Npab { f.theta } else { 0.0 },
            loss_db: f.loss_db,
            visibility: f.visibility,
            misalignment: f.misalignment,
            f_ec: f.f_ec,
            finite: f.finite.clone(),
        };
        match self.axis {
            Axis::LossDb => p.loss_db = value,
            Axis::Visibility => p.visibility = value,
            Axis::Misalignment => p.misalignment = value,
            Axis::CutoffK => p.cutoff = value as usize,
            Axis::N => {
                let mut fin = p.finite.unwrap_or_default();
                fin.n_signals = value;
                p.finite = Some(fin);
            }
        }
        p
    }
}

/// Every parameter of a single rate evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSettings {
    pub kind: ProtocolKind,
    pub cutoff: usize,
    pub p_z: f64,
    pub mu: f64,
    /// Z-basis preparation offset (radians).
    pub theta: f64,
    pub loss_db: f64,
    pub visibility: f64,
    pub misalignment: f64,
    pub f_ec: f64,
    pub finite: Option<FiniteSettings>,
}

impl PointSettings {
    pub fn protocol(&self) -> ProtocolSpec {
        let mut p = ProtocolSpec::new(self.kind).with_cutoff(self.cutoff).with_p_z(self.p_z);
        if let Some(fin) = &self.finite {
            p = p.with_p_gen(fin.p_gen);
        }
        p
    }

    pub fn source(&self) -> Result<SourceConfig> {
        Ok(SourceConfig::new(self.mu, self.cutoff, self.p_z)?.with_z_offset(self.theta))
    }

    pub fn channel(&self) -> Result<ChannelScenario> {
        ChannelScenario::new(self.loss_db, self.misalignment, self.visibility)
    }
}

/// Rate at a single parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    /// Secret-key bits per signal.
    pub rate: f64,
    /// Key length `ℓ`, finite-size only.
    pub key_length: Option<f64>,
    /// Certified lower bound on the objective, per signal.
    pub lower_bound: f64,
    pub status: Status,
    pub iterations: usize,
}

/// Evaluates the key rate at `s`, with `g` built for `s.protocol()`.
pub fn evaluate_point(s: &PointSettings, g: &GMap, cfg: &SolverConfig) -> Result<PointResult> {
    let proto = s.protocol();
    let src = s.source()?;
    let f = expected_frequencies(&src, &s.channel()?, &proto)?;
    match &s.finite {
        None => {
            let cs = ConstraintSet::from_frequencies(&src, &f)?;
            let r = asymptotic_rate(g, &cs, delta_leak(&proto, &f)?, s.f_ec, cfg)?;
            Ok(PointResult {
                rate: r.rate,
                key_length: None,
                lower_bound: r.lower_bound,
                status: r.status,
                iterations: r.iterations,
            })
        }
        Some(fin) => {
            let fs = FiniteScenario::new(fin.n_signals, fin.p_gen, src, f)?.with_dim_a(fin.dim_a);
            let r = finite_key_length(&fs, &fin.security, g, &proto, s.f_ec, cfg)?;
            Ok(PointResult {
                rate: r.rate,
                key_length: Some(r.key_length),
                lower_bound: r.lower_bound,
                status: r.status,
                iterations: r.iterations,
            })
        }
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub protocol: ProtocolKind,
    pub axis: Axis,
    pub axis_value: f64,
    pub mu: f64,
    pub theta: f64,
    pub rate: f64,
    pub key_length: Option<f64>,
    pub lower_bound: f64,
    /// Solver status, or `failed` when the cell raised an error.
    pub status: String,
    pub iterations: usize,
    pub runtime_ms: f64,
    /// Intensity optimization found no positive rate on its grid.
    pub flat: bool,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Evaluates every (protocol, value) cell of `plan` in parallel. Rows come
/// back ordered by protocol (as listed) and then by axis value. Per-cell
/// errors are recorded in the row.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    plan.validate()?;
    let cells: Vec<(ProtocolKind, f64)> = plan
        .protocols
        .iter()
        .flat_map(|&k| plan.values.iter().map(move |&v| (k, v)))
        .collect();
    Ok(cells.into_par_iter().map(|(k, v)| run_cell(plan, k, v)).collect())
}

fn run_cell(plan: &SweepPlan, kind: ProtocolKind, value: f64) -> SweepRow {
    let start = Instant::now();
    let point = plan.point(kind, value);
    let outcome = solve_cell(plan, &point);
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok((p, r, flat)) => SweepRow {
            protocol: kind,
            axis: plan.axis,
            axis_value: value,
            mu: p.mu,
            theta: p.theta,
            rate: r.rate,
            key_length: r.key_length,
            lower_bound: r.lower_bound,
            status: r.status.as_str().to_string(),
            iterations: r.iterations,
            runtime_ms,
            flat,
            error: None,
        },
        Err(e) => SweepRow {
            protocol: kind,
            axis: plan.axis,
            axis_value: value,
            mu: point.mu,
            theta: point.theta,
            rate: f64::NAN,
            key_length: None,
            lower_bound: f64::NAN,
            status: "failed".to_string(),
            iterations: 0,
            runtime_ms,
            flat: false,
            error: Some(e.to_string()),
        },
    }
}

fn solve_cell(plan: &SweepPlan, point: &PointSettings) -> Result<(PointSettings, PointResult, bool)> {
    let g = build_gmap(&point.protocol())?;
    let with_angle = |mu: f64| -> Result<PointSettings> {
        let mut p = point.clone();
        p.mu = mu;
        if p.kind == ProtocolKind::Npab && plan.optimize_theta {
            let ideal = ChannelScenario::new(p.loss_db, 0.0, p.visibility)?;
            p.theta = optimize_theta_npab(&p.source()?.with_z_offset(0.0), &ideal, &p.protocol())?;
        }
        Ok(p)
    };
    if plan.optimize_mu {
        let opt = optimize_mu(
            |mu| {
                let p = with_angle(mu)?;
                let r = evaluate_point(&p, &g, &plan.solver)?;
                Ok((r.rate, (p, r)))
            },
            plan.mu_bracket,
        )?;
        let (p, r) = opt.best;
        Ok((p, r, opt.flat))
    } else {
        let p = with_angle(point.mu)?;
        let r = evaluate_point(&p, &g, &plan.solver)?;
        Ok((p, r, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_8;

    #[test]
    fn optimize_mu_recovers_quadratic_peak() {
        let peak = 0.37;
        let opt = optimize_mu(|mu| Ok((1.0 - (mu - peak).powi(2), ())), MU_BRACKET).unwrap();
        assert!((opt.mu - peak).abs() <= 1e-3 * peak, "mu {}", opt.mu);
        assert!(!opt.flat && !opt.multimodal);
    }

    #[test]
    fn optimize_mu_flags_flat_profile() {
        let opt = optimize_mu(|_| Ok((0.0, ())), MU_BRACKET).unwrap();
        assert!(opt.flat);
        assert_eq!(opt.rate, 0.0);
        assert!((opt.mu / MU_BRACKET.0 - 1.0).abs() < 1e-12);
        assert_eq!(opt.evaluations, MU_GRID_POINTS);
    }

    #[test]
    fn optimize_mu_flags_two_peaks() {
        let opt = optimize_mu(
            |mu: f64| {
                let l = mu.log10();
                Ok(((-(l + 3.0).powi(2) * 4.0).exp() + (-(l).powi(2) * 4.0).exp(), ()))
            },
            MU_BRACKET,
        )
        .unwrap();
        assert!(opt.multimodal);
    }

    #[test]
    fn optimize_mu_propagates_errors() {
        let r = optimize_mu(|_| Err::<(f64, ()), _>(Error::Config("boom".into())), MU_BRACKET);
        assert!(r.is_err());
    }

    #[test]
    fn theta_star_single_photon_equal_bases() {
        let src = SourceConfig::new(1e-6, 1, 0.5).unwrap();
        let ch = ChannelScenario::loss_only(0.0).unwrap();
        let proto = ProtocolSpec::new(ProtocolKind::Npab).with_cutoff(1);
        let t = optimize_theta_npab(&src, &ch, &proto).unwrap();
        assert!((t - FRAC_PI_8).abs() < 2e-4, "theta {t}");
    }

    #[test]
    fn theta_star_vanishes_as_z_dominates() {
        let ch = ChannelScenario::loss_only(0.0).unwrap();
        let t = |p_z: f64| {
            let src = SourceConfig::new(1e-6, 1, p_z).unwrap();
            let proto = ProtocolSpec::new(ProtocolKind::Npab).with_cutoff(1).with_p_z(p_z);
            optimize_theta_npab(&src, &ch, &proto).unwrap()
        };
        let (a, b) = (t(0.9), t(0.999));
        assert!(a > b && b < 1e-3, "{a} {b}");
    }

    #[test]
    fn theta_optimization_rejects_other_protocols() {
        let src = SourceConfig::new(0.1, 1, 0.5).unwrap();
        let ch = ChannelScenario::loss_only(0.0).unwrap();
        assert!(optimize_theta_npab(&src, &ch, &ProtocolSpec::new(ProtocolKind::Bb84)).is_err());
    }

    #[test]
    fn plan_rejects_unsorted_or_empty_grids() {
        let mut plan = SweepPlan::new(vec![ProtocolKind::Bb84], Axis::LossDb, vec![]);
        assert!(plan.validate().is_err());
        plan.values = vec![5.0, 0.0];
        assert!(plan.validate().is_err());
        plan.values = vec![0.0, 5.0];
        assert!(plan.validate().is_ok());
        plan.protocols.clear();
        assert!(plan.validate().is_err());
    }

    #[test]
    fn axis_names_round_trip() {
        for a in Axis::ALL {
            assert_eq!(a.name().parse::<Axis>().unwrap(), a);
        }
        assert!("nope".parse::<Axis>().is_err());
    }

    #[test]
    fn sweep_rows_are_ordered_and_failures_recorded() {
        let mut plan = SweepPlan::new(
            vec![ProtocolKind::Sarg04, ProtocolKind::Bb84],
            Axis::CutoffK,
            vec![1.0, 2.0],
        );
        plan.optimize_mu = false;
        plan.fixed.loss_db = 5.0;
        let rows = run_sweep(&plan).unwrap();
        let order: Vec<(ProtocolKind, f64)> = rows.iter().map(|r| (r.protocol, r.axis_value)).collect();
        assert_eq!(
            order,
            vec![
                (ProtocolKind::Sarg04, 1.0),
                (ProtocolKind::Sarg04, 2.0),
                (ProtocolKind::Bb84, 1.0),
                (ProtocolKind::Bb84, 2.0)
            ]
        );
        // BB84 only admits K = 1.
        assert!(!rows[2].failed());
        assert!(rows[3].failed());
        assert_eq!(rows[3].status, "failed");
        assert!(rows[..3].iter().all(|r| r.rate >= 0.0));
    }

    #[test]
    fn n_axis_switches_to_finite_size() {
        let plan = SweepPlan::new(vec![ProtocolKind::Bb84], Axis::N, vec![1e3]);
        let p = plan.point(ProtocolKind::Bb84, 1e3);
        assert_eq!(p.finite.as_ref().unwrap().n_signals, 1e3);
        assert_eq!(p.finite.unwrap().p_gen, 0.85);
    }
}
