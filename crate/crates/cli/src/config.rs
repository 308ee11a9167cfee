//! Parsing of the flat `key = value` configuration with `[section]` headers.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use ini::{Ini, ParseOption};
use nodecoy::{
    Axis, FiniteSettings, FixedParams, ProtocolKind, SecurityParams, SolverConfig, Structure, SweepPlan,
};

/// Error in the configuration text, naming the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Parsed<T> = Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Parsed<T> {
    Err(ConfigError(msg.into()))
}

/// A recognized key, its default and documentation.
#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub section: &'static str,
    pub name: &'static str,
    /// `None` when the key has no default (required or derived).
    pub default: Option<&'static str>,
    pub doc: &'static str,
}

impl KeySpec {
    pub fn qualified(&self) -> String {
        format!("{}.{}", self.section, self.name)
    }
}

const fn key(section: &'static str, name: &'static str, default: Option<&'static str>, doc: &'static str) -> KeySpec {
    KeySpec {
        section,
        name,
        default,
        doc,
    }
}

/// Every key the configuration accepts.
pub const KEYS: &[KeySpec] = &[
    key("run", "mode", Some("asymptotic"), "`asymptotic` or `finite`"),
    key("run", "protocols", Some("BB84,NPAB,SARG04"), "comma-separated list of BB84, NPAB, SARG04"),
    key("run", "f_ec", Some("default"), "error-correction efficiency >= 0, or `default` (1 asymptotic, 1.2 finite)"),
    key("run", "max_failed_cells", Some("0"), "failed cells tolerated before exit code 3"),
    key("sweep", "axis", Some("loss_db"), "loss_db, visibility, misalignment, cutoff_K or N"),
    key("sweep", "values", None, "list `a,b,c` or inclusive range `start:stop:step`; defaults to the fixed value of the axis"),
    key("sweep", "optimize_mu", Some("true"), "optimize the mean photon number per cell"),
    key("sweep", "optimize_theta", Some("true"), "optimize the NPAB preparation offset per cell"),
    key("sweep", "mu_lo", Some("1e-4"), "lower end of the intensity search, > 0"),
    key("sweep", "mu_hi", Some("2"), "upper end of the intensity search, > mu_lo"),
    key("channel", "loss_db", Some("0"), "channel loss in dB, >= 0"),
    key("channel", "visibility", Some("1"), "visibility in [0, 1]"),
    key("channel", "misalignment", Some("0"), "misalignment error in radians"),
    key("source", "mu", Some("0.1"), "mean photon number when not optimized, >= 0"),
    key("source", "p_z", Some("0.5"), "Z-basis probability in (0, 1)"),
    key("source", "cutoff", Some("default"), "photon cutoff K >= 1, or `default` (BB84: 1, NPAB and SARG04: 3)"),
    key("source", "theta", Some("0"), "NPAB preparation offset in radians when not optimized"),
    key("finite", "n", None, "number of signals N >= 1; required in finite mode unless the axis is N"),
    key("finite", "p_gen", Some("0.85"), "generation-round probability in (0, 1)"),
    key("finite", "eps_ev", Some("3.3333333333333335e-13"), "error-verification failure probability in (0, 1)"),
    key("finite", "eps_pa", Some("3.3333333333333335e-13"), "privacy-amplification failure probability in (0, 1)"),
    key("finite", "eps_at", Some("3.3333333333333335e-13"), "acceptance-test failure probability in (0, 1)"),
    key("finite", "dim_a", Some("4"), "dimension in the sqrt(n) correction, >= 1"),
    key("solver", "max_iterations", Some("400"), "Frank-Wolfe iteration cap, >= 1"),
    key("solver", "gap_tolerance", Some("1e-9"), "absolute stopping gap, > 0"),
    key("solver", "rel_gap_tolerance", Some("1e-3"), "relative stopping gap, >= 0"),
    key("solver", "eps", Some("1e-12"), "logarithm smoothing, > 0"),
    key("solver", "subproblem_tolerance", Some("1e-10"), "interior-point tolerance, > 0"),
    key("solver", "feasibility_tolerance", Some("1e-7"), "constraint consistency tolerance, > 0"),
    key("solver", "line_search_tolerance", Some("1e-7"), "line-search width, > 0"),
    key("solver", "structure", Some("split"), "split, per_slot or single"),
    key("output", "path", None, "CSV path; the --out flag takes precedence"),
    key("output", "timing", Some("true"), "fill the runtime_ms column; false leaves it empty so reruns are byte-identical"),
];

/// Alternative spellings accepted for some keys.
const ALIASES: &[(&str, &str)] = &[
    ("protocol", "protocols"),
    ("K", "cutoff"),
    ("N", "n"),
    ("p_Z", "p_z"),
    ("p_Gen", "p_gen"),
    ("f_EC", "f_ec"),
];

/// Evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Asymptotic,
    Finite,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Asymptotic => "asymptotic",
            Mode::Finite => "finite",
        }
    }
}

/// A validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub plan: SweepPlan,
    pub output: Option<PathBuf>,
    pub timing: bool,
    pub max_failed_cells: usize,
    /// Every key with the value in effect, defaults included.
    pub resolved: BTreeMap<String, String>,
}

impl RunConfig {
    /// Photon cutoff in effect for each protocol.
    pub fn cutoffs(&self) -> Vec<(ProtocolKind, usize)> {
        self.plan
            .protocols
            .iter()
            .map(|&k| (k, self.plan.fixed.cutoff.unwrap_or_else(|| k.default_cutoff())))
            .collect()
    }
}

fn lookup(section: Option<&str>, name: &str) -> Parsed<&'static KeySpec> {
    let canonical = ALIASES.iter().find(|(a, _)| *a == name).map_or(name, |(_, c)| *c);
    let found: Vec<&KeySpec> = KEYS
        .iter()
        .filter(|k| k.name == canonical && section.map_or(true, |s| s == k.section))
        .collect();
    match (found.as_slice(), section) {
        ([k], _) => Ok(k),
        ([], Some(s)) if !KEYS.iter().any(|k| k.section == s) => err(format!("unknown section `[{s}]`")),
        ([], Some(s)) => err(format!("unknown key `{name}` in section `[{s}]`")),
        ([], None) => err(format!("unknown key `{name}`")),
        _ => err(format!("key `{name}` is ambiguous; place it in a section")),
    }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Parsed<RunConfig> {
    let opt = ParseOption {
        enabled_quote: true,
        enabled_escape: false,
        ..ParseOption::default()
    };
    let ini = Ini::load_from_str_opt(text, opt).map_err(|e| ConfigError(format!("syntax error: {e}")))?;
    let mut given: BTreeMap<String, String> = BTreeMap::new();
    for (section, props) in ini.iter() {
        for (name, value) in props.iter() {
            let spec = lookup(section, name.trim())?;
            let q = spec.qualified();
            if given.insert(q.clone(), value.trim().to_string()).is_some() {
                return err(format!("key `{q}` is given more than once"));
            }
        }
    }
    Resolver { given }.build()
}

struct Resolver {
    given: BTreeMap<String, String>,
}

impl Resolver {
    fn raw(&self, q: &str) -> Option<String> {
        let spec = KEYS.iter().find(|k| k.qualified() == q).expect("known key");
        self.given
            .get(q)
            .cloned()
            .or_else(|| spec.default.map(str::to_string))
    }

    fn f64_in(&self, q: &str, ok: impl Fn(f64) -> bool, range: &str) -> Parsed<f64> {
        let s = self.raw(q).expect("key has a default");
        parse_f64(q, &s, ok, range)
    }

    fn bool(&self, q: &str) -> Parsed<bool> {
        let s = self.raw(q).expect("key has a default");
        match s.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => err(format!("{q} = `{s}` is not a boolean (valid: true, false)")),
        }
    }

    fn usize_min(&self, q: &str, min: usize) -> Parsed<usize> {
        let s = self.raw(q).expect("key has a default");
        match s.parse::<usize>() {
            Ok(v) if v >= min => Ok(v),
            _ => err(format!("{q} = `{s}` is out of range (valid: integer >= {min})")),
        }
    }

    fn build(self) -> Parsed<RunConfig> {
        let mode = match self.raw("run.mode").unwrap().to_ascii_lowercase().as_str() {
            "asymptotic" => Mode::Asymptotic,
            "finite" => Mode::Finite,
            other => return err(format!("run.mode = `{other}` is invalid (valid: asymptotic, finite)")),
        };
        let mut protocols = Vec::new();
        for item in self.raw("run.protocols").unwrap().split(',') {
            let k: ProtocolKind = item
                .parse()
                .map_err(|_| ConfigError(format!("run.protocols: unknown protocol `{}` (valid: BB84, NPAB, SARG04)", item.trim())))?;
            if protocols.contains(&k) {
                return err(format!("run.protocols lists {k} twice"));
            }
            protocols.push(k);
        }
        let max_failed_cells = self.usize_min("run.max_failed_cells", 0)?;

        let axis: Axis = self
            .raw("sweep.axis")
            .unwrap()
            .parse()
            .map_err(|_| ConfigError(format!(
                "sweep.axis = `{}` is invalid (valid: loss_db, visibility, misalignment, cutoff_K, N)",
                self.raw("sweep.axis").unwrap()
            )))?;
        let optimize_mu = self.bool("sweep.optimize_mu")?;
        let optimize_theta = self.bool("sweep.optimize_theta")?;
        let mu_lo = self.f64_in("sweep.mu_lo", |v| v > 0.0, "(0, inf)")?;
        let mu_hi = self.f64_in("sweep.mu_hi", |v| v > mu_lo, "(mu_lo, inf)")?;

        let loss_db = self.f64_in("channel.loss_db", |v| v >= 0.0, "[0, inf)")?;
        let visibility = self.f64_in("channel.visibility", |v| (0.0..=1.0).contains(&v), "[0, 1]")?;
        let misalignment = self.f64_in("channel.misalignment", |_| true, "finite")?;

        let f_ec = match self.raw("run.f_ec").unwrap().as_str() {
            "default" => match mode {
                Mode::Asymptotic => 1.0,
                Mode::Finite => 1.2,
            },
            _ => self.f64_in("run.f_ec", |v| v >= 0.0, "[0, inf) or `default`")?,
        };
        let mu = self.f64_in("source.mu", |v| v >= 0.0, "[0, inf)")?;
        let p_z = self.f64_in("source.p_z", |v| v > 0.0 && v < 1.0, "(0, 1)")?;
        let theta = self.f64_in("source.theta", |_| true, "finite")?;
        let cutoff = match self.raw("source.cutoff").unwrap().as_str() {
            "default" => None,
            s => match s.parse::<usize>() {
                Ok(k) if k >= 1 => Some(k),
                _ => return err(format!("source.cutoff = `{s}` is out of range (valid: integer >= 1 or `default`)")),
            },
        };
        if cutoff.is_some_and(|k| k != 1) && protocols.contains(&ProtocolKind::Bb84) {
            return err("source.cutoff: BB84 requires K = 1; use `default` or run BB84 separately");
        }

        let p_gen = self.f64_in("finite.p_gen", |v| v > 0.0 && v < 1.0, "(0, 1)")?;
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        let security = SecurityParams {
            eps_ev: self.f64_in("finite.eps_ev", in_unit, "(0, 1)")?,
            eps_pa: self.f64_in("finite.eps_pa", in_unit, "(0, 1)")?,
            eps_at: self.f64_in("finite.eps_at", in_unit, "(0, 1)")?,
        };
        let dim_a = self.usize_min("finite.dim_a", 1)?;
        let n = match self.raw("finite.n") {
            Some(s) => Some(parse_f64("finite.n", &s, |v| v >= 1.0, "[1, inf)")?),
            None => None,
        };
        let finite = match mode {
            Mode::Asymptotic => {
                if axis == Axis::N {
                    return err("sweep.axis = N requires run.mode = finite");
                }
                let stray: Vec<&String> = self.given.keys().filter(|k| k.starts_with("finite.")).collect();
                if let Some(k) = stray.first() {
                    return err(format!("key `{k}` only applies with run.mode = finite"));
                }
                None
            }
            Mode::Finite => {
                let n_signals = match (n, axis) {
                    (Some(n), _) => n,
                    (None, Axis::N) => FiniteSettings::default().n_signals,
                    (None, _) => {
                        return err("run.mode = finite requires keys: finite.n (or sweep.axis = N with sweep.values)")
                    }
                };
                Some(FiniteSettings {
                    n_signals,
                    p_gen,
                    security,
                    dim_a,
                })
            }
        };

        let solver = SolverConfig {
            max_iterations: self.usize_min("solver.max_iterations", 1)?,
            gap_tolerance: self.f64_in("solver.gap_tolerance", |v| v > 0.0, "(0, inf)")?,
            rel_gap_tolerance: self.f64_in("solver.rel_gap_tolerance", |v| v >= 0.0, "[0, inf)")?,
            eps: self.f64_in("solver.eps", |v| v > 0.0, "(0, inf)")?,
            subproblem_tolerance: self.f64_in("solver.subproblem_tolerance", |v| v > 0.0, "(0, inf)")?,
            feasibility_tolerance: self.f64_in("solver.feasibility_tolerance", |v| v > 0.0, "(0, inf)")?,
            line_search_tolerance: self.f64_in("solver.line_search_tolerance", |v| v > 0.0, "(0, inf)")?,
            structure: match self.raw("solver.structure").unwrap().to_ascii_lowercase().as_str() {
                "split" => Structure::Split,
                "per_slot" => Structure::PerSlot,
                "single" => Structure::Single,
                s => return err(format!("solver.structure = `{s}` is invalid (valid: split, per_slot, single)")),
            },
            record_log: false,
        };

        let fixed = FixedParams {
            loss_db,
            visibility,
            misalignment,
            mu,
            p_z,
            f_ec,
            cutoff,
            theta,
            finite,
        };
        let values = match self.raw("sweep.values") {
            Some(s) => parse_values(&s)?,
            None => vec![match axis {
                Axis::LossDb => loss_db,
                Axis::Visibility => visibility,
                Axis::Misalignment => misalignment,
                Axis::CutoffK => match cutoff {
                    Some(k) => k as f64,
                    None => return err("sweep.axis = cutoff_K requires sweep.values"),
                },
                Axis::N => match n {
                    Some(n) => n,
                    None => return err("sweep.axis = N requires sweep.values or finite.n"),
                },
            }],
        };
        check_axis_values(axis, &values)?;
        let plan = SweepPlan {
            protocols,
            axis,
            values,
            fixed,
            optimize_mu,
            optimize_theta,
            mu_bracket: (mu_lo, mu_hi),
            solver,
        };
        plan.validate().map_err(|e| ConfigError(e.to_string()))?;

        let output = self.raw("output.path").map(PathBuf::from);
        let timing = self.bool("output.timing")?;
        let mut resolved = BTreeMap::new();
        for k in KEYS {
            let q = k.qualified();
            let v = match q.as_str() {
                "run.f_ec" => format_f64(f_ec),
                "sweep.values" => plan.values.iter().map(|v| format_f64(*v)).collect::<Vec<_>>().join(","),
                "finite.n" => match &plan.fixed.finite {
                    Some(f) if axis != Axis::N => format_f64(f.n_signals),
                    _ => continue,
                },
                _ => match self.raw(&q) {
                    Some(v) => v,
                    None => continue,
                },
            };
            if mode == Mode::Asymptotic && k.section == "finite" {
                continue;
            }
            resolved.insert(q, v);
        }
        Ok(RunConfig {
            mode,
            plan,
            output,
            timing,
            max_failed_cells,
            resolved,
        })
    }
}

fn parse_f64(q: &str, s: &str, ok: impl Fn(f64) -> bool, range: &str) -> Parsed<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && ok(v) => Ok(v),
        Ok(_) => err(format!("{q} = `{s}` is out of range (valid: {range})")),
        Err(_) => err(format!("{q} = `{s}` is not a number (valid: {range})")),
    }
}

/// Parses `a,b,c` or the inclusive range `start:stop:step`.
pub fn parse_values(s: &str) -> Parsed<Vec<f64>> {
    let q = "sweep.values";
    let num = |t: &str| parse_f64(q, t.trim(), |_| true, "finite numbers");
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return err(format!("{q} = `{s}`: a range needs the form start:stop:step"));
        }
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) || b < a {
            return err(format!("{q} = `{s}`: need step > 0 and stop >= start"));
        }
        let count = ((b - a) / h + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return err(format!("{q} = `{s}`: more than 100000 points"));
        }
        Ok((0..count).map(|i| a + h * i as f64).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

fn check_axis_values(axis: Axis, values: &[f64]) -> Parsed<()> {
    let q = "sweep.values";
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return err(format!("{q} must be strictly increasing"));
    }
    let bad = |ok: &dyn Fn(f64) -> bool, range: &str| -> Parsed<()> {
        match values.iter().find(|&&v| !ok(v)) {
            Some(v) => err(format!("{q}: {v} is out of range for axis {axis} (valid: {range})")),
            None => Ok(()),
        }
    };
    match axis {
        Axis::LossDb => bad(&|v| v >= 0.0, "[0, inf)"),
        Axis::Visibility => bad(&|v| (0.0..=1.0).contains(&v), "[0, 1]"),
        Axis::Misalignment => Ok(()),
        Axis::CutoffK => bad(&|v| v >= 1.0 && v.fract() == 0.0, "integers >= 1"),
        Axis::N => bad(&|v| v >= 1.0, "[1, inf)"),
    }
}

/// Shortest text that parses back to exactly `v`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Renders the resolved keys as configuration text that reproduces the run.
pub fn render_config(resolved: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    let mut current = "";
    for k in KEYS {
        let q = k.qualified();
        let Some(v) = resolved.get(&q) else { continue };
        if k.section != current {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{}]\n", k.section));
            current = k.section;
        }
        out.push_str(&format!("{} = {}\n", k.name, v));
    }
    out
}
