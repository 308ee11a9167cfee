//! Announcement structures, key maps, the `G` and `Z` maps, sifting and
//! error-correction leakage for BB84, NPAB BB84 and SARG04.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::ExpectedFrequencies;
use crate::error::{check_probability, Error, Result};
use crate::measure::{bob_squashed_povm, Outcome};
use crate::numerics::{
    cond_entropy, herm_eig, rel_entropy, to_complex, ComplexMatrix, JointDistribution,
    Normalization, RegisterShape,
};
use crate::source::{Basis, Signal};

/// Supported protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    Bb84,
    Npab,
    Sarg04,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [ProtocolKind::Bb84, ProtocolKind::Npab, ProtocolKind::Sarg04];

    pub fn default_cutoff(self) -> usize {
        match self {
            ProtocolKind::Bb84 => 1,
            ProtocolKind::Npab | ProtocolKind::Sarg04 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Bb84 => "BB84",
            ProtocolKind::Npab => "NPAB",
            ProtocolKind::Sarg04 => "SARG04",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "BB84" => Ok(ProtocolKind::Bb84),
            "NPAB" | "NPAB_BB84" | "NPAB-BB84" => Ok(ProtocolKind::Npab),
            "SARG04" | "SARG" => Ok(ProtocolKind::Sarg04),
            other => Err(Error::Config(format!(
                "unknown protocol `{other}` (expected BB84, NPAB or SARG04)"
            ))),
        }
    }
}

/// Protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    /// Probability of the Z basis, for both preparation and measurement.
    pub p_z: f64,
    /// Probability that a round is a generation round (finite-size only).
    pub p_gen: f64,
    /// Photon-number cutoff `K`.
    pub cutoff: usize,
}

impl ProtocolSpec {
    pub fn new(kind: ProtocolKind) -> Self {
        Self {
            kind,
            p_z: 0.5,
            p_gen: 0.85,
            cutoff: kind.default_cutoff(),
        }
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_p_z(mut self, p_z: f64) -> Self {
        self.p_z = p_z;
        self
    }

    pub fn with_p_gen(mut self, p_gen: f64) -> Self {
        self.p_gen = p_gen;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_Z", self.p_z)?;
        if self.p_z == 0.0 || self.p_z == 1.0 {
            return Err(Error::Domain {
                name: "p_Z",
                value: self.p_z,
                domain: "(0, 1)",
            });
        }
        check_probability("p_Gen", self.p_gen)?;
        if self.kind == ProtocolKind::Bb84 && self.cutoff != 1 {
            return Err(Error::Config(format!(
                "BB84 requires photon cutoff K = 1 (multi-photon pulses are fully known to the eavesdropper), got {}",
                self.cutoff
            )));
        }
        Ok(())
    }

    pub fn shield_dim(&self) -> usize {
        self.cutoff + 2
    }
}

/// One summand `|key⟩_R ⊗ |tag⟩_X ⊗ weight·Γ^A_signal ⊗ bob` of a Kraus operator.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausTerm {
    pub key: u8,
    /// Index in the basis register `X` (trivial except for NPAB).
    pub basis_tag: usize,
    pub signal: Signal,
    pub weight: f64,
    /// Operator on Bob's qubit-plus-vacuum space (3 × 3).
    pub bob: DMatrix<f64>,
}

/// Kraus operator for one surviving announcement.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausOperator {
    pub announcement: usize,
    pub terms: Vec<KrausTerm>,
}

/// Compact action of one Kraus operator on a single shield block `A ⊗ B`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockKraus {
    /// Nonzero rows of the `A ⊗ B → R ⊗ X ⊗ A ⊗ B` map (12 columns).
    pub op: DMatrix<f64>,
    /// Key value of each row.
    pub keys: Vec<u8>,
}

/// The `G` map: Kraus operators acting identically on every shield block.
#[derive(Debug, Clone, PartialEq)]
pub struct GMap {
    pub kind: ProtocolKind,
    pub cutoff: usize,
    /// Dimension of the basis register `X`.
    pub basis_dim: usize,
    /// Dimension of the announcement register `C`.
    pub announcement_dim: usize,
    pub operators: Vec<KrausOperator>,
}

fn qubit_identity() -> DMatrix<f64> {
    let mut m = DMatrix::zeros(3, 3);
    m[(0, 0)] = 1.0;
    m[(1, 1)] = 1.0;
    m
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    herm_eig(m)
        .expect("POVM sums are symmetric")
        .map(|l| l.max(0.0).sqrt())
}

/// SARG04 announcement `α`: the Z-basis member, the X-basis member, and the
/// outcome that conclusively identifies each of them.
pub(crate) const SARG_ANNOUNCEMENTS: [(Signal, Signal, Outcome, Outcome); 4] = [
    (Signal::H, Signal::D, Outcome::Minus, Outcome::V),
    (Signal::V, Signal::D, Outcome::Minus, Outcome::H),
    (Signal::V, Signal::A, Outcome::Plus, Outcome::H),
    (Signal::H, Signal::A, Outcome::Plus, Outcome::V),
];

/// Builds the Kraus operators of the `G` map.
pub fn build_gmap(proto: &ProtocolSpec) -> Result<GMap> {
    proto.validate()?;
    let p_z = proto.p_z;
    let p_x = 1.0 - p_z;
    let term = |key: u8, basis_tag: usize, signal: Signal, weight: f64, bob: DMatrix<f64>| KrausTerm {
        key,
        basis_tag,
        signal,
        weight,
        bob,
    };
    let (basis_dim, operators) = match proto.kind {
        ProtocolKind::Bb84 => {
            let bz = qubit_identity() * p_z.sqrt();
            let bx = qubit_identity() * p_x.sqrt();
            (
                1,
                vec![
                    KrausOperator {
                        announcement: 0,
                        terms: vec![
                            term(0, 0, Signal::H, 1.0, bz.clone()),
                            term(1, 0, Signal::V, 1.0, bz),
                        ],
                    },
                    KrausOperator {
                        announcement: 1,
                        terms: vec![
                            term(0, 0, Signal::D, 1.0, bx.clone()),
                            term(1, 0, Signal::A, 1.0, bx),
                        ],
                    },
                ],
            )
        }
        ProtocolKind::Npab => {
            let b = qubit_identity();
            (
                2,
                vec![KrausOperator {
                    announcement: 0,
                    terms: vec![
                        term(0, 0, Signal::H, 1.0, b.clone()),
                        term(1, 0, Signal::V, 1.0, b.clone()),
                        term(0, 1, Signal::D, 1.0, b.clone()),
                        term(1, 1, Signal::A, 1.0, b),
                    ],
                }],
            )
        }
        ProtocolKind::Sarg04 => {
            let povm = bob_squashed_povm(p_z)?;
            let ops = SARG_ANNOUNCEMENTS
                .iter()
                .enumerate()
                .map(|(a, &(zs, xs, zo, xo))| {
                    let bob = psd_sqrt(&(&povm[zo.index()] + &povm[xo.index()]));
                    KrausOperator {
                        announcement: a,
                        terms: vec![
                            term(0, 0, zs, FRAC_1_SQRT_2, bob.clone()),
                            term(1, 0, xs, FRAC_1_SQRT_2, bob),
                        ],
                    }
                })
                .collect();
            (1, ops)
        }
    };
    Ok(GMap {
        kind: proto.kind,
        cutoff: proto.cutoff,
        basis_dim,
        announcement_dim: operators.len(),
        operators,
    })
}

impl GMap {
    pub fn shield_dim(&self) -> usize {
        self.cutoff + 2
    }

    /// Input registers `[AS, A, B]`.
    pub fn input_shape(&self) -> RegisterShape {
        RegisterShape::new([("AS", self.shield_dim()), ("A", 4), ("B", 3)])
            .expect("fixed register layout")
    }

    /// Output registers `[C, R, X, AS, A, B]`.
    pub fn output_shape(&self) -> RegisterShape {
        RegisterShape::new([
            ("C", self.announcement_dim),
            ("R", 2),
            ("X", self.basis_dim),
            ("AS", self.shield_dim()),
            ("A", 4),
            ("B", 3),
        ])
        .expect("fixed register layout")
    }

    /// Single-block action `A ⊗ B → R ⊗ X ⊗ A ⊗ B` (rows ordered `(r, x, a, b)`).
    pub fn ab_operator(&self, index: usize) -> DMatrix<f64> {
        let k = &self.operators[index];
        let mut m = DMatrix::zeros(2 * self.basis_dim * 12, 12);
        for t in &k.terms {
            let a = t.signal.index();
            let row0 = (t.key as usize * self.basis_dim + t.basis_tag) * 12 + a * 3;
            for i in 0..3 {
                for j in 0..3 {
                    m[(row0 + i, a * 3 + j)] += t.weight * t.bob[(i, j)];
                }
            }
        }
        m
    }

    /// [`ab_operator`](Self::ab_operator) with zero rows removed, tagged by key value.
    pub fn block_kraus(&self) -> Vec<BlockKraus> {
        let per_key = self.basis_dim * 12;
        (0..self.operators.len())
            .map(|c| {
                let full = self.ab_operator(c);
                let rows: Vec<usize> = (0..full.nrows())
                    .filter(|&r| full.row(r).iter().any(|&v| v != 0.0))
                    .collect();
                let op = DMatrix::from_fn(rows.len(), 12, |i, j| full[(rows[i], j)]);
                let keys = rows.iter().map(|&r| (r / per_key) as u8).collect();
                BlockKraus { op, keys }
            })
            .collect()
    }

    /// `Σ K†K` on a single block: the sifting-success observable.
    pub fn sift_operator(&self) -> DMatrix<f64> {
        (0..self.operators.len()).fold(DMatrix::zeros(12, 12), |acc, c| {
            let k = self.ab_operator(c);
            acc + k.transpose() * k
        })
    }

    /// Full Kraus operator including the announcement register, from
    /// `[AS, A, B]` to `[C, R, X, AS, A, B]`.
    pub fn kraus_matrix(&self, index: usize) -> ComplexMatrix {
        let slots = self.shield_dim();
        let ab = self.ab_operator(index);
        let per_c = 2 * self.basis_dim * slots * 12;
        let c = self.operators[index].announcement;
        let mut m = ComplexMatrix::zeros(self.announcement_dim * per_c, slots * 12);
        for row in 0..ab.nrows() {
            let (rx, ab_row) = (row / 12, row % 12);
            for col in 0..12 {
                let v = ab[(row, col)];
                if v == 0.0 {
                    continue;
                }
                for n in 0..slots {
                    let out = c * per_c + (rx * slots + n) * 12 + ab_row;
                    m[(out, n * 12 + col)] = Complex64::new(v, 0.0);
                }
            }
        }
        m
    }

    pub fn kraus_matrices(&self) -> Vec<ComplexMatrix> {
        (0..self.operators.len()).map(|i| self.kraus_matrix(i)).collect()
    }
}

fn check_input(g: &GMap, rho: &ComplexMatrix) -> Result<()> {
    let d = g.input_shape().dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::Dimension(format!(
            "G map expects a {d}×{d} operator, got {}×{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(())
}

/// `G(ρ) = Σ_i K_i ρ K_i†` over the output registers `[C, R, X, AS, A, B]`.
pub fn apply_gmap(g: &GMap, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_input(g, rho)?;
    let d = g.output_shape().dim();
    Ok(g.kraus_matrices()
        .iter()
        .fold(ComplexMatrix::zeros(d, d), |acc, k| acc + k * rho * k.adjoint()))
}

/// Adjoint map `G†(X) = Σ_i K_i† X K_i`.
pub fn apply_gmap_adjoint(g: &GMap, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = g.output_shape().dim();
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::Dimension(format!("G† expects a {d}×{d} operator")));
    }
    let din = g.input_shape().dim();
    Ok(g.kraus_matrices()
        .iter()
        .fold(ComplexMatrix::zeros(din, din), |acc, k| acc + k.adjoint() * x * k))
}

/// Pinching `Σ_r (|r⟩⟨r|_R ⊗ 1) ρ (|r⟩⟨r|_R ⊗ 1)`.
pub fn apply_zmap(rho: &ComplexMatrix, shape: &RegisterShape) -> Result<ComplexMatrix> {
    let pos = shape
        .index_of("R")
        .ok_or_else(|| Error::MissingRegister("R".into()))?;
    if rho.nrows() != shape.dim() || rho.ncols() != shape.dim() {
        return Err(Error::Dimension(format!(
            "operator is {}×{} but the register shape has dimension {}",
            rho.nrows(),
            rho.ncols(),
            shape.dim()
        )));
    }
    let dims = shape.dims();
    let stride: usize = dims[pos + 1..].iter().product();
    let dr = dims[pos];
    let key = |i: usize| (i / stride) % dr;
    Ok(ComplexMatrix::from_fn(rho.nrows(), rho.ncols(), |i, j| {
        if key(i) == key(j) {
            rho[(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// `f(ρ) = D(G(ρ) ‖ Z(G(ρ)))` evaluated on the full operators.
pub fn objective(rho: &ComplexMatrix, g: &GMap, eps: f64) -> Result<f64> {
    let gr = apply_gmap(g, rho)?;
    let zr = apply_zmap(&gr, &g.output_shape())?;
    rel_entropy(&gr, &zr, eps)
}

/// Sifted key statistics derived classically from `F̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiftStatistics {
    /// Probability that a generation round survives sifting.
    pub p_sift: f64,
    /// Subnormalized joint table of Alice's key bit (axis 0) and Bob's public
    /// plus measured data (axis 1).
    pub table: JointDistribution,
}

impl SiftStatistics {
    /// `H(key | Bob's data)` per sifted round.
    pub fn cond_entropy(&self) -> Result<f64> {
        if self.p_sift <= 0.0 {
            return Ok(0.0);
        }
        cond_entropy(&self.table.normalized()?, 1)
    }

    /// Error rate of Bob's best guess of the key bit.
    pub fn error_rate(&self) -> f64 {
        if self.p_sift <= 0.0 {
            return 0.0;
        }
        let sym = self.table.shape()[1];
        let err: f64 = (0..sym)
            .map(|s| self.table.get(&[0, s]).min(self.table.get(&[1, s])))
            .sum();
        err / self.p_sift
    }
}

/// Symbols per announcement in the Bob-data axis.
const SYMBOLS: usize = 5;

/// Sifting outcome for signal `x` and Bob's outcome `y`:
/// `(probability weight, Bob symbol, Alice's key bit)` for each kept branch.
pub(crate) fn sift_events(kind: ProtocolKind, x: Signal, y: Outcome) -> Vec<(f64, usize, u8)> {
    if !y.is_click() {
        return Vec::new();
    }
    match kind {
        ProtocolKind::Bb84 => {
            let y_basis = if y.index() < 2 { Basis::Z } else { Basis::X };
            if y_basis == x.basis() {
                vec![(1.0, y.index(), x.bit())]
            } else {
                Vec::new()
            }
        }
        ProtocolKind::Npab => vec![(1.0, y.index(), x.bit())],
        ProtocolKind::Sarg04 => {
            let key = match x.basis() {
                Basis::Z => 0,
                Basis::X => 1,
            };
            SARG_ANNOUNCEMENTS
                .iter()
                .enumerate()
                .filter(|(_, &(zs, xs, zo, xo))| (zs == x || xs == x) && (y == zo || y == xo))
                .map(|(a, _)| (0.5, a * SYMBOLS + y.index(), key))
                .collect()
        }
    }
}

fn announcement_count(kind: ProtocolKind) -> usize {
    match kind {
        ProtocolKind::Sarg04 => 4,
        ProtocolKind::Bb84 | ProtocolKind::Npab => 1,
    }
}

/// Classical sifting of the expected statistics.
pub fn sift_statistics(proto: &ProtocolSpec, f: &ExpectedFrequencies) -> Result<SiftStatistics> {
    let nsym = announcement_count(proto.kind) * SYMBOLS;
    let mut probs = vec![0.0; 2 * nsym];
    for x in Signal::ALL {
        for y in Outcome::ALL {
            let p = f.get(x, y);
            for (w, s, key) in sift_events(proto.kind, x, y) {
                probs[key as usize * nsym + s] += w * p;
            }
        }
    }
    let p_sift = probs.iter().sum();
    let table = JointDistribution::new(vec![2, nsym], probs, Normalization::Sub)?;
    Ok(SiftStatistics { p_sift, table })
}

/// Error-correction leakage per signal at the Shannon limit:
/// `p_sift · H(key | Bob's data)`.
pub fn delta_leak(proto: &ProtocolSpec, f: &ExpectedFrequencies) -> Result<f64> {
    let s = sift_statistics(proto, f)?;
    Ok(s.p_sift * s.cond_entropy()?)
}

/// Operator on the block `A ⊗ B` whose expectation is the cell `(x, y)`.
pub fn cell_observable(p_z: f64, x: Signal, y: Outcome) -> Result<DMatrix<f64>> {
    let povm = bob_squashed_povm(p_z)?;
    let mut a = DMatrix::zeros(4, 4);
    a[(x.index(), x.index())] = 1.0;
    Ok(a.kronecker(&povm[y.index()]))
}

/// Embeds a block-diagonal operator (one 12 × 12 block per shield slot) into the
/// full `[AS, A, B]` space.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> ComplexMatrix {
    let d: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = DMatrix::zeros(d, d);
    let mut off = 0;
    for b in blocks {
        m.view_mut((off, off), b.shape()).copy_from(b);
        off += b.nrows();
    }
    to_complex(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sift_operator_is_contraction() {
        for kind in ProtocolKind::ALL {
            let g = build_gmap(&ProtocolSpec::new(kind)).unwrap();
            let s = g.sift_operator();
            let eig = herm_eig(&s).unwrap();
            assert!(eig.values.iter().all(|&l| l > -1e-14 && l < 1.0 + 1e-12));
        }
    }

    #[test]
    fn bb84_z_signal_sift_weight() {
        let g = build_gmap(&ProtocolSpec::new(ProtocolKind::Bb84)).unwrap();
        let s = g.sift_operator();
        // |H⟩_A ⊗ |H⟩_B
        assert_abs_diff_eq!(s[(0, 0)], 0.5, epsilon = 1e-15);
        // with Alice's own basis choice the probability is p_Z²
        assert_abs_diff_eq!(0.5 * s[(0, 0)], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn zmap_is_idempotent_and_needs_r() {
        let shape = RegisterShape::new([("R", 2), ("B", 2)]).unwrap();
        let m = ComplexMatrix::from_fn(4, 4, |i, j| Complex64::new((i + 2 * j) as f64, 0.0));
        let z = apply_zmap(&m, &shape).unwrap();
        assert_eq!(apply_zmap(&z, &shape).unwrap(), z);
        assert_eq!(z[(0, 2)], Complex64::new(0.0, 0.0));
        assert_eq!(z[(1, 0)], m[(1, 0)]);
        let bad = RegisterShape::new([("A", 4)]).unwrap();
        assert!(matches!(apply_zmap(&m, &bad), Err(Error::MissingRegister(_))));
    }

    #[test]
    fn bb84_requires_unit_cutoff() {
        assert!(build_gmap(&ProtocolSpec::new(ProtocolKind::Bb84).with_cutoff(2)).is_err());
        assert!("sarg04".parse::<ProtocolKind>().is_ok());
        assert!("E91".parse::<ProtocolKind>().is_err());
    }
}
