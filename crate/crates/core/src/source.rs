//! Phase-randomized weak coherent pulse source in the source-replacement picture.
//!
//! Alice's record register `A` holds the signal label, the shield register
//! `A_S` holds the photon number (with slot `K+1` flagging every pulse above
//! the cutoff), and `A'` is the optical mode sent into the channel.  Because
//! distinct photon numbers are orthogonal in `A'`, everything Alice keeps is
//! block diagonal in the shield register.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{check_domain, Error, Result};
use crate::numerics::{poisson_pmf, ComplexMatrix, RegisterShape};

/// Polarization basis used for encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

/// One of the four BB84 polarization signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Signal {
    H,
    V,
    D,
    A,
}

impl Signal {
    pub const ALL: [Signal; 4] = [Signal::H, Signal::V, Signal::D, Signal::A];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn basis(self) -> Basis {
        match self {
            Signal::H | Signal::V => Basis::Z,
            Signal::D | Signal::A => Basis::X,
        }
    }

    /// Bit value within its basis (H, D → 0; V, A → 1).
    pub fn bit(self) -> u8 {
        match self {
            Signal::H | Signal::D => 0,
            Signal::V | Signal::A => 1,
        }
    }

    /// Nominal polarization angle.
    pub fn angle(self) -> f64 {
        match self {
            Signal::H => 0.0,
            Signal::V => FRAC_PI_2,
            Signal::D => FRAC_PI_4,
            Signal::A => 3.0 * FRAC_PI_4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Signal::H => "H",
            Signal::V => "V",
            Signal::D => "D",
            Signal::A => "A",
        }
    }
}

/// Source settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    /// Mean photon number.
    pub mu: f64,
    /// Photon-number cutoff `K`; pulses with more photons are tagged.
    pub cutoff: usize,
    /// `p_x` for `x` in H, V, D, A.
    pub signal_probs: [f64; 4],
    /// Global preparation rotation (radians).
    pub alice_angle: f64,
    /// Extra rotation applied to the Z-basis states only (radians); the
    /// intentional misalignment used by NPAB BB84.
    pub z_offset: f64,
}

impl SourceConfig {
    /// Signals chosen with basis probability `p_z` and uniform bit values.
    pub fn new(mu: f64, cutoff: usize, p_z: f64) -> Result<Self> {
        let cfg = Self {
            mu,
            cutoff,
            signal_probs: [p_z / 2.0, p_z / 2.0, (1.0 - p_z) / 2.0, (1.0 - p_z) / 2.0],
            alice_angle: 0.0,
            z_offset: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_alice_angle(mut self, theta: f64) -> Self {
        self.alice_angle = theta;
        self
    }

    pub fn with_z_offset(mut self, theta: f64) -> Self {
        self.z_offset = theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_domain("mu", self.mu, self.mu >= 0.0 && self.mu.is_finite(), "[0, inf)")?;
        for &p in &self.signal_probs {
            check_domain("p_x", p, (0.0..=1.0).contains(&p), "[0, 1]")?;
        }
        let total: f64 = self.signal_probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Unnormalized { total });
        }
        check_domain("alice_angle", self.alice_angle, self.alice_angle.is_finite(), "finite")?;
        check_domain("z_offset", self.z_offset, self.z_offset.is_finite(), "finite")?;
        Ok(())
    }

    /// Physical preparation angle of signal `x`.
    pub fn preparation_angle(&self, x: Signal) -> f64 {
        let offset = if x.basis() == Basis::Z { self.z_offset } else { 0.0 };
        x.angle() + self.alice_angle + offset
    }

    /// Shield-register weights `p_0 … p_K` followed by the tagged tail `p_{n>K}`.
    pub fn photon_weights(&self) -> Vec<f64> {
        photon_weights(self.mu, self.cutoff)
    }

    /// Number of shield slots (`K + 2`).
    pub fn shield_dim(&self) -> usize {
        self.cutoff + 2
    }
}

/// Poisson weights truncated at `cutoff` plus the explicit tail mass.
pub(crate) fn photon_weights(mu: f64, cutoff: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..=cutoff)
        .map(|n| poisson_pmf(mu, n as u32).unwrap_or(0.0))
        .collect();
    let head: f64 = w.iter().sum();
    w.push(tail_mass(mu, cutoff, head));
    w
}

/// `P(n > cutoff)` for Poisson(mu), summed forward when the complement would cancel.
fn tail_mass(mu: f64, cutoff: usize, head: f64) -> f64 {
    if 1.0 - head > 1e-3 {
        return (1.0 - head).max(0.0);
    }
    let mut acc = 0.0;
    let mut n = cutoff as u32 + 1;
    loop {
        let t = poisson_pmf(mu, n).unwrap_or(0.0);
        acc += t;
        if t <= acc * 1e-17 || n > cutoff as u32 + 400 {
            break;
        }
        n += 1;
    }
    acc
}

/// n-photon state expanded over `(n_H, n_V) = (n-k, k)`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationFockState {
    pub n: usize,
    pub amplitudes: Vec<f64>,
}

impl PolarizationFockState {
    /// All `n` photons linearly polarized at `angle`:
    /// `(cos φ a†_H + sin φ a†_V)ⁿ / √n! |0⟩`.
    pub fn linear(n: usize, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let amplitudes = (0..=n)
            .map(|k| binomial(n, k).sqrt() * c.powi((n - k) as i32) * s.powi(k as i32))
            .collect();
        Self { n, amplitudes }
    }

    pub fn vacuum() -> Self {
        Self {
            n: 0,
            amplitudes: vec![1.0],
        }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn overlap(&self, other: &Self) -> f64 {
        if self.n != other.n {
            return 0.0;
        }
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a * b)
            .sum()
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Signal `x` carried by `n ≥ 1` photons, rotated by `theta`.
pub fn signal_state(x: Signal, n: usize, theta: f64) -> Result<PolarizationFockState> {
    if n == 0 {
        return Err(Error::Domain {
            name: "n",
            value: 0.0,
            domain: "n >= 1 (vacuum carries no signal)",
        });
    }
    Ok(PolarizationFockState::linear(n, x.angle() + theta))
}

/// Purified tagged source state over `A_S ⊗ A ⊗ A'`.
#[derive(Debug, Clone)]
pub struct TaggedState {
    pub amplitudes: DVector<Complex64>,
    pub shape: RegisterShape,
}

/// `A'` is a direct sum of photon-number sectors `n = 0..=K` (dimension `n+1`
/// each) followed by four orthogonal flag states for the tagged pulses.
fn aprime_offsets(cutoff: usize) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(cutoff + 2);
    let mut acc = 0;
    for n in 0..=cutoff {
        offsets.push(acc);
        acc += n + 1;
    }
    offsets.push(acc);
    (offsets, acc + 4)
}

pub fn tagged_source_state(cfg: &SourceConfig) -> Result<TaggedState> {
    cfg.validate()?;
    let k = cfg.cutoff;
    let (offsets, dim_ap) = aprime_offsets(k);
    let shape = RegisterShape::new([("AS", k + 2), ("A", 4), ("A'", dim_ap)])?;
    let weights = cfg.photon_weights();
    let mut psi = DVector::<Complex64>::zeros(shape.dim());
    let idx = |n: usize, x: usize, a: usize| (n * 4 + x) * dim_ap + a;
    for (n, &pn) in weights.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        for x in Signal::ALL {
            let amp = (pn * cfg.signal_probs[x.index()]).sqrt();
            if amp == 0.0 {
                continue;
            }
            if n <= k {
                let state = PolarizationFockState::linear(n, cfg.preparation_angle(x));
                for (j, &c) in state.amplitudes.iter().enumerate() {
                    psi[idx(n, x.index(), offsets[n] + j)] += Complex64::new(amp * c, 0.0);
                }
            } else {
                psi[idx(n, x.index(), offsets[n] + x.index())] += Complex64::new(amp, 0.0);
            }
        }
    }
    Ok(TaggedState { amplitudes: psi, shape })
}

/// Gram matrix `√(p_x p_x') ⟨s_{x',n}|s_{x,n}⟩` of the signals in shield slot `n`
/// (orthogonal flags for the tagged slot).
pub fn signal_gram(cfg: &SourceConfig, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |i, j| {
        let (xi, xj) = (Signal::ALL[i], Signal::ALL[j]);
        let amp = (cfg.signal_probs[i] * cfg.signal_probs[j]).sqrt();
        let overlap = if n <= cfg.cutoff {
            (cfg.preparation_angle(xi) - cfg.preparation_angle(xj))
                .cos()
                .powi(n as i32)
        } else if i == j {
            1.0
        } else {
            0.0
        };
        amp * overlap
    })
}

/// Alice's 4×4 block for shield slot `n`: `p_n` times [`signal_gram`].
pub fn alice_block(cfg: &SourceConfig, n: usize) -> DMatrix<f64> {
    let pn = cfg.photon_weights().get(n).copied().unwrap_or(0.0);
    signal_gram(cfg, n) * pn
}

/// All shield blocks `0..=K+1`.
pub fn alice_blocks(cfg: &SourceConfig) -> Vec<DMatrix<f64>> {
    let w = cfg.photon_weights();
    (0..cfg.shield_dim()).map(|n| signal_gram(cfg, n) * w[n]).collect()
}

/// `Tr_{A'} |Ψ⟩⟨Ψ|` over `A_S ⊗ A`, built block by block.
pub fn reduced_alice_state(cfg: &SourceConfig) -> Result<ComplexMatrix> {
    cfg.validate()?;
    let slots = cfg.shield_dim();
    let mut out = ComplexMatrix::zeros(4 * slots, 4 * slots);
    for n in 0..slots {
        let block = alice_block(cfg, n);
        for i in 0..4 {
            for j in 0..4 {
                out[(4 * n + i, 4 * n + j)] = Complex64::new(block[(i, j)], 0.0);
            }
        }
    }
    Ok(out)
}
