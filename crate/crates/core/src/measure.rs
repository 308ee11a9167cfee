//! Alice and Bob measurements, threshold-detector click statistics and squashing.

use nalgebra::DMatrix;

use crate::error::{check_probability, Error, Result};
use crate::source::{binomial, PolarizationFockState};

/// Bob's squashed outcomes, in POVM order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    H,
    V,
    Plus,
    Minus,
    NoClick,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::H,
        Outcome::V,
        Outcome::Plus,
        Outcome::Minus,
        Outcome::NoClick,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Measured bit, or `None` for no click.
    pub fn bit(self) -> Option<u8> {
        match self {
            Outcome::H | Outcome::Plus => Some(0),
            Outcome::V | Outcome::Minus => Some(1),
            Outcome::NoClick => None,
        }
    }

    pub fn is_click(self) -> bool {
        self != Outcome::NoClick
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::H => "Z_H",
            Outcome::V => "Z_V",
            Outcome::Plus => "X_D",
            Outcome::Minus => "X_A",
            Outcome::NoClick => "any_none",
        }
    }
}

/// `Γ^A_x = Σ_{n=0}^{K+1} |n⟩⟨n| ⊗ |x⟩⟨x|` over `A_S ⊗ A`.
pub fn alice_povm(cutoff: usize) -> Vec<DMatrix<f64>> {
    let slots = cutoff + 2;
    (0..4)
        .map(|x| {
            let mut m = DMatrix::zeros(4 * slots, 4 * slots);
            for n in 0..slots {
                m[(4 * n + x, 4 * n + x)] = 1.0;
            }
            m
        })
        .collect()
}

/// Bob's squashed qubit-plus-vacuum POVM `Γ^B_H, Γ^B_V, Γ^B_+, Γ^B_−, Γ^B_⊥`.
pub fn bob_squashed_povm(p_z: f64) -> Result<Vec<DMatrix<f64>>> {
    check_probability("p_Z", p_z)?;
    let px = (1.0 - p_z) / 2.0;
    #[rustfmt::skip]
    let povm = vec![
        DMatrix::from_row_slice(3, 3, &[p_z, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, p_z, 0.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[px, px, 0.0, px, px, 0.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[px, -px, 0.0, -px, px, 0.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
    ];
    Ok(povm)
}

/// Raw outcome probabilities of two threshold detectors behind a polarizing
/// beam splitter.  Arm 0 is `H` (or `+`), arm 1 is `V` (or `−`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionDistribution {
    pub no_click: f64,
    pub click0: f64,
    pub click1: f64,
    pub double_click: f64,
}

impl DetectionDistribution {
    pub fn total(&self) -> f64 {
        self.no_click + self.click0 + self.click1 + self.double_click
    }

    fn scaled_add(&mut self, w: f64, other: &Self) {
        self.no_click += w * other.no_click;
        self.click0 += w * other.click0;
        self.click1 += w * other.click1;
        self.double_click += w * other.double_click;
    }

    fn zero() -> Self {
        Self {
            no_click: 0.0,
            click0: 0.0,
            click1: 0.0,
            double_click: 0.0,
        }
    }
}

/// Squashed probabilities `[bit0, bit1, ⊥]`.
pub type Squashed = [f64; 3];

/// Click statistics of `state` measured in the basis whose arm-0 mode is
/// polarized at `basis_angle`.
///
/// The state polynomial in `a†_H, a†_V` is re-expanded in the rotated modes
/// `b†_0 = cos β a†_H + sin β a†_V`, `b†_1 = −sin β a†_H + cos β a†_V`.
pub fn click_distribution(state: &PolarizationFockState, basis_angle: f64) -> DetectionDistribution {
    let n = state.n;
    let mut d = DetectionDistribution::zero();
    if n == 0 {
        d.no_click = state.norm().powi(2);
        return d;
    }
    let (s, c) = basis_angle.sin_cos();
    // a†_H = c b†_0 − s b†_1, a†_V = s b†_0 + c b†_1; polynomials indexed by power of b†_0.
    let pow = |base: [f64; 2], e: usize| -> Vec<f64> {
        let mut p = vec![1.0];
        for _ in 0..e {
            let mut q = vec![0.0; p.len() + 1];
            for (j, &v) in p.iter().enumerate() {
                q[j] += v * base[1];
                q[j + 1] += v * base[0];
            }
            p = q;
        }
        p
    };
    let mut coeffs = vec![0.0; n + 1];
    for (k, &amp) in state.amplitudes.iter().enumerate() {
        if amp == 0.0 {
            continue;
        }
        // amplitude on (n−k, k) multiplies a†_H^{n−k} a†_V^k / √((n−k)! k!)
        let norm = 1.0 / (factorial(n - k) * factorial(k)).sqrt();
        let ph = pow([c, -s], n - k);
        let pv = pow([s, c], k);
        for (i, &a) in ph.iter().enumerate() {
            for (j, &b) in pv.iter().enumerate() {
                coeffs[i + j] += amp * norm * a * b;
            }
        }
    }
    for (j, &cf) in coeffs.iter().enumerate() {
        let p = cf * cf * factorial(j) * factorial(n - j);
        if j == n {
            d.click0 += p;
        } else if j == 0 {
            d.click1 += p;
        } else {
            d.double_click += p;
        }
    }
    d
}

/// Click statistics of `n` photons linearly polarized at `angle`:
/// the arm split is `Binomial(n, cos²(angle − basis_angle))`.
pub fn linear_click_distribution(n: usize, angle: f64, basis_angle: f64) -> DetectionDistribution {
    let mut d = DetectionDistribution::zero();
    if n == 0 {
        d.no_click = 1.0;
        return d;
    }
    let p = (angle - basis_angle).cos().powi(2);
    d.click0 = p.powi(n as i32);
    d.click1 = (1.0 - p).powi(n as i32);
    d.double_click = (1.0 - d.click0 - d.click1).max(0.0);
    d
}

/// Loss followed by detection: `n` photons thinned by `eta`, then measured.
pub fn lossy_click_distribution(
    n: usize,
    eta: f64,
    angle: f64,
    basis_angle: f64,
) -> DetectionDistribution {
    let mut d = DetectionDistribution::zero();
    for m in 0..=n {
        let w = binomial(n, m) * eta.powi(m as i32) * (1.0 - eta).powi((n - m) as i32);
        if w > 0.0 {
            d.scaled_add(w, &linear_click_distribution(m, angle, basis_angle));
        }
    }
    d
}

/// Double clicks are assigned to either bit with probability ½.
pub fn squash(d: &DetectionDistribution) -> Squashed {
    let half = 0.5 * d.double_click;
    [d.click0 + half, d.click1 + half, d.no_click]
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Checks a list of operators forms a POVM on its space.
pub fn check_completeness(povm: &[DMatrix<f64>], tol: f64) -> Result<()> {
    let Some(first) = povm.first() else {
        return Err(Error::Dimension("empty POVM".into()));
    };
    let sum = povm
        .iter()
        .fold(DMatrix::zeros(first.nrows(), first.ncols()), |acc, m| acc + m);
    let dev = (sum - DMatrix::identity(first.nrows(), first.ncols())).abs().max();
    if dev > tol {
        return Err(Error::Unnormalized { total: 1.0 + dev });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn alice_povm_is_complete_and_orthogonal() {
        let povm = alice_povm(0);
        assert_eq!(povm[0].rank(1e-12), 2);
        check_completeness(&povm, 0.0).unwrap();
        assert_eq!((&povm[0] * &povm[1]).abs().max(), 0.0);
    }

    #[test]
    fn bob_povm_matches_closed_form() {
        let povm = bob_squashed_povm(0.5).unwrap();
        assert_eq!(povm[0][(0, 0)], 0.5);
        assert_eq!(povm[2][(0, 1)], 0.25);
        check_completeness(&povm, 1e-15).unwrap();
        for p in [0.01, 0.3, 0.99] {
            check_completeness(&bob_squashed_povm(p).unwrap(), 1e-15).unwrap();
        }
    }

    #[test]
    fn two_diagonal_photons_on_z() {
        let d = click_distribution(&PolarizationFockState::linear(2, FRAC_PI_4), 0.0);
        assert_abs_diff_eq!(d.click0, 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(d.click1, 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(d.double_click, 0.5, epsilon = 1e-14);
        let sq = squash(&d);
        assert_abs_diff_eq!(sq[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sq[1], 0.5, epsilon = 1e-14);
        assert_eq!(sq[2], 0.0);
    }

    #[test]
    fn fock_expansion_matches_binomial_split() {
        for n in 0..=6 {
            for i in 0..16 {
                let alpha = i as f64 * PI / 16.0;
                for beta in [0.0, FRAC_PI_4, 0.3] {
                    let a = click_distribution(&PolarizationFockState::linear(n, alpha), beta);
                    let b = linear_click_distribution(n, alpha, beta);
                    assert_abs_diff_eq!(a.total(), 1.0, epsilon = 1e-12);
                    assert_abs_diff_eq!(a.click0, b.click0, epsilon = 1e-12);
                    assert_abs_diff_eq!(a.click1, b.click1, epsilon = 1e-12);
                    assert_abs_diff_eq!(a.double_click, b.double_click, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn lossy_detection_conserves_probability() {
        let d = lossy_click_distribution(3, 0.4, 0.2, FRAC_PI_4);
        assert_abs_diff_eq!(d.total(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.no_click, 0.6f64.powi(3), epsilon = 1e-15);
    }
}
