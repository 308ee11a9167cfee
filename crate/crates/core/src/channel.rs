//! Deterministic channel model producing the expected statistics `F̄`.
//!
//! Each `n`-photon component is thinned binomially, rotated by the
//! misalignment angle, detected by threshold detectors and squashed.  Visibility
//! is modelled by averaging the statistics of two rotations `±φ` with
//! `φ = ½ arccos V`.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;

use crate::error::{check_domain, check_probability, Result};
use crate::measure::{lossy_click_distribution, squash, Outcome};
use crate::numerics::{JointDistribution, Normalization};
use crate::protocol::ProtocolSpec;
use crate::source::{binomial, photon_weights, Basis, Signal, SourceConfig};

/// Loss, misalignment and visibility of the quantum channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelScenario {
    pub loss_db: f64,
    /// Misalignment rotation (radians).
    pub theta: f64,
    pub visibility: f64,
}

impl ChannelScenario {
    pub fn new(loss_db: f64, theta: f64, visibility: f64) -> Result<Self> {
        let ch = Self {
            loss_db,
            theta,
            visibility,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn loss_only(loss_db: f64) -> Result<Self> {
        Self::new(loss_db, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        transmittance(self.loss_db)?;
        check_domain("theta", self.theta, self.theta.is_finite(), "finite")?;
        check_probability("visibility", self.visibility)
    }

    pub fn eta(&self) -> f64 {
        10f64.powf(-self.loss_db / 10.0)
    }

    /// Depolarizing half-angle `½ arccos V`.
    pub fn phi(&self) -> f64 {
        0.5 * self.visibility.clamp(-1.0, 1.0).acos()
    }
}

/// `η = 10^{−loss/10}`.
pub fn transmittance(loss_db: f64) -> Result<f64> {
    check_domain("loss_db", loss_db, loss_db >= 0.0 && loss_db.is_finite(), "[0, inf)")?;
    Ok(10f64.powf(-loss_db / 10.0))
}

/// Received photon-number weights `0..=K` plus the tail: Poisson(ημ).
pub fn thinned_photon_distribution(mu: f64, eta: f64, cutoff: usize) -> Result<Vec<f64>> {
    check_domain("mu", mu, mu >= 0.0 && mu.is_finite(), "[0, inf)")?;
    check_probability("eta", eta)?;
    Ok(photon_weights(eta * mu, cutoff))
}

/// `Binomial(n_sent, η)` over received photon numbers.
pub fn conditional_loss(n_sent: usize, eta: f64) -> Result<Vec<f64>> {
    check_probability("eta", eta)?;
    Ok((0..=n_sent)
        .map(|m| binomial(n_sent, m) * eta.powi(m as i32) * (1.0 - eta).powi((n_sent - m) as i32))
        .collect())
}

/// 4 × 5 table indexed by signal then outcome.
pub type SignalTable = [[f64; 5]; 4];

/// Expected joint statistics of Alice's signal and Bob's squashed outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedFrequencies {
    pub p_z: f64,
    pub signal_probs: [f64; 4],
    /// `F̄[x][y] = Tr ρ (Γ^A_x ⊗ Γ^B_y)`.
    pub table: SignalTable,
    /// `P(y | x, n_sent)` for shield slots `0..=K+1`.
    pub per_photon: Vec<SignalTable>,
    /// Shield-slot weights used to mix `per_photon`.
    pub photon_weights: Vec<f64>,
}

impl ExpectedFrequencies {
    pub fn get(&self, x: Signal, y: Outcome) -> f64 {
        self.table[x.index()][y.index()]
    }

    pub fn joint(&self) -> Result<JointDistribution> {
        JointDistribution::new(
            vec![4, 5],
            self.table.iter().flatten().copied().collect(),
            Normalization::Full,
        )
    }

    pub fn detection_probability(&self) -> f64 {
        1.0 - self.table.iter().map(|row| row[Outcome::NoClick.index()]).sum::<f64>()
    }

    /// Bit error rate among detected rounds where both parties used `basis`.
    pub fn error_rate(&self, basis: Basis) -> f64 {
        error_rate(&self.table, basis)
    }

    /// Same as [`error_rate`](Self::error_rate) restricted to `n_sent` photons.
    pub fn conditional_error_rate(&self, n_sent: usize, basis: Basis) -> f64 {
        let mut t = self.per_photon[n_sent];
        for (x, row) in t.iter_mut().enumerate() {
            row.iter_mut().for_each(|v| *v *= self.signal_probs[x]);
        }
        error_rate(&t, basis)
    }

    /// Cell names `<signal>_<basis>_<outcome>`, e.g. `H_Z_V` or `D_any_none`.
    pub fn cell_names() -> Vec<String> {
        Signal::ALL
            .iter()
            .flat_map(|x| Outcome::ALL.iter().map(move |y| format!("{}_{}", x.label(), y.label())))
            .collect()
    }

    /// Two-line CSV: the cell names and the probabilities at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = Self::cell_names().join(",");
        out.push('\n');
        let values: Vec<String> = self
            .table
            .iter()
            .flatten()
            .map(|v| format!("{v:.16e}"))
            .collect();
        let _ = writeln!(out, "{}", values.join(","));
        out
    }
}

fn outcome_basis(y: Outcome) -> Option<Basis> {
    match y {
        Outcome::H | Outcome::V => Some(Basis::Z),
        Outcome::Plus | Outcome::Minus => Some(Basis::X),
        Outcome::NoClick => None,
    }
}

fn error_rate(table: &SignalTable, basis: Basis) -> f64 {
    let (mut err, mut tot) = (0.0, 0.0);
    for x in Signal::ALL.into_iter().filter(|x| x.basis() == basis) {
        for y in Outcome::ALL {
            if outcome_basis(y) == Some(basis) {
                let p = table[x.index()][y.index()];
                tot += p;
                if y.bit() != Some(x.bit()) {
                    err += p;
                }
            }
        }
    }
    if tot > 0.0 {
        err / tot
    } else {
        0.0
    }
}

/// `P(y | x)` for `n` photons sent, averaged over the two depolarizing rotations.
fn conditional_table(src: &SourceConfig, ch: &ChannelScenario, p_z: f64, n: usize) -> SignalTable {
    let eta = ch.eta();
    let phi = ch.phi();
    let mut t = [[0.0; 5]; 4];
    for x in Signal::ALL {
        let row = &mut t[x.index()];
        for s in [phi, -phi] {
            let angle = src.preparation_angle(x) + ch.theta + s;
            for (basis_angle, weight, i0, i1) in [
                (0.0, p_z, Outcome::H, Outcome::V),
                (FRAC_PI_4, 1.0 - p_z, Outcome::Plus, Outcome::Minus),
            ] {
                let sq = squash(&lossy_click_distribution(n, eta, angle, basis_angle));
                row[i0.index()] += 0.5 * weight * sq[0];
                row[i1.index()] += 0.5 * weight * sq[1];
                row[Outcome::NoClick.index()] += 0.5 * weight * sq[2];
            }
        }
    }
    t
}

/// Expected statistics for the given source, channel and protocol.
///
/// Pulses above the cutoff are simulated as `K + 1` photon pulses.
pub fn expected_frequencies(
    src: &SourceConfig,
    ch: &ChannelScenario,
    proto: &ProtocolSpec,
) -> Result<ExpectedFrequencies> {
    src.validate()?;
    ch.validate()?;
    proto.validate()?;
    let weights = src.photon_weights();
    let per_photon: Vec<SignalTable> = (0..weights.len())
        .map(|n| conditional_table(src, ch, proto.p_z, n))
        .collect();
    let mut table = [[0.0; 5]; 4];
    for (n, &w) in weights.iter().enumerate() {
        for x in 0..4 {
            for y in 0..5 {
                table[x][y] += src.signal_probs[x] * w * per_photon[n][x][y];
            }
        }
    }
    Ok(ExpectedFrequencies {
        p_z: proto.p_z,
        signal_probs: src.signal_probs,
        table,
        per_photon,
        photon_weights: weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ProtocolKind;
    use approx::assert_abs_diff_eq;

    fn bb84() -> ProtocolSpec {
        ProtocolSpec::new(ProtocolKind::Bb84)
    }

    #[test]
    fn transmittance_closed_forms() {
        assert_eq!(transmittance(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(transmittance(10.0).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(transmittance(3.0).unwrap(), 0.501187233627272, epsilon = 1e-12);
        assert!(transmittance(-1.0).is_err());
    }

    #[test]
    fn thinning_and_binomial_loss() {
        let w = thinned_photon_distribution(0.5, 0.1, 3).unwrap();
        assert_abs_diff_eq!(w[1], 0.05 * (-0.05f64).exp(), epsilon = 1e-15);
        let w0 = thinned_photon_distribution(0.5, 0.0, 3).unwrap();
        assert_eq!(w0[0], 1.0);
        let l = conditional_loss(2, 0.4).unwrap();
        for (a, b) in l.iter().zip([0.36, 0.48, 0.16]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(conditional_loss(3, 1.0).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn single_photon_error_rates() {
        let src = SourceConfig::new(0.1, 1, 0.5).unwrap();
        for v in [1.0, 0.9, 0.6] {
            let ch = ChannelScenario::new(0.0, 0.0, v).unwrap();
            let f = expected_frequencies(&src, &ch, &bb84()).unwrap();
            assert_abs_diff_eq!(f.conditional_error_rate(1, Basis::Z), (1.0 - v) / 2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(f.conditional_error_rate(1, Basis::X), (1.0 - v) / 2.0, epsilon = 1e-14);
        }
        let ch = ChannelScenario::new(0.0, std::f64::consts::PI / 8.0, 1.0).unwrap();
        let f = expected_frequencies(&src, &ch, &bb84()).unwrap();
        let want = (std::f64::consts::PI / 8.0).sin().powi(2);
        assert_abs_diff_eq!(f.conditional_error_rate(1, Basis::Z), want, epsilon = 1e-14);
    }

    #[test]
    fn table_is_normalized_and_serializes() {
        let src = SourceConfig::new(0.4, 3, 0.5).unwrap();
        let ch = ChannelScenario::new(7.0, 0.05, 0.97).unwrap();
        let f = expected_frequencies(&src, &ch, &ProtocolSpec::new(ProtocolKind::Sarg04)).unwrap();
        assert_abs_diff_eq!(f.joint().unwrap().total(), 1.0, epsilon = 1e-14);
        let csv = f.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("H_Z_H,H_Z_V,H_X_D,H_X_A,H_any_none,V_Z_H"));
        let first: f64 = lines.next().unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, f.table[0][0]);
    }
}
