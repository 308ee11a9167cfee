//! Finite joint probability tables and the entropies computed from them.

use crate::error::{Error, Result};

use super::special::binary_entropy;

/// Declared normalization of a [`JointDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Entries sum to one.
    Full,
    /// Entries sum to at most one (e.g. a post-sifting table).
    Sub,
}

const NORM_TOL: f64 = 1e-12;

/// Probability table over a finite product alphabet, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    shape: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(shape: Vec<usize>, probs: Vec<f64>, norm: Normalization) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.is_empty() || len != probs.len() {
            return Err(Error::Dimension(format!(
                "table of {} entries does not fit shape {:?}",
                probs.len(),
                shape
            )));
        }
        if let Some(&bad) = probs.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::Domain {
                name: "probability",
                value: bad,
                domain: "[0, 1]",
            });
        }
        let total: f64 = probs.iter().sum();
        let ok = match norm {
            Normalization::Full => (total - 1.0).abs() <= NORM_TOL,
            Normalization::Sub => total <= 1.0 + NORM_TOL,
        };
        if !ok {
            return Err(Error::Unnormalized { total });
        }
        Ok(Self { shape, probs })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| {
                debug_assert!(i < d);
                acc * d + i
            })
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.probs[self.offset(index)]
    }

    /// Marginal over the listed axes (kept in the given order).
    pub fn marginal(&self, axes: &[usize]) -> Vec<f64> {
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let mut out = vec![0.0; out_shape.iter().product()];
        let mut idx = vec![0usize; self.shape.len()];
        for &p in &self.probs {
            let o = axes
                .iter()
                .fold(0, |acc, &a| acc * self.shape[a] + idx[a]);
            out[o] += p;
            for pos in (0..idx.len()).rev() {
                idx[pos] += 1;
                if idx[pos] < self.shape[pos] {
                    break;
                }
                idx[pos] = 0;
            }
        }
        out
    }

    /// Copy rescaled to unit total.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.total();
        if t <= 0.0 {
            return Err(Error::Unnormalized { total: t });
        }
        Ok(Self {
            shape: self.shape.clone(),
            probs: self.probs.iter().map(|p| p / t).collect(),
        })
    }
}

/// Conditional Shannon entropy `H(other axis | given axis)` in bits of a
/// normalized two-axis table.
pub fn cond_entropy(joint: &JointDistribution, given: usize) -> Result<f64> {
    if joint.shape.len() != 2 || given > 1 {
        return Err(Error::Dimension(format!(
            "conditional entropy needs a two-axis table and axis 0 or 1, got shape {:?} and axis {given}",
            joint.shape
        )));
    }
    let total = joint.total();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::Unnormalized { total });
    }
    let marg = joint.marginal(&[given]);
    let other = 1 - given;
    let mut h = 0.0;
    for (g, &pg) in marg.iter().enumerate() {
        if pg <= 0.0 {
            continue;
        }
        for o in 0..joint.shape[other] {
            let p = if given == 0 {
                joint.get(&[g, o])
            } else {
                joint.get(&[o, g])
            };
            if p > 0.0 {
                h -= p * (p / pg).log2();
            }
        }
    }
    Ok(h.max(0.0))
}

/// `H(X|Y)` for a binary symmetric channel with uniform input and flip `q`: `h(q)`.
pub fn bsc_cond_entropy(q: f64) -> Result<f64> {
    binary_entropy(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfectly_correlated_has_zero_entropy() {
        let j = JointDistribution::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5], Normalization::Full).unwrap();
        assert_abs_diff_eq!(cond_entropy(&j, 1).unwrap(), 0.0);
    }

    #[test]
    fn independent_uniform_bit_has_one_bit() {
        let j = JointDistribution::new(vec![2, 3], vec![0.1, 0.3, 0.1, 0.1, 0.3, 0.1], Normalization::Full).unwrap();
        assert_abs_diff_eq!(cond_entropy(&j, 1).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn binary_symmetric_matches_binary_entropy() {
        let q = 0.07;
        let j = JointDistribution::new(
            vec![2, 2],
            vec![0.5 * (1.0 - q), 0.5 * q, 0.5 * q, 0.5 * (1.0 - q)],
            Normalization::Full,
        )
        .unwrap();
        assert_abs_diff_eq!(cond_entropy(&j, 1).unwrap(), bsc_cond_entropy(q).unwrap(), epsilon = 1e-14);
        assert_abs_diff_eq!(cond_entropy(&j, 0).unwrap(), bsc_cond_entropy(q).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn rejects_unnormalized_and_bad_shapes() {
        assert!(matches!(
            JointDistribution::new(vec![2], vec![0.4, 0.4], Normalization::Full),
            Err(Error::Unnormalized { .. })
        ));
        let sub = JointDistribution::new(vec![2], vec![0.4, 0.4], Normalization::Sub).unwrap();
        assert!(matches!(cond_entropy(&sub, 0), Err(Error::Dimension(_))));
        let sub2 = JointDistribution::new(vec![1, 2], vec![0.4, 0.4], Normalization::Sub).unwrap();
        assert!(matches!(cond_entropy(&sub2, 0), Err(Error::Unnormalized { .. })));
        assert!(JointDistribution::new(vec![2], vec![1.2, -0.2], Normalization::Full).is_err());
    }

    #[test]
    fn marginal_sums_axes() {
        let j = JointDistribution::new(vec![2, 3], vec![0.1, 0.2, 0.3, 0.0, 0.25, 0.15], Normalization::Full).unwrap();
        let m = j.marginal(&[1]);
        assert_abs_diff_eq!(m[0], 0.1);
        assert_abs_diff_eq!(m[1], 0.45);
        assert_abs_diff_eq!(m[2], 0.45);
    }
}
