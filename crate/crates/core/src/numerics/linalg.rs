//! Dense matrices over labelled tensor-product registers.
//!
//! Every routine is generic over the scalar so the same code serves complex
//! density operators and the real-symmetric fast path used by the solver.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex double-precision matrix, row/column indexed in register order.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Scalars the linear-algebra layer works with (`f64` and `Complex64`).
pub trait Scalar: ComplexField<RealField = f64> + Copy {}
impl Scalar for f64 {}
impl Scalar for Complex64 {}

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues below `-PSD_TOL` are treated as a positivity violation.
pub const PSD_TOL: f64 = 1e-10;

/// Ordered list of `(label, dimension)` pairs describing a tensor product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterShape {
    registers: Vec<(String, usize)>,
}

impl RegisterShape {
    pub fn new<S: Into<String>>(registers: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let registers: Vec<(String, usize)> = registers
            .into_iter()
            .map(|(label, dim)| (label.into(), dim))
            .collect();
        for (i, (label, dim)) in registers.iter().enumerate() {
            if *dim == 0 {
                return Err(Error::Dimension(format!("register `{label}` has dimension 0")));
            }
            if registers[..i].iter().any(|(other, _)| other == label) {
                return Err(Error::Dimension(format!("duplicate register label `{label}`")));
            }
        }
        Ok(Self { registers })
    }

    pub fn dim(&self) -> usize {
        self.registers.iter().map(|(_, d)| d).product()
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.registers.iter().map(|(l, _)| l.as_str())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.registers.iter().map(|(_, d)| *d).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.registers.iter().position(|(l, _)| l == label)
    }

    pub fn dim_of(&self, label: &str) -> Option<usize> {
        self.index_of(label).map(|i| self.registers[i].1)
    }

    /// Shape restricted to the given labels, keeping the original order.
    pub fn restrict(&self, keep: &[&str]) -> Result<Self> {
        for label in keep {
            if self.index_of(label).is_none() {
                return Err(Error::MissingRegister((*label).to_string()));
            }
        }
        Ok(Self {
            registers: self
                .registers
                .iter()
                .filter(|(l, _)| keep.contains(&l.as_str()))
                .cloned()
                .collect(),
        })
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

/// Conjugate transpose.
pub fn dagger<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    m.adjoint()
}

/// `max |m_ij - conj(m_ji)|`.
pub fn hermitian_deviation<T: Scalar>(m: &DMatrix<T>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conjugate()).modulus());
        }
    }
    dev
}

pub fn max_abs<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.modulus()))
}

fn require_square<T: Scalar>(m: &DMatrix<T>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Rejects matrices that are not Hermitian up to [`HERMITIAN_TOL`] relative to their largest entry.
pub fn require_hermitian<T: Scalar>(m: &DMatrix<T>) -> Result<()> {
    require_square(m)?;
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL * max_abs(m).max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(())
}

/// `(m + m†) / 2`.
pub fn hermitian_part<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let half = T::from_real(0.5);
    (m + m.adjoint()) * half
}

/// Real trace `Re Tr(m)`.
pub fn trace_re<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.diagonal().iter().map(|v| v.real()).sum()
}

/// `Re Tr(a b)` without forming the product.
pub fn trace_product_re<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).real();
        }
    }
    acc
}

/// Partial trace keeping the registers named in `keep` (in shape order).
pub fn partial_trace<T: Scalar>(m: &DMatrix<T>, shape: &RegisterShape, keep: &[&str]) -> Result<DMatrix<T>> {
    require_square(m)?;
    if m.nrows() != shape.dim() {
        return Err(Error::Dimension(format!(
            "matrix dimension {} does not match register shape dimension {}",
            m.nrows(),
            shape.dim()
        )));
    }
    let kept_shape = shape.restrict(keep)?;
    let dims = shape.dims();
    let n = dims.len();
    let kept: Vec<bool> = shape.labels().map(|l| keep.contains(&l)).collect();

    // Row-major strides of the full register layout.
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }

    let kept_axes: Vec<usize> = (0..n).filter(|&i| kept[i]).collect();
    let traced_axes: Vec<usize> = (0..n).filter(|&i| !kept[i]).collect();
    let offsets = |axes: &[usize]| -> Vec<usize> {
        let total: usize = axes.iter().map(|&a| dims[a]).product();
        let mut out = Vec::with_capacity(total);
        let mut digits = vec![0usize; axes.len()];
        for _ in 0..total {
            out.push(axes.iter().zip(&digits).map(|(&a, &d)| d * strides[a]).sum());
            for pos in (0..axes.len()).rev() {
                digits[pos] += 1;
                if digits[pos] < dims[axes[pos]] {
                    break;
                }
                digits[pos] = 0;
            }
        }
        out
    };
    let kept_off = offsets(&kept_axes);
    let traced_off = offsets(&traced_axes);

    let dk = kept_shape.dim();
    let mut out = DMatrix::<T>::zeros(dk, dk);
    for (r, &ro) in kept_off.iter().enumerate() {
        for (c, &co) in kept_off.iter().enumerate() {
            let mut acc = T::zero();
            for &t in &traced_off {
                acc += m[(ro + t, co + t)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct HermEig<T: Scalar> {
    pub values: DVector<f64>,
    pub vectors: DMatrix<T>,
}

impl<T: Scalar> HermEig<T> {
    /// `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<T> {
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = T::from_real(f(lam));
            scaled.column_mut(j).iter_mut().for_each(|v| *v *= s);
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Hermitian eigen-decomposition `m = V diag(λ) V†` (ascending λ).
pub fn herm_eig<T: Scalar>(m: &DMatrix<T>) -> Result<HermEig<T>> {
    require_hermitian(m)?;
    Ok(herm_eig_unchecked(m))
}

pub(crate) fn herm_eig_unchecked<T: Scalar>(m: &DMatrix<T>) -> HermEig<T> {
    let n = m.nrows();
    if n == 0 {
        return HermEig {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::<T>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermEig { values, vectors }
}

/// Regularized eigenvalue `(1 - eps) λ + eps / d` with tiny negative round-off clipped.
#[inline]
pub(crate) fn perturb(lambda: f64, eps: f64, d: usize) -> f64 {
    (1.0 - eps) * lambda.max(0.0) + eps / d as f64
}

/// `log₂((1 - eps) ρ + eps I/d)` computed in the eigenbasis of `rho`.
pub fn perturbed_log<T: Scalar>(rho: &DMatrix<T>, eps: f64) -> Result<DMatrix<T>> {
    let eig = herm_eig(rho)?;
    if eig.min_value() < -PSD_TOL {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min_value(),
        });
    }
    let d = rho.nrows();
    if eps <= 0.0 && eig.min_value() <= 0.0 {
        return Err(Error::Domain {
            name: "eps",
            value: eps,
            domain: "(0, 1) for rank-deficient input",
        });
    }
    Ok(eig.map(|l| perturb(l, eps, d).log2()))
}

/// Quantum relative entropy `D(ρ‖σ) = Tr ρ (log₂ρ − log₂σ)` in bits, both logs perturbed by `eps`.
pub fn rel_entropy<T: Scalar>(rho: &DMatrix<T>, sigma: &DMatrix<T>, eps: f64) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::Dimension(format!(
            "relative entropy of {:?} against {:?}",
            rho.shape(),
            sigma.shape()
        )));
    }
    let er = herm_eig(rho)?;
    let es = herm_eig(sigma)?;
    for e in [&er, &es] {
        if e.min_value() < -PSD_TOL {
            return Err(Error::NotPsd {
                min_eigenvalue: e.min_value(),
            });
        }
    }
    let d = rho.nrows();
    let self_term: f64 = er
        .values
        .iter()
        .map(|&l| {
            let l = l.max(0.0);
            if l == 0.0 {
                0.0
            } else {
                l * perturb(l, eps, d).log2()
            }
        })
        .sum();
    // Tr ρ log σ = Σ_j log μ_j ⟨v_j|ρ|v_j⟩
    let rho_in_sigma = es.vectors.adjoint() * rho * &es.vectors;
    let cross: f64 = es
        .values
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let w = rho_in_sigma[(j, j)].real();
            if w.abs() == 0.0 {
                0.0
            } else {
                w * perturb(l, eps, d).log2()
            }
        })
        .sum();
    Ok(self_term - cross)
}

/// Von Neumann entropy in bits of an unnormalized PSD spectrum (`-Σ λ log₂ λ`).
pub fn spectrum_entropy(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.log2())
        .sum()
}

/// Identity matrix.
pub fn eye<T: Scalar>(n: usize) -> DMatrix<T> {
    DMatrix::identity(n, n)
}

/// Outer product `|u⟩⟨v|`.
pub fn outer<T: Scalar>(u: &DVector<T>, v: &DVector<T>) -> DMatrix<T> {
    u * v.adjoint()
}

/// Computational basis vector `|i⟩` in dimension `d`.
pub fn basis<T: Scalar>(d: usize, i: usize) -> DVector<T> {
    let mut v = DVector::zeros(d);
    v[i] = T::one();
    v
}

/// Real-to-complex embedding.
pub fn to_complex(m: &DMatrix<f64>) -> ComplexMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2: ComplexMatrix = eye(2);
        assert_eq!(kron(&i2, &i2), eye::<Complex64>(4));
    }

    #[test]
    fn kron_of_projectors() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(0.0)]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0), c(1.0)]));
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0), c(1.0), c(0.0), c(0.0)]));
        assert_eq!(kron(&a, &b), want);
    }

    #[test]
    fn register_shape_rejects_duplicates_and_zero_dims() {
        assert!(RegisterShape::new([("A", 2), ("A", 3)]).is_err());
        assert!(RegisterShape::new([("A", 0)]).is_err());
        let s = RegisterShape::new([("AS", 5), ("A", 4), ("B", 3)]).unwrap();
        assert_eq!(s.dim(), 60);
        assert_eq!(s.dim_of("B"), Some(3));
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let s = 1.0 / 2f64.sqrt();
        let phi = DVector::from_vec(vec![c(s), c(0.0), c(0.0), c(s)]);
        let rho = outer(&phi, &phi);
        let shape = RegisterShape::new([("A", 2), ("B", 2)]).unwrap();
        let red = partial_trace(&rho, &shape, &["A"]).unwrap();
        assert_abs_diff_eq!((red - eye::<Complex64>(2) * c(0.5)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn partial_trace_rejects_shape_mismatch() {
        let shape = RegisterShape::new([("A", 2), ("B", 3)]).unwrap();
        let m: ComplexMatrix = eye(5);
        assert!(matches!(partial_trace(&m, &shape, &["A"]), Err(Error::Dimension(_))));
        let m: ComplexMatrix = eye(6);
        assert!(matches!(partial_trace(&m, &shape, &["C"]), Err(Error::MissingRegister(_))));
    }

    #[test]
    fn eig_of_diagonal_is_sorted() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = herm_eig(&m).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn eig_of_pauli_x() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = herm_eig(&m).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(herm_eig(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn log_of_maximally_mixed() {
        let d = 4;
        let rho: ComplexMatrix = eye::<Complex64>(d) * c(1.0 / d as f64);
        let l = perturbed_log(&rho, 0.0).unwrap();
        assert_abs_diff_eq!((l + eye::<Complex64>(d) * c(2.0)).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn log_of_pure_state_has_top_eigenvalue_near_zero() {
        let v = DVector::from_vec(vec![c(0.6), c(0.8), c(0.0)]);
        let l = perturbed_log(&outer(&v, &v), 1e-14).unwrap();
        let e = herm_eig(&l).unwrap();
        let want = (1.0 - 1e-14 + 1e-14 / 3.0f64).log2();
        assert_abs_diff_eq!(e.values[2], want, epsilon = 1e-12);
    }

    #[test]
    fn log_rejects_negative_spectrum() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-6]));
        assert!(matches!(perturbed_log(&m, 1e-12), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn relative_entropy_closed_forms() {
        let zero = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(0.0)]));
        let mixed: ComplexMatrix = eye::<Complex64>(2) * c(0.5);
        assert_abs_diff_eq!(rel_entropy(&zero, &mixed, 1e-12).unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(rel_entropy(&mixed, &mixed, 1e-12).unwrap(), 0.0, epsilon = 1e-12);
        let three: ComplexMatrix = eye(3);
        assert!(matches!(rel_entropy(&mixed, &three, 1e-12), Err(Error::Dimension(_))));
    }
}
