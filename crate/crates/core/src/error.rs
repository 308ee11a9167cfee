use thiserror::Error;

/// Errors raised by the key-rate engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("distribution is not normalized (total {total})")]
    Unnormalized { total: f64 },

    #[error("constraint set is infeasible (residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing register `{0}`")]
    MissingRegister(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_domain(
    name: &'static str,
    value: f64,
    ok: bool,
    domain: &'static str,
) -> Result<()> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain,
        })
    }
}

pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<()> {
    check_domain(name, p, (0.0..=1.0).contains(&p), "[0, 1]")
}
