//! Brute-force and closed-form reference implementations used only by tests.
//! None of them call into the library's numerics.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Binary entropy from `ln` and `ln_1p`, in bits.
pub fn h(q: f64) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        return 0.0;
    }
    -(q * q.ln() + (1.0 - q) * (-q).ln_1p()) / LN_2
}

/// Binary entropy by compensated summation of the series
/// `ln(1-q) = -Σ q^k / k`, used as a higher-precision cross-check for small `q`.
pub fn h_series(q: f64) -> f64 {
    assert!(q > 0.0 && q < 0.5);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut term = q;
    let mut k = 1.0;
    while term / k > 1e-22 {
        let y = term / k - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        term *= q;
        k += 1.0;
    }
    let ln_1mq = -sum;
    -(q * q.ln() + (1.0 - q) * ln_1mq) / LN_2
}

/// Single-photon BB84 key per sifted bit, `max(0, 1 − 2h(q))`.
pub fn shor_preskill(q: f64) -> f64 {
    (1.0 - 2.0 * h(q)).max(0.0)
}

/// Polarization angles of H, V, D, A.
pub const ANGLES: [f64; 4] = [0.0, FRAC_PI_2, FRAC_PI_4, -FRAC_PI_4];

fn born(a: f64, b: f64) -> f64 {
    (a - b).cos().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Bb84,
    Npab,
    Sarg04,
}

/// Sifting probability and error rate for an ideal lossless single-photon
/// qubit channel, by enumerating signals, announcements, Bob's basis and his
/// outcome.
pub fn enumerate_sift(kind: Kind, p_z: f64) -> (f64, f64) {
    let p_signal = |x: usize| if x < 2 { p_z / 2.0 } else { (1.0 - p_z) / 2.0 };
    let (mut kept, mut wrong) = (0.0, 0.0);
    for x in 0..4 {
        for bob_basis in 0..2 {
            let p_b = if bob_basis == 0 { p_z } else { 1.0 - p_z };
            for bit in 0..2 {
                let y = 2 * bob_basis + bit;
                let p = p_signal(x) * p_b * born(ANGLES[x], ANGLES[y]);
                if p == 0.0 {
                    continue;
                }
                match kind {
                    Kind::Bb84 => {
                        if bob_basis == x / 2 {
                            kept += p;
                            if bit != x % 2 {
                                wrong += p;
                            }
                        }
                    }
                    Kind::Npab => {
                        kept += p;
                        if bit != x % 2 {
                            wrong += p;
                        }
                    }
                    Kind::Sarg04 => {
                        // Alice announces {x, x'} with x' uniform over the other basis.
                        let others: Vec<usize> = if x < 2 { vec![2, 3] } else { vec![0, 1] };
                        for &o in &others {
                            let set = [x, o];
                            let excluded: Vec<usize> = set
                                .iter()
                                .copied()
                                .filter(|&s| born(ANGLES[s], ANGLES[y]) < 1e-12)
                                .collect();
                            if excluded.len() == 1 {
                                let guess = if excluded[0] == x { o } else { x };
                                kept += 0.5 * p;
                                if guess != x {
                                    wrong += 0.5 * p;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (kept, if kept > 0.0 { wrong / kept } else { 0.0 })
}

/// Threshold-detector statistics of `n` photons at `angle` after loss `eta`,
/// by enumerating the `3ⁿ` fates (lost, arm 0, arm 1) of each photon.
/// Returns `[no click, click0 only, click1 only, double]`.
pub fn enumerate_clicks(n: usize, eta: f64, angle: f64, basis_angle: f64) -> [f64; 4] {
    let p0 = born(angle, basis_angle);
    let fates = [1.0 - eta, eta * p0, eta * (1.0 - p0)];
    let mut out = [0.0; 4];
    for code in 0..3usize.pow(n as u32) {
        let (mut c, mut p, mut arm0, mut arm1) = (code, 1.0, false, false);
        for _ in 0..n {
            let f = c % 3;
            c /= 3;
            p *= fates[f];
            arm0 |= f == 1;
            arm1 |= f == 2;
        }
        let slot = match (arm0, arm1) {
            (false, false) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (true, true) => 3,
        };
        out[slot] += p;
    }
    out
}

/// Partial trace by explicit multi-index summation over a two-register
/// system `d0 × d1`; `keep` is 0 or 1.
pub fn partial_trace_2(m: &DMatrix<f64>, d0: usize, d1: usize, keep: usize) -> DMatrix<f64> {
    let d = if keep == 0 { d0 } else { d1 };
    let mut out = DMatrix::zeros(d, d);
    for i0 in 0..d0 {
        for j0 in 0..d0 {
            for i1 in 0..d1 {
                for j1 in 0..d1 {
                    let v = m[(i0 * d1 + i1, j0 * d1 + j1)];
                    if keep == 0 && i1 == j1 {
                        out[(i0, j0)] += v;
                    }
                    if keep == 1 && i0 == j0 {
                        out[(i1, j1)] += v;
                    }
                }
            }
        }
    }
    out
}

/// `f(M)` for a real symmetric `M` through its eigen-decomposition.
pub fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// `Tr ρ (log₂ ρ − log₂ σ)` from matrix logarithms of full-rank operators.
pub fn rel_entropy_eig(rho: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    let diff = sym_fn(rho, f64::log2) - sym_fn(sigma, f64::log2);
    (rho * diff).trace()
}

/// Random real symmetric PSD matrix of unit trace and full rank.
pub fn random_density(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let m = &g * g.transpose() + DMatrix::identity(d, d) * 0.05;
    let t = m.trace();
    m / t
}

pub fn random_symmetric(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    (&g + g.transpose()) * 0.5
}

/// Regularized incomplete beta by composite Simpson quadrature of the
/// density, normalized numerically, and its inverse by bisection.
pub struct QuadBeta {
    a: f64,
    b: f64,
    lo: f64,
    hi: f64,
    mode_log: f64,
    total: f64,
    panels: usize,
}

impl QuadBeta {
    /// Simpson's rule needs a smooth density at the ends of the support, so
    /// each shape is either exactly 1 or at least 2.
    pub fn new(a: f64, b: f64) -> Self {
        assert!([a, b].iter().all(|&s| s == 1.0 || s >= 2.0));
        let s = a + b;
        let mean = a / s;
        let sd = (a * b / (s * s * (s + 1.0))).sqrt();
        let lo = (mean - 60.0 * sd).max(0.0);
        let hi = (mean + 60.0 * sd).min(1.0);
        let mode = if a + b > 2.0 { (a - 1.0) / (s - 2.0) } else { 0.5 };
        let mut q = Self {
            a,
            b,
            lo,
            hi,
            mode_log: 0.0,
            total: 1.0,
            panels: 40_000,
        };
        q.mode_log = q.log_kernel(mode.clamp(1e-300, 1.0 - 1e-16));
        q.total = q.integral(lo, hi);
        q
    }

    fn log_kernel(&self, x: f64) -> f64 {
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p()
    }

    fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return if self.a == 1.0 { (-self.mode_log).exp() } else { 0.0 };
        }
        if x >= 1.0 {
            return if self.b == 1.0 { (-self.mode_log).exp() } else { 0.0 };
        }
        (self.log_kernel(x) - self.mode_log).exp()
    }

    fn integral(&self, from: f64, to: f64) -> f64 {
        if to <= from {
            return 0.0;
        }
        let n = self.panels;
        let step = (to - from) / n as f64;
        let mut acc = self.density(from) + self.density(to);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.density(from + i as f64 * step);
        }
        acc * step / 3.0
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.integral(self.lo, x.clamp(self.lo, self.hi)) / self.total
    }

    /// Upper-tail probability, integrated directly so tiny tails keep
    /// their relative accuracy.
    pub fn sf(&self, x: f64) -> f64 {
        self.integral(x.clamp(self.lo, self.hi), self.hi) / self.total
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.bisect(|x| self.cdf(x) < p)
    }

    /// `x` with upper-tail probability `q`.
    pub fn quantile_upper(&self, q: f64) -> f64 {
        self.bisect(|x| self.sf(x) > q)
    }

    /// Boundary of the region where `below` holds, assumed to be `[lo, x)`.
    fn bisect(&self, below: impl Fn(f64) -> bool) -> f64 {
        let (mut l, mut r) = (self.lo, self.hi);
        for _ in 0..200 {
            let m = 0.5 * (l + r);
            if below(m) {
                l = m;
            } else {
                r = m;
            }
            if r - l < 1e-15 * r.max(1e-300) {
                break;
            }
        }
        0.5 * (l + r)
    }
}

/// `min Tr(C ρ)` over real 3×3 density matrices with `Tr(A ρ) = b`.
///
/// Extreme points of this set have rank one, so it suffices to search unit
/// vectors `v` with `vᵀAv = b`. The sphere is scanned on an azimuth grid; on
/// each meridian the constraint is solved by bracketing and bisection, and
/// the best azimuth is refined by a finer local scan.
pub fn grid_sdp_3x3(c: &DMatrix<f64>, a: &DMatrix<f64>, b: f64, resolution: usize) -> f64 {
    let on_meridian = |phi: f64| -> f64 {
        let v = |t: f64| DVector::from_vec(vec![t.sin() * phi.cos(), t.sin() * phi.sin(), t.cos()]);
        let g = |t: f64| {
            let x = v(t);
            (x.transpose() * a * &x)[(0, 0)] - b
        };
        let mut best = f64::INFINITY;
        let n = resolution;
        let mut prev_t = 0.0;
        let mut prev_g = g(0.0);
        for i in 1..=n {
            let t = std::f64::consts::PI * i as f64 / n as f64;
            let gt = g(t);
            if prev_g == 0.0 || prev_g.signum() != gt.signum() {
                let (mut l, mut r) = (prev_t, t);
                for _ in 0..80 {
                    let m = 0.5 * (l + r);
                    if g(m).signum() == g(l).signum() {
                        l = m;
                    } else {
                        r = m;
                    }
                }
                let x = v(0.5 * (l + r));
                best = best.min((x.transpose() * c * &x)[(0, 0)]);
            }
            prev_t = t;
            prev_g = gt;
        }
        best
    };
    let n = resolution;
    let step = std::f64::consts::PI / n as f64;
    let (mut best, mut best_phi) = (f64::INFINITY, 0.0);
    for i in 0..n {
        let phi = i as f64 * step;
        let v = on_meridian(phi);
        if v < best {
            best = v;
            best_phi = phi;
        }
    }
    for i in 0..=2 * n {
        let phi = best_phi - step + i as f64 * step / n as f64;
        best = best.min(on_meridian(phi));
    }
    best
}
