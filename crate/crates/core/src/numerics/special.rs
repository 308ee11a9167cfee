//! Scalar special functions: Poisson weights, binary entropy, and the
//! regularized incomplete beta function with its inverse.

use statrs::function::gamma::ln_gamma;

use crate::error::{check_domain, check_probability, Result};

/// `e^{-μ} μⁿ / n!`, evaluated in log space.
pub fn poisson_pmf(mu: f64, n: u32) -> Result<f64> {
    check_domain("mu", mu, mu >= 0.0 && mu.is_finite(), "[0, inf)")?;
    if mu == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let n = f64::from(n);
    Ok((-mu + n * mu.ln() - ln_gamma(n + 1.0)).exp())
}

/// `h(p) = -p log₂ p - (1-p) log₂(1-p)` with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_probability("p", p)?;
    Ok(xlog2x_neg(p) + xlog2x_neg(1.0 - p))
}

#[inline]
fn xlog2x_neg(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Remainder of Stirling's series for `ln Γ(x)`, valid for `x ≥ 8`.
fn stirling_tail(x: f64) -> f64 {
    let x2 = x * x;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x
}

/// `ln(1+t) - t`, accurate for small `t`.
fn log1pmx(t: f64) -> f64 {
    if t.abs() < 1e-2 {
        // alternating series -t²/2 + t³/3 - ...
        let mut term = t;
        let mut acc = 0.0;
        for k in 2..30 {
            term *= -t;
            acc += term / k as f64;
            if term.abs() < 1e-18 {
                break;
            }
        }
        acc
    } else {
        t.ln_1p() - t
    }
}

/// `ln[x^a (1-x)^b / B(a,b)]`.
///
/// Large shapes go through a Stirling form centred at the mean `a/(a+b)`
/// so the leading terms cancel analytically instead of numerically.
fn ln_beta_kernel(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if a >= 8.0 && b >= 8.0 {
        let s = a + b;
        let p = a / s;
        let q = b / s;
        // a ln(x/p) + b ln((1-x)/q) with t = (x-p)/p, u = (q-(1-x))/q = (x-p)/q
        let d = if x <= 0.5 { x - p } else { q - y };
        let main = a * log1pmx(d / p) + b * log1pmx(-d / q);
        let corr = stirling_tail(a) + stirling_tail(b) - stirling_tail(s);
        main + 0.5 * (a * b / s).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - corr
    } else {
        ln_inv_beta(a, b) + a * ln_complement(x, y) + b * ln_complement(y, x)
    }
}

/// `ln x` where `y = 1 - x`, taken from the smaller of the two.
fn ln_complement(x: f64, y: f64) -> f64 {
    if x > 0.5 {
        (-y).ln_1p()
    } else {
        x.ln()
    }
}

/// `ln Γ(a+b) - ln Γ(a) - ln Γ(b)`.
///
/// With one large shape the difference `ln Γ(l+s) - ln Γ(l)` is taken from
/// Stirling's series so that the two huge log-gammas never cancel numerically.
fn ln_inv_beta(a: f64, b: f64) -> f64 {
    let (s, l) = if a <= b { (a, b) } else { (b, a) };
    if l >= 8.0 {
        let ratio = (l + s - 0.5) * (s / l).ln_1p() + s * l.ln() - s + stirling_tail(l + s) - stirling_tail(l);
        ratio - ln_gamma(s)
    } else {
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64, y: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let max_iter = 1000 + (20.0 * (a.max(b)).sqrt()) as usize;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    // 1 - (a+b)x/(a+1), rewritten through y = 1-x when x is close to one
    let mut d = if x > 0.5 { (1.0 - b + qab * y) / qap } else { 1.0 - qab * x / qap };
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    check_domain("a", a, a > 0.0 && a.is_finite(), "(0, inf)")?;
    check_domain("b", b, b > 0.0 && b.is_finite(), "(0, inf)")?;
    check_probability("x", x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    Ok(reg_inc_beta_inner(x, a, b))
}

fn reg_inc_beta_inner(x: f64, a: f64, b: f64) -> f64 {
    let y = 1.0 - x;
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_beta_kernel(a, b, x, y)).exp() * beta_cf(a, b, x, y) / a
    } else {
        1.0 - (ln_beta_kernel(b, a, y, x)).exp() * beta_cf(b, a, y, x) / b
    }
}

/// Beta density `x^{a-1}(1-x)^{b-1}/B(a,b)`.
fn beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    (ln_beta_kernel(a, b, x, 1.0 - x)).exp() / (x * (1.0 - x))
}

/// `p`-quantile of the Beta(a, b) distribution: the `x` with `I_x(a,b) = p`.
///
/// Safeguarded Newton iteration on [`reg_inc_beta`]; whenever a Newton step
/// leaves the current bracket the step falls back to bisection.
pub fn beta_quantile(p: f64, a: f64, b: f64) -> Result<f64> {
    check_domain("a", a, a > 0.0 && a.is_finite(), "(0, inf)")?;
    check_domain("b", b, b > 0.0 && b.is_finite(), "(0, inf)")?;
    check_domain("p", p, p > 0.0 && p < 1.0, "(0, 1)")?;

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = initial_guess(p, a, b).clamp(1e-300, 1.0 - 1e-16);
    let mut best = (f64::INFINITY, x);
    for _ in 0..400 {
        let f = reg_inc_beta_inner(x, a, b) - p;
        if f.abs() < best.0 {
            best = (f.abs(), x);
        }
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // stop once no float lies strictly inside the bracket
        if next_up(lo) >= hi {
            break;
        }
        let pdf = beta_pdf(x, a, b);
        let mut next = if pdf > 0.0 && pdf.is_finite() { x - f / pdf } else { f64::NAN };
        if !(next > lo && next < hi) {
            // shrink geometrically toward an open end so deep tails are reached fast
            next = if lo == 0.0 {
                hi * 0.0625
            } else if hi == 1.0 {
                1.0 - (1.0 - lo) * 0.0625
            } else {
                0.5 * (lo + hi)
            };
            if !(next > lo && next < hi) {
                next = next_up(lo);
            }
        }
        x = next;
    }
    Ok(best.1)
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

/// Upper-tail quantile: the `x` with `1 - I_x(a,b) = q`.
///
/// Evaluated through the mirrored distribution so that `q` close to zero
/// keeps full relative precision.
pub fn beta_quantile_upper(q: f64, a: f64, b: f64) -> Result<f64> {
    Ok(1.0 - beta_quantile(q, b, a)?)
}

/// Normal approximation of the quantile, used only to seed Newton.
fn initial_guess(p: f64, a: f64, b: f64) -> f64 {
    let mean = a / (a + b);
    let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
    let z = normal_quantile(p);
    let g = mean + z * var.sqrt();
    if g > 0.0 && g < 1.0 {
        g
    } else {
        mean
    }
}

/// Acklam's rational approximation to the standard normal quantile (|rel err| < 1.2e-9).
fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let plow = 0.02425;
    if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}
