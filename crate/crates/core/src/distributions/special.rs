//! Thin wrappers over `statrs` special functions plus a bracketing root finder
//! used to invert distribution functions without a closed-form quantile.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use statrs::function::{beta, erf, gamma};

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    beta::ln_beta(a, b)
}

/// Standard normal distribution function.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(q: f64) -> f64 {
    let z = -SQRT_2 * erf::erfc_inv(2.0 * q);
    // One Halley step on the forward function tightens erfc_inv's last digits.
    let e = norm_cdf(z) - q;
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if pdf > 0.0 && e.is_finite() {
        let u = e / pdf;
        z - u / (1.0 + 0.5 * z * u)
    } else {
        z
    }
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma::gamma_lr(a, x)
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma::gamma_ur(a, x)
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta::beta_reg(a, b, x)
    }
}

/// Finds `x` in `[lo, hi]` with `f(x) = 0` for a nondecreasing `f` where
/// `f(lo) <= 0 <= f(hi)`. Brent's method with a bisection safeguard.
pub fn brent_increasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    let mut c = lo;
    let mut fc = flo;
    let mut d = hi - lo;
    let mut e = d;
    // Brent keeps the best estimate in `hi` and the opposite sign point in `c`.
    let (mut a, mut fa) = (lo, flo);
    let (mut b, mut fb) = (hi, fhi);
    for _ in 0..300 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * rel_tol * (1.0 + b.abs());
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    // Fall back to plain bisection on the original bracket.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= rel_tol * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Inverts a nondecreasing distribution function on `[lower, upper]`
/// (either end may be infinite), starting the bracket search at `guess`.
pub fn invert_cdf<F: Fn(f64) -> f64>(cdf: F, q: f64, lower: f64, upper: f64, guess: f64) -> f64 {
    let g = |x: f64| cdf(x) - q;
    let start = if guess.is_finite() {
        guess.clamp(
            if lower.is_finite() { lower } else { f64::MIN },
            if upper.is_finite() { upper } else { f64::MAX },
        )
    } else if lower.is_finite() && upper.is_finite() {
        0.5 * (lower + upper)
    } else if lower.is_finite() {
        lower + 1.0
    } else if upper.is_finite() {
        upper - 1.0
    } else {
        0.0
    };
    let (mut lo, mut hi);
    if g(start) < 0.0 {
        lo = start;
        hi = if upper.is_finite() { upper } else { start };
        if !upper.is_finite() {
            let mut step = 1.0_f64.max(start.abs());
            hi = start + step;
            while g(hi) < 0.0 {
                lo = hi;
                step *= 2.0;
                hi += step;
                if !hi.is_finite() {
                    return f64::MAX;
                }
            }
        }
    } else {
        hi = start;
        lo = if lower.is_finite() { lower } else { start };
        if !lower.is_finite() {
            let mut step = 1.0_f64.max(start.abs());
            lo = start - step;
            while g(lo) >= 0.0 {
                hi = lo;
                step *= 2.0;
                lo -= step;
                if !lo.is_finite() {
                    return f64::MIN;
                }
            }
        }
    }
    brent_increasing(g, lo, hi, 1e-14)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_reference_values() {
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 1e-11);
        assert!((norm_cdf(-3.090232306167813) - 0.001).abs() < 1e-13);
        assert!((norm_quantile(0.975) - 1.959963984540054).abs() < 1e-10);
        assert!((norm_quantile(0.75) - 0.6744897501960817).abs() < 1e-10);
        assert!((norm_quantile(1e-10) + 6.361340902404056).abs() < 1e-9);
    }

    #[test]
    fn incomplete_gamma_reference_values() {
        // P(1, x) = 1 - e^{-x}
        assert!((gamma_p(1.0, 1.5) - (1.0 - (-1.5f64).exp())).abs() < 1e-14);
        // chi-square(1) at 3.841458820694124 is 0.95
        assert!((gamma_p(0.5, 3.841458820694124 / 2.0) - 0.95).abs() < 1e-12);
        assert!((gamma_p(2.5, 3.0) + gamma_q(2.5, 3.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn incomplete_beta_reference_values() {
        // I_x(1, b) = 1 - (1-x)^b
        assert!((beta_reg(1.0, 3.0, 0.2) - (1.0 - 0.8f64.powi(3))).abs() < 1e-14);
        // symmetric: I_0.5(a, a) = 0.5
        assert!((beta_reg(2.5, 2.5, 0.5) - 0.5).abs() < 1e-14);
        // I_0.3(2, 4) = 0.83193 (1 - sum_{j<2} C(5,j) .3^j .7^{5-j})
        let exact = 1.0 - 0.7f64.powi(5) - 5.0 * 0.3 * 0.7f64.powi(4);
        assert!((beta_reg(2.0, 4.0, 0.3) - exact).abs() < 1e-13);
    }

    #[test]
    fn invert_on_unbounded_support() {
        let x = invert_cdf(norm_cdf, 0.9, f64::NEG_INFINITY, f64::INFINITY, 0.0);
        assert!((norm_cdf(x) - 0.9).abs() < 1e-14);
        let x = invert_cdf(norm_cdf, 1e-12, f64::NEG_INFINITY, f64::INFINITY, 5.0);
        assert!(((norm_cdf(x) - 1e-12) / 1e-12).abs() < 1e-8);
    }
}
