//! Shared numerics: Gauss–Legendre quadrature, normal distribution helpers,
//! the studentized range distribution (CDF by double numerical integration,
//! quantile by bisection) and Welch-style mean-difference intervals.

use crate::error::{Error, Result};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

/// Two-sided 95% standard-normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Standard normal density.
pub fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th root (descending order).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // p_n(x) and derivative via the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre integral of `f` over [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            acc += w * f(mid + half * x);
        }
        total += acc * half;
    }
    total
}

/// CDF of the range of k iid standard normals:
/// P(W ≤ x) = k ∫ φ(u) [Φ(u) − Φ(u−x)]^{k−1} du.
fn normal_range_cdf(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let km1 = (k - 1) as f64;
    let v = integrate(
        |u| phi(u) * (norm_cdf(u) - norm_cdf(u - x)).powf(km1),
        -9.0,
        9.0,
        18,
        24,
    );
    (k as f64 * v).clamp(0.0, 1.0)
}

/// ln of the density of S = sqrt(χ²_ν / ν) at s.
fn ln_chi_scaled_pdf(s: f64, df: f64) -> f64 {
    let h = 0.5 * df;
    std::f64::consts::LN_2.mul_add(1.0 - h, h * df.ln()) + (df - 1.0) * s.ln()
        - 0.5 * df * s * s
        - ln_gamma(h)
}

/// CDF of the studentized range with `k` groups and `df` degrees of freedom:
/// F(q) = ∫ f_S(s) · P(W ≤ q·s) ds.
pub fn studentized_range_cdf(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2, "studentized range needs k >= 2");
    assert!(df > 0.0);
    if q <= 0.0 {
        return 0.0;
    }
    // S concentrates at 1 with sd ≈ 1/sqrt(2 df); pad generously.
    let c = 12.0 / (2.0 * df).sqrt();
    let lo = (1.0 - c).max(0.0);
    let hi = 1.0 + c;
    let v = integrate(
        |s| {
            if s <= 0.0 {
                return 0.0;
            }
            ln_chi_scaled_pdf(s, df).exp() * normal_range_cdf(q * s, k)
        },
        lo,
        hi,
        24,
        16,
    );
    v.clamp(0.0, 1.0)
}

/// Upper-tail probability of the studentized range.
pub fn studentized_range_sf(q: f64, k: usize, df: f64) -> f64 {
    (1.0 - studentized_range_cdf(q, k, df)).clamp(0.0, 1.0)
}

/// Quantile of the studentized range by bisection (monotone CDF); absolute
/// tolerance 1e-6 on q.
pub fn studentized_range_quantile(p: f64, k: usize, df: f64) -> f64 {
    assert!((0.0..1.0).contains(&p));
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    while studentized_range_cdf(hi, k, df) < p {
        hi *= 2.0;
        assert!(hi < 1e6, "quantile bracket blew up");
    }
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if studentized_range_cdf(mid, k, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction,
/// accurate to ~1e-14 relative (the library evaluator tops out near 1e-8).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_bt = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let bt = ln_bt.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * beta_cf(a, b, x) / a
    } else {
        1.0 - bt * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_IT: usize = 1000;
    const EPS: f64 = 3e-16;
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_IT {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Solve the small dense system A·x = b by Gaussian elimination with partial
/// pivoting; None when singular to working precision.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in (col + 1)..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// (sign, ln |det A|) by LU with partial pivoting; sign 0 when singular.
pub fn slogdet(mut a: Vec<Vec<f64>>) -> (f64, f64) {
    let n = a.len();
    let mut sign = 1.0f64;
    let mut ln_abs = 0.0f64;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if pivot != col {
            a.swap(col, pivot);
            sign = -sign;
        }
        let d = a[col][col];
        sign *= d.signum();
        ln_abs += d.abs().ln();
        for row in (col + 1)..n {
            let f = a[row][col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    (sign, ln_abs)
}

/// Mean and sample variance (ddof = 1; variance 0 for n < 2).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss / (n as f64 - 1.0))
}

/// Empirical quantile with linear interpolation (R type 7). `sorted` must be
/// ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Welch-style difference of means with a normal-approximation 95% interval:
/// (mean_a − mean_b, lo, hi).
pub fn welch_interval(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::degenerate("mean difference needs >= 2 values per group"));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let diff = ma - mb;
    let se = (va / a.len() as f64 + vb / b.len() as f64).sqrt();
    Ok((diff, diff - Z_95 * se, diff + Z_95 * se))
}
