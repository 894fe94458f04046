//! Small numerical kernels shared across modules: reproducible summation,
//! scalar root finding and minimization, least-squares lines.

/// Leaf size for pairwise summation. Fixed so that the reduction tree only
/// depends on the length of the input.
const PAIRWISE_LEAF: usize = 64;

/// Pairwise (tree) summation. The association order depends only on `xs.len()`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_LEAF {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = split_point(xs.len());
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

// Split at a multiple of the leaf size so chunk boundaries are stable.
fn split_point(len: usize) -> usize {
    let leaves = len.div_ceil(PAIRWISE_LEAF);
    (leaves / 2).max(1) * PAIRWISE_LEAF
}

/// log Σ exp(a_i) with the maximum factored out and a pairwise inner sum.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let shifted: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    m + pairwise_sum(&shifted).ln()
}

/// Mapped log-sum-exp without materializing the argument vector twice.
pub fn log_sum_exp_by<F: Fn(f64) -> f64>(xs: &[f64], f: F) -> f64 {
    let mapped: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    log_sum_exp(&mapped)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

/// Brent's method on a sign-changing bracket `[a, b]`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Option<Root> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(Root { x: a, lo: a, hi: a, iterations: 0 });
    }
    if fb == 0.0 {
        return Some(Root { x: b, lo: b, hi: b, iterations: 0 });
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for it in 0..max_iter {
        if fb.signum() == fc.signum() {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            let (lo, hi) = if b < c { (b, c) } else { (c, b) };
            return Some(Root { x: b, lo, hi, iterations: it });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    let (lo, hi) = if b < c { (b, c) } else { (c, b) };
    Some(Root { x: b, lo, hi, iterations: max_iter })
}

/// Golden-section search for a minimum of a unimodal function on `[a, b]`.
/// Returns `(argmin, min)`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if (b - a).abs() <= xtol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Aitken Δ² extrapolation of the last three terms of a sequence.
/// Returns `None` when the sequence is not geometrically contracting.
pub fn aitken(x0: f64, x1: f64, x2: f64) -> Option<f64> {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let denom = d2 - d1;
    let scale = x0.abs().max(x1.abs()).max(x2.abs()).max(1e-300);
    if denom.abs() <= 1e-14 * scale {
        return None;
    }
    if d1 == 0.0 || (d2 / d1).abs() >= 1.0 {
        return None;
    }
    Some(x2 - d2 * d2 / denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(LineFit { slope, intercept, r2 })
}

/// `acosh` with the argument clamped to the domain.
#[inline]
pub fn acosh_clamped(x: f64) -> f64 {
    if x <= 1.0 {
        0.0
    } else {
        x.acosh()
    }
}

/// ln cosh(x) without overflow.
#[inline]
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Inverse of `ln_cosh` on `[0, ∞)`.
#[inline]
pub fn ln_cosh_inv(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y > 20.0 {
        // cosh x = e^y, x = y + ln 2 + ln((1 + sqrt(1 - e^{-2y}))/2)
        let e = (-2.0 * y).exp();
        return y + std::f64::consts::LN_2 + ((1.0 + (1.0 - e).sqrt()) * 0.5).ln();
    }
    acosh1p(y.exp_m1())
}

/// acosh(1 + z) for z ≥ 0, accurate for small z.
#[inline]
pub fn acosh1p(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    (z + (z * (z + 2.0)).sqrt()).ln_1p()
}
