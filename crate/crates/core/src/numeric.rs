//! Small numerical kernels shared by the moment and condition code.

/// Error-free sum of two doubles (Knuth's TwoSum).
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Double-double accumulator. Used for the cumulative log-means, where an
/// absolute drift of a few ulps per step compounds into the exponential
/// weights of the variance series.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    pub fn add_f64(self, x: f64) -> Self {
        if !x.is_finite() || !self.hi.is_finite() {
            return Self { hi: self.hi + x, lo: 0.0 };
        }
        let (s, e) = two_sum(self.hi, x);
        let e = e + self.lo;
        let (hi, lo) = two_sum(s, e);
        Self { hi, lo }
    }

    pub fn sub(self, other: Self) -> Self {
        if !self.hi.is_finite() || !other.hi.is_finite() {
            return Self { hi: self.hi - other.hi, lo: 0.0 };
        }
        let (s, e) = two_sum(self.hi, -other.hi);
        let e = e + (self.lo - other.lo);
        let (hi, lo) = two_sum(s, e);
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

// B_{2j} / (2j)!
const EM_COEFFS: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
];

const DIRECT_TERMS: f64 = 64.0;

/// `sum_{k=a}^{b} k^{-p}` for integers `1 <= a <= b`, with `b` allowed to be
/// `+inf` when `p > 1`. Long ranges switch to Euler-Maclaurin after a short
/// direct prefix; the remainder is far below `f64` resolution.
pub fn power_sum(p: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a >= 1.0);
    if b < a {
        return 0.0;
    }
    if b.is_infinite() && p <= 1.0 {
        return f64::INFINITY;
    }
    let direct_end = if b - a < 2.0 * DIRECT_TERMS { b } else { a + DIRECT_TERMS - 1.0 };
    let mut total = 0.0;
    let mut k = direct_end;
    // smallest terms first
    while k >= a {
        total += k.powf(-p);
        k -= 1.0;
    }
    if direct_end >= b {
        return total;
    }
    let lo = direct_end + 1.0;
    total + euler_maclaurin_power(p, lo, b)
}

fn euler_maclaurin_power(p: f64, a: f64, b: f64) -> f64 {
    let f = |x: f64| x.powf(-p);
    let integral = if (p - 1.0).abs() < 1e-15 {
        if b.is_infinite() {
            f64::INFINITY
        } else {
            (b / a).ln()
        }
    } else if b.is_infinite() {
        a.powf(1.0 - p) / (p - 1.0)
    } else {
        (a.powf(1.0 - p) - b.powf(1.0 - p)) / (p - 1.0)
    };
    let fb = if b.is_infinite() { 0.0 } else { f(b) };
    let mut total = integral + 0.5 * (f(a) + fb);
    // f^{(r)}(x) = (-1)^r p (p+1) ... (p+r-1) x^{-p-r}
    let deriv = |r: u32, x: f64| -> f64 {
        if x.is_infinite() {
            return 0.0;
        }
        let mut rising = 1.0;
        for i in 0..r {
            rising *= p + i as f64;
        }
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        sign * rising * x.powf(-p - r as f64)
    };
    for (j, c) in EM_COEFFS.iter().enumerate() {
        let r = 2 * j as u32 + 1;
        total += c * (deriv(r, b) - deriv(r, a));
    }
    total
}

/// Hurwitz zeta `sum_{k>=0} (k + a)^{-s}` for integer `a >= 1`.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    power_sum(s, a, f64::INFINITY)
}

pub fn riemann_zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `int_{x0}^{inf} f(x) dx` for a positive, eventually decaying integrand.
/// Integrates in `u = ln(x / x0)` over unit panels until a panel no longer
/// contributes at the requested relative tolerance.
pub fn tail_integral<F: Fn(f64) -> f64>(f: F, x0: f64, rel_tol: f64) -> f64 {
    let g = |u: f64| {
        let x = x0 * u.exp();
        let v = f(x) * x;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut total: f64 = 0.0;
    let mut u = 0.0;
    let mut width = 0.5;
    let mut quiet_panels = 0;
    while u < 700.0 {
        let piece = adaptive_simpson(&g, u, u + width, 1e-18_f64.max(rel_tol * total.abs() * 1e-2));
        total += piece;
        u += width;
        width = (width * 1.5).min(8.0);
        if piece.abs() <= rel_tol * total.abs() {
            quiet_panels += 1;
            if quiet_panels >= 3 {
                break;
            }
        } else {
            quiet_panels = 0;
        }
    }
    total
}

/// Linear-interpolation quantile (type 7) of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let (a, b) = (sorted[lo], sorted[hi]);
    if lo == hi || a == b {
        a
    } else {
        a + (h - lo as f64) * (b - a)
    }
}

pub fn sort_floats(values: &mut [f64]) {
    values.sort_by(|a, b| a.total_cmp(b));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_matches_known_values() {
        let pi = std::f64::consts::PI;
        assert!((riemann_zeta(2.0) - pi * pi / 6.0).abs() < 1e-14);
        assert!((riemann_zeta(4.0) - pi.powi(4) / 90.0).abs() < 1e-14);
        // zeta(1.5), zeta(2.5) from tables
        assert!((riemann_zeta(1.5) - 2.612_375_348_685_488).abs() < 1e-12);
        assert!((riemann_zeta(2.5) - 1.341_487_257_250_917_2).abs() < 1e-12);
    }

    #[test]
    fn finite_power_sums_match_direct() {
        for &(p, a, b) in &[(0.5, 1.0, 5000.0), (2.5, 3.0, 10_000.0), (-1.0, 1.0, 1000.0), (1.0, 7.0, 9000.0)] {
            let direct: f64 = (a as u64..=b as u64).rev().map(|k| (k as f64).powf(-p)).sum();
            let em = power_sum(p, a, b);
            assert!((em - direct).abs() <= 1e-12 * direct.abs(), "p={p} a={a} b={b}: {em} vs {direct}");
        }
    }

    #[test]
    fn double_double_keeps_small_increments() {
        let mut acc = DoubleDouble::ZERO.add_f64(1e16);
        for _ in 0..1000 {
            acc = acc.add_f64(1.0);
        }
        assert_eq!(acc.sub(DoubleDouble::ZERO.add_f64(1e16)).to_f64(), 1000.0);
    }

    #[test]
    fn tail_integral_of_power() {
        // int_10^inf x^{-2.5} dx = 10^{-1.5} / 1.5
        let v = tail_integral(|x| x.powf(-2.5), 10.0, 1e-14);
        let exact = 10f64.powf(-1.5) / 1.5;
        assert!((v - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.5) - 2.5).abs() < 1e-15);
    }
}
