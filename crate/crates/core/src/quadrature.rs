//! Small numerical kernels shared by the physics modules: composite Simpson
//! with node doubling, Gauss-Legendre rules, Chebyshev series on an interval
//! and golden-section maximization.

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: Complex64,
    /// Number of Simpson intervals used for `value`.
    pub intervals: usize,
    pub converged: bool,
}

/// Composite Simpson rule on `n` (even) intervals.
pub fn simpson<F>(f: F, a: f64, b: f64, n: usize) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let n = if n % 2 == 1 { n + 1 } else { n.max(2) };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// Composite Simpson with interval doubling until two successive estimates
/// agree to `tol` relative to the integral of `|f|`.
///
/// Every doubling reuses the previous nodes, so the cost of the final level
/// is one evaluation per node.
pub fn simpson_adaptive<F>(f: F, a: f64, b: f64, tol: f64, n0: usize, n_max: usize) -> Quad
where
    F: Fn(f64) -> Complex64,
{
    if b <= a {
        return Quad { value: Complex64::new(0.0, 0.0), intervals: 0, converged: true };
    }
    let mut n = n0.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let fa = f(a);
    let fb = f(b);
    let ends = fa + fb;
    let ends_abs = fa.norm() + fb.norm();

    // interior nodes split by parity of their index at the current level
    let mut h = (b - a) / n as f64;
    let mut odd = Complex64::new(0.0, 0.0);
    let mut even = Complex64::new(0.0, 0.0);
    let mut odd_abs = 0.0;
    let mut even_abs = 0.0;
    for i in 1..n {
        let v = f(a + i as f64 * h);
        if i % 2 == 1 {
            odd += v;
            odd_abs += v.norm();
        } else {
            even += v;
            even_abs += v.norm();
        }
    }
    let mut prev = (ends + odd * 4.0 + even * 2.0) * (h / 3.0);
    loop {
        if n >= n_max {
            return Quad { value: prev, intervals: n, converged: false };
        }
        let new_n = 2 * n;
        let new_h = h / 2.0;
        let mut new_odd = Complex64::new(0.0, 0.0);
        let mut new_odd_abs = 0.0;
        for i in 0..n {
            let v = f(a + (2 * i + 1) as f64 * new_h);
            new_odd += v;
            new_odd_abs += v.norm();
        }
        even += odd;
        even_abs += odd_abs;
        odd = new_odd;
        odd_abs = new_odd_abs;
        n = new_n;
        h = new_h;
        let cur = (ends + odd * 4.0 + even * 2.0) * (h / 3.0);
        let scale = (ends_abs + 4.0 * odd_abs + 2.0 * even_abs) * (h / 3.0);
        if (cur - prev).norm() <= tol * scale.max(cur.norm()) {
            return Quad { value: cur, intervals: n, converged: true };
        }
        prev = cur;
    }
}

/// Gauss-Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(n.max(2)).expect("degree >= 2");
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Chebyshev series of a complex function on `[a, b]`.
#[derive(Debug, Clone)]
pub struct ChebSeries {
    a: f64,
    b: f64,
    coeffs: Vec<Complex64>,
}

impl ChebSeries {
    /// First-kind Chebyshev points of an `n`-term interpolant on `[a, b]`.
    pub fn nodes(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let x = (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos();
                0.5 * (b - a) * x + 0.5 * (b + a)
            })
            .collect()
    }

    /// Interpolant through values sampled at [`ChebSeries::nodes`].
    pub fn from_values(values: &[Complex64], a: f64, b: f64) -> Self {
        let n = values.len();
        let coeffs = (0..n)
            .map(|j| {
                let mut s = Complex64::new(0.0, 0.0);
                for (k, v) in values.iter().enumerate() {
                    let theta = std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64;
                    s += v * theta.cos();
                }
                let norm = if j == 0 { 1.0 } else { 2.0 };
                s * (norm / n as f64)
            })
            .collect();
        Self { a, b, coeffs }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let x = (2.0 * t - self.a - self.b) / (self.b - self.a);
        let mut b1 = Complex64::new(0.0, 0.0);
        let mut b2 = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().skip(1).rev() {
            let tmp = b1;
            b1 = b1 * (2.0 * x) - b2 + c;
            b2 = tmp;
        }
        b1 * x - b2 + self.coeffs[0]
    }

    /// Indefinite integral vanishing at `a`.
    pub fn integral(&self) -> Self {
        let n = self.coeffs.len();
        let scale = 0.5 * (self.b - self.a);
        let c = |k: usize| -> Complex64 {
            if k < n {
                self.coeffs[k]
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
        for (k, slot) in out.iter_mut().enumerate().skip(1) {
            let lower = if k == 1 { c(0) * 2.0 } else { c(k - 1) };
            *slot = (lower - c(k + 1)) * (scale / (2.0 * k as f64));
        }
        // fix the constant so the integral vanishes at x = -1
        let mut at_minus_one = Complex64::new(0.0, 0.0);
        for (k, v) in out.iter().enumerate().skip(1) {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            at_minus_one += v * sign;
        }
        out[0] = -at_minus_one;
        Self { a: self.a, b: self.b, coeffs: out }
    }
}

/// Golden-section search for the maximum of `f` on `[lo, hi]`, stopping when
/// the bracket is narrower than `rel_width` times its midpoint.
pub fn golden_section_max<F>(f: F, mut lo: f64, mut hi: f64, rel_width: f64, max_evals: usize) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evals = 2;
    while evals < max_evals && (hi - lo) > rel_width * (0.5 * (hi + lo)).abs().max(f64::MIN_POSITIVE) {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        evals += 1;
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
