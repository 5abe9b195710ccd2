//! Gauss–Legendre rules and exponential moments.

use std::sync::OnceLock;

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// The 10-point rule, computed once.
pub fn gl10() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(10))
}

/// ∫ₐᵇ f with the 10-point rule on `panels` equal panels.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gl10();
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let c = a + h * (p as f64 + 0.5);
        for (xi, wi) in x.iter().zip(w) {
            s += wi * f(c + 0.5 * h * xi);
        }
    }
    0.5 * h * s
}

/// ∫₀^ℓ e^{−aσ} σʲ dσ for j ≤ 2, stable for small |a|ℓ.
pub fn exp_moment(a: f64, len: f64, j: usize) -> f64 {
    let x = a * len;
    if x.abs() < 0.5 {
        // Σ_m (−a)^m ℓ^{m+j+1} / (m! (m+j+1))
        let mut term = len.powi(j as i32 + 1);
        let mut sum = 0.0;
        for m in 0..60 {
            let t = term / (m + j + 1) as f64;
            sum += t;
            if t.abs() <= 1e-18 * sum.abs() {
                break;
            }
            term *= -a * len / (m + 1) as f64;
        }
        return sum;
    }
    let e = (-x).exp();
    let mut acc = (1.0 - e) / a;
    for k in 1..=j {
        acc = (k as f64 * acc - len.powi(k as i32) * e) / a;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exp_moments_match_quadrature() {
        for &a in &[-3.0, -0.01, 0.0, 0.2, 5.0, 400.0] {
            for j in 0..3 {
                for &len in &[1e-3, 0.1, 1.0] {
                    let q = integrate_gl(|s| (-a * s).exp() * s.powi(j as i32), 0.0, len, 64);
                    let m = exp_moment(a, len, j);
                    assert!((q - m).abs() <= 1e-12 * q.abs().max(1e-300) + 1e-300, "a={a} j={j} len={len}: {q} vs {m}");
                }
            }
        }
    }
}
