//! Gauss–Legendre rules on [-1, 1].
//!
//! Nodes are found by Newton iteration on the Legendre three-term recurrence,
//! seeded with the Tricomi-style asymptotic guess. Accurate to a few ulps for
//! the node counts used here (up to a few thousand).

use std::f64::consts::PI;

/// Evaluate (P_n(x), P_n'(x)) by the Bonnet recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1); interior nodes never hit |x| = 1.
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes (ascending) and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let half = n.div_ceil(2);
    for i in 0..half {
        // i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        // the middle root is exactly zero
        let mid = n / 2;
        nodes[mid] = 0.0;
        let (_, dp) = legendre_with_derivative(n, 0.0);
        weights[mid] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_rules() {
        let (x, w) = legendre_rule(1);
        assert_eq!(x, vec![0.0]);
        assert!((w[0] - 2.0).abs() < 1e-15);
        let (x, w) = legendre_rule(3);
        assert!((x[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_two_for_large_rules() {
        for n in [7, 64, 255, 1024] {
            let (x, w) = legendre_rule(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }
}
