//! Gauss–Legendre and Gauss–Lobatto–Legendre rules on `[-1, 1]`.

use crate::scalar::Real;

/// One-dimensional quadrature rule on `[-1, 1]`, points in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    pub points: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f` over `[-1, 1]`.
    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }

    /// Integrates `f` over `[a, b]` with the affinely mapped rule.
    pub fn integrate_on(&self, a: T, b: T, mut f: impl FnMut(T) -> T) -> T {
        let half = T::lit(0.5) * (b - a);
        let mid = T::lit(0.5) * (a + b);
        half * self.integrate(|x| f(mid + half * x))
    }
}

/// Legendre polynomial `P_n(x)` and `P_{n-1}(x)` by the three-term recurrence.
fn legendre_pair<T: Real>(n: usize, x: T) -> (T, T) {
    if n == 0 {
        return (T::one(), T::zero());
    }
    let mut p_prev = T::one();
    let mut p = x;
    for k in 1..n {
        let kf = T::from_usize_lossy(k);
        let next = ((kf + kf + T::one()) * x * p - kf * p_prev) / (kf + T::one());
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

fn newton_tolerance<T: Real>() -> T {
    T::epsilon() * T::lit(4.0)
}

/// The `n`-point Gauss–Legendre rule, exact for polynomials of degree `2n - 1`.
///
/// # Panics
/// Panics if `n == 0`.
pub fn gauss_rule<T: Real>(n: usize) -> QuadratureRule<T> {
    assert!(n >= 1, "a Gauss rule needs at least one point");
    let nf = T::from_usize_lossy(n);
    let mut points = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let pi = T::PI();
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton
        let mut x = (pi * (T::from_usize_lossy(i) + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(n, x);
            dp = nf * (x * p - p_prev) / (x * x - T::one());
            let dx = p / dp;
            x = x - dx;
            if dx.abs() <= newton_tolerance::<T>() {
                let (p, p_prev) = legendre_pair(n, x);
                dp = nf * (x * p - p_prev) / (x * x - T::one());
                break;
            }
        }
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        points[i] = -x;
        points[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = T::zero();
    }
    QuadratureRule { points, weights }
}

/// The `n + 1` Gauss–Lobatto–Legendre nodes and weights (degree `n >= 1`).
///
/// These are the nodal points of the degree-`n` Lagrange basis.
pub fn gll_rule<T: Real>(n: usize) -> QuadratureRule<T> {
    assert!(n >= 1, "GLL rule needs polynomial degree >= 1");
    let np = n + 1;
    let nf = T::from_usize_lossy(n);
    let pi = T::PI();
    let mut points = vec![T::zero(); np];
    let mut weights = vec![T::zero(); np];
    for i in 0..np {
        // Chebyshev–Gauss–Lobatto guess, descending; Newton on x P_n - P_{n-1}
        let mut x = (pi * T::from_usize_lossy(i) / nf).cos();
        if i != 0 && i != n {
            for _ in 0..100 {
                let (p, p_prev) = legendre_pair(n, x);
                let dx = (x * p - p_prev) / ((nf + T::one()) * p);
                x = x - dx;
                if dx.abs() <= newton_tolerance::<T>() {
                    break;
                }
            }
        }
        let (p, _) = legendre_pair(n, x);
        points[n - i] = x;
        weights[n - i] = T::lit(2.0) / (nf * (nf + T::one()) * p * p);
    }
    points[0] = -T::one();
    points[n] = T::one();
    if np % 2 == 1 {
        points[n / 2] = T::zero();
    }
    QuadratureRule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_and_two_point_rules() {
        let g1 = gauss_rule::<f64>(1);
        assert_eq!(g1.points, vec![0.0]);
        assert!((g1.weights[0] - 2.0).abs() < 1e-15);

        let g2 = gauss_rule::<f64>(2);
        let p = 1.0 / 3f64.sqrt();
        assert!((g2.points[0] + p).abs() < 1e-15);
        assert!((g2.points[1] - p).abs() < 1e-15);
        assert!((g2.weights[0] - 1.0).abs() < 1e-15);
        assert!((g2.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn five_point_rule_integrates_x8() {
        let g = gauss_rule::<f64>(5);
        let v = g.integrate(|x| x.powi(8));
        assert!((v - 2.0 / 9.0).abs() < 1e-14, "{v}");
    }

    #[test]
    fn monomial_exactness_up_to_degree_2n_minus_1() {
        for n in 1..=12 {
            let g = gauss_rule::<f64>(n);
            let wsum: f64 = g.weights.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-13);
            for deg in 0..2 * n {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let v = g.integrate(|x| x.powi(deg as i32));
                assert!((v - exact).abs() <= 1e-13 * exact.abs().max(1.0), "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn gll_rule_is_exact_to_degree_2n_minus_1() {
        for n in 1..=8 {
            let r = gll_rule::<f64>(n);
            assert_eq!(r.len(), n + 1);
            assert_eq!(r.points[0], -1.0);
            assert_eq!(r.points[n], 1.0);
            for w in r.points.windows(2) {
                assert!(w[0] < w[1]);
            }
            for deg in 0..2 * n {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let v = r.integrate(|x| x.powi(deg as i32));
                assert!((v - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn gll_degree_two_is_symmetric_three_point() {
        let r = gll_rule::<f64>(2);
        assert_eq!(r.points, vec![-1.0, 0.0, 1.0]);
        assert!((r.weights[1] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_precision_rule() {
        let g = gauss_rule::<f32>(4);
        let v = g.integrate(|x| x.powi(6));
        assert!((v - 2.0 / 7.0).abs() < 1e-6);
    }
}
