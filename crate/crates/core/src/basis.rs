//! One-dimensional mimetic spectral polynomials.
//!
//! Nodal Lagrange polynomials `h_i` of degree `N` live on the GLL nodes. The
//! companion edge polynomials `e_i` of degree `N - 1` are histopolants:
//! `int_{x_j}^{x_{j+1}} e_i = delta_ij`. They satisfy `h_i' = e_{i-1} - e_i`
//! (with out-of-range terms dropped), which is what makes the discrete
//! derivatives purely topological.

use crate::quadrature::gll_rule;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct MimeticBasis1d<T> {
    degree: usize,
    nodes: Vec<T>,
    /// `1 / prod_{m != k} (x_k - x_m)`
    denominators: Vec<T>,
}

impl<T: Real> MimeticBasis1d<T> {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 1, "polynomial degree must be at least 1");
        let nodes = gll_rule::<T>(degree).points;
        let denominators = (0..=degree)
            .map(|k| {
                let p = (0..=degree)
                    .filter(|&m| m != k)
                    .fold(T::one(), |acc, m| acc * (nodes[k] - nodes[m]));
                T::one() / p
            })
            .collect();
        Self { degree, nodes, denominators }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Values of the `N + 1` nodal polynomials at `x`.
    pub fn nodal(&self, x: T) -> Vec<T> {
        (0..=self.degree)
            .map(|k| {
                (0..=self.degree)
                    .filter(|&m| m != k)
                    .fold(self.denominators[k], |acc, m| acc * (x - self.nodes[m]))
            })
            .collect()
    }

    /// Derivatives of the nodal polynomials at `x`.
    pub fn nodal_derivative(&self, x: T) -> Vec<T> {
        let n = self.degree;
        (0..=n)
            .map(|k| {
                let mut sum = T::zero();
                for m in (0..=n).filter(|&m| m != k) {
                    let prod = (0..=n)
                        .filter(|&l| l != k && l != m)
                        .fold(T::one(), |acc, l| acc * (x - self.nodes[l]));
                    sum = sum + prod;
                }
                sum * self.denominators[k]
            })
            .collect()
    }

    /// Values of the `N` edge polynomials at `x`; entry `i` belongs to `[x_i, x_{i+1}]`.
    pub fn edge(&self, x: T) -> Vec<T> {
        let d = self.nodal_derivative(x);
        let mut out = Vec::with_capacity(self.degree);
        let mut acc = T::zero();
        for dk in d.iter().take(self.degree) {
            acc = acc - *dk;
            out.push(acc);
        }
        out
    }
}

/// Nodal and edge values of a [`MimeticBasis1d`] at a fixed list of points.
#[derive(Debug, Clone)]
pub struct Tabulated1d<T> {
    /// `nodal[p * (N + 1) + i]`
    pub nodal: Vec<T>,
    /// `edge[p * N + i]`
    pub edge: Vec<T>,
    pub degree: usize,
}

impl<T: Real> Tabulated1d<T> {
    pub fn new(basis: &MimeticBasis1d<T>, points: &[T]) -> Self {
        let mut nodal = Vec::with_capacity(points.len() * (basis.degree + 1));
        let mut edge = Vec::with_capacity(points.len() * basis.degree);
        for &x in points {
            nodal.extend(basis.nodal(x));
            edge.extend(basis.edge(x));
        }
        Self { nodal, edge, degree: basis.degree }
    }

    #[inline]
    pub fn nodal_at(&self, p: usize, i: usize) -> T {
        self.nodal[p * (self.degree + 1) + i]
    }

    #[inline]
    pub fn edge_at(&self, p: usize, i: usize) -> T {
        self.edge[p * self.degree + i]
    }

    /// Value of either kind of polynomial: `is_edge` selects the edge family.
    #[inline]
    pub fn at(&self, p: usize, i: usize, is_edge: bool) -> T {
        if is_edge {
            self.edge_at(p, i)
        } else {
            self.nodal_at(p, i)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_rule;

    #[test]
    fn nodal_polynomials_are_cardinal() {
        for n in 1..=5 {
            let b = MimeticBasis1d::<f64>::new(n);
            for (k, &x) in b.nodes().iter().enumerate() {
                let v = b.nodal(x);
                for (m, vm) in v.iter().enumerate() {
                    let expect = if m == k { 1.0 } else { 0.0 };
                    assert!((vm - expect).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn edge_polynomials_histopolate() {
        let g = gauss_rule::<f64>(8);
        for n in 1..=5 {
            let b = MimeticBasis1d::<f64>::new(n);
            let x = b.nodes().to_vec();
            for j in 0..n {
                for i in 0..n {
                    let v = g.integrate_on(x[j], x[j + 1], |t| b.edge(t)[i]);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-13, "n={n} i={i} j={j} v={v}");
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let b = MimeticBasis1d::<f64>::new(4);
        let h = 1e-6;
        for &x in &[-0.7, -0.1, 0.33, 0.9] {
            let d = b.nodal_derivative(x);
            let p = b.nodal(x + h);
            let m = b.nodal(x - h);
            for k in 0..5 {
                assert!((d[k] - (p[k] - m[k]) / (2.0 * h)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn nodal_derivative_is_edge_difference() {
        let b = MimeticBasis1d::<f64>::new(3);
        for &x in &[-0.8, 0.2, 0.75] {
            let d = b.nodal_derivative(x);
            let e = b.edge(x);
            for k in 0..=3 {
                let left = if k >= 1 { e[k - 1] } else { 0.0 };
                let right = if k < 3 { e[k] } else { 0.0 };
                assert!((d[k] - (left - right)).abs() < 1e-12);
            }
        }
    }
}
