//! Structured `K x K x K` hexahedral meshes of a box, optionally distorted by
//! the smooth "crazy" mapping.
//!
//! Every element carries a local chart `xi in [-1, 1]^3`. The chart is affine onto
//! the element's sub-box of the global reference cube `(r, s, t) in [0, 1]^3`,
//! which is then sent to the physical box by
//!
//! ```text
//! x_d = lo_d + (hi_d - lo_d) * (r_d + c/2 * sin(2 pi r) sin(2 pi s) sin(2 pi t))
//! ```
//!
//! The sine factor vanishes on the reference boundary, so boundary faces stay on
//! the boundary for every `c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_rule, QuadratureRule};
use crate::scalar::vec3::{self, M3, V3};
use crate::scalar::Real;

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain<T> {
    pub lo: [T; 3],
    pub hi: [T; 3],
}

impl<T: Real> BoxDomain<T> {
    pub fn new(lo: [T; 3], hi: [T; 3]) -> Result<Self> {
        for d in 0..3 {
            if !(hi[d] > lo[d]) {
                return Err(Error::InvalidMesh(format!(
                    "box extent along axis {d} is not positive ({} .. {})",
                    lo[d], hi[d]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: [T::zero(); 3], hi: [T::one(); 3] }
    }

    /// `[0, 2 pi]^3`.
    pub fn periodic_cube() -> Self {
        let tp = T::PI() + T::PI();
        Self { lo: [T::zero(); 3], hi: [tp; 3] }
    }

    pub fn extent(&self) -> V3<T> {
        [self.hi[0] - self.lo[0], self.hi[1] - self.lo[1], self.hi[2] - self.lo[2]]
    }

    pub fn volume(&self) -> T {
        let e = self.extent();
        e[0] * e[1] * e[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingKind {
    IdentityAffine,
    Crazy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingSpec<T> {
    pub kind: MappingKind,
    pub c: T,
}

impl<T: Real> MappingSpec<T> {
    pub fn affine() -> Self {
        Self { kind: MappingKind::IdentityAffine, c: T::zero() }
    }

    pub fn crazy(c: T) -> Self {
        Self { kind: MappingKind::Crazy, c }
    }

    fn amplitude(&self) -> T {
        match self.kind {
            MappingKind::IdentityAffine => T::zero(),
            MappingKind::Crazy => self.c,
        }
    }

    /// Maps a reference point `(r, s, t)` of the unit cube to the unit cube.
    pub fn map_reference(&self, r: &V3<T>) -> V3<T> {
        let c = self.amplitude();
        if c == T::zero() {
            return *r;
        }
        let tp = T::PI() + T::PI();
        let g = (tp * r[0]).sin() * (tp * r[1]).sin() * (tp * r[2]).sin();
        let shift = T::lit(0.5) * c * g;
        [r[0] + shift, r[1] + shift, r[2] + shift]
    }

    /// Closed-form derivative `d map / d(r, s, t)`; row `d` is the gradient of `x_d`.
    pub fn reference_jacobian(&self, r: &V3<T>) -> M3<T> {
        let mut j = [[T::zero(); 3]; 3];
        for (d, row) in j.iter_mut().enumerate() {
            row[d] = T::one();
        }
        let c = self.amplitude();
        if c == T::zero() {
            return j;
        }
        let tp = T::PI() + T::PI();
        let (s0, c0) = (tp * r[0]).sin_cos();
        let (s1, c1) = (tp * r[1]).sin_cos();
        let (s2, c2) = (tp * r[2]).sin_cos();
        let half_c = T::lit(0.5) * c;
        let grad = [tp * c0 * s1 * s2, tp * s0 * c1 * s2, tp * s0 * s1 * c2];
        for row in j.iter_mut() {
            for m in 0..3 {
                row[m] = row[m] + half_c * grad[m];
            }
        }
        j
    }
}

/// Jacobian data at a set of points of one element.
#[derive(Debug, Clone)]
pub struct ElementGeometry<T> {
    /// Physical coordinates of the sample points.
    pub points: Vec<V3<T>>,
    /// `J[d][m] = d x_d / d xi_m`.
    pub jacobian: Vec<M3<T>>,
    pub det: Vec<T>,
    pub inv_transpose: Vec<M3<T>>,
}

impl<T: Real> ElementGeometry<T> {
    pub fn len(&self) -> usize {
        self.det.len()
    }

    pub fn is_empty(&self) -> bool {
        self.det.is_empty()
    }
}

/// Tensor-product points and weights of a 1D rule on `[-1, 1]^3`.
///
/// Point index `q = i + n (j + n k)` with `i` running along `xi`.
#[derive(Debug, Clone)]
pub struct TensorRule<T> {
    pub rule: QuadratureRule<T>,
    pub points: Vec<V3<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> TensorRule<T> {
    pub fn new(rule: QuadratureRule<T>) -> Self {
        let n = rule.len();
        let mut points = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    points.push([rule.points[i], rule.points[j], rule.points[k]]);
                    weights.push(rule.weights[i] * rule.weights[j] * rule.weights[k]);
                }
            }
        }
        Self { rule, points, weights }
    }

    pub fn gauss(n: usize) -> Self {
        Self::new(gauss_rule(n))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct HexMesh<T> {
    k: usize,
    domain: BoxDomain<T>,
    mapping: MappingSpec<T>,
}

/// Number of Gauss points per direction used to validate the mapping at build time.
pub const MESH_CHECK_POINTS: usize = 5;

impl<T: Real> HexMesh<T> {
    /// Builds the mesh and checks `det J > 0` on a 5-point Gauss lattice of every element.
    pub fn build(k: usize, domain: BoxDomain<T>, mapping: MappingSpec<T>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidMesh("K must be at least 1".into()));
        }
        let domain = BoxDomain::new(domain.lo, domain.hi)?;
        if !mapping.c.is_finite() {
            return Err(Error::InvalidMesh("mapping amplitude is not finite".into()));
        }
        let mesh = Self { k, domain, mapping };
        let rule = TensorRule::gauss(MESH_CHECK_POINTS);
        for e in 0..mesh.num_elements() {
            mesh.jacobian_data(e, &rule.points)?;
        }
        Ok(mesh)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn domain(&self) -> &BoxDomain<T> {
        &self.domain
    }

    pub fn mapping(&self) -> &MappingSpec<T> {
        &self.mapping
    }

    pub fn num_elements(&self) -> usize {
        self.k * self.k * self.k
    }

    /// Element lattice coordinates; element index is `ex + K (ey + K ez)`.
    pub fn element_coords(&self, e: usize) -> [usize; 3] {
        let k = self.k;
        [e % k, (e / k) % k, e / (k * k)]
    }

    pub fn element_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.k * (c[1] + self.k * c[2])
    }

    /// Reference sub-box `[lo, hi]` of element `e` inside `[0, 1]^3`.
    pub fn reference_box(&self, e: usize) -> (V3<T>, V3<T>) {
        let c = self.element_coords(e);
        let kf = T::from_usize_lossy(self.k);
        let lo = c.map(|i| T::from_usize_lossy(i) / kf);
        let hi = c.map(|i| T::from_usize_lossy(i + 1) / kf);
        (lo, hi)
    }

    /// Element-local chart `xi -> (r, s, t)`.
    pub fn local_to_reference(&self, e: usize, xi: &V3<T>) -> V3<T> {
        let c = self.element_coords(e);
        let kf = T::from_usize_lossy(self.k);
        let half = T::lit(0.5);
        [0, 1, 2].map(|d| (T::from_usize_lossy(c[d]) + half * (xi[d] + T::one())) / kf)
    }

    /// Global reference point to physical coordinates.
    pub fn reference_to_physical(&self, r: &V3<T>) -> V3<T> {
        let m = self.mapping.map_reference(r);
        let ext = self.domain.extent();
        [0, 1, 2].map(|d| self.domain.lo[d] + ext[d] * m[d])
    }

    pub fn local_to_physical(&self, e: usize, xi: &V3<T>) -> V3<T> {
        self.reference_to_physical(&self.local_to_reference(e, xi))
    }

    /// Analytic `d x / d xi` at a local point.
    pub fn local_jacobian(&self, e: usize, xi: &V3<T>) -> M3<T> {
        let r = self.local_to_reference(e, xi);
        let mut j = self.mapping.reference_jacobian(&r);
        let ext = self.domain.extent();
        let chart = T::one() / (T::lit(2.0) * T::from_usize_lossy(self.k));
        for (d, row) in j.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = *v * ext[d] * chart;
            }
        }
        j
    }

    /// Physical corner vertices of element `e`, lexicographic in `(xi, eta, zeta)`.
    pub fn element_vertices(&self, e: usize) -> [V3<T>; 8] {
        let mut out = [vec3::zero(); 8];
        for (n, v) in out.iter_mut().enumerate() {
            let xi = [0, 1, 2].map(|d| if (n >> d) & 1 == 1 { T::one() } else { -T::one() });
            *v = self.local_to_physical(e, &xi);
        }
        out
    }

    /// Jacobians, determinants and inverse transposes at the given local points.
    pub fn jacobian_data(&self, e: usize, local_points: &[V3<T>]) -> Result<ElementGeometry<T>> {
        if e >= self.num_elements() {
            return Err(Error::InvalidMesh(format!("element index {e} out of range")));
        }
        let n = local_points.len();
        let mut geo = ElementGeometry {
            points: Vec::with_capacity(n),
            jacobian: Vec::with_capacity(n),
            det: Vec::with_capacity(n),
            inv_transpose: Vec::with_capacity(n),
        };
        for (q, xi) in local_points.iter().enumerate() {
            let j = self.local_jacobian(e, xi);
            let det = vec3::det(&j);
            if !(det > T::zero()) {
                return Err(Error::NonPositiveJacobian { element: e, point: q, det: det.to_f64_lossy() });
            }
            geo.points.push(self.local_to_physical(e, xi));
            geo.inv_transpose.push(vec3::inverse_transpose(&j, det));
            geo.jacobian.push(j);
            geo.det.push(det);
        }
        Ok(geo)
    }
}
