//! The discrete de Rham complex `G -> C -> D -> S` on a structured hex mesh.
//!
//! All four spaces are tensor products of the 1D nodal (`h`) and edge (`e`)
//! polynomials of [`MimeticBasis1d`]. Degrees of freedom live on a global
//! lattice of `n = N K` cells per axis:
//!
//! | space | component `c` on axis `d` | global layout |
//! |-------|---------------------------|---------------|
//! | G     | `h` on every axis         | nodes         |
//! | C     | `e` on `d == c`, else `h` | edges along `c` |
//! | D     | `h` on `d == c`, else `e` | faces normal to `c` |
//! | S     | `e` on every axis         | cells         |
//!
//! Every edge and face is oriented along increasing global axes, so the
//! incidence matrices only depend on the lattice, never on the metric.

use serde::{Deserialize, Serialize};

use crate::basis::{MimeticBasis1d, Tabulated1d};
use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::mesh::{ElementGeometry, HexMesh};
use crate::scalar::vec3::V3;
use crate::scalar::Real;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceTag {
    G,
    C,
    C0,
    D,
    S,
}

impl SpaceTag {
    /// Form degree: 0 for G, 1 for C and C0, 2 for D, 3 for S.
    pub fn form(self) -> usize {
        match self {
            SpaceTag::G => 0,
            SpaceTag::C | SpaceTag::C0 => 1,
            SpaceTag::D => 2,
            SpaceTag::S => 3,
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(self.form(), 1 | 2)
    }
}

/// Whether a form of degree `form` uses the edge polynomial along `axis` in component `comp`.
#[inline]
pub fn is_edge(form: usize, comp: usize, axis: usize) -> bool {
    match form {
        0 => false,
        1 => axis == comp,
        2 => axis != comp,
        _ => true,
    }
}

/// Structured numbering of the DOFs of one form on an `n x n x n` cell lattice.
///
/// Index of `(comp, [i, j, k])` is `offset[comp] + i + d0 (j + d1 k)` with `d = dims[comp]`.
/// The same layout serves the element-local numbering (`n = N`) and the global one (`n = N K`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    form: usize,
    n: usize,
    dims: Vec<[usize; 3]>,
    offsets: Vec<usize>,
}

impl Lattice {
    pub fn new(form: usize, n: usize) -> Self {
        assert!(form <= 3, "form degree out of range");
        let ncomp = if form == 1 || form == 2 { 3 } else { 1 };
        let dims: Vec<[usize; 3]> = (0..ncomp)
            .map(|c| [0, 1, 2].map(|d| if is_edge(form, c, d) { n } else { n + 1 }))
            .collect();
        let mut offsets = vec![0];
        for d in &dims {
            offsets.push(offsets.last().unwrap() + d[0] * d[1] * d[2]);
        }
        Self { form, n, dims, offsets }
    }

    pub fn form(&self) -> usize {
        self.form
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self, comp: usize) -> [usize; 3] {
        self.dims[comp]
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, comp: usize, p: [usize; 3]) -> usize {
        let d = self.dims[comp];
        debug_assert!(p[0] < d[0] && p[1] < d[1] && p[2] < d[2]);
        self.offsets[comp] + p[0] + d[0] * (p[1] + d[1] * p[2])
    }

    pub fn coords(&self, idx: usize) -> (usize, [usize; 3]) {
        let comp = (0..self.components()).rev().find(|&c| self.offsets[c] <= idx).unwrap();
        let d = self.dims[comp];
        let r = idx - self.offsets[comp];
        (comp, [r % d[0], (r / d[0]) % d[1], r / (d[0] * d[1])])
    }

    /// Iterates `(comp, position)` in index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, [usize; 3])> + '_ {
        (0..self.len()).map(move |i| self.coords(i))
    }
}

fn shift(p: [usize; 3], axis: usize) -> [usize; 3] {
    let mut q = p;
    q[axis] += 1;
    q
}

/// Gradient incidence `G -> C` on an `n`-cell lattice.
pub fn grad_incidence(n: usize) -> SparseMatrix<i32> {
    let (g, c) = (Lattice::new(0, n), Lattice::new(1, n));
    let mut t = Vec::with_capacity(2 * c.len());
    for (row, (comp, p)) in c.iter().enumerate() {
        t.push((row, g.index(0, shift(p, comp)), 1));
        t.push((row, g.index(0, p), -1));
    }
    SparseMatrix::from_triplets(c.len(), g.len(), &t)
}

/// Curl incidence `C -> D`: face `c` gets `d_a A_b - d_b A_a` with `(a, b)` cyclic after `c`.
pub fn curl_incidence(n: usize) -> SparseMatrix<i32> {
    let (c1, d2) = (Lattice::new(1, n), Lattice::new(2, n));
    let mut t = Vec::with_capacity(4 * d2.len());
    for (row, (comp, p)) in d2.iter().enumerate() {
        let a = (comp + 1) % 3;
        let b = (comp + 2) % 3;
        t.push((row, c1.index(b, shift(p, a)), 1));
        t.push((row, c1.index(b, p), -1));
        t.push((row, c1.index(a, shift(p, b)), -1));
        t.push((row, c1.index(a, p), 1));
    }
    SparseMatrix::from_triplets(d2.len(), c1.len(), &t)
}

/// Divergence incidence `D -> S`.
pub fn div_incidence(n: usize) -> SparseMatrix<i32> {
    let (d2, s3) = (Lattice::new(2, n), Lattice::new(3, n));
    let mut t = Vec::with_capacity(6 * s3.len());
    for (row, (_, p)) in s3.iter().enumerate() {
        for axis in 0..3 {
            t.push((row, d2.index(axis, shift(p, axis)), 1));
            t.push((row, d2.index(axis, p), -1));
        }
    }
    SparseMatrix::from_triplets(s3.len(), d2.len(), &t)
}

/// Element-independent values of the local reference basis of one form at fixed points.
///
/// `values[p * num_basis + a]` is the scalar tensor factor of local basis `a`;
/// the reference vector is that value times the unit vector of `component[a]`.
#[derive(Debug, Clone)]
pub struct ReferenceTable<T> {
    pub form: usize,
    pub num_basis: usize,
    pub num_points: usize,
    pub component: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Real> ReferenceTable<T> {
    /// Tabulates at arbitrary local points in `[-1, 1]^3`.
    pub fn at_points(basis: &MimeticBasis1d<T>, form: usize, points: &[V3<T>]) -> Self {
        let local = Lattice::new(form, basis.degree());
        let tabs: Vec<[Tabulated1d<T>; 3]> =
            points.iter().map(|x| [0, 1, 2].map(|d| Tabulated1d::new(basis, &[x[d]]))).collect();
        let nb = local.len();
        let mut values = Vec::with_capacity(points.len() * nb);
        for tab in &tabs {
            for (comp, a) in local.iter() {
                let v = (0..3).fold(T::one(), |acc, d| acc * tab[d].at(0, a[d], is_edge(form, comp, d)));
                values.push(v);
            }
        }
        let component = local.iter().map(|(c, _)| c).collect();
        Self { form, num_basis: nb, num_points: points.len(), component, values }
    }

    /// Tabulates at the tensor points `q = i + n (j + n k)` of a 1D point set.
    pub fn tensor(basis: &MimeticBasis1d<T>, form: usize, points_1d: &[T]) -> Self {
        let local = Lattice::new(form, basis.degree());
        let tab = Tabulated1d::new(basis, points_1d);
        let n = points_1d.len();
        let nb = local.len();
        let entries: Vec<(usize, [usize; 3])> = local.iter().collect();
        let mut values = Vec::with_capacity(n * n * n * nb);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let q = [i, j, k];
                    for &(comp, a) in &entries {
                        let v = (0..3).fold(T::one(), |acc, d| acc * tab.at(q[d], a[d], is_edge(form, comp, d)));
                        values.push(v);
                    }
                }
            }
        }
        let component = entries.iter().map(|&(c, _)| c).collect();
        Self { form, num_basis: nb, num_points: n * n * n, component, values }
    }

    #[inline]
    pub fn value(&self, p: usize, a: usize) -> T {
        self.values[p * self.num_basis + a]
    }

    /// Values at point `p` for all local basis functions.
    #[inline]
    pub fn row(&self, p: usize) -> &[T] {
        &self.values[p * self.num_basis..(p + 1) * self.num_basis]
    }
}

/// Piola factors: the physical image of the reference unit vector of component `c`.
///
/// C: column `c` of `J^{-T}`; D: column `c` of `J / det J`; G: 1; S: `1 / det J`
/// (scalar forms use entry 0 only).
#[inline]
pub fn piola_columns<T: Real>(form: usize, geo: &ElementGeometry<T>, p: usize) -> [V3<T>; 3] {
    let z = T::zero();
    match form {
        0 => [[T::one(), z, z], [z; 3], [z; 3]],
        1 => {
            let m = &geo.inv_transpose[p];
            [0, 1, 2].map(|c| [m[0][c], m[1][c], m[2][c]])
        }
        2 => {
            let m = &geo.jacobian[p];
            let s = T::one() / geo.det[p];
            [0, 1, 2].map(|c| [m[0][c] * s, m[1][c] * s, m[2][c] * s])
        }
        _ => [[T::one() / geo.det[p], z, z], [z; 3], [z; 3]],
    }
}

/// Physical values of the local basis of one space on one element.
///
/// Vector spaces store `V3` values; scalar spaces use component 0 only.
#[derive(Debug, Clone)]
pub struct BasisEvaluation<T> {
    pub space: SpaceTag,
    /// Global DOF (in `space`) of each evaluated local basis function.
    pub dofs: Vec<usize>,
    pub num_points: usize,
    /// `values[p * dofs.len() + a]`
    pub values: Vec<V3<T>>,
}

impl<T: Real> BasisEvaluation<T> {
    pub fn value(&self, p: usize, a: usize) -> V3<T> {
        self.values[p * self.dofs.len() + a]
    }
}

/// The four global spaces on a mesh, with DOF tables and incidence matrices.
#[derive(Debug, Clone)]
pub struct DeRhamComplex<T> {
    degree: usize,
    mesh: HexMesh<T>,
    basis: MimeticBasis1d<T>,
    global: [Lattice; 4],
    local: [Lattice; 4],
    /// `element_dofs[form][e * local_len + a]`
    element_dofs: [Vec<usize>; 4],
    c_boundary: Vec<bool>,
    c0_to_c: Vec<usize>,
    c_to_c0: Vec<Option<usize>>,
    e_grad: SparseMatrix<i32>,
    c_curl: SparseMatrix<i32>,
    d_div: SparseMatrix<i32>,
    c0_curl: SparseMatrix<i32>,
}

impl<T: Real> DeRhamComplex<T> {
    pub fn build(mesh: HexMesh<T>, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidParams("polynomial degree N must be at least 1".into()));
        }
        let k = mesh.k();
        let n = degree * k;
        let global = [0, 1, 2, 3].map(|f| Lattice::new(f, n));
        let local = [0, 1, 2, 3].map(|f| Lattice::new(f, degree));
        let element_dofs = [0, 1, 2, 3].map(|f| {
            let mut table = Vec::with_capacity(mesh.num_elements() * local[f].len());
            for e in 0..mesh.num_elements() {
                let ec = mesh.element_coords(e);
                for (comp, a) in local[f].iter() {
                    let p = [0, 1, 2].map(|d| ec[d] * degree + a[d]);
                    table.push(global[f].index(comp, p));
                }
            }
            table
        });
        let c_boundary: Vec<bool> = global[1]
            .iter()
            .map(|(comp, p)| (0..3).any(|d| d != comp && (p[d] == 0 || p[d] == n)))
            .collect();
        let c0_to_c: Vec<usize> = (0..c_boundary.len()).filter(|&i| !c_boundary[i]).collect();
        let mut c_to_c0 = vec![None; c_boundary.len()];
        for (i0, &i) in c0_to_c.iter().enumerate() {
            c_to_c0[i] = Some(i0);
        }
        let e_grad = grad_incidence(n);
        let c_curl = curl_incidence(n);
        let d_div = div_incidence(n);
        let c0_curl = c_curl.select_columns(&c0_to_c);
        Ok(Self {
            degree,
            basis: MimeticBasis1d::new(degree),
            mesh,
            global,
            local,
            element_dofs,
            c_boundary,
            c0_to_c,
            c_to_c0,
            e_grad,
            c_curl,
            d_div,
            c0_curl,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn mesh(&self) -> &HexMesh<T> {
        &self.mesh
    }

    pub fn basis(&self) -> &MimeticBasis1d<T> {
        &self.basis
    }

    pub fn global_lattice(&self, form: usize) -> &Lattice {
        &self.global[form]
    }

    pub fn local_lattice(&self, form: usize) -> &Lattice {
        &self.local[form]
    }

    pub fn dim(&self, space: SpaceTag) -> usize {
        match space {
            SpaceTag::C0 => self.c0_to_c.len(),
            s => self.global[s.form()].len(),
        }
    }

    /// `(G, C, C0, D, S)` dimensions.
    pub fn dims(&self) -> (usize, usize, usize, usize, usize) {
        use SpaceTag::*;
        (self.dim(G), self.dim(C), self.dim(C0), self.dim(D), self.dim(S))
    }

    /// Global DOFs of element `e` in the form's local lattice order.
    pub fn element_dofs(&self, form: usize, e: usize) -> &[usize] {
        let nl = self.local[form].len();
        &self.element_dofs[form][e * nl..(e + 1) * nl]
    }

    /// `true` for C DOFs carrying a tangential trace on the domain boundary.
    pub fn boundary_mask(&self) -> &[bool] {
        &self.c_boundary
    }

    pub fn c0_to_c(&self) -> &[usize] {
        &self.c0_to_c
    }

    pub fn c_to_c0(&self, i: usize) -> Option<usize> {
        self.c_to_c0[i]
    }

    pub fn e_grad(&self) -> &SparseMatrix<i32> {
        &self.e_grad
    }

    pub fn c_curl(&self) -> &SparseMatrix<i32> {
        &self.c_curl
    }

    pub fn d_div(&self) -> &SparseMatrix<i32> {
        &self.d_div
    }

    pub fn c0_curl(&self) -> &SparseMatrix<i32> {
        &self.c0_curl
    }

    /// `(E_grad, C_curl, D_div, C0_curl)`.
    pub fn incidence_matrices(&self) -> (&SparseMatrix<i32>, &SparseMatrix<i32>, &SparseMatrix<i32>, &SparseMatrix<i32>) {
        (&self.e_grad, &self.c_curl, &self.d_div, &self.c0_curl)
    }

    /// Drops the boundary DOFs of a C field.
    pub fn restrict_boundary(&self, field: &DiscreteField<T>) -> Result<DiscreteField<T>> {
        field.expect_space(SpaceTag::C)?;
        self.check_len(field)?;
        let coeffs = self.c0_to_c.iter().map(|&i| field.coeffs[i]).collect();
        Ok(DiscreteField::new(SpaceTag::C0, coeffs, field.time))
    }

    /// Zero-pads a C0 field into C.
    pub fn embed(&self, field: &DiscreteField<T>) -> Result<DiscreteField<T>> {
        field.expect_space(SpaceTag::C0)?;
        self.check_len(field)?;
        Ok(DiscreteField::new(SpaceTag::C, self.embed_coeffs(&field.coeffs), field.time))
    }

    pub fn embed_coeffs(&self, c0: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim(SpaceTag::C)];
        for (i0, &i) in self.c0_to_c.iter().enumerate() {
            out[i] = c0[i0];
        }
        out
    }

    pub fn check_len(&self, field: &DiscreteField<T>) -> Result<()> {
        let expected = self.dim(field.space);
        if field.coeffs.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{:?} field has {} coefficients, space dimension is {expected}",
                field.space,
                field.coeffs.len()
            )));
        }
        Ok(())
    }

    /// Physical (Piola-mapped) values of the local basis of `space` on element `e`.
    ///
    /// For C0 only the local functions of interior global DOFs are returned.
    pub fn evaluate_basis(&self, space: SpaceTag, e: usize, points: &[V3<T>]) -> Result<BasisEvaluation<T>> {
        let form = space.form();
        let table = ReferenceTable::at_points(&self.basis, form, points);
        let geo = self.mesh.jacobian_data(e, points)?;
        let dofs_c = self.element_dofs(form, e);
        let keep: Vec<(usize, usize)> = match space {
            SpaceTag::C0 => dofs_c
                .iter()
                .enumerate()
                .filter_map(|(a, &g)| self.c_to_c0[g].map(|g0| (a, g0)))
                .collect(),
            _ => dofs_c.iter().copied().enumerate().collect(),
        };
        let mut values = Vec::with_capacity(points.len() * keep.len());
        for p in 0..points.len() {
            let cols = piola_columns(form, &geo, p);
            for &(a, _) in &keep {
                let s = table.value(p, a);
                let g = cols[table.component[a]];
                values.push([g[0] * s, g[1] * s, g[2] * s]);
            }
        }
        Ok(BasisEvaluation { space, dofs: keep.iter().map(|&(_, g)| g).collect(), num_points: points.len(), values })
    }

    /// Evaluates a field of any space at local points of element `e`.
    pub fn evaluate_field(&self, field: &DiscreteField<T>, e: usize, points: &[V3<T>]) -> Result<Vec<V3<T>>> {
        self.check_len(field)?;
        let ev = self.evaluate_basis(field.space, e, points)?;
        let nb = ev.dofs.len();
        Ok((0..points.len())
            .map(|p| {
                let mut v = [T::zero(); 3];
                for (a, &g) in ev.dofs.iter().enumerate() {
                    let c = field.coeffs[g];
                    let b = ev.values[p * nb + a];
                    for d in 0..3 {
                        v[d] = v[d] + c * b[d];
                    }
                }
                v
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoxDomain, MappingSpec};
    use std::collections::BTreeSet;

    fn complex(k: usize, n: usize, c: f64) -> DeRhamComplex<f64> {
        let map = if c == 0.0 { MappingSpec::affine() } else { MappingSpec::crazy(c) };
        DeRhamComplex::build(HexMesh::build(k, BoxDomain::unit(), map).unwrap(), n).unwrap()
    }

    #[test]
    fn cube_complex_counts() {
        let c = complex(1, 1, 0.0);
        assert_eq!(c.dims(), (8, 12, 0, 6, 1));
        assert_eq!(complex(2, 1, 0.0).dim(SpaceTag::S), 8);
    }

    #[test]
    fn counts_match_element_tables() {
        let c = complex(3, 2, 0.0);
        let n = 6usize;
        let expect = [(n + 1).pow(3), 3 * n * (n + 1).pow(2), 3 * n * n * (n + 1), n.pow(3)];
        for form in 0..4 {
            let mut seen = BTreeSet::new();
            for e in 0..27 {
                seen.extend(c.element_dofs(form, e).iter().copied());
            }
            assert_eq!(seen.len(), expect[form]);
            assert_eq!(c.global_lattice(form).len(), expect[form]);
            assert_eq!(*seen.iter().next_back().unwrap(), expect[form] - 1);
        }
    }

    #[test]
    fn lattice_roundtrip() {
        for form in 0..4 {
            let l = Lattice::new(form, 3);
            for i in 0..l.len() {
                let (c, p) = l.coords(i);
                assert_eq!(l.index(c, p), i);
            }
        }
    }

    #[test]
    fn sequence_property() {
        for n in 1..=6 {
            let g = grad_incidence(n);
            let c = curl_incidence(n);
            let d = div_incidence(n);
            assert!(c.matmul(&g).is_zero());
            assert!(d.matmul(&c).is_zero());
            assert!(g.values().iter().chain(c.values()).chain(d.values()).all(|v| v.abs() == 1));
        }
    }

    #[test]
    fn c0_curl_is_column_selection() {
        let c = complex(2, 2, 0.0);
        let full = c.c_curl().to_dense();
        let sub = c.c0_curl().to_dense();
        for (i0, &i) in c.c0_to_c().iter().enumerate() {
            for r in 0..full.len() {
                assert_eq!(sub[r][i0], full[r][i]);
            }
        }
    }

    #[test]
    fn incidence_is_metric_free() {
        let a = complex(2, 2, 0.0);
        let b = complex(2, 2, 0.1);
        assert_eq!(a.incidence_matrices(), b.incidence_matrices());
    }

    fn rank(m: &SparseMatrix<i32>) -> usize {
        let d = m.to_dense();
        let dm = nalgebra::DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| d[i][j] as f64);
        if m.nrows() == 0 || m.ncols() == 0 {
            return 0;
        }
        dm.rank(1e-9)
    }

    #[test]
    fn exactness_by_rank() {
        for &(k, n) in &[(1, 1), (1, 2), (2, 1), (2, 2)] {
            let c = complex(k, n, 0.0);
            let (g, cu, dv, _) = c.incidence_matrices();
            let (rg, rc, rd) = (rank(g), rank(cu), rank(dv));
            let (ng, nc, _, nd, ns) = c.dims();
            // contractible domain: ker grad = constants, ker curl = im grad, ker div = im curl, div onto
            assert_eq!(ng - rg, 1);
            assert_eq!(nc - rc, rg);
            assert_eq!(nd - rd, rc);
            assert_eq!(rd, ns);
        }
    }

    #[test]
    fn boundary_dofs_match_tangential_traces() {
        // oracle: local C functions with nonzero tangential trace on a boundary face
        let cx = complex(2, 2, 0.1);
        let pts1d = [-0.77, -0.2, 0.35, 0.9];
        let mut found = BTreeSet::new();
        for e in 0..cx.mesh().num_elements() {
            let ec = cx.mesh().element_coords(e);
            for axis in 0..3 {
                for (side, val) in [(0usize, -1.0), (cx.mesh().k() - 1, 1.0)] {
                    if ec[axis] != side {
                        continue;
                    }
                    let mut pts = Vec::new();
                    for &a in &pts1d {
                        for &b in &pts1d {
                            let mut p = [0.0; 3];
                            p[axis] = val;
                            p[(axis + 1) % 3] = a;
                            p[(axis + 2) % 3] = b;
                            pts.push(p);
                        }
                    }
                    let ev = cx.evaluate_basis(SpaceTag::C, e, &pts).unwrap();
                    let geo = cx.mesh().jacobian_data(e, &pts).unwrap();
                    for (a, &g) in ev.dofs.iter().enumerate() {
                        for p in 0..pts.len() {
                            // tangent vectors of the face are columns of J along the other two axes
                            let v = ev.value(p, a);
                            let t: f64 = [(axis + 1) % 3, (axis + 2) % 3]
                                .iter()
                                .map(|&m| {
                                    let col = [geo.jacobian[p][0][m], geo.jacobian[p][1][m], geo.jacobian[p][2][m]];
                                    crate::scalar::vec3::dot(&v, &col).abs()
                                })
                                .sum();
                            if t > 1e-12 {
                                found.insert(g);
                            }
                        }
                    }
                }
            }
        }
        let mask: BTreeSet<usize> = (0..cx.dim(SpaceTag::C)).filter(|&i| cx.boundary_mask()[i]).collect();
        assert_eq!(found, mask);
        assert_eq!(cx.dim(SpaceTag::C) - cx.dim(SpaceTag::C0), mask.len());
    }

    #[test]
    fn restrict_and_embed() {
        let c = complex(2, 1, 0.0);
        let z = DiscreteField::zeros(SpaceTag::C, c.dim(SpaceTag::C), Default::default());
        let r = c.restrict_boundary(&z).unwrap();
        assert!(r.coeffs.iter().all(|&v| v == 0.0));
        let mut f = z.clone();
        for (i, v) in f.coeffs.iter_mut().enumerate() {
            if !c.boundary_mask()[i] {
                *v = i as f64 + 0.5;
            }
        }
        let back = c.embed(&c.restrict_boundary(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        assert!(matches!(c.embed(&f), Err(Error::SpaceMismatch { .. })));
    }

    fn face_points(axis: usize, val: f64) -> Vec<V3<f64>> {
        let pts1d = [-0.6, 0.1, 0.8];
        let mut pts = Vec::new();
        for &a in &pts1d {
            for &b in &pts1d {
                let mut p = [0.0; 3];
                p[axis] = val;
                p[(axis + 1) % 3] = a;
                p[(axis + 2) % 3] = b;
                pts.push(p);
            }
        }
        pts
    }

    #[test]
    fn traces_are_continuous_across_faces() {
        let cx = complex(2, 2, 0.1);
        let mesh = cx.mesh();
        let mut coeffs_c: Vec<f64> = (0..cx.dim(SpaceTag::C)).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        coeffs_c[0] = 1.0;
        let fc = DiscreteField::new(SpaceTag::C, coeffs_c, Default::default());
        let fd = DiscreteField::new(
            SpaceTag::D,
            (0..cx.dim(SpaceTag::D)).map(|i| ((i * 13 % 7) as f64 - 3.0) / 2.0).collect(),
            Default::default(),
        );
        for axis in 0..3 {
            let mut lo = [0, 0, 0];
            lo[axis] = 0;
            let mut hi = lo;
            hi[axis] = 1;
            let (e0, e1) = (mesh.element_index(lo), mesh.element_index(hi));
            let p0 = face_points(axis, 1.0);
            let p1 = face_points(axis, -1.0);
            let geo = mesh.jacobian_data(e0, &p0).unwrap();
            let c0 = cx.evaluate_field(&fc, e0, &p0).unwrap();
            let c1 = cx.evaluate_field(&fc, e1, &p1).unwrap();
            let d0 = cx.evaluate_field(&fd, e0, &p0).unwrap();
            let d1 = cx.evaluate_field(&fd, e1, &p1).unwrap();
            for p in 0..p0.len() {
                let x0 = mesh.local_to_physical(e0, &p0[p]);
                let x1 = mesh.local_to_physical(e1, &p1[p]);
                assert!((0..3).all(|d| (x0[d] - x1[d]).abs() < 1e-14));
                let j = geo.jacobian[p];
                let col = |m: usize| [j[0][m], j[1][m], j[2][m]];
                for m in [(axis + 1) % 3, (axis + 2) % 3] {
                    let t = col(m);
                    let diff = crate::scalar::vec3::dot(&c0[p], &t) - crate::scalar::vec3::dot(&c1[p], &t);
                    assert!(diff.abs() < 1e-12, "tangential jump {diff}");
                }
                let nrm = crate::scalar::vec3::cross(&col((axis + 1) % 3), &col((axis + 2) % 3));
                let diff = crate::scalar::vec3::dot(&d0[p], &nrm) - crate::scalar::vec3::dot(&d1[p], &nrm);
                assert!(diff.abs() < 1e-12, "normal jump {diff}");
            }
        }
    }
}
