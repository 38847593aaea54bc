//! Metric-dependent matrices and vectors: mass matrices, trilinear-form matrices,
//! load vectors, canonical interpolation and L2 errors.
//!
//! Element contributions are computed in parallel and merged in element order,
//! so results do not depend on the number of threads.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::{is_edge, piola_columns, DeRhamComplex, ReferenceTable, SpaceTag};
use crate::error::{Error, Result};
use crate::field::{DiscreteField, TimeLabel};
use crate::mesh::{ElementGeometry, TensorRule};
use crate::quadrature::{gauss_rule, QuadratureRule};
use crate::scalar::vec3::{self, V3};
use crate::scalar::Real;
use crate::sparse::SparseMatrix;

/// Gauss points per sub-interval used by the canonical interpolation.
pub const INTERPOLATION_POINTS: usize = 12;

/// Trilinear-form matrices `A(alpha, beta, gamma) = <alpha x beta, gamma>` with one frozen slot.
///
/// Rows are always test functions of the block row where the matrix is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrilinearKind {
    /// `A(omega, tau_b, tau_a)`, D x D.
    AOmega,
    /// `A(sigma_b, H, tau_a)`, D x C.
    AH,
    /// `A(sigma_b, H, sigma_a)`, C x C.
    AAH,
    /// `A(u, sigma0_b, tau_a)`, D x C0.
    AU,
    /// `A(sigma0_b, B, tau_a)`, D x C0.
    AB,
    /// `A(tau_b, B, tau_a)`, D x D. Sandwiched as `C0^T A C0` it gives the Hall
    /// term `A(curl H, B, curl g)` of the induction equation.
    ABCurl,
}

struct KindInfo {
    test_form: usize,
    trial_form: usize,
    /// `-1` when the frozen field sits in the first slot.
    sign: f64,
    skew: bool,
    trial_c0: bool,
}

impl TrilinearKind {
    fn info(self) -> KindInfo {
        use TrilinearKind::*;
        match self {
            AOmega => KindInfo { test_form: 2, trial_form: 2, sign: -1.0, skew: true, trial_c0: false },
            AH => KindInfo { test_form: 2, trial_form: 1, sign: 1.0, skew: false, trial_c0: false },
            AAH => KindInfo { test_form: 1, trial_form: 1, sign: 1.0, skew: true, trial_c0: false },
            AU => KindInfo { test_form: 2, trial_form: 1, sign: -1.0, skew: false, trial_c0: true },
            AB => KindInfo { test_form: 2, trial_form: 1, sign: 1.0, skew: false, trial_c0: true },
            ABCurl => KindInfo { test_form: 2, trial_form: 2, sign: 1.0, skew: true, trial_c0: false },
        }
    }

    /// Space of the frozen field.
    pub fn frozen_space(self) -> SpaceTag {
        use TrilinearKind::*;
        match self {
            AOmega => SpaceTag::C,
            AH | AAH => SpaceTag::C0,
            AU | AB | ABCurl => SpaceTag::D,
        }
    }
}

/// Per-element quadrature data at the assembly rule.
#[derive(Debug, Clone)]
struct ElementCache<T> {
    geometry: ElementGeometry<T>,
    /// `w_q det J_q`
    wdet: Vec<T>,
    /// Piola columns for forms 1 and 2.
    piola: [Vec<[V3<T>; 3]>; 2],
}

/// Assembles metric-dependent operators of a [`DeRhamComplex`].
pub struct Assembler<T: Real> {
    complex: Arc<DeRhamComplex<T>>,
    rule: TensorRule<T>,
    tables: [ReferenceTable<T>; 4],
    cache: Vec<ElementCache<T>>,
    interp_rule: QuadratureRule<T>,
    pool: Option<Arc<rayon::ThreadPool>>,
}

/// Thread cap from `HALLMHD_THREADS`, if set to a positive integer.
pub fn thread_cap_from_env() -> Option<usize> {
    std::env::var("HALLMHD_THREADS").ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

impl<T: Real> Assembler<T> {
    /// Uses `N + 2` Gauss points per direction.
    pub fn new(complex: Arc<DeRhamComplex<T>>) -> Result<Self> {
        let q = complex.degree() + 2;
        Self::with_quadrature(complex, q)
    }

    pub fn with_quadrature(complex: Arc<DeRhamComplex<T>>, points_per_axis: usize) -> Result<Self> {
        if points_per_axis == 0 {
            return Err(Error::InvalidParams("quadrature needs at least one point".into()));
        }
        let rule = TensorRule::gauss(points_per_axis);
        let tables = [0, 1, 2, 3].map(|f| ReferenceTable::tensor(complex.basis(), f, &rule.rule.points));
        let pool = match thread_cap_from_env() {
            Some(n) => Some(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?,
            )),
            None => None,
        };
        let mesh = complex.mesh();
        let cache = (0..mesh.num_elements())
            .map(|e| {
                let geometry = mesh.jacobian_data(e, &rule.points)?;
                let wdet = rule.weights.iter().zip(&geometry.det).map(|(w, d)| *w * *d).collect();
                let piola = [1, 2].map(|f| (0..rule.len()).map(|p| piola_columns(f, &geometry, p)).collect());
                Ok(ElementCache { geometry, wdet, piola })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { complex, rule, tables, cache, interp_rule: gauss_rule(INTERPOLATION_POINTS), pool })
    }

    pub fn complex(&self) -> &DeRhamComplex<T> {
        &self.complex
    }

    pub fn complex_arc(&self) -> Arc<DeRhamComplex<T>> {
        self.complex.clone()
    }

    pub fn quadrature_points(&self) -> usize {
        self.rule.rule.len()
    }

    fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }

    /// Runs `local` on every element in parallel and concatenates the triplets in element order.
    fn gather<V: Send>(&self, local: impl Fn(usize) -> Vec<V> + Sync + Send) -> Vec<V> {
        let ne = self.cache.len();
        let parts: Vec<Vec<V>> = self.install(|| (0..ne).into_par_iter().map(&local).collect());
        parts.into_iter().flatten().collect()
    }

    /// Physical basis value of local function `a` of `form` at assembly point `p`.
    #[inline]
    fn basis_value(&self, form: usize, e: usize, p: usize, a: usize) -> V3<T> {
        let t = &self.tables[form];
        let s = t.value(p, a);
        let c = t.component[a];
        let g = match form {
            1 | 2 => self.cache[e].piola[form - 1][p][c],
            0 => [T::one(), T::zero(), T::zero()],
            _ => [T::one() / self.cache[e].geometry.det[p], T::zero(), T::zero()],
        };
        [g[0] * s, g[1] * s, g[2] * s]
    }

    /// Mass matrix of a space. Symmetric pairs are assembled once, so `M == M^T` exactly.
    pub fn mass_matrix(&self, space: SpaceTag) -> SparseMatrix<T> {
        let form = space.form();
        let n = self.complex.global_lattice(form).len();
        let table = &self.tables[form];
        let nb = table.num_basis;
        let nq = self.rule.len();
        let trip = self.gather(|e| {
            let c = &self.cache[e];
            let mut local = vec![T::zero(); nb * nb];
            for p in 0..nq {
                // metric tensor between reference components
                let mut g = [[T::zero(); 3]; 3];
                match form {
                    1 | 2 => {
                        let cols = &c.piola[form - 1][p];
                        for i in 0..3 {
                            for j in i..3 {
                                g[i][j] = c.wdet[p] * vec3::dot(&cols[i], &cols[j]);
                                g[j][i] = g[i][j];
                            }
                        }
                    }
                    0 => g[0][0] = c.wdet[p],
                    _ => g[0][0] = c.wdet[p] / (c.geometry.det[p] * c.geometry.det[p]),
                }
                let row = table.row(p);
                for a in 0..nb {
                    let sa = row[a];
                    if sa == T::zero() {
                        continue;
                    }
                    let ca = table.component[a];
                    for b in a..nb {
                        local[a * nb + b] = local[a * nb + b] + g[ca][table.component[b]] * sa * row[b];
                    }
                }
            }
            let dofs = self.complex.element_dofs(form, e);
            let mut t = Vec::with_capacity(nb * nb);
            for a in 0..nb {
                t.push((dofs[a], dofs[a], local[a * nb + a]));
                for b in a + 1..nb {
                    let v = local[a * nb + b];
                    t.push((dofs[a], dofs[b], v));
                    t.push((dofs[b], dofs[a], v));
                }
            }
            t
        });
        let m = SparseMatrix::from_triplets(n, n, &trip);
        match space {
            SpaceTag::C0 => {
                let keep = self.complex.c0_to_c();
                m.select_rows(keep).select_columns(keep)
            }
            _ => m,
        }
    }

    /// Values of a frozen field of `form` at the assembly points of element `e`.
    fn frozen_values(&self, form: usize, coeffs: &[T], e: usize) -> Vec<V3<T>> {
        let dofs = self.complex.element_dofs(form, e);
        (0..self.rule.len())
            .map(|p| {
                let mut v = vec3::zero();
                for (a, &g) in dofs.iter().enumerate() {
                    let c = coeffs[g];
                    if c == T::zero() {
                        continue;
                    }
                    let b = self.basis_value(form, e, p, a);
                    for d in 0..3 {
                        v[d] = v[d] + c * b[d];
                    }
                }
                v
            })
            .collect()
    }

    /// Matrix of the trilinear form with `frozen` in the slot given by `kind`.
    pub fn trilinear_matrix(&self, kind: TrilinearKind, frozen: &DiscreteField<T>) -> Result<SparseMatrix<T>> {
        let info = kind.info();
        let expected = kind.frozen_space();
        let frozen_coeffs = match (expected, frozen.space) {
            (SpaceTag::C0, SpaceTag::C0) => {
                self.complex.check_len(frozen)?;
                self.complex.embed_coeffs(&frozen.coeffs)
            }
            (e, f) if e == f => {
                self.complex.check_len(frozen)?;
                frozen.coeffs.clone()
            }
            _ => return Err(Error::SpaceMismatch { expected, found: frozen.space }),
        };
        let frozen_form = expected.form();
        let (tf, rf) = (info.test_form, info.trial_form);
        let (test_t, trial_t) = (&self.tables[tf], &self.tables[rf]);
        let (nt, nr) = (test_t.num_basis, trial_t.num_basis);
        let sign = T::lit(info.sign);
        let nq = self.rule.len();
        let trip = self.gather(|e| {
            let c = &self.cache[e];
            let f = self.frozen_values(frozen_form, &frozen_coeffs, e);
            if f.iter().all(|v| v.iter().all(|x| *x == T::zero())) {
                return Vec::new();
            }
            let mut local = vec![T::zero(); nt * nr];
            for p in 0..nq {
                let gt = &c.piola[tf - 1][p];
                let gr = &c.piola[rf - 1][p];
                // m[ct][cr] = w det (g_cr x F) . g_ct
                let mut m = [[T::zero(); 3]; 3];
                for cr in 0..3 {
                    let x = vec3::cross(&gr[cr], &f[p]);
                    for ct in 0..3 {
                        m[ct][cr] = sign * c.wdet[p] * vec3::dot(&x, &gt[ct]);
                    }
                }
                let (rt, rr) = (test_t.row(p), trial_t.row(p));
                for a in 0..nt {
                    let sa = rt[a];
                    if sa == T::zero() {
                        continue;
                    }
                    let ca = test_t.component[a];
                    let start = if info.skew { a + 1 } else { 0 };
                    for b in start..nr {
                        local[a * nr + b] = local[a * nr + b] + m[ca][trial_t.component[b]] * sa * rr[b];
                    }
                }
            }
            let dt = self.complex.element_dofs(tf, e);
            let dr = self.complex.element_dofs(rf, e);
            let mut t = Vec::with_capacity(nt * nr);
            for a in 0..nt {
                if info.skew {
                    for b in a + 1..nr {
                        let v = local[a * nr + b];
                        t.push((dt[a], dr[b], v));
                        t.push((dr[b], dt[a], -v));
                    }
                } else {
                    for b in 0..nr {
                        t.push((dt[a], dr[b], local[a * nr + b]));
                    }
                }
            }
            t
        });
        let rows = self.complex.global_lattice(tf).len();
        let cols = self.complex.global_lattice(rf).len();
        let m = SparseMatrix::from_triplets(rows, cols, &trip);
        Ok(if info.trial_c0 { m.select_columns(self.complex.c0_to_c()) } else { m })
    }

    /// Moments `<f(., t), phi_a>` against the basis of a vector space (C, C0 or D).
    pub fn load_vector<F>(&self, space: SpaceTag, f: &F, t: T) -> Result<Vec<T>>
    where
        F: Fn(&V3<T>, T) -> V3<T> + Sync,
    {
        if !space.is_vector() {
            return Err(Error::InvalidParams(format!("load vectors are defined for vector spaces, got {space:?}")));
        }
        let form = space.form();
        let n = self.complex.global_lattice(form).len();
        let table = &self.tables[form];
        let nb = table.num_basis;
        let pairs = self.gather(|e| {
            let c = &self.cache[e];
            let mut local = vec![T::zero(); nb];
            for p in 0..self.rule.len() {
                let fv = f(&c.geometry.points[p], t);
                let cols = &c.piola[form - 1][p];
                let proj = [0, 1, 2].map(|k| c.wdet[p] * vec3::dot(&fv, &cols[k]));
                let row = table.row(p);
                for a in 0..nb {
                    local[a] = local[a] + proj[table.component[a]] * row[a];
                }
            }
            self.complex.element_dofs(form, e).iter().copied().zip(local).collect()
        });
        let mut out = vec![T::zero(); n];
        for (g, v) in pairs {
            out[g] = out[g] + v;
        }
        Ok(match space {
            SpaceTag::C0 => self.complex.c0_to_c().iter().map(|&i| out[i]).collect(),
            _ => out,
        })
    }

    /// Canonical interpolation: point values (G), edge integrals of tangential
    /// components (C), face fluxes (D) and cell integrals (S).
    ///
    /// Scalar spaces read component 0 of `f`.
    pub fn interpolate<F>(&self, space: SpaceTag, f: &F, t: T) -> DiscreteField<T>
    where
        F: Fn(&V3<T>, T) -> V3<T> + Sync,
    {
        let cx = &*self.complex;
        let form = space.form();
        let lattice = cx.global_lattice(form);
        let (nn, k) = (cx.degree(), cx.mesh().k());
        let nodes = cx.basis().nodes().to_vec();
        let coeffs: Vec<T> = self.install(|| {
            (0..lattice.len())
                .into_par_iter()
                .map(|idx| {
                    let (comp, pos) = lattice.coords(idx);
                    let ec = pos.map(|p| (p / nn).min(k - 1));
                    let local = [0, 1, 2].map(|d| pos[d] - ec[d] * nn);
                    let e = cx.mesh().element_index(ec);
                    let edge_axes: Vec<usize> = (0..3).filter(|&d| is_edge(form, comp, d)).collect();
                    self.canonical_dof(form, comp, e, local, &edge_axes, &nodes, f, t)
                })
                .collect()
        });
        let field = DiscreteField::new(space.into_full(), coeffs, TimeLabel::default());
        match space {
            SpaceTag::C0 => cx.restrict_boundary(&field).expect("C field restricts to C0"),
            _ => field,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn canonical_dof<F>(
        &self,
        form: usize,
        comp: usize,
        e: usize,
        local: [usize; 3],
        edge_axes: &[usize],
        nodes: &[T],
        f: &F,
        t: T,
    ) -> T
    where
        F: Fn(&V3<T>, T) -> V3<T> + Sync,
    {
        let mesh = self.complex.mesh();
        let r = &self.interp_rule;
        let nq = r.len();
        let half = T::lit(0.5);
        // integration over the sub-box spanned by the edge axes
        let mut total = T::zero();
        let count = nq.pow(edge_axes.len() as u32);
        for q in 0..count {
            let mut xi = [0, 1, 2].map(|d| nodes[local[d]]);
            let mut w = T::one();
            let mut qq = q;
            for &d in edge_axes {
                let (a, b) = (nodes[local[d]], nodes[local[d] + 1]);
                let i = qq % nq;
                qq /= nq;
                xi[d] = half * (a + b) + half * (b - a) * r.points[i];
                w = w * half * (b - a) * r.weights[i];
            }
            let x = mesh.local_to_physical(e, &xi);
            let j = mesh.local_jacobian(e, &xi);
            let col = |m: usize| [j[0][m], j[1][m], j[2][m]];
            let fv = f(&x, t);
            let v = match form {
                0 => fv[0],
                1 => vec3::dot(&fv, &col(comp)),
                2 => vec3::dot(&fv, &vec3::cross(&col((comp + 1) % 3), &col((comp + 2) % 3))),
                _ => fv[0] * vec3::det(&j),
            };
            total = total + w * v;
        }
        total
    }

    /// `sqrt(sum_e int |field - exact|^2)` with a Gauss rule two points richer than assembly.
    ///
    /// Scalar spaces compare component 0.
    pub fn l2_error<F>(&self, field: &DiscreteField<T>, exact: &F, t: T) -> Result<T>
    where
        F: Fn(&V3<T>, T) -> V3<T> + Sync,
    {
        self.complex.check_len(field)?;
        let rule = TensorRule::<T>::gauss(self.rule.rule.len() + 2);
        let parts: Vec<Result<T>> = self.install(|| {
            (0..self.cache.len())
                .into_par_iter()
                .map(|e| {
                    let geo = self.complex.mesh().jacobian_data(e, &rule.points)?;
                    let vals = self.complex.evaluate_field(field, e, &rule.points)?;
                    let mut s = T::zero();
                    for p in 0..rule.len() {
                        let ex = exact(&geo.points[p], t);
                        let d = if field.space.is_vector() {
                            [0, 1, 2].map(|k| vals[p][k] - ex[k])
                        } else {
                            [vals[p][0] - ex[0], T::zero(), T::zero()]
                        };
                        s = s + rule.weights[p] * geo.det[p] * vec3::dot(&d, &d);
                    }
                    Ok(s)
                })
                .collect()
        });
        let mut total = T::zero();
        for p in parts {
            total = total + p?;
        }
        Ok(total.sqrt())
    }
}

impl SpaceTag {
    /// C for C0, otherwise the space itself.
    pub fn into_full(self) -> SpaceTag {
        match self {
            SpaceTag::C0 => SpaceTag::C,
            s => s,
        }
    }
}
