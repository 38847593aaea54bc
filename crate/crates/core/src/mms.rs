//! Manufactured solutions on `[0, 2 pi]^3` and convergence studies built on them.
//!
//! The velocity, pressure and the "seed" electric field `E' = e^t E^` are prescribed;
//! `B = -int_0^t curl E' = (e^t - 1) b` with `b = -curl E^`, `j = curl B` and
//! `E = j / R_m - u x B + h j x B`. The magnetic source `m = curl(E - E')` closes the
//! induction equation and `f` closes the momentum equation. All closures are
//! hand-derived and checked against finite differences by [`ManufacturedCase::self_check`].

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::Assembler;
use crate::complex::{DeRhamComplex, SpaceTag};
use crate::error::{Error, Result};
use crate::mesh::{BoxDomain, HexMesh, MappingSpec};
use crate::quadrature::gauss_rule;
use crate::scalar::vec3::{self, V3};
use crate::scalar::Real;
use crate::diagnostics::DiagnosticsRecord;
use crate::field::DiscreteField;
use crate::scheme::{HallMhdScheme, RunOutput, SchemeParams, SimulationState, SourceSpec, VectorFn};

/// Points used by the self-check.
pub const SELF_CHECK_POINTS: usize = 20;
/// Absolute tolerance of the self-check.
pub const SELF_CHECK_TOLERANCE: f64 = 1e-6;

/// Physical parameters of a manufactured case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseParams {
    pub inv_rf: f64,
    pub inv_rm: f64,
    pub c_lorentz: f64,
    pub h_hall: f64,
}

impl CaseParams {
    pub fn from_scheme(p: &SchemeParams) -> Self {
        Self { inv_rf: p.inv_rf(), inv_rm: p.inv_rm(), c_lorentz: p.c_lorentz, h_hall: p.h_hall }
    }
}

struct Trig<T> {
    sx: T,
    cx: T,
    sy: T,
    cy: T,
    sz: T,
    cz: T,
}

impl<T: Real> Trig<T> {
    fn at(x: &V3<T>) -> Self {
        let (sx, cx) = x[0].sin_cos();
        let (sy, cy) = x[1].sin_cos();
        let (sz, cz) = x[2].sin_cos();
        Self { sx, cx, sy, cy, sz, cz }
    }
}

type M3<T> = [[T; 3]; 3];

fn scale<T: Real>(a: T, v: V3<T>) -> V3<T> {
    [a * v[0], a * v[1], a * v[2]]
}

fn add<T: Real>(a: V3<T>, b: V3<T>) -> V3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub<T: Real>(a: V3<T>, b: V3<T>) -> V3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn jac_vec<T: Real>(m: &M3<T>, v: &V3<T>) -> V3<T> {
    vec3::matvec(m, v)
}

/// The manufactured family for given `(1/R_f, 1/R_m, c, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub params: CaseParams,
}

impl ManufacturedCase {
    /// Builds the case and validates every closure against numerical oracles.
    pub fn build(params: CaseParams) -> Result<Self> {
        let case = Self { params };
        case.self_check()?;
        Ok(case)
    }

    pub fn domain<T: Real>() -> BoxDomain<T> {
        BoxDomain::periodic_cube()
    }

    pub fn velocity<T: Real>(&self, x: &V3<T>, t: T) -> V3<T> {
        let s = Trig::at(x);
        let et = t.exp();
        [et * s.cx * s.sy * s.sz, et * s.sx * s.cy * s.sz, -T::lit(2.0) * et * s.sx * s.sy * s.cz]
    }

    fn grad_velocity<T: Real>(&self, x: &V3<T>, t: T) -> M3<T> {
        let s = Trig::at(x);
        let et = t.exp();
        let sss = s.sx * s.sy * s.sz;
        let two = T::lit(2.0);
        let m = [
            [-sss, s.cx * s.cy * s.sz, s.cx * s.sy * s.cz],
            [s.cx * s.cy * s.sz, -sss, s.sx * s.cy * s.cz],
            [-two * s.cx * s.sy * s.cz, -two * s.sx * s.cy * s.cz, two * sss],
        ];
        m.map(|r| r.map(|v| et * v))
    }

    /// `curl u`.
    pub fn vorticity<T: Real>(&self, x: &V3<T>, t: T) -> V3<T> {
        let s = Trig::at(x);
        let a = T::lit(3.0) * t.exp();
        [-a * s.sx * s.cy * s.cz, a * s.cx * s.sy * s.cz, T::zero()]
    }

    /// Total pressure.
    pub fn pressure<T: Real>(&self, x: &V3<T>, t: T) -> T {
        let s = Trig::at(x);
        s.sx * s.sy * s.sz * (-t).exp()
    }

    fn grad_pressure<T: Real>(&self, x: &V3<T>, t: T) -> V3<T> {
        let s = Trig::at(x);
        let a = (-t).exp();
        [a * s.cx * s.sy * s.sz, a * s.sx * s.cy * s.sz, a * s.sx * s.sy * s.cz]
    }

    /// Spatial factor of the seed field `E'`.
    fn e_hat<T: Real>(&self, x: &V3<T>) -> V3<T> {
        let s = Trig::at(x);
        [s.sx * s.cy, -s.sy * s.cz, -s.cx * s.sz]
    }

    fn curl_e_hat<T: Real>(&self, x: &V3<T>) -> V3<T> {
        let s = Trig::at(x);
        [-s.sy * s.sz, -s.sx * s.sz, s.sx * s.sy]
    }

    /// The prescribed electric field `E'`.
    pub fn seed_electric<T: Real>(&self, x: &V3<T>, t: T) -> V3<T> {
        scale(t.exp(), self.e_hat(x))
    }

    pub fn magnetic<T: Real>(&self, x: &V3<T>, t: T) -> V3<T> {
        scale(-t.exp_m1(), self.curl_e_hat(x))
    }

    fn grad_magnetic<T: Real>(&self, x: &V3<T>, t: T) -> M3<T> {
        let s = Trig::at(x);
        let a = t.exp_m1();
        let z = T::zero();
        let m = [
            [z, s.cy * s.sz, s.sy * s.cz],
            [s.cx * s.sz, z, s.sx * s.cz],
            [-s.cx * s.sy, -s.sx * s.cy, z],
        ];
        m.map(|r| r.map(|v| a * v))
    }

    /// `curl B`.
    pub fn current<T: Real>(&self, x: &V3<T>, t: T) -> V3<T> {
        let s = Trig::at(x);
        let a = t.exp_m1();
        [
            a * (-s.sx * s.cy - s.sx * s.cz),
            a * (s.sy * s.cz + s.cx * s.sy),
            a * (s.cx * s.sz - s.cy * s.sz),
        ]
    }

    fn grad_current<T: Real>(&self, x: &V3<T>, t: T) -> M3<T> {
        let s = Trig::at(x);
        let a = t.exp_m1();
        let m = [
            [-s.cx * s.cy - s.cx * s.cz, s.sx * s.sy, s.sx * s.sz],
            [-s.sx * s.sy, s.cy * s.cz + s.cx * s.cy, -s.sy * s.sz],
            [-s.sx * s.sz, s.sy * s.sz, s.cx * s.cz - s.cy * s.cz],
        ];
        m.map(|r| r.map(|v| a * v))
    }

    /// `E = j / R_m - u x B + h j x B`.
    pub fn electric<T: Real>(&self, x: &V3<T>, t: T) -> V3<T> {
        let p = &self.params;
        let u = self.velocity(x, t);
        let b = self.magnetic(x, t);
        let j = self.current(x, t);
        let ub = vec3::cross(&u, &b);
        let jb = vec3::cross(&j, &b);
        add(sub(scale(T::lit(p.inv_rm), j), ub), scale(T::lit(p.h_hall), jb))
    }

    /// Body force closing the momentum equation.
    pub fn body_force<T: Real>(&self, x: &V3<T>, t: T) -> V3<T> {
        let p = &self.params;
        let u = self.velocity(x, t);
        let w = self.vorticity(x, t);
        let j = self.current(x, t);
        let b = self.magnetic(x, t);
        let mut f = add(u, vec3::cross(&w, &u));
        f = add(f, scale(T::lit(3.0 * p.inv_rf), u));
        f = sub(f, scale(T::lit(p.c_lorentz), vec3::cross(&j, &b)));
        add(f, self.grad_pressure(x, t))
    }

    /// Magnetic source `curl(E - E')`.
    pub fn magnetic_source<T: Real>(&self, x: &V3<T>, t: T) -> V3<T> {
        let p = &self.params;
        let u = self.velocity(x, t);
        let b = self.magnetic(x, t);
        let j = self.current(x, t);
        let gu = self.grad_velocity(x, t);
        let gb = self.grad_magnetic(x, t);
        let gj = self.grad_current(x, t);
        // curl curl B = -lap B = 2 B
        let mut m = scale(T::lit(2.0 * p.inv_rm), b);
        // -curl(u x B) = -(grad u) B + (grad B) u
        m = sub(m, sub(jac_vec(&gu, &b), jac_vec(&gb, &u)));
        // curl(j x B) = (grad j) B - (grad B) j
        m = add(m, scale(T::lit(p.h_hall), sub(jac_vec(&gj, &b), jac_vec(&gb, &j))));
        sub(m, scale(t.exp(), self.curl_e_hat(x)))
    }

    /// Force and magnetic source as scheme inputs.
    pub fn sources<T: Real>(&self) -> SourceSpec<T> {
        let a = *self;
        let b = *self;
        let f: VectorFn<T> = Arc::new(move |x: &V3<T>, t: T| a.body_force(x, t));
        let m: VectorFn<T> = Arc::new(move |x: &V3<T>, t: T| b.magnetic_source(x, t));
        SourceSpec { f: Some(f), m: Some(m) }
    }

    /// Checks the closures against fourth-order finite differences and a numerical time
    /// integral at [`SELF_CHECK_POINTS`] pseudo-random space-time points.
    pub fn self_check(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let tau = 2.0 * std::f64::consts::PI;
        let rule = gauss_rule::<f64>(12);
        let tol = SELF_CHECK_TOLERANCE;
        let fail = |what: &str, x: &V3<f64>, t: f64, r: f64| -> Result<()> {
            if r.is_finite() && r <= tol {
                Ok(())
            } else {
                Err(Error::SelfCheckFailed(format!("{what}: residual {r:e} at x = {x:?}, t = {t}")))
            }
        };
        for _ in 0..SELF_CHECK_POINTS {
            let x: V3<f64> = [rng.gen::<f64>() * tau, rng.gen::<f64>() * tau, rng.gen::<f64>() * tau];
            let t: f64 = rng.gen();
            let nrm = |v: V3<f64>| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));

            let w = self.vorticity(&x, t);
            fail("vorticity", &x, t, nrm(sub(w, fd_curl(|y| self.velocity(y, t), &x))))?;
            let j = self.current(&x, t);
            fail("current", &x, t, nrm(sub(j, fd_curl(|y| self.magnetic(y, t), &x))))?;
            fail("divergence of u", &x, t, fd_div(|y| self.velocity(y, t), &x).abs())?;
            fail("divergence of B", &x, t, fd_div(|y| self.magnetic(y, t), &x).abs())?;

            // momentum with every derivative taken numerically
            let u = self.velocity(&x, t);
            let b = self.magnetic(&x, t);
            let du = fd_time(|s| self.velocity(&x, s), t);
            let curl_w = fd_curl(|y| self.vorticity(y, t), &x);
            let grad_p = fd_grad(|y| self.pressure(y, t), &x);
            let p = &self.params;
            let mut r = add(du, vec3::cross(&w, &u));
            r = add(r, scale(p.inv_rf, curl_w));
            r = sub(r, scale(p.c_lorentz, vec3::cross(&j, &b)));
            r = sub(add(r, grad_p), self.body_force(&x, t));
            fail("momentum equation", &x, t, nrm(r))?;

            // induction with the source
            let db = fd_time(|s| self.magnetic(&x, s), t);
            let curl_e = fd_curl(|y| self.electric(y, t), &x);
            let m = self.magnetic_source(&x, t);
            fail("induction equation", &x, t, nrm(sub(add(db, curl_e), m)))?;
            let curl_diff = fd_curl(|y| sub(self.electric(y, t), self.seed_electric(y, t)), &x);
            fail("magnetic source", &x, t, nrm(sub(m, curl_diff)))?;

            // B(t) = -int_0^t curl E' ds
            let mut acc = [0.0; 3];
            for c in 0..3 {
                acc[c] = -rule.integrate_on(0.0, t, |s| fd_curl(|y| self.seed_electric(y, s), &x)[c]);
            }
            fail("time integral of B", &x, t, nrm(sub(b, acc)))?;
            fail("initial B", &x, 0.0, nrm(self.magnetic(&x, 0.0)))?;

            // homogeneous boundary conditions on a random face point
            let axis = rng.gen_range(0..3);
            let mut xb = x;
            xb[axis] = if rng.gen::<bool>() { 0.0 } else { tau };
            let tangential = |v: V3<f64>| (0..3).filter(|&d| d != axis).fold(0.0f64, |a, d| a.max(v[d].abs()));
            fail("tangential u on the boundary", &xb, t, tangential(self.velocity(&xb, t)))?;
            fail("tangential B on the boundary", &xb, t, tangential(self.magnetic(&xb, t)))?;
            fail("P on the boundary", &xb, t, self.pressure(&xb, t).abs())?;
        }
        Ok(())
    }
}

const FD_STEP: f64 = 1e-3;

fn fd4(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = FD_STEP;
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// `d/dx_d` of a vector field, fourth-order central.
fn fd_partial(f: &impl Fn(&V3<f64>) -> V3<f64>, x: &V3<f64>, d: usize) -> V3<f64> {
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        *o = fd4(
            |s| {
                let mut y = *x;
                y[d] = s;
                f(&y)[c]
            },
            x[d],
        );
    }
    out
}

fn fd_curl(f: impl Fn(&V3<f64>) -> V3<f64>, x: &V3<f64>) -> V3<f64> {
    let dx = fd_partial(&f, x, 0);
    let dy = fd_partial(&f, x, 1);
    let dz = fd_partial(&f, x, 2);
    [dy[2] - dz[1], dz[0] - dx[2], dx[1] - dy[0]]
}

fn fd_div(f: impl Fn(&V3<f64>) -> V3<f64>, x: &V3<f64>) -> f64 {
    (0..3).map(|d| fd_partial(&f, x, d)[d]).sum()
}

fn fd_grad(f: impl Fn(&V3<f64>) -> f64, x: &V3<f64>) -> V3<f64> {
    let g = |y: &V3<f64>| [f(y), 0.0, 0.0];
    [fd_partial(&g, x, 0)[0], fd_partial(&g, x, 1)[0], fd_partial(&g, x, 2)[0]]
}

fn fd_time(f: impl Fn(f64) -> V3<f64>, t: f64) -> V3<f64> {
    [fd4(|s| f(s)[0], t), fd4(|s| f(s)[1], t), fd4(|s| f(s)[2], t)]
}

/// Unknowns whose errors are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    U,
    Omega,
    P,
    E,
    B,
    J,
    H,
}

impl Variable {
    pub const ALL: [Variable; 7] =
        [Variable::U, Variable::Omega, Variable::P, Variable::E, Variable::B, Variable::J, Variable::H];

    pub fn name(self) -> &'static str {
        match self {
            Variable::U => "u",
            Variable::Omega => "omega",
            Variable::P => "p",
            Variable::E => "e",
            Variable::B => "b",
            Variable::J => "j",
            Variable::H => "h",
        }
    }
}

/// L2 errors of one run at its final iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub degree: usize,
    pub elements: usize,
    pub dt: f64,
    pub iterations: usize,
    pub errors: Vec<(Variable, f64)>,
}

impl ErrorReport {
    pub fn error(&self, v: Variable) -> Option<f64> {
        self.errors.iter().find(|(w, _)| *w == v).map(|(_, e)| *e)
    }
}

/// One configuration of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub degree: usize,
    pub elements: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Fit against `dt`.
    Temporal,
    /// Fit against the element size `2 pi / K`.
    Spatial,
}

impl SweepAxis {
    fn abscissa(self, p: &SweepPoint) -> f64 {
        match self {
            SweepAxis::Temporal => p.dt,
            SweepAxis::Spatial => 2.0 * std::f64::consts::PI / p.elements as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub reports: Vec<ErrorReport>,
    /// Least-squares log-log slopes; NaN when the fit is degenerate.
    pub orders: Vec<(Variable, f64)>,
}

impl SweepResult {
    pub fn order(&self, v: Variable) -> Option<f64> {
        self.orders.iter().find(|(w, _)| *w == v).map(|(_, o)| *o)
    }
}

/// Least-squares slope of `log e` against `log x`. NaN with fewer than two distinct
/// abscissae or any non-positive / non-finite value.
pub fn fit_order(x: &[f64], e: &[f64]) -> f64 {
    if x.len() != e.len() || x.len() < 2 {
        return f64::NAN;
    }
    if x.iter().chain(e).any(|v| !(v.is_finite() && *v > 0.0)) {
        return f64::NAN;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let le: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let me = le.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 1e-24 {
        return f64::NAN;
    }
    let sxe: f64 = lx.iter().zip(&le).map(|(a, b)| (a - mx) * (b - me)).sum();
    sxe / sxx
}

/// Assembler on `[0, 2 pi]^3` for one sweep configuration.
pub fn assembler<T: Real>(p: &SweepPoint, mapping: MappingSpec<T>) -> Result<Assembler<T>> {
    let mesh = HexMesh::build(p.elements, ManufacturedCase::domain(), mapping)?;
    Assembler::new(Arc::new(DeRhamComplex::build(mesh, p.degree)?))
}

impl ManufacturedCase {
    /// Canonical interpolants of `u^0`, `B^0` (both D) and `H^0` (C0).
    pub fn initial_fields<T: Real>(
        &self,
        asm: &Assembler<T>,
    ) -> (DiscreteField<T>, DiscreteField<T>, DiscreteField<T>) {
        let zero = T::zero();
        let u0 = asm.interpolate(SpaceTag::D, &|x: &V3<T>, t: T| self.velocity(x, t), zero);
        let b0 = asm.interpolate(SpaceTag::D, &|x: &V3<T>, t: T| self.magnetic(x, t), zero);
        let h0 = asm.interpolate(SpaceTag::C0, &|x: &V3<T>, t: T| self.magnetic(x, t), zero);
        (u0, b0, h0)
    }

    /// L2 errors of a state: `u, omega, B, j` at `t^k`, `H` at `t^{k+1/2}`, `P, E` at `t^{k-1/2}`.
    pub fn errors<T: Real>(
        &self,
        asm: &Assembler<T>,
        st: &SimulationState<T>,
        dt: f64,
    ) -> Result<Vec<(Variable, f64)>> {
        let tk = st.k as f64 * dt;
        let s = *self;
        let scalar = move |x: &V3<T>, t: T| [s.pressure(x, t), T::zero(), T::zero()];
        let err = |f: &DiscreteField<T>, t: f64, g: &(dyn Fn(&V3<T>, T) -> V3<T> + Sync)| {
            asm.l2_error(f, &|x: &V3<T>, t: T| g(x, t), T::lit(t)).map(|e| e.to_f64_lossy())
        };
        Ok(vec![
            (Variable::U, err(&st.u, tk, &|x, t| s.velocity(x, t))?),
            (Variable::Omega, err(&st.omega, tk, &|x, t| s.vorticity(x, t))?),
            (Variable::P, err(&st.p, tk - 0.5 * dt, &scalar)?),
            (Variable::E, err(&st.e, tk - 0.5 * dt, &|x, t| s.electric(x, t))?),
            (Variable::B, err(&st.b, tk, &|x, t| s.magnetic(x, t))?),
            (Variable::J, err(&st.j, tk, &|x, t| s.current(x, t))?),
            (Variable::H, err(&st.h, tk + 0.5 * dt, &|x, t| s.magnetic(x, t))?),
        ])
    }
}

/// Runs the scheme on the manufactured case, calling `callback` after every iteration,
/// and measures the errors at the final iteration.
pub fn run_case_with<T, F>(
    case: &ManufacturedCase,
    point: &SweepPoint,
    mapping: MappingSpec<T>,
    base: &SchemeParams,
    callback: F,
) -> Result<(ErrorReport, RunOutput<T>)>
where
    T: Real,
    F: FnMut(&SimulationState<T>, &DiagnosticsRecord) -> Result<()>,
{
    let params = SchemeParams { dt: point.dt, ..base.clone() };
    let asm = assembler(point, mapping)?;
    let (u0, b0, h0) = case.initial_fields(&asm);
    let mut scheme = HallMhdScheme::new(asm, params.clone(), case.sources())?;
    let out = scheme.run(u0, b0, h0, callback)?;
    let errors = case.errors(scheme.assembler(), &out.state, params.dt)?;
    let report =
        ErrorReport { degree: point.degree, elements: point.elements, dt: params.dt, iterations: out.state.k, errors };
    Ok((report, out))
}

pub fn run_case<T: Real>(
    case: &ManufacturedCase,
    point: &SweepPoint,
    mapping: MappingSpec<T>,
    base: &SchemeParams,
) -> Result<(ErrorReport, RunOutput<T>)> {
    run_case_with(case, point, mapping, base, |s, _| {
        log::info!("K = {}, N = {}, dt = {}: iteration {}", point.elements, point.degree, point.dt, s.k);
        Ok(())
    })
}

fn fit_all(axis: SweepAxis, points: &[SweepPoint], reports: &[ErrorReport], vars: &[Variable]) -> Vec<(Variable, f64)> {
    let x: Vec<f64> = points.iter().map(|p| axis.abscissa(p)).collect();
    vars.iter()
        .map(|&v| {
            let e: Vec<f64> = reports.iter().map(|r| r.error(v).unwrap_or(f64::NAN)).collect();
            (v, fit_order(&x, &e))
        })
        .collect()
}

/// Runs every configuration and fits the order of each variable along `axis`.
pub fn convergence_sweep<T: Real>(
    case: &ManufacturedCase,
    axis: SweepAxis,
    points: &[SweepPoint],
    mapping: MappingSpec<T>,
    base: &SchemeParams,
) -> Result<SweepResult> {
    let mut reports = Vec::with_capacity(points.len());
    for p in points {
        reports.push(run_case(case, p, mapping, base)?.0);
    }
    let orders = fit_all(axis, points, &reports, &Variable::ALL);
    Ok(SweepResult { axis, reports, orders })
}

/// Errors of the canonical interpolants of `u` and `B` at time `t`: the reference rate
/// a converging discretization on the same grids can at best reach.
pub fn interpolation_sweep<T: Real>(
    case: &ManufacturedCase,
    points: &[SweepPoint],
    mapping: MappingSpec<T>,
    t: f64,
) -> Result<SweepResult> {
    let mut reports = Vec::with_capacity(points.len());
    let tt = T::lit(t);
    for p in points {
        let asm = assembler(p, mapping)?;
        let u = |x: &V3<T>, t: T| case.velocity(x, t);
        let b = |x: &V3<T>, t: T| case.magnetic(x, t);
        let ui = asm.interpolate(SpaceTag::D, &u, tt);
        let bi = asm.interpolate(SpaceTag::D, &b, tt);
        let errors = vec![
            (Variable::U, asm.l2_error(&ui, &u, tt)?.to_f64_lossy()),
            (Variable::B, asm.l2_error(&bi, &b, tt)?.to_f64_lossy()),
        ];
        reports.push(ErrorReport { degree: p.degree, elements: p.elements, dt: p.dt, iterations: 0, errors });
    }
    let orders = fit_all(SweepAxis::Spatial, points, &reports, &[Variable::U, Variable::B]);
    Ok(SweepResult { axis: SweepAxis::Spatial, reports, orders })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_case() -> ManufacturedCase {
        ManufacturedCase { params: CaseParams { inv_rf: 1.0, inv_rm: 1.0, c_lorentz: 1.0, h_hall: 1.0 } }
    }

    #[test]
    fn self_check_passes_for_several_parameter_sets() {
        for (rf, rm, c, h) in [(1.0, 1.0, 1.0, 1.0), (0.01, 0.5, 2.0, 0.0), (0.0, 0.0, 1.0, 3.0)] {
            ManufacturedCase::build(CaseParams { inv_rf: rf, inv_rm: rm, c_lorentz: c, h_hall: h }).unwrap();
        }
    }

    #[test]
    fn self_check_catches_a_wrong_source() {
        // a case whose Hall strength differs from the one baked into m fails the induction check
        let good = unit_case();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [rng.gen::<f64>() * 6.0, rng.gen::<f64>() * 6.0, rng.gen::<f64>() * 6.0];
        let wrong = ManufacturedCase { params: CaseParams { h_hall: 1.5, ..good.params } };
        let t = 0.7;
        let db = fd_time(|s| good.magnetic(&x, s), t);
        let curl_e = fd_curl(|y| wrong.electric(y, t), &x);
        let r = sub(add(db, curl_e), good.magnetic_source(&x, t));
        assert!(r.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn initial_magnetic_field_vanishes() {
        let c = unit_case();
        assert_eq!(c.magnetic(&[1.0, 2.0, 3.0], 0.0), [0.0, 0.0, 0.0]);
        assert_eq!(c.current(&[1.0, 2.0, 3.0], 0.0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn fit_order_recovers_powers() {
        let x = [0.5, 0.25, 0.125];
        let e: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((fit_order(&x, &e) - 2.0).abs() < 1e-12);
        assert!(fit_order(&[0.1], &[1.0]).is_nan());
        assert!(fit_order(&[0.1, 0.1], &[1.0, 2.0]).is_nan());
        assert!(fit_order(&[0.1, 0.2], &[0.0, 2.0]).is_nan());
    }

    #[test]
    fn single_configuration_sweep_is_degenerate() {
        let case = unit_case();
        let base = SchemeParams { t_final: 0.2, ..Default::default() };
        let pts = [SweepPoint { degree: 1, elements: 2, dt: 0.1 }];
        let res = convergence_sweep::<f64>(&case, SweepAxis::Temporal, &pts, MappingSpec::affine(), &base).unwrap();
        assert_eq!(res.reports.len(), 1);
        assert!(res.orders.iter().all(|(_, o)| o.is_nan()));
        assert!(res.reports[0].errors.iter().all(|(_, e)| e.is_finite() && *e >= 0.0));
    }

    #[test]
    fn interpolation_error_decreases_with_refinement() {
        let case = unit_case();
        let pts: Vec<SweepPoint> = [4, 6, 8].iter().map(|&k| SweepPoint { degree: 1, elements: k, dt: 0.1 }).collect();
        let res = interpolation_sweep::<f64>(&case, &pts, MappingSpec::affine(), 0.5).unwrap();
        let e: Vec<f64> = res.reports.iter().map(|r| r.error(Variable::U).unwrap()).collect();
        assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
        assert!(res.order(Variable::U).unwrap() > 0.5, "{:?}", res.orders);
    }
}
