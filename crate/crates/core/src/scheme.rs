//! The leapfrog dual-field time integrator.
//!
//! Iteration `k` first solves the coupled fluid/Maxwell system for
//! `(u, omega, B, j)` at `t^k` and `(P, E)` at `t^{k-1/2}`, borrowing the dual
//! field `H^{k-1/2}`; then it advances `H` to `t^{k+1/2}` with `u^k`, `B^k` frozen.
//! Both steps are linear, so each iteration costs exactly two solves.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, TrilinearKind};
use crate::complex::SpaceTag;
use crate::diagnostics::{self, DiagnosticsRecord, Energies};
use crate::error::{Error, Result};
use crate::field::{DiscreteField, TimeLabel};
use crate::scalar::vec3::V3;
use crate::scalar::Real;
use crate::sparse::{bicgstab, norm_inf, offsets, BlockSystem, DirectSolver, Solution, SolveMethod, SparseMatrix};

/// Where the magnetic source moment enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagneticSourceMode {
    /// Only the B equation of step 1.
    BEquation,
    /// Only the H equation of step 2 (and the half-step initialization).
    HEquation,
    #[default]
    Both,
}

/// Form of the Hall term in the H equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HallTermForm {
    /// `h A(curl H, B, curl g)`, consistent with `h curl((curl H) x B)`.
    #[default]
    CurlH,
    /// `h A(H, B, curl g)`, i.e. `h C0^T A_B H`.
    Uncurled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeParams {
    pub dt: f64,
    pub t_final: f64,
    pub r_f: f64,
    pub r_m: f64,
    pub c_lorentz: f64,
    pub h_hall: f64,
    /// Sets `1/R_f = 1/R_m = 0` exactly.
    pub ideal_mode: bool,
    pub solver: SolveMethod,
    /// Relative residual above which a solve aborts the run.
    pub residual_limit: f64,
    /// Relative bound for the post-step divergence checks.
    pub conservation_tolerance: f64,
    pub magnetic_source: MagneticSourceMode,
    pub hall_term: HallTermForm,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_final: 1.0,
            r_f: 1.0,
            r_m: 1.0,
            c_lorentz: 1.0,
            h_hall: 1.0,
            ideal_mode: false,
            solver: SolveMethod::Direct,
            residual_limit: 1e-10,
            conservation_tolerance: 1e-11,
            magnetic_source: MagneticSourceMode::Both,
            hall_term: HallTermForm::CurlH,
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return bad("t_final must be positive");
        }
        if !self.ideal_mode && !(self.r_f > 0.0 && self.r_m > 0.0 && self.r_f.is_finite() && self.r_m.is_finite()) {
            return bad("R_f and R_m must be positive unless ideal_mode is set");
        }
        if !(self.c_lorentz.is_finite() && self.h_hall.is_finite()) {
            return bad("c_lorentz and h_hall must be finite");
        }
        if !(self.residual_limit > 0.0) {
            return bad("residual_limit must be positive");
        }
        Ok(())
    }

    pub fn inv_rf(&self) -> f64 {
        if self.ideal_mode {
            0.0
        } else {
            1.0 / self.r_f
        }
    }

    pub fn inv_rm(&self) -> f64 {
        if self.ideal_mode {
            0.0
        } else {
            1.0 / self.r_m
        }
    }

    /// Whether iteration `k` runs: stop once `t^{k-1/2}` has passed `T`.
    pub fn runs_iteration(&self, k: usize) -> bool {
        let t_half = (k as f64 - 0.5) * self.dt;
        t_half <= self.t_final + 1e-12 * self.dt
    }

    /// Number of main iterations a full run performs.
    pub fn iterations(&self) -> usize {
        let mut k = 0;
        while self.runs_iteration(k + 1) {
            k += 1;
        }
        k
    }
}

pub type VectorFn<T> = Arc<dyn Fn(&V3<T>, T) -> V3<T> + Send + Sync>;

/// Optional body force `f(x, t)` and magnetic source `m(x, t)`.
#[derive(Clone, Default)]
pub struct SourceSpec<T> {
    pub f: Option<VectorFn<T>>,
    pub m: Option<VectorFn<T>>,
}

impl<T> std::fmt::Debug for SourceSpec<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SourceSpec").field("f", &self.f.is_some()).field("m", &self.m.is_some()).finish()
    }
}

/// Fields after iteration `k`: `u, omega, B, j` at `t^k`, `H` at `t^{k+1/2}`, `P, E` at `t^{k-1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationState<T> {
    pub k: usize,
    pub u: DiscreteField<T>,
    pub omega: DiscreteField<T>,
    pub b: DiscreteField<T>,
    pub j: DiscreteField<T>,
    pub h: DiscreteField<T>,
    pub p: DiscreteField<T>,
    pub e: DiscreteField<T>,
    /// First iteration at which the discrete energy law is expected to hold.
    pub energy_law_from: usize,
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct Checkpoint<T> {
    version: u32,
    params: SchemeParams,
    state: SimulationState<T>,
}

impl<T: Real> SimulationState<T> {
    /// Writes a versioned JSON checkpoint; floats round-trip exactly.
    pub fn save_checkpoint(&self, path: &Path, params: &SchemeParams) -> Result<()> {
        let ck = Checkpoint { version: CHECKPOINT_VERSION, params: params.clone(), state: self.clone() };
        let s = serde_json::to_string(&ck)?;
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<(Self, SchemeParams)> {
        let s = std::fs::read_to_string(path)?;
        let ck: Checkpoint<T> = serde_json::from_str(&s)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok((ck.state, ck.params))
    }
}

/// Metric-dependent constant matrices shared by all steps and diagnostics.
#[derive(Debug, Clone)]
pub struct Operators<T> {
    pub m_c: SparseMatrix<T>,
    pub m_c0: SparseMatrix<T>,
    pub m_d: SparseMatrix<T>,
    pub m_s: SparseMatrix<T>,
    pub curl: SparseMatrix<T>,
    pub c0_curl: SparseMatrix<T>,
    pub c0_curl_t: SparseMatrix<T>,
    pub div: SparseMatrix<T>,
    /// Integer product `D C0` (the zero matrix), cast to reals.
    pub div_curl_c0: SparseMatrix<T>,
    /// `M_D C`
    pub md_curl: SparseMatrix<T>,
    /// `C^T M_D`
    pub curl_t_md: SparseMatrix<T>,
    /// `M_S D`
    pub ms_div: SparseMatrix<T>,
    /// `C0^T M_D C0`
    pub c0t_md_c0: SparseMatrix<T>,
}

impl<T: Real> Operators<T> {
    pub fn new(asm: &Assembler<T>) -> Self {
        let cx = asm.complex();
        let m_c = asm.mass_matrix(SpaceTag::C);
        let keep = cx.c0_to_c();
        let m_c0 = m_c.select_rows(keep).select_columns(keep);
        let m_d = asm.mass_matrix(SpaceTag::D);
        let m_s = asm.mass_matrix(SpaceTag::S);
        let curl: SparseMatrix<T> = cx.c_curl().cast();
        let c0_curl: SparseMatrix<T> = cx.c0_curl().cast();
        let div: SparseMatrix<T> = cx.d_div().cast();
        let div_curl_c0 = cx.d_div().matmul(cx.c0_curl()).cast();
        let md_curl = m_d.matmul(&curl);
        let curl_t_md = md_curl.transpose();
        let ms_div = m_s.matmul(&div);
        let md_c0 = m_d.matmul(&c0_curl);
        let c0_curl_t = c0_curl.transpose();
        let c0t_md_c0 = c0_curl_t.matmul(&md_c0);
        Self { m_c, m_c0, m_d, m_s, curl, c0_curl, c0_curl_t, div, div_curl_c0, md_curl, curl_t_md, ms_div, c0t_md_c0 }
    }
}

/// Output of [`HallMhdScheme::run`].
#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub state: SimulationState<T>,
    pub records: Vec<DiagnosticsRecord>,
    /// Energies of the initial state (`H` at `t^{1/2}`).
    pub initial: Energies,
}

#[derive(Debug, Clone, Copy)]
enum Which {
    Step1,
    Step2,
    Init,
}

pub struct HallMhdScheme<T: Real> {
    asm: Assembler<T>,
    ops: Operators<T>,
    params: SchemeParams,
    sources: SourceSpec<T>,
    step1_solver: DirectSolver<T>,
    step2_solver: DirectSolver<T>,
    solves: usize,
    last_f_moment: Vec<T>,
    last_residuals: (f64, f64),
}

impl<T: Real> HallMhdScheme<T> {
    pub fn new(asm: Assembler<T>, params: SchemeParams, sources: SourceSpec<T>) -> Result<Self> {
        params.validate()?;
        let ops = Operators::new(&asm);
        Ok(Self {
            asm,
            ops,
            params,
            sources,
            step1_solver: DirectSolver::new(),
            step2_solver: DirectSolver::new(),
            solves: 0,
            last_f_moment: Vec::new(),
            last_residuals: (0.0, 0.0),
        })
    }

    pub fn assembler(&self) -> &Assembler<T> {
        &self.asm
    }

    pub fn operators(&self) -> &Operators<T> {
        &self.ops
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn sources(&self) -> &SourceSpec<T> {
        &self.sources
    }

    /// Total number of linear solves so far.
    pub fn solve_count(&self) -> usize {
        self.solves
    }

    /// Force moment used by the most recent step 1 (empty without a force).
    pub fn last_f_moment(&self) -> &[T] {
        &self.last_f_moment
    }

    fn dim(&self, s: SpaceTag) -> usize {
        self.asm.complex().dim(s)
    }

    fn m_in_b(&self) -> bool {
        self.sources.m.is_some() && self.params.magnetic_source != MagneticSourceMode::HEquation
    }

    fn m_in_h(&self) -> bool {
        self.sources.m.is_some() && self.params.magnetic_source != MagneticSourceMode::BEquation
    }

    fn solve(&mut self, which: Which, a: &SparseMatrix<T>, b: &[T], name: &'static str) -> Result<Solution<T>> {
        self.solves += 1;
        let sol = match self.params.solver {
            SolveMethod::Direct => match which {
                Which::Step1 => self.step1_solver.solve(a, b)?,
                Which::Step2 => self.step2_solver.solve(a, b)?,
                Which::Init => crate::sparse::solve(a, b, SolveMethod::Direct)?,
            },
            SolveMethod::Iterative { tol, maxit } => bicgstab(a, b, tol, maxit)?,
        };
        if !(sol.relative_residual <= self.params.residual_limit) {
            return Err(Error::ResidualTooLarge {
                system: name,
                residual: sol.relative_residual,
                limit: self.params.residual_limit,
            });
        }
        log::debug!("{name}: relative residual {:e}", sol.relative_residual);
        Ok(sol)
    }

    fn vector_moment(&self, f: &VectorFn<T>, space: SpaceTag, t: f64) -> Result<Vec<T>> {
        self.asm.load_vector(space, &|x: &V3<T>, t: T| f(x, t), T::lit(t))
    }

    /// Solves `M_C omega0 = C^T M_D u0`.
    pub fn init_omega(&mut self, u0: &DiscreteField<T>) -> Result<DiscreteField<T>> {
        self.weak_curl(u0, "omega initialization")
    }

    /// Solves `M_C j0 = C^T M_D B0`.
    pub fn init_j(&mut self, b0: &DiscreteField<T>) -> Result<DiscreteField<T>> {
        self.weak_curl(b0, "current initialization")
    }

    fn weak_curl(&mut self, v: &DiscreteField<T>, name: &'static str) -> Result<DiscreteField<T>> {
        v.expect_space(SpaceTag::D)?;
        self.asm.complex().check_len(v)?;
        let rhs = self.ops.curl_t_md.matvec(&v.coeffs);
        let m = self.ops.m_c.clone();
        let sol = self.solve(Which::Init, &m, &rhs, name)?;
        Ok(DiscreteField::new(SpaceTag::C, sol.x, v.time))
    }

    /// `(1/(2 R_m)) C0^T M_D C0 - 1/2 C0^T A_u + h/2 (Hall term)`.
    fn induction_operator(&self, u: &DiscreteField<T>, b: &DiscreteField<T>) -> Result<SparseMatrix<T>> {
        let half = T::lit(0.5);
        let a_u = self.asm.trilinear_matrix(TrilinearKind::AU, u)?;
        let c0t = &self.ops.c0_curl_t;
        let hall = match self.params.hall_term {
            HallTermForm::CurlH => {
                let a = self.asm.trilinear_matrix(TrilinearKind::ABCurl, b)?;
                c0t.matmul(&a.matmul(&self.ops.c0_curl))
            }
            HallTermForm::Uncurled => c0t.matmul(&self.asm.trilinear_matrix(TrilinearKind::AB, b)?),
        };
        let diff = self.ops.c0t_md_c0.scale(T::lit(0.5 * self.params.inv_rm()));
        let adv = c0t.matmul(&a_u);
        Ok(diff.add_scaled(T::one(), &adv, -half).add_scaled(T::one(), &hall, T::lit(0.5 * self.params.h_hall)))
    }

    /// Midpoint step of the H equation from `h_prev` over `step` with `u`, `b` frozen.
    fn advance_h(
        &mut self,
        u: &DiscreteField<T>,
        b: &DiscreteField<T>,
        h_prev: &DiscreteField<T>,
        step: f64,
        t_mid: f64,
        which: Which,
        name: &'static str,
    ) -> Result<(Vec<T>, f64)> {
        u.expect_space(SpaceTag::D)?;
        b.expect_space(SpaceTag::D)?;
        h_prev.expect_space(SpaceTag::C0)?;
        let k = self.induction_operator(u, b)?;
        let inv = T::lit(1.0 / step);
        let lhs = self.ops.m_c0.add_scaled(inv, &k, T::one());
        let mh = self.ops.m_c0.matvec(&h_prev.coeffs);
        let kh = k.matvec(&h_prev.coeffs);
        let mut rhs: Vec<T> = mh.iter().zip(&kh).map(|(p, q)| inv * *p - *q).collect();
        if self.m_in_h() {
            let m = self.sources.m.clone().unwrap();
            let mom = self.vector_moment(&m, SpaceTag::C0, t_mid)?;
            for (r, v) in rhs.iter_mut().zip(mom) {
                *r = *r + v;
            }
        }
        let sol = self.solve(which, &lhs, &rhs, name)?;
        Ok((sol.x, sol.relative_residual))
    }

    /// `H^{1/2}` from `H^0`, `u^0`, `B^0` with the half-length first step.
    pub fn init_h_half(
        &mut self,
        h0: &DiscreteField<T>,
        u0: &DiscreteField<T>,
        b0: &DiscreteField<T>,
    ) -> Result<DiscreteField<T>> {
        let dt = self.params.dt;
        let (x, _) = self.advance_h(u0, b0, h0, 0.5 * dt, 0.25 * dt, Which::Init, "half-step initialization")?;
        Ok(DiscreteField::new(SpaceTag::C0, x, TimeLabel::half(0)))
    }

    /// Assembles the step-1 block system for iteration `state.k + 1`.
    pub fn step1_system(&mut self, state: &SimulationState<T>) -> Result<BlockSystem<T>> {
        let p = self.params.clone();
        let k = state.k + 1;
        let t_half = (k as f64 - 0.5) * p.dt;
        let half = T::lit(0.5);
        let inv_dt = T::lit(1.0 / p.dt);
        let rf2 = T::lit(0.5 * p.inv_rf());
        let rm2 = T::lit(0.5 * p.inv_rm());
        let c2 = T::lit(0.5 * p.c_lorentz);
        let h2 = T::lit(0.5 * p.h_hall);
        let ops = &self.ops;

        let a_w = self.asm.trilinear_matrix(TrilinearKind::AOmega, &state.omega)?;
        let a_h = self.asm.trilinear_matrix(TrilinearKind::AH, &state.h)?;
        let aa_h = self.asm.trilinear_matrix(TrilinearKind::AAH, &state.h)?;
        let a_h_t = a_h.transpose();

        let (nd, nc, ns) = (self.dim(SpaceTag::D), self.dim(SpaceTag::C), self.dim(SpaceTag::S));
        let dims = vec![nd, nc, ns, nc, nd, nc];
        let mut bs = BlockSystem::new(dims.clone(), dims);
        let neg_ct_md = ops.curl_t_md.scale(-T::one());
        let m_d_dt = ops.m_d.scale(inv_dt);
        let j_block = ops.m_c.add_scaled(rm2, &aa_h, h2);
        bs.set_block(0, 0, ops.m_d.add_scaled(inv_dt, &a_w, half));
        bs.set_block(0, 1, ops.md_curl.scale(rf2));
        bs.set_block(0, 2, ops.ms_div.transpose().scale(-T::one()));
        bs.set_block(0, 5, a_h.scale(-c2));
        bs.set_block(1, 0, neg_ct_md.clone());
        bs.set_block(1, 1, ops.m_c.clone());
        bs.set_block(2, 0, ops.ms_div.clone());
        bs.set_block(3, 4, neg_ct_md);
        bs.set_block(3, 5, ops.m_c.clone());
        bs.set_block(4, 3, ops.md_curl.clone());
        bs.set_block(4, 4, m_d_dt.clone());
        bs.set_block(5, 0, a_h_t.scale(half));
        bs.set_block(5, 3, ops.m_c.scale(-T::one()));
        bs.set_block(5, 5, j_block.clone());

        // row 1
        let mu = ops.m_d.matvec(&state.u.coeffs);
        let au = a_w.matvec(&state.u.coeffs);
        let cw = ops.md_curl.matvec(&state.omega.coeffs);
        let ahj = a_h.matvec(&state.j.coeffs);
        let mut r0: Vec<T> = (0..nd).map(|i| inv_dt * mu[i] - half * au[i] - rf2 * cw[i] + c2 * ahj[i]).collect();
        self.last_f_moment = match self.sources.f.clone() {
            Some(f) => self.vector_moment(&f, SpaceTag::D, t_half)?,
            None => Vec::new(),
        };
        for (r, v) in r0.iter_mut().zip(&self.last_f_moment) {
            *r = *r + *v;
        }
        bs.set_rhs(0, r0);
        // row 5
        let mut r4 = m_d_dt.matvec(&state.b.coeffs);
        if self.m_in_b() {
            let m = self.sources.m.clone().unwrap();
            for (r, v) in r4.iter_mut().zip(self.vector_moment(&m, SpaceTag::D, t_half)?) {
                *r = *r + v;
            }
        }
        bs.set_rhs(4, r4);
        // row 6
        let atu = a_h_t.matvec(&state.u.coeffs);
        let jj = j_block.matvec(&state.j.coeffs);
        bs.set_rhs(5, (0..nc).map(|i| -half * atu[i] - jj[i]).collect());
        Ok(bs)
    }

    /// Step 1: returns the state with `u, omega, B, j` at `t^k` and `P, E` at `t^{k-1/2}`.
    pub fn step1(&mut self, state: &SimulationState<T>) -> Result<SimulationState<T>> {
        let bs = self.step1_system(state)?;
        let (a, rhs) = bs.compose()?;
        let sol = self.solve(Which::Step1, &a, &rhs, "step 1")?;
        self.last_residuals.0 = sol.relative_residual;
        let off = offsets(bs.col_dims());
        let seg = |i: usize| sol.x[off[i]..off[i + 1]].to_vec();
        let k = state.k + 1;
        let ti = TimeLabel::integer(k as i64);
        let th = TimeLabel::half(k as i64 - 1);
        let next = SimulationState {
            k,
            u: DiscreteField::new(SpaceTag::D, seg(0), ti),
            omega: DiscreteField::new(SpaceTag::C, seg(1), ti),
            p: DiscreteField::new(SpaceTag::S, seg(2), th),
            e: DiscreteField::new(SpaceTag::C, seg(3), th),
            b: DiscreteField::new(SpaceTag::D, seg(4), ti),
            j: DiscreteField::new(SpaceTag::C, seg(5), ti),
            h: state.h.clone(),
            energy_law_from: state.energy_law_from,
        };
        self.check_conservation(state, &next)?;
        Ok(next)
    }

    fn check_conservation(&self, prev: &SimulationState<T>, next: &SimulationState<T>) -> Result<()> {
        let tol = self.params.conservation_tolerance;
        let du = norm_inf(&self.ops.div.matvec(&next.u.coeffs)).to_f64_lossy();
        let umax = norm_inf(&next.u.coeffs).to_f64_lossy();
        if du > tol * umax {
            return Err(Error::ConservationViolated {
                step: next.k,
                what: format!("|div u|_inf = {du:e} exceeds {tol:e} * |u|_inf = {:e}", tol * umax),
            });
        }
        if !self.m_in_b() {
            let delta: Vec<T> = next.b.coeffs.iter().zip(&prev.b.coeffs).map(|(a, b)| *a - *b).collect();
            let db = norm_inf(&self.ops.div.matvec(&delta)).to_f64_lossy();
            let scale = norm_inf(&next.b.coeffs).to_f64_lossy().max(norm_inf(&prev.b.coeffs).to_f64_lossy());
            if db > tol * scale {
                return Err(Error::ConservationViolated {
                    step: next.k,
                    what: format!("|div (B^k - B^(k-1))|_inf = {db:e} exceeds {:e}", tol * scale),
                });
            }
        }
        Ok(())
    }

    /// Step 2: advances `H` from `t^{k-1/2}` to `t^{k+1/2}` with `u^k`, `B^k`.
    pub fn step2(&mut self, state: &SimulationState<T>) -> Result<DiscreteField<T>> {
        let t_k = state.k as f64 * self.params.dt;
        let (x, res) =
            self.advance_h(&state.u, &state.b, &state.h, self.params.dt, t_k, Which::Step2, "step 2")?;
        self.last_residuals.1 = res;
        Ok(DiscreteField::new(SpaceTag::C0, x, TimeLabel::half(state.k as i64)))
    }

    /// Initialization solves: `omega^0`, `j^0` and `H^{1/2}`.
    pub fn initialize(
        &mut self,
        u0: DiscreteField<T>,
        b0: DiscreteField<T>,
        h0: DiscreteField<T>,
    ) -> Result<SimulationState<T>> {
        u0.expect_space(SpaceTag::D)?;
        b0.expect_space(SpaceTag::D)?;
        h0.expect_space(SpaceTag::C0)?;
        for f in [&u0, &b0, &h0] {
            self.asm.complex().check_len(f)?;
        }
        let t0 = TimeLabel::integer(0);
        let (u0, b0, h0) = (u0.with_time(t0), b0.with_time(t0), h0.with_time(t0));
        let div_u0 = norm_inf(&self.ops.div.matvec(&u0.coeffs)).to_f64_lossy();
        let energy_law_from = if div_u0 > 1e-12 {
            log::warn!("initial velocity is not discretely divergence-free (|div u0| = {div_u0:e}); energy law checked from k = 2");
            2
        } else {
            1
        };
        let omega = self.init_omega(&u0)?;
        let j = self.init_j(&b0)?;
        let h = self.init_h_half(&h0, &u0, &b0)?;
        Ok(SimulationState {
            k: 0,
            p: DiscreteField::zeros(SpaceTag::S, self.dim(SpaceTag::S), TimeLabel::half(-1)),
            e: DiscreteField::zeros(SpaceTag::C, self.dim(SpaceTag::C), TimeLabel::half(-1)),
            u: u0,
            omega,
            b: b0,
            j,
            h,
            energy_law_from,
        })
    }

    /// One full iteration (step 1, step 2, diagnostics).
    pub fn advance(&mut self, state: &SimulationState<T>) -> Result<(SimulationState<T>, DiagnosticsRecord)> {
        let before = self.solves;
        let mut next = self.step1(state)?;
        next.h = self.step2(&next)?;
        assert_eq!(self.solves - before, 2, "an iteration must solve exactly two linear systems");
        let record = self.record(state, &next);
        Ok((next, record))
    }

    fn record(&self, prev: &SimulationState<T>, next: &SimulationState<T>) -> DiagnosticsRecord {
        let p = &self.params;
        let en = diagnostics::energies(&self.ops, next, p.c_lorentz);
        let (div_u, div_b, div_j) = diagnostics::divergence_norms(&self.ops, next);
        DiagnosticsRecord {
            k: next.k,
            t: next.k as f64 * p.dt,
            kinetic: en.kinetic,
            magnetic: en.magnetic,
            total: en.total,
            dual_magnetic: en.dual_magnetic,
            dissipation: diagnostics::dissipation(&self.ops, prev, next, p),
            energy_law_residual: diagnostics::energy_law_residual(&self.ops, prev, next, p, &self.last_f_moment),
            energy_law_applies: next.k >= next.energy_law_from && !self.m_in_b(),
            div_u,
            div_b,
            div_dual_current: div_j,
            u_max: norm_inf(&next.u.coeffs).to_f64_lossy(),
            b_max: norm_inf(&next.b.coeffs).to_f64_lossy(),
            step1_residual: self.last_residuals.0,
            step2_residual: self.last_residuals.1,
        }
    }

    /// Runs from initial data until `t^{k+1/2} > T`, calling `callback` after each iteration.
    pub fn run<F>(
        &mut self,
        u0: DiscreteField<T>,
        b0: DiscreteField<T>,
        h0: DiscreteField<T>,
        callback: F,
    ) -> Result<RunOutput<T>>
    where
        F: FnMut(&SimulationState<T>, &DiagnosticsRecord) -> Result<()>,
    {
        let state = self.initialize(u0, b0, h0)?;
        self.resume(state, callback)
    }

    /// Continues from a state (e.g. a checkpoint).
    pub fn resume<F>(&mut self, mut state: SimulationState<T>, mut callback: F) -> Result<RunOutput<T>>
    where
        F: FnMut(&SimulationState<T>, &DiagnosticsRecord) -> Result<()>,
    {
        let initial = diagnostics::energies(&self.ops, &state, self.params.c_lorentz);
        let mut records = Vec::new();
        while self.params.runs_iteration(state.k + 1) {
            let (next, rec) = self.advance(&state)?;
            callback(&next, &rec)?;
            records.push(rec);
            state = next;
        }
        Ok(RunOutput { state, records, initial })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::DeRhamComplex;
    use crate::mesh::{BoxDomain, HexMesh, MappingSpec};

    fn scheme(k: usize, n: usize, c: f64, params: SchemeParams) -> HallMhdScheme<f64> {
        let map = if c == 0.0 { MappingSpec::affine() } else { MappingSpec::crazy(c) };
        let mesh = HexMesh::build(k, BoxDomain::unit(), map).unwrap();
        let asm = Assembler::new(Arc::new(DeRhamComplex::build(mesh, n).unwrap())).unwrap();
        HallMhdScheme::new(asm, params, SourceSpec::default()).unwrap()
    }

    #[test]
    fn iteration_counts() {
        let p = SchemeParams { dt: 0.05, t_final: 0.5, ..Default::default() };
        assert_eq!(p.iterations(), 10);
        let p = SchemeParams { dt: 0.25, t_final: 1.0, ..Default::default() };
        assert_eq!(p.iterations(), 4);
        let p = SchemeParams { dt: 1.0, t_final: 0.4, ..Default::default() };
        assert_eq!(p.iterations(), 0);
    }

    #[test]
    fn params_are_validated() {
        assert!(SchemeParams { dt: 0.0, ..Default::default() }.validate().is_err());
        assert!(SchemeParams { r_f: 0.0, ..Default::default() }.validate().is_err());
        assert!(SchemeParams { r_f: 0.0, ideal_mode: true, ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn zero_data_stays_zero() {
        let mut s = scheme(2, 1, 0.0, SchemeParams { dt: 0.1, t_final: 0.2, ..Default::default() });
        let cx = s.assembler().complex();
        let z = |sp| DiscreteField::zeros(sp, cx.dim(sp), TimeLabel::default());
        let (u, b, h) = (z(SpaceTag::D), z(SpaceTag::D), z(SpaceTag::C0));
        let out = s.run(u, b, h, |_, _| Ok(())).unwrap();
        assert_eq!(out.records.len(), 2);
        for f in [&out.state.u, &out.state.omega, &out.state.b, &out.state.j, &out.state.h, &out.state.p, &out.state.e] {
            assert!(f.coeffs.iter().all(|&v| v == 0.0));
        }
        // 3 initialization solves plus 2 per iteration
        assert_eq!(s.solve_count(), 3 + 2 * 2);
    }

    #[test]
    fn induction_operator_is_independent_of_dt() {
        let a = scheme(2, 1, 0.1, SchemeParams { dt: 0.1, ..Default::default() });
        let b = scheme(2, 1, 0.1, SchemeParams { dt: 0.37, ..Default::default() });
        let cx = a.assembler().complex();
        let u = a.assembler().interpolate(SpaceTag::D, &|x: &V3<f64>, _| [x[1], x[2], x[0]], 0.0);
        let bb = a.assembler().interpolate(SpaceTag::D, &|x: &V3<f64>, _| [1.0, x[0], 0.0], 0.0);
        assert_eq!(a.induction_operator(&u, &bb).unwrap(), b.induction_operator(&u, &bb).unwrap());
        assert_eq!(a.induction_operator(&u, &bb).unwrap().shape(), (cx.dim(SpaceTag::C0), cx.dim(SpaceTag::C0)));
    }

    fn structure_field(x: &V3<f64>, _t: f64) -> V3<f64> {
        use std::f64::consts::PI;
        let z = x[2];
        [
            z * (z - 1.0) * (PI * x[0]).cos() * (PI * x[1]).sin(),
            z * (1.0 - z) * (PI * x[0]).sin() * (PI * x[1]).cos(),
            0.0,
        ]
    }

    fn structure_data(s: &HallMhdScheme<f64>) -> (DiscreteField<f64>, DiscreteField<f64>, DiscreteField<f64>) {
        let a = s.assembler();
        let u = a.interpolate(SpaceTag::D, &structure_field, 0.0);
        let h = a.interpolate(SpaceTag::C0, &structure_field, 0.0);
        (u.clone(), u, h)
    }

    #[test]
    fn energy_law_and_divergence() {
        for ideal in [false, true] {
            let p = SchemeParams { dt: 0.05, t_final: 0.15, r_f: 10.0, r_m: 10.0, ideal_mode: ideal, ..Default::default() };
            let mut s = scheme(2, 2, 0.1, p);
            let (u, b, h) = structure_data(&s);
            let out = s.run(u, b, h, |_, _| Ok(())).unwrap();
            assert_eq!(out.records.len(), 3);
            let mut prev = out.initial.total;
            for r in &out.records {
                assert!(r.energy_law_applies);
                assert!(r.energy_law_residual < 1e-10, "{r:?}");
                assert!(r.div_u < 1e-12 && r.div_b < 1e-12 && r.div_dual_current == 0.0);
                if ideal {
                    assert_eq!(r.dissipation, 0.0);
                    assert!((r.total - prev).abs() < 1e-12 * prev);
                } else {
                    assert!(r.total < prev);
                }
                prev = r.total;
            }
        }
    }

    #[test]
    fn zero_magnetic_field_decouples() {
        // With B = H = 0 the magnetic unknowns stay zero and u follows Navier-Stokes alone.
        let p = SchemeParams { dt: 0.05, t_final: 0.1, r_f: 5.0, r_m: 5.0, ..Default::default() };
        let mut s = scheme(2, 2, 0.1, p.clone());
        let (u, _, _) = structure_data(&s);
        let cx = s.assembler().complex_arc();
        let b = DiscreteField::zeros(SpaceTag::D, cx.dim(SpaceTag::D), TimeLabel::default());
        let h = DiscreteField::zeros(SpaceTag::C0, cx.dim(SpaceTag::C0), TimeLabel::default());
        let out = s.run(u.clone(), b, h, |_, _| Ok(())).unwrap();
        for f in [&out.state.b, &out.state.j, &out.state.h, &out.state.e] {
            assert!(f.coeffs.iter().all(|v| v.abs() < 1e-14));
        }

        // independent Navier-Stokes midpoint solve in (u, omega, P)
        let ops = s.operators().clone();
        let asm = s.assembler();
        let (nd, nc, ns) = (cx.dim(SpaceTag::D), cx.dim(SpaceTag::C), cx.dim(SpaceTag::S));
        let mut uk = u.coeffs.clone();
        let mut wk = crate::sparse::solve(&ops.m_c, &ops.curl_t_md.matvec(&uk), SolveMethod::Direct).unwrap().x;
        for _ in 0..2 {
            let w = DiscreteField::new(SpaceTag::C, wk.clone(), TimeLabel::default());
            let aw = asm.trilinear_matrix(TrilinearKind::AOmega, &w).unwrap();
            let mut bs = BlockSystem::new(vec![nd, nc, ns], vec![nd, nc, ns]);
            bs.set_block(0, 0, ops.m_d.add_scaled(1.0 / p.dt, &aw, 0.5));
            bs.set_block(0, 1, ops.md_curl.scale(0.5 / p.r_f));
            bs.set_block(0, 2, ops.ms_div.transpose().scale(-1.0));
            bs.set_block(1, 0, ops.curl_t_md.scale(-1.0));
            bs.set_block(1, 1, ops.m_c.clone());
            bs.set_block(2, 0, ops.ms_div.clone());
            let mu = ops.m_d.matvec(&uk);
            let au = aw.matvec(&uk);
            let cw = ops.md_curl.matvec(&wk);
            bs.set_rhs(0, (0..nd).map(|i| mu[i] / p.dt - 0.5 * au[i] - 0.5 / p.r_f * cw[i]).collect());
            let (a, r) = bs.compose().unwrap();
            let x = crate::sparse::solve(&a, &r, SolveMethod::Direct).unwrap().x;
            uk = x[..nd].to_vec();
            wk = x[nd..nd + nc].to_vec();
        }
        let diff: Vec<f64> = uk.iter().zip(&out.state.u.coeffs).map(|(a, b)| a - b).collect();
        assert!(norm_inf(&diff) < 1e-12 * norm_inf(&uk));
    }

    #[test]
    fn checkpoint_resume_is_bit_identical() {
        let p = SchemeParams { dt: 0.05, t_final: 0.2, r_f: 10.0, r_m: 10.0, ..Default::default() };
        let mut s = scheme(2, 1, 0.1, p.clone());
        let (u, b, h) = structure_data(&s);
        let full = s.run(u.clone(), b.clone(), h.clone(), |_, _| Ok(())).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let mut s2 = scheme(2, 1, 0.1, p.clone());
        let mut st = s2.initialize(u, b, h).unwrap();
        for _ in 0..2 {
            st = s2.advance(&st).unwrap().0;
        }
        st.save_checkpoint(&path, &p).unwrap();
        let (loaded, lp) = SimulationState::<f64>::load_checkpoint(&path).unwrap();
        assert_eq!(loaded, st);
        assert_eq!(lp, p);
        let mut s3 = scheme(2, 1, 0.1, lp);
        let resumed = s3.resume(loaded, |_, _| Ok(())).unwrap();
        assert_eq!(resumed.state, full.state);
        assert_eq!(resumed.records, full.records[2..]);
    }

    #[test]
    fn short_horizon_runs_no_iterations() {
        let mut s = scheme(2, 1, 0.0, SchemeParams { dt: 1.0, t_final: 0.3, ..Default::default() });
        let (u, b, h) = structure_data(&s);
        let out = s.run(u.clone(), b, h, |_, _| Ok(())).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.state.k, 0);
        assert_eq!(out.state.u.coeffs, u.coeffs);
        assert_eq!(out.state.h.time, TimeLabel::half(0));
    }
}
