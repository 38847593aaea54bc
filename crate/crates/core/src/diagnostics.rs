//! Energies, dissipation, the discrete energy law residual and divergence norms.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::scheme::{Operators, SchemeParams, SimulationState};
use crate::sparse::{dot, norm_inf, quadratic_form};

/// `K = |u|^2 / 2`, `M = c |B|^2 / 2`, `E = K + M`, and `M~ = c |H|^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Energies {
    pub kinetic: f64,
    pub magnetic: f64,
    pub total: f64,
    pub dual_magnetic: f64,
}

/// One row of `diagnostics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub k: usize,
    pub t: f64,
    pub kinetic: f64,
    pub magnetic: f64,
    pub total: f64,
    /// At `t^{k+1/2}`.
    pub dual_magnetic: f64,
    pub dissipation: f64,
    pub energy_law_residual: f64,
    /// `false` when the energy law does not apply to this step (divergent `u^0` at `k = 1`,
    /// or an active magnetic source).
    pub energy_law_applies: bool,
    pub div_u: f64,
    pub div_b: f64,
    pub div_dual_current: f64,
    pub u_max: f64,
    pub b_max: f64,
    pub step1_residual: f64,
    pub step2_residual: f64,
}

pub fn energies<T: Real>(ops: &Operators<T>, state: &SimulationState<T>, c_lorentz: f64) -> Energies {
    let half = T::lit(0.5);
    let c = T::lit(c_lorentz);
    let kinetic = half * quadratic_form(&ops.m_d, &state.u.coeffs, &state.u.coeffs);
    let magnetic = half * c * quadratic_form(&ops.m_d, &state.b.coeffs, &state.b.coeffs);
    let dual = half * c * quadratic_form(&ops.m_c0, &state.h.coeffs, &state.h.coeffs);
    Energies {
        kinetic: kinetic.to_f64_lossy(),
        magnetic: magnetic.to_f64_lossy(),
        total: (kinetic + magnetic).to_f64_lossy(),
        dual_magnetic: dual.to_f64_lossy(),
    }
}

fn average<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let half = T::lit(0.5);
    a.iter().zip(b).map(|(x, y)| half * (*x + *y)).collect()
}

/// `R_f^{-1} |w_bar|^2 + c R_m^{-1} |j_bar|^2` over `[t^{k-1}, t^k]`.
pub fn dissipation<T: Real>(
    ops: &Operators<T>,
    prev: &SimulationState<T>,
    new: &SimulationState<T>,
    params: &SchemeParams,
) -> f64 {
    let w = average(&prev.omega.coeffs, &new.omega.coeffs);
    let j = average(&prev.j.coeffs, &new.j.coeffs);
    let rf = T::lit(params.inv_rf());
    let rm = T::lit(params.inv_rm());
    let c = T::lit(params.c_lorentz);
    (rf * quadratic_form(&ops.m_c, &w, &w) + c * rm * quadratic_form(&ops.m_c, &j, &j)).to_f64_lossy()
}

/// `|(E^k - E^{k-1}) / dt + D - <f, u_bar>|`, with the force moment used by step 1.
pub fn energy_law_residual<T: Real>(
    ops: &Operators<T>,
    prev: &SimulationState<T>,
    new: &SimulationState<T>,
    params: &SchemeParams,
    f_moment: &[T],
) -> f64 {
    let e0 = energies(ops, prev, params.c_lorentz).total;
    let e1 = energies(ops, new, params.c_lorentz).total;
    let u_bar = average(&prev.u.coeffs, &new.u.coeffs);
    let work = if f_moment.is_empty() { 0.0 } else { dot(f_moment, &u_bar).to_f64_lossy() };
    ((e1 - e0) / params.dt + dissipation(ops, prev, new, params) - work).abs()
}

/// `(|D u|_inf, |D B|_inf, |D C0 H|_inf)`; the last uses the integer product `D C0`.
pub fn divergence_norms<T: Real>(ops: &Operators<T>, state: &SimulationState<T>) -> (f64, f64, f64) {
    let du = norm_inf(&ops.div.matvec(&state.u.coeffs));
    let db = norm_inf(&ops.div.matvec(&state.b.coeffs));
    let dj = norm_inf(&ops.div_curl_c0.matvec(&state.h.coeffs));
    (du.to_f64_lossy(), db.to_f64_lossy(), dj.to_f64_lossy())
}
