//! Numerical verification of optimality conditions at a candidate control:
//! B-stationarity sampling, the strong-stationarity system, the multiplier
//! systems with the kink multipliers `μ∓`, the all-bound special case, the
//! constraint qualification, and the level-set behavior of the discrete
//! Laplacian.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{interior_laplacian, level_set_mask, trace, BoundaryField, Field, Grid};
use crate::nonsmooth::{pc1_eval, superpose};
use crate::objective::{
    objective_dir_deriv_with_state, objective_with_state, reduced_gradient_with_state, Bound,
    BoundaryBound, ProblemSpec,
};
use crate::operator::{coefficients, control_to_state, ControlPair, KinkSide};
use crate::optimize::project_admissible;
use crate::pde::solve_linear;
use crate::{Error, Result};

/// Verdict tolerances.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// B-stationarity and strong-stationarity residual tolerance.
    pub stat_tol: f64,
    /// Multiplier-system residual tolerance.
    pub multiplier_tol: f64,
    /// Bound-case inequality slack.
    pub bound_tol: f64,
    /// CQ measure threshold; `None` means `max(hx, hy)`.
    pub cq_threshold: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            stat_tol: 1e-5,
            multiplier_tol: 1e-4,
            bound_tol: 1e-6,
            cq_threshold: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyOptions {
    pub n_probes: usize,
    pub seed: u64,
    /// Width of the sampling band below the bound (and around the control
    /// under infinite bounds).
    pub probe_radius: f64,
    pub tol: Tolerances,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            n_probes: 200,
            seed: 0,
            probe_radius: 1.0,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeRow {
    pub id: usize,
    pub label: String,
    pub jprime: f64,
}

/// Sampled minimum of `J'(w; u - ū, v - v̄)` over admissible probes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BStatRecord {
    pub min_value: f64,
    pub min_probe: usize,
    pub n_probes: usize,
    pub probes: Vec<ProbeRow>,
}

/// Residuals of the strong-stationarity system with the left-branch Clarke
/// selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrongRecord {
    /// max |ζ_Ω| on the inactive set {ū < u_b - tol}.
    pub residual_inactive_omega: f64,
    /// min ζ_Ω on the active set (must be >= -tol); `None` if no active node.
    pub min_zeta_active_omega: Option<f64>,
    pub residual_inactive_gamma: f64,
    pub min_zeta_active_gamma: Option<f64>,
    /// max over the kink band of `max(0, -p * (d1'(t_bar) - d2'(t_bar)))`.
    pub sign_residual: f64,
    /// Band and adjoint summary.
    pub band_measure: f64,
    pub p_norm_max: f64,
    /// True when the CQ measure exceeded the threshold, so the strong system
    /// is only a conditional certificate here.
    pub conditional: bool,
}

impl StrongRecord {
    pub fn pass(&self, tol: f64) -> bool {
        self.residual_inactive_omega <= tol
            && self.residual_inactive_gamma <= tol
            && self.min_zeta_active_omega.map_or(true, |m| m >= -tol)
            && self.min_zeta_active_gamma.map_or(true, |m| m >= -tol)
            && self.sign_residual <= tol
    }
}

/// Adjoint and multiplier fields backing a [`StrongRecord`].
#[derive(Debug, Clone)]
pub struct StrongFields {
    pub p: Field,
    pub a_tilde: Field,
    pub zeta_omega: Field,
    pub zeta_gamma: BoundaryField,
}

/// Residuals of the multiplier system on one side of the kink.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplierRecord {
    pub side: KinkSide,
    /// Max-norm stationarity residual after the nonnegative least squares.
    pub residual_max: f64,
    /// Quadrature-weighted L² residual.
    pub residual_l2: f64,
    pub mu_max: f64,
    pub mu_l2: f64,
    /// Structural certificates: recovered μ is nonnegative and supported in
    /// the kink band (both hold by construction of the solver).
    pub mu_nonneg: bool,
    pub mu_supported_in_band: bool,
    pub band_measure: f64,
    pub ls_iterations: usize,
}

/// Pointwise inequalities of the all-bound case `w = (u_b, v_b)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UbvbRecord {
    /// min over Ω of `-p/κ_Ω - u_b` (must be >= -tol).
    pub min_omega: f64,
    /// min over Γ of `-trace(p)/κ_Γ - v_b`.
    pub min_gamma: f64,
}

/// Level-set behavior of the discrete Laplacian at the candidate state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppendixRecord {
    /// max over interior nodes of `|-Δ_h y + d(y) - u|`.
    pub strong_form_residual: f64,
    /// max |Δ_h y| over the interior kink band (0 when the band is empty).
    pub band_max_laplacian: f64,
    /// max over the interior kink band of `|u - d(t_bar)|`.
    pub band_discrepancy: f64,
    pub band_measure: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceRecord {
    pub b_pass: bool,
    pub strong_pass: bool,
    pub cq_holds: bool,
    /// "pass" / "fail" under CQ (both agree / disagree); "conditional_pass" /
    /// "conditional_fail" without CQ, asserting only strong => B.
    pub status: String,
}

impl EquivalenceRecord {
    pub fn pass(&self) -> bool {
        self.status == "pass" || self.status == "conditional_pass"
    }
}

/// Full verification report; serialized as the stable JSON schema
/// `{b_stat, cq, strong, multiplier_minus, multiplier_plus, ubvb, appendix,
/// verdicts}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarityReport {
    pub b_stat: BStatRecord,
    pub cq: f64,
    pub strong: StrongRecord,
    pub multiplier_minus: MultiplierRecord,
    pub multiplier_plus: Option<MultiplierRecord>,
    pub ubvb: Option<UbvbRecord>,
    pub appendix: AppendixRecord,
    pub verdicts: BTreeMap<String, bool>,
}

impl StationarityReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }
}

fn dilate_mask(grid: &Grid, mask: &[bool]) -> Vec<bool> {
    let mut out = mask.to_vec();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if !mask[grid.idx(i, j)] {
                continue;
            }
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii >= 0 && jj >= 0 && (ii as usize) < grid.nx && (jj as usize) < grid.ny {
                        out[grid.idx(ii as usize, jj as usize)] = true;
                    }
                }
            }
        }
    }
    out
}

/// Nodewise active mask `{|u - u_b| <= active_tol}` (empty for `u_b = ∞`).
fn active_mask_omega(spec: &ProblemSpec, w: &ControlPair) -> Vec<bool> {
    match &spec.u_bound {
        Bound::Field(ub) => {
            let tol = spec.active_tol_omega();
            w.u.values
                .iter()
                .zip(&ub.values)
                .map(|(u, b)| (u - b).abs() <= tol)
                .collect()
        }
        Bound::Infinite => vec![false; w.u.len()],
    }
}

fn active_mask_gamma(spec: &ProblemSpec, w: &ControlPair) -> Vec<bool> {
    match &spec.v_bound {
        BoundaryBound::Field(vb) => {
            let tol = spec.active_tol_gamma();
            w.v.values
                .iter()
                .zip(&vb.values)
                .map(|(v, b)| (v - b).abs() <= tol)
                .collect()
        }
        BoundaryBound::Infinite => vec![false; w.v.len()],
    }
}

/// Sample the B-stationarity condition: the minimum of
/// `J'(w̄; u - ū, v - v̄)` over deterministic corner probes (the bounds, the
/// projected negative gradient, coordinate bumps) and seeded uniform draws
/// from the admissible set, using the true one-sided derivative of the
/// control-to-state map.
pub fn check_b_stationarity(
    spec: &ProblemSpec,
    w: &ControlPair,
    y: &Field,
    n_probes: usize,
    seed: u64,
    probe_radius: f64,
) -> Result<BStatRecord> {
    let g = spec.grid().clone();
    let mut probes: Vec<(String, ControlPair)> = Vec::new();

    probes.push(("self".into(), w.clone()));
    if let (Bound::Field(ub), BoundaryBound::Field(vb)) = (&spec.u_bound, &spec.v_bound) {
        probes.push((
            "bounds".into(),
            ControlPair { u: ub.clone(), v: vb.clone() },
        ));
    }
    let rg = reduced_gradient_with_state(spec, w, y)?;
    probes.push((
        "proj_neg_gradient".into(),
        project_admissible(spec, &w.axpy(-1.0, &ControlPair { u: rg.gu, v: rg.gv })),
    ));

    // coordinate bumps, down always admissible, up clipped
    let n = g.n_nodes();
    for (t, frac) in [(1usize, 0.25), (2, 0.5), (3, 0.75)] {
        let node = ((n - 1) as f64 * frac) as usize;
        let mut down = w.clone();
        down.u.values[node] -= 1.0;
        probes.push((format!("bump_down_{t}"), down));
        let mut up = w.clone();
        up.u.values[node] += 1.0;
        probes.push((format!("bump_up_{t}"), project_admissible(spec, &up)));
    }
    let kb = g.n_boundary() / 2;
    let mut bdown = w.clone();
    bdown.v.values[kb] -= 1.0;
    probes.push(("boundary_bump_down".into(), bdown));

    // seeded uniform draws in the admissible band
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while probes.len() < n_probes {
        let u = match &spec.u_bound {
            Bound::Field(ub) => Field::new(
                g.clone(),
                ub.values
                    .iter()
                    .map(|b| b - rng.gen_range(0.0..probe_radius))
                    .collect(),
            )?,
            Bound::Infinite => Field::new(
                g.clone(),
                w.u.values
                    .iter()
                    .map(|u| u + rng.gen_range(-probe_radius..probe_radius))
                    .collect(),
            )?,
        };
        let v = match &spec.v_bound {
            BoundaryBound::Field(vb) => BoundaryField::new(
                g.clone(),
                vb.values
                    .iter()
                    .map(|b| b - rng.gen_range(0.0..probe_radius))
                    .collect(),
            )?,
            BoundaryBound::Infinite => BoundaryField::new(
                g.clone(),
                w.v.values
                    .iter()
                    .map(|v| v + rng.gen_range(-probe_radius..probe_radius))
                    .collect(),
            )?,
        };
        probes.push((format!("random_{}", probes.len()), ControlPair { u, v }));
    }

    let mut rows = Vec::with_capacity(probes.len());
    let mut min_value = f64::INFINITY;
    let mut min_probe = 0;
    for (id, (label, probe)) in probes.into_iter().enumerate() {
        debug_assert!(spec.is_admissible(&probe));
        let f = probe.u.axpy(-1.0, &w.u);
        let h = probe.v.axpy(-1.0, &w.v);
        let jprime = objective_dir_deriv_with_state(spec, w, y, &f, &h)?;
        if jprime < min_value {
            min_value = jprime;
            min_probe = id;
        }
        rows.push(ProbeRow { id, label, jprime });
    }
    Ok(BStatRecord {
        min_value,
        min_probe,
        n_probes: rows.len(),
        probes: rows,
    })
}

/// Discrete constraint-qualification measure: quadrature measure of the
/// geometric kink band `{|y - t_bar| <= max(hx, hy)}` intersected with a
/// one-cell neighborhood of the active set `{|u - u_b| <= active_tol}`.
/// Zero by definition when `u_b = ∞`.
pub fn check_cq(spec: &ProblemSpec, w: &ControlPair, y: &Field) -> f64 {
    if !spec.u_bound.is_finite() {
        return 0.0;
    }
    let g = spec.grid();
    let delta = g.hx.max(g.hy);
    let band = level_set_mask(y, spec.pc1.t_bar, delta);
    let active = dilate_mask(g, &active_mask_omega(spec, w));
    let wts = g.weights_omega();
    band.iter()
        .zip(&active)
        .zip(&wts)
        .filter(|((b, a), _)| **b && **a)
        .map(|(_, w)| w)
        .sum()
}

/// Verify the strong-stationarity system with the left-branch Clarke
/// selection: solve the adjoint with coefficient `ā_-`, recover the bound
/// multipliers from the stationarity identities, and report complementarity
/// and kink-sign residuals.
pub fn check_strong_stationarity(
    spec: &ProblemSpec,
    w: &ControlPair,
    y: &Field,
    cq_measure: f64,
    cq_threshold: f64,
) -> Result<(StrongRecord, StrongFields)> {
    let delta = spec.delta_level(y);
    let coeff = coefficients(spec, y, delta);
    let src_omega = y.axpy(-1.0, &spec.y_omega);
    let src_gamma = trace(y).axpy(-1.0, &spec.y_gamma).scale(spec.alpha);
    let p = solve_linear(spec.robin(), &coeff.a_minus, &src_omega, &src_gamma, &spec.solver)?;

    let zeta_omega = p.axpy(spec.kappa_omega, &w.u).scale(-1.0);
    let zeta_gamma = trace(&p).axpy(spec.kappa_gamma, &w.v).scale(-1.0);

    let act_o = active_mask_omega(spec, w);
    let act_g = active_mask_gamma(spec, w);

    let mut res_io = 0.0f64;
    let mut min_ao: Option<f64> = None;
    for (i, &z) in zeta_omega.values.iter().enumerate() {
        if act_o[i] {
            min_ao = Some(min_ao.map_or(z, |m: f64| m.min(z)));
        } else {
            res_io = res_io.max(z.abs());
        }
    }
    let mut res_ig = 0.0f64;
    let mut min_ag: Option<f64> = None;
    for (k, &z) in zeta_gamma.values.iter().enumerate() {
        if act_g[k] {
            min_ag = Some(min_ag.map_or(z, |m: f64| m.min(z)));
        } else {
            res_ig = res_ig.max(z.abs());
        }
    }

    let jump = spec.pc1.slope_jump();
    let band = level_set_mask(y, spec.pc1.t_bar, delta);
    let mut sign_residual = 0.0f64;
    for (i, &in_band) in band.iter().enumerate() {
        if in_band {
            sign_residual = sign_residual.max((-(p.values[i] * jump)).max(0.0));
        }
    }
    let wts = spec.grid().weights_omega();
    let band_measure = band
        .iter()
        .zip(&wts)
        .filter(|(b, _)| **b)
        .map(|(_, w)| w)
        .sum();

    let record = StrongRecord {
        residual_inactive_omega: res_io,
        min_zeta_active_omega: min_ao,
        residual_inactive_gamma: res_ig,
        min_zeta_active_gamma: min_ag,
        sign_residual,
        band_measure,
        p_norm_max: p.norm_max(),
        conditional: cq_measure > cq_threshold,
    };
    let fields = StrongFields {
        p,
        a_tilde: coeff.a_minus,
        zeta_omega,
        zeta_gamma,
    };
    Ok((record, fields))
}

/// Verify the multiplier system on one side of the kink. The multiplier
/// `μ >= 0` supported in the kink band is recovered by nonnegatively
/// constrained least squares on the stationarity residual, with the bound
/// multipliers eliminated through their complementarity sign structure
/// (free nonnegative on active sets, zero elsewhere). The adjoint is affine
/// in `μ` through the linear solve with coefficient `ā_∓` and interior
/// source `y - y_Ω ± |d1'(t̄) - d2'(t̄)| μ`.
pub fn check_multiplier_system(
    spec: &ProblemSpec,
    w: &ControlPair,
    y: &Field,
    side: KinkSide,
) -> Result<(MultiplierRecord, Field, Field)> {
    if side == KinkSide::Plus && spec.bounds_finite() && spec.at_bounds(w) {
        return Err(Error::Infeasible(
            "plus-side multiplier system requires a control different from the bounds".into(),
        ));
    }
    let g = spec.grid().clone();
    let delta = spec.delta_level(y);
    let coeff = coefficients(spec, y, delta);
    let a = coeff.side(side).clone();
    let band = level_set_mask(y, spec.pc1.t_bar, delta);
    let c_d = spec.pc1.slope_jump().abs();
    let sign = match side {
        KinkSide::Minus => 1.0,
        KinkSide::Plus => -1.0,
    };

    let src_omega = y.axpy(-1.0, &spec.y_omega);
    let src_gamma = trace(y).axpy(-1.0, &spec.y_gamma).scale(spec.alpha);
    let p0 = solve_linear(spec.robin(), &a, &src_omega, &src_gamma, &spec.solver)?;

    let act_o = active_mask_omega(spec, w);
    let act_g = active_mask_gamma(spec, w);
    let wo = g.weights_omega();
    let wg = g.weights_gamma();

    // residual of the stationarity identities with eliminated bound
    // multipliers: on inactive nodes q must vanish, on active nodes only its
    // positive part is a violation (zeta = -q must be >= 0). The boolean
    // masks mark where the residual responds to the adjoint.
    struct Residuals {
        r_o: Vec<f64>,
        r_g: Vec<f64>,
        sel_o: Vec<bool>,
        sel_g: Vec<bool>,
        obj: f64,
    }
    let residuals = |p: &Field| -> Residuals {
        let mut r_o = Vec::with_capacity(p.len());
        let mut sel_o = Vec::with_capacity(p.len());
        for (i, (p, u)) in p.values.iter().zip(&w.u.values).enumerate() {
            let q = p + spec.kappa_omega * u;
            if act_o[i] {
                r_o.push(q.max(0.0));
                sel_o.push(q > 0.0);
            } else {
                r_o.push(q);
                sel_o.push(true);
            }
        }
        let ptr = trace(p);
        let mut r_g = Vec::with_capacity(ptr.len());
        let mut sel_g = Vec::with_capacity(ptr.len());
        for (k, (p, v)) in ptr.values.iter().zip(&w.v.values).enumerate() {
            let q = p + spec.kappa_gamma * v;
            if act_g[k] {
                r_g.push(q.max(0.0));
                sel_g.push(q > 0.0);
            } else {
                r_g.push(q);
                sel_g.push(true);
            }
        }
        let obj = 0.5 * r_o.iter().zip(&wo).map(|(r, w)| w * r * r).sum::<f64>()
            + 0.5 * r_g.iter().zip(&wg).map(|(r, w)| w * r * r).sum::<f64>();
        Residuals { r_o, r_g, sel_o, sel_g, obj }
    };

    let band_nodes: Vec<usize> = band
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| if b { Some(i) } else { None })
        .collect();
    let band_measure: f64 = band_nodes.iter().map(|&i| wo[i]).sum();
    let nb = band_nodes.len();

    let mut mu = vec![0.0f64; nb];
    let mut p = p0.clone();
    let mut res = residuals(&p);
    let mut iterations = 0usize;

    // p(mu) = p0 + sign * c_d * K^{-1} M mu, restricted to the band.
    let solve_shift = |mu: &[f64]| -> Result<Field> {
        let mut mu_field = Field::zeros(g.clone());
        for (slot, &i) in band_nodes.iter().enumerate() {
            mu_field.values[i] = sign * c_d * mu[slot];
        }
        solve_linear(
            spec.robin(),
            &a,
            &mu_field,
            &BoundaryField::zeros(g.clone()),
            &spec.solver,
        )
    };

    if c_d > 0.0 && nb > 0 && res.obj > 1e-28 {
        // Projected Newton-CG on the convex piecewise-quadratic objective:
        // Gauss-Newton steps on the free set, inner CG with matrix-free
        // Hessian products (two linear solves per product).
        for outer in 0..40 {
            iterations = outer + 1;

            let ro_field = Field::new(g.clone(), res.r_o.clone())?;
            let rg_field = BoundaryField::new(g.clone(), res.r_g.clone())?;
            let psi = solve_linear(spec.robin(), &a, &ro_field, &rg_field, &spec.solver)?;
            let grad: Vec<f64> = band_nodes
                .iter()
                .map(|&i| sign * c_d * wo[i] * psi.values[i])
                .collect();

            let pg_res = mu
                .iter()
                .zip(&grad)
                .map(|(m, gr)| (m - (m - gr).max(0.0)).abs())
                .fold(0.0f64, f64::max);
            let scale = 1.0 + grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if pg_res <= 1e-12 * scale || res.obj <= 1e-28 {
                break;
            }

            let free: Vec<bool> = mu
                .iter()
                .zip(&grad)
                .map(|(m, gr)| *m > 0.0 || *gr < 0.0)
                .collect();

            // Hessian product on the free slots (SPSD plus a small shift).
            let hess = |v: &[f64]| -> Result<Vec<f64>> {
                let mut v_field = Field::zeros(g.clone());
                for (slot, &i) in band_nodes.iter().enumerate() {
                    if free[slot] {
                        v_field.values[i] = c_d * v[slot];
                    }
                }
                let t1 = solve_linear(
                    spec.robin(),
                    &a,
                    &v_field,
                    &BoundaryField::zeros(g.clone()),
                    &spec.solver,
                )?;
                let t1_sel = Field::new(
                    g.clone(),
                    t1.values
                        .iter()
                        .zip(&res.sel_o)
                        .map(|(t, s)| if *s { *t } else { 0.0 })
                        .collect(),
                )?;
                let t1_tr = trace(&t1);
                let t1g_sel = BoundaryField::new(
                    g.clone(),
                    t1_tr
                        .values
                        .iter()
                        .zip(&res.sel_g)
                        .map(|(t, s)| if *s { *t } else { 0.0 })
                        .collect(),
                )?;
                let t2 = solve_linear(spec.robin(), &a, &t1_sel, &t1g_sel, &spec.solver)?;
                Ok(band_nodes
                    .iter()
                    .zip(&free)
                    .zip(v)
                    .map(|((&i, f), v)| {
                        if *f {
                            c_d * wo[i] * t2.values[i] + 1e-12 * v
                        } else {
                            *v
                        }
                    })
                    .collect())
            };

            // inner CG for the Newton direction on the free set
            let rhs: Vec<f64> = grad
                .iter()
                .zip(&free)
                .map(|(gr, f)| if *f { -gr } else { 0.0 })
                .collect();
            let mut dir = vec![0.0f64; nb];
            {
                let mut r: Vec<f64> = rhs.clone();
                let mut pdir = r.clone();
                let dot =
                    |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
                let rhs_norm = dot(&rhs, &rhs).sqrt();
                let mut rho = dot(&r, &r);
                for _ in 0..40 {
                    if rho.sqrt() <= 0.05 * rhs_norm {
                        break;
                    }
                    let hp = hess(&pdir)?;
                    let denom = dot(&pdir, &hp);
                    if denom <= 0.0 {
                        break;
                    }
                    let alpha = rho / denom;
                    for i in 0..nb {
                        dir[i] += alpha * pdir[i];
                        r[i] -= alpha * hp[i];
                    }
                    let rho_new = dot(&r, &r);
                    let beta = rho_new / rho;
                    rho = rho_new;
                    for i in 0..nb {
                        pdir[i] = r[i] + beta * pdir[i];
                    }
                }
            }

            // projected Armijo line search on the objective
            let dec: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let mu_t: Vec<f64> = mu
                    .iter()
                    .zip(&dir)
                    .map(|(m, d)| (m + alpha * d).max(0.0))
                    .collect();
                let p_t = p0.axpy(1.0, &solve_shift(&mu_t)?);
                let res_t = residuals(&p_t);
                if res_t.obj <= res.obj + 1e-4 * alpha * dec.min(0.0) && res_t.obj < res.obj {
                    mu = mu_t;
                    p = p_t;
                    res = res_t;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
    let (r_o, r_g, obj) = (res.r_o, res.r_g, res.obj);

    let residual_max = r_o
        .iter()
        .chain(r_g.iter())
        .fold(0.0f64, |m, r| m.max(r.abs()));
    let residual_l2 = (2.0 * obj).sqrt();
    let mut mu_field = Field::zeros(g.clone());
    for (slot, &i) in band_nodes.iter().enumerate() {
        mu_field.values[i] = mu[slot];
    }
    let mu_l2 = crate::grid::norm_omega(&mu_field);
    let record = MultiplierRecord {
        side,
        residual_max,
        residual_l2,
        mu_max: mu_field.norm_max(),
        mu_l2,
        mu_nonneg: mu_field.values.iter().all(|&m| m >= 0.0),
        mu_supported_in_band: mu_field
            .values
            .iter()
            .zip(&band)
            .all(|(m, b)| *b || *m == 0.0),
        band_measure,
        ls_iterations: iterations,
    };
    Ok((record, mu_field, p))
}

/// The all-bound special case `w̄ = (u_b, v_b)`: solve the left-branch
/// adjoint and check the pointwise inequalities `-p/κ_Ω >= u_b` in Ω and
/// `-trace(p)/κ_Γ >= v_b` on Γ.
pub fn check_bound_case(spec: &ProblemSpec, w: &ControlPair) -> Result<(UbvbRecord, Field)> {
    if !spec.bounds_finite() || !spec.at_bounds(w) {
        return Err(Error::Infeasible(
            "bound-case check requires finite bounds with w = (u_b, v_b) nodewise".into(),
        ));
    }
    let y = control_to_state(spec, w)?;
    let delta = spec.delta_level(&y);
    let coeff = coefficients(spec, &y, delta);
    let src_omega = y.axpy(-1.0, &spec.y_omega);
    let src_gamma = trace(&y).axpy(-1.0, &spec.y_gamma).scale(spec.alpha);
    let p = solve_linear(spec.robin(), &coeff.a_minus, &src_omega, &src_gamma, &spec.solver)?;

    let ub = spec.u_bound.as_field().expect("finite bound");
    let vb = spec.v_bound.as_field().expect("finite bound");
    let min_omega = p
        .values
        .iter()
        .zip(&ub.values)
        .map(|(p, b)| -p / spec.kappa_omega - b)
        .fold(f64::INFINITY, f64::min);
    let ptr = trace(&p);
    let min_gamma = ptr
        .values
        .iter()
        .zip(&vb.values)
        .map(|(p, b)| -p / spec.kappa_gamma - b)
        .fold(f64::INFINITY, f64::min);
    Ok((UbvbRecord { min_omega, min_gamma }, p))
}

/// Discrete counterpart of the level-set Laplacian lemma: the interior
/// Laplacian of the state vanishes on the kink band, so the state equation
/// forces `u = d(t_bar)` there. Reports the strong-form residual, the band
/// Laplacian maximum, and the band discrepancy `max |u - d(t_bar)|`.
pub fn check_appendix_levelset(spec: &ProblemSpec, w: &ControlPair, y: &Field) -> AppendixRecord {
    let g = spec.grid();
    let lap = interior_laplacian(y);
    let dy = superpose(&spec.pc1, y);
    let mut strong = 0.0f64;
    for n in 0..g.n_nodes() {
        if g.is_interior(n) {
            strong = strong.max((-lap.values[n] + dy.values[n] - w.u.values[n]).abs());
        }
    }

    let delta = spec.delta_level(y);
    let band = level_set_mask(y, spec.pc1.t_bar, delta);
    let d_tbar = pc1_eval(&spec.pc1, spec.pc1.t_bar);
    let mut band_lap = 0.0f64;
    let mut band_disc = 0.0f64;
    let wts = g.weights_omega();
    let mut band_measure = 0.0;
    for n in 0..g.n_nodes() {
        if band[n] {
            band_measure += wts[n];
            if g.is_interior(n) {
                band_lap = band_lap.max(lap.values[n].abs());
                band_disc = band_disc.max((w.u.values[n] - d_tbar).abs());
            }
        }
    }
    AppendixRecord {
        strong_form_residual: strong,
        band_max_laplacian: band_lap,
        band_discrepancy: band_disc,
        band_measure,
    }
}

/// Combine the primal and dual verdicts: under CQ both must agree; without
/// CQ only the direction "strong implies B" is asserted.
pub fn check_equivalence(
    b_pass: bool,
    strong_pass: bool,
    cq_measure: f64,
    cq_threshold: f64,
) -> EquivalenceRecord {
    let cq_holds = cq_measure <= cq_threshold;
    let status = if cq_holds {
        if b_pass == strong_pass {
            "pass"
        } else {
            "fail"
        }
    } else if !strong_pass || b_pass {
        "conditional_pass"
    } else {
        "conditional_fail"
    };
    EquivalenceRecord {
        b_pass,
        strong_pass,
        cq_holds,
        status: status.into(),
    }
}

/// Run every applicable stationarity check at `w` and assemble the report.
pub fn verify(spec: &ProblemSpec, w: &ControlPair, opts: &VerifyOptions) -> Result<StationarityReport> {
    let y = control_to_state(spec, w)?;
    let j = objective_with_state(spec, w, &y);
    let g = spec.grid();
    let cq_threshold = opts.tol.cq_threshold.unwrap_or(g.hx.max(g.hy));

    let b_stat = check_b_stationarity(spec, w, &y, opts.n_probes, opts.seed, opts.probe_radius)?;
    let cq = check_cq(spec, w, &y);
    let (strong, _fields) = check_strong_stationarity(spec, w, &y, cq, cq_threshold)?;
    let (multiplier_minus, _, _) = check_multiplier_system(spec, w, &y, KinkSide::Minus)?;
    let multiplier_plus = if spec.bounds_finite() && spec.at_bounds(w) {
        None
    } else {
        Some(check_multiplier_system(spec, w, &y, KinkSide::Plus)?.0)
    };
    let ubvb = if spec.bounds_finite() && spec.at_bounds(w) {
        Some(check_bound_case(spec, w)?.0)
    } else {
        None
    };
    let appendix = check_appendix_levelset(spec, w, &y);

    let b_pass = b_stat.min_value >= -opts.tol.stat_tol * (1.0 + j.abs());
    let strong_pass = strong.pass(opts.tol.stat_tol);
    let equivalence = check_equivalence(b_pass, strong_pass, cq, cq_threshold);

    let mut verdicts = BTreeMap::new();
    verdicts.insert("b_stationarity".into(), b_pass);
    if !strong.conditional {
        verdicts.insert("strong_stationarity".into(), strong_pass);
    }
    verdicts.insert(
        "multiplier_minus".into(),
        multiplier_minus.residual_max <= opts.tol.multiplier_tol,
    );
    if let Some(mp) = &multiplier_plus {
        verdicts.insert(
            "multiplier_plus".into(),
            mp.residual_max <= opts.tol.multiplier_tol,
        );
    }
    if let Some(ub) = &ubvb {
        verdicts.insert(
            "ubvb".into(),
            ub.min_omega >= -opts.tol.bound_tol && ub.min_gamma >= -opts.tol.bound_tol,
        );
    }
    verdicts.insert("equivalence".into(), equivalence.pass());

    Ok(StationarityReport {
        b_stat,
        cq,
        strong,
        multiplier_minus,
        multiplier_plus,
        ubvb,
        appendix,
        verdicts,
    })
}
