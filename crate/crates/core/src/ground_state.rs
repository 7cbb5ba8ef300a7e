//! Minimization of the energy on the mass sphere, constancy classification
//! and continuation of the branch that leaves the constant family.
//!
//! The flow is a Sobolev gradient descent: the gradient is taken in the
//! metric `A = K + σM` (σ = max(1, κ^{p−2})), projected onto the tangent
//! space of the mass sphere and followed by a retraction `u ↦ √μ u/‖u‖₂`.
//! Once the residual is small a Newton solve at fixed mass polishes the
//! state.

use std::io::Write;

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::{AssembledForms, GraphFunction};
use crate::error::{Error, Result};
use crate::format::sig;
use crate::linalg::{solve_real, ChainFactor};
use crate::nls_energy::{
    energy, energy_differential, inner_re, nonlinear_force, nonlinear_jacobian_real, random_field, solve_complex_with,
    NlsParams, StationaryState,
};
use crate::spectral::{eigen_smallest, lambda2_pair};
use crate::stability::tangent_hessian;

/// Relative sup-norm distance to the phase-aligned constant below which a
/// state counts as constant.
pub const CONSTANCY_TOL: f64 = 1e-5;

/// Energies closer than this are ties.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Schedule {
    pub max_iter: usize,
    /// Target for the projected gradient norm (equal to the residual of the
    /// stationary equation in the discrete `L²` norm).
    pub tol: f64,
    /// Residual below which the Newton polish is attempted.
    pub handoff: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub polish: bool,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-8,
            handoff: 1e-3,
            initial_step: 1.0,
            max_step: 4.0,
            polish: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Converged,
    IterationCap,
    BacktrackingExhausted,
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub state: StationaryState,
    pub energy: f64,
    pub iterations: usize,
    pub status: FlowStatus,
    /// Energy after every accepted step of the descent (polish excluded).
    pub energy_history: Vec<f64>,
}

impl FlowResult {
    pub fn converged(&self) -> bool {
        self.status == FlowStatus::Converged
    }
}

/// Factorizations shared by all runs at one mass.
struct FlowContext<'a> {
    forms: &'a AssembledForms,
    params: NlsParams,
    metric: ChainFactor<f64>,
    mass_factor: ChainFactor<f64>,
}

impl<'a> FlowContext<'a> {
    fn new(forms: &'a AssembledForms, params: NlsParams) -> Result<Self> {
        let ell = forms.mesh.graph().total_length();
        let sigma = params.constant_multiplier(ell).max(1.0);
        let a = forms.stiffness.combine(1.0, &forms.mass, sigma);
        Ok(Self {
            forms,
            params,
            metric: ChainFactor::new(&forms.mesh, &a)?,
            mass_factor: ChainFactor::new(&forms.mesh, &forms.mass)?,
        })
    }

    fn normalize(&self, u: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let m = self.forms.mass.form_complex(u);
        if !(m > 0.0) {
            return Err(Error::ZeroFunction);
        }
        Ok(u * Complex64::new((self.params.mu / m).sqrt(), 0.0))
    }

    fn energy(&self, u: &DVector<Complex64>) -> f64 {
        let gf = GraphFunction::new(&self.forms.mesh, u.clone()).expect("mesh dimension");
        energy(&gf, self.forms, self.params.p)
    }

    /// `‖M⁻¹g − c·u‖_M` with `c` making the result tangent.
    fn residual(&self, u: &DVector<Complex64>, g: &DVector<Complex64>) -> f64 {
        let rm = solve_complex_with(&self.mass_factor, g);
        let c = inner_re(u, g) / self.params.mu;
        let d = rm - u * Complex64::new(c, 0.0);
        self.forms.mass.form_complex(&d).max(0.0).sqrt()
    }

    /// Newton at fixed mass from `u`; accepted only if it does not raise the
    /// energy, which keeps the flow from being pulled onto a nearby saddle.
    fn polish(
        &self,
        u: &DVector<Complex64>,
        e: f64,
        it: usize,
        history: &[f64],
        schedule: &Schedule,
    ) -> Option<FlowResult> {
        let p = self.params.p;
        let gf = GraphFunction::new(&self.forms.mesh, u.clone()).ok()?;
        let s = newton_stationary(&gf, self.forms, self.params).ok()?;
        let en = s.energy(self.forms, p);
        if s.pde_residual < schedule.tol && en <= e + 1e-10 * e.abs().max(1e-12) {
            return Some(FlowResult {
                energy: en,
                state: s,
                iterations: it,
                status: FlowStatus::Converged,
                energy_history: history.to_vec(),
            });
        }
        debug!("newton polish rejected (energy {en} vs {e})");
        None
    }

    fn flow(&self, u0: &DVector<Complex64>, schedule: &Schedule) -> Result<FlowResult> {
        let p = self.params.p;
        let mut u = self.normalize(u0)?;
        let mut e = self.energy(&u);
        let mut tau = schedule.initial_step;
        let mut history = vec![e];
        let mut next_newton = schedule.handoff;
        let mut status = FlowStatus::IterationCap;
        let mut iterations = schedule.max_iter;
        for it in 0..schedule.max_iter {
            let g = energy_differential(&u, self.forms, p);
            let res = self.residual(&u, &g);
            if res < schedule.tol {
                status = FlowStatus::Converged;
                iterations = it;
                break;
            }
            if schedule.polish && res < next_newton {
                next_newton = res * 0.1;
                if let Some(r) = self.polish(&u, e, it, &history, schedule) {
                    return Ok(r);
                }
            }
            let w = solve_complex_with(&self.metric, &g);
            let mu = self.forms.mass.apply_complex(&u);
            let z = solve_complex_with(&self.metric, &mu);
            let coef = inner_re(&mu, &w) / inner_re(&mu, &z);
            let d = &w - &z * Complex64::new(coef, 0.0);
            let slope = inner_re(&g, &d);
            let mut accepted = None;
            for _ in 0..60 {
                let cand = self.normalize(&(&u - &d * Complex64::new(tau, 0.0)))?;
                let ec = self.energy(&cand);
                let armijo = ec <= e - 1e-4 * tau * slope;
                let flat = ec <= e && tau * slope < 1e-13 * e.abs().max(f64::MIN_POSITIVE);
                if armijo || flat {
                    accepted = Some((cand, ec));
                    break;
                }
                tau *= 0.5;
            }
            match accepted {
                Some((cand, ec)) => {
                    u = cand;
                    e = ec;
                    history.push(e);
                    tau = (tau * 1.5).min(schedule.max_step);
                }
                None => {
                    // the decrease is below the rounding level of the energy
                    if schedule.polish {
                        if let Some(r) = self.polish(&u, e, it, &history, schedule) {
                            return Ok(r);
                        }
                    }
                    status = FlowStatus::BacktrackingExhausted;
                    iterations = it;
                    break;
                }
            }
        }
        let state = StationaryState::evaluate(GraphFunction::new(&self.forms.mesh, u)?, self.forms, p)?;
        Ok(FlowResult {
            energy: e,
            state,
            iterations,
            status,
            energy_history: history,
        })
    }
}

/// Normalized (Sobolev) gradient flow from `u0` at the mass `params.mu`.
pub fn normalized_gradient_flow(
    u0: &GraphFunction,
    forms: &AssembledForms,
    params: NlsParams,
    schedule: &Schedule,
) -> Result<FlowResult> {
    FlowContext::new(forms, params)?.flow(u0.values(), schedule)
}

/// Phase `θ` such that `e^{−iθ}u` has a positive real mean; falls back to
/// the phase of the largest entry for mean-free states.
pub fn phase_of(forms: &AssembledForms, u: &DVector<Complex64>) -> f64 {
    let s = forms.integral(u);
    let scale = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if s.norm() > 1e-10 * scale * forms.mesh.graph().total_length() {
        s.arg()
    } else {
        u.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).map_or(0.0, |z| z.arg())
    }
}

/// `‖u − e^{iθ*}κ‖_∞ ≤ 1e-5·κ` with `θ* = arg ∫u`.
pub fn is_constant(u: &GraphFunction, forms: &AssembledForms, mu: f64) -> bool {
    let kappa = (mu / forms.mesh.graph().total_length()).sqrt();
    let c = Complex64::from_polar(kappa, phase_of(forms, u.values()));
    u.values().iter().all(|z| (z - c).norm() <= CONSTANCY_TOL * kappa)
}

/// Newton's method for `−Ku + N(u) = λMu`, `uᵀMu = μ` on real states; a
/// complex input is phase-aligned first and rotated back at the end.
pub fn newton_stationary(u0: &GraphFunction, forms: &AssembledForms, params: NlsParams) -> Result<StationaryState> {
    let theta = phase_of(forms, u0.values());
    let rot = Complex64::from_polar(1.0, -theta);
    let aligned = u0.values().map(|z| z * rot);
    let sup = aligned.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let imag = aligned.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > 1e-6 * sup {
        return Err(Error::NewtonDivergence("state is not real up to a global phase".into()));
    }
    let p = params.p;
    let mesh = &forms.mesh;
    let mut u = aligned.map(|z| z.re);
    let m0 = forms.mass.form(&u);
    if !(m0 > 0.0) {
        return Err(Error::ZeroFunction);
    }
    u *= (params.mu / m0).sqrt();
    let force = |u: &DVector<f64>| nonlinear_force(mesh, &u.map(|x| Complex64::new(x, 0.0)), p).map(|z| z.re);
    let mut lam = (force(&u).dot(&u) - forms.dirichlet_real(&u)) / params.mu;
    let mass_factor = ChainFactor::new(mesh, &forms.mass)?;
    let dual = |r: &DVector<f64>| r.dot(&mass_factor.solve(r)).max(0.0).sqrt();
    let mut best = f64::INFINITY;
    let mut converged = false;
    for _ in 0..40 {
        let n = force(&u);
        let mu_vec = forms.mass.apply(&u);
        let f = &n - forms.stiffness.apply(&u) - &mu_vec * lam;
        let gm = 0.5 * (u.dot(&mu_vec) - params.mu);
        let res = dual(&f);
        let scale = dual(&n).max(f64::MIN_POSITIVE);
        if !res.is_finite() {
            return Err(Error::NewtonDivergence("non-finite residual".into()));
        }
        if res <= 1e-13 * scale || (res <= 1e-9 * scale && res > 0.5 * best) {
            converged = true;
            break;
        }
        if res > 1e6 * best.min(scale) {
            return Err(Error::NewtonDivergence(format!("residual grew to {res:e}")));
        }
        best = best.min(res);
        let jac = nonlinear_jacobian_real(mesh, &u, p).combine(1.0, &forms.stiffness.combine(-1.0, &forms.mass, -lam), 1.0);
        let minus_f = -&f;
        let sol = solve_real(mesh, &jac, &[&minus_f, &mu_vec])?;
        let denom = mu_vec.dot(&sol[1]);
        if denom.abs() < f64::MIN_POSITIVE {
            return Err(Error::NewtonDivergence("singular bordered system".into()));
        }
        let dlam = (-gm - mu_vec.dot(&sol[0])) / denom;
        u += &sol[0] + &sol[1] * dlam;
        lam += dlam;
    }
    if !converged {
        return Err(Error::NewtonDivergence("no convergence in 40 iterations".into()));
    }
    u *= (params.mu / forms.mass.form(&u)).sqrt();
    let back = Complex64::from_polar(1.0, theta);
    let gf = GraphFunction::new(mesh, u.map(|x| Complex64::new(x, 0.0) * back))?;
    StationaryState::evaluate(gf, forms, p)
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimumRecord {
    pub energy: f64,
    pub is_constant: bool,
}

#[derive(Clone, Debug)]
pub struct GroundStateResult {
    pub best: StationaryState,
    pub energy: f64,
    pub energy_constant: f64,
    pub starts_used: usize,
    pub converged_starts: usize,
    /// Distinct stationary states reached, sorted by energy.
    pub all_local_minima: Vec<MinimumRecord>,
    pub is_constant: bool,
    /// `E(κ_μ) − E(best)`.
    pub gap_to_constant: f64,
    /// Another distinct state ties with the best within `1e-9`.
    pub degenerate: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub n_random_starts: usize,
    pub seed: u64,
    pub schedule: Schedule,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            n_random_starts: 4,
            seed: 0,
            schedule: Schedule::default(),
        }
    }
}

/// Starting points: `κ_μ`, `κ_μ ± 0.1√μ·φ₂`, then alternately random
/// combinations of low eigenmodes around `κ_μ` and random localized bumps.
fn starts(forms: &AssembledForms, params: NlsParams, n_random: usize, seed: u64) -> Result<Vec<DVector<Complex64>>> {
    let n = forms.dim();
    let ell = forms.mesh.graph().total_length();
    let kappa = params.kappa(ell);
    let c = |x: f64| Complex64::new(x, 0.0);
    let constant = DVector::from_element(n, c(kappa));
    let mut out = vec![constant.clone()];
    if n >= 3 {
        let (_, phi2) = lambda2_pair(forms)?;
        let kick = phi2 * (0.1 * params.mu.sqrt());
        out.push(constant.map(|z| z) + kick.map(c));
        out.push(constant.map(|z| z) - kick.map(c));
    }
    let modes = if n >= 3 { Some(eigen_smallest(forms, 6.min(n))?) } else { None };
    for i in 0..n_random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
        match (&modes, i % 2) {
            (Some(m), 0) => {
                let mut v = constant.clone();
                for (j, phi) in m.vectors.iter().enumerate().skip(1) {
                    let a = rng.random_range(-1.0..1.0) * 0.5 * params.mu.sqrt() / j as f64;
                    v += phi.map(|x| c(a * x));
                }
                out.push(v);
            }
            _ => out.push(random_field(&forms.mesh, &mut rng).into_values()),
        }
    }
    Ok(out)
}

fn sup_distance(forms: &AssembledForms, a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    let ra = Complex64::from_polar(1.0, -phase_of(forms, a));
    let rb = Complex64::from_polar(1.0, -phase_of(forms, b));
    a.iter().zip(b.iter()).map(|(x, y)| (x * ra - y * rb).norm()).fold(0.0, f64::max)
}

/// Refuses masses with no ground state at `p = 6`.
pub fn check_critical_mass(forms: &AssembledForms, params: NlsParams) -> Result<()> {
    if params.is_critical() {
        let critical = forms.mesh.graph().critical_mass();
        if params.mu > critical {
            return Err(Error::SupercriticalMass {
                mass: params.mu,
                critical,
            });
        }
    }
    Ok(())
}

/// Multistart minimization of the energy at mass `params.mu`.
pub fn find_ground_state(forms: &AssembledForms, params: NlsParams, opts: &SearchOptions) -> Result<GroundStateResult> {
    check_critical_mass(forms, params)?;
    let g = forms.mesh.graph();
    let ell = g.total_length();
    let kappa = params.kappa(ell);
    let mut schedule = opts.schedule.clone();
    let near_critical = params.is_critical() && params.mu > 0.9 * g.critical_mass();
    if near_critical {
        schedule.max_iter *= 4;
    }
    let ctx = FlowContext::new(forms, params)?;
    let starts = starts(forms, params, opts.n_random_starts, opts.seed)?;
    let runs: Vec<Result<FlowResult>> = starts.par_iter().map(|u0| ctx.flow(u0, &schedule)).collect();
    let mut done: Vec<FlowResult> = runs
        .into_iter()
        .filter_map(|r| r.ok())
        .filter(|r| r.converged())
        .collect();
    if done.is_empty() {
        return Err(Error::NoConvergedStart(starts.len()));
    }
    done.sort_by(|a, b| {
        a.energy.total_cmp(&b.energy).then_with(|| {
            let (x, y) = (a.state.u.values(), b.state.u.values());
            x.iter()
                .zip(y.iter())
                .map(|(p, q)| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut distinct: Vec<&FlowResult> = Vec::new();
    for r in &done {
        let dup = distinct
            .iter()
            .any(|d| sup_distance(forms, d.state.u.values(), r.state.u.values()) <= CONSTANCY_TOL * kappa);
        if !dup {
            distinct.push(r);
        }
    }
    let best = &done[0];
    let degenerate = distinct.len() > 1 && (distinct[1].energy - best.energy).abs() <= TIE_TOL;
    let energy_constant = -params.mu.powf(params.p / 2.0) * ell.powf(1.0 - params.p / 2.0) / params.p;
    let best_const = is_constant(&best.state.u, forms, params.mu);
    if near_critical {
        info!(
            "near-critical mass {}: concentration max|u|/κ = {}",
            params.mu,
            best.state.u.sup_norm() / kappa
        );
    }
    Ok(GroundStateResult {
        best: best.state.clone(),
        energy: best.energy,
        energy_constant,
        starts_used: starts.len(),
        converged_starts: done.len(),
        all_local_minima: distinct
            .iter()
            .map(|r| MinimumRecord {
                energy: r.energy,
                is_constant: is_constant(&r.state.u, forms, params.mu),
            })
            .collect(),
        is_constant: best_const,
        gap_to_constant: energy_constant - best.energy,
        degenerate,
        iterations: best.iterations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Mu2Estimate {
    pub estimate: f64,
    /// Final bracket: constant at `lo`, nonconstant at `hi`.
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
}

/// Bisection on the constancy of the ground state over `[lo, hi]`.
pub fn estimate_mu2(forms: &AssembledForms, p: f64, bracket: (f64, f64), tol: f64, opts: &SearchOptions) -> Result<Mu2Estimate> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && tol > 0.0) {
        return Err(Error::InvalidParameter(format!("bad bracket [{lo}, {hi}] or tolerance {tol}")));
    }
    let constant_at = |mu: f64| -> Result<bool> {
        Ok(find_ground_state(forms, NlsParams::new(p, mu)?, opts)?.is_constant)
    };
    let mut evaluations = 2;
    if !constant_at(lo)? || constant_at(hi)? {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        if constant_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Mu2Estimate {
        estimate: 0.5 * (lo + hi),
        lo,
        hi,
        evaluations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub mu: f64,
    pub energy_ground: f64,
    pub energy_constant: f64,
    pub is_constant: bool,
    pub gap: f64,
    pub iterations: usize,
}

/// Ground states over a mass grid; points run in parallel, rows keep grid order.
pub fn ground_state_sweep(forms: &AssembledForms, p: f64, masses: &[f64], opts: &SearchOptions) -> Result<Vec<SweepRow>> {
    masses
        .par_iter()
        .map(|&mu| {
            let r = find_ground_state(forms, NlsParams::new(p, mu)?, opts)?;
            Ok(SweepRow {
                mu,
                energy_ground: r.energy,
                energy_constant: r.energy_constant,
                is_constant: r.is_constant,
                gap: r.gap_to_constant,
                iterations: r.iterations,
            })
        })
        .collect()
}

/// CSV with columns `mu,energy_ground,energy_constant,is_constant,gap,iterations`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "mu,energy_ground,energy_constant,is_constant,gap,iterations")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            sig(r.mu),
            sig(r.energy_ground),
            sig(r.energy_constant),
            r.is_constant,
            sig(r.gap),
            r.iterations
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BranchPoint {
    pub arclength: f64,
    pub mass: f64,
    pub multiplier: f64,
    pub state: StationaryState,
    pub energy: f64,
    pub energy_constant: f64,
    /// `‖u − κ_μ‖_∞`.
    pub distance_to_constant: f64,
}

#[derive(Clone, Debug)]
pub struct Branch {
    /// Mass at which the smallest tangent-Hessian eigenvalue changes sign.
    pub bifurcation_mass: f64,
    /// Final bisection bracket for the sign change.
    pub bracket: (f64, f64),
    pub points: Vec<BranchPoint>,
    /// Indices of points where the mass turns back.
    pub folds: Vec<usize>,
}

/// Smallest tangent-Hessian eigenvalue of the constant state as a function
/// of the mass.
fn hessian_min(forms: &AssembledForms, p: f64, mu: f64) -> Result<f64> {
    Ok(tangent_hessian(forms, NlsParams::new(p, mu)?)?.real_block)
}

/// Brackets the zero of the tangent-Hessian eigenvalue starting from
/// `from_mass` and bisects down to a width of `1e-4·μ`.
pub fn locate_bifurcation(forms: &AssembledForms, p: f64, from_mass: f64) -> Result<(f64, f64)> {
    let mut lo = from_mass;
    let mut hi = from_mass;
    let mut tries = 0;
    while hessian_min(forms, p, lo)? <= 0.0 {
        lo /= 1.5;
        tries += 1;
        if tries > 60 {
            return Err(Error::NoBifurcationNearby(from_mass));
        }
    }
    tries = 0;
    while hessian_min(forms, p, hi)? > 0.0 {
        hi *= 1.5;
        tries += 1;
        if tries > 60 {
            return Err(Error::NoBifurcationNearby(from_mass));
        }
    }
    while hi - lo > 1e-4 * hi {
        let mid = 0.5 * (lo + hi);
        if hessian_min(forms, p, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// State vector `(u, λ, μ)` of the continuation.
type Point = (DVector<f64>, f64, f64);

fn w_norm(forms: &AssembledForms, t: &Point) -> f64 {
    (forms.mass.form(&t.0) + t.1 * t.1 + t.2 * t.2).sqrt()
}

/// Newton on `F(u, λ) = 0`, `½(uᵀMu − μ) = 0`, `⟨t, x − x_pred⟩_W = 0`.
fn corrector(forms: &AssembledForms, p: f64, pred: &Point, t: &Point) -> Result<Point> {
    let mesh = &forms.mesh;
    let n = forms.dim();
    let (mut u, mut lam, mut mu) = pred.clone();
    let mt = forms.mass.apply(&t.0);
    let kd = forms.stiffness.to_dense();
    let md = forms.mass.to_dense();
    let mass_factor = ChainFactor::new(mesh, &forms.mass)?;
    let mut prev = f64::INFINITY;
    for _ in 0..15 {
        let uc = u.map(|x| Complex64::new(x, 0.0));
        let nf = nonlinear_force(mesh, &uc, p).map(|z| z.re);
        let mu_vec = forms.mass.apply(&u);
        let f = &nf - forms.stiffness.apply(&u) - &mu_vec * lam;
        let gm = 0.5 * (u.dot(&mu_vec) - mu);
        let ga = mt.dot(&(&u - &pred.0)) + t.1 * (lam - pred.1) + t.2 * (mu - pred.2);
        let res = f.dot(&mass_factor.solve(&f)).max(0.0).sqrt();
        let scale = nf.dot(&mass_factor.solve(&nf)).max(0.0).sqrt().max(f64::MIN_POSITIVE);
        if !res.is_finite() || res > 1e3 * prev {
            return Err(Error::NewtonDivergence(format!("corrector residual {res:e}")));
        }
        if res <= 1e-12 * scale && gm.abs() <= 1e-13 * mu.abs() && ga.abs() <= 1e-12 {
            return Ok((u, lam, mu));
        }
        prev = res;
        let jn = nonlinear_jacobian_real(mesh, &u, p).to_dense();
        let mut jac = DMatrix::zeros(n + 2, n + 2);
        jac.view_mut((0, 0), (n, n)).copy_from(&(jn - &kd - &md * lam));
        for i in 0..n {
            jac[(i, n)] = -mu_vec[i];
            jac[(n, i)] = mu_vec[i];
            jac[(n + 1, i)] = mt[i];
        }
        jac[(n, n + 1)] = -0.5;
        jac[(n + 1, n)] = t.1;
        jac[(n + 1, n + 1)] = t.2;
        let mut rhs = DVector::zeros(n + 2);
        rhs.rows_mut(0, n).copy_from(&(-&f));
        rhs[n] = -gm;
        rhs[n + 1] = -ga;
        let dx = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NewtonDivergence("singular extended Jacobian".into()))?;
        u += dx.rows(0, n);
        lam += dx[n];
        mu += dx[n + 1];
    }
    Err(Error::NewtonDivergence("corrector did not converge in 15 iterations".into()))
}

/// Pseudo-arclength continuation of the real branch that bifurcates from
/// the constant family where the tangent Hessian becomes singular.
pub fn continue_branch(forms: &AssembledForms, p: f64, from_mass: f64, step: f64, n_steps: usize) -> Result<Branch> {
    NlsParams::new(p, from_mass)?;
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step {step} must be positive")));
    }
    let res = eigen_smallest(forms, 3.min(forms.dim()))?;
    let (l2, phi2) = lambda2_pair(forms)?;
    if res.values.len() >= 3 {
        let gap = (res.values[2] - res.values[1]) / l2;
        if gap < 1e-6 {
            return Err(Error::DegenerateCrossing(gap));
        }
    }
    let bracket = locate_bifurcation(forms, p, from_mass)?;
    let mu_star = 0.5 * (bracket.0 + bracket.1);
    let ell = forms.mesh.graph().total_length();
    let n = forms.dim();
    // exact point of the constant family at μ*
    let kappa = (mu_star / ell).sqrt();
    let base: Point = (DVector::from_element(n, kappa), kappa.powf(p - 2.0), mu_star);
    let mut tangent: Point = (phi2.clone(), 0.0, 0.0);
    let mut current = base;
    let mut points: Vec<BranchPoint> = Vec::new();
    let mut folds = Vec::new();
    let mut s_total = 0.0;
    let mut h = step;
    let mut last_dmu: Option<f64> = None;
    for _ in 0..n_steps {
        let mut attempt = 0;
        let next = loop {
            let pred: Point = (
                &current.0 + &tangent.0 * h,
                current.1 + tangent.1 * h,
                current.2 + tangent.2 * h,
            );
            match corrector(forms, p, &pred, &tangent) {
                Ok(x) if x.0.iter().all(|v| v.is_finite()) => break x,
                Ok(_) | Err(_) if attempt < 6 => {
                    attempt += 1;
                    h *= 0.5;
                    debug!("continuation step halved to {h:e}");
                }
                Ok(_) => return Err(Error::NewtonDivergence("non-finite continuation point".into())),
                Err(e) => return Err(e),
            }
        };
        let diff: Point = (&next.0 - &current.0, next.1 - current.1, next.2 - current.2);
        let len = w_norm(forms, &diff);
        s_total += len;
        let dmu = diff.2;
        if let Some(prev) = last_dmu {
            if prev * dmu < 0.0 {
                folds.push(points.len().saturating_sub(1));
                info!("fold of the branch near mass {}", current.2);
            }
        }
        last_dmu = Some(dmu);
        tangent = (diff.0 / len, diff.1 / len, diff.2 / len);
        current = next;
        let params = NlsParams::new(p, current.2)?;
        let gf = GraphFunction::real(&forms.mesh, current.0.clone())?;
        let state = StationaryState::evaluate(gf, forms, p)?;
        let kappa = params.kappa(ell);
        let energy = state.energy(forms, p);
        points.push(BranchPoint {
            arclength: s_total,
            mass: current.2,
            multiplier: current.1,
            distance_to_constant: current.0.iter().map(|v| (v - kappa).abs()).fold(0.0, f64::max),
            energy_constant: -params.mu.powf(p / 2.0) * ell.powf(1.0 - p / 2.0) / p,
            energy,
            state,
        });
        h = (h * 1.25).min(step);
    }
    Ok(Branch {
        bifurcation_mass: mu_star,
        bracket,
        points,
        folds,
    })
}

/// CSV with columns `arclength,mu,lambda,dist_const,energy`.
pub fn write_branch_csv<W: Write>(branch: &Branch, mut w: W) -> Result<()> {
    writeln!(w, "arclength,mu,lambda,dist_const,energy")?;
    for b in &branch.points {
        writeln!(
            w,
            "{},{},{},{},{}",
            sig(b.arclength),
            sig(b.mass),
            sig(b.multiplier),
            sig(b.distance_to_constant),
            sig(b.energy)
        )?;
    }
    Ok(())
}
