//! The NLS energy `E(u) = ½‖u'‖₂² − (1/p)‖u‖_p^p` on the discrete space, its
//! variations on the mass sphere and diagnostics around the constant state.
//!
//! The nonlinear term uses Simpson's rule per element, so the discrete
//! energy is a smooth function of the nodal values with exact derivatives:
//! `dE(u)[v] = Re (Ku − N(u))ᴴ v`, where `N` is [`nonlinear_force`].

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretize::{lp_integral, AssembledForms, GraphFunction, Mesh, MeshMatrix};
use crate::error::{Error, Result};
use crate::linalg::ChainFactor;
use crate::metric_graph::{EdgeId, MetricGraph};
use crate::spectral::{lambda2_forms, relative_mean};
use crate::stability::{margin, verdict_for, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NlsParams {
    pub p: f64,
    pub mu: f64,
}

impl NlsParams {
    pub fn new(p: f64, mu: f64) -> Result<Self> {
        if !(p > 2.0 && p <= 6.0) {
            return Err(Error::InvalidParameter(format!("p = {p} must lie in (2, 6]")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass {mu} must be positive")));
        }
        Ok(Self { p, mu })
    }

    pub fn with_mass(self, mu: f64) -> Result<Self> {
        Self::new(self.p, mu)
    }

    pub fn is_critical(&self) -> bool {
        self.p == 6.0
    }

    /// `κ_μ = √(μ/ℓ)`.
    pub fn kappa(&self, ell: f64) -> f64 {
        (self.mu / ell).sqrt()
    }

    /// Multiplier of the constant state, `κ^{p−2}`.
    pub fn constant_multiplier(&self, ell: f64) -> f64 {
        self.kappa(ell).powf(self.p - 2.0)
    }
}

/// A candidate solution of `u'' + |u|^{p−2}u = λu` with `‖u‖₂² = μ`.
#[derive(Clone, Debug)]
pub struct StationaryState {
    pub u: GraphFunction,
    pub mass: f64,
    pub multiplier: f64,
    /// Discrete `L²` norm of `u'' + |u|^{p−2}u − λu` (the weak residual in
    /// the `M⁻¹` norm).
    pub pde_residual: f64,
    /// Largest vertex sum of outgoing one-sided derivatives.
    pub flux_defect: f64,
}

impl StationaryState {
    /// Fills in the multiplier that minimizes the residual and both residual
    /// measures.
    pub fn evaluate(u: GraphFunction, forms: &AssembledForms, p: f64) -> Result<Self> {
        let mass = u.mass(forms);
        if mass <= 0.0 {
            return Err(Error::ZeroFunction);
        }
        let v = u.values();
        let force = nonlinear_force(&forms.mesh, v, p);
        let ku = forms.stiffness.apply_complex(v);
        let f = &force - &ku;
        let multiplier = inner_re(v, &f) / mass;
        let mu = forms.mass.apply_complex(v);
        let r = f - mu * Complex64::new(multiplier, 0.0);
        let pde_residual = mass_dual_norm(forms, &r)?;
        let flux_defect = flux_defect(&u);
        Ok(Self {
            u,
            mass,
            multiplier,
            pde_residual,
            flux_defect,
        })
    }

    pub fn energy(&self, forms: &AssembledForms, p: f64) -> f64 {
        energy(&self.u, forms, p)
    }
}

/// `Re xᴴy`.
pub(crate) fn inner_re(x: &DVector<Complex64>, y: &DVector<Complex64>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

/// `√(Re rᴴM⁻¹r)`.
pub(crate) fn mass_dual_norm(forms: &AssembledForms, r: &DVector<Complex64>) -> Result<f64> {
    let w = solve_mass(forms, r)?;
    Ok(inner_re(r, &w).max(0.0).sqrt())
}

/// `M⁻¹r` for complex `r`.
pub(crate) fn solve_mass(forms: &AssembledForms, r: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let f = ChainFactor::new(&forms.mesh, &forms.mass)?;
    Ok(solve_complex_with(&f, r))
}

pub(crate) fn solve_complex_with(f: &ChainFactor<f64>, r: &DVector<Complex64>) -> DVector<Complex64> {
    let re = f.solve(&r.map(|z| z.re));
    let im = f.solve(&r.map(|z| z.im));
    DVector::from_fn(r.len(), |i, _| Complex64::new(re[i], im[i]))
}

/// Nodal force `N(u)` with `d/dε (1/p)∫|u + εv|^p = Re N(u)ᴴv`: per element
/// `N_a = h/6 (|a|^{p−2}a + 2|m|^{p−2}m)` with `m` the midpoint value.
pub fn nonlinear_force(mesh: &Mesh, u: &DVector<Complex64>, p: f64) -> DVector<Complex64> {
    let mut out = DVector::zeros(u.len());
    for ([i, j], h) in mesh.elements() {
        let (a, b) = (u[i], u[j]);
        let m = (a + b) * 0.5;
        let fm = m * m.norm().powf(p - 2.0) * 2.0;
        out[i] += (a * a.norm().powf(p - 2.0) + fm) * (h / 6.0);
        out[j] += (b * b.norm().powf(p - 2.0) + fm) * (h / 6.0);
    }
    out
}

/// Jacobian of [`nonlinear_force`] restricted to real arguments.
pub fn nonlinear_jacobian_real(mesh: &Arc<Mesh>, u: &DVector<f64>, p: f64) -> MeshMatrix<f64> {
    let mut jac = MeshMatrix::zeros(mesh);
    for el in 0..mesh.element_count() {
        let [i, j] = mesh.element_nodes(el);
        let h = mesh.element_width(el);
        let c = h / 6.0 * (p - 1.0);
        let m = (0.5 * (u[i] + u[j])).abs().powf(p - 2.0);
        jac.add_element(el, c * (u[i].abs().powf(p - 2.0) + m), c * (u[j].abs().powf(p - 2.0) + m), c * m);
    }
    jac
}

pub fn energy(u: &GraphFunction, forms: &AssembledForms, p: f64) -> f64 {
    0.5 * u.dirichlet(forms) - lp_integral(u.mesh(), u.values(), p) / p
}

/// `g = Ku − N(u)`, the energy differential as a nodal covector.
pub fn energy_differential(u: &DVector<Complex64>, forms: &AssembledForms, p: f64) -> DVector<Complex64> {
    forms.stiffness.apply_complex(u) - nonlinear_force(&forms.mesh, u, p)
}

/// The constant state `κ_μ` with its multiplier `κ^{p−2}`.
pub fn constant_solution(forms: &AssembledForms, params: NlsParams) -> Result<StationaryState> {
    let ell = forms.mesh.graph().total_length();
    let kappa = params.kappa(ell);
    let u = GraphFunction::constant(&forms.mesh, Complex64::new(kappa, 0.0));
    StationaryState::evaluate(u, forms, params.p)
}

/// `M`-Riesz representative of `E'(u)` projected onto the tangent space
/// `{v : Re uᴴMv = 0}` of the mass sphere.
pub fn constrained_gradient(u: &GraphFunction, forms: &AssembledForms, p: f64) -> Result<GraphFunction> {
    let v = u.values();
    let mass = u.mass(forms);
    if mass <= 0.0 {
        return Err(Error::ZeroFunction);
    }
    let g = energy_differential(v, forms, p);
    let w = solve_mass(forms, &g)?;
    // Re uᴴMw = Re uᴴg
    let coef = inner_re(v, &g) / mass;
    Ok(u.with_values(w - v * Complex64::new(coef, 0.0)))
}

/// `Re ⟨x, y⟩_M`.
pub fn mass_pairing(forms: &AssembledForms, x: &GraphFunction, y: &GraphFunction) -> f64 {
    forms.mass.bilinear_complex(x.values(), y.values())
}

/// `∫|φ'|² − (p−2)κ^{p−2}∫(Re φ)²` for `φ` tangent at the constant state.
pub fn second_variation_at_constant(forms: &AssembledForms, params: NlsParams, phi: &GraphFunction) -> Result<f64> {
    let re = phi.re();
    let rel = relative_mean(forms, &re);
    let scale = phi.mass(forms).sqrt();
    if scale > 0.0 && rel * forms.mass.form(&re).sqrt() > 1e-8 * scale {
        return Err(Error::NotTangent(rel));
    }
    let ell = forms.mesh.graph().total_length();
    let lam = params.constant_multiplier(ell);
    Ok(phi.dirichlet(forms) - (params.p - 2.0) * lam * forms.mass.form(&re))
}

/// `μ₁ = ℓ(λ₂/(p−2))^{2/(p−2)}`.
pub fn mu1_from_lambda2(ell: f64, lambda2: f64, p: f64) -> f64 {
    ell * (lambda2 / (p - 2.0)).powf(2.0 / (p - 2.0))
}

pub fn mu1_threshold(g: &MetricGraph, p: f64, target_h: f64) -> Result<f64> {
    NlsParams::new(p, 1.0)?;
    let mesh = Mesh::build(g, target_h)?;
    let forms = AssembledForms::assemble(&mesh);
    Ok(mu1_from_lambda2(g.total_length(), lambda2_forms(&forms)?, p))
}

/// `‖u‖_p^p / (μ^{(p+2)/4} (‖u'‖₂ + ‖u‖₂)^{(p−2)/2})` with `μ = ‖u‖₂²`.
pub fn gn_ratio(u: &GraphFunction, forms: &AssembledForms, p: f64) -> Result<f64> {
    let mu = u.mass(forms);
    if mu <= 0.0 {
        return Err(Error::ZeroFunction);
    }
    let h1 = u.dirichlet(forms).max(0.0).sqrt() + mu.sqrt();
    Ok(lp_integral(u.mesh(), u.values(), p) / (mu.powf((p + 2.0) / 4.0) * h1.powf((p - 2.0) / 2.0)))
}

/// Running maximum of [`gn_ratio`] over `samples` random functions; every
/// entry is a lower bound for the optimal constant.
pub fn gn_constant_lower_bounds(forms: &AssembledForms, p: f64, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let u = random_field(&forms.mesh, &mut rng);
        best = best.max(gn_ratio(&u, forms, p)?);
        out.push(best);
    }
    Ok(out)
}

/// A random complex bump `A·exp(iθ)·max(0, 1 − d(x)/w)^q` around a random
/// node, plus a random smooth background of edge-wise cosines.
pub fn random_field(mesh: &Arc<Mesh>, rng: &mut ChaCha8Rng) -> GraphFunction {
    let n = mesh.node_count();
    let center = rng.random_range(0..n);
    let dist = mesh.distances_from(center);
    let ell = mesh.graph().total_length();
    let hmin = mesh.h_min();
    let width = (2.0 * hmin) * (ell / (2.0 * hmin)).max(1.0).powf(rng.random::<f64>());
    let q = rng.random_range(1.0..3.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let background = rng.random_range(0.0..0.5);
    let freq: Vec<f64> = (0..mesh.graph().edge_count()).map(|_| rng.random_range(0.0..3.0)).collect();
    let edge_len: Vec<f64> = mesh.graph().edges().iter().map(|e| e.length).collect();
    let values = DVector::from_fn(n, |i, _| {
        let bump = (1.0 - dist[i] / width).max(0.0).powf(q);
        let c = mesh.coord(i);
        let EdgeId(e) = c.edge;
        // cos(kπs/L) agrees at shared vertices only up to sign; use |cos|
        let smooth = if i < mesh.vertex_node_count() {
            background
        } else {
            background * (freq[e] * std::f64::consts::PI * c.arclength / edge_len[e]).cos().abs()
        };
        Complex64::from_polar(bump + smooth, phase)
    });
    let u = GraphFunction::new(mesh, values).expect("mesh dimension");
    if u.sup_norm() == 0.0 {
        GraphFunction::constant(mesh, Complex64::new(1.0, 0.0))
    } else {
        u
    }
}

/// Largest `|Σ_{e≻v} u_e'(v)|` over vertices, derivatives taken along each
/// incident edge end as one-sided first differences.
pub fn flux_defect(u: &GraphFunction) -> f64 {
    let mesh = u.mesh();
    let g = mesh.graph();
    let v = u.values();
    let mut sums = vec![Complex64::new(0.0, 0.0); g.vertex_count()];
    for (i, e) in g.edges().iter().enumerate() {
        let n = mesh.subdivisions()[i];
        let h = e.length / n as f64;
        let id = EdgeId(i);
        let a = mesh.edge_node(id, 0);
        let a1 = mesh.edge_node(id, 1);
        let b = mesh.edge_node(id, n);
        let b1 = mesh.edge_node(id, n - 1);
        sums[e.a.0] += (v[a1] - v[a]) / h;
        sums[e.b.0] += (v[b1] - v[b]) / h;
    }
    sums.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Summary of the constant state on a graph.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantReport {
    pub graph: String,
    pub p: f64,
    pub mu: f64,
    pub ell: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub kappa: f64,
    pub multiplier: f64,
    pub energy_constant: f64,
    pub critical_mass: Option<f64>,
    pub margin: f64,
    pub local_minimality: Verdict,
}

impl ConstantReport {
    pub fn compute(forms: &AssembledForms, params: NlsParams) -> Result<Self> {
        let g = forms.mesh.graph();
        let ell = g.total_length();
        let lambda2 = lambda2_forms(forms)?;
        let mu1 = mu1_from_lambda2(ell, lambda2, params.p);
        let kappa = params.kappa(ell);
        let state = constant_solution(forms, params)?;
        let m = margin(&forms.mesh, lambda2, params.p);
        Ok(Self {
            graph: g.name().to_string(),
            p: params.p,
            mu: params.mu,
            ell,
            lambda2,
            mu1,
            kappa,
            multiplier: params.constant_multiplier(ell),
            energy_constant: state.energy(forms, params.p),
            critical_mass: params.is_critical().then(|| g.critical_mass()),
            margin: m,
            local_minimality: verdict_for(params.mu, mu1, m),
        })
    }
}
