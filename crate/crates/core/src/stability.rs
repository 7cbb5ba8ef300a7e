//! Linear stability of the constant state `κ_μ`.
//!
//! Writing `φ = φ_r + iφ_i`, the Hessian of the energy at `κ_μ` splits into
//! `L₁ = −Δ − (p−2)λ` on `φ_r` and `L₀ = −Δ` on `φ_i`, with `λ = κ^{p−2}`. The
//! orbital-stability conclusion is drawn from the decision table in
//! [`Verdict`], not recomputed.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::{AssembledForms, Mesh, MeshMatrix};
use crate::error::{Error, Result};
use crate::format::sig;
use crate::linalg::{dense_generalized_eigen, ChainFactor};
use crate::metric_graph::{MetricGraph, VertexId};
use crate::nls_energy::{mu1_from_lambda2, NlsParams};
use crate::spectral::{lambda2_pair, Pencil, DENSE_LIMIT};

/// Outcome of comparing `μ` with `μ₁`.
///
/// | mass band                      | Hessian on tangent space (mod phase) | conclusion            |
/// |--------------------------------|--------------------------------------|-----------------------|
/// | `μ < μ₁(1 − margin)`           | positive definite                    | `Stable`              |
/// | `μ > μ₁(1 + margin)`           | negative along `φ₂`                  | `Unstable`            |
/// | within the band                | sign not resolved by the mesh        | `Indeterminate`       |
///
/// `Stable` rests on: `H_λ = L₁ ⊕ L₀` has exactly one negative eigenvalue
/// (the constant mode of `L₁`), `L₀ ≥ 0` with kernel the constants, and the
/// tangent-space Hessian is positive; these give orbital stability through
/// the Grillakis–Shatah–Strauss criterion. `Unstable` rests on a negative
/// tangent direction at a nondegenerate constrained critical point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

/// Relative width of the indeterminate band: `max(1e-3, C·h²)` where
/// `C·h² = 2 · (2/(p−2)) · λ₂h²/12` bounds the relative error that the
/// `O(h²)` eigenvalue error induces in `μ₁`.
pub fn margin(mesh: &Mesh, lambda2: f64, p: f64) -> f64 {
    let h = mesh.h_max();
    (2.0 * (2.0 / (p - 2.0)) * lambda2 * h * h / 12.0).max(1e-3)
}

pub fn verdict_for(mu: f64, mu1: f64, margin: f64) -> Verdict {
    if mu < mu1 * (1.0 - margin) {
        Verdict::Stable
    } else if mu > mu1 * (1.0 + margin) {
        Verdict::Unstable
    } else {
        Verdict::Indeterminate
    }
}

/// The discrete pencils `L₀ ~ (K, M)` and `L₁ ~ (K − (p−2)λM, M)`.
pub fn assemble_linearized(forms: &AssembledForms, params: NlsParams) -> (Pencil<'_>, Pencil<'_>) {
    let ell = forms.mesh.graph().total_length();
    let lam = params.constant_multiplier(ell);
    (
        Pencil::laplacian(forms),
        Pencil::shifted_laplacian(forms, -(params.p - 2.0) * lam),
    )
}

/// Number of negative eigenvalues of the pencil `(a, M)`, i.e. of `a`.
pub fn negative_count(forms: &AssembledForms, a: &MeshMatrix<f64>) -> Result<usize> {
    match ChainFactor::new(&forms.mesh, a) {
        Ok(f) => Ok(f.inertia(0.0).0),
        Err(Error::SingularPivot { .. }) => {
            let (vals, _) = dense_generalized_eigen(&a.to_dense(), &forms.mass.to_dense())?;
            let scale = vals.amax().max(1.0);
            Ok(vals.iter().filter(|&&v| v < -1e-12 * scale).count())
        }
        Err(e) => Err(e),
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TangentHessian {
    /// Smallest eigenvalue of the real block on `{φ_r : ∫φ_r = 0}`.
    pub real_block: f64,
    /// Smallest eigenvalue of the imaginary block on `{φ_i : ∫φ_i = 0}`.
    pub imaginary_block: f64,
}

impl TangentHessian {
    pub fn min(&self) -> f64 {
        self.real_block.min(self.imaginary_block)
    }
}

/// Smallest eigenvalue (in the `M` metric) of the second variation at `κ_μ`
/// on the tangent space of the mass sphere with the phase direction `i·1`
/// factored out.
pub fn tangent_hessian(forms: &AssembledForms, params: NlsParams) -> Result<TangentHessian> {
    let (l0, l1) = assemble_linearized(forms, params);
    let n = forms.dim();
    if n <= DENSE_LIMIT {
        // explicit basis Q of {v : wᵀv = 0}, w = M1
        let w = forms.mass_weights();
        let q = DMatrix::from_fn(n, n - 1, |i, j| if i == 0 { -w[j + 1] / w[0] } else { f64::from(i == j + 1) });
        let qt = q.transpose();
        let mr = &qt * forms.mass.to_dense() * &q;
        let reduced_min = |a: &MeshMatrix<f64>| -> Result<f64> {
            let ar = &qt * a.to_dense() * &q;
            Ok(dense_generalized_eigen(&ar, &mr)?.0[0])
        };
        Ok(TangentHessian {
            real_block: reduced_min(&l1.a)?,
            imaginary_block: reduced_min(&l0.a)?,
        })
    } else {
        // the constant is an exact eigenvector of both pencils and is deflated
        let (lam2, _) = lambda2_pair(forms)?;
        let res = l1.smallest(2)?;
        Ok(TangentHessian {
            real_block: res.values[1],
            imaginary_block: lam2,
        })
    }
}

#[allow(non_snake_case)]
#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub graph: String,
    pub p: f64,
    pub mass: f64,
    pub ell: f64,
    pub h_max: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub margin: f64,
    pub kappa: f64,
    pub multiplier: f64,
    pub n_negative_L0: usize,
    pub n_negative_L1: usize,
    pub n_negative_H: usize,
    pub min_tangent_hessian_eig: f64,
    /// `sign(min_tangent_hessian_eig) = sign(μ₁ − μ)`; `None` inside the band.
    pub tests_agree: Option<bool>,
    pub critical_mass: Option<f64>,
    /// At `p = 6`: the constant is stable although no ground state of this
    /// mass exists.
    pub stable_beyond_ground_states: Option<bool>,
    pub verdict: Verdict,
}

pub fn classify_stability(g: &MetricGraph, params: NlsParams, target_h: f64) -> Result<StabilityReport> {
    let mesh = Mesh::build(g, target_h)?;
    classify_with_forms(&AssembledForms::assemble(&mesh), params)
}

pub fn classify_with_forms(forms: &AssembledForms, params: NlsParams) -> Result<StabilityReport> {
    let g = forms.mesh.graph();
    let ell = g.total_length();
    let (lambda2, _) = lambda2_pair(forms)?;
    let mu1 = mu1_from_lambda2(ell, lambda2, params.p);
    let m = margin(&forms.mesh, lambda2, params.p);
    let verdict = verdict_for(params.mu, mu1, m);
    let (_, l1) = assemble_linearized(forms, params);
    let n_neg_l1 = negative_count(forms, &l1.a)?;
    // L₀ = K is singular; a tiny shift keeps the factorization regular
    let l0 = forms.stiffness.combine(1.0, &forms.mass, 1e-8 * PI * PI / (ell * ell));
    let n_neg_l0 = negative_count(forms, &l0)?;
    let hess = tangent_hessian(forms, params)?.min();
    let tests_agree = match verdict {
        Verdict::Stable => Some(hess > 0.0),
        Verdict::Unstable => Some(hess < 0.0),
        Verdict::Indeterminate => None,
    };
    let critical_mass = params.is_critical().then(|| g.critical_mass());
    let stable_beyond_ground_states = critical_mass.map(|c| verdict == Verdict::Stable && params.mu > c);
    Ok(StabilityReport {
        graph: g.name().to_string(),
        p: params.p,
        mass: params.mu,
        ell,
        h_max: forms.mesh.h_max(),
        lambda2,
        mu1,
        margin: m,
        kappa: params.kappa(ell),
        multiplier: params.constant_multiplier(ell),
        n_negative_L0: n_neg_l0,
        n_negative_L1: n_neg_l1,
        n_negative_H: n_neg_l0 + n_neg_l1,
        min_tangent_hessian_eig: hess,
        tests_agree,
        critical_mass,
        stable_beyond_ground_states,
        verdict,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub ell: f64,
    pub lambda2: f64,
    pub mu1: f64,
    /// `μ₁(G_ℓ, 6) ≥ π/2 − 1e-6`.
    pub bound_half_pi_ok: bool,
    /// `μ₁(G_ℓ, 6) ≥ π − 1e-6`.
    pub bound_pi_ok: bool,
}

/// `μ₁(G_ℓ, 6)` along the bridged family `G_ℓ` built from `g1` and `g2`.
/// Grid points run in parallel; rows keep the grid order.
pub fn mu1_asymptotics_study(
    g1: &MetricGraph,
    g2: &MetricGraph,
    attach_1: VertexId,
    attach_2: VertexId,
    ell_grid: &[f64],
) -> Result<Vec<StudyRow>> {
    ell_grid
        .par_iter()
        .map(|&ell| {
            let g = MetricGraph::bridged(g1, g2, attach_1, attach_2, ell)?;
            let mesh = Mesh::build(&g, Mesh::default_target_h(&g))?;
            let forms = AssembledForms::assemble(&mesh);
            let (lambda2, _) = lambda2_pair(&forms)?;
            let mu1 = mu1_from_lambda2(g.total_length(), lambda2, 6.0);
            Ok(StudyRow {
                ell,
                lambda2,
                mu1,
                bound_half_pi_ok: mu1 >= PI / 2.0 - 1e-6,
                bound_pi_ok: mu1 >= PI - 1e-6,
            })
        })
        .collect()
}

/// Reports whether `μ₁` moves monotonically along the grid.
pub fn study_is_monotone(rows: &[StudyRow]) -> bool {
    let inc = rows.windows(2).all(|w| w[1].mu1 >= w[0].mu1);
    let dec = rows.windows(2).all(|w| w[1].mu1 <= w[0].mu1);
    inc || dec
}

/// CSV with columns `ell,lambda2,mu1,bound_half_pi_ok,bound_pi_ok`.
pub fn write_study_csv<W: Write>(rows: &[StudyRow], mut w: W) -> Result<()> {
    writeln!(w, "ell,lambda2,mu1,bound_half_pi_ok,bound_pi_ok")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", sig(r.ell), sig(r.lambda2), sig(r.mu1), r.bound_half_pi_ok, r.bound_pi_ok)?;
    }
    Ok(())
}
