//! Kirchhoff Laplacian spectrum `Kφ = λMφ` and rearrangement onto an interval.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::discretize::{AssembledForms, GraphFunction, Mesh, MeshMatrix};
use crate::error::{Error, Result};
use crate::format::sig;
use crate::linalg::{dense_generalized_eigen, subspace_smallest, SubspaceOptions};
use crate::metric_graph::MetricGraph;

/// Pencils up to this dimension are solved densely.
pub const DENSE_LIMIT: usize = 800;

/// Relative `M`-mean below which an eigenvector counts as mean-free.
pub const ZERO_MEAN_TOL: f64 = 1e-6;

const SPECTRAL_BOUND_RTOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub mesh: Arc<Mesh>,
    /// Ascending.
    pub values: Vec<f64>,
    /// `M`-orthonormal, sign fixed so the first significant entry is positive.
    pub vectors: Vec<DVector<f64>>,
    /// `‖Aφ − λMφ‖₂` per pair.
    pub residuals: Vec<f64>,
}

impl SpectralResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn eigenfunction(&self, i: usize) -> GraphFunction {
        GraphFunction::real(&self.mesh, self.vectors[i].clone()).expect("eigenvector has mesh dimension")
    }

    /// CSV with columns `index,eigenvalue,residual` (1-based index).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,eigenvalue,residual")?;
        for (i, (v, r)) in self.values.iter().zip(&self.residuals).enumerate() {
            writeln!(w, "{},{},{}", i + 1, sig(*v), sig(*r))?;
        }
        Ok(())
    }
}

/// A symmetric pencil `(A, M)` together with what is known about it a priori.
#[derive(Clone, Debug)]
pub struct Pencil<'a> {
    pub forms: &'a AssembledForms,
    pub a: MeshMatrix<f64>,
    /// Every eigenvalue is at least this.
    pub lower_bound: f64,
    /// Set when the constant vector is an exact eigenvector (`A = K + αM`).
    pub constant_eigenvalue: Option<f64>,
}

impl<'a> Pencil<'a> {
    pub fn laplacian(forms: &'a AssembledForms) -> Self {
        Self::shifted_laplacian(forms, 0.0)
    }

    /// `(K + αM, M)`.
    pub fn shifted_laplacian(forms: &'a AssembledForms, alpha: f64) -> Self {
        Self {
            forms,
            a: forms.stiffness.combine(1.0, &forms.mass, alpha),
            lower_bound: alpha,
            constant_eigenvalue: Some(alpha),
        }
    }

    /// The `k` smallest eigenpairs.
    pub fn smallest(&self, k: usize) -> Result<SpectralResult> {
        let n = self.forms.dim();
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!("cannot extract {k} eigenpairs of dimension {n}")));
        }
        let (values, vectors) = if n <= DENSE_LIMIT {
            let (vals, vecs) = dense_generalized_eigen(&self.a.to_dense(), &self.forms.mass.to_dense())?;
            (
                vals.iter().take(k).copied().collect(),
                (0..k).map(|i| vecs.column(i).into_owned()).collect(),
            )
        } else {
            let ell = self.forms.mesh.graph().total_length();
            let deflate = self
                .constant_eigenvalue
                .map(|v| (DVector::from_element(n, 1.0 / ell.sqrt()), v));
            let opts = SubspaceOptions {
                shift: -self.lower_bound + 0.1 * PI * PI / (ell * ell),
                tol: 1e-11,
                max_iter: 2000,
                deflate,
                seed: 0x5eed,
            };
            let res = subspace_smallest(&self.forms.mesh, &self.a, &self.forms.mass, k, &opts)?;
            (res.values, res.vectors)
        };
        let vectors: Vec<DVector<f64>> = vectors.into_iter().map(fix_sign).collect();
        let residuals = values
            .iter()
            .zip(&vectors)
            .map(|(&lam, v)| (self.a.apply(v) - self.forms.mass.apply(v) * lam).norm())
            .collect();
        Ok(SpectralResult {
            mesh: Arc::clone(&self.forms.mesh),
            values,
            vectors,
            residuals,
        })
    }
}

fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    let scale = v.amax();
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * scale) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// The `k` smallest eigenpairs of the Kirchhoff Laplacian.
pub fn eigen_smallest(forms: &AssembledForms, k: usize) -> Result<SpectralResult> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k = {k}: at least two eigenpairs are required")));
    }
    Pencil::laplacian(forms).smallest(k)
}

/// `|1ᵀMv| / (√ℓ‖v‖_M)`.
pub fn relative_mean(forms: &AssembledForms, v: &DVector<f64>) -> f64 {
    let norm = forms.mass.form(v).max(0.0).sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let ell = forms.mesh.graph().total_length();
    forms.mass_weights().dot(v).abs() / (ell.sqrt() * norm)
}

/// `λ₂` and a mean-free eigenvector, checked against the a-priori bounds
/// `π²/ℓ²` and, for bridgeless graphs, `4π²/ℓ²`.
pub fn lambda2_pair(forms: &AssembledForms) -> Result<(f64, DVector<f64>)> {
    let n = forms.dim();
    let mut k = 3.min(n);
    let (value, vector) = loop {
        let res = Pencil::laplacian(forms).smallest(k)?;
        let hit = res
            .values
            .iter()
            .zip(&res.vectors)
            .find(|(_, v)| relative_mean(forms, v) <= ZERO_MEAN_TOL);
        if let Some((&val, vec)) = hit {
            break (val, vec.clone());
        }
        if k == n {
            return Err(Error::EigenNonConvergence {
                iterations: 0,
                max_residual: f64::NAN,
            });
        }
        k = (2 * k).min(n);
    };
    let g = forms.mesh.graph();
    let ell = g.total_length();
    let mut bound = PI * PI / (ell * ell);
    if g.has_cycle_covering() {
        bound *= 4.0;
    }
    if value < bound * (1.0 - SPECTRAL_BOUND_RTOL) {
        return Err(Error::SpectralBoundViolated { value, bound });
    }
    Ok((value, vector))
}

pub fn lambda2_forms(forms: &AssembledForms) -> Result<f64> {
    lambda2_pair(forms).map(|(v, _)| v)
}

pub fn lambda2(g: &MetricGraph, target_h: f64) -> Result<f64> {
    let mesh = Mesh::build(g, target_h)?;
    lambda2_forms(&AssembledForms::assemble(&mesh))
}

pub fn rayleigh_quotient(forms: &AssembledForms, u: &DVector<f64>) -> Result<f64> {
    let den = forms.mass.form(u);
    if den <= 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(forms.dirichlet_real(u) / den)
}

/// A continuous piecewise-linear function on `[0, length]`.
#[derive(Clone, Debug, Serialize)]
pub struct IntervalFunction {
    pub length: f64,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl IntervalFunction {
    fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, v)| (x[1] - x[0], v[0], v[1]))
            .filter(|(dx, _, _)| *dx > 0.0)
    }

    /// `∫|ψ'|²`, exact.
    pub fn dirichlet(&self) -> f64 {
        self.segments().map(|(dx, a, b)| (b - a) * (b - a) / dx).sum()
    }

    /// `∫ψ²`, exact.
    pub fn l2_squared(&self) -> f64 {
        self.segments().map(|(dx, a, b)| dx * (a * a + a * b + b * b) / 3.0).sum()
    }

    /// `∫|ψ|^q` by Simpson's rule on each segment.
    pub fn lq_integral(&self, q: f64) -> f64 {
        self.segments()
            .map(|(dx, a, b)| dx / 6.0 * (a.abs().powf(q) + 4.0 * (0.5 * (a + b)).abs().powf(q) + b.abs().powf(q)))
            .sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.knots.partition_point(|&k| k <= x);
        if i == 0 {
            return self.values[0];
        }
        if i == self.knots.len() {
            return *self.values.last().expect("nonempty");
        }
        let (x0, x1) = (self.knots[i - 1], self.knots[i]);
        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 1.0 };
        self.values[i - 1] + t * (self.values[i] - self.values[i - 1])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Rearrangement {
    pub psi: IntervalFunction,
    /// `|{u > 0}|` and `|{u < 0}|`.
    pub positive_measure: f64,
    pub negative_measure: f64,
    pub energy_original: f64,
    pub energy_rearranged: f64,
    /// `∫|ψ'|² ≤ ∫|u'|²` (relative slack `1e-6`); only evaluated when the
    /// caller asserts that almost every level has at least two preimages.
    pub polya_szego_holds: Option<bool>,
}

/// Symmetric decreasing rearrangements of `u⁺` and `u⁻` placed side by side
/// on `[0, ℓ]`: `ψ = û⁺` on `[0, ℓ⁺]`, `ψ = −û⁻` on `[ℓ⁺, ℓ⁺ + ℓ⁻]`, zero after.
///
/// For a piecewise-linear `u` the distribution function is piecewise linear
/// between sorted nodal levels, so the rearrangement is computed exactly.
pub fn rearrange_to_interval(u: &GraphFunction, forms: &AssembledForms, assume_two_preimages: bool) -> Result<Rearrangement> {
    let max_imag = u.max_abs_imag();
    let scale = u.sup_norm();
    if max_imag > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotReal(max_imag));
    }
    let re = u.re();
    let mean = relative_mean(forms, &re);
    if mean > 1e-8 {
        return Err(Error::NotZeroMean(mean));
    }
    let mesh = u.mesh();
    let ell = mesh.graph().total_length();
    let elements: Vec<(f64, f64, f64)> = mesh
        .elements()
        .map(|([i, j], h)| (re[i].min(re[j]), re[i].max(re[j]), h))
        .collect();

    let (pos_x, pos_v) = decreasing_profile(&elements, re.iter().copied());
    let neg_elements: Vec<(f64, f64, f64)> = elements.iter().map(|&(lo, hi, h)| (-hi, -lo, h)).collect();
    let (neg_x, neg_v) = decreasing_profile(&neg_elements, re.iter().map(|x| -x));
    let lp = pos_x.last().copied().unwrap_or(0.0);
    let ln = neg_x.last().copied().unwrap_or(0.0);

    let mut knots = Vec::new();
    let mut values = Vec::new();
    push_symmetric(&mut knots, &mut values, 0.0, &pos_x, &pos_v, 1.0);
    push_symmetric(&mut knots, &mut values, lp, &neg_x, &neg_v, -1.0);
    if knots.is_empty() || knots[0] > 0.0 {
        knots.insert(0, 0.0);
        values.insert(0, 0.0);
    }
    if *knots.last().expect("nonempty") < ell {
        knots.push(ell);
        values.push(0.0);
    }
    let psi = IntervalFunction {
        length: ell,
        knots,
        values,
    };
    let energy_original = forms.dirichlet_real(&re);
    let energy_rearranged = psi.dirichlet();
    let polya_szego_holds =
        assume_two_preimages.then_some(energy_rearranged <= energy_original * (1.0 + 1e-6) + 1e-300);
    Ok(Rearrangement {
        psi,
        positive_measure: lp,
        negative_measure: ln,
        energy_original,
        energy_rearranged,
        polya_szego_holds,
    })
}

/// Decreasing rearrangement of `max(u, 0)` on `[0, |{u > 0}|]` as knot lists.
/// Elements are `(min, max, width)` of the linear interpolant.
fn decreasing_profile(elements: &[(f64, f64, f64)], nodal: impl Iterator<Item = f64>) -> (Vec<f64>, Vec<f64>) {
    let mut levels: Vec<f64> = nodal.filter(|&x| x > 0.0).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    if levels.is_empty() {
        return (Vec::new(), Vec::new());
    }
    // |{u > t}| and |{u ≥ t}|
    let measure = |t: f64| {
        let mut gt = 0.0;
        let mut flat_eq = 0.0;
        for &(lo, hi, h) in elements {
            if lo > t {
                gt += h;
            } else if hi > t {
                gt += h * (hi - t) / (hi - lo);
            } else if lo == t && hi == t {
                flat_eq += h;
            }
        }
        (gt, gt + flat_eq)
    };
    let mut xs = Vec::with_capacity(2 * levels.len() + 1);
    let mut vs = Vec::with_capacity(2 * levels.len() + 1);
    for &t in &levels {
        let (gt, ge) = measure(t);
        xs.push(gt);
        vs.push(t);
        if ge > gt {
            xs.push(ge);
            vs.push(t);
        }
    }
    xs.push(measure(0.0).0);
    vs.push(0.0);
    (xs, vs)
}

/// Appends `sign·û(x − offset − L/2)` with `û(y) = u*(2|y|)` for the profile
/// `(xs, vs)` of `u*` on `[0, L]`.
fn push_symmetric(knots: &mut Vec<f64>, values: &mut Vec<f64>, offset: f64, xs: &[f64], vs: &[f64], sign: f64) {
    let Some(&len) = xs.last() else {
        return;
    };
    let mid = offset + 0.5 * len;
    for (&x, &v) in xs.iter().zip(vs).rev() {
        knots.push(mid - 0.5 * x);
        values.push(sign * v);
    }
    for (&x, &v) in xs.iter().zip(vs) {
        if x == 0.0 {
            continue;
        }
        knots.push(mid + 0.5 * x);
        values.push(sign * v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_graph::EdgeId;
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn forms(g: &MetricGraph, h: f64) -> AssembledForms {
        AssembledForms::assemble(&Mesh::build(g, h).unwrap())
    }

    #[test]
    fn closed_form_spectra() {
        let l2 = lambda2(&MetricGraph::interval(1.0).unwrap(), 0.01).unwrap();
        assert!((l2 / (PI * PI) - 1.0).abs() < 1e-3);
        let l2 = lambda2(&MetricGraph::circle(1.0).unwrap(), 0.01).unwrap();
        assert!((l2 / (4.0 * PI * PI) - 1.0).abs() < 1e-3);
        // equilateral star: the first nonzero root of the secular equation is cos(k) = 0
        let l2 = lambda2(&MetricGraph::star(&[1.0, 1.0, 1.0]).unwrap(), 0.01).unwrap();
        assert!((l2 / (PI * PI / 4.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn first_pair_is_the_constant() {
        let f = forms(&MetricGraph::dumbbell(1.0, 2.0, 1.5).unwrap(), 0.05);
        let res = eigen_smallest(&f, 4).unwrap();
        assert!(res.values[0].abs() < 1e-9);
        let c = &res.vectors[0];
        assert!(c.max() - c.min() < 1e-8 * c.amax());
        for i in 0..4 {
            for j in 0..4 {
                let ip = f.mass.bilinear(&res.vectors[i], &res.vectors[j]);
                assert!((ip - f64::from(i == j)).abs() < 1e-8);
            }
            assert!(res.residuals[i] < 1e-8);
        }
    }

    #[test]
    fn dense_and_iterative_paths_agree() {
        let g = MetricGraph::theta(&[1.0, 1.5, 0.5]).unwrap();
        let mesh = Mesh::build(&g, 0.003).unwrap();
        assert!(mesh.node_count() > DENSE_LIMIT);
        let f = AssembledForms::assemble(&mesh);
        let iterative = eigen_smallest(&f, 4).unwrap();
        // same pencil restricted by hand to the dense solver
        let (dense, _) = dense_generalized_eigen(&f.stiffness.to_dense(), &f.mass.to_dense()).unwrap();
        for i in 0..4 {
            assert!((iterative.values[i] - dense[i]).abs() < 1e-7 * dense[3], "{i}");
        }
    }

    #[test]
    fn rayleigh_minimum_over_mean_free_vectors() {
        // independent route: explicit basis of {v : 1ᵀMv = 0}
        for g in [
            MetricGraph::tadpole(1.0, 0.7).unwrap(),
            MetricGraph::figure_eight(1.0, 0.3).unwrap(),
            MetricGraph::star(&[0.2, 0.5, 1.0, 0.4]).unwrap(),
        ] {
            let f = forms(&g, 0.05);
            let w = f.mass_weights();
            let n = f.dim();
            let q = DMatrix::from_fn(n, n - 1, |i, j| {
                if i == 0 {
                    -w[j + 1] / w[0]
                } else {
                    f64::from(i == j + 1)
                }
            });
            let kr = q.transpose() * f.stiffness.to_dense() * &q;
            let mr = q.transpose() * f.mass.to_dense() * &q;
            let (vals, _) = dense_generalized_eigen(&kr, &mr).unwrap();
            let (l2, v) = lambda2_pair(&f).unwrap();
            assert!((vals[0] - l2).abs() < 1e-10 * l2, "{}", g.name());
            assert!((rayleigh_quotient(&f, &v).unwrap() - l2).abs() < 1e-10 * l2);
        }
    }

    #[test]
    fn second_order_convergence() {
        let g = MetricGraph::interval(PI).unwrap();
        let errs: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&h| lambda2(&g, h).unwrap() - 1.0)
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
        }
    }

    #[test]
    fn refinement_never_raises_lambda2() {
        let g = MetricGraph::dumbbell(1.0, 0.5, 2.0).unwrap();
        let coarse = Mesh::build(&g, 0.1).unwrap();
        let fine = coarse.refined().unwrap();
        let a = lambda2_forms(&AssembledForms::assemble(&coarse)).unwrap();
        let b = lambda2_forms(&AssembledForms::assemble(&fine)).unwrap();
        assert!(b <= a * (1.0 + 1e-12));
    }

    #[test]
    fn eigen_csv() {
        let f = forms(&MetricGraph::interval(1.0).unwrap(), 0.25);
        let res = eigen_smallest(&f, 3).unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("index,eigenvalue,residual\n1,"));
    }

    #[test]
    fn rearrange_zero() {
        let f = forms(&MetricGraph::circle(1.0).unwrap(), 0.1);
        let r = rearrange_to_interval(&GraphFunction::zeros(&f.mesh), &f, true).unwrap();
        assert_eq!(r.psi.l2_squared(), 0.0);
        assert_eq!(r.energy_rearranged, 0.0);
        assert_eq!(r.polya_szego_holds, Some(true));
    }

    #[test]
    fn rearrange_sine_on_loop() {
        let f = forms(&MetricGraph::circle(1.0).unwrap(), 0.002);
        let u = GraphFunction::interpolate(&f.mesh, |_, s| Complex64::new((2.0 * PI * s).sin(), 0.0));
        let r = rearrange_to_interval(&u, &f, true).unwrap();
        assert!((r.psi.l2_squared() - u.mass(&f)).abs() < 1e-12);
        assert_eq!(r.polya_szego_holds, Some(true));
        assert!((r.energy_rearranged / r.energy_original - 1.0).abs() < 1e-3);
        assert!((r.positive_measure - 0.5).abs() < 1e-12);
        assert!((r.psi.lq_integral(4.0) - crate::discretize::lp_integral(&f.mesh, u.values(), 4.0)).abs() < 1e-6);
    }

    #[test]
    fn rearrange_rejects_bad_input() {
        let f = forms(&MetricGraph::circle(1.0).unwrap(), 0.1);
        let complex = GraphFunction::interpolate(&f.mesh, |_, s| Complex64::new(0.0, (2.0 * PI * s).sin()));
        assert!(matches!(rearrange_to_interval(&complex, &f, false), Err(Error::NotReal(_))));
        let shifted = GraphFunction::interpolate(&f.mesh, |_, s| Complex64::new(1.0 + (2.0 * PI * s).sin(), 0.0));
        assert!(matches!(rearrange_to_interval(&shifted, &f, false), Err(Error::NotZeroMean(_))));
        let sine = GraphFunction::interpolate(&f.mesh, |_, s| Complex64::new((2.0 * PI * s).sin(), 0.0));
        assert_eq!(rearrange_to_interval(&sine, &f, false).unwrap().polya_szego_holds, None);
    }

    #[test]
    fn rearrange_matches_brute_force_distribution() {
        // compare |{ψ > t}| with |{u > t}| computed by fine sampling of the interpolant
        let g = MetricGraph::tadpole(1.0, 0.5).unwrap();
        let f = forms(&g, 0.1);
        let raw = DVector::from_fn(f.dim(), |i, _| ((i * 37 % 11) as f64 - 5.0) / 3.0);
        let shift = f.mass_weights().dot(&raw) / g.total_length();
        let u = GraphFunction::real(&f.mesh, raw.add_scalar(-shift)).unwrap();
        let r = rearrange_to_interval(&u, &f, false).unwrap();
        let re = u.re();
        let samples = 4000;
        for t in [-1.2, -0.4, 0.1, 0.7, 1.3] {
            let mut mu_u = 0.0;
            for ([i, j], h) in f.mesh.elements() {
                for s in 0..samples {
                    let x = (s as f64 + 0.5) / samples as f64;
                    let v = re[i] + x * (re[j] - re[i]);
                    if (t >= 0.0 && v > t) || (t < 0.0 && v < t) {
                        mu_u += h / samples as f64;
                    }
                }
            }
            let mut mu_psi = 0.0;
            let n = 400_000;
            for s in 0..n {
                let x = (s as f64 + 0.5) / n as f64 * g.total_length();
                let v = r.psi.eval(x);
                if (t >= 0.0 && v > t) || (t < 0.0 && v < t) {
                    mu_psi += g.total_length() / n as f64;
                }
            }
            assert!((mu_u - mu_psi).abs() < 1e-3, "t = {t}: {mu_u} vs {mu_psi}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn rearrangement_preserves_l2_on_loop(coeffs in prop::collection::vec(-1.0f64..1.0, 6), seed in 0u64..1000) {
            let f = forms(&MetricGraph::circle(1.0).unwrap(), 0.02);
            let mut raw = DVector::from_fn(f.dim(), |i, _| {
                let s = f.mesh.coord(i).arclength;
                coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * 2.0 * PI * s + seed as f64).sin()).sum::<f64>()
            });
            let shift = f.mass_weights().dot(&raw) / f.mesh.graph().total_length();
            raw.add_scalar_mut(-shift);
            let u = GraphFunction::real(&f.mesh, raw).unwrap();
            let r = rearrange_to_interval(&u, &f, false).unwrap();
            let m = u.mass(&f);
            prop_assert!((r.psi.l2_squared() - m).abs() <= 1e-10 * m.max(1e-300));
        }

        #[test]
        fn gap_lower_bound_on_stars(lengths in prop::collection::vec(0.1f64..2.0, 1..6)) {
            let g = MetricGraph::star(&lengths).unwrap();
            let h = g.min_edge_length() / 6.0;
            let l2 = lambda2(&g, h).unwrap();
            let ell = g.total_length();
            prop_assert!(l2 >= PI * PI / (ell * ell) - 1e-6);
        }
    }

    #[test]
    fn edge_interpolation_is_continuous_at_vertices() {
        let f = forms(&MetricGraph::figure_eight(1.0, 1.0).unwrap(), 0.1);
        let u = GraphFunction::interpolate(&f.mesh, |e, s| Complex64::new(if e == EdgeId(0) { s } else { -s }, 0.0));
        assert_eq!(u.values()[0].re, 0.0);
    }
}
