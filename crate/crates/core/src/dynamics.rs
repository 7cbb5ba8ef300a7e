//! Time integration of `i∂ₜu = −Δu − |u|^{p−2}u` on the graph.
//!
//! Strang splitting: a nodal phase rotation `u_i ← e^{i(dt/2)|u_i|^{p−2}}u_i`,
//! a Crank–Nicolson step `(M_L + i(dt/2)K)u⁺ = (M_L − i(dt/2)K)u`, and a
//! second half rotation. `M_L` is the lumped (diagonal) mass: the nodal
//! rotation is an isometry of the `M_L` norm and the Crank–Nicolson step is
//! a Cayley transform in that norm, so the discrete mass `Σ m_i|u_i|²` is
//! conserved up to rounding. Mass and energy diagnostics use the same
//! lumped quadrature.

use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretize::{AssembledForms, GraphFunction, MeshMatrix};
use crate::error::{Error, Result};
use crate::format::sig;
use crate::linalg::ChainFactor;
use crate::nls_energy::NlsParams;
use crate::spectral::{eigen_smallest, lambda2_pair};

#[derive(Clone, Debug)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    /// `min_θ ‖v(t) − e^{iθ}κ_μ‖_{H¹}` with `κ_μ` for the initial mass.
    pub distance: Vec<f64>,
    pub final_state: GraphFunction,
    pub steps: usize,
}

impl EvolutionTrace {
    pub fn max_relative_mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        self.mass.iter().map(|m| (m - m0).abs() / m0).fold(0.0, f64::max)
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    pub fn max_distance(&self) -> f64 {
        self.distance.iter().copied().fold(0.0, f64::max)
    }

    /// CSV with columns `t,mass,energy,d_H1`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,mass,energy,d_H1")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{}",
                sig(self.times[i]),
                sig(self.mass[i]),
                sig(self.energy[i]),
                sig(self.distance[i])
            )?;
        }
        Ok(())
    }
}

/// `Σ m_i |u_i|²`.
pub fn lumped_mass(forms: &AssembledForms, u: &DVector<Complex64>) -> f64 {
    forms.lumped_mass.iter().zip(u.iter()).map(|(m, z)| m * z.norm_sqr()).sum()
}

/// `½uᴴKu − (1/p)Σ m_i|u_i|^p`.
pub fn lumped_energy(forms: &AssembledForms, u: &DVector<Complex64>, p: f64) -> f64 {
    let pot: f64 = forms.lumped_mass.iter().zip(u.iter()).map(|(m, z)| m * z.norm().powf(p)).sum();
    0.5 * forms.dirichlet(u) - pot / p
}

/// `‖w'‖₂ + ‖w‖₂` in the lumped inner product.
pub fn h1_norm(forms: &AssembledForms, w: &DVector<Complex64>) -> f64 {
    forms.dirichlet(w).max(0.0).sqrt() + lumped_mass(forms, w).sqrt()
}

/// `min_θ ‖v − e^{iθ}κ‖_{H¹}`; the minimizer is `θ = arg Σ m_i v_i`.
pub fn orbital_distance(forms: &AssembledForms, v: &DVector<Complex64>, kappa: f64) -> f64 {
    let s: Complex64 = forms.lumped_mass.iter().zip(v.iter()).map(|(m, z)| z * *m).sum();
    let c = if s.norm() > 0.0 { s / s.norm() * kappa } else { Complex64::new(kappa, 0.0) };
    let w = v.map(|z| z - c);
    h1_norm(forms, &w)
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Record diagnostics every this many steps (the last step is always recorded).
    pub record_every: usize,
}

struct Stepper {
    factor: ChainFactor<Complex64>,
    rhs: MeshMatrix<Complex64>,
    half: f64,
    p: f64,
}

impl Stepper {
    fn new(forms: &AssembledForms, dt: f64, p: f64) -> Result<Self> {
        let mut ml = MeshMatrix::<f64>::zeros(&forms.mesh);
        ml.diag.clone_from(&forms.lumped_mass);
        let ml = ml.to_complex();
        let k = forms.stiffness.to_complex();
        let i_half = Complex64::new(0.0, 0.5 * dt);
        let one = Complex64::new(1.0, 0.0);
        let lhs = ml.combine(one, &k, i_half);
        Ok(Self {
            factor: ChainFactor::new(&forms.mesh, &lhs)?,
            rhs: ml.combine(one, &k, -i_half),
            half: 0.5 * dt,
            p,
        })
    }

    fn rotate(&self, u: &mut DVector<Complex64>) {
        for z in u.iter_mut() {
            *z *= Complex64::from_polar(1.0, self.half * z.norm().powf(self.p - 2.0));
        }
    }

    fn step(&self, u: &mut DVector<Complex64>) {
        self.rotate(u);
        *u = self.factor.solve(&self.rhs.apply(u));
        self.rotate(u);
    }
}

/// Refuses initial data whose mass reaches the critical mass at `p = 6`.
fn check_well_posed(forms: &AssembledForms, p: f64, mass: f64) -> Result<()> {
    if p == 6.0 {
        let critical = forms.mesh.graph().critical_mass();
        if mass >= critical {
            return Err(Error::SupercriticalMass { mass, critical });
        }
    }
    Ok(())
}

pub fn evolve(u0: &GraphFunction, forms: &AssembledForms, p: f64, opts: &EvolveOptions) -> Result<EvolutionTrace> {
    if !(opts.dt > 0.0 && opts.t_end >= 0.0 && opts.record_every > 0) {
        return Err(Error::InvalidParameter(format!(
            "dt = {}, t_end = {}, record_every = {}",
            opts.dt, opts.t_end, opts.record_every
        )));
    }
    let mut u = u0.values().clone();
    let mass0 = lumped_mass(forms, &u);
    NlsParams::new(p, mass0)?;
    check_well_posed(forms, p, mass0)?;
    let kappa = (mass0 / forms.mesh.graph().total_length()).sqrt();
    let steps = (opts.t_end / opts.dt).round() as usize;
    let stepper = Stepper::new(forms, opts.dt, p)?;
    let mut trace = EvolutionTrace {
        times: Vec::new(),
        mass: Vec::new(),
        energy: Vec::new(),
        distance: Vec::new(),
        final_state: u0.clone(),
        steps,
    };
    let record = |t: f64, u: &DVector<Complex64>, trace: &mut EvolutionTrace| {
        trace.times.push(t);
        trace.mass.push(lumped_mass(forms, u));
        trace.energy.push(lumped_energy(forms, u, p));
        trace.distance.push(orbital_distance(forms, u, kappa));
    };
    record(0.0, &u, &mut trace);
    for k in 1..=steps {
        stepper.step(&mut u);
        if k % opts.record_every == 0 || k == steps {
            record(k as f64 * opts.dt, &u, &mut trace);
        }
    }
    trace.final_state = u0.with_values(u);
    Ok(trace)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeDirection {
    /// Random complex combination of the low mean-free eigenmodes.
    Random,
    /// Along the first mean-free eigenmode `φ₂`.
    Eigenmode,
}

#[derive(Clone, Debug)]
pub struct ProbeResult {
    pub initial_distance: f64,
    pub max_distance: f64,
    pub trace: EvolutionTrace,
}

/// Evolves `κ_μ` plus a tangent perturbation of `H¹` size `delta`, rescaled
/// back onto the mass sphere, and reports the largest orbital distance.
pub fn orbital_probe(
    forms: &AssembledForms,
    params: NlsParams,
    delta: f64,
    direction: ProbeDirection,
    seed: u64,
    opts: &EvolveOptions,
) -> Result<ProbeResult> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be nonnegative")));
    }
    let mesh = &forms.mesh;
    let n = forms.dim();
    let ell = mesh.graph().total_length();
    let kappa = params.kappa(ell);
    let phi: DVector<Complex64> = match direction {
        ProbeDirection::Eigenmode => lambda2_pair(forms)?.1.map(|x| Complex64::new(x, 0.0)),
        ProbeDirection::Random => {
            let modes = eigen_smallest(forms, 6.min(n))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = DVector::zeros(n);
            for phi in modes.vectors.iter().skip(1) {
                let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                v += phi.map(|x| c * x);
            }
            v
        }
    };
    let norm = h1_norm(forms, &phi);
    let phi = if norm > 0.0 { phi * Complex64::new(delta / norm, 0.0) } else { phi };
    let mut u = DVector::from_element(n, Complex64::new(kappa, 0.0)) + phi;
    // the lumped mass is the conserved quantity of the integrator
    u *= Complex64::new((params.mu / lumped_mass(forms, &u)).sqrt(), 0.0);
    let u0 = GraphFunction::new(mesh, u)?;
    let trace = evolve(&u0, forms, params.p, opts)?;
    Ok(ProbeResult {
        initial_distance: trace.distance[0],
        max_distance: trace.max_distance(),
        trace,
    })
}
