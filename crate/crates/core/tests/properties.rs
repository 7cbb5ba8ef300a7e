//! Property tests for invariants that cut across modules.

mod common;

use std::f64::consts::PI;

use graphnls::discretize::{AssembledForms, GraphFunction, Mesh};
use graphnls::dynamics::{evolve, h1_norm, lumped_mass, EvolveOptions};
use graphnls::ground_state::{normalized_gradient_flow, Schedule};
use graphnls::metric_graph::{EdgeId, MetricGraph};
use graphnls::nls_energy::{mu1_from_lambda2, mu1_threshold, random_field, NlsParams};
use graphnls::spectral::lambda2_forms;
use graphnls::stability::{classify_with_forms, margin, tangent_hessian};
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn default_forms(g: &MetricGraph) -> AssembledForms {
    AssembledForms::assemble(&Mesh::build(g, Mesh::default_target_h(g)).unwrap())
}

fn brute_force_bridges(g: &MetricGraph) -> Vec<EdgeId> {
    (0..g.edge_count()).map(EdgeId).filter(|&e| !g.is_connected_without(Some(e))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bridges_match_brute_force(seed in any::<u64>()) {
        let g = common::random_multigraph(seed, 6);
        let mut fast = g.bridges();
        fast.sort_by_key(|e| e.0);
        prop_assert_eq!(&fast, &brute_force_bridges(&g));
        prop_assert_eq!(g.has_cycle_covering(), fast.is_empty());
        if g.edge_count() >= 2 {
            for t in g.terminal_edges() {
                prop_assert!(fast.contains(&t));
            }
        }
        let c = g.critical_mass();
        let root3 = 3f64.sqrt();
        prop_assert!(c == PI * root3 / 4.0 || c == PI * root3 / 2.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectral_gap_lower_bounds(seed in any::<u64>()) {
        let g = common::random_multigraph(seed, 8);
        let f = default_forms(&g);
        let ell = g.total_length();
        let l2 = lambda2_forms(&f).unwrap();
        prop_assert!(l2 >= PI * PI / (ell * ell) - 1e-6);
        if g.has_cycle_covering() {
            prop_assert!(l2 >= 4.0 * PI * PI / (ell * ell) - 1e-6);
        }
        // the critical thresholds clear the whole-line and half-line masses strictly
        let mu1 = mu1_from_lambda2(ell, l2, 6.0);
        if !g.terminal_edges().is_empty() {
            prop_assert!(mu1 >= PI / 2.0 && PI / 2.0 > PI * 3f64.sqrt() / 4.0);
        }
        if g.has_cycle_covering() {
            prop_assert!(mu1 >= PI && PI > PI * 3f64.sqrt() / 2.0);
        }
    }

    #[test]
    fn stiffness_ignores_constants(seed in any::<u64>(), c_re in -3.0..3.0f64, c_im in -3.0..3.0f64) {
        let g = common::random_multigraph(seed, 6);
        let f = default_forms(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_field(&f.mesh, &mut rng);
        let shifted = u.values().add_scalar(Complex64::new(c_re, c_im));
        let a = f.stiffness.apply_complex(u.values());
        let b = f.stiffness.apply_complex(&shifted);
        let scale = a.norm().max(1.0);
        prop_assert!((a - b).norm() <= 1e-10 * scale * f.mesh.h_min().recip());
    }

    #[test]
    fn refinement_never_raises_lambda2(seed in any::<u64>()) {
        let g = common::random_multigraph(seed, 5);
        let mesh = Mesh::build(&g, g.min_edge_length() / 4.0).unwrap();
        let coarse = lambda2_forms(&AssembledForms::assemble(&mesh)).unwrap();
        let fine = lambda2_forms(&AssembledForms::assemble(&mesh.refined().unwrap())).unwrap();
        prop_assert!(fine <= coarse * (1.0 + 1e-12));
    }

    #[test]
    fn threshold_scale_covariance(p in 2.5..5.5f64, ratio in 0.5..1.5f64) {
        // (μ, ℓ) → (tμ, t^{−β}ℓ) with β = (p−2)/(6−p) preserves μ ≶ μ₁
        let g = MetricGraph::interval(1.0).unwrap();
        let h = 0.02;
        let mu1 = mu1_threshold(&g, p, h).unwrap();
        let mu = ratio * mu1;
        prop_assume!((ratio - 1.0).abs() > 1e-9);
        let beta = (p - 2.0) / (6.0 - p);
        for t in [0.5f64, 2.0] {
            let s = t.powf(-beta);
            let scaled = mu1_threshold(&g.scaled(s).unwrap(), p, h * s).unwrap();
            prop_assert!(((t * mu) < scaled) == (mu < mu1));
            prop_assert!((scaled / (t * mu1) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn critical_threshold_is_scale_invariant(seed in any::<u64>(), t in 0.3..3.0f64) {
        let g = common::random_multigraph(seed, 5);
        let h = Mesh::default_target_h(&g);
        let a = mu1_threshold(&g, 6.0, h).unwrap();
        let b = mu1_threshold(&g.scaled(t).unwrap(), 6.0, h * t).unwrap();
        prop_assert!((a / b - 1.0).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stability_tests_agree_on_mass_grid(seed in any::<u64>()) {
        let g = common::random_multigraph(seed, 4);
        let f = default_forms(&g);
        let l2 = lambda2_forms(&f).unwrap();
        for p in [4.0, 6.0] {
            let mu1 = mu1_from_lambda2(g.total_length(), l2, p);
            let band = margin(&f.mesh, l2, p);
            for k in 0..20 {
                let mu = mu1 * (0.2 + 1.6 * k as f64 / 19.0);
                if (mu / mu1 - 1.0).abs() <= band {
                    continue;
                }
                let params = NlsParams::new(p, mu).unwrap();
                let hess = tangent_hessian(&f, params).unwrap().min();
                prop_assert_eq!(hess > 0.0, mu < mu1, "p = {}, mu/mu1 = {}", p, mu / mu1);
            }
            let r = classify_with_forms(&f, NlsParams::new(p, 0.5 * mu1).unwrap()).unwrap();
            prop_assert_eq!(r.n_negative_H, 1);
            prop_assert_eq!(r.n_negative_L0, 0);
        }
    }

    #[test]
    fn flow_energy_is_phase_invariant(seed in any::<u64>(), theta in 0.0..(2.0 * PI)) {
        let g = MetricGraph::tadpole(1.0, 1.5).unwrap();
        let f = default_forms(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u0 = random_field(&f.mesh, &mut rng);
        let params = NlsParams::new(4.0, 3.0).unwrap();
        let a = normalized_gradient_flow(&u0, &f, params, &Schedule::default()).unwrap();
        let b = normalized_gradient_flow(&u0.scaled(Complex64::from_polar(1.0, theta)), &f, params, &Schedule::default()).unwrap();
        prop_assert!(a.converged() && b.converged());
        prop_assert!((a.energy - b.energy).abs() <= 1e-10 * a.energy.abs().max(1.0));
    }

    #[test]
    fn evolution_invariants(seed in any::<u64>(), theta in 0.0..(2.0 * PI)) {
        let g = common::random_multigraph(seed, 4);
        let f = AssembledForms::assemble(&Mesh::build(&g, g.min_edge_length() / 6.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u0 = random_field(&f.mesh, &mut rng);
        // keep the mass subcritical for p = 6
        let u0 = u0.scaled(Complex64::new((1.0 / lumped_mass(&f, u0.values())).sqrt(), 0.0));
        let p = 6.0;
        let opts = EvolveOptions { dt: 1e-3, t_end: 0.2, record_every: 1 };
        let fwd = evolve(&u0, &f, p, &opts).unwrap();
        let m0 = fwd.mass[0];
        for w in fwd.mass.windows(2) {
            prop_assert!((w[1] - w[0]).abs() <= 1e-10 * m0);
        }
        let rot = Complex64::from_polar(1.0, theta);
        let turned = evolve(&u0.scaled(rot), &f, p, &opts).unwrap();
        let diff = fwd.final_state.values() * rot - turned.final_state.values();
        prop_assert!(h1_norm(&f, &diff) <= 1e-9 * h1_norm(&f, u0.values()));
        // conjugation reverses time
        let back_in = GraphFunction::new(&f.mesh, fwd.final_state.values().map(|z| z.conj())).unwrap();
        let back = evolve(&back_in, &f, p, &opts).unwrap();
        let ret: DVector<Complex64> = back.final_state.values().map(|z| z.conj());
        prop_assert!(h1_norm(&f, &(ret - u0.values())) <= 1e-6 * h1_norm(&f, u0.values()));
    }
}

#[test]
fn subcritical_ground_states_exist_over_three_decades() {
    let g = MetricGraph::tadpole(1.0, 0.8).unwrap();
    let f = default_forms(&g);
    for p in [3.0, 4.0, 5.0] {
        for mu in [0.05, 0.5, 5.0, 50.0] {
            let params = NlsParams::new(p, mu).unwrap();
            let r = graphnls::ground_state::find_ground_state(&f, params, &Default::default()).unwrap();
            assert!(r.best.pde_residual < 1e-8, "p = {p}, mu = {mu}: residual {}", r.best.pde_residual);
            assert!(r.gap_to_constant >= -1e-10 * r.energy.abs().max(1.0));
        }
    }
}

#[test]
fn ground_state_energy_decreases_under_refinement() {
    let g = MetricGraph::dumbbell(1.0, 2.0, 1.0).unwrap();
    let params = NlsParams::new(4.0, 12.0).unwrap();
    let coarse_mesh = Mesh::build(&g, 0.1).unwrap();
    let fine_mesh = coarse_mesh.refined().unwrap();
    let e = |m| {
        let f = AssembledForms::assemble(m);
        graphnls::ground_state::find_ground_state(&f, params, &Default::default()).unwrap().energy
    };
    let (ec, ef) = (e(&coarse_mesh), e(&fine_mesh));
    assert!(ef <= ec + 1e-10 * ec.abs());
    assert!((ef / ec - 1.0).abs() < 0.01);
}
