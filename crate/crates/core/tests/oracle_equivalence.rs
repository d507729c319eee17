//! Cross-module checks: the Nyström Ξ against the multipole oracle on
//! asymmetric disc pairs, and the generic trace formula against 1D closed forms.

use proptest::prelude::*;
use reltrace::geometry::{discretize, Configuration, Curve};
use reltrace::multipole_oracle::{xi_discs, Disc, MultipoleTruncation};
use reltrace::plates1d::{xi_point_plates, PlateBc};
use reltrace::trace_formula::{energy_from_xi, TraceOptions};
use reltrace::xi::{BoundaryCondition, XiSolver};
use std::f64::consts::PI;

fn pair(c1: [f64; 2], r1: f64, c2: [f64; 2], r2: f64) -> (Configuration, Vec<Disc>) {
    let cfg = Configuration::new(vec![Curve::circle(c1, r1).unwrap(), Curve::circle(c2, r2).unwrap()]).unwrap();
    (cfg, vec![Disc::new(c1, r1).unwrap(), Disc::new(c2, r2).unwrap()])
}

/// Multipole Ξ with the order raised until it settles.
fn oracle(k: f64, discs: &[Disc], bc: &BoundaryCondition) -> f64 {
    xi_discs(k, discs, bc, &MultipoleTruncation::default()).unwrap().value
}

#[test]
fn unequal_discs_match_the_multipole_sum() {
    let (cfg, discs) = pair([-0.4, 0.7], 0.6, [1.5, -0.2], 1.1);
    let mesh = discretize(&cfg, &[128, 192]).unwrap();
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        let solver = XiSolver::new(&mesh, bc);
        for k in [0.3, 1.5, 4.0] {
            let bem = solver.xi(k).unwrap();
            let orc = oracle(k, &discs, &bc);
            assert!(
                (bem - orc).abs() <= 1e-10 * orc.abs().max(1e-3),
                "{} κ={k}: {bem} vs {orc}",
                bc.name()
            );
        }
    }
}

#[test]
fn three_discs_match_the_multipole_sum() {
    let c = [([-2.5, 0.0], 1.0), ([0.3, 1.2], 0.8), ([1.0, -1.8], 0.7)];
    let cfg = Configuration::new(c.iter().map(|&(p, r)| Curve::circle(p, r).unwrap()).collect()).unwrap();
    let discs: Vec<Disc> = c.iter().map(|&(p, r)| Disc::new(p, r).unwrap()).collect();
    let mesh = discretize(&cfg, &[64, 64, 64]).unwrap();
    let bc = BoundaryCondition::Dirichlet;
    let bem = XiSolver::new(&mesh, bc).xi(0.8).unwrap();
    let orc = oracle(0.8, &discs, &bc);
    assert!((bem - orc).abs() < 1e-11, "{bem} vs {orc}");
}

#[test]
fn generic_trace_formula_reproduces_point_plate_energy() {
    for a in [0.7, 1.9] {
        let e = energy_from_xi(
            |k| xi_point_plates(k, a, PlateBc::Dirichlet),
            0.0,
            &TraceOptions::default(),
        )
        .unwrap();
        let exact = -PI / (24.0 * a);
        assert!((e.value / exact - 1.0).abs() < 1e-9, "{} vs {exact}", e.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bem_and_oracle_agree_on_random_disc_pairs(
        r1 in 0.4f64..1.2, r2 in 0.4f64..1.2, gap in 0.8f64..3.0, angle in 0.0f64..(2.0 * PI), k in 0.2f64..3.0,
    ) {
        let d = r1 + r2 + gap;
        let (cfg, discs) = pair([0.0, 0.0], r1, [d * angle.cos(), d * angle.sin()], r2);
        let mesh = discretize(&cfg, &[96, 96]).unwrap();
        let bc = BoundaryCondition::Neumann;
        let bem = XiSolver::new(&mesh, bc).xi(k).unwrap();
        let orc = oracle(k, &discs, &bc);
        prop_assert!((bem - orc).abs() <= 1e-7 * orc.abs().max(1e-6), "{} vs {}", bem, orc);
        prop_assert!(orc < 0.0);
    }
}
