mod common;

use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;
use storage_opf::bundled;
use storage_opf::formulation::{build_exact, build_relaxed, Mode, ModeAssignment};
use storage_opf::nlp::{derivative_check, Nlp};

const POINTS: usize = 100;
const STEP: f64 = 1e-6;
const TOLERANCE: f64 = 1e-6;

fn random_multipliers(nlp: &dyn Nlp, rng: &mut StdRng) -> (Vec<f64>, Vec<f64>) {
    let y = (0..nlp.eq_count()).map(|_| rng.gen_range(-50.0..50.0)).collect();
    let z = (0..nlp.ineq_count()).map(|_| rng.gen_range(0.0..50.0)).collect();
    (y, z)
}

fn check_case(name: &str, seed: u64) {
    let case = bundled::case(name).unwrap();
    let problem = build_relaxed(&case).unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..POINTS {
        let x = common::random_interior_point(&case, &mut rng);
        let (y, z) = random_multipliers(&problem, &mut rng);
        let e = derivative_check(&problem, &x, &y, &z, STEP).unwrap();
        worst = worst.max(e.max());
        assert!(e.max() <= TOLERANCE, "{name}: {e:?}");
    }
    assert!(worst > 0.0, "finite differences should not be exact everywhere");
}

#[test]
fn micro3_derivatives_match_finite_differences() {
    check_case("micro3", 1);
}

#[test]
fn case9_derivatives_match_finite_differences() {
    check_case("case9", 2);
}

#[test]
fn neglmp_derivatives_match_finite_differences() {
    check_case("neglmp", 3);
}

#[test]
fn exact_model_derivatives_match_finite_differences() {
    let case = bundled::case("micro3").unwrap();
    let mut modes = ModeAssignment::free(1, case.periods());
    modes.set(0, 0, Mode::ChargeOnly);
    modes.set(0, 2, Mode::DischargeOnly);
    let problem = build_exact(&case, &modes).unwrap();
    let mut rng = StdRng::seed_from_u64(4);
    for _ in 0..10 {
        let x = common::random_interior_point(&case, &mut rng);
        let (y, z) = random_multipliers(&problem, &mut rng);
        let e = derivative_check(&problem, &x, &y, &z, STEP).unwrap();
        assert!(e.max() <= TOLERANCE, "{e:?}");
    }
}
