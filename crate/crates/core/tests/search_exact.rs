mod common;

use common::{brute_cost, brute_optimum, to_bits};
use pbopt::gen::{pigeonhole, random_instance, symmetric_cover, GenParams};
use pbopt::search::{solve, Config};
use pbopt::Status;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check(inst: &pbopt::Instance, cfg: &Config) {
    let r = solve(inst, cfg);
    let opt = brute_optimum(inst);
    match opt {
        None => assert_eq!(r.status, Status::Unsatisfiable, "{inst:?}"),
        Some(v) => {
            let best = r.best.as_ref().expect("solution expected");
            assert_eq!(brute_cost(inst, to_bits(&best.x)), Some(best.objective));
            if inst.is_optimization() {
                assert_eq!(r.status, Status::OptimumFound, "{inst:?}");
                assert_eq!(best.objective, v, "{inst:?}");
            } else {
                assert_eq!(r.status, Status::Satisfiable);
            }
        }
    }
}

#[test]
fn random_instances_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..300 {
        let p = GenParams {
            n_vars: rng.gen_range(2..=10),
            n_constraints: rng.gen_range(1..=8),
            nonlinear: if i % 3 == 0 { 0.4 } else { 0.0 },
            wbo: i % 5 == 4,
            optimize: i % 7 != 0,
            ..GenParams::default()
        };
        let inst = random_instance(&mut rng, &p);
        check(&inst, &Config::default());
    }
}

#[test]
fn feature_toggles_do_not_change_answers() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..120 {
        let p = GenParams {
            n_vars: rng.gen_range(3..=9),
            n_constraints: rng.gen_range(2..=7),
            nonlinear: 0.5,
            wbo: i % 4 == 3,
            ..GenParams::default()
        };
        let inst = random_instance(&mut rng, &p);
        let cfg = Config {
            flower: i % 2 == 0,
            rlt: i % 3 == 0,
            symmetry: i % 5 != 0,
            conflict_pb: i % 7 != 0,
            fjump: i % 2 == 1,
            restarts: i % 3 != 1,
            ..Config::default()
        };
        check(&inst, &cfg);
    }
}

#[test]
fn structured_families() {
    check(&pigeonhole(5, 4), &Config::default());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        check(&symmetric_cover(&mut rng, 4, 3), &Config::default());
    }
}

#[test]
#[ignore]
fn stress() {
    let seed: u64 = std::env::var("SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..2000 {
        let p = GenParams {
            n_vars: rng.gen_range(2..=14),
            n_constraints: rng.gen_range(1..=12),
            nonlinear: if i % 2 == 0 { 0.4 } else { 0.0 },
            wbo: i % 5 == 4,
            optimize: i % 7 != 0,
            equality: 0.15,
            ..GenParams::default()
        };
        let inst = random_instance(&mut rng, &p);
        let cfg = Config { fjump: i % 2 == 0, ..Config::default() };
        check(&inst, &cfg);
    }
}
