mod common;

use mbsfn_core::delivery::simulate_delivery;
use mbsfn_core::formation::{run_formation, validate, Algorithm};

#[test]
fn formations_are_valid_and_monotone() {
    for seed in 0..60 {
        let inst = common::random_instance(seed, 6, 40);
        for algo in Algorithm::ALL {
            let run = run_formation(&inst.input(), algo, true).unwrap();
            for cfg in &run.states {
                let v = validate(cfg, &inst.area, &inst.users, &inst.grid);
                assert!(v.is_empty(), "seed {seed} {algo}: {v:?}");
            }
            assert!(run.accepted_adr.windows(2).all(|w| w[1] >= w[0]), "seed {seed} {algo}");
            let cfg = &run.config;
            let served = cfg.mbsfn_users.len() + cfg.unicast_users.len() + cfg.d2d_users.len();
            assert_eq!(served, inst.users.len());
            let a = &cfg.adr;
            assert!((a.total - (a.mbsfn + a.unicast + a.d2d)).abs() <= 1e-9 * a.total.max(1.0));
            if algo == Algorithm::Scf {
                assert!(cfg.d2d_users.is_empty() && cfg.relays.is_empty());
            }
        }
    }
}

#[test]
fn both_algorithms_start_from_the_same_basic_configuration() {
    let mut ahead = 0;
    for seed in 100..160 {
        let inst = common::random_instance(seed, 6, 40);
        let d = run_formation(&inst.input(), Algorithm::D2dMaf, false).unwrap();
        let s = run_formation(&inst.input(), Algorithm::Scf, false).unwrap();
        assert_eq!(d.accepted_adr[0], s.accepted_adr[0], "seed {seed}");
        ahead += usize::from(d.config.adr.total > s.config.adr.total);
    }
    assert!(ahead > 0);
}

#[test]
fn delivery_completes_for_every_served_user() {
    for seed in 200..230 {
        let inst = common::random_instance(seed, 4, 30);
        if inst.users.is_empty() {
            continue;
        }
        let run = run_formation(&inst.input(), Algorithm::D2dMaf, false).unwrap();
        let m = simulate_delivery(&run.config, &inst.tdd, &inst.grid, &inst.radio, 100_000).unwrap();
        assert!(m.delivery_time > 0.0 && m.delivery_time.is_finite(), "seed {seed}");
        assert!(
            (0.0..=100.0).contains(&m.used_d2d_rb_pct),
            "seed {seed}: {}",
            m.used_d2d_rb_pct
        );
        assert_eq!(m.adr, run.config.adr.total);
    }
}
