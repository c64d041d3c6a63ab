use egta_core::bps::{bps, bps_rrd_target, savings_report, BpsConfig};
use egta_core::empirical::{restrict, EmpiricalGame, PayoffEstimator, StrategySets};
use egta_core::factory::{make_random_game, matching_pennies, RandomGameSpec};
use egta_core::game::{Game, MixedProfile};
use egta_core::meta::{MssParams, MssSpec};
use egta_core::psro::{psro_run, PsroConfig, TerminatedBy};
use egta_core::solvers::{mrcp, nash_2p, nash_np, rd_step, MrcpConfig, NashConfig, QreConfig, RdConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn three_player_dominance() {
    // strategy 1 adds 1 to every player's payoff regardless of the others
    let g = Game::from_fn(vec![2, 3, 2], |p| {
        (0..3).map(|i| if p[i] == 1 { 1.0 } else { 0.0 } + 0.1 * p.iter().sum::<usize>() as f64).collect()
    })
    .unwrap();
    let res = nash_np(&g, &NashConfig::default()).unwrap();
    assert_eq!(res.profile.as_pure(), Some(vec![1, 1, 1]));
    assert!(res.regret_total <= 1e-6);
}

#[test]
fn two_player_nash_np_delegates() {
    for seed in 0..10 {
        let g = make_random_game(&RandomGameSpec::new(vec![4, 4], seed)).unwrap();
        let a = nash_np(&g, &NashConfig::default()).unwrap().profile;
        let b = nash_2p(&g).unwrap();
        for i in 0..2 {
            assert_eq!(a.strategy(i).support(0.0), b.strategy(i).support(0.0));
        }
    }
}

#[test]
fn three_player_binary_game_beats_random_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for seed in 0..3 {
        let g = make_random_game(&RandomGameSpec::new(vec![2, 2, 2], 40 + seed)).unwrap();
        let found = nash_np(&g, &NashConfig::default()).unwrap().regret_total;
        let mut sampled = f64::INFINITY;
        for _ in 0..1_000_000 {
            let probs = (0..3)
                .map(|_| {
                    let x: f64 = rng.random();
                    vec![x, 1.0 - x]
                })
                .collect();
            let p = MixedProfile::from_vecs(probs).unwrap();
            sampled = sampled.min(g.regret(&p).unwrap().total);
        }
        assert!(found <= sampled, "seed {seed}: {found} > sampled {sampled}");
    }
}

#[test]
fn mrcp_over_full_space_matches_equilibrium() {
    for seed in 0..5 {
        let g = make_random_game(&RandomGameSpec::new(vec![3, 4], seed)).unwrap();
        let ne = nash_2p(&g).unwrap();
        let ne_regret = g.regret(&ne).unwrap().total;
        let res = mrcp(&g, &StrategySets::full(&[3, 4]), &MrcpConfig::default()).unwrap();
        assert!(res.regret_total <= ne_regret + 1e-6);
    }
}

#[test]
fn dominant_strategy_enters_first_and_closes() {
    // player 0's strategy 2 strictly dominates; start elsewhere
    let g = Game::from_fn(vec![3, 3], |p| {
        let u0 = if p[0] == 2 { 2.0 } else { 0.0 } + 0.1 * p[1] as f64;
        let u1 = if p[1] == p[0] { 1.0 } else { 0.0 };
        vec![u0, u1]
    })
    .unwrap();
    let specs = [
        MssSpec::do_nash(),
        MssSpec::rrd(1e-3),
        MssSpec::new(MssParams::Qre(QreConfig::new(50.0)), 0),
        MssSpec::new(MssParams::Prd(RdConfig::prd_defaults()), 0),
    ];
    for spec in specs {
        let name = spec.kind();
        let cfg = PsroConfig { epsilon_stop: 1e-2, ..PsroConfig::new(spec, 10) };
        let trace = psro_run(&g, StrategySets::singletons(&[0, 0]), &cfg).unwrap();
        assert_eq!(trace.records[0].new_strategies[0], Some(2), "{name}");
        assert_eq!(trace.terminated_by, TerminatedBy::EpsClosed, "{name}");
        assert!(trace.records.len() <= 2, "{name}: {} iterations", trace.records.len());
    }
}

#[test]
fn bps_on_pennies_feeds_uniform_to_rrd() {
    let g = matching_pennies();
    let mut emp = EmpiricalGame::new(&g, StrategySets::full(&[2, 2])).unwrap();
    let (target, res, rd) =
        bps_rrd_target(&mut emp, &PayoffEstimator::exact(), &RdConfig::with_threshold(0.1), &BpsConfig::default())
            .unwrap();
    assert!(res.confirmed);
    assert_eq!(rd.steps_used, 0);
    assert_eq!(target, MixedProfile::uniform(&[2, 2]));
}

#[test]
fn bps_rrd_target_meets_threshold_or_trajectory_minimum() {
    for seed in 0..10 {
        let g = make_random_game(&RandomGameSpec::new(vec![5, 5], 300 + seed)).unwrap();
        let mut emp = EmpiricalGame::new(&g, StrategySets::full(&[5, 5])).unwrap();
        let lambda = 0.02;
        let rd = RdConfig { max_steps: 2000, step_size: 0.01, ..RdConfig::with_threshold(lambda) };
        let (target, res, out) = bps_rrd_target(&mut emp, &PayoffEstimator::exact(), &rd, &BpsConfig::default()).unwrap();
        let support: Vec<Vec<usize>> =
            (0..2).map(|i| res.profile.strategy(i).support(egta_core::bps::SUPPORT_THRESHOLD)).collect();
        let sub = StrategySets::new(support).unwrap();
        let sub_game = restrict(&g, &sub).unwrap();
        let regret = sub_game.regret(&out.profile).unwrap().total;
        if out.hit_threshold {
            assert!(regret <= lambda);
        } else {
            let mut p = MixedProfile::uniform(&sub.counts());
            let mut min = sub_game.regret(&p).unwrap().total;
            for _ in 0..rd.max_steps {
                p = rd_step(&sub_game, &p, rd.step_size).unwrap();
                min = min.min(sub_game.regret(&p).unwrap().total);
            }
            assert_eq!(regret, min);
        }
        // zero outside the support
        for i in 0..2 {
            for k in 0..5 {
                if !sub.contains(i, k) {
                    assert_eq!(target.strategy(i)[k], 0.0);
                }
            }
        }
    }
}

#[test]
fn bps_three_player_matches_exhaustive_nash() {
    for seed in 0..10 {
        let g = make_random_game(&RandomGameSpec::new(vec![3, 3, 3], 700 + seed)).unwrap();
        let mut emp = EmpiricalGame::new(&g, StrategySets::full(&[3, 3, 3])).unwrap();
        let tol = 1e-6;
        let res = bps(&mut emp, &PayoffEstimator::exact(), &BpsConfig::with_tol(tol)).unwrap();
        assert!(res.confirmed);
        assert!(g.regret(&res.profile).unwrap().total <= tol);
        let exhaustive = nash_np(&g, &NashConfig::default()).unwrap();
        assert!(exhaustive.regret_total <= tol);
    }
}

#[test]
fn savings_match_recount() {
    let g = make_random_game(&RandomGameSpec::new(vec![6, 6, 6], 11)).unwrap();
    let cfg = PsroConfig {
        bps: Some(BpsConfig::default()),
        epsilon_stop: 0.0,
        ..PsroConfig::new(MssSpec::do_nash(), 4)
    };
    let trace = psro_run(&g, StrategySets::new(vec![vec![0, 1]; 3]).unwrap(), &cfg).unwrap();
    let mut emp = EmpiricalGame::new(&g, trace.final_sets.clone()).unwrap();
    bps(&mut emp, &PayoffEstimator::exact(), &BpsConfig::default()).unwrap();
    let report = savings_report(&emp);
    let recount = emp.sets().profiles().filter(|p| emp.tensor().contains(p)).count();
    assert_eq!(report.evaluated, recount);
    assert_eq!(report.total_box, emp.sets().counts().iter().product::<usize>());
    assert!((report.savings_fraction - (1.0 - recount as f64 / report.total_box as f64)).abs() < 1e-15);
    for r in &trace.records {
        assert!(r.savings.evaluated <= r.savings.total_box);
    }
}

#[test]
fn noisy_runs_are_reproducible() {
    let g = make_random_game(&RandomGameSpec::new(vec![6, 6], 5)).unwrap();
    let cfg = PsroConfig {
        estimator: PayoffEstimator::new(0.1, 4, 17).unwrap(),
        track_ne_regret: true,
        ..PsroConfig::new(MssSpec::rrd(0.2), 8)
    };
    let a = psro_run(&g, StrategySets::singletons(&[0, 0]), &cfg).unwrap();
    let b = psro_run(&g, StrategySets::singletons(&[0, 0]), &cfg).unwrap();
    assert_eq!(a, b);
    for r in &a.records {
        assert!(r.target_regret_full >= 0.0);
        assert!(r.ne_regret_full.is_some());
    }
}
