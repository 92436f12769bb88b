use blocksparse::experiments::{
    aggregate, gen_cs_instance, gen_nanopore_instance, run_method, run_trials, trial_seed, Experiment, FidelityKind,
    MethodSpec, NanoporeConfig, NoiseSpec, Stats, SyntheticCsConfig, TrialPlan, TrialReport,
};
use blocksparse::PenaltySpec;

#[test]
fn cs_realized_input_snr_matches_the_target_on_average() {
    let trials = 500;
    let mut total = 0.0;
    for seed in 0..trials {
        let inst = gen_cs_instance(&SyntheticCsConfig { seed, ..SyntheticCsConfig::default() }).unwrap();
        let clean = inst.a.dot(&inst.x0);
        let noise = &inst.y - &clean;
        total += 20.0 * (clean.dot(&clean).sqrt() / noise.dot(&noise).sqrt()).log10();
    }
    let mean = total / trials as f64;
    assert!((mean - 40.0).abs() <= 0.5, "mean realized SNR {mean} dB");
}

#[test]
fn cs_generation_is_a_pure_function_of_the_seed() {
    let cfg = SyntheticCsConfig { seed: 99, ..SyntheticCsConfig::default() };
    let (a, b) = (gen_cs_instance(&cfg).unwrap(), gen_cs_instance(&cfg).unwrap());
    assert_eq!(a, b);
    let support = a.x0.iter().filter(|v| **v != 0.0).count();
    assert_eq!(support, cfg.blocks.iter().map(|b| b.length).sum::<usize>());
    let other = gen_cs_instance(&SyntheticCsConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(a.y, other.y);
}

#[test]
fn cs_rejects_infeasible_layouts() {
    let mut cfg = SyntheticCsConfig::default();
    cfg.blocks[1].start = 25;
    assert!(gen_cs_instance(&cfg).is_err());
    let mut cfg = SyntheticCsConfig::default();
    cfg.blocks[3].length = 100;
    assert!(gen_cs_instance(&cfg).is_err());
}

#[test]
fn nanopore_traces_are_positive() {
    for seed in 0..50 {
        let cfg = NanoporeConfig { seed, ..NanoporeConfig::default() };
        let inst = gen_nanopore_instance(&cfg).unwrap();
        assert!(inst.x0.iter().all(|v| *v > 0.0), "seed {seed}");
        assert!(inst.y.iter().all(|v| *v >= cfg.clip_floor), "seed {seed}");
        assert_eq!(inst, gen_nanopore_instance(&cfg).unwrap());
    }
}

#[test]
fn nanopore_noiseless_limit_observes_the_filtered_signal() {
    let cfg = NanoporeConfig { alpha_shot: None, sigma_thermal: 0.0, seed: 3, ..NanoporeConfig::default() };
    let inst = gen_nanopore_instance(&cfg).unwrap();
    assert_eq!(inst.y, inst.x0);
}

#[test]
fn nanopore_without_events_sits_on_the_baseline() {
    let cfg = NanoporeConfig { max_events: Some(0), seed: 5, ..NanoporeConfig::default() };
    let inst = gen_nanopore_instance(&cfg).unwrap();
    assert!(inst.x0.iter().all(|v| (v - 150.0).abs() < 1e-9));
    let mean = inst.y.mean().unwrap();
    // shot plus thermal noise has std ~ sqrt(20·150 + 25) ≈ 55 per sample
    assert!((mean - 150.0).abs() < 6.0, "mean {mean}");
}

fn small_plan(trials: usize) -> TrialPlan {
    let cs = SyntheticCsConfig {
        n: 60,
        j: 40,
        blocks: vec![
            blocksparse::experiments::BlockSpec { start: 5, length: 8, amplitude: [1.0, 2.0] },
            blocksparse::experiments::BlockSpec { start: 30, length: 10, amplitude: [1.0, 2.0] },
        ],
        noise: NoiseSpec::SnrDb(30.0),
        ..SyntheticCsConfig::default()
    };
    let methods = vec![
        MethodSpec::new(PenaltySpec::L1 { lambda: 0.5 }, FidelityKind::L2),
        MethodSpec::new(PenaltySpec::Lop { lambda: 0.5, alpha: 10.0 }, FidelityKind::L2),
    ];
    TrialPlan::new(Experiment::Cs(cs), methods, trials, 17)
}

fn metrics(r: &TrialReport) -> (String, u64, u64, f64, f64, f64, usize) {
    (r.method.clone(), r.seed, r.instance_hash, r.snr_db, r.f1, r.nmse, r.iterations)
}

#[test]
fn methods_in_a_trial_share_the_instance() {
    let reports = run_trials(&small_plan(3), 1).unwrap();
    assert_eq!(reports.len(), 6);
    for pair in reports.chunks(2) {
        assert_eq!(pair[0].trial, pair[1].trial);
        assert_eq!(pair[0].instance_hash, pair[1].instance_hash);
    }
    assert_ne!(reports[0].instance_hash, reports[2].instance_hash);
}

#[test]
fn one_trial_reproduces_a_direct_solve() {
    let plan = small_plan(1);
    let reports = run_trials(&plan, 1).unwrap();
    let seed = trial_seed(plan.master_seed, 0);
    let instance = plan.experiment.with_seed(seed).generate().unwrap();
    for (m, r) in plan.methods.iter().zip(&reports) {
        let direct = run_method(&instance, m, &plan, 0, seed);
        assert_eq!(metrics(&direct), metrics(r));
        assert!(r.error.is_none());
    }
}

#[test]
fn aggregation_of_known_values() {
    let s = Stats::of(&[3.0, 1.0, 2.0, 10.0]);
    assert_eq!(s.mean, 4.0);
    assert_eq!(s.median, 2.5);
    assert_eq!(s.std, (50.0f64 / 3.0).sqrt());

    let report = |method: &str, snr: f64, error: Option<&str>| TrialReport {
        method: method.into(),
        trial: 0,
        seed: 0,
        instance_hash: 0,
        snr_db: snr,
        f1: 1.0,
        nmse: 0.0,
        iterations: 10,
        converged: true,
        wall_time_s: 0.0,
        error: error.map(String::from),
        lagrangian_trace: None,
    };
    let reports = [
        report("a", 10.0, None),
        report("b", 5.0, None),
        report("a", 20.0, None),
        report("a", f64::NAN, Some("diverged")),
        report("a", 60.0, None),
    ];
    let summary = aggregate(&reports);
    assert_eq!(summary[0].method, "a");
    assert_eq!((summary[0].trials, summary[0].failed), (4, 1));
    assert_eq!(summary[0].snr_db.mean, 30.0);
    assert_eq!(summary[0].snr_db.median, 20.0);
    assert_eq!(summary[1].snr_db.median, 5.0);
}
