use anytime_pac::simulation::{
    coverage, run_trajectory, BoundKind, ExperimentConfig, PosteriorRule, ScenarioConfig,
};

fn config(
    scenario: ScenarioConfig,
    bounds: &[&str],
    reps: u64,
    horizon: u64,
    delta: f64,
) -> ExperimentConfig {
    let mut text = format!("seed = 11\nreps = {reps}\nhorizon = {horizon}\ndelta = {delta}\n[scenario]\nkind = \"bernoulli\"\np = [0.5]\n");
    for b in bounds {
        text.push_str(&format!("[[bounds]]\nkind = \"{b}\"\n"));
    }
    let mut cfg = ExperimentConfig::from_toml(&text).unwrap();
    cfg.scenario = scenario;
    cfg
}

const BERNOULLI_BOUNDS: &[&str] = &[
    "subgaussian",
    "gaussian-mixture",
    "bernstein-bounded",
    "bennett",
    "bernstein-condition",
    "bounded-mgf",
    "second-moment",
    "bercu-touati",
    "pth-moment",
    "seeger",
    "mcallester",
    "thiemann",
    "convex-phi",
    "renyi",
    "ipm",
    "subgaussian-cs",
    "stitched-cs",
];

#[test]
fn degenerate_losses_never_violate() {
    // p ∈ {0, 1}: every loss equals its mean, so every gap is zero.
    let cfg = config(
        ScenarioConfig::Bernoulli { p: vec![0.0, 1.0] },
        BERNOULLI_BOUNDS,
        20,
        200,
        0.05,
    );
    let report = coverage(&cfg).unwrap();
    assert_eq!(report.bounds.len(), BERNOULLI_BOUNDS.len());
    for b in &report.bounds {
        assert_eq!(b.violations, 0, "{}", b.label);
    }
}

#[test]
fn trajectories_are_deterministic() {
    let cfg = config(
        ScenarioConfig::Bernoulli { p: vec![0.2, 0.7] },
        BERNOULLI_BOUNDS,
        5,
        100,
        0.05,
    );
    for rep in 0..3 {
        assert_eq!(
            run_trajectory(&cfg, rep).unwrap(),
            run_trajectory(&cfg, rep).unwrap()
        );
    }
    assert_ne!(
        run_trajectory(&cfg, 0).unwrap().records,
        run_trajectory(&cfg, 1).unwrap().records
    );
}

#[test]
fn more_reps_keep_shared_traces() {
    let small = config(
        ScenarioConfig::Bernoulli { p: vec![0.4] },
        &["seeger"],
        4,
        50,
        0.05,
    );
    let mut big = small.clone();
    big.reps = 8;
    for rep in 0..4 {
        assert_eq!(
            run_trajectory(&small, rep).unwrap(),
            run_trajectory(&big, rep).unwrap()
        );
    }
}

#[test]
fn single_rep_rate_is_binary() {
    let cfg = config(
        ScenarioConfig::Bernoulli { p: vec![0.4, 0.5] },
        &["subgaussian", "seeger"],
        1,
        100,
        0.5,
    );
    let report = coverage(&cfg).unwrap();
    for b in &report.bounds {
        assert!(b.violation_rate == 0.0 || b.violation_rate == 1.0);
    }
}

#[test]
fn large_delta_still_covers() {
    let cfg = config(
        ScenarioConfig::Mds {
            low: vec![-1.0, -0.5],
            high: vec![1.0, 2.0],
        },
        &[
            "subgaussian",
            "bernstein-bounded",
            "bercu-touati",
            "pth-moment",
        ],
        300,
        200,
        0.5,
    );
    for b in coverage(&cfg).unwrap().bounds {
        assert!(
            b.violation_rate <= 0.5 + 3.0 * b.std_error.max((0.25f64 / 300.0).sqrt()),
            "{}",
            b.label
        );
    }
}

#[test]
fn trace_flags_match_comparisons() {
    let cfg = config(
        ScenarioConfig::WithoutReplacement {
            size: 80,
            ones: vec![10, 40],
        },
        &["seeger", "subgaussian", "convex-phi"],
        1,
        80,
        0.05,
    );
    let trace = run_trajectory(&cfg, 0).unwrap();
    for r in &trace.records {
        assert_eq!(r.violated, r.lhs > r.rhs);
    }
    for (i, &first) in trace.first_violation.iter().enumerate() {
        let want = trace
            .records
            .iter()
            .find(|r| r.bound == i && r.violated)
            .map_or(0, |r| r.t);
        assert_eq!(first, want);
    }
}

#[test]
fn fixed_posterior_seeger_at_horizon() {
    // ρ = ν fixed; lhs is kl(R̂_t ‖ R) under the uniform mixture.
    let mut cfg = config(
        ScenarioConfig::Bernoulli { p: vec![0.3] },
        &["seeger"],
        400,
        1000,
        0.05,
    );
    cfg.posterior = PosteriorRule::Fixed { weights: None };
    cfg.bounds[0].target = Some(1000);
    assert_eq!(cfg.bounds[0].kind, BoundKind::Seeger);
    let report = coverage(&cfg).unwrap();
    assert!(report.bounds[0].violation_rate <= 0.05);
}
