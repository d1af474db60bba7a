use proptest::prelude::*;
use sosage::config::RunConfig;
use sosage::envs::{EnvConfig, EnvName};
use sosage::harness::{load_checkpoint, run_symbiosis, verify};

fn grid(dir: &std::path::Path, seed: u64) -> RunConfig {
    let mut config = RunConfig::default();
    config.env = EnvConfig::new(EnvName::GridnavCompositional);
    config.evolution.seed = seed;
    config.evolution.window_g = 3;
    config.evolution.max_generations = 60;
    config.output_dir = dir.to_path_buf();
    config
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn traces_respect_break_policy(seed in 0u64..1000, xor in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let mut config = grid(dir.path(), seed);
        if xor {
            config.env = EnvConfig::new(EnvName::Xor);
        }
        let report = run_symbiosis(&config).unwrap();
        prop_assert_eq!(report.solved, report.generations_to_solve.is_some());
        let mut previous = 1;
        for out in &report.trace {
            if out.broke.is_some() {
                prop_assert!(out.stalled, "break without stall at {}", out.generation);
            }
            prop_assert!(out.roster_size <= config.population_limit);
            if out.reversed.is_some() {
                prop_assert!(out.pop_order + 1 >= previous);
            } else {
                prop_assert!(out.pop_order >= previous, "order fell without a reverse at {}", out.generation);
            }
            previous = out.pop_order;
        }
        let ckpt = load_checkpoint(&report.checkpoint_path, Some(&config)).unwrap();
        let v = verify(&ckpt);
        prop_assert!(v.passed(), "{}", v);
    }
}

#[test]
fn breaks_disabled_never_break() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..6 {
        let mut config = grid(dir.path(), seed);
        config.breaks_enabled = false;
        let report = run_symbiosis(&config).unwrap();
        assert_eq!(report.break_events, 0);
        assert!(report.trace.iter().all(|o| o.pop_order == 1 && o.broke.is_none()));
    }
}

#[test]
fn same_seed_same_genome_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_symbiosis(&grid(a.path(), 4)).unwrap();
    let rb = run_symbiosis(&grid(b.path(), 4)).unwrap();
    let ca = load_checkpoint(&ra.checkpoint_path, None).unwrap();
    let cb = load_checkpoint(&rb.checkpoint_path, None).unwrap();
    assert_eq!(serde_json::to_string(&ca.universe).unwrap(), serde_json::to_string(&cb.universe).unwrap());
    assert_eq!(ca.content_digest(), cb.content_digest());
}

#[test]
fn some_grid_runs_break() {
    let dir = tempfile::tempdir().unwrap();
    let breaks: usize = (0..10).map(|s| run_symbiosis(&grid(dir.path(), s)).unwrap().break_events).sum();
    assert!(breaks > 0);
}
