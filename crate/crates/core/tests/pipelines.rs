mod common;

use std::io::Write;

use geozero_core::config::{ConfigError, RepoConfig};
use geozero_core::mining::{score_trials, select_hard, split_instruct, stage1_filter, FilterStats, HardImages};
use geozero_core::reward::{RewardConfig, Scorer};
use geozero_core::sample::{Sample, Task};
use geozero_core::thinkscore::ThinkConfig;
use geozero_core::EmbeddingProvider;
use proptest::prelude::*;

fn pipeline(records: &[common::FixtureRecord], quota: usize) -> (Vec<String>, Vec<String>) {
    let mut stats = FilterStats::default();
    let scored: Vec<_> = stage1_filter(records.iter().map(|r| r.to_prediction()), &mut stats)
        .map(|r| score_trials(r, 3).unwrap())
        .collect();
    assert_eq!(stats.seen, records.len());
    let sel = select_hard(scored, quota).unwrap();
    let (kept, report) = split_instruct(records.iter().map(|r| r.to_manifest()), &HardImages::from_pool(&sel.pool));
    assert_eq!(report.raw, records.len());
    (
        sel.pool.iter().map(|r| r.record.sample_id.clone()).collect(),
        kept.iter().map(|m| m.rest["sample_id"].as_str().unwrap().to_owned()).collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mining_matches_oracle(n in 1usize..=200, seed in any::<u64>(), quota in 1usize..8) {
        let records = common::mining_fixture(n, seed);
        prop_assert_eq!(pipeline(&records, quota), common::mining_oracle(&records, quota));
    }

    #[test]
    fn stage1_judgements_match_oracle(seed in any::<u64>()) {
        for r in common::mining_fixture(40, seed) {
            let p = r.to_prediction();
            let core = geozero_core::mining::judge(r.task, &r.prediction, &p.reference);
            prop_assert_eq!(core, common::oracle_judge(r.task, &r.prediction, &r.reference), "{:?}", r);
        }
    }

    #[test]
    fn reward_bounds_and_think_oracle(seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let provider = EmbeddingProvider::feature_hash(384).unwrap();
        let (rc, tc) = (RewardConfig::default(), ThinkConfig::default());
        let scorer = Scorer::new(&provider, &rc, &tc);
        let thinking = common::random_thinking(&mut rng);
        let answer = common::random_answer(&mut rng);
        let sample = Sample {
            sample_id: "p".into(),
            task: Task::IC,
            instruction: String::new(),
            reference: "aircraft parked near the terminal".into(),
            image_id: String::new(),
        };
        let b = scorer.total_reward(&sample, &format!("{thinking} <answer>{answer}</answer>")).unwrap();
        prop_assert!(b.format_ok);
        prop_assert!((0.0..=1.0 + rc.think_weight).contains(&b.r_total));
        let want = common::think_oracle(&thinking, &answer).s_t;
        prop_assert!((b.think.s_t - want).abs() < 1e-12);
    }
}

#[test]
fn config_file_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("geozero.toml");
    let mut cfg = RepoConfig::default();
    cfg.reward.think_weight = 0.5;
    cfg.toy.iterations = 12;
    std::fs::write(&path, cfg.dump()).unwrap();
    let loaded = RepoConfig::from_toml(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(loaded, cfg);

    let bad = dir.path().join("bad.toml");
    let mut f = std::fs::File::create(&bad).unwrap();
    writeln!(f, "[reward.caption_weights]\nbleu = 0.05\n[grpo]\nfoo = 1").unwrap();
    let err = RepoConfig::from_toml(&std::fs::read_to_string(&bad).unwrap()).unwrap_err();
    assert_eq!(err.violations(), vec!["grpo.foo: unknown key"]);
    let err = RepoConfig::from_toml("[reward.caption_weights]\nbleu = 0.05\n").unwrap_err();
    assert!(matches!(err, ConfigError::Invalid(ref v) if v[0].contains("sum to 1")));
    assert!(matches!(RepoConfig::from_toml("[grpo"), Err(ConfigError::Parse(_))));
    assert!(matches!(
        RepoConfig::load(Some(&dir.path().join("missing.toml"))),
        Err(ConfigError::Io { .. })
    ));
}
