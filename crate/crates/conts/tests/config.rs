use std::path::Path;

use conts::config::{DataSource, RunConfig};
use conts::Error;
use conts_core::{BtSchedule, PolicyKind, QuestionMode};

fn parse(text: &str) -> Result<RunConfig, Error> {
    RunConfig::parse(text, Path::new(""))
}

fn errors(text: &str) -> Vec<String> {
    match parse(text) {
        Err(Error::Config(errs)) => errs,
        other => panic!("expected config errors, got {other:?}"),
    }
}

#[test]
fn empty_file_gives_published_defaults() {
    let c = parse("# nothing here\n\n").unwrap();
    let e = &c.experiment;
    assert_eq!((e.d, e.max_turns, e.k, e.l), (64, 15, 10, 0.01));
    let r = e.rewards;
    assert_eq!((r.fail_rec, r.fail_ask, r.suc_ask, r.suc_rec), (-0.15, -0.03, 5.0, 5.0));
    assert_eq!(c, RunConfig::default());
    assert_eq!(c.policies().len(), 1);
}

#[test]
fn defaults_round_trip_exactly() {
    let c = RunConfig::default();
    let text = c.to_text();
    for line in ["d = 64", "max_turns = 15", "k = 10", "l = 0.01", "reward_fail_rec = -0.15", "reward_fail_ask = -0.03", "reward_suc_ask = 5", "reward_suc_rec = 5"] {
        assert!(text.lines().any(|l| l == line), "missing {line:?}");
    }
    let back = parse(&text).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.to_text(), text);
}

#[test]
fn every_key_round_trips() {
    let text = "\
seed = 9
d = 8
max_turns = 7
k = 5
l = 0.25
question = multi_attribute
attributes_per_ask = 3
policy = ConUCB
sweep = ConTS, SeamlessUCB,ConTS-exp
alpha = 0.5
bt_schedule = floor_5_log
log_base = 10
freeze_b = true
data = files
interactions = /data/i.tsv
item_attrs = /data/a.tsv
embeddings = /data/e.emb
idmap = /data/e.emb.idmap
frequency_filter = false
min_user_records = 3
synth_noise = 0.3
split_fraction = 0.8
split_seed = 4
shuffle_sessions = true
shuffle_seed = 12
save_posteriors = true
";
    let c = parse(text).unwrap();
    assert_eq!(c.experiment.setting.mode, QuestionMode::MultiAttribute);
    assert_eq!(c.experiment.setting.attributes_per_ask, 3);
    assert_eq!(c.experiment.policy.bt_schedule, BtSchedule::Floor5Log);
    assert_eq!(c.sweep, vec![PolicyKind::ConTS, PolicyKind::SeamlessUcb, PolicyKind::ConTSNoExp]);
    let kinds: Vec<PolicyKind> = c.policies().iter().map(|p| p.kind).collect();
    assert_eq!(kinds, c.sweep);
    assert!(c.policies().iter().all(|p| p.alpha == 0.5 && p.freeze_b));
    assert_eq!(c.data, DataSource::Files);
    assert!(!c.filter_enabled());
    assert_eq!((c.split_seed(), c.data_seed(), c.shuffle_seed()), (4, 9, 12));
    assert_eq!(parse(&c.to_text()).unwrap(), c);
}

#[test]
fn relative_paths_follow_the_config_file() {
    let c = RunConfig::parse("data = files\ninteractions = i.tsv\nitem_attrs = a.tsv\nembeddings = e.emb\n", Path::new("/x/y")).unwrap();
    assert_eq!(c.interactions.as_deref(), Some(Path::new("/x/y/i.tsv")));
    assert!(c.filter_enabled());
}

#[test]
fn all_errors_reported_together() {
    let errs = errors("d = 0\nk = ten\nbogus = 1\nsweep = ConTS, Nope\nl = -1\nd = 3\nnot a pair\n");
    let joined = errs.join("\n");
    for needle in ["k: expected a number", "unknown key \"bogus\"", "unknown policy \"Nope\"", "d given twice", "line 7"] {
        assert!(joined.contains(needle), "{needle:?} not in\n{joined}");
    }
    let errs = errors("k = 0\nl = -1\nmax_turns = 0\n");
    assert_eq!(errs.len(), 3, "{errs:?}");
}

#[test]
fn data_source_requirements() {
    let errs = errors("data = files\n");
    assert_eq!(errs.len(), 3, "{errs:?}");
    let errs = errors("data = files\ninteractions = i\nitem_attrs = a\nquestion = enumerated\ntrain_fm = true\n");
    assert_eq!(errs.len(), 1, "{errs:?}");
    assert!(errors("question = enumerated\n")[0].contains("synth_parents"));
    assert!(parse("question = enumerated\nsynth_parents = 4\n").is_ok());
    assert!(!errors("question = binary\nattributes_per_ask = 2\n").is_empty());
}
