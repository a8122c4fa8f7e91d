#![allow(dead_code)]

use conts_core::{
    generate_synthetic, split_cold_start, DatasetSplit, EmbeddingStore, QuestionMode,
    QuestionSetting, SynthParams, SyntheticDataset,
};

pub struct Fixture {
    pub ds: SyntheticDataset,
    pub split: DatasetSplit,
    /// Ground-truth vectors with only the existing users kept.
    pub store: EmbeddingStore,
}

pub fn fixture(params: SynthParams, seed: u64) -> Fixture {
    let ds = generate_synthetic(&params, seed).unwrap();
    let split = split_cold_start(&ds.log, 0.7, seed).unwrap();
    let mut store = ds.ground_truth.clone();
    store.retain_users(&split.existing_users);
    Fixture { ds, split, store }
}

pub fn small(setting: &QuestionSetting, seed: u64) -> Fixture {
    let params = SynthParams {
        n_users: 60,
        n_items: 120,
        n_attrs: 12,
        d: 8,
        n_parents: if setting.mode == QuestionMode::Enumerated { 4 } else { 0 },
        ..SynthParams::default()
    };
    fixture(params, seed)
}

pub fn settings() -> [QuestionSetting; 3] {
    [
        QuestionSetting::binary(),
        QuestionSetting::enumerated(),
        QuestionSetting::multi_attribute(4),
    ]
}
