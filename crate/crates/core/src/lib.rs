//! Conversational Thompson sampling for cold-start recommendation.
//!
//! Items and attributes share one embedding space and one arm pool. Each
//! turn the policy samples a user vector from a Gaussian posterior, scores
//! every candidate arm and either asks about the best attribute(s) or
//! recommends the top-k items, then folds the user's answer back into the
//! posterior.
//!
//! The crate is `no_std` (with `alloc`): file formats, configuration files
//! and the experiment driver live in the `conts` crate.

#![no_std]

extern crate alloc;

pub mod bandit;
pub mod config;
pub mod embedding;
pub mod error;
pub mod fm;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod policy;
pub mod rng;
pub mod simulator;
pub mod synth;

pub use bandit::{
    debias_reward, init_posterior, sample_user, score_arm, ucb_score, update_posterior, ArmKind,
    ArmRef, ArmSpace, Maintenance, PosteriorState,
};
pub use config::ExperimentConfig;
pub use embedding::{EmbeddingStore, Param};
pub use error::{Error, Result};
pub use fm::{bpr_step, fm_score_item, train_fm, BprTask, BprTriple, FmHyperParams};
pub use metrics::{compute_metrics, MetricsReport};
pub use model::{
    filter_by_frequency, split_cold_start, AttrId, Catalog, DatasetSplit, FilteredDataset,
    FrequencyFilter,
    InteractionLog, ItemId, ItemRecord, ParentId, QuestionMode, QuestionSetting, RewardTable,
    Taxonomy, UserId,
};
pub use policy::{
    observe_feedback, select_action, Action, AttrChooser, BtSchedule, PolicyConfig, PolicyKind,
    PolicyState,
};
pub use simulator::{
    apply_feedback, run_session, run_user, simulate_feedback, Feedback, SessionResult,
    SessionState, SimEnv,
};
pub use synth::{generate_synthetic, SynthParams, SyntheticDataset};
