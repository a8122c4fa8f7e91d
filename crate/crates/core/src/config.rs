use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{QuestionMode, QuestionSetting, RewardTable};
use crate::policy::PolicyConfig;

/// Online-stage parameters of one run. Defaults follow the published
/// setup: `d = 64`, `T = 15`, `k = 10`, `l = 0.01`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub max_turns: usize,
    pub k: usize,
    pub l: f64,
    pub rewards: RewardTable,
    pub setting: QuestionSetting,
    pub seed: u64,
    pub policy: PolicyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 64,
            max_turns: 15,
            k: 10,
            l: 0.01,
            rewards: RewardTable::default(),
            setting: QuestionSetting::binary(),
            seed: 0,
            policy: PolicyConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.d == 0 {
            errs.push(String::from("d must be at least 1"));
        }
        if self.max_turns == 0 {
            errs.push(String::from("T must be at least 1"));
        }
        if self.k == 0 {
            errs.push(String::from("k must be at least 1"));
        }
        if !(self.l >= 0.0 && self.l.is_finite()) {
            errs.push(format!("l must be finite and >= 0, got {}", self.l));
        }
        if let Err(e) = self.rewards.validate() {
            errs.push(format!("{e}"));
        }
        if self.setting.attributes_per_ask == 0 {
            errs.push(String::from("attributes_per_ask must be positive"));
        }
        if self.setting.mode == QuestionMode::Binary && self.setting.attributes_per_ask != 1 {
            errs.push(String::from("binary questions ask exactly one attribute"));
        }
        if let Err(e) = self.policy.validate() {
            errs.push(format!("{e}"));
        }
        errs
    }
}
