//! Run configuration: a flat `key = value` file with `#` comments.
//!
//! Every key is optional. `sweep = ConTS, AbsGreedy` runs several policies
//! over the same data and seed; without it the single `policy` runs.
//! Relative paths resolve against the directory holding the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use conts_core::{
    AttrChooser, BtSchedule, ExperimentConfig, FmHyperParams, FrequencyFilter, PolicyConfig,
    PolicyKind, QuestionMode, QuestionSetting, SynthParams,
};

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    /// Generated in memory from `synth_*` keys.
    Synthetic,
    /// Read from `interactions`, `item_attrs` and optionally `taxonomy`.
    Files,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub sweep: Vec<PolicyKind>,
    pub data: DataSource,
    pub interactions: Option<PathBuf>,
    pub item_attrs: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub idmap: Option<PathBuf>,
    /// `None` means on for files and off for synthetic data.
    pub frequency_filter: Option<bool>,
    pub filter: FrequencyFilter,
    /// `synth.d` is ignored; the generator always uses `experiment.d`.
    pub synth: SynthParams,
    pub synth_seed: Option<u64>,
    pub split_fraction: f64,
    pub split_seed: Option<u64>,
    pub train_fm: bool,
    /// `fm.dim` and `fm.seed` are ignored; `d` and the data seed are used.
    pub fm: FmHyperParams,
    pub shuffle_sessions: bool,
    pub shuffle_seed: Option<u64>,
    pub save_posteriors: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            sweep: Vec::new(),
            data: DataSource::Synthetic,
            interactions: None,
            item_attrs: None,
            taxonomy: None,
            embeddings: None,
            idmap: None,
            frequency_filter: None,
            filter: FrequencyFilter::default(),
            synth: SynthParams::default(),
            synth_seed: None,
            split_fraction: 0.7,
            split_seed: None,
            train_fm: false,
            fm: FmHyperParams::default(),
            shuffle_sessions: false,
            shuffle_seed: None,
            save_posteriors: false,
        }
    }
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.experiment.seed
    }

    /// Seed for the generator and the FM initialisation.
    pub fn data_seed(&self) -> u64 {
        self.synth_seed.unwrap_or(self.experiment.seed)
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed.unwrap_or(self.experiment.seed)
    }

    pub fn shuffle_seed(&self) -> u64 {
        self.shuffle_seed.unwrap_or(self.experiment.seed)
    }

    pub fn filter_enabled(&self) -> bool {
        self.frequency_filter.unwrap_or(self.data == DataSource::Files)
    }

    /// One policy config per run, in sweep order.
    pub fn policies(&self) -> Vec<PolicyConfig> {
        if self.sweep.is_empty() {
            return vec![self.experiment.policy];
        }
        self.sweep
            .iter()
            .map(|&kind| PolicyConfig { kind, ..self.experiment.policy })
            .collect()
    }

    pub fn synth_params(&self) -> SynthParams {
        SynthParams { d: self.experiment.d, ..self.synth }
    }

    pub fn fm_params(&self) -> FmHyperParams {
        FmHyperParams { dim: self.experiment.d, seed: self.data_seed(), ..self.fm }
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.problems();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut errs = self.experiment.validate();
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            errs.push(format!("split_fraction must lie in (0, 1), got {}", self.split_fraction));
        }
        match self.data {
            DataSource::Synthetic => {
                if let Err(e) = self.synth_params().validate() {
                    errs.push(e.to_string());
                }
                if self.experiment.setting.mode == QuestionMode::Enumerated && self.synth.n_parents == 0 {
                    errs.push("enumerated questions need a taxonomy: set synth_parents".into());
                }
            }
            DataSource::Files => {
                if self.interactions.is_none() {
                    errs.push("data = files needs interactions".into());
                }
                if self.item_attrs.is_none() {
                    errs.push("data = files needs item_attrs".into());
                }
                if self.embeddings.is_none() && !self.train_fm {
                    errs.push("data = files needs embeddings unless train_fm = true".into());
                }
                if self.experiment.setting.mode == QuestionMode::Enumerated && self.taxonomy.is_none() {
                    errs.push("enumerated questions need a taxonomy file".into());
                }
            }
        }
        if self.train_fm {
            if let Err(e) = self.fm_params().validate() {
                errs.push(e.to_string());
            }
        }
        errs
    }

    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&read_to_string(path)?, base)
    }

    /// Parses and validates. All problems are reported together.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut raw = Raw::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                raw.errs.push(format!("line {}: expected key = value", i + 1));
                continue;
            };
            let k = k.trim().to_string();
            if raw.entries.insert(k.clone(), (i + 1, v.trim().to_string())).is_some() {
                raw.errs.push(format!("line {}: {k} given twice", i + 1));
            }
        }

        let mut c = RunConfig::default();
        let e = &mut c.experiment;
        raw.num("seed", &mut e.seed);
        raw.num("d", &mut e.d);
        raw.num("max_turns", &mut e.max_turns);
        raw.num("k", &mut e.k);
        raw.num("l", &mut e.l);
        raw.num("reward_fail_rec", &mut e.rewards.fail_rec);
        raw.num("reward_fail_ask", &mut e.rewards.fail_ask);
        raw.num("reward_suc_ask", &mut e.rewards.suc_ask);
        raw.num("reward_suc_rec", &mut e.rewards.suc_rec);
        if let Some(mode) = raw.with("question", QuestionMode::parse, "binary, enumerated or multi_attribute") {
            e.setting = QuestionSetting::for_mode(mode);
        }
        raw.num("attributes_per_ask", &mut e.setting.attributes_per_ask);
        let p = &mut e.policy;
        if let Some(kind) = raw.with("policy", PolicyKind::parse, "a policy name") {
            p.kind = kind;
        }
        raw.num("alpha", &mut p.alpha);
        if let Some(b) = raw.with("bt_schedule", BtSchedule::parse, "floor_5_log, 5_log, 10_log or 15_log") {
            p.bt_schedule = b;
        }
        raw.num("log_base", &mut p.log_base);
        if let Some(a) = raw.with("attr_chooser", AttrChooser::parse, "an attribute chooser") {
            p.attr_chooser = a;
        }
        raw.flag("freeze_b", &mut p.freeze_b);
        if let Some((n, v)) = raw.take("sweep") {
            for name in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                match PolicyKind::parse(name) {
                    Some(k) => c.sweep.push(k),
                    None => raw.errs.push(format!("line {n}: sweep: unknown policy {name:?}")),
                }
            }
        }

        if let Some(d) = raw.with(
            "data",
            |s| match s {
                "synthetic" => Some(DataSource::Synthetic),
                "files" => Some(DataSource::Files),
                _ => None,
            },
            "synthetic or files",
        ) {
            c.data = d;
        }
        for (key, slot) in [
            ("interactions", &mut c.interactions),
            ("item_attrs", &mut c.item_attrs),
            ("taxonomy", &mut c.taxonomy),
            ("embeddings", &mut c.embeddings),
            ("idmap", &mut c.idmap),
        ] {
            if let Some((_, v)) = raw.take(key).filter(|(_, v)| !v.is_empty()) {
                *slot = Some(base.join(v));
            }
        }
        if raw.entries.contains_key("frequency_filter") {
            let mut on = false;
            raw.flag("frequency_filter", &mut on);
            c.frequency_filter = Some(on);
        }
        raw.num("min_user_records", &mut c.filter.min_user_records);
        raw.num("min_attr_occurrences", &mut c.filter.min_attr_occurrences);

        let s = &mut c.synth;
        raw.num("synth_users", &mut s.n_users);
        raw.num("synth_items", &mut s.n_items);
        raw.num("synth_attrs", &mut s.n_attrs);
        raw.num("synth_attrs_min", &mut s.attrs_per_item.0);
        raw.num("synth_attrs_max", &mut s.attrs_per_item.1);
        raw.num("synth_records_per_user", &mut s.records_per_user);
        raw.num("synth_preferred_attrs", &mut s.preferred_attrs);
        raw.num("synth_noise", &mut s.noise);
        raw.num("synth_parents", &mut s.n_parents);
        raw.opt_num("synth_seed", &mut c.synth_seed);
        raw.num("split_fraction", &mut c.split_fraction);
        raw.opt_num("split_seed", &mut c.split_seed);

        raw.flag("train_fm", &mut c.train_fm);
        raw.num("fm_lr", &mut c.fm.learning_rate);
        raw.num("fm_reg", &mut c.fm.l2_reg);
        raw.num("fm_epochs_item", &mut c.fm.epochs_item);
        raw.num("fm_epochs_attr", &mut c.fm.epochs_attr);
        raw.num("fm_negatives", &mut c.fm.negatives_per_positive);
        raw.num("fm_early_stop_tol", &mut c.fm.early_stop_tol);
        raw.num("fm_init_scale", &mut c.fm.init_scale);

        raw.flag("shuffle_sessions", &mut c.shuffle_sessions);
        raw.opt_num("shuffle_seed", &mut c.shuffle_seed);
        raw.flag("save_posteriors", &mut c.save_posteriors);

        for (k, (n, _)) in &raw.entries {
            raw.errs.push(format!("line {n}: unknown key {k:?}"));
        }
        let mut errs = raw.errs;
        errs.extend(c.problems());
        if errs.is_empty() {
            Ok(c)
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Every key with its current value; parsing the output gives `self`
    /// back (paths are written as stored).
    pub fn to_text(&self) -> String {
        let e = &self.experiment;
        let p = &e.policy;
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("seed", &e.seed);
        kv("d", &e.d);
        kv("max_turns", &e.max_turns);
        kv("k", &e.k);
        kv("l", &e.l);
        kv("reward_fail_rec", &e.rewards.fail_rec);
        kv("reward_fail_ask", &e.rewards.fail_ask);
        kv("reward_suc_ask", &e.rewards.suc_ask);
        kv("reward_suc_rec", &e.rewards.suc_rec);
        kv("question", &e.setting.mode.name());
        kv("attributes_per_ask", &e.setting.attributes_per_ask);
        kv("policy", &p.kind.name());
        let sweep: Vec<&str> = self.sweep.iter().map(|k| k.name()).collect();
        kv("sweep", &sweep.join(", "));
        kv("alpha", &p.alpha);
        kv("bt_schedule", &p.bt_schedule.name());
        kv("log_base", &p.log_base);
        kv("attr_chooser", &p.attr_chooser.name());
        kv("freeze_b", &p.freeze_b);
        kv(
            "data",
            &match self.data {
                DataSource::Synthetic => "synthetic",
                DataSource::Files => "files",
            },
        );
        for (k, v) in [
            ("interactions", &self.interactions),
            ("item_attrs", &self.item_attrs),
            ("taxonomy", &self.taxonomy),
            ("embeddings", &self.embeddings),
            ("idmap", &self.idmap),
        ] {
            if let Some(v) = v {
                kv(k, &v.display());
            }
        }
        if let Some(f) = self.frequency_filter {
            kv("frequency_filter", &f);
        }
        kv("min_user_records", &self.filter.min_user_records);
        kv("min_attr_occurrences", &self.filter.min_attr_occurrences);
        let s = &self.synth;
        kv("synth_users", &s.n_users);
        kv("synth_items", &s.n_items);
        kv("synth_attrs", &s.n_attrs);
        kv("synth_attrs_min", &s.attrs_per_item.0);
        kv("synth_attrs_max", &s.attrs_per_item.1);
        kv("synth_records_per_user", &s.records_per_user);
        kv("synth_preferred_attrs", &s.preferred_attrs);
        kv("synth_noise", &s.noise);
        kv("synth_parents", &s.n_parents);
        if let Some(v) = self.synth_seed {
            kv("synth_seed", &v);
        }
        kv("split_fraction", &self.split_fraction);
        if let Some(v) = self.split_seed {
            kv("split_seed", &v);
        }
        kv("train_fm", &self.train_fm);
        kv("fm_lr", &self.fm.learning_rate);
        kv("fm_reg", &self.fm.l2_reg);
        kv("fm_epochs_item", &self.fm.epochs_item);
        kv("fm_epochs_attr", &self.fm.epochs_attr);
        kv("fm_negatives", &self.fm.negatives_per_positive);
        kv("fm_early_stop_tol", &self.fm.early_stop_tol);
        kv("fm_init_scale", &self.fm.init_scale);
        kv("shuffle_sessions", &self.shuffle_sessions);
        if let Some(v) = self.shuffle_seed {
            kv("shuffle_seed", &v);
        }
        kv("save_posteriors", &self.save_posteriors);
        out
    }
}

#[derive(Default)]
struct Raw {
    entries: BTreeMap<String, (usize, String)>,
    errs: Vec<String>,
}

impl Raw {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn with<T>(&mut self, key: &str, parse: impl Fn(&str) -> Option<T>, expected: &str) -> Option<T> {
        let (n, v) = self.take(key)?;
        let out = parse(&v);
        if out.is_none() {
            self.errs.push(format!("line {n}: {key}: expected {expected}, got {v:?}"));
        }
        out
    }

    fn num<T: FromStr>(&mut self, key: &str, slot: &mut T) {
        if let Some(v) = self.with(key, |s| s.parse().ok(), "a number") {
            *slot = v;
        }
    }

    fn opt_num<T: FromStr>(&mut self, key: &str, slot: &mut Option<T>) {
        if let Some(v) = self.with(key, |s| s.parse().ok(), "a number") {
            *slot = Some(v);
        }
    }

    fn flag(&mut self, key: &str, slot: &mut bool) {
        if let Some(v) = self.with(key, |s| s.parse().ok(), "true or false") {
            *slot = v;
        }
    }
}
