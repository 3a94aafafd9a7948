//! Pipeline configuration and its validation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::clean::CleanRules;
use crate::learn::{Family, ForestParams, KnnParams, LinearParams, ModelKind, ModelSpec, SvmParams, TreeParams};

/// How rows are split into cross-validation folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "String", try_from = "String"))]
pub enum CvMode {
    #[default]
    LeaveOneSessionOut,
    KFold(usize),
}

impl fmt::Display for CvMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CvMode::LeaveOneSessionOut => f.write_str("loso"),
            CvMode::KFold(k) => write!(f, "kfold:{k}"),
        }
    }
}

impl FromStr for CvMode {
    type Err = String;

    /// Accepts `loso` or `kfold:K`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("loso") {
            return Ok(CvMode::LeaveOneSessionOut);
        }
        if let Some(k) = s.strip_prefix("kfold:") {
            return k
                .trim()
                .parse()
                .map(CvMode::KFold)
                .map_err(|_| format!("bad fold count in {s:?}"));
        }
        Err(format!(
            "unknown cross-validation mode {s:?} (expected loso or kfold:K)"
        ))
    }
}

impl From<CvMode> for String {
    fn from(m: CvMode) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for CvMode {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

/// Hyperparameters for every classifier family.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ModelParams {
    pub knn: KnnParams,
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub linear: LinearParams,
    pub svm: SvmParams,
}

impl ModelParams {
    pub fn spec(&self, family: Family) -> ModelSpec {
        let kind = match family {
            Family::NearestNeighbors => ModelKind::NearestNeighbors(self.knn.clone()),
            Family::DecisionTree => ModelKind::DecisionTree(self.tree.clone()),
            Family::RandomForest => ModelKind::RandomForest(self.forest.clone()),
            Family::Linear => ModelKind::Linear(self.linear.clone()),
            Family::SvmRbf => ModelKind::SvmRbf(self.svm.clone()),
        };
        ModelSpec::new(kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PipelineConfig {
    /// Band-power rows per second, for recordings whose schema is read from
    /// a file header.
    pub sample_rate_hz: f64,
    /// Rows per feature window.
    pub window_rows: usize,
    /// Rows shared by consecutive windows; must be below `window_rows`.
    pub window_overlap_rows: usize,
    /// Also emit per-window standard deviations.
    pub feature_std: bool,
    /// Windows per time-majority-voting block.
    pub tmv_block_windows: usize,
    pub cv: CvMode,
    #[cfg_attr(feature = "serde", serde(with = "seed_repr"))]
    pub master_seed: u64,
    /// Task vocabulary in id order. Empty means "order of first appearance".
    pub tasks: Vec<String>,
    /// Families to cross-validate.
    pub families: Vec<Family>,
    pub clean: CleanRules,
    pub models: ModelParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: crate::types::DEFAULT_SAMPLE_RATE_HZ,
            window_rows: 10,
            window_overlap_rows: 0,
            feature_std: false,
            tmv_block_windows: 20,
            cv: CvMode::LeaveOneSessionOut,
            master_seed: 0,
            tasks: Vec::new(),
            families: Family::REGISTRY.to_vec(),
            clean: CleanRules::default(),
            models: ModelParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn specs(&self) -> Vec<ModelSpec> {
        self.families.iter().map(|f| self.models.spec(*f)).collect()
    }
}

/// One bad field, named by its config-file key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Returns the config unchanged when every bound holds, otherwise all
/// violations found.
pub fn validate_config(config: PipelineConfig) -> Result<PipelineConfig, Vec<ConfigViolation>> {
    let mut v = Vec::new();
    let mut check = |ok: bool, field: &'static str, message: String| {
        if !ok {
            v.push(ConfigViolation { field, message });
        }
    };
    let c = &config;
    check(
        c.sample_rate_hz.is_finite() && c.sample_rate_hz > 0.0,
        "sample_rate_hz",
        "must be positive".into(),
    );
    check(c.window_rows >= 1, "window_rows", "must be at least 1".into());
    check(
        c.window_overlap_rows < c.window_rows,
        "window_overlap_rows",
        format!("must be less than window_rows ({})", c.window_rows),
    );
    check(
        c.tmv_block_windows >= 1,
        "tmv_block_windows",
        "must be at least 1".into(),
    );
    if let CvMode::KFold(k) = c.cv {
        check(k >= 2, "cv", format!("kfold needs k >= 2, got {k}"));
    }
    let mut seen_tasks: Vec<&str> = vec![];
    for t in &c.tasks {
        check(!t.is_empty(), "tasks", "task names must be non-empty".into());
        check(
            !seen_tasks.contains(&t.as_str()),
            "tasks",
            format!("duplicate task {t:?}"),
        );
        seen_tasks.push(t);
    }
    check(
        c.families.len() >= 2,
        "families",
        "at least two families are needed to pick a top two".into(),
    );
    for (i, f) in c.families.iter().enumerate() {
        check(
            !c.families[..i].contains(f),
            "families",
            format!("duplicate family {f}"),
        );
    }

    let r = &c.clean;
    check(
        r.band_power_min.is_finite(),
        "clean.band_power_min",
        "must be finite".into(),
    );
    check(
        r.band_power_max.is_finite() && r.band_power_min < r.band_power_max,
        "clean.band_power_max",
        format!("must be finite and above clean.band_power_min ({})", r.band_power_min),
    );
    check(r.flatline_run >= 2, "clean.flatline_run", "must be at least 2".into());

    let m = &c.models;
    check(m.knn.k >= 1, "models.knn.k", "must be at least 1".into());
    check_tree(
        &mut check,
        &m.tree,
        "models.tree.max_depth",
        "models.tree.min_samples_split",
    );
    check_tree(
        &mut check,
        &m.forest.tree(),
        "models.forest.max_depth",
        "models.forest.min_samples_split",
    );
    check(
        m.forest.n_trees >= 1,
        "models.forest.n_trees",
        "must be at least 1".into(),
    );
    check(
        m.forest.max_features != Some(0),
        "models.forest.max_features",
        "must be at least 1 when set".into(),
    );
    check(
        m.linear.learning_rate.is_finite() && m.linear.learning_rate > 0.0,
        "models.linear.learning_rate",
        "must be positive".into(),
    );
    check(
        m.linear.epochs >= 1,
        "models.linear.epochs",
        "must be at least 1".into(),
    );
    check(
        m.linear.l2.is_finite() && m.linear.l2 >= 0.0,
        "models.linear.l2",
        "must be non-negative".into(),
    );
    check(
        m.svm.c.is_finite() && m.svm.c > 0.0,
        "models.svm.c",
        "must be positive".into(),
    );
    check(
        m.svm.gamma.is_none_or(|g| g.is_finite() && g > 0.0),
        "models.svm.gamma",
        "must be positive when set".into(),
    );
    check(
        m.svm.tol.is_finite() && m.svm.tol > 0.0,
        "models.svm.tol",
        "must be positive".into(),
    );
    check(
        m.svm.max_passes >= 1,
        "models.svm.max_passes",
        "must be at least 1".into(),
    );

    if v.is_empty() {
        Ok(config)
    } else {
        Err(v)
    }
}

fn check_tree(
    check: &mut impl FnMut(bool, &'static str, String),
    t: &TreeParams,
    depth_key: &'static str,
    split_key: &'static str,
) {
    check(t.max_depth != Some(0), depth_key, "must be at least 1 when set".into());
    check(t.min_samples_split >= 2, split_key, "must be at least 2".into());
}

/// TOML integers are signed 64-bit, so seeds above `i64::MAX` are written
/// as strings.
#[cfg(feature = "serde")]
mod seed_repr {
    use alloc::string::{String, ToString};
    use serde::{de, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*v) {
            Ok(i) => s.serialize_i64(i),
            Err(_) => s.serialize_str(&v.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = u64;
            fn expecting(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
                f.write_str("an unsigned 64-bit seed")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<u64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<u64, E> {
                u64::try_from(v).map_err(|_| E::custom("seed must be non-negative"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<u64, E> {
                v.trim().parse().map_err(E::custom)
            }
            fn visit_string<E: de::Error>(self, v: String) -> Result<u64, E> {
                self.visit_str(&v)
            }
        }
        d.deserialize_any(V)
    }
}
