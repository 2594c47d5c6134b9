//! Domain types shared across the engine: arms, weeks, policies, Beta
//! posteriors, weekly batch observations and the experiment configuration.
//!
//! Arms are 0-based in memory and 1-based in every file and report.

use std::fmt;

use thiserror::Error;

/// Tolerance used when checking that allocation fractions sum to one.
pub const SPLIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("reward count {opened} exceeds assigned count {assigned}")]
    RewardExceedsAssigned { assigned: u64, opened: u64 },
    #[error("week must be >= 1, got {0}")]
    WeekOutOfRange(u32),
    #[error("Beta parameters must be finite and >= 1, got ({alpha}, {beta})")]
    InvalidBeta { alpha: f64, beta: f64 },
    #[error("unknown policy token `{0}`")]
    UnknownPolicy(String),
}

/// Index of an arm, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArmId(usize);

impl ArmId {
    pub const fn new(index: usize) -> Self {
        ArmId(index)
    }

    /// Builds an arm from its 1-based external number.
    pub fn from_one_based(number: usize) -> Option<Self> {
        number.checked_sub(1).map(ArmId)
    }

    pub const fn index(self) -> usize {
        self.0
    }

    pub const fn one_based(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.one_based())
    }
}

/// A 1-based experiment week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Week(u32);

impl Week {
    pub fn new(t: u32) -> Result<Self, ModelError> {
        if t == 0 {
            Err(ModelError::WeekOutOfRange(t))
        } else {
            Ok(Week(t))
        }
    }

    pub const fn get(self) -> u32 {
        self.0
    }

    /// Zero-based position of the week in per-week vectors.
    pub const fn offset(self) -> usize {
        (self.0 - 1) as usize
    }
}

impl fmt::Display for Week {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The three allocation policies run side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyId {
    /// Uniform random allocation.
    Ur,
    /// Thompson Sampling updated from its own observations.
    Ts,
    /// Thompson Sampling whose prior is fed half by its own (or TS's)
    /// observations and half by the uniform allocation.
    TsDagger,
}

impl PolicyId {
    /// File and report order.
    pub const ALL: [PolicyId; 3] = [PolicyId::Ur, PolicyId::Ts, PolicyId::TsDagger];

    pub const fn position(self) -> usize {
        match self {
            PolicyId::Ur => 0,
            PolicyId::Ts => 1,
            PolicyId::TsDagger => 2,
        }
    }

    /// ASCII token used in CSV and config files.
    pub const fn token(self) -> &'static str {
        match self {
            PolicyId::Ur => "UR",
            PolicyId::Ts => "TS",
            PolicyId::TsDagger => "TSD",
        }
    }

    /// Human-readable label.
    pub const fn label(self) -> &'static str {
        match self {
            PolicyId::Ur => "UR",
            PolicyId::Ts => "TS",
            PolicyId::TsDagger => "TS\u{2020}",
        }
    }

    pub fn from_token(token: &str) -> Result<Self, ModelError> {
        match token {
            "UR" => Ok(PolicyId::Ur),
            "TS" => Ok(PolicyId::Ts),
            "TSD" => Ok(PolicyId::TsDagger),
            other => Err(ModelError::UnknownPolicy(other.to_string())),
        }
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Beta posterior pseudo-counts for one arm.
///
/// Stored as reals because the hybrid policy adds half-weighted counts.
/// Both parameters stay finite and at least 1: they start at (1, 1) and
/// updates only add non-negative amounts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

impl BetaParams {
    pub const UNIFORM: BetaParams = BetaParams { alpha: 1.0, beta: 1.0 };

    pub fn new(alpha: f64, beta: f64) -> Result<Self, ModelError> {
        if alpha.is_finite() && beta.is_finite() && alpha >= 1.0 && beta >= 1.0 {
            Ok(BetaParams { alpha, beta })
        } else {
            Err(ModelError::InvalidBeta { alpha, beta })
        }
    }

    pub const fn alpha(&self) -> f64 {
        self.alpha
    }

    pub const fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Adds `weight` successes and `weight` failures scaled from a batch.
    pub(crate) fn add_weighted(self, successes: u64, failures: u64, weight: f64) -> Self {
        debug_assert!(weight >= 0.0);
        BetaParams {
            alpha: self.alpha + weight * successes as f64,
            beta: self.beta + weight * failures as f64,
        }
    }
}

impl Default for BetaParams {
    fn default() -> Self {
        Self::UNIFORM
    }
}

/// Assigned and opened counts for one (week, policy, arm) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchObservation {
    week: Week,
    policy: PolicyId,
    arm: ArmId,
    assigned: u64,
    opened: u64,
}

impl BatchObservation {
    pub fn new(
        week: Week,
        policy: PolicyId,
        arm: ArmId,
        assigned: u64,
        opened: u64,
    ) -> Result<Self, ModelError> {
        if opened > assigned {
            return Err(ModelError::RewardExceedsAssigned { assigned, opened });
        }
        Ok(BatchObservation {
            week,
            policy,
            arm,
            assigned,
            opened,
        })
    }

    pub const fn week(&self) -> Week {
        self.week
    }

    pub const fn policy(&self) -> PolicyId {
        self.policy
    }

    pub const fn arm(&self) -> ArmId {
        self.arm
    }

    /// Students assigned (n).
    pub const fn assigned(&self) -> u64 {
        self.assigned
    }

    /// Emails opened (r).
    pub const fn opened(&self) -> u64 {
        self.opened
    }

    pub const fn failures(&self) -> u64 {
        self.assigned - self.opened
    }

    /// Sort key matching file row order: week, policy, arm.
    pub fn key(&self) -> (Week, PolicyId, ArmId) {
        (self.week, self.policy, self.arm)
    }
}

/// A violated configuration invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("SPLIT_NOT_NORMALIZED: `{field}` fractions {values:?} must be non-negative and sum to 1")]
    SplitNotNormalized {
        field: &'static str,
        values: Vec<f64>,
    },
    #[error("BAD_WEEK_ORDERING: {detail}")]
    BadWeekOrdering { field: &'static str, detail: String },
    #[error("EMPTY_COHORT: {0}")]
    EmptyCohort(String),
    #[error("BAD_DIMENSIONS: {detail}")]
    BadDimensions { field: &'static str, detail: String },
}

impl ConfigError {
    /// Name of the configuration key the error refers to.
    pub fn field(&self) -> &'static str {
        match self {
            ConfigError::SplitNotNormalized { field, .. } => field,
            ConfigError::BadWeekOrdering { field, .. } => field,
            ConfigError::EmptyCohort(_) => "cohort",
            ConfigError::BadDimensions { field, .. } => field,
        }
    }
}

/// Every invariant a configuration violated.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct ValidationReport(pub Vec<ConfigError>);

/// Unvalidated experiment settings, as read from a file or built in code.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDraft {
    pub arms: usize,
    pub horizon: u32,
    pub burn_in: u32,
    pub ts_intro_week: u32,
    pub ts_dagger_intro_week: u32,
    pub cohort_sizes: Vec<u64>,
    /// (UR, TS, TS†) fractions for weeks where all three allocate.
    pub split: [f64; 3],
    /// (UR, TS) fractions for weeks where only UR and TS allocate.
    pub transition_split: [f64; 2],
    pub seed: u64,
}

impl ConfigDraft {
    /// The deployed schedule: three arms, thirteen weeks, five shared
    /// uniform weeks, TS from week 6, TS† from week 7, enrollment
    /// declining linearly from 1119 to 1025.
    pub fn deployment_defaults() -> Self {
        ConfigDraft {
            arms: 3,
            horizon: 13,
            burn_in: 5,
            ts_intro_week: 6,
            ts_dagger_intro_week: 7,
            cohort_sizes: linear_cohort(1119, 1025, 13),
            split: [0.5, 0.25, 0.25],
            transition_split: [0.5, 0.5],
            seed: 42,
        }
    }
}

/// Cohort sizes linearly interpolated from `start` to `end`, rounded to
/// the nearest student.
pub fn linear_cohort(start: u64, end: u64, horizon: u32) -> Vec<u64> {
    match horizon {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..horizon)
            .map(|i| {
                let frac = f64::from(i) / f64::from(horizon - 1);
                (start as f64 + (end as f64 - start as f64) * frac).round() as u64
            })
            .collect(),
    }
}

pub fn constant_cohort(size: u64, horizon: u32) -> Vec<u64> {
    vec![size; horizon as usize]
}

fn split_is_normalized(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite() && *v >= 0.0)
        && (values.iter().sum::<f64>() - 1.0).abs() <= SPLIT_TOLERANCE
}

/// Checks every configuration invariant and reports all violations at once.
pub fn validate_config(draft: ConfigDraft) -> Result<ExperimentConfig, ValidationReport> {
    let mut errors = Vec::new();
    if draft.arms < 2 {
        errors.push(ConfigError::BadDimensions {
            field: "arms",
            detail: format!("arms must be >= 2, got {}", draft.arms),
        });
    }
    if draft.horizon < 1 {
        errors.push(ConfigError::BadDimensions {
            field: "horizon",
            detail: format!("horizon must be >= 1, got {}", draft.horizon),
        });
    }
    if draft.burn_in >= draft.ts_intro_week {
        errors.push(ConfigError::BadWeekOrdering {
            field: "burn_in",
            detail: format!(
                "burn_in ({}) must be < ts_intro_week ({})",
                draft.burn_in, draft.ts_intro_week
            ),
        });
    }
    if draft.ts_intro_week > draft.ts_dagger_intro_week {
        errors.push(ConfigError::BadWeekOrdering {
            field: "ts_intro_week",
            detail: format!(
                "ts_intro_week ({}) must be <= ts_dagger_intro_week ({})",
                draft.ts_intro_week, draft.ts_dagger_intro_week
            ),
        });
    }
    if draft.ts_dagger_intro_week > draft.horizon.saturating_add(1) {
        errors.push(ConfigError::BadWeekOrdering {
            field: "ts_dagger_intro_week",
            detail: format!(
                "ts_dagger_intro_week ({}) must be <= horizon + 1 ({})",
                draft.ts_dagger_intro_week,
                u64::from(draft.horizon) + 1
            ),
        });
    }
    if draft.cohort_sizes.len() != draft.horizon as usize {
        errors.push(ConfigError::EmptyCohort(format!(
            "expected {} weekly cohort sizes, got {}",
            draft.horizon,
            draft.cohort_sizes.len()
        )));
    }
    if let Some(pos) = draft.cohort_sizes.iter().position(|&n| n == 0) {
        errors.push(ConfigError::EmptyCohort(format!(
            "cohort size for week {} is zero",
            pos + 1
        )));
    }
    if !split_is_normalized(&draft.split) {
        errors.push(ConfigError::SplitNotNormalized {
            field: "split",
            values: draft.split.to_vec(),
        });
    }
    if !split_is_normalized(&draft.transition_split) {
        errors.push(ConfigError::SplitNotNormalized {
            field: "transition_split",
            values: draft.transition_split.to_vec(),
        });
    }
    if errors.is_empty() {
        Ok(ExperimentConfig { draft })
    } else {
        Err(ValidationReport(errors))
    }
}

/// A configuration that satisfies every invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    draft: ConfigDraft,
}

impl ExperimentConfig {
    pub fn arms(&self) -> usize {
        self.draft.arms
    }

    pub fn horizon(&self) -> u32 {
        self.draft.horizon
    }

    pub fn burn_in(&self) -> u32 {
        self.draft.burn_in
    }

    pub fn ts_intro_week(&self) -> u32 {
        self.draft.ts_intro_week
    }

    pub fn ts_dagger_intro_week(&self) -> u32 {
        self.draft.ts_dagger_intro_week
    }

    pub fn cohort_sizes(&self) -> &[u64] {
        &self.draft.cohort_sizes
    }

    pub fn split(&self) -> [f64; 3] {
        self.draft.split
    }

    pub fn transition_split(&self) -> [f64; 2] {
        self.draft.transition_split
    }

    pub fn seed(&self) -> u64 {
        self.draft.seed
    }

    pub fn draft(&self) -> &ConfigDraft {
        &self.draft
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut draft = self.draft.clone();
        draft.seed = seed;
        ExperimentConfig { draft }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            arms: self.draft.arms,
            horizon: self.draft.horizon,
            ts_intro_week: self.draft.ts_intro_week,
            ts_dagger_intro_week: self.draft.ts_dagger_intro_week,
        }
    }
}

/// Which policies allocate in a given week.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Only UR allocates and every policy learns from its observations.
    Shared,
    /// UR and TS allocate; TS† learns from half TS and half UR.
    Transition,
    /// All three policies allocate.
    Full,
}

impl Phase {
    pub fn active_policies(self) -> &'static [PolicyId] {
        match self {
            Phase::Shared => &[PolicyId::Ur],
            Phase::Transition => &[PolicyId::Ur, PolicyId::Ts],
            Phase::Full => &PolicyId::ALL,
        }
    }
}

/// The week layout of an experiment, shared by simulated and replayed runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub arms: usize,
    pub horizon: u32,
    pub ts_intro_week: u32,
    pub ts_dagger_intro_week: u32,
}

impl Schedule {
    pub fn phase(&self, week: Week) -> Phase {
        let t = week.get();
        if t < self.ts_intro_week {
            Phase::Shared
        } else if t < self.ts_dagger_intro_week {
            Phase::Transition
        } else {
            Phase::Full
        }
    }

    pub fn weeks(&self) -> impl Iterator<Item = Week> {
        (1..=self.horizon).map(Week)
    }

    /// First week a policy makes its own allocations.
    pub fn intro_week(&self, policy: PolicyId) -> u32 {
        match policy {
            PolicyId::Ur => 1,
            PolicyId::Ts => self.ts_intro_week,
            PolicyId::TsDagger => self.ts_dagger_intro_week,
        }
    }
}

/// True open probability of each arm in each week.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSchedule {
    rows: Vec<Vec<f64>>,
}

impl EnvironmentSchedule {
    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<f64>>) -> Self {
        EnvironmentSchedule { rows }
    }

    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    pub fn arms(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn means(&self, week: Week) -> &[f64] {
        &self.rows[week.offset()]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn is_stationary(&self) -> bool {
        self.rows.windows(2).all(|w| w[0] == w[1])
    }
}
