//! Stopping criteria.
//!
//! Both criteria watch how the model's predictions on a fixed stop set evolve
//! from one retrain to the next:
//!
//! - `kappa_average`: stop once the mean Cohen's κ between consecutive
//!   prediction vectors over the last `window` rounds reaches `kappa`.
//! - `classification_change`: stop once the fraction of stop-set predictions
//!   that changed stays below `epsilon` for `window` consecutive rounds.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelMode, LabelSet};
use crate::error::{Error, Result};

pub const DEFAULT_KAPPA_WINDOW: usize = 3;
pub const DEFAULT_KAPPA_THRESHOLD: f64 = 0.99;
pub const DEFAULT_CHANGE_EPSILON: f64 = 0.005;
pub const DEFAULT_CHANGE_WINDOW: usize = 2;

/// Cohen's κ between two single-label vectors. A degenerate chance agreement
/// of 1 yields κ = 1.
pub fn cohens_kappa(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter("kappa needs at least one pair".into()));
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut marginals: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for &x in a {
        marginals.entry(x).or_default().0 += 1.0;
    }
    for &y in b {
        marginals.entry(y).or_default().1 += 1.0;
    }
    let chance: f64 = marginals.values().map(|(ca, cb)| (ca / n) * (cb / n)).sum();
    if chance >= 1.0 {
        return Ok(1.0);
    }
    Ok(((observed - chance) / (1.0 - chance)).clamp(-1.0, 1.0))
}

/// κ on prediction sets: the single-label κ, or for multi-label the mean of
/// per-class κ over binary membership indicators.
pub fn kappa_for(mode: LabelMode, n_classes: usize, a: &[LabelSet], b: &[LabelSet]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    match mode {
        LabelMode::SingleLabel => {
            let first = |v: &[LabelSet]| v.iter().map(|s| s.primary().unwrap_or(0)).collect::<Vec<_>>();
            cohens_kappa(&first(a), &first(b))
        }
        LabelMode::MultiLabel => {
            let mut total = 0.0;
            for c in 0..n_classes {
                let ia: Vec<usize> = a.iter().map(|s| usize::from(s.contains(c))).collect();
                let ib: Vec<usize> = b.iter().map(|s| usize::from(s.contains(c))).collect();
                total += cohens_kappa(&ia, &ib)?;
            }
            Ok(total / n_classes as f64)
        }
    }
}

/// Fraction of positions whose predicted label set differs.
pub fn change_rate(prev: &[LabelSet], cur: &[LabelSet]) -> Result<f64> {
    if prev.len() != cur.len() {
        return Err(Error::LengthMismatch(prev.len(), cur.len()));
    }
    if prev.is_empty() {
        return Ok(0.0);
    }
    let changed = prev.iter().zip(cur).filter(|(a, b)| a != b).count();
    Ok(changed as f64 / prev.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopDecision {
    pub should_stop: bool,
    /// The statistic the decision rests on; `None` while there is not
    /// enough history.
    pub value: Option<f64>,
    pub criterion: String,
}

pub fn kappa_average_should_stop(history: &[f64], window: usize, threshold: f64) -> StopDecision {
    let criterion = "kappa_average".to_string();
    if window == 0 || history.len() < window {
        return StopDecision {
            should_stop: false,
            value: None,
            criterion,
        };
    }
    let mean = history[history.len() - window..].iter().sum::<f64>() / window as f64;
    StopDecision {
        should_stop: mean >= threshold,
        value: Some(mean),
        criterion,
    }
}

/// Window state of the classification-change criterion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangeState {
    /// Consecutive rounds with a change rate below epsilon.
    pub streak: usize,
    pub last_rate: Option<f64>,
}

pub fn classification_change_should_stop(
    prev: &[LabelSet],
    cur: &[LabelSet],
    epsilon: f64,
    window: usize,
    state: &mut ChangeState,
) -> Result<StopDecision> {
    let rate = change_rate(prev, cur)?;
    Ok(observe_change_rate(rate, epsilon, window, state))
}

/// Feeds one change rate into the window state.
pub fn observe_change_rate(rate: f64, epsilon: f64, window: usize, state: &mut ChangeState) -> StopDecision {
    state.streak = if rate < epsilon { state.streak + 1 } else { 0 };
    state.last_rate = Some(rate);
    change_decision(window, state)
}

pub fn change_decision(window: usize, state: &ChangeState) -> StopDecision {
    StopDecision {
        should_stop: window > 0 && state.streak >= window,
        value: state.last_rate,
        criterion: "classification_change".to_string(),
    }
}

/// A configured stopping criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum StoppingConfig {
    KappaAverage {
        #[serde(default = "default_kappa_window")]
        window: usize,
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    ClassificationChange {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_change_window")]
        window: usize,
    },
}

fn default_kappa_window() -> usize {
    DEFAULT_KAPPA_WINDOW
}
fn default_kappa() -> f64 {
    DEFAULT_KAPPA_THRESHOLD
}
fn default_epsilon() -> f64 {
    DEFAULT_CHANGE_EPSILON
}
fn default_change_window() -> usize {
    DEFAULT_CHANGE_WINDOW
}

impl StoppingConfig {
    pub fn name(&self) -> &'static str {
        match self {
            StoppingConfig::KappaAverage { .. } => "kappa_average",
            StoppingConfig::ClassificationChange { .. } => "classification_change",
        }
    }
}

/// Parses `kappa_average`, `kappa_average(3,0.99)`,
/// `classification_change` or `classification_change(0.005,2)`.
impl FromStr for StoppingConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once('(') {
            Some((name, rest)) => {
                let inner = rest.strip_suffix(')').ok_or_else(|| {
                    Error::InvalidParameter(format!("unbalanced parentheses in `{s}`"))
                })?;
                (name.trim(), inner.split(',').map(str::trim).collect::<Vec<_>>())
            }
            None => (s, Vec::new()),
        };
        let bad = || Error::InvalidParameter(format!("cannot parse stopping criterion `{s}`"));
        match (name, args.as_slice()) {
            ("kappa_average", []) => Ok(StoppingConfig::KappaAverage {
                window: DEFAULT_KAPPA_WINDOW,
                kappa: DEFAULT_KAPPA_THRESHOLD,
            }),
            ("kappa_average", [w, k]) => Ok(StoppingConfig::KappaAverage {
                window: w.parse().map_err(|_| bad())?,
                kappa: k.parse().map_err(|_| bad())?,
            }),
            ("classification_change", []) => Ok(StoppingConfig::ClassificationChange {
                epsilon: DEFAULT_CHANGE_EPSILON,
                window: DEFAULT_CHANGE_WINDOW,
            }),
            ("classification_change", [e, w]) => Ok(StoppingConfig::ClassificationChange {
                epsilon: e.parse().map_err(|_| bad())?,
                window: w.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}
