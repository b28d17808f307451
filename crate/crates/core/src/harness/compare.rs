use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use super::config::{AgentKind, ExperimentConfig};
use super::metrics::{read_manifest, read_metrics_csv, RowType};
use super::run::ExperimentResult;
use crate::error::{Error, Result};

/// Per-trial episodes-to-target of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceInput {
    pub config: ExperimentConfig,
    /// `None` for trials that never reached the target.
    pub episodes_to_target: Vec<Option<u64>>,
}

impl ConvergenceInput {
    pub fn from_result(result: &ExperimentResult) -> Self {
        let target = result.config.target_throughput;
        ConvergenceInput {
            config: result.config.clone(),
            episodes_to_target: result
                .trials
                .iter()
                .map(|t| t.episodes_to_target(target))
                .collect(),
        }
    }

    /// Reads a metrics file and its manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let manifest = read_manifest(path)?;
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut per_trial: BTreeMap<u64, Option<u64>> = BTreeMap::new();
        for r in read_metrics_csv(file)? {
            if r.row_type == RowType::Trial {
                let trial = r
                    .trial
                    .ok_or_else(|| Error::Metrics("trial row without trial".into()))?;
                per_trial.insert(trial, r.episodes_to_target.map(|e| e as u64));
            }
        }
        Ok(ConvergenceInput {
            config: manifest.config,
            episodes_to_target: per_trial.into_values().collect(),
        })
    }
}

/// Convergence statistics of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSummary {
    pub agent: AgentKind,
    pub trials: usize,
    /// Mean episodes-to-target; trials that never reach it count as `episodes + 1`.
    pub mean_episodes_to_target: f64,
    /// Trials that never reached the target.
    pub censored: Vec<usize>,
}

/// Side-by-side convergence of two experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub a: ConvergenceSummary,
    pub b: ConvergenceSummary,
    /// `a.mean / b.mean`.
    pub ratio: f64,
}

impl ConvergenceReport {
    pub fn flagged(&self) -> bool {
        !self.a.censored.is_empty() || !self.b.censored.is_empty()
    }
}

fn summarize(input: &ConvergenceInput) -> ConvergenceSummary {
    let cap = input.config.episodes + 1;
    let values: Vec<u64> = input
        .episodes_to_target
        .iter()
        .map(|e| e.unwrap_or(cap))
        .collect();
    ConvergenceSummary {
        agent: input.config.agent,
        trials: values.len(),
        mean_episodes_to_target: values.iter().sum::<u64>() as f64 / values.len().max(1) as f64,
        censored: input
            .episodes_to_target
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_none())
            .map(|(i, _)| i)
            .collect(),
    }
}

/// Compares mean episodes-to-target of `a` against `b`.
pub fn compare_convergence(
    a: &ConvergenceInput,
    b: &ConvergenceInput,
) -> Result<ConvergenceReport> {
    let (ca, cb) = (&a.config, &b.config);
    let checks: [(&str, bool); 6] = [
        ("env", ca.env == cb.env),
        ("jammers", ca.jammers == cb.jammers),
        (
            "trials",
            ca.trials == cb.trials && a.episodes_to_target.len() == b.episodes_to_target.len(),
        ),
        ("episodes", ca.episodes == cb.episodes),
        (
            "hops_per_episode",
            ca.hops_per_episode == cb.hops_per_episode,
        ),
        (
            "target_throughput",
            ca.target_throughput == cb.target_throughput,
        ),
    ];
    if let Some((field, _)) = checks.iter().find(|(_, ok)| !ok) {
        return Err(Error::Incomparable(format!("runs differ in {field}")));
    }
    let (sa, sb) = (summarize(a), summarize(b));
    let ratio = sa.mean_episodes_to_target / sb.mean_episodes_to_target;
    Ok(ConvergenceReport {
        a: sa,
        b: sb,
        ratio,
    })
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, s) in [("A", &self.a), ("B", &self.b)] {
            write!(
                f,
                "{label}: agent {:?}, {} trials, mean episodes to target {}",
                s.agent, s.trials, s.mean_episodes_to_target
            )?;
            if !s.censored.is_empty() {
                write!(f, " (never reached in trials {:?})", s.censored)?;
            }
            writeln!(f)?;
        }
        writeln!(f, "ratio A/B: {}", self.ratio)?;
        write!(f, "reduction: {}%", (1.0 - self.ratio) * 100.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Scale;

    fn input(agent: AgentKind, e: Vec<Option<u64>>) -> ConvergenceInput {
        let mut config = ExperimentConfig::defaults(Scale::Desk);
        config.agent = agent;
        config.trials = e.len() as u64;
        ConvergenceInput {
            config,
            episodes_to_target: e,
        }
    }

    #[test]
    fn ratio_examples() {
        let a = input(AgentKind::Joint, vec![Some(20)]);
        let b = input(AgentKind::Dqn, vec![Some(100)]);
        let r = compare_convergence(&a, &b).unwrap();
        assert!((r.ratio - 0.2).abs() < 1e-15);
        assert!(!r.flagged());
        let r = compare_convergence(&a, &a).unwrap();
        assert_eq!(r.ratio, 1.0);
    }

    #[test]
    fn censored_trials_are_flagged() {
        let a = input(AgentKind::Joint, vec![Some(10), None]);
        let b = input(AgentKind::Dqn, vec![Some(50), Some(70)]);
        let r = compare_convergence(&a, &b).unwrap();
        assert_eq!(r.a.censored, vec![1]);
        assert_eq!(r.a.mean_episodes_to_target, (10.0 + 301.0) / 2.0);
        assert!(r.flagged());
        assert!(r.to_string().contains("never reached"));
    }

    #[test]
    fn mismatched_configs_are_rejected() {
        let a = input(AgentKind::Joint, vec![Some(10)]);
        let mut b = input(AgentKind::Dqn, vec![Some(50)]);
        b.config.env.noise_dbm = -10.0;
        assert!(matches!(
            compare_convergence(&a, &b),
            Err(Error::Incomparable(_))
        ));
        let b = input(AgentKind::Dqn, vec![Some(50), Some(40)]);
        assert!(matches!(
            compare_convergence(&a, &b),
            Err(Error::Incomparable(_))
        ));
    }
}
