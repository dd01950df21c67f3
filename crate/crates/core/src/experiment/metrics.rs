use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ExperimentError, SessionRecord, TraceLine, SUBJECT};
use crate::cake::Points;
use crate::procedure::{
    run_truthful, truthful_action, Action, ProcedureId, ProtocolState, QueryKind,
};
use crate::profile::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rounds,
    EnvyRate,
    TruthfulPayoffRate,
    TruthfulCutRate,
    SuccessfulManipulationRate,
    UnsuccessfulManipulationRate,
    MeanPoints,
    /// Per round: mean round time. Over all rounds: mean time a subject
    /// spent on the procedure.
    MeanTimeMs,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Rounds => "rounds",
            Metric::EnvyRate => "envy_rate",
            Metric::TruthfulPayoffRate => "truthful_payoff_rate",
            Metric::TruthfulCutRate => "truthful_cut_rate",
            Metric::SuccessfulManipulationRate => "successful_manipulation_rate",
            Metric::UnsuccessfulManipulationRate => "unsuccessful_manipulation_rate",
            Metric::MeanPoints => "mean_points",
            Metric::MeanTimeMs => "mean_time_ms",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Points by which another piece must beat the subject's own.
    pub envy: Vec<Points>,
    /// Allowed distance from the truthful payoff.
    pub payoff: Vec<Points>,
    /// Allowed distance of the first cut from the truthful cut.
    pub pixels: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            envy: vec![0, 5, 10],
            payoff: vec![5, 10, 15],
            pixels: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub procedure: ProcedureId,
    /// `None` aggregates all rounds.
    pub round: Option<u32>,
    pub metric: Metric,
    pub tolerance: Option<u64>,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
}

impl MetricsReport {
    pub fn get(
        &self,
        procedure: ProcedureId,
        round: Option<u32>,
        metric: Metric,
        tolerance: Option<u64>,
    ) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.procedure == procedure
                    && r.round == round
                    && r.metric == metric
                    && r.tolerance == tolerance
            })
            .map(|r| r.value)
    }

    /// Columns `procedure, round, metric, tolerance, value`; the aggregate
    /// round is written as `all`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["procedure", "round", "metric", "tolerance", "value"])?;
        for r in &self.rows {
            w.write_record([
                r.procedure.code().to_string(),
                r.round.map_or_else(|| "all".to_string(), |x| x.to_string()),
                r.metric.name().to_string(),
                r.tolerance.map_or_else(String::new, |t| t.to_string()),
                r.value.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String, ExperimentError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

struct Facts {
    session: usize,
    procedure: ProcedureId,
    round: u32,
    points: Points,
    baseline: Points,
    envious: Vec<bool>,
    truthful_payoff: Vec<bool>,
    truthful_cut: Option<bool>,
    time_ms: u64,
}

impl Facts {
    /// A report is a manipulation when the first cut strays from the
    /// truthful one; without a cut, when the payoff differs from truthful.
    fn manipulated(&self) -> bool {
        match self.truthful_cut {
            Some(ok) => !ok,
            None => self.points != self.baseline,
        }
    }
}

fn first_cut_truthful(
    line: &TraceLine,
    profile: &Profile,
    pixels: u32,
    session: &str,
    index: usize,
) -> Result<Option<bool>, ExperimentError> {
    let mut state = ProtocolState::new(line.procedure, profile.cake());
    for a in &line.actions {
        let bad = |message: String| ExperimentError::Trace {
            session: session.to_string(),
            line: index + 1,
            message,
        };
        let query = state
            .pending()
            .filter(|q| q.agent == a.actor)
            .ok_or_else(|| bad(format!("unexpected action by agent {}", a.actor)))?;
        if a.actor == SUBJECT && matches!(query.kind, QueryKind::Cut { .. }) {
            let (Action::Cut { at: truthful }, Action::Cut { at: made }) =
                (truthful_action(&query, profile.agent(SUBJECT)), &a.value)
            else {
                return Err(bad("cut query answered without a cut".into()));
            };
            return Ok(Some(
                truthful.len() == made.len()
                    && truthful
                        .iter()
                        .zip(made)
                        .all(|(t, m)| t.abs_diff(*m) <= pixels),
            ));
        }
        state
            .apply(&a.value)
            .map_err(|e| bad(format!("agent {}: {e}", a.actor)))?;
    }
    Ok(None)
}

fn rate<'a>(group: &[&'a Facts], pred: impl Fn(&'a Facts) -> bool) -> f64 {
    group.iter().filter(|f| pred(f)).count() as f64 / group.len() as f64
}

/// Metrics over the subject's rounds. Rounds lost to the time limit are left out.
pub fn metrics(
    records: &[SessionRecord],
    tol: &Tolerances,
) -> Result<MetricsReport, ExperimentError> {
    let mut facts = Vec::new();
    for (si, record) in records.iter().enumerate() {
        let mut cache: HashMap<ProcedureId, (Profile, Points)> = HashMap::new();
        for (li, line) in record.lines.iter().enumerate() {
            if line.timed_out {
                continue;
            }
            let (profile, baseline) = match cache.entry(line.procedure) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => {
                    let profile = record.header.config.profile(line.procedure)?;
                    let (_, trace) = run_truthful(line.procedure, &profile)?;
                    e.insert((profile, trace.points[SUBJECT]))
                }
            };
            let points = line.points.get(SUBJECT).copied().unwrap_or(0);
            facts.push(Facts {
                session: si,
                procedure: line.procedure,
                round: line.round,
                points,
                baseline: *baseline,
                envious: tol
                    .envy
                    .iter()
                    .map(|&t| line.subject_envious(SUBJECT, t))
                    .collect(),
                truthful_payoff: tol
                    .payoff
                    .iter()
                    .map(|&t| points.abs_diff(*baseline) <= t)
                    .collect(),
                truthful_cut: first_cut_truthful(line, profile, tol.pixels, &record.header.id, li)?,
                time_ms: line.duration_ms(),
            });
        }
    }

    let mut groups: BTreeMap<(ProcedureId, Option<u32>), Vec<&Facts>> = BTreeMap::new();
    for f in &facts {
        groups.entry((f.procedure, None)).or_default().push(f);
        groups
            .entry((f.procedure, Some(f.round)))
            .or_default()
            .push(f);
    }

    let mut rows = Vec::new();
    for ((procedure, round), group) in groups {
        let mut push = |metric, tolerance: Option<u64>, value| {
            rows.push(MetricRow {
                procedure,
                round,
                metric,
                tolerance,
                value,
            })
        };
        push(Metric::Rounds, None, group.len() as f64);
        for (i, &t) in tol.envy.iter().enumerate() {
            push(Metric::EnvyRate, Some(t), rate(&group, |f| f.envious[i]));
        }
        for (i, &t) in tol.payoff.iter().enumerate() {
            push(
                Metric::TruthfulPayoffRate,
                Some(t),
                rate(&group, |f| f.truthful_payoff[i]),
            );
        }
        let with_cut: Vec<&Facts> = group
            .iter()
            .copied()
            .filter(|f| f.truthful_cut.is_some())
            .collect();
        if !with_cut.is_empty() {
            push(
                Metric::TruthfulCutRate,
                Some(u64::from(tol.pixels)),
                rate(&with_cut, |f| f.truthful_cut == Some(true)),
            );
        }
        let pixels = Some(u64::from(tol.pixels));
        push(
            Metric::SuccessfulManipulationRate,
            pixels,
            rate(&group, |f| f.manipulated() && f.points > f.baseline),
        );
        push(
            Metric::UnsuccessfulManipulationRate,
            pixels,
            rate(&group, |f| f.manipulated() && f.points <= f.baseline),
        );
        push(
            Metric::MeanPoints,
            None,
            group.iter().map(|f| f.points as f64).sum::<f64>() / group.len() as f64,
        );
        let mean_time = if round.is_some() {
            group.iter().map(|f| f.time_ms as f64).sum::<f64>() / group.len() as f64
        } else {
            let mut per_session: BTreeMap<usize, u64> = BTreeMap::new();
            for f in &group {
                *per_session.entry(f.session).or_default() += f.time_ms;
            }
            per_session.values().map(|&t| t as f64).sum::<f64>() / per_session.len() as f64
        };
        push(Metric::MeanTimeMs, None, mean_time);
    }
    Ok(MetricsReport { rows })
}
