use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    metrics, ExperimentError, MetricsReport, SessionConfig, SessionHeader, SessionRecord,
    Tolerances, TraceLine, SUBJECT,
};
use crate::cake::{Cake, LAB_WIDTH};
use crate::fixtures::{envious_cutter_profile, lab_profile_file};
use crate::procedure::{
    run, run_scripted, run_truthful, truthful_action, Action, Policy, ProcedureId, Query,
    QueryKind, RoundTrace, Step, Truthful,
};
use crate::profile::{Profile, ProfileFile};
use crate::strategy::best_response;
use crate::valuation::Valuation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Truthful,
    BestResponder,
    RandomCuts,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Truthful => "truthful",
            PolicyKind::BestResponder => "best_responder",
            PolicyKind::RandomCuts => "random_cuts",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileChoice {
    Lab,
    /// The three-agent fixture on which a profitable Selfridge-Conway
    /// deviation exists; three-agent procedures only.
    EnviousCutter,
    /// Fresh 0/1 profiles per repetition on the lab cake.
    Random {
        desired: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchConfig {
    pub procedures: Vec<ProcedureId>,
    /// Fraction of simulated subjects that play truthfully.
    pub alpha: f64,
    /// Kinds for the remaining subjects, assigned round-robin.
    pub others: Vec<PolicyKind>,
    pub repetitions: u32,
    pub rounds: u32,
    pub profile: ProfileChoice,
    pub seed: u64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            procedures: ProcedureId::ALL.to_vec(),
            alpha: 1.0,
            others: vec![PolicyKind::BestResponder],
            repetitions: 20,
            rounds: 1,
            profile: ProfileChoice::Lab,
            seed: 0,
        }
    }
}

impl BatchConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} is outside [0, 1]", self.alpha));
        }
        if self.alpha < 1.0 && self.others.is_empty() {
            return bad("alpha below 1 needs at least one other policy kind".into());
        }
        if self.procedures.is_empty() || self.repetitions == 0 || self.rounds == 0 {
            return bad("procedures, repetitions and rounds must be non-empty".into());
        }
        match self.profile {
            ProfileChoice::EnviousCutter => {
                if let Some(id) = self.procedures.iter().find(|id| id.agents() != 3) {
                    return bad(format!(
                        "the envious-cutter fixture has 3 agents, {id} needs {}",
                        id.agents()
                    ));
                }
            }
            ProfileChoice::Random { desired } if desired == 0 || desired > LAB_WIDTH => {
                return bad(format!(
                    "desired pixels {desired} must lie in 1..={LAB_WIDTH}"
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

pub struct BatchOutput {
    pub records: Vec<SessionRecord>,
    pub report: MetricsReport,
}

/// Cuts at uniformly random positions in the range and diminishes to a
/// random position half of the time; chooses and trims truthfully.
#[derive(Debug, Clone)]
pub struct RandomCuts {
    rng: ChaCha8Rng,
}

impl RandomCuts {
    pub fn new(seed: u64) -> Self {
        RandomCuts {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomCuts {
    fn respond(&mut self, query: &Query, own: &Valuation, _history: &[Step]) -> Action {
        match query.kind {
            QueryKind::Cut { range, count, .. } => {
                let mut at: Vec<u32> = (0..count)
                    .map(|_| self.rng.random_range(range.0..=range.1))
                    .collect();
                at.sort_unstable();
                Action::Cut { at }
            }
            QueryKind::DiminishOrPass {
                current_cut, range, ..
            } => {
                if current_cut > range.0 && self.rng.random_bool(0.5) {
                    Action::Diminish {
                        at: self.rng.random_range(range.0..current_cut),
                    }
                } else {
                    Action::Pass
                }
            }
            _ => truthful_action(query, own),
        }
    }
}

/// `n` agents, each desiring `desired` distinct random pixels of the lab cake.
pub fn random_profile<R: Rng + ?Sized>(rng: &mut R, n: usize, desired: u32) -> Profile {
    let cake = Cake::lab();
    let agents = (0..n)
        .map(|_| {
            let mut px: Vec<u32> = sample(rng, LAB_WIDTH as usize, desired as usize)
                .into_iter()
                .map(|i| i as u32)
                .collect();
            px.sort_unstable();
            let mut runs: Vec<(u32, u32)> = Vec::new();
            for p in px {
                match runs.last_mut() {
                    Some(r) if r.1 == p => r.1 = p + 1,
                    _ => runs.push((p, p + 1)),
                }
            }
            Valuation::desired(cake, &runs).expect("pixels lie on the cake")
        })
        .collect();
    Profile::new(cake, agents).expect("random profiles are valid")
}

fn profile_file(choice: &ProfileChoice, id: ProcedureId, rng: &mut ChaCha8Rng) -> ProfileFile {
    match choice {
        ProfileChoice::Lab => lab_profile_file(id),
        ProfileChoice::EnviousCutter => envious_cutter_profile().to_file(),
        ProfileChoice::Random { desired } => random_profile(rng, id.agents(), *desired).to_file(),
    }
}

type ResponseCache = HashMap<(ProcedureId, Profile), Vec<Action>>;

fn play(
    kind: PolicyKind,
    id: ProcedureId,
    profile: &Profile,
    cache: &mut ResponseCache,
    rng: &mut ChaCha8Rng,
) -> Result<RoundTrace, ExperimentError> {
    let (_, trace) = match kind {
        PolicyKind::Truthful => run_truthful(id, profile)?,
        PolicyKind::BestResponder => {
            let key = (id, profile.clone());
            if !cache.contains_key(&key) {
                let br = best_response(id, profile, SUBJECT)?;
                cache.insert(key.clone(), br.actions);
            }
            run_scripted(id, profile, SUBJECT, cache[&key].clone())?
        }
        PolicyKind::RandomCuts => {
            let mut policies: Vec<Box<dyn Policy>> = (0..profile.len())
                .map(|i| {
                    if i == SUBJECT {
                        Box::new(RandomCuts::new(rng.random())) as Box<dyn Policy>
                    } else {
                        Box::new(Truthful) as Box<dyn Policy>
                    }
                })
                .collect();
            run(id, profile, &mut policies)?
        }
    };
    Ok(trace)
}

/// Simulated subjects against truthful automata. A share `alpha` of the
/// repetitions (rounded to the nearest whole repetition) is truthful.
/// Deterministic given the seed.
pub fn simulate_batch(cfg: &BatchConfig, tol: &Tolerances) -> Result<BatchOutput, ExperimentError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let reps = cfg.repetitions as usize;
    let truthful = ((cfg.alpha * reps as f64).round() as usize).min(reps);
    let mut kinds: Vec<PolicyKind> = (0..reps)
        .map(|i| {
            if i < truthful {
                PolicyKind::Truthful
            } else {
                cfg.others[(i - truthful) % cfg.others.len()]
            }
        })
        .collect();
    kinds.shuffle(&mut rng);

    let reveal_round = SessionConfig::default().reveal_round;
    let mut cache = ResponseCache::new();
    let mut records = Vec::with_capacity(reps);
    for (rep, kind) in kinds.into_iter().enumerate() {
        let id = format!("batch-{rep:05}");
        let mut profiles = BTreeMap::new();
        for &p in &cfg.procedures {
            profiles.insert(p, profile_file(&cfg.profile, p, &mut rng));
        }
        let config = SessionConfig {
            order: cfg.procedures.clone(),
            rounds: cfg.rounds,
            profiles,
            seed: rng.random(),
            ..SessionConfig::default()
        };
        let mut lines = Vec::new();
        for &p in &cfg.procedures {
            let profile = config.profile(p)?;
            for round in 1..=cfg.rounds {
                let trace = play(kind, p, &profile, &mut cache, &mut rng)?;
                lines.push(TraceLine::from_round(
                    &id,
                    kind.name(),
                    round,
                    round >= reveal_round,
                    &trace,
                    profile.agent(SUBJECT),
                ));
            }
        }
        records.push(SessionRecord {
            header: SessionHeader {
                id,
                subject: kind.name().to_string(),
                created_ms: 0,
                config,
            },
            lines,
        });
    }
    let report = metrics(&records, tol)?;
    Ok(BatchOutput { records, report })
}
