use std::collections::BTreeMap;

use fairslice_core::experiment::{
    metrics, payment_pence, simulate_batch, BatchConfig, ExperimentError, Metric, Outcome,
    PolicyKind, ProfileChoice, Session, SessionConfig, SessionRecord, Tolerances, TraceStore,
};
use fairslice_core::fixtures::lab_profile;
use fairslice_core::procedure::{run_truthful, truthful_action, Policy, Scripted};
use fairslice_core::strategy::best_response;
use fairslice_core::{Action, ProcedureId, QueryKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn subject_truthful(s: &Session) -> Action {
    let q = s.pending().expect("pending query");
    truthful_action(&q, s.profile(s.procedure_index()).agent(0))
}

/// Plays every remaining query truthfully, one second per action.
fn play_truthfully(s: &mut Session, clock: &mut u64) -> Vec<Outcome> {
    let mut out = Vec::new();
    while !s.is_done() {
        s.start_round(*clock);
        *clock += 1000;
        let a = subject_truthful(s);
        out.push(s.submit(&a, *clock).unwrap());
    }
    out
}

fn config(order: &[ProcedureId]) -> SessionConfig {
    SessionConfig {
        order: order.to_vec(),
        ..SessionConfig::default()
    }
}

#[test]
fn default_session_has_56_rounds_and_truthful_baselines() {
    let mut s = Session::new("s1", "tester", SessionConfig::default(), 0).unwrap();
    assert_eq!(s.config().total_rounds(), 56);
    let mut clock = 0;
    let outcomes = play_truthfully(&mut s, &mut clock);
    assert!(matches!(outcomes.last(), Some(Outcome::SessionDone { .. })));
    let procedure_done = outcomes
        .iter()
        .filter(|o| matches!(o, Outcome::ProcedureDone { .. }))
        .count();
    assert_eq!(procedure_done, 7);
    assert_eq!(s.results().len(), 56);
    for r in s.results() {
        let (_, trace) = run_truthful(r.procedure, &lab_profile(r.procedure)).unwrap();
        assert_eq!(
            r.points, trace.points[0],
            "{} round {}",
            r.procedure, r.round
        );
    }
    assert!(matches!(
        s.submit(&Action::cut(1), clock),
        Err(ExperimentError::Finished)
    ));
}

#[test]
fn custom_three_procedure_session_has_21_rounds() {
    let order = [ProcedureId::Acc2, ProcedureId::Ds3, ProcedureId::Sc3];
    let mut s = Session::new("s2", "t", config(&order), 0).unwrap();
    play_truthfully(&mut s, &mut 0);
    assert_eq!(s.results().len(), 21);
}

#[test]
fn reveal_starts_at_round_six() {
    let mut s = Session::new("s3", "t", config(&[ProcedureId::Ds3]), 0).unwrap();
    let mut clock = 0;
    for round in 1..=7 {
        let view = s.view(clock);
        assert_eq!(view.round, round);
        assert_eq!(view.revealed, round >= 6);
        assert_eq!(
            view.opponents_desired.is_some(),
            round >= 6,
            "round {round}"
        );
        if let Some(opp) = &view.opponents_desired {
            let p = lab_profile(ProcedureId::Ds3);
            assert_eq!(opp[0], p.agent(1).desired_intervals());
            assert_eq!(opp[1], p.agent(2).desired_intervals());
        }
        assert_eq!(
            view.own_desired,
            lab_profile(ProcedureId::Ds3).agent(0).desired_intervals()
        );
        while s.round() == round && !s.is_done() {
            clock += 10;
            let a = subject_truthful(&s);
            s.submit(&a, clock).unwrap();
        }
    }
    let json = serde_json::to_string(&s.lines()[..5]).unwrap();
    assert!(s.lines()[..5].iter().all(|l| !l.revealed));
    assert!(json.contains("\"revealed\":false"));
    assert!(s.lines()[5..].iter().all(|l| l.revealed));
}

#[test]
fn acc_cut_at_120_scores_60() {
    let mut s = Session::new("s4", "t", config(&[ProcedureId::Acc2]), 0).unwrap();
    let Outcome::RoundResult { result } = s.submit(&Action::cut(120), 5).unwrap() else {
        panic!("expected a round result");
    };
    assert_eq!(result.points, 60);
    assert_eq!(result.opponents.len(), 1);
    // The automaton's piece, valued by the subject.
    assert_eq!(result.opponents[0].value, 60);
}

#[test]
fn last_diminisher_can_ask_the_subject_to_cut_again() {
    let mut s = Session::new("s5", "t", config(&[ProcedureId::Ld3]), 0).unwrap();
    // Claiming the whole cake invites a diminish.
    let outcome = s.submit(&Action::cut(600), 5).unwrap();
    let Outcome::NextQuery { query } = outcome else {
        panic!("expected another query, got {outcome:?}");
    };
    assert_eq!(query.agent, 0);
    assert!(matches!(query.kind, QueryKind::Cut { .. }));
}

#[test]
fn invalid_action_leaves_state_unchanged() {
    let mut s = Session::new("s6", "t", config(&[ProcedureId::Acc2]), 0).unwrap();
    let before = s.pending();
    assert!(matches!(
        s.submit(&Action::cut(601), 1),
        Err(ExperimentError::Action(_))
    ));
    assert!(s.submit(&Action::Pass, 1).is_err());
    assert_eq!(s.pending(), before);
    assert!(s.lines().is_empty());
}

#[test]
fn timeout_zeroes_the_remaining_rounds() {
    let cfg = SessionConfig {
        order: vec![ProcedureId::Acc2, ProcedureId::Scc2],
        time_limit_ms: 1000,
        enforce_time_limit: true,
        ..SessionConfig::default()
    };
    let mut s = Session::new("s7", "t", cfg, 0).unwrap();
    let mut clock = 0;
    for _ in 0..4 {
        // Long pauses between rounds do not count.
        clock += 10_000;
        s.start_round(clock);
        clock += 200;
        s.submit(&Action::cut(120), clock).unwrap();
    }
    assert_eq!(s.remaining_ms(clock), Some(200));
    clock += 10_000;
    s.start_round(clock);
    clock += 201;
    let Outcome::TimedOut {
        zeroed,
        session_done,
    } = s.submit(&Action::cut(120), clock).unwrap()
    else {
        panic!("expected a timeout");
    };
    assert!(!session_done);
    assert_eq!(zeroed.len(), 3);
    assert!(zeroed.iter().all(|r| r.points == 0 && r.timed_out));
    assert_eq!(s.current_procedure(), Some(ProcedureId::Scc2));
    assert_eq!(s.round(), 1);
    assert_eq!(s.remaining_ms(clock), Some(1000));
}

#[test]
fn coarse_grid_rejects_cuts_between_value_steps() {
    let cfg = SessionConfig {
        coarse_grid: true,
        ..config(&[ProcedureId::Acc2])
    };
    let mut s = Session::new("s8", "t", cfg, 0).unwrap();
    let v = lab_profile(ProcedureId::Acc2).agent(0).clone();
    // The subject's desired pixels start at 60, so 30 repeats the value of 0.
    assert_eq!(v.range(0, 30), 0);
    assert!(matches!(
        s.submit(&Action::cut(30), 1),
        Err(ExperimentError::OffGrid { at: 30 })
    ));
    assert!(s.submit(&Action::cut(120), 1).is_ok());
}

#[test]
fn payment_examples() {
    let v = lab_profile(ProcedureId::Acc2).agent(0).clone();
    let eighty = v.cut_point(0, 80).unwrap();
    assert!(eighty < 480);
    let cfg = SessionConfig {
        rounds: 2,
        reveal_round: 2,
        ..config(&[ProcedureId::Acc2])
    };
    let mut s = Session::new("p1", "t", cfg.clone(), 0).unwrap();
    assert!(matches!(s.payment(), Err(ExperimentError::Incomplete)));
    s.submit(&Action::cut(430), 1).unwrap();
    s.submit(&Action::cut(eighty), 2).unwrap();
    let points: Vec<u64> = s.results().iter().map(|r| r.points).collect();
    assert_eq!(points, vec![120, 80]);
    for seed in 0..5 {
        let p = s
            .payment_with(&mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        assert_eq!(p.pence, 2500);
        assert_eq!(p.pounds, 25.0);
    }
    assert_eq!(payment_pence(0, 0), 500);
    assert_eq!(payment_pence(120, 120), 2900);
}

#[test]
fn payment_floor_after_timeouts() {
    let cfg = SessionConfig {
        time_limit_ms: 1,
        enforce_time_limit: true,
        ..config(&[ProcedureId::Acc2, ProcedureId::Scc2])
    };
    let mut s = Session::new("p2", "t", cfg, 0).unwrap();
    for _ in 0..2 {
        s.start_round(0);
        assert!(matches!(
            s.submit(&Action::cut(1), 10).unwrap(),
            Outcome::TimedOut { .. }
        ));
    }
    assert!(s.is_done());
    assert_eq!(s.payment().unwrap().pence, 500);
}

/// Subject answers from a best-response script, truthful elsewhere.
fn play_best_responses(s: &mut Session) {
    let mut clock = 0;
    while !s.is_done() {
        let idx = s.procedure_index();
        let id = s.current_procedure().unwrap();
        let profile = s.profile(idx).clone();
        let br = best_response(id, &profile, 0).unwrap();
        let mut policy = Scripted::new(br.actions);
        let round = s.round();
        while s.round() == round && s.procedure_index() == idx {
            let q = s.pending().unwrap();
            clock += 1;
            let a = policy.respond(&q, profile.agent(0), &[]);
            s.submit(&a, clock).unwrap();
        }
    }
}

#[test]
fn payment_ceiling_is_reachable() {
    let order = [ProcedureId::Acc2, ProcedureId::Scc2];
    let cfg = SessionConfig {
        rounds: 3,
        reveal_round: 3,
        ..config(&order)
    };
    let mut s = Session::new("p3", "t", cfg, 0).unwrap();
    play_best_responses(&mut s);
    assert!(s.results().iter().all(|r| r.points == 120));
    assert_eq!(s.payment().unwrap().pence, 2900);
}

fn persist(s: &mut Session, store: &TraceStore) {
    let lines = s.take_new_lines();
    store.append(s.id(), &lines).unwrap();
}

#[test]
fn traces_round_trip_and_sessions_recover() {
    let dir = tempfile::tempdir().unwrap();
    let store = TraceStore::open(dir.path()).unwrap();
    let mut s = Session::new("rt", "t", config(&[ProcedureId::Acc2, ProcedureId::Sc3]), 7).unwrap();
    store.create(s.header()).unwrap();
    let mut clock = 0;
    // Play part of the session, persisting as we go.
    for _ in 0..9 {
        let round = (s.procedure_index(), s.round());
        while (s.procedure_index(), s.round()) == round {
            clock += 3;
            let a = subject_truthful(&s);
            s.submit(&a, clock).unwrap();
        }
        persist(&mut s, &store);
    }
    let rec = store.load("rt").unwrap();
    assert_eq!(rec.lines, s.lines());
    let mut restored = Session::restore(rec.header, rec.lines).unwrap();
    assert_eq!(restored.results(), s.results());
    assert_eq!((restored.procedure_index(), restored.round()), (1, 3));
    assert_eq!(restored.pending(), s.pending());
    let mut c2 = clock;
    play_truthfully(&mut s, &mut clock);
    play_truthfully(&mut restored, &mut c2);
    assert_eq!(restored.lines(), s.lines());
    persist(&mut restored, &store);

    let loaded = store.load_all().unwrap();
    let in_memory = vec![SessionRecord {
        header: s.header().clone(),
        lines: s.lines().to_vec(),
    }];
    assert_eq!(loaded, in_memory);
    let tol = Tolerances::default();
    assert_eq!(
        metrics(&loaded, &tol).unwrap(),
        metrics(&in_memory, &tol).unwrap()
    );
}

#[test]
fn restore_rejects_tampered_lines() {
    let mut s = Session::new("bad", "t", config(&[ProcedureId::Acc2]), 0).unwrap();
    s.submit(&Action::cut(120), 1).unwrap();
    let mut lines = s.lines().to_vec();
    lines[0].allocation[0].1 += 1;
    lines[0].allocation[1].0 += 1;
    assert!(matches!(
        Session::restore(s.header().clone(), lines),
        Err(ExperimentError::Trace { .. })
    ));
}

#[test]
fn store_rejects_path_like_ids() {
    let dir = tempfile::tempdir().unwrap();
    let store = TraceStore::open(dir.path()).unwrap();
    assert!(matches!(store.load("../x"), Err(ExperimentError::BadId(_))));
    assert!(Session::new("a/b", "t", SessionConfig::default(), 0).is_err());
}

fn all_truthful_records() -> Vec<SessionRecord> {
    (0..3)
        .map(|i| {
            let mut s = Session::new(&format!("t{i}"), "t", SessionConfig::default(), 0).unwrap();
            play_truthfully(&mut s, &mut 0);
            SessionRecord {
                header: s.header().clone(),
                lines: s.lines().to_vec(),
            }
        })
        .collect()
}

#[test]
fn all_truthful_metrics() {
    let report = metrics(&all_truthful_records(), &Tolerances::default()).unwrap();
    for id in ProcedureId::ALL {
        for t in [5, 10, 15] {
            assert_eq!(
                report.get(id, None, Metric::TruthfulPayoffRate, Some(t)),
                Some(1.0)
            );
        }
        assert_eq!(
            report.get(id, None, Metric::TruthfulCutRate, Some(5)),
            Some(1.0)
        );
        assert_eq!(
            report.get(id, None, Metric::SuccessfulManipulationRate, Some(5)),
            Some(0.0)
        );
        assert_eq!(report.get(id, Some(3), Metric::Rounds, None), Some(3.0));
    }
    for id in [ProcedureId::Acc2, ProcedureId::Scc2, ProcedureId::Sc3] {
        assert_eq!(
            report.get(id, None, Metric::EnvyRate, Some(0)),
            Some(0.0),
            "{id}"
        );
    }
    assert_eq!(
        report.get(ProcedureId::Acc2, None, Metric::MeanPoints, None),
        Some(60.0)
    );
    assert_eq!(
        report.get(ProcedureId::Acc2, None, Metric::MeanTimeMs, None),
        Some(7000.0)
    );
    assert_eq!(
        report.get(ProcedureId::Acc2, Some(1), Metric::MeanTimeMs, None),
        Some(1000.0)
    );
    let csv = report.to_csv().unwrap();
    assert!(csv.starts_with("procedure,round,metric,tolerance,value\n"));
    assert!(csv.contains("2ACC,all,envy_rate,0,0\n"));
}

#[test]
fn best_response_traces_on_acc_are_successful_manipulations() {
    let cfg = config(&[ProcedureId::Acc2]);
    let mut s = Session::new("br", "t", cfg, 0).unwrap();
    play_best_responses(&mut s);
    let rec = SessionRecord {
        header: s.header().clone(),
        lines: s.lines().to_vec(),
    };
    let report = metrics(&[rec], &Tolerances::default()).unwrap();
    let id = ProcedureId::Acc2;
    assert_eq!(
        report.get(id, None, Metric::SuccessfulManipulationRate, Some(5)),
        Some(1.0)
    );
    assert_eq!(
        report.get(id, None, Metric::UnsuccessfulManipulationRate, Some(5)),
        Some(0.0)
    );
    assert_eq!(report.get(id, None, Metric::MeanPoints, None), Some(120.0));
    assert_eq!(
        report.get(id, None, Metric::TruthfulCutRate, Some(5)),
        Some(0.0)
    );
}

fn random_batch(alpha: f64, seed: u64) -> BatchConfig {
    BatchConfig {
        procedures: vec![
            ProcedureId::Acc2,
            ProcedureId::Scc2,
            ProcedureId::Sc3,
            ProcedureId::Ld3,
        ],
        alpha,
        others: vec![PolicyKind::RandomCuts],
        repetitions: 40,
        rounds: 2,
        profile: ProfileChoice::Lab,
        seed,
    }
}

#[test]
fn batch_is_deterministic_and_monotone_in_tolerance() {
    let tol = Tolerances::default();
    let a = simulate_batch(&random_batch(0.3, 9), &tol).unwrap();
    let b = simulate_batch(&random_batch(0.3, 9), &tol).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.records, b.records);
    for row in a
        .report
        .rows
        .iter()
        .filter(|r| r.metric == Metric::EnvyRate)
    {
        let at = |t| {
            a.report
                .get(row.procedure, row.round, Metric::EnvyRate, Some(t))
                .unwrap()
        };
        assert!(at(10) <= at(5) && at(5) <= at(0), "{row:?}");
        assert!((0.0..=1.0).contains(&row.value));
    }
}

#[test]
fn batch_alpha_one_has_no_envy_in_envy_free_procedures() {
    let out = simulate_batch(&random_batch(1.0, 3), &Tolerances::default()).unwrap();
    for id in [ProcedureId::Acc2, ProcedureId::Scc2, ProcedureId::Sc3] {
        assert_eq!(
            out.report.get(id, None, Metric::EnvyRate, Some(0)),
            Some(0.0),
            "{id}"
        );
    }
}

#[test]
fn batch_mixed_alpha_envy_lies_between_extremes() {
    let tol = Tolerances::default();
    let envy = |alpha| {
        simulate_batch(&random_batch(alpha, 5), &tol)
            .unwrap()
            .report
            .get(ProcedureId::Sc3, None, Metric::EnvyRate, Some(0))
            .unwrap()
    };
    let (all, half, none) = (envy(1.0), envy(0.5), envy(0.0));
    assert!(all < half && half < none, "{all} {half} {none}");
}

#[test]
fn session_config_json_defaults() {
    let cfg: SessionConfig = serde_json::from_str(r#"{"order":["2acc","3SC"]}"#).unwrap();
    assert_eq!(cfg.rounds, 7);
    assert_eq!(cfg.reveal_round, 6);
    assert_eq!(cfg.order, vec![ProcedureId::Acc2, ProcedureId::Sc3]);
    assert!(serde_json::from_str::<SessionConfig>(r#"{"order":["5XX"]}"#).is_err());
    let bad = SessionConfig {
        reveal_round: 9,
        ..SessionConfig::default()
    };
    assert!(bad.validate().is_err());
    let wrong_arity = SessionConfig {
        order: vec![ProcedureId::Acc2],
        profiles: BTreeMap::from([(ProcedureId::Acc2, lab_profile(ProcedureId::Ds3).to_file())]),
        ..SessionConfig::default()
    };
    assert!(wrong_arity.validate().is_err());
}
