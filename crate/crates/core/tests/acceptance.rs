//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p feedback-loom --test acceptance`.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use feedback_loom::agents::{self, AgentParams, FeedbackPolicy, ScenarioOptions};
use feedback_loom::eventlog::{self, LogWriter};
use feedback_loom::metrics::{self, CodedValue, Dimension};
use feedback_loom::reflect::{self, ReflectParams};
use feedback_loom::routing;
use feedback_loom::server::route::{collect_keys, route_outbound, ANALYSIS_ONLY_KEYS};
use feedback_loom::server::{ClientRole, MessageType, Origin, ProtocolMessage, Session};
use feedback_loom::tic::{self, AssignmentViolation};
use feedback_loom::{Event, EventRecord, FeedbackSourcePolicy, Mode, PhaseSpan, SeatId, SessionConfig, SessionPhase};

type Criterion = (&'static str, fn() -> Outcome, Duration);

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn plan(pre: u64, intervention: u64, debrief: u64) -> Vec<PhaseSpan> {
    vec![
        PhaseSpan { phase: SessionPhase::PreIntervention, duration_ticks: pre },
        PhaseSpan { phase: SessionPhase::Intervention, duration_ticks: intervention },
        PhaseSpan { phase: SessionPhase::Debrief, duration_ticks: debrief },
    ]
}

fn reference_cycle() -> Outcome {
    let reference = [5u32, 7, 4, 1, 6, 3, 0, 2];
    let accepted = tic::validate_assignment(&reference, 8).is_ok();
    let walk = tic::AssignmentCycle::new(reference.iter().map(|&t| SeatId(t)).collect())
        .map(|c| c.to_string())
        .unwrap_or_default();
    let walk_ok = walk == "0→5→3→1→7→2→4→6→0";

    let mut perturbations = 0;
    let mut rejected = 0;
    for i in 0..8 {
        for j in (i + 1)..8 {
            let mut p = reference;
            p.swap(i, j);
            perturbations += 1;
            rejected += usize::from(tic::validate_assignment(&p, 8).is_err());
        }
        for v in 0..8u32 {
            if v == reference[i] {
                continue;
            }
            let mut p = reference;
            p[i] = v;
            perturbations += 1;
            rejected +=
                usize::from(matches!(tic::validate_assignment(&p, 8), Err(AssignmentViolation::NotAPermutation)));
        }
    }
    check(
        accepted && walk_ok && rejected == perturbations,
        format!("reference {walk} accepted={accepted}; {rejected}/{perturbations} perturbations rejected"),
    )
}

fn assignment_oracle() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for n in [5u32, 6, 7, 8] {
        let oracle = common::admissible_cycles(n);
        let mut reached = BTreeSet::new();
        let mut errors = 0;
        for seed in 0..10_000u64 {
            match tic::generate_assignment(n, seed) {
                Ok(c) => {
                    reached.insert(c.targets().iter().map(|s| s.0).collect::<Vec<_>>());
                }
                Err(feedback_loom::Error::NoValidAssignment { .. }) => errors += 1,
                Err(_) => ok = false,
            }
        }
        let this_ok =
            if oracle.is_empty() { errors == 10_000 && reached.is_empty() } else { errors == 0 && reached == oracle };
        ok &= this_ok;
        notes.push(format!("n={n}: oracle {} reached {} errors {errors}", oracle.len(), reached.len()));
    }
    check(ok, notes.join("; "))
}

fn apportionment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11_0C8);
    let mut failures = Vec::new();
    for case in 0..1000 {
        let n = rng.random_range(1..=8usize);
        let cells = rng.random_range(1..=64u32);
        let weights: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random::<f64>() }).collect();
        let params = ReflectParams { half_life_ticks: 300, cell_count: cells, activity_floor: 0.0 };
        let got = reflect::allocate_territory(&weights, &params);
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            if got.iter().any(|&c| c != 0) {
                failures.push(format!("case {case}: silent table got cells"));
            }
            continue;
        }
        if got.iter().sum::<u32>() != cells {
            failures.push(format!("case {case}: conservation"));
        }
        for (i, &c) in got.iter().enumerate() {
            let quota = weights[i] * f64::from(cells) / total;
            if (f64::from(c) - quota).abs() >= 1.0 {
                failures.push(format!("case {case}: quota seat {i}"));
            }
            for (j, &d) in got.iter().enumerate() {
                if weights[i] > weights[j] && c < d {
                    failures.push(format!("case {case}: monotonicity {i}>{j}"));
                }
            }
        }
        if got != common::hamilton(&weights, cells) {
            failures.push(format!("case {case}: oracle mismatch"));
        }
    }
    check(failures.is_empty(), format!("1000 instances, {} failures {:?}", failures.len(), failures.first()))
}

fn hidden_listener() -> Outcome {
    let mut cfg = SessionConfig::for_mode(Mode::Simulation);
    cfg.n_seats = 12;
    cfg.phase_plan = plan(400, 1600, 100);
    let agents: Vec<AgentParams> =
        (0..12).map(|i| AgentParams::new(0.15 + 0.05 * (i % 4) as f64, 0.0, 500 + i)).collect();
    let run = match agents::run_scenario(&cfg, &agents, 2100, &FeedbackPolicy::None, &ScenarioOptions::default()) {
        Ok(run) => run,
        Err(e) => return check(false, format!("scenario failed: {e}")),
    };
    let states = match eventlog::replay_states(&run.log, &cfg) {
        Ok(states) => states,
        Err(e) => return check(false, format!("replay failed: {e}")),
    };

    let forbidden: BTreeSet<String> = ANALYSIS_ONLY_KEYS.iter().map(|k| k.to_string()).collect();
    let mut to_participants = 0usize;
    let mut leaks = 0usize;
    let mut changes = 0usize;
    let mut pair_mismatches = 0usize;
    let mut monitor_routing_views = 0usize;
    for step in states {
        let (record, state) = match step {
            Ok(s) => s,
            Err(e) => return check(false, format!("replay failed: {e}")),
        };
        for out in route_outbound(&state, record, "sim", 0) {
            match out.to {
                ClientRole::Participant(_) => {
                    to_participants += 1;
                    let mut keys = BTreeSet::new();
                    collect_keys(&out.message.payload, &mut keys);
                    if !keys.is_disjoint(&forbidden) {
                        leaks += 1;
                    }
                }
                ClientRole::Monitor if out.message.payload["view"] == "routing" => monitor_routing_views += 1,
                _ => {}
            }
        }
        if let Event::SetListen { .. } = record.event {
            changes += 1;
            let r = state.routing().expect("routing session");
            let listen: Vec<u32> = r.listen.iter().map(|s| s.0).collect();
            let engine: BTreeSet<(u32, u32)> = routing::mutual_pairs(r).into_iter().map(|(a, b)| (a.0, b.0)).collect();
            if engine != common::mutual_pairs_brute(&listen) {
                pair_mismatches += 1;
            }
        }
    }
    check(
        leaks == 0 && pair_mismatches == 0 && changes > 100 && run.speaking.len() >= 2000,
        format!(
            "{} ticks, {to_participants} participant messages, {leaks} leaks; {changes} routing changes, {pair_mismatches} mutual-pair mismatches, {monitor_routing_views} monitor routing views",
            run.speaking.len()
        ),
    )
}

fn replay_determinism() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return check(false, format!("tempdir: {e}")),
    };
    let mut matched = 0;
    let mut notes = Vec::new();
    for k in 0..20u64 {
        let mode = Mode::ALL[(k % 4) as usize];
        let mut cfg = SessionConfig::for_mode(mode);
        cfg.rng_seed = k;
        cfg.phase_plan = plan(100 + 10 * k, 300, 50);
        if mode == Mode::VcFeedback {
            cfg.feedback_source = [
                FeedbackSourcePolicy::ExternalObserver,
                FeedbackSourcePolicy::ParticipantCycle,
                FeedbackSourcePolicy::Mixed,
            ][(k / 4 % 3) as usize];
        }
        let agents: Vec<AgentParams> = cfg
            .seats()
            .map(|s| AgentParams::new(0.1 + 0.08 * f64::from(s.0 % 5), 0.8, k * 1000 + u64::from(s.0)))
            .collect();
        let policy = if k % 3 == 0 { FeedbackPolicy::None } else { FeedbackPolicy::EqualizeShares };
        let run = match agents::run_scenario(&cfg, &agents, 500, &policy, &ScenarioOptions::default()) {
            Ok(r) => r,
            Err(e) => {
                notes.push(format!("scenario {k}: {e}"));
                continue;
            }
        };
        let path = dir.path().join(format!("s{k}.jsonl"));
        let replayed = eventlog::write_log(&path, &run.log)
            .and_then(|_| eventlog::read_log(&path))
            .and_then(|log| eventlog::replay_log(&log));
        match replayed {
            Ok(state) if state.to_canonical_json() == run.state.to_canonical_json() => matched += 1,
            Ok(_) => notes.push(format!("scenario {k} ({mode:?}) diverged")),
            Err(e) => notes.push(format!("scenario {k}: {e}")),
        }
    }
    check(matched == 20, format!("{matched}/20 scenarios byte-identical {}", notes.join("; ")))
}

fn directional_effect() -> Outcome {
    const TICKS: u64 = 4000;
    let quarter = (TICKS / 4) as usize;
    let mut cfg = SessionConfig::for_mode(Mode::VcFeedback);
    cfg.n_seats = 4;
    cfg.phase_plan = vec![
        PhaseSpan { phase: SessionPhase::PreIntervention, duration_ticks: 1000 },
        PhaseSpan { phase: SessionPhase::Intervention, duration_ticks: 3000 },
    ];
    let thetas = [0.2, 0.4, 0.6, 0.8];

    let contrasts = |rho: f64| -> Result<Vec<f64>, feedback_loom::Error> {
        (0..20u64)
            .map(|seed| {
                let agents: Vec<AgentParams> =
                    thetas.iter().enumerate().map(|(i, &t)| AgentParams::new(t, rho, seed * 97 + i as u64)).collect();
                let run = agents::run_scenario(
                    &cfg,
                    &agents,
                    TICKS,
                    &FeedbackPolicy::EqualizeShares,
                    &ScenarioOptions::default(),
                )?;
                let first = agents::share_variance_between(&run.speaking, 0, quarter);
                let last = agents::share_variance_between(&run.speaking, 3 * quarter, 4 * quarter);
                Ok(first - last)
            })
            .collect()
    };
    let (mut conform, mut ignore) = match (contrasts(0.8), contrasts(0.0)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return check(false, format!("scenario failed: {e}")),
    };
    let effect = common::median(&mut conform);
    let null = common::median(&mut ignore);
    check(
        effect > 0.0 && null.abs() < 0.2 * effect,
        format!("median variance reduction ρ=0.8: {effect:.5}; ρ=0: {null:.5} (bound {:.5})", 0.2 * effect),
    )
}

fn coded(start: u64, end: u64, value: u8, coder: &str) -> CodedValue {
    CodedValue { start, end, seat: SeatId(0), dimension: Dimension::Involvement, value, coder_id: coder.to_string() }
}

fn metrics_checks() -> Outcome {
    let g_equal = metrics::equality_gini(&[0.25; 4]);
    let g_one = metrics::equality_gini(&[1.0, 0.0, 0.0, 0.0]);
    let x =
        metrics::extremity_index(&[coded(0, 1, 1, "a"), coded(0, 1, 5, "a"), coded(0, 1, 1, "a"), coded(0, 1, 5, "a")]);

    // A session whose Intervention starts at tick 5.
    let mut cfg = SessionConfig::for_mode(Mode::Reflect);
    cfg.n_seats = 4;
    cfg.phase_plan = plan(5, 5, 0);
    let (mut s, _) = Session::create("m", cfg, None, None, 0).expect("valid config");
    s.submit(&Origin::Server, Event::StartPhase { phase: SessionPhase::PreIntervention }, 0).unwrap();
    for _ in 0..12 {
        s.clock_tick(0).unwrap();
    }
    let log: Vec<EventRecord> = s.records().to_vec();
    let boundary = metrics::intervention_boundary(&log);
    let values = vec![
        coded(0, 4, 3, "a"),
        coded(2, 4, 4, "a"),
        coded(4, 5, 1, "a"),
        coded(5, 9, 1, "a"),
        coded(6, 9, 5, "a"),
        coded(0, 4, 2, "b"),
        coded(5, 6, 5, "b"),
    ];
    let report = match metrics::build_report(&log, Some(&values)) {
        Ok(r) => r,
        Err(e) => return check(false, format!("report failed: {e}")),
    };
    let a = &report.extremity.per_coder["a"];
    let b = &report.extremity.per_coder["b"];
    let split_ok = boundary.map(|b| b.tick) == Some(5)
        && a.pre == Some(0.5)
        && a.post == Some(2.0)
        && a.n_straddling == 1
        && b.pre == Some(1.0)
        && b.post == Some(2.0)
        && report.extremity.mean.pre == Some(0.75)
        && report.extremity.mean.post == Some(2.0);
    let ok = g_equal == 0.0
        && (g_one - 0.75).abs() <= 1e-9
        && (g_one - common::gini_pairwise(&[1.0, 0.0, 0.0, 0.0])).abs() <= 1e-12
        && x == Ok(2.0)
        && split_ok;
    check(
        ok,
        format!(
            "gini(equal)={g_equal} gini(1,0,0,0)={g_one} extremity={:?}; boundary tick {:?}, split a={:?}/{:?} b={:?}/{:?}",
            x.ok(),
            boundary.map(|b| b.tick),
            a.pre,
            a.post,
            b.pre,
            b.post
        ),
    )
}

fn phase_gating() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return check(false, format!("tempdir: {e}")),
    };
    let mut refused = 0;
    let mut attempts = 0;
    let mut feedback_lines = 0;
    let mut accepted_after = 0;
    for mode in [Mode::Tic, Mode::VcFeedback] {
        let path = dir.path().join(format!("{mode:?}.jsonl"));
        let log = LogWriter::open(&path).expect("log file");
        let mut cfg = SessionConfig::for_mode(mode);
        cfg.phase_plan = plan(20, 20, 5);
        let (mut s, _) = Session::create("g", cfg, Some(log), None, 0).expect("valid config");
        let participant = Origin::client([ClientRole::Participant(SeatId(0))]);
        let observer = Origin::client([ClientRole::Observer("observer".into())]);
        let (origin, message) = match mode {
            Mode::Tic => (
                &participant,
                ProtocolMessage::new(MessageType::PedalInput, "g", serde_json::json!({"seat": 0, "position": 0.9})),
            ),
            _ => (
                &observer,
                ProtocolMessage::new(
                    MessageType::SliderInput,
                    "g",
                    serde_json::json!({"source_id": "observer", "target": 1, "axis": "Hue", "value": 0.0}),
                ),
            ),
        };
        // Lobby, then every baseline tick.
        for t in 0..=20 {
            if t == 1 {
                s.submit(&Origin::Server, Event::StartPhase { phase: SessionPhase::PreIntervention }, 0).unwrap();
            }
            if s.state().phase >= SessionPhase::Intervention {
                break;
            }
            attempts += 1;
            if let Err(rej) = s.handle_message(origin, &message, 0) {
                refused += usize::from(rej.error.code() == "PhaseViolation");
            }
            if t >= 1 {
                s.clock_tick(0).unwrap();
            }
        }
        let text = std::fs::read_to_string(&path).unwrap_or_default();
        let records = eventlog::parse_log(&text).unwrap_or_default();
        feedback_lines += records.iter().filter(|r| r.event.is_feedback_input()).count();
        if s.state().phase == SessionPhase::Intervention && s.handle_message(origin, &message, 0).is_ok() {
            accepted_after += 1;
        }
    }
    check(
        refused == attempts && feedback_lines == 0 && accepted_after == 2,
        format!("{refused}/{attempts} early inputs refused with PhaseViolation; {feedback_lines} feedback events in baseline logs; accepted once live in {accepted_after}/2 modes"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("reference cycle check", reference_cycle, Duration::from_secs(1)),
        ("assignment oracle equivalence", assignment_oracle, Duration::from_secs(60)),
        ("apportionment suite", apportionment, Duration::from_secs(10)),
        ("hidden-listener property", hidden_listener, Duration::from_secs(30)),
        ("replay determinism", replay_determinism, Duration::from_secs(60)),
        ("directional agent effect", directional_effect, Duration::from_secs(60)),
        ("metrics checks", metrics_checks, Duration::from_secs(60)),
        ("phase gating", phase_gating, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let started = Instant::now();
        let outcome = run();
        let elapsed = started.elapsed();
        let in_time = elapsed <= budget;
        let pass = outcome.ok && in_time;
        failed += usize::from(!pass);
        println!(
            "{} {name}: {} [{:.2}s / {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
