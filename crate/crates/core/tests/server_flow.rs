use serde_json::{json, Value};

use feedback_loom::eventlog;
use feedback_loom::server::{ConnId, Delivery, Hub, MessageType, ProtocolMessage};
use feedback_loom::{FeedbackSourcePolicy, Mode, PhaseSpan, SessionConfig, SessionPhase};

fn msg(kind: MessageType, payload: Value) -> ProtocolMessage {
    ProtocolMessage::new(kind, "room", payload)
}

fn to(deliveries: &[Delivery], conn: ConnId) -> Vec<&ProtocolMessage> {
    deliveries.iter().filter(|d| d.conn == conn).map(|d| &d.message).collect()
}

fn vc_config() -> SessionConfig {
    let mut cfg = SessionConfig::for_mode(Mode::VcFeedback);
    cfg.n_seats = 5;
    cfg.feedback_source = FeedbackSourcePolicy::ExternalObserver;
    cfg.phase_plan = vec![
        PhaseSpan { phase: SessionPhase::PreIntervention, duration_ticks: 2 },
        PhaseSpan { phase: SessionPhase::Intervention, duration_ticks: 50 },
    ];
    cfg
}

#[test]
fn dot_updates_reach_only_target_source_and_monitor() {
    let dir = tempfile::tempdir().unwrap();
    let mut hub = Hub::new(Some(dir.path().to_path_buf()));
    let monitor = hub.connect();
    hub.handle(monitor, msg(MessageType::Configure, serde_json::to_value(vc_config()).unwrap()), 0);
    let seats: Vec<ConnId> = (0..5)
        .map(|i| {
            let c = hub.connect();
            hub.handle(c, msg(MessageType::Join, json!({"seat": i, "display_name": format!("p{i}")})), 0);
            c
        })
        .collect();
    let observer = hub.connect();
    let out = hub.handle(observer, msg(MessageType::Join, json!({"role": {"observer": "observer"}})), 0);
    assert_eq!(out[0].message.kind, MessageType::StateUpdate);

    hub.handle(monitor, msg(MessageType::StartPhase, json!({"phase": "PreIntervention"})), 0);
    let early = hub.handle(
        observer,
        msg(MessageType::SliderInput, json!({"source_id": "observer", "target": 2, "axis": "Hue", "value": 0.0})),
        0,
    );
    assert_eq!(early.len(), 1);
    assert_eq!(early[0].message.payload["code"], "PhaseViolation");

    for t in 0..2 {
        hub.clock_tick("room", 100 * t).unwrap();
    }
    assert_eq!(hub.session("room").unwrap().state().phase, SessionPhase::Intervention);

    let out = hub.handle(
        observer,
        msg(MessageType::SliderInput, json!({"source_id": "observer", "target": 2, "axis": "Hue", "value": 0.0})),
        300,
    );
    let dots: Vec<&Delivery> = out.iter().filter(|d| d.message.kind == MessageType::DotUpdate).collect();
    let receivers: Vec<ConnId> = dots.iter().map(|d| d.conn).collect();
    assert!(receivers.contains(&seats[2]));
    assert!(receivers.contains(&observer));
    assert!(receivers.contains(&monitor));
    for (i, &c) in seats.iter().enumerate() {
        if i != 2 {
            assert!(to(&out, c).is_empty(), "seat {i} saw another seat's dot");
        }
    }
    let own = to(&out, seats[2]);
    assert_eq!(own[0].payload["hue"], 0.0);
    assert!(own[0].payload.get("context").is_none());
    let src = to(&out, observer);
    assert!(src[0].payload.get("context").is_some());

    // Participants cannot drive sliders as the observer.
    let out = hub.handle(
        seats[0],
        msg(MessageType::SliderInput, json!({"source_id": "observer", "target": 1, "axis": "Size", "value": 1.0})),
        400,
    );
    assert_eq!(out[0].message.payload["code"], "UnauthorizedSource");

    let session = hub.session("room").unwrap();
    let on_disk = eventlog::read_log(dir.path().join("room.jsonl")).unwrap();
    assert_eq!(on_disk, session.records());
    let replayed = eventlog::replay_log(&on_disk).unwrap();
    assert_eq!(replayed.digest(), session.state().digest());
}

#[test]
fn simulation_participants_never_see_listener_data() {
    let mut cfg = SessionConfig::for_mode(Mode::Simulation);
    cfg.n_seats = 4;
    cfg.phase_plan = vec![
        PhaseSpan { phase: SessionPhase::PreIntervention, duration_ticks: 1 },
        PhaseSpan { phase: SessionPhase::Intervention, duration_ticks: 100 },
    ];
    let mut hub = Hub::new(None);
    let monitor = hub.connect();
    let mut all = hub.handle(monitor, msg(MessageType::Configure, serde_json::to_value(&cfg).unwrap()), 0);
    let seats: Vec<ConnId> = (0..4).map(|_| hub.connect()).collect();
    for (i, &c) in seats.iter().enumerate() {
        all.extend(hub.handle(c, msg(MessageType::Join, json!({"seat": i})), 0));
    }
    all.extend(hub.handle(monitor, msg(MessageType::StartPhase, json!({"phase": "PreIntervention"})), 0));
    all.extend(hub.clock_tick("room", 0).unwrap());
    // Everyone tunes to seat 0.
    for &c in &seats[1..] {
        let seat = seats.iter().position(|s| *s == c).unwrap();
        all.extend(hub.handle(c, msg(MessageType::SetListen, json!({"seat": seat, "channel": 0})), 0));
    }
    all.extend(hub.handle(seats[0], msg(MessageType::ActivitySample, json!({"seat": 0, "tick": 1, "level": 0.9})), 0));
    all.extend(hub.clock_tick("room", 100).unwrap());

    for &c in &seats {
        for m in to(&all, c) {
            let text = m.to_line();
            for key in ["listen\"", "listener_counts", "listeners", "mutual_pairs", "edges"] {
                assert!(!text.contains(key), "participant message leaked {key}: {text}");
            }
        }
    }
    let monitor_msgs = to(&all, monitor);
    assert!(monitor_msgs.iter().any(|m| m.payload["view"] == "routing" && m.payload["listener_counts"][0] == 4));
    assert!(monitor_msgs
        .iter()
        .any(|m| m.payload["view"] == "heard" && m.payload["edges"].as_array().unwrap().len() == 4));
}
