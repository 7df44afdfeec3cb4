//! Fixtures shared by the criterion benches.

use feedback_loom::agents::{self, AgentParams, FeedbackPolicy, ScenarioOptions, ScenarioRun};
use feedback_loom::{Mode, PhaseSpan, SessionConfig, SessionPhase};

/// A session config for `mode` whose plan spans `ticks` ticks, half baseline.
pub fn config(mode: Mode, ticks: u64) -> SessionConfig {
    let mut cfg = SessionConfig::for_mode(mode);
    cfg.phase_plan = vec![
        PhaseSpan { phase: SessionPhase::PreIntervention, duration_ticks: ticks / 2 },
        PhaseSpan { phase: SessionPhase::Intervention, duration_ticks: ticks - ticks / 2 },
    ];
    cfg
}

pub fn agents_for(cfg: &SessionConfig, seed: u64) -> Vec<AgentParams> {
    cfg.seats().map(|s| AgentParams::new(0.1 + 0.05 * f64::from(s.0 % 8), 0.8, seed + u64::from(s.0))).collect()
}

pub fn scenario(mode: Mode, ticks: u64, seed: u64) -> ScenarioRun {
    let cfg = config(mode, ticks);
    agents::run_scenario(
        &cfg,
        &agents_for(&cfg, seed),
        ticks,
        &FeedbackPolicy::EqualizeShares,
        &ScenarioOptions::default(),
    )
    .expect("bench fixtures use valid configs")
}
