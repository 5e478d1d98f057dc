use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{ApSpec, LossModel, ScenarioError, SimScenario};
use crate::model::{
    BeaconRecord, CaptureMode, CaptureSession, RunSet, SourceLabel, MAX_RSSI_DBM, MIN_RSSI_DBM,
    TU_US,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainState {
    Good,
    Bad,
}

/// Emission times `phase + k * interval` strictly before `duration_us`.
pub fn beacon_schedule(ap: &ApSpec, duration_us: u64) -> Vec<u64> {
    let step = ap.interval_us();
    if step == 0 || ap.phase_offset_us >= duration_us {
        return Vec::new();
    }
    (0..)
        .map(|k| ap.phase_offset_us + k * step)
        .take_while(|t| *t < duration_us)
        .collect()
}

/// Probability that one beacon is captured.
pub fn capture_probability(rssi_dbm: f64, state: ChainState, loss: &LossModel, traffic_loss: f64) -> f64 {
    let p_state = match state {
        ChainState::Good => 1.0,
        ChainState::Bad => loss.transient.capture_prob_bad,
    };
    loss.p_signal(rssi_dbm) * (1.0 - traffic_loss) * p_state
}

/// Decides one beacon and advances the chain. Always consumes exactly two
/// uniforms (capture, then transition) so parameter changes never shift the
/// random stream.
pub fn capture_decision<R: Rng>(
    rssi_dbm: f64,
    state: ChainState,
    loss: &LossModel,
    cpu_load_factor: f64,
    traffic_loss: f64,
    rng: &mut R,
) -> (bool, ChainState) {
    let u_capture: f64 = rng.random();
    let u_move: f64 = rng.random();
    let captured = u_capture < capture_probability(rssi_dbm, state, loss, traffic_loss);
    let next = match state {
        ChainState::Good if u_move < loss.p_good_to_bad_at(cpu_load_factor) => ChainState::Bad,
        ChainState::Bad if u_move < loss.transient.p_bad_to_good => ChainState::Good,
        s => s,
    };
    (captured, next)
}

/// Normal-mode slot layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotTiming {
    pub slot_us: u64,
    /// Only captures this close to the slot start are reported.
    pub listen_us: u64,
}

impl SlotTiming {
    pub fn new(report_interval_tu: u32, listen_window_tu: u32) -> Self {
        let slot_us = report_interval_tu as u64 * TU_US;
        SlotTiming {
            slot_us,
            listen_us: (listen_window_tu as u64 * TU_US).min(slot_us),
        }
    }

    pub fn whole_slot(report_interval_tu: u32) -> Self {
        Self::new(report_interval_tu, report_interval_tu)
    }

    pub fn of(scenario: &SimScenario) -> Self {
        Self::new(scenario.report_interval_tu, scenario.listen_window_tu)
    }
}

/// Indices of the captured events that become records. Monitor delivers
/// everything. Normal delivers, per complete slot, the first capture inside
/// the slot's listen window; a slot with no such capture delivers nothing
/// and the AP next appears in a later slot.
pub fn delivered_indices(
    mode: CaptureMode,
    captured_us: &[u64],
    timing: SlotTiming,
    duration_us: u64,
) -> Vec<usize> {
    match mode {
        CaptureMode::Monitor => (0..captured_us.len()).filter(|&i| captured_us[i] < duration_us).collect(),
        CaptureMode::Normal => {
            if timing.slot_us == 0 {
                return Vec::new();
            }
            let n_slots = duration_us / timing.slot_us;
            let mut out = Vec::new();
            let mut last_slot = None;
            for (i, &t) in captured_us.iter().enumerate() {
                let slot = t / timing.slot_us;
                if slot >= n_slots || last_slot == Some(slot) {
                    continue;
                }
                if t - slot * timing.slot_us < timing.listen_us {
                    out.push(i);
                    last_slot = Some(slot);
                }
            }
            out
        }
    }
}

pub fn apply_mode_delivery(
    mode: CaptureMode,
    captured_us: &[u64],
    timing: SlotTiming,
    duration_us: u64,
) -> Vec<u64> {
    delivered_indices(mode, captured_us, timing, duration_us)
        .into_iter()
        .map(|i| captured_us[i])
        .collect()
}

fn rng_for(seed: u64, session: u64, ap: &ApSpec) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((session << 48) | ap.bssid.to_u64());
    rng
}

/// Records for one AP in one session. `session` indexes
/// `rp * runs + run`; each (session, AP) pair has its own random stream.
pub fn simulate_ap(scenario: &SimScenario, ap_index: usize, session: usize) -> Vec<BeaconRecord> {
    let ap = &scenario.aps[ap_index];
    let offset = scenario
        .rps
        .get(session / scenario.runs.max(1) as usize)
        .map_or(0.0, |rp| rp.offset_for(ap_index));
    let mean = ap.mean_rssi + offset;
    let traffic = ap.traffic_loss_prob.unwrap_or(scenario.loss.traffic_loss_prob);
    let loss = &scenario.loss;
    let cpu = scenario.cpu_load_factor;
    let duration_us = scenario.duration_us();

    let mut rng = rng_for(scenario.seed, session as u64, ap);
    let mut state = if rng.random::<f64>() < loss.stationary_bad(cpu) {
        ChainState::Bad
    } else {
        ChainState::Good
    };

    let mut times = Vec::new();
    let mut drawn = Vec::new();
    for (k, t) in beacon_schedule(ap, duration_us).into_iter().enumerate() {
        let z: f64 = StandardNormal.sample(&mut rng);
        let rssi = mean + ap.rssi_jitter_db * z;
        let (captured, next) = capture_decision(rssi, state, loss, cpu, traffic, &mut rng);
        state = next;
        if captured {
            times.push(t);
            drawn.push((rssi, k));
        }
    }

    let identity = ap.identity();
    delivered_indices(scenario.mode, &times, SlotTiming::of(scenario), duration_us)
        .into_iter()
        .map(|i| {
            let (rssi, k) = drawn[i];
            BeaconRecord {
                t_us: times[i],
                rssi_dbm: rssi.round().clamp(MIN_RSSI_DBM as f64, MAX_RSSI_DBM as f64) as i8,
                ap: identity,
                beacon_interval_tu: ap.beacon_interval_tu,
                sequence_number: Some((k % 4096) as u16),
                channel: ap.channel,
            }
        })
        .collect()
}

/// One session of the scenario. Does not validate.
pub fn simulate_run(scenario: &SimScenario, session: usize) -> CaptureSession {
    let runs = scenario.runs.max(1) as usize;
    let mut s = CaptureSession::new(scenario.mode, scenario.duration_us());
    for i in 0..scenario.aps.len() {
        s.records.extend(simulate_ap(scenario, i, session));
    }
    s.records.sort_by_key(|r| (r.t_us, r.ap.bssid));
    s.meta.label = SourceLabel {
        rp: scenario.rps.get(session / runs).map(|rp| rp.id.clone()),
        run: Some((session % runs) as u32),
        path: None,
    };
    s.meta.empty_warning = s.records.is_empty();
    s
}

/// All sessions of a scenario, in session order. Deterministic in
/// (scenario, seed); sessions run in parallel.
pub fn simulate(scenario: &SimScenario) -> Result<RunSet, ScenarioError> {
    scenario.validate()?;
    let runs = (0..scenario.session_count())
        .into_par_iter()
        .map(|i| simulate_run(scenario, i))
        .collect();
    Ok(RunSet {
        label: scenario.label.clone(),
        runs,
    })
}
