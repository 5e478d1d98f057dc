//! Fits a loss model to target measurement rates by coordinate descent.
//!
//! Every evaluation re-simulates the templates with their own seeds, so the
//! objective sees the same random numbers at every parameter point.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{simulate, LossModel, ScenarioError, SimScenario};
use crate::metrics::{measurement_rate, miss_rate};
use crate::model::{theoretical_rate, CaptureMode, MacAddr, RunSet};

/// A parameter the fit may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FreeParam {
    Threshold,
    Slope,
    TrafficLoss,
    PGoodToBad,
    PBadToGood,
    CaptureProbBad,
    StressGain,
    /// Per-AP traffic loss override, by AP index.
    ApTrafficLoss(usize),
}

impl FreeParam {
    fn bounds(self) -> (f64, f64) {
        match self {
            FreeParam::Threshold => (-140.0, 0.0),
            FreeParam::Slope => (0.2, 30.0),
            FreeParam::PBadToGood => (0.001, 1.0),
            FreeParam::StressGain => (0.0, 50.0),
            _ => (0.0, 1.0),
        }
    }

    fn initial_step(self) -> f64 {
        match self {
            FreeParam::Threshold => 4.0,
            FreeParam::Slope => 2.0,
            FreeParam::StressGain => 1.0,
            FreeParam::PGoodToBad => 0.05,
            _ => 0.1,
        }
    }

    fn get(self, loss: &LossModel, templates: &[SimScenario]) -> f64 {
        match self {
            FreeParam::Threshold => loss.rssi_threshold_dbm,
            FreeParam::Slope => loss.rssi_slope_db,
            FreeParam::TrafficLoss => loss.traffic_loss_prob,
            FreeParam::PGoodToBad => loss.transient.p_good_to_bad,
            FreeParam::PBadToGood => loss.transient.p_bad_to_good,
            FreeParam::CaptureProbBad => loss.transient.capture_prob_bad,
            FreeParam::StressGain => loss.stress_gain,
            FreeParam::ApTrafficLoss(i) => templates
                .iter()
                .find_map(|t| t.aps.get(i).and_then(|a| a.traffic_loss_prob))
                .unwrap_or(loss.traffic_loss_prob),
        }
    }

    fn set(self, v: f64, loss: &mut LossModel, templates: &mut [SimScenario]) {
        match self {
            FreeParam::Threshold => loss.rssi_threshold_dbm = v,
            FreeParam::Slope => loss.rssi_slope_db = v,
            FreeParam::TrafficLoss => loss.traffic_loss_prob = v,
            FreeParam::PGoodToBad => loss.transient.p_good_to_bad = v,
            FreeParam::PBadToGood => loss.transient.p_bad_to_good = v,
            FreeParam::CaptureProbBad => loss.transient.capture_prob_bad = v,
            FreeParam::StressGain => loss.stress_gain = v,
            FreeParam::ApTrafficLoss(i) => {
                for t in templates.iter_mut() {
                    if let Some(ap) = t.aps.get_mut(i) {
                        ap.traffic_loss_prob = Some(v);
                    }
                }
            }
        }
    }
}

impl fmt::Display for FreeParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FreeParam::Threshold => f.write_str("rssi_threshold_dbm"),
            FreeParam::Slope => f.write_str("rssi_slope_db"),
            FreeParam::TrafficLoss => f.write_str("traffic_loss_prob"),
            FreeParam::PGoodToBad => f.write_str("p_good_to_bad"),
            FreeParam::PBadToGood => f.write_str("p_bad_to_good"),
            FreeParam::CaptureProbBad => f.write_str("capture_prob_bad"),
            FreeParam::StressGain => f.write_str("stress_gain"),
            FreeParam::ApTrafficLoss(i) => write!(f, "aps[{i}].traffic_loss_prob"),
        }
    }
}

impl FromStr for FreeParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "rssi_threshold_dbm" | "threshold" => FreeParam::Threshold,
            "rssi_slope_db" | "slope" => FreeParam::Slope,
            "traffic_loss_prob" => FreeParam::TrafficLoss,
            "p_good_to_bad" => FreeParam::PGoodToBad,
            "p_bad_to_good" => FreeParam::PBadToGood,
            "capture_prob_bad" => FreeParam::CaptureProbBad,
            "stress_gain" => FreeParam::StressGain,
            _ => {
                let idx = s
                    .strip_prefix("aps[")
                    .and_then(|r| r.strip_suffix("].traffic_loss_prob"))
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| format!("unknown calibration parameter `{s}`"))?;
                FreeParam::ApTrafficLoss(idx)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    /// Largest accepted relative rate error per target.
    pub tolerance: f64,
    pub max_evaluations: usize,
    pub free: Vec<FreeParam>,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            tolerance: 0.02,
            max_evaluations: 400,
            free: vec![FreeParam::Threshold, FreeParam::Slope],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Achieved {
    pub label: String,
    pub bssid: Option<MacAddr>,
    pub target_rate: f64,
    pub rate: f64,
    pub target_miss_rate_pct: Option<f64>,
    pub miss_rate_pct: f64,
}

impl Achieved {
    pub fn rel_error(&self) -> f64 {
        if self.target_rate == 0.0 {
            self.rate.abs()
        } else {
            (self.rate - self.target_rate).abs() / self.target_rate
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub loss: LossModel,
    /// The templates with the fitted model applied and targets annotated
    /// with achieved values.
    pub scenarios: Vec<SimScenario>,
    pub achieved: Vec<Achieved>,
    pub evaluations: usize,
    pub converged: bool,
}

impl CalibrationResult {
    pub fn max_rel_error(&self) -> f64 {
        self.achieved.iter().map(Achieved::rel_error).fold(0.0, f64::max)
    }
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("target rate {rate} for `{label}` exceeds the achievable {max:.4} pkt/s")]
    Infeasible { label: String, rate: f64, max: f64 },
    #[error("no calibration targets given")]
    NoTargets,
    #[error("calibration did not reach tolerance; best max relative error {:.4}", .0.max_rel_error())]
    NotConverged(Box<CalibrationResult>),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Mean rate of one AP (or of every AP) across the run set.
fn observed_rate(runs: &RunSet, scenario: &SimScenario, bssid: Option<MacAddr>) -> f64 {
    let per_ap = |b: MacAddr| mean(runs.runs.iter().map(|s| measurement_rate(s, b)));
    match bssid {
        Some(b) => per_ap(b),
        None => mean(scenario.aps.iter().map(|a| per_ap(a.bssid))),
    }
}

fn theoretical_for(scenario: &SimScenario, bssid: Option<MacAddr>) -> f64 {
    let ap = bssid
        .and_then(|b| scenario.aps.iter().find(|a| a.bssid == b))
        .unwrap_or(&scenario.aps[0]);
    theoretical_rate(scenario.mode, ap.beacon_interval_tu as u32, scenario.report_interval_tu)
        .unwrap_or(f64::NAN)
}

fn evaluate(templates: &[SimScenario]) -> Result<Vec<Achieved>, ScenarioError> {
    let mut out = Vec::new();
    for t in templates {
        let runs = simulate(t)?;
        for target in &t.targets {
            let rate = observed_rate(&runs, t, target.bssid);
            out.push(Achieved {
                label: t.label.clone(),
                bssid: target.bssid,
                target_rate: target.rate,
                rate,
                target_miss_rate_pct: target.miss_rate_pct,
                miss_rate_pct: miss_rate(rate, theoretical_for(t, target.bssid)).unwrap_or(f64::NAN),
            });
        }
    }
    Ok(out)
}

fn objective(achieved: &[Achieved]) -> f64 {
    achieved.iter().map(|a| a.rel_error().powi(2)).sum()
}

/// Highest rate the template could show with no loss at all: the larger of
/// the theoretical rate and the zero-loss schedule count over the duration.
fn achievable_rate(template: &SimScenario, bssid: Option<MacAddr>) -> Result<f64, ScenarioError> {
    let mut lossless = template.clone();
    lossless.loss = LossModel::lossless();
    lossless.runs = 1;
    lossless.rps.clear();
    for ap in &mut lossless.aps {
        ap.traffic_loss_prob = None;
        ap.rssi_jitter_db = 0.0;
        ap.mean_rssi = 0.0;
    }
    let runs = simulate(&lossless)?;
    Ok(observed_rate(&runs, &lossless, bssid).max(theoretical_for(template, bssid)))
}

const SCAN_POINTS: usize = 16;
const GRID_POINTS: usize = 9;
const MAX_RESTARTS: usize = 3;

fn apply_loss(loss: &LossModel, work: &mut [SimScenario]) {
    for t in work.iter_mut() {
        t.loss = *loss;
    }
}

struct Fit {
    best: Vec<Achieved>,
    loss: LossModel,
    work: Vec<SimScenario>,
    evaluations: usize,
}

impl Fit {
    fn point(&self, free: &[FreeParam]) -> Vec<f64> {
        free.iter().map(|p| p.get(&self.loss, &self.work)).collect()
    }

    /// Objective at `x` (clamped to bounds); keeps the point if it is the
    /// best seen so far.
    fn eval_at(&mut self, free: &[FreeParam], x: &[f64]) -> Result<f64, ScenarioError> {
        let mut loss = self.loss;
        let mut work = self.work.clone();
        for (p, v) in free.iter().zip(x) {
            let (lo, hi) = p.bounds();
            p.set(v.clamp(lo, hi), &mut loss, &mut work);
        }
        apply_loss(&loss, &mut work);
        let got = evaluate(&work)?;
        self.evaluations += 1;
        let obj = objective(&got);
        if obj < objective(&self.best) {
            self.best = got;
            self.loss = loss;
            self.work = work;
        }
        Ok(obj)
    }

    /// Moves `p` to `value` if that lowers the objective.
    fn try_value(&mut self, free: &[FreeParam], i: usize, value: f64) -> Result<(), ScenarioError> {
        let mut x = self.point(free);
        x[i] = value;
        self.eval_at(free, &x).map(|_| ())
    }
}

fn clamp_point(free: &[FreeParam], x: &mut [f64]) {
    for (p, v) in free.iter().zip(x.iter_mut()) {
        let (lo, hi) = p.bounds();
        *v = v.clamp(lo, hi);
    }
}

/// Nelder-Mead simplex search from the current best point. Returns when the
/// simplex collapses, `stop` holds, or the evaluation budget runs out.
fn simplex_search(
    fit: &mut Fit,
    free: &[FreeParam],
    budget: usize,
    stop: &dyn Fn(&[Achieved]) -> bool,
) -> Result<(), ScenarioError> {
    let n = free.len();
    let start = fit.point(free);
    let mut simplex = vec![(start.clone(), objective(&fit.best))];
    for (i, p) in free.iter().enumerate() {
        let mut x = start.clone();
        let (lo, hi) = p.bounds();
        x[i] = if x[i] + p.initial_step() <= hi {
            x[i] + p.initial_step()
        } else {
            (x[i] - p.initial_step()).max(lo)
        };
        let f = fit.eval_at(free, &x)?;
        simplex.push((x, f));
    }
    let centroid = |s: &[(Vec<f64>, f64)]| -> Vec<f64> {
        (0..n)
            .map(|d| s[..n].iter().map(|(x, _)| x[d]).sum::<f64>() / n as f64)
            .collect()
    };
    let along = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        let mut x: Vec<f64> = c.iter().zip(w).map(|(c, w)| c + t * (w - c)).collect();
        clamp_point(free, &mut x);
        x
    };
    while fit.evaluations < budget && !stop(&fit.best) {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).zip(free))
            .map(|((a, b), p)| (a - b).abs() / p.initial_step())
            .fold(0.0, f64::max);
        if size < 1e-3 {
            break;
        }
        let c = centroid(&simplex);
        let worst = simplex[n].clone();
        let xr = along(&c, &worst.0, -1.0);
        let fr = fit.eval_at(free, &xr)?;
        if fr < simplex[0].1 {
            let xe = along(&c, &worst.0, -2.0);
            let fe = fit.eval_at(free, &xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = along(&c, &worst.0, 0.5);
            let fc = fit.eval_at(free, &xc)?;
            if fc < worst.1 {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x = along(&best, &v.0, 0.5);
                    let f = fit.eval_at(free, &x)?;
                    *v = (x, f);
                }
            }
        }
    }
    Ok(())
}

/// Fits one loss model shared by all templates. The starting point is the
/// first template's loss model; only the parameters in `opts.free` move.
pub fn calibrate(templates: &[SimScenario], opts: &CalibrationOptions) -> Result<CalibrationResult, CalibrationError> {
    if templates.iter().all(|t| t.targets.is_empty()) {
        return Err(CalibrationError::NoTargets);
    }
    for t in templates {
        t.validate()?;
        for target in &t.targets {
            let max = achievable_rate(t, target.bssid)?;
            if target.rate > max + 1e-9 {
                return Err(CalibrationError::Infeasible {
                    label: t.label.clone(),
                    rate: target.rate,
                    max,
                });
            }
        }
    }

    let mut loss = templates[0].loss;
    let mut work: Vec<SimScenario> = templates.to_vec();
    for p in &opts.free {
        let (lo, hi) = p.bounds();
        let v = p.get(&loss, &work).clamp(lo, hi);
        p.set(v, &mut loss, &mut work);
    }
    apply_loss(&loss, &mut work);

    let mut fit = Fit {
        best: evaluate(&work)?,
        loss,
        work,
        evaluations: 1,
    };
    let done = |a: &[Achieved]| a.iter().all(|x| x.rel_error() <= opts.tolerance * 0.25);

    // Coarse grid first: near saturation the objective is flat under small
    // moves and a local search would stall on a plateau. Small parameter
    // sets get a joint grid, larger ones a per-axis scan.
    let n_free = opts.free.len() as u32;
    if n_free > 0 && GRID_POINTS.saturating_pow(n_free) <= opts.max_evaluations / 2 {
        for cell in 0..GRID_POINTS.pow(n_free) {
            if done(&fit.best) {
                break;
            }
            let mut rest = cell;
            let x: Vec<f64> = opts
                .free
                .iter()
                .map(|p| {
                    let (lo, hi) = p.bounds();
                    let k = rest % GRID_POINTS;
                    rest /= GRID_POINTS;
                    lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64
                })
                .collect();
            fit.eval_at(&opts.free, &x)?;
        }
    } else {
        for _ in 0..2 {
            for (i, p) in opts.free.iter().enumerate() {
                let (lo, hi) = p.bounds();
                for k in 0..=SCAN_POINTS {
                    if fit.evaluations >= opts.max_evaluations || done(&fit.best) {
                        break;
                    }
                    fit.try_value(&opts.free, i, lo + (hi - lo) * k as f64 / SCAN_POINTS as f64)?;
                }
            }
        }
    }

    // Simplex refinement, restarted from the best point when it collapses;
    // the threshold/slope valleys are narrow and diagonal.
    for _ in 0..=MAX_RESTARTS {
        if fit.evaluations >= opts.max_evaluations || done(&fit.best) || opts.free.is_empty() {
            break;
        }
        simplex_search(&mut fit, &opts.free, opts.max_evaluations, &done)?;
    }
    let Fit {
        best,
        loss,
        mut work,
        evaluations,
    } = fit;

    let mut k = 0;
    for t in work.iter_mut() {
        for target in t.targets.iter_mut() {
            // Rounded so the annotated file reads cleanly.
            target.achieved_rate = Some((best[k].rate * 1e6).round() / 1e6);
            target.achieved_miss_rate_pct = Some((best[k].miss_rate_pct * 1e4).round() / 1e4);
            k += 1;
        }
    }
    let converged = best.iter().all(|a| a.rel_error() <= opts.tolerance);
    let result = CalibrationResult {
        loss,
        scenarios: work,
        achieved: best,
        evaluations,
        converged,
    };
    if converged {
        Ok(result)
    } else {
        Err(CalibrationError::NotConverged(Box::new(result)))
    }
}

/// Splits templates by capture mode and fits one model per mode, normal
/// first.
pub fn calibrate_by_mode(
    templates: &[SimScenario],
    opts: &CalibrationOptions,
) -> Vec<(CaptureMode, Result<CalibrationResult, CalibrationError>)> {
    let mut groups: BTreeMap<CaptureMode, Vec<SimScenario>> = BTreeMap::new();
    for t in templates {
        groups.entry(t.mode).or_default().push(t.clone());
    }
    groups
        .into_iter()
        .map(|(mode, group)| (mode, calibrate(&group, opts)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ApSpec, RateTarget};

    fn template(mode: CaptureMode, rssi: f64, rate: f64) -> SimScenario {
        let mut s = SimScenario::new(
            mode,
            vec![ApSpec::new(MacAddr([2, 0, 0, 0, 0, 1]), rssi)],
            LossModel {
                rssi_threshold_dbm: -90.0,
                rssi_slope_db: 5.0,
                ..LossModel::lossless()
            },
        );
        s.label = format!("{mode}{rssi}");
        s.runs = 4;
        s.targets.push(RateTarget::new(rate));
        s
    }

    #[test]
    fn param_names_round_trip() {
        for p in [
            FreeParam::Threshold,
            FreeParam::Slope,
            FreeParam::TrafficLoss,
            FreeParam::PGoodToBad,
            FreeParam::PBadToGood,
            FreeParam::CaptureProbBad,
            FreeParam::StressGain,
            FreeParam::ApTrafficLoss(3),
        ] {
            assert_eq!(p.to_string().parse::<FreeParam>().unwrap(), p);
        }
        assert!("bogus".parse::<FreeParam>().is_err());
    }

    #[test]
    fn over_theoretical_is_infeasible() {
        let t = template(CaptureMode::Monitor, -60.0, 10.5);
        assert!(matches!(
            calibrate(&[t], &CalibrationOptions::default()),
            Err(CalibrationError::Infeasible { .. })
        ));
    }

    #[test]
    fn zero_loss_target_drives_loss_away() {
        let t = template(CaptureMode::Monitor, -60.0, 9.77);
        let r = calibrate(&[t], &CalibrationOptions::default()).unwrap();
        assert!(r.loss.p_signal(-60.0) > 0.995, "{:?}", r.loss);
        assert!(r.scenarios[0].targets[0].achieved_rate.unwrap() > 9.7);
    }

    #[test]
    fn two_levels_share_one_model() {
        let ts = [
            template(CaptureMode::Monitor, -60.0, 9.5),
            template(CaptureMode::Monitor, -80.0, 7.0),
        ];
        let r = calibrate(&ts, &CalibrationOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.max_rel_error() <= 0.02);
        assert_eq!(r.scenarios[0].loss, r.scenarios[1].loss);
    }

    #[test]
    fn budget_exhaustion_reports_best() {
        let ts = [template(CaptureMode::Normal, -80.0, 0.3)];
        let opts = CalibrationOptions {
            max_evaluations: 1,
            ..Default::default()
        };
        match calibrate(&ts, &opts) {
            Err(CalibrationError::NotConverged(best)) => {
                assert!(!best.converged);
                assert_eq!(best.evaluations, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grouped_by_mode() {
        let ts = [
            template(CaptureMode::Monitor, -60.0, 9.5),
            template(CaptureMode::Normal, -60.0, 0.9),
        ];
        let out = calibrate_by_mode(&ts, &CalibrationOptions::default());
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].0, CaptureMode::Normal);
        assert!(out.iter().all(|(_, r)| r.is_ok()), "{out:?}");
    }
}
