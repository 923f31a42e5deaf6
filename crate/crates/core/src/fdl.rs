//! Detection, localization and characterization on top of an estimator bank.


use log::{debug, info};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{BankOutput, EstimatorBank, MeasurementFrame, MeasurementModel};
use crate::linalg::percentile;
use crate::phase::Phase;

/// Fewest no-fault frames accepted by [`calibrate`].
pub const MIN_CALIBRATION_FRAMES: usize = 1000;
/// Thresholds never drop below this, so exact data still has a margin.
pub const THRESHOLD_FLOOR: f64 = 1e-12;
/// Below this estimated virtual-bus current (amperes) no phase stands out.
pub const MIN_FAULT_CURRENT: f64 = 1e-3;
const PERCENTILE: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Mean of successive base-model residual differences.
    pub mu_dw0: f64,
    pub th_w: f64,
    pub th_0ng: f64,
    /// Upper no-fault level of the base-model residual.
    pub th_w0: f64,
    /// No-fault mean residual per cluster model (cluster 1 first).
    pub mu_w: Vec<f64>,
    pub sample_count: usize,
}

/// Calibrate from bank outputs of consecutive no-fault frames.
pub fn calibrate_outputs(outputs: &[BankOutput], min_frames: usize) -> Result<Calibration> {
    if outputs.len() < min_frames.max(2) {
        return Err(Error::Calibration(format!(
            "{} frames, need at least {}",
            outputs.len(),
            min_frames.max(2)
        )));
    }
    let r = outputs[0].wmr.len() - 1;
    let dw0: Vec<f64> = outputs.windows(2).map(|w| w[1].wmr[0] - w[0].wmr[0]).collect();
    let mu_dw0 = dw0.iter().sum::<f64>() / dw0.len() as f64;
    let dev: Vec<f64> = dw0.iter().map(|d| (d - mu_dw0).abs()).collect();
    let zs: Vec<f64> = outputs.iter().map(|o| max_cluster(&o.zero_seq)).collect();
    let w0: Vec<f64> = outputs.iter().map(|o| o.wmr[0]).collect();
    let n = outputs.len() as f64;
    let mu_w = (1..=r)
        .map(|k| outputs.iter().map(|o| o.wmr[k]).sum::<f64>() / n)
        .collect();
    Ok(Calibration {
        mu_dw0,
        th_w: percentile(&dev, PERCENTILE).max(THRESHOLD_FLOOR),
        th_0ng: percentile(&zs, PERCENTILE).max(THRESHOLD_FLOOR),
        th_w0: percentile(&w0, PERCENTILE).max(THRESHOLD_FLOOR),
        mu_w,
        sample_count: outputs.len(),
    })
}

/// Thresholds and no-fault means from a run of consecutive no-fault frames.
pub fn calibrate(bank: &EstimatorBank, frames: &[MeasurementFrame]) -> Result<Calibration> {
    calibrate_with_min(bank, frames, MIN_CALIBRATION_FRAMES)
}

pub fn calibrate_with_min(
    bank: &EstimatorBank,
    frames: &[MeasurementFrame],
    min_frames: usize,
) -> Result<Calibration> {
    let outputs = frames
        .iter()
        .map(|f| Ok(bank.evaluate(&bank.z(f)?)))
        .collect::<Result<Vec<_>>>()?;
    let cal = calibrate_outputs(&outputs, min_frames)?;
    if cal.mu_w.len() != bank.r() {
        return Err(Error::Calibration("bank and outputs disagree".into()));
    }
    Ok(cal)
}

fn max_cluster(zero_seq: &[f64]) -> f64 {
    zero_seq.iter().skip(1).copied().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionPath {
    Wmr,
    ZeroSequence,
}

/// Residual jump test first, zero-sequence test second. `zero_seq` holds one
/// entry per bank member; the base model is ignored.
pub fn detect(
    cal: &Calibration,
    w0: f64,
    w0_prev: Option<f64>,
    zero_seq: &[f64],
) -> Option<DetectionPath> {
    if let Some(prev) = w0_prev {
        if ((w0 - prev) - cal.mu_dw0).abs() > cal.th_w {
            return Some(DetectionPath::Wmr);
        }
    }
    (max_cluster(zero_seq) > cal.th_0ng).then_some(DetectionPath::ZeroSequence)
}

/// Cluster (1-based) whose windowed mean residual moved least from its
/// no-fault mean. Each window entry holds the residuals of all members.
pub fn localize(cal: &Calibration, window: &[Vec<f64>], delta: usize) -> Result<usize> {
    if window.len() < delta + 1 {
        return Err(Error::Staleness {
            have: window.len(),
            need: delta + 1,
        });
    }
    let window = &window[..delta + 1];
    let n = window.len() as f64;
    let mut best = (f64::INFINITY, 0);
    for (k, mu) in cal.mu_w.iter().enumerate() {
        let mean = window.iter().map(|w| w[k + 1]).sum::<f64>() / n;
        let score = (mean - mu).abs();
        if score < best.0 {
            best = (score, k + 1);
        }
    }
    Ok(best.1)
}

/// Faulted phases from the virtual-bus estimates of the localized model.
///
/// The fault current is the summed injection at the virtual bus and any
/// other bus the model adds beyond the first `base_buses` (the midpoints
/// of fully metered lines in the cluster). Phases whose current exceeds
/// `gamma` times the largest are faulted, unless exactly one virtual-bus
/// phase voltage is below `th_v` (per unit of `v_phase`), which then wins
/// alone.
pub fn characterize(
    model: &MeasurementModel,
    x_hat: &DVector<f64>,
    base_buses: usize,
    gamma: f64,
    th_v: f64,
    v_phase: f64,
) -> Result<Vec<Phase>> {
    let vb = model
        .virtual_bus
        .ok_or_else(|| Error::Domain(format!("model {} has no virtual bus", model.tag)))?;
    let v = model.voltages(x_hat, vb);
    let low: Vec<Phase> = Phase::ALL
        .into_iter()
        .filter(|p| v[p.index()].norm() < th_v * v_phase)
        .collect();
    if let [p] = low[..] {
        return Ok(vec![p]);
    }
    let mut i = [num_complex::Complex64::new(0.0, 0.0); 3];
    for b in base_buses + 1..=model.n_buses {
        for (acc, c) in i.iter_mut().zip(model.injected_current(x_hat, b)?) {
            *acc += c;
        }
    }
    phases_from_currents(&i.map(|c| c.norm()), gamma)
}

/// `{p : |I_p| > gamma * max |I|}`.
pub fn phases_from_currents(mag: &[f64; 3], gamma: f64) -> Result<Vec<Phase>> {
    let max = mag.iter().copied().fold(0.0, f64::max);
    if !(max > MIN_FAULT_CURRENT) {
        return Err(Error::Inconclusive);
    }
    Ok(Phase::ALL
        .into_iter()
        .filter(|p| mag[p.index()] > gamma * max)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdlConfig {
    /// Extra samples averaged before localizing.
    pub delta: usize,
    pub gamma: f64,
    /// Per unit of the nominal phase voltage.
    pub th_v: f64,
}

impl Default for FdlConfig {
    fn default() -> Self {
        FdlConfig {
            delta: 0,
            gamma: 0.2,
            th_v: 0.05,
        }
    }
}

impl FdlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta > 10 {
            return Err(Error::Domain(format!("delta {} outside 0..=10", self.delta)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) || !(self.th_v > 0.0 && self.th_v < 1.0) {
            return Err(Error::Domain("gamma and th_v must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    #[serde(rename = "t_F")]
    pub t_f: usize,
    /// Cluster id, or line id when every bus is monitored.
    pub cluster: usize,
    /// Empty when characterization was inconclusive.
    pub phases: Vec<Phase>,
    pub path: DetectionPath,
    pub delta: usize,
}

#[derive(Debug, Clone)]
struct Pending {
    t_f: usize,
    path: DetectionPath,
    z_at_tf: DVector<f64>,
    window: Vec<Vec<f64>>,
}

/// Frame-by-frame fault detection and localization for one topology.
///
/// The first frame only primes the residual history. After a detection the
/// next `delta` frames fill the localization window and detection pauses.
/// Once an event is reported, detection stays off until the base residual
/// and the zero-sequence signal are both back at no-fault level.
#[derive(Debug, Clone)]
pub struct Pipeline<'a> {
    bank: &'a EstimatorBank,
    cal: Calibration,
    cfg: FdlConfig,
    v_phase: f64,
    w0_prev: Option<f64>,
    latched: bool,
    pending: Option<Pending>,
}

impl<'a> Pipeline<'a> {
    pub fn new(bank: &'a EstimatorBank, cal: Calibration, cfg: FdlConfig, v_phase: f64) -> Result<Self> {
        cfg.validate()?;
        if cal.mu_w.len() != bank.r() {
            return Err(Error::Calibration(format!(
                "calibration covers {} clusters, bank has {}",
                cal.mu_w.len(),
                bank.r()
            )));
        }
        Ok(Pipeline {
            bank,
            cal,
            cfg,
            v_phase,
            w0_prev: None,
            latched: false,
            pending: None,
        })
    }

    pub fn calibration(&self) -> &Calibration {
        &self.cal
    }

    pub fn step(&mut self, frame: &MeasurementFrame) -> Result<Option<FaultEvent>> {
        let z = self.bank.z(frame)?;
        let out = self.bank.evaluate(&z);
        self.step_output(frame.t, &z, &out)
    }

    /// Same as [`Pipeline::step`] with the bank already evaluated on `z`.
    pub fn step_output(&mut self, t: usize, z: &DVector<f64>, out: &BankOutput) -> Result<Option<FaultEvent>> {
        let w0 = out.wmr[0];
        let prev = self.w0_prev.replace(w0);
        if prev.is_none() {
            return Ok(None);
        }
        if let Some(p) = self.pending.as_mut() {
            p.window.push(out.wmr.clone());
            if detect(&self.cal, w0, prev, &out.zero_seq).is_some() {
                debug!("t={t}: detection ignored while localizing the fault at t={}", p.t_f);
            }
        } else if self.latched {
            self.latched = w0 > self.cal.th_w0 || max_cluster(&out.zero_seq) > self.cal.th_0ng;
            if !self.latched {
                debug!("t={t}: residuals back to no-fault level");
            }
        } else if let Some(path) = detect(&self.cal, w0, prev, &out.zero_seq) {
            info!("t={t}: fault detected ({path:?})");
            self.pending = Some(Pending {
                t_f: t,
                path,
                z_at_tf: z.clone(),
                window: vec![out.wmr.clone()],
            });
        }
        match &self.pending {
            Some(p) if p.window.len() > self.cfg.delta => {
                let p = self.pending.take().expect("pending checked");
                self.latched = true;
                self.finish(p).map(Some)
            }
            _ => Ok(None),
        }
    }

    fn finish(&mut self, p: Pending) -> Result<FaultEvent> {
        let l = localize(&self.cal, &p.window, self.cfg.delta)?;
        let member = &self.bank.members[l];
        let x_hat = member.estimate(&p.z_at_tf).x_hat;
        let base_buses = self.bank.members[0].model.n_buses;
        let phases = match characterize(&member.model, &x_hat, base_buses, self.cfg.gamma, self.cfg.th_v, self.v_phase) {
            Ok(ph) => ph,
            Err(Error::Inconclusive) => {
                info!("t={}: characterization inconclusive", p.t_f);
                Vec::new()
            }
            Err(e) => return Err(e),
        };
        let cluster = if self.bank.partition.kind == crate::observability::PartitionKind::Lines {
            self.bank.partition.representative(l)
        } else {
            l
        };
        Ok(FaultEvent {
            t_f: p.t_f,
            cluster,
            phases,
            path: p.path,
            delta: self.cfg.delta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal(r: usize) -> Calibration {
        Calibration {
            mu_dw0: 0.0,
            th_w: 1.0,
            th_0ng: 2.0,
            th_w0: 50.0,
            mu_w: vec![10.0; r],
            sample_count: 1000,
        }
    }

    #[test]
    fn detection_paths() {
        let c = cal(2);
        assert_eq!(detect(&c, 20.0, Some(10.0), &[0.0, 0.0, 0.0]), Some(DetectionPath::Wmr));
        assert_eq!(
            detect(&c, 10.0, Some(10.0), &[50.0, 20.0, 0.0]),
            Some(DetectionPath::ZeroSequence)
        );
        assert_eq!(detect(&c, 10.5, Some(10.0), &[50.0, 1.0, 0.0]), None);
        assert_eq!(detect(&c, 99.0, None, &[0.0; 3]), None);
    }

    #[test]
    fn localization_picks_unchanged_cluster() {
        let c = cal(3);
        let w = vec![vec![0.0, 20.0, 10.1, 20.0]; 4];
        assert_eq!(localize(&c, &w, 0).unwrap(), 2);
        assert_eq!(localize(&c, &w, 3).unwrap(), 2);
        assert!(matches!(localize(&c, &w, 4), Err(Error::Staleness { have: 4, need: 5 })));
        // ties go to the lowest id
        let w = vec![vec![0.0, 10.0, 10.0, 20.0]];
        assert_eq!(localize(&c, &w, 0).unwrap(), 1);
    }

    #[test]
    fn current_threshold() {
        let ph = phases_from_currents(&[1000.0, 900.0, 5.0], 0.2).unwrap();
        assert_eq!(ph, vec![Phase::A, Phase::B]);
        assert!(matches!(phases_from_currents(&[0.0; 3], 0.2), Err(Error::Inconclusive)));
    }

    #[test]
    fn calibration_needs_frames() {
        let outs = vec![
            BankOutput {
                wmr: vec![1.0, 1.0],
                zero_seq: vec![0.0, 0.0]
            };
            10
        ];
        assert!(matches!(calibrate_outputs(&outs, 1000), Err(Error::Calibration(_))));
        let c = calibrate_outputs(&outs, 10).unwrap();
        assert_eq!(c.th_w, THRESHOLD_FLOOR);
        assert_eq!(c.mu_w, vec![1.0]);
    }
}
