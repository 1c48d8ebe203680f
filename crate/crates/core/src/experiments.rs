//! Sweep harness over demonstration quality and the study statistics pipeline.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dynamics::{PendulumParams, State};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_against, RMSE_CAP};
use crate::learner::ridge_fit;
use crate::rng;
use crate::session::Group;
use crate::skills::{reference_trajectory, SkillId};
use crate::teaching::{canonical_phi, generate_demo_pair, NoiseModel};

pub const SWEEP_HEADER: &str = "skill,omega,sigma,trials,rmse_mean,rmse_sd,l2_mean,l2_sd";

/// `π/36, 2π/36, …, π/2`.
pub fn default_omega_grid() -> Vec<f64> {
    (1..=18).map(|i| i as f64 * PI / 36.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub skill: SkillId,
    pub omegas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub trials: usize,
    pub lambda: f64,
    pub seed: u64,
    pub duration: f64,
    pub x0: State,
    pub pendulum: PendulumParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            skill: SkillId::S1,
            omegas: default_omega_grid(),
            sigmas: vec![0.05, 0.1, 0.15],
            trials: 1000,
            lambda: 1e-6,
            seed: 0,
            duration: 3.0,
            x0: State::new(FRAC_PI_2, 0.0),
            pendulum: PendulumParams::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.omegas.is_empty() || self.sigmas.is_empty() {
            return Err(Error::Config(
                "omega grid and sigma set must be non-empty".into(),
            ));
        }
        for &o in &self.omegas {
            canonical_phi(o)?;
        }
        for &s in &self.sigmas {
            NoiseModel::new(s)?;
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("invalid lambda {}", self.lambda)));
        }
        self.pendulum.validate()?;
        self.pendulum.steps_for(self.duration)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub skill: SkillId,
    pub omega: f64,
    pub sigma: f64,
    pub trials: usize,
    pub rmse_mean: f64,
    pub rmse_sd: f64,
    pub l2_mean: f64,
    pub l2_sd: f64,
    /// Trials whose learnt rollout diverged; their RMSE enters the statistics at [`RMSE_CAP`].
    pub diverged: usize,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Teaches the skill `trials` times per `(σ, ω)` cell and aggregates the errors.
///
/// Trial `i` uses the stream `rng::derive(seed, [i])` in every cell, so cells
/// share their noise draws and differ only in demonstration geometry and scale.
/// Rows come out ordered by `(σ, ω)`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut spec = cfg.skill.spec();
    spec.x0 = cfg.x0;
    spec.duration = cfg.duration;
    let w_star = spec.w_star;
    let reference = reference_trajectory(&spec, &cfg.pendulum)?;

    let mut sigmas = cfg.sigmas.clone();
    sigmas.sort_by(f64::total_cmp);
    let mut omegas = cfg.omegas.clone();
    omegas.sort_by(f64::total_cmp);
    let cells: Vec<(f64, f64)> = sigmas
        .iter()
        .flat_map(|&s| omegas.iter().map(move |&o| (s, o)))
        .collect();

    let trials = cfg.trials;
    let outcomes = (0..cells.len() * trials)
        .into_par_iter()
        .map(|job| {
            let (sigma, omega) = cells[job / trials];
            let trial = job % trials;
            let mut stream = rng::derive(cfg.seed, &[trial as u64]);
            let demos = generate_demo_pair(omega, &w_star, &NoiseModel { sigma }, &mut stream)?;
            let w = ridge_fit(&demos.feature_matrix(), &demos.actions, cfg.lambda)?;
            evaluate_against(&w, &w_star, &reference, &cfg.pendulum)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(cells
        .iter()
        .zip(outcomes.chunks(trials))
        .map(|(&(sigma, omega), chunk)| {
            let rmses: Vec<f64> = chunk.iter().map(|e| e.rmse.min(RMSE_CAP)).collect();
            let l2s: Vec<f64> = chunk.iter().map(|e| e.l2).collect();
            let (rmse_mean, rmse_sd) = mean_sd(&rmses);
            let (l2_mean, l2_sd) = mean_sd(&l2s);
            SweepRow {
                skill: cfg.skill,
                omega,
                sigma,
                trials,
                rmse_mean,
                rmse_sd,
                l2_mean,
                l2_sd,
                diverged: chunk.iter().filter(|e| e.diverged).count(),
            }
        })
        .collect())
}

/// Plain decimal with nine significant digits.
pub fn format_sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000000".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if exp > 8 {
        let scale = 10f64.powi(exp - 8);
        format!("{:.0}", (x / scale).round() * scale)
    } else {
        format!("{:.*}", (8 - exp) as usize, x)
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.skill,
            format_sig9(r.omega),
            format_sig9(r.sigma),
            r.trials,
            format_sig9(r.rmse_mean),
            format_sig9(r.rmse_sd),
            format_sig9(r.l2_mean),
            format_sig9(r.l2_sd),
        )?;
    }
    Ok(())
}

/// Spearman rank correlation, ties receiving their average rank.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, _) = mean_sd(&rx);
    let (my, _) = mean_sd(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl GroupStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: values.len(),
            });
        }
        let (mean, sd) = mean_sd(values);
        Ok(Self {
            n: values.len(),
            mean,
            sd,
        })
    }
}

/// Drops values further than three sample standard deviations from the mean.
///
/// One pass: the mean and deviation are computed once from the full input.
pub fn outlier_filter(values: &[f64]) -> Result<Vec<f64>> {
    let stats = GroupStats::from_values(values)?;
    let limit = 3.0 * stats.sd;
    Ok(values
        .iter()
        .copied()
        .filter(|v| (v - stats.mean).abs() <= limit)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Student's two-sample t-test with pooled variance, two-tailed.
pub fn two_sample_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    let sa = GroupStats::from_values(a)?;
    let sb = GroupStats::from_values(b)?;
    let (na, nb) = (sa.n as f64, sb.n as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * sa.sd * sa.sd + (nb - 1.0) * sb.sd * sb.sd) / df;
    let diff = sa.mean - sb.mean;
    let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    let t = if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        diff.signum() * f64::INFINITY
    } else {
        diff / se
    };
    let p = if t.is_infinite() {
        0.0
    } else {
        let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok(TTest { t, df, p })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: u8,
    pub skill: SkillId,
    /// `|det Φ|` of the committed demonstrations.
    pub det_phi: f64,
    pub score: f64,
    pub rmse: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub participant: String,
    pub group: Group,
    pub phases: Vec<PhaseRecord>,
}

impl StudyRecord {
    pub fn is_complete(&self) -> bool {
        self.phases.len() == 6
    }

    pub fn phase(&self, phase: u8) -> Option<&PhaseRecord> {
        self.phases.iter().find(|p| p.phase == phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DetPhi,
    Score,
    Rmse,
    L2,
}

impl Metric {
    pub fn of(&self, p: &PhaseRecord) -> f64 {
        match self {
            Metric::DetPhi => p.det_phi,
            Metric::Score => p.score,
            Metric::Rmse => p.rmse,
            Metric::L2 => p.l2,
        }
    }
}

/// `value(phase_b) − value(phase_a)` for each record, in input order.
pub fn phase_delta(
    records: &[StudyRecord],
    phase_a: u8,
    phase_b: u8,
    metric: Metric,
) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            let get = |phase| {
                r.phase(phase)
                    .map(|p| metric.of(p))
                    .ok_or_else(|| Error::MissingPhase {
                        participant: r.participant.clone(),
                        phase,
                    })
            };
            Ok(get(phase_b)? - get(phase_a)?)
        })
        .collect()
}

/// Phase pairs compared between groups: guidance effect, retention, transfer.
pub const STUDY_COMPARISONS: [(u8, u8); 3] = [(1, 3), (1, 5), (2, 6)];
pub const STUDY_METRICS: [Metric; 2] = [Metric::DetPhi, Metric::Rmse];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBlock {
    pub group: Group,
    pub deltas: Vec<f64>,
    pub removed: usize,
    pub stats: GroupStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub phases: (u8, u8),
    pub metric: Metric,
    pub target: GroupBlock,
    pub control: GroupBlock,
    pub test: TTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub participants: usize,
    pub comparisons: Vec<Comparison>,
}

fn group_block(
    records: &[StudyRecord],
    group: Group,
    pair: (u8, u8),
    metric: Metric,
) -> Result<GroupBlock> {
    let members: Vec<StudyRecord> = records
        .iter()
        .filter(|r| r.group == group)
        .cloned()
        .collect();
    let raw = phase_delta(&members, pair.0, pair.1, metric)?;
    let kept = outlier_filter(&raw)?;
    Ok(GroupBlock {
        group,
        removed: raw.len() - kept.len(),
        stats: GroupStats::from_values(&kept)?,
        deltas: kept,
    })
}

/// Compares target and control groups on every phase pair and metric.
///
/// Incomplete records are skipped; each group needs at least two complete ones.
pub fn analyze_study(records: &[StudyRecord]) -> Result<StudyReport> {
    let complete: Vec<StudyRecord> = records
        .iter()
        .filter(|r| r.is_complete())
        .cloned()
        .collect();
    for group in [Group::Target, Group::Control] {
        let n = complete.iter().filter(|r| r.group == group).count();
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
    }
    let mut comparisons = Vec::new();
    for pair in STUDY_COMPARISONS {
        for metric in STUDY_METRICS {
            let target = group_block(&complete, Group::Target, pair, metric)?;
            let control = group_block(&complete, Group::Control, pair, metric)?;
            let test = two_sample_t_test(&target.deltas, &control.deltas)?;
            comparisons.push(Comparison {
                phases: pair,
                metric,
                target,
                control,
                test,
            });
        }
    }
    Ok(StudyReport {
        participants: complete.len(),
        comparisons,
    })
}
