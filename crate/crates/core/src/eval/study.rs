//! The scoring study: AUC/AP table, field-size sweep and perturbation curves.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::io::{format_score_row, write_file, write_records, SCORE_HEADER};
use super::perturb::{perturb_dataset, PerturbationKind, PerturbationSpec};
use super::scoring::{
    score_records, trajectory_scores, Metric, ScoreRequest, ScoreRow, ScoreSettings, ALL_METRICS,
};
use super::stats::{auc, average_precision, median};
use super::{generate_dataset, Dataset, EvalError, GenerationConfig};
use crate::metrics::EscapeConfig;
use crate::scenarios::ScenarioConfig;
use crate::seed::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MSweepConfig {
    /// Scenarios swept; each must also be listed in the study.
    pub scenarios: Vec<String>,
    pub values: Vec<usize>,
    /// Independent field seeds per value.
    pub reps: usize,
}

impl Default for MSweepConfig {
    fn default() -> Self {
        Self {
            scenarios: vec!["pushing".into()],
            values: vec![10, 30, 100, 1000],
            reps: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbStudyConfig {
    pub scenarios: Vec<String>,
    pub kinds: Vec<PerturbationKind>,
    /// Evenly spaced levels from zero to the maximal bound, both included.
    pub levels: usize,
    pub reps: usize,
    pub friction: f64,
    /// m/s.
    pub velocity: f64,
    /// rad/s.
    pub angular_velocity: f64,
    /// m.
    pub position: f64,
    /// Relative.
    pub force: f64,
}

impl Default for PerturbStudyConfig {
    fn default() -> Self {
        Self {
            scenarios: vec!["pushing".into()],
            kinds: PerturbationKind::ALL.to_vec(),
            levels: 5,
            reps: 3,
            friction: 0.3,
            velocity: 0.05,
            angular_velocity: 0.1,
            position: 0.01,
            force: 0.3,
        }
    }
}

impl PerturbStudyConfig {
    /// Linear and angular bounds of `kind` at scaled level `s` in [0, 1].
    fn bounds(&self, kind: PerturbationKind, s: f64) -> (f64, f64) {
        match kind {
            PerturbationKind::Friction => (s * self.friction, 0.0),
            PerturbationKind::Velocity => (s * self.velocity, s * self.angular_velocity),
            PerturbationKind::Position => (s * self.position, 0.0),
            PerturbationKind::Force => (s * self.force, 0.0),
        }
    }

    /// Metrics that read the perturbed quantity.
    fn metrics_for(kind: PerturbationKind) -> &'static [Metric] {
        match kind {
            PerturbationKind::Friction => &[Metric::OmegaCap, Metric::OmegaForce],
            PerturbationKind::Velocity | PerturbationKind::Position => &[Metric::OmegaCap],
            PerturbationKind::Force => &[Metric::OmegaForce],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub seed: u64,
    pub scenarios: Vec<ScenarioConfig>,
    pub metrics: Vec<Metric>,
    pub n_traj: usize,
    pub k_frames: usize,
    pub k_hat: usize,
    pub scoring: ScoreSettings,
    pub m_sweep: MSweepConfig,
    pub perturbation: PerturbStudyConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let g = GenerationConfig::default();
        Self {
            seed: 0,
            scenarios: vec![ScenarioConfig::default_for("pushing").expect("known scenario")],
            metrics: ALL_METRICS.to_vec(),
            n_traj: g.n_traj,
            k_frames: g.k_frames,
            k_hat: g.k_hat,
            scoring: ScoreSettings {
                // a study scores hundreds of frames per planner
                escape: EscapeConfig {
                    rounds: 3,
                    budget: 300,
                    ..EscapeConfig::default()
                },
                ..ScoreSettings::default()
            },
            m_sweep: MSweepConfig::default(),
            perturbation: PerturbStudyConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        self.scoring.validate()?;
        if self.scoring.k_bar > self.k_frames {
            return Err(EvalError::Invalid("scoring.k_bar exceeds k_frames".into()));
        }
        let names: Vec<&str> = self.scenarios.iter().map(|s| s.name()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(EvalError::Invalid(format!("scenario {n:?} listed twice")));
            }
        }
        let listed = |which: &str, list: &[String]| {
            list.iter().try_for_each(|s| {
                if names.contains(&s.as_str()) {
                    Ok(())
                } else {
                    Err(EvalError::Invalid(format!(
                        "{which} names scenario {s:?}, which the study does not run"
                    )))
                }
            })
        };
        listed("m_sweep", &self.m_sweep.scenarios)?;
        listed("perturbation", &self.perturbation.scenarios)?;
        if self.m_sweep.values.contains(&0) {
            return Err(EvalError::Invalid(
                "m_sweep values must be at least 1".into(),
            ));
        }
        if self.m_sweep.reps == 0 || self.perturbation.reps == 0 {
            return Err(EvalError::Invalid("reps must be at least 1".into()));
        }
        if self.perturbation.levels < 2 {
            return Err(EvalError::Invalid(
                "perturbation.levels must be at least 2".into(),
            ));
        }
        let p = &self.perturbation;
        if [
            p.friction,
            p.velocity,
            p.angular_velocity,
            p.position,
            p.force,
        ]
        .iter()
        .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(EvalError::Invalid(
                "perturbation bounds must be non-negative".into(),
            ));
        }
        self.generation(0).validate()
    }

    fn generation(&self, scenario_index: usize) -> GenerationConfig {
        GenerationConfig {
            n_traj: self.n_traj,
            k_frames: self.k_frames,
            k_hat: self.k_hat,
            seed: derive_seed(self.seed, &[scenario_index as u64, 0]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub scenario: String,
    pub metric: Metric,
    pub auc: f64,
    pub ap: f64,
    /// Scored items: frames, or trajectories for trajectory-level metrics.
    pub n: usize,
    pub positives: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CurvePoint {
    /// Median of `ys` with their range as the band.
    fn summarize(x: f64, ys: &[f64]) -> Self {
        Self {
            x,
            y: median(ys),
            ci_low: ys.iter().copied().fold(f64::INFINITY, f64::min),
            ci_high: ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub name: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub scenario: String,
    pub m: usize,
    pub rep: usize,
    pub seconds_per_frame: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub datasets: Vec<Dataset>,
    pub table: Vec<TableRow>,
    pub scores: Vec<ScoreRow>,
    pub curves: Vec<Curve>,
    /// Wall-clock measurements; the only output that varies between identical runs.
    pub timing: Vec<TimingRow>,
}

impl Report {
    pub fn curve(&self, name: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.name == name)
    }

    pub fn table_row(&self, scenario: &str, metric: Metric) -> Option<&TableRow> {
        self.table
            .iter()
            .find(|r| r.scenario == scenario && r.metric == metric)
    }

    /// Writes `table.csv`, `scores.csv`, `timing.csv`, one CSV per curve under `curves/`
    /// and each dataset under `datasets/`.
    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        let mut table = String::from("scenario,metric,auc,ap,n,positives\n");
        for r in &self.table {
            let _ = writeln!(
                table,
                "{},{},{},{},{},{}",
                r.scenario, r.metric, r.auc, r.ap, r.n, r.positives
            );
        }
        write_file(&dir.join("table.csv"), table.as_bytes())?;

        let mut scores = format!("{SCORE_HEADER}\n");
        for r in &self.scores {
            scores.push_str(&format_score_row(r)?);
        }
        write_file(&dir.join("scores.csv"), scores.as_bytes())?;

        for c in &self.curves {
            let mut s = String::from("x,y,ci_low,ci_high\n");
            for p in &c.points {
                let _ = writeln!(s, "{},{},{},{}", p.x, p.y, p.ci_low, p.ci_high);
            }
            write_file(
                &dir.join("curves").join(format!("{}.csv", c.name)),
                s.as_bytes(),
            )?;
        }

        let mut timing = String::from("scenario,m,rep,seconds_per_frame\n");
        for t in &self.timing {
            let _ = writeln!(
                timing,
                "{},{},{},{}",
                t.scenario, t.m, t.rep, t.seconds_per_frame
            );
        }
        write_file(&dir.join("timing.csv"), timing.as_bytes())?;

        for d in &self.datasets {
            write_records(
                &dir.join("datasets")
                    .join(format!("{}.jsonl", d.scenario.name())),
                &d.records,
            )?;
        }
        Ok(())
    }
}

fn with_context(scenario: &str, what: &str, e: EvalError) -> EvalError {
    match e {
        EvalError::DegenerateLabels { context } => EvalError::DegenerateLabels {
            context: format!("{scenario} {what} ({context})"),
        },
        other => other,
    }
}

/// AUC and AP of one metric from a scored dataset.
fn table_row(
    dataset: &Dataset,
    rows: &[ScoreRow],
    metric: Metric,
    k_bar: usize,
) -> Result<TableRow, EvalError> {
    let name = dataset.scenario.name();
    let (scores, labels): (Vec<f64>, Vec<bool>) = if metric.is_trajectory_level() {
        trajectory_scores(&dataset.records, rows, k_bar)?
            .into_iter()
            .map(|(_, s, l)| (s, l))
            .unzip()
    } else {
        rows.iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.value, r.label))
            .unzip()
    };
    let ctx = |e| with_context(name, metric.name(), e);
    Ok(TableRow {
        scenario: name.to_string(),
        metric,
        auc: auc(&scores, &labels).map_err(ctx)?,
        ap: average_precision(&scores, &labels).map_err(ctx)?,
        n: scores.len(),
        positives: labels.iter().filter(|&&l| l).count(),
    })
}

/// Captured-label AP of `metric` over already scored rows.
fn state_ap(rows: &[ScoreRow], metric: Metric) -> Result<f64, EvalError> {
    let (s, l): (Vec<f64>, Vec<bool>) = rows
        .iter()
        .filter(|r| r.metric == metric)
        .map(|r| (r.value, r.label))
        .unzip();
    average_precision(&s, &l)
}

fn m_sweep(
    config: &StudyConfig,
    si: usize,
    dataset: &Dataset,
    report: &mut Report,
) -> Result<(), EvalError> {
    let name = dataset.scenario.name();
    let sw = &config.m_sweep;
    let k_bar = config.scoring.k_bar;
    let mut aucs = Vec::new();
    let mut aps = Vec::new();
    for &m in &sw.values {
        let settings = ScoreSettings {
            m,
            ..config.scoring.clone()
        };
        let (mut a, mut p) = (Vec::new(), Vec::new());
        for rep in 0..sw.reps {
            let req = ScoreRequest {
                metrics: &[Metric::OmegaSuc],
                settings: &settings,
                seed: derive_seed(config.seed, &[si as u64, 1, m as u64, rep as u64]),
                frame_limit: Some(k_bar),
                fallback: None,
                first_index: 0,
            };
            let start = Instant::now();
            let rows = score_records(&dataset.records, &req, &|_, _, _| false)?;
            let elapsed = start.elapsed().as_secs_f64();
            report.timing.push(TimingRow {
                scenario: name.to_string(),
                m,
                rep,
                seconds_per_frame: elapsed / rows.len().max(1) as f64,
            });
            let traj = trajectory_scores(&dataset.records, &rows, k_bar)?;
            let (s, l): (Vec<f64>, Vec<bool>) = traj.into_iter().map(|(_, s, l)| (s, l)).unzip();
            let ctx = |e| with_context(name, "m_sweep", e);
            a.push(auc(&s, &l).map_err(ctx)?);
            p.push(average_precision(&s, &l).map_err(ctx)?);
        }
        aucs.push(CurvePoint::summarize(m as f64, &a));
        aps.push(CurvePoint::summarize(m as f64, &p));
    }
    report.curves.push(Curve {
        name: format!("{name}_msweep_auc"),
        points: aucs,
    });
    report.curves.push(Curve {
        name: format!("{name}_msweep_ap"),
        points: aps,
    });
    Ok(())
}

fn perturbation_curves(
    config: &StudyConfig,
    si: usize,
    dataset: &Dataset,
    report: &mut Report,
) -> Result<(), EvalError> {
    let name = dataset.scenario.name();
    let pc = &config.perturbation;
    for &kind in &pc.kinds {
        let metrics: Vec<Metric> = PerturbStudyConfig::metrics_for(kind)
            .iter()
            .copied()
            .filter(|m| config.metrics.contains(m))
            .collect();
        if metrics.is_empty() {
            continue;
        }
        let mut points: Vec<Vec<CurvePoint>> = vec![Vec::new(); metrics.len()];
        for level in 0..pc.levels {
            let scaled = level as f64 / (pc.levels - 1) as f64;
            let (e_max, e_max_angular) = pc.bounds(kind, scaled);
            let mut aps: Vec<Vec<f64>> = vec![Vec::new(); metrics.len()];
            for rep in 0..pc.reps {
                let path = [si as u64, 2, kind as u64, level as u64, rep as u64];
                let perturbed = perturb_dataset(
                    dataset,
                    &PerturbationSpec {
                        kind,
                        e_max,
                        e_max_angular,
                        seed: derive_seed(config.seed, &path),
                    },
                )?;
                let req = ScoreRequest {
                    metrics: &metrics,
                    settings: &config.scoring,
                    seed: derive_seed(
                        config.seed,
                        &[si as u64, 3, kind as u64, level as u64, rep as u64],
                    ),
                    frame_limit: None,
                    fallback: None,
                    first_index: 0,
                };
                let rows = score_records(&perturbed.records, &req, &|_, _, _| false)?;
                for (i, &m) in metrics.iter().enumerate() {
                    aps[i].push(
                        state_ap(&rows, m).map_err(|e| with_context(name, "perturbation", e))?,
                    );
                }
            }
            for (i, ap) in aps.iter().enumerate() {
                points[i].push(CurvePoint::summarize(scaled, ap));
            }
        }
        for (m, pts) in metrics.iter().zip(points) {
            report.curves.push(Curve {
                name: format!("{name}_perturb_{kind}_{m}_ap"),
                points: pts,
            });
        }
    }
    Ok(())
}

/// Generates each scenario's dataset and computes every requested artifact.
///
/// Everything except `timing` depends only on `config`.
pub fn run_study(config: &StudyConfig) -> Result<Report, EvalError> {
    config.validate()?;
    let mut report = Report::default();
    if config.metrics.is_empty() {
        return Ok(report);
    }
    let mut metrics = config.metrics.clone();
    metrics.sort();
    metrics.dedup();
    for (si, scenario) in config.scenarios.iter().enumerate() {
        let name = scenario.name();
        let dataset = generate_dataset(scenario, &config.generation(si))?;
        let req = ScoreRequest {
            metrics: &metrics,
            settings: &config.scoring,
            seed: derive_seed(config.seed, &[si as u64, 4]),
            frame_limit: None,
            fallback: None,
            first_index: 0,
        };
        let rows = score_records(&dataset.records, &req, &|_, _, _| false)?;
        for &m in &metrics {
            report
                .table
                .push(table_row(&dataset, &rows, m, config.scoring.k_bar)?);
        }
        report.scores.extend(rows);
        if metrics.contains(&Metric::OmegaSuc) && config.m_sweep.scenarios.iter().any(|s| s == name)
        {
            m_sweep(config, si, &dataset, &mut report)?;
        }
        if config.perturbation.scenarios.iter().any(|s| s == name) {
            perturbation_curves(config, si, &dataset, &mut report)?;
        }
        report.datasets.push(dataset);
    }
    Ok(report)
}
