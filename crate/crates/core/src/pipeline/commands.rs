//! The five pipeline commands: fit, calibrate, evaluate, sweep-nu, report.
//!
//! Each command reads its inputs, writes artifacts into the run directory,
//! updates the cost ledger and manifest, and returns a small summary for
//! programmatic callers. Outputs are byte-reproducible for fixed configs;
//! wall-clock goes to `timings.json` only.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attention::ConcentrationParam;
use crate::backbone::{fit_readout, forward_deterministic, init_encoder, ModelBundle};
use crate::baselines::{
    deep_ensemble_predictions, deep_ensemble_readout, mc_dropout_ensemble, swag_diag_ensemble,
    swag_diag_readout, DropoutSpec, SwagConfig,
};
use crate::bayesopt::{
    acquisition_objective, calibrate_nu, fit_surrogate, thompson_draw, BoIteration, SearchDomain,
};
use crate::calibration::{eval_loss_detailed, CalibrationBatch};
use crate::data::Dataset;
use crate::ensemble::{central_interval, draw_ensemble, PredictiveEnsemble};
use crate::metrics::{
    apply_temperature, coverage_and_sharpness, crps_decomposed, energy_score, fit_temperature,
    fit_temperature_coverage, pit, point_accuracy, w1_to_uniform, MetricReport, PITSample,
};
use crate::model_io::{load_model, save_model};
use crate::rng::{domain, mix_key};

use super::config::{RunConfig, TemperatureMode};
use super::ledger::{CostLedger, Timings};
use super::manifest::Manifest;
use super::PipelineError;

const SPLIT_TEST: u64 = 0;
const SPLIT_CAL: u64 = 1;

pub const METHOD_SA: &str = "sa";
pub const METHOD_DROPOUT: &str = "mc_dropout";
pub const METHOD_SWAG: &str = "swag_diag";
pub const METHOD_DEEP: &str = "deep_ensemble";

fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| PipelineError::io(&format!("creating {}", dir.display()), e))
}

fn write_artifact(
    dir: &Path,
    rel: &str,
    content: &str,
    manifest: &mut Manifest,
) -> Result<(), PipelineError> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(&path, content).map_err(|e| PipelineError::io(&format!("writing {rel}"), e))?;
    manifest.record(dir, rel)
}

fn pretty_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Format floats for CSV output: shortest round-trip representation.
fn fmt(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub model_path: String,
    pub test_rmse: f64,
    pub test_mae: f64,
    pub n_train: usize,
    pub n_cal: usize,
    pub n_test: usize,
}

/// Fit the frozen-encoder model: build data, solve the ridge readout, enable
/// stochastic attention on every layer, and persist the bundle plus a
/// point-accuracy report for the test split.
pub fn cmd_fit(config: &RunConfig, out_dir: &Path) -> Result<FitSummary, PipelineError> {
    config.validate()?;
    ensure_dir(out_dir)?;
    let started = Instant::now();
    let (train, cal, test) = config.build_splits()?;
    let encoder = init_encoder(&config.encoder)?;
    let model = fit_readout(&encoder, &train.cases, config.ridge)?.with_all_layers_stochastic();
    save_model(&model, &out_dir.join("model.json"))?;

    let predictions: Vec<f64> = test
        .cases
        .iter()
        .map(|c| forward_deterministic(&model, c))
        .collect::<Result<_, _>>()?;
    let targets: Vec<f64> = test.cases.iter().map(|c| c.target.unwrap()).collect();
    let (rmse, mae) = point_accuracy(&predictions, &targets)?;
    let summary = FitSummary {
        // Relative to the run directory so artifacts stay byte-reproducible.
        model_path: "model.json".to_string(),
        test_rmse: rmse,
        test_mae: mae,
        n_train: train.cases.len(),
        n_cal: cal.cases.len(),
        n_test: test.cases.len(),
    };

    let mut ledger = CostLedger::load_or_default(out_dir)?;
    ledger.method_mut("shared").training_steps += 1;
    ledger.save(out_dir)?;
    let mut timings = Timings::load_or_default(out_dir);
    timings.add("shared", started.elapsed().as_secs_f64());
    timings.save(out_dir)?;

    let mut manifest = Manifest::load_or_default(out_dir);
    write_artifact(out_dir, "accuracy.json", &pretty_json(&summary), &mut manifest)?;
    manifest.record(out_dir, "model.json")?;
    manifest.record(out_dir, "cost_ledger.json")?;
    manifest.record(out_dir, "timings.json")?;
    manifest.save(out_dir)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossCurvePoint {
    pub nu: u64,
    pub loss_estimate: f64,
    pub normalized_loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrateSummary {
    pub nu_star: u64,
    pub s0: f64,
    pub iterations: usize,
    pub loss_curve: Vec<LossCurvePoint>,
}

/// Calibrate the concentration parameter on the calibration split and write
/// the BO trace (JSON lines) plus a plotting-ready summary.
pub fn cmd_calibrate(
    config: &RunConfig,
    model_path: &Path,
    out_dir: &Path,
) -> Result<CalibrateSummary, PipelineError> {
    config.validate()?;
    ensure_dir(out_dir)?;
    let started = Instant::now();
    let model = load_model(model_path)?;
    let (_, cal, _) = config.build_splits()?;
    let batch = CalibrationBatch::new(cal.cases.clone(), config.sa.b, config.sa.m)?;
    let domain = SearchDomain::new(config.sa.nu_min, config.sa.nu_max)?;
    let (nu_star, trace) = calibrate_nu(
        &model,
        &batch,
        domain,
        config.sa.k,
        config.sa.master_seed,
    )?;

    let mut trace_text = String::new();
    let mut history_text = String::new();
    for iteration in &trace {
        trace_text.push_str(&serde_json::to_string(iteration).expect("trace serializes"));
        trace_text.push('\n');
        history_text
            .push_str(&serde_json::to_string(&iteration.record).expect("record serializes"));
        history_text.push('\n');
    }

    let mut curve: Vec<LossCurvePoint> = trace
        .iter()
        .map(|it| LossCurvePoint {
            nu: it.nu,
            loss_estimate: it.record.loss_estimate,
            normalized_loss: 0.0,
        })
        .collect();
    curve.sort_by(|a, b| a.nu.cmp(&b.nu).then(a.loss_estimate.total_cmp(&b.loss_estimate)));
    let min_loss = curve
        .iter()
        .map(|p| p.loss_estimate)
        .fold(f64::INFINITY, f64::min)
        .max(1e-300);
    for p in &mut curve {
        p.normalized_loss = p.loss_estimate / min_loss;
    }
    let summary = CalibrateSummary {
        nu_star: nu_star.get(),
        s0: trace.first().map(|it| it.s0).unwrap_or(0.0),
        iterations: trace.len(),
        loss_curve: curve,
    };

    let mut ledger = CostLedger::load_or_default(out_dir)?;
    ledger.method_mut(METHOD_SA).calibration_passes +=
        (config.sa.k * config.sa.b * config.sa.m) as u64;
    ledger.save(out_dir)?;
    let mut timings = Timings::load_or_default(out_dir);
    timings.add(METHOD_SA, started.elapsed().as_secs_f64());
    timings.save(out_dir)?;

    let mut manifest = Manifest::load_or_default(out_dir);
    write_artifact(out_dir, "calibration_trace.jsonl", &trace_text, &mut manifest)?;
    write_artifact(
        out_dir,
        "calibration_history.jsonl",
        &history_text,
        &mut manifest,
    )?;
    write_artifact(
        out_dir,
        "calibration_summary.json",
        &pretty_json(&summary),
        &mut manifest,
    )?;
    manifest.record(out_dir, "cost_ledger.json")?;
    manifest.record(out_dir, "timings.json")?;
    manifest.save(out_dir)?;
    Ok(summary)
}

/// Per-case seed for a method's ensemble on one split.
fn case_seed(master_seed: u64, method_domain: u64, split_tag: u64, case_idx: usize) -> u64 {
    mix_key(master_seed, method_domain, &[split_tag, case_idx as u64])
}

struct MethodEnsembles {
    test: Vec<PredictiveEnsemble>,
    cal: Vec<PredictiveEnsemble>,
    eval_passes: u64,
    temperature_passes: u64,
    training_steps: u64,
    seconds: f64,
}

fn targets_of(ds: &Dataset) -> Vec<f64> {
    ds.cases.iter().map(|c| c.target.unwrap()).collect()
}

fn draw_sa(
    model: &ModelBundle,
    test: &Dataset,
    cal: &Dataset,
    nu: ConcentrationParam,
    m: usize,
    master_seed: u64,
) -> Result<MethodEnsembles, PipelineError> {
    let started = Instant::now();
    let draw_split = |ds: &Dataset, tag: u64| -> Result<Vec<PredictiveEnsemble>, PipelineError> {
        ds.cases
            .iter()
            .enumerate()
            .map(|(i, case)| {
                let seed = case_seed(master_seed, domain::ATTENTION_ROW, tag, i);
                Ok(draw_ensemble(model, case, nu, m, seed)?)
            })
            .collect()
    };
    let test_ens = draw_split(test, SPLIT_TEST)?;
    let cal_ens = draw_split(cal, SPLIT_CAL)?;
    Ok(MethodEnsembles {
        eval_passes: (m * test.cases.len()) as u64,
        temperature_passes: (m * cal.cases.len()) as u64,
        training_steps: 0,
        seconds: started.elapsed().as_secs_f64(),
        test: test_ens,
        cal: cal_ens,
    })
}

fn draw_dropout(
    model: &ModelBundle,
    test: &Dataset,
    cal: &Dataset,
    spec: DropoutSpec,
    m: usize,
    master_seed: u64,
) -> Result<MethodEnsembles, PipelineError> {
    let started = Instant::now();
    let draw_split = |ds: &Dataset, tag: u64| -> Result<Vec<PredictiveEnsemble>, PipelineError> {
        ds.cases
            .iter()
            .enumerate()
            .map(|(i, case)| {
                let seed = case_seed(master_seed, domain::DROPOUT, tag, i);
                Ok(mc_dropout_ensemble(model, case, spec, m, seed)?)
            })
            .collect()
    };
    let test_ens = draw_split(test, SPLIT_TEST)?;
    let cal_ens = draw_split(cal, SPLIT_CAL)?;
    Ok(MethodEnsembles {
        eval_passes: (m * test.cases.len()) as u64,
        temperature_passes: (m * cal.cases.len()) as u64,
        training_steps: 0,
        seconds: started.elapsed().as_secs_f64(),
        test: test_ens,
        cal: cal_ens,
    })
}

#[allow(clippy::too_many_arguments)]
fn draw_swag(
    model: &ModelBundle,
    train: &Dataset,
    test: &Dataset,
    cal: &Dataset,
    settings: &super::config::SwagSettings,
    ridge: f64,
    m: usize,
    master_seed: u64,
) -> Result<MethodEnsembles, PipelineError> {
    let started = Instant::now();
    let swag_config = SwagConfig {
        steps: settings.steps,
        learning_rate: settings.learning_rate,
        snapshot_every: settings.snapshot_every,
        batch_size: settings.batch_size,
        ridge,
    };
    let sgd_seed = mix_key(master_seed, domain::SWAG_SGD, &[0]);
    let posterior = swag_diag_readout(model, &train.cases, &swag_config, sgd_seed)?;
    let draw_split = |ds: &Dataset, tag: u64| -> Result<Vec<PredictiveEnsemble>, PipelineError> {
        ds.cases
            .iter()
            .enumerate()
            .map(|(i, case)| {
                let seed = case_seed(master_seed, domain::SWAG_SAMPLE, tag, i);
                Ok(swag_diag_ensemble(
                    model,
                    &posterior,
                    case,
                    settings.variance_scale,
                    m,
                    seed,
                )?)
            })
            .collect()
    };
    let test_ens = draw_split(test, SPLIT_TEST)?;
    let cal_ens = draw_split(cal, SPLIT_CAL)?;
    Ok(MethodEnsembles {
        eval_passes: (m * test.cases.len()) as u64,
        temperature_passes: (m * cal.cases.len()) as u64,
        training_steps: settings.steps as u64,
        seconds: started.elapsed().as_secs_f64(),
        test: test_ens,
        cal: cal_ens,
    })
}

fn draw_deep(
    model: &ModelBundle,
    train: &Dataset,
    test: &Dataset,
    cal: &Dataset,
    ridge: f64,
    members: usize,
    master_seed: u64,
) -> Result<MethodEnsembles, PipelineError> {
    let started = Instant::now();
    let boot_seed = mix_key(master_seed, domain::BOOTSTRAP, &[0]);
    let fits = deep_ensemble_readout(model, &train.cases, ridge, members, boot_seed)?;
    let draw_split = |ds: &Dataset| -> Result<Vec<PredictiveEnsemble>, PipelineError> {
        ds.cases
            .iter()
            .map(|case| Ok(deep_ensemble_predictions(model, &fits, case, boot_seed)?))
            .collect()
    };
    let test_ens = draw_split(test)?;
    let cal_ens = draw_split(cal)?;
    Ok(MethodEnsembles {
        eval_passes: (members * test.cases.len()) as u64,
        temperature_passes: (members * cal.cases.len()) as u64,
        training_steps: members as u64,
        seconds: started.elapsed().as_secs_f64(),
        test: test_ens,
        cal: cal_ens,
    })
}

fn build_report(
    method: &str,
    variant: &str,
    dataset: &str,
    seed: u64,
    levels: &[f64],
    ensembles: &[PredictiveEnsemble],
    targets: &[f64],
) -> Result<(MetricReport, PITSample), PipelineError> {
    let means: Vec<f64> = ensembles.iter().map(|e| e.mean()).collect();
    let (rmse, mae) = point_accuracy(&means, targets)?;
    let pit_sample = pit(ensembles, targets)?;
    let pit_w1 = w1_to_uniform(&pit_sample)?;
    let mut coverage = BTreeMap::new();
    let mut sharpness = BTreeMap::new();
    for &level in levels {
        let (cov, width) = coverage_and_sharpness(ensembles, targets, level)?;
        let key = format!("{level:.2}");
        coverage.insert(key.clone(), cov);
        sharpness.insert(key, width);
    }
    let mut crps_sum = 0.0;
    let mut error_sum = 0.0;
    let mut spread_sum = 0.0;
    let mut energy_sum = 0.0;
    for (e, &y) in ensembles.iter().zip(targets) {
        let (crps, error, spread) = crps_decomposed(e, y)?;
        crps_sum += crps;
        error_sum += error;
        spread_sum += spread;
        energy_sum += energy_score(e, y)?;
    }
    let n = ensembles.len() as f64;
    let report = MetricReport {
        method: format!("{method}_{variant}"),
        dataset: dataset.to_string(),
        seed,
        rmse,
        mae,
        pit_w1,
        coverage,
        sharpness,
        crps: crps_sum / n,
        crps_error_term: error_sum / n,
        crps_spread_term: spread_sum / n,
        energy_score: energy_sum / n,
    };
    report.validate()?;
    Ok((report, pit_sample))
}

fn pit_histogram_csv(pit: &PITSample, bins: usize) -> String {
    let counts = pit.histogram(bins);
    let total = pit.len() as f64;
    let mut csv = String::from("bin_lo,bin_hi,count,fraction\n");
    for (i, &c) in counts.iter().enumerate() {
        let lo = i as f64 / bins as f64;
        let hi = (i + 1) as f64 / bins as f64;
        csv.push_str(&format!(
            "{},{},{c},{}\n",
            fmt(lo),
            fmt(hi),
            fmt(c as f64 / total)
        ));
    }
    csv
}

fn intervals_csv(ensembles: &[PredictiveEnsemble], targets: &[f64], levels: &[f64]) -> String {
    let mut csv = String::from("case_id,level,lo,hi,width,target,covered\n");
    for (i, (e, &y)) in ensembles.iter().zip(targets).enumerate() {
        for &level in levels {
            let (lo, hi) = central_interval(e, level);
            let covered = y >= lo && y <= hi;
            csv.push_str(&format!(
                "{i},{},{},{},{},{},{}\n",
                fmt(level),
                fmt(lo),
                fmt(hi),
                fmt(hi - lo),
                fmt(y),
                covered as u8
            ));
        }
    }
    csv
}

fn ensembles_csv(ensembles: &[PredictiveEnsemble]) -> String {
    let mut csv = String::from("case_id,sample_index,value\n");
    for (i, e) in ensembles.iter().enumerate() {
        for (j, &v) in e.samples.iter().enumerate() {
            csv.push_str(&format!("{i},{j},{}\n", fmt(v)));
        }
    }
    csv
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodEvaluation {
    pub native_w1: f64,
    pub scaled_w1: f64,
    pub tau: f64,
    pub native_crps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateSummary {
    pub nu: u64,
    pub methods: BTreeMap<String, MethodEvaluation>,
}

/// Evaluate stochastic attention at `nu` against the baselines on the test
/// split: native and temperature-scaled variants, metric reports, ensemble
/// dumps, PIT histograms, interval tables, and the cost ledger.
pub fn cmd_evaluate(
    config: &RunConfig,
    model_path: &Path,
    nu: u64,
    out_dir: &Path,
) -> Result<EvaluateSummary, PipelineError> {
    config.validate()?;
    ensure_dir(out_dir)?;
    let model = load_model(model_path)?;
    let (train, cal, test) = config.build_splits()?;
    let test_targets = targets_of(&test);
    let cal_targets = targets_of(&cal);
    let nu_param = ConcentrationParam::new(nu)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let m = config.sa.m;
    let master = config.sa.master_seed;

    let dropout_spec = DropoutSpec::new(
        config.baselines.dropout_rate,
        config.baselines.dropout_location,
    )?;

    let mut drawn: Vec<(&str, MethodEnsembles)> = vec![
        (METHOD_SA, draw_sa(&model, &test, &cal, nu_param, m, master)?),
        (
            METHOD_DROPOUT,
            draw_dropout(&model, &test, &cal, dropout_spec, m, master)?,
        ),
        (
            METHOD_SWAG,
            draw_swag(
                &model,
                &train,
                &test,
                &cal,
                &config.baselines.swag,
                config.ridge,
                m,
                master,
            )?,
        ),
        (
            METHOD_DEEP,
            draw_deep(
                &model,
                &train,
                &test,
                &cal,
                config.ridge,
                config.baselines.deep_ensemble_size,
                master,
            )?,
        ),
    ];

    // Coverage-matching temperature mode targets the stochastic-attention
    // coverage on the calibration split at the first configured level.
    let primary_level = config.metrics.coverage_levels[0];
    let sa_cal_coverage = {
        let sa = &drawn[0].1;
        coverage_and_sharpness(&sa.cal, &cal_targets, primary_level)?.0
    };

    let mut ledger = CostLedger::load_or_default(out_dir)?;
    let mut timings = Timings::load_or_default(out_dir);
    let mut manifest = Manifest::load_or_default(out_dir);
    let mut summary = EvaluateSummary {
        nu,
        methods: BTreeMap::new(),
    };

    for (method, ens) in drawn.iter_mut() {
        let started = Instant::now();
        let tau = match config.metrics.temperature_mode {
            TemperatureMode::W1 => fit_temperature(&ens.cal, &cal_targets)?,
            TemperatureMode::Coverage => fit_temperature_coverage(
                &ens.cal,
                &cal_targets,
                primary_level,
                sa_cal_coverage,
            )?,
        };
        let scaled_test = apply_temperature(&ens.test, tau);

        let (native_report, native_pit) = build_report(
            method,
            "native",
            &test.name,
            master,
            &config.metrics.coverage_levels,
            &ens.test,
            &test_targets,
        )?;
        let (scaled_report, scaled_pit) = build_report(
            method,
            "scaled",
            &test.name,
            master,
            &config.metrics.coverage_levels,
            &scaled_test,
            &test_targets,
        )?;

        write_artifact(
            out_dir,
            &format!("reports/{method}_native.json"),
            &pretty_json(&native_report),
            &mut manifest,
        )?;
        write_artifact(
            out_dir,
            &format!("reports/{method}_scaled.json"),
            &pretty_json(&scaled_report),
            &mut manifest,
        )?;
        write_artifact(
            out_dir,
            &format!("pit/{method}_native.csv"),
            &pit_histogram_csv(&native_pit, config.metrics.pit_bins),
            &mut manifest,
        )?;
        write_artifact(
            out_dir,
            &format!("pit/{method}_scaled.csv"),
            &pit_histogram_csv(&scaled_pit, config.metrics.pit_bins),
            &mut manifest,
        )?;
        write_artifact(
            out_dir,
            &format!("intervals/{method}_native.csv"),
            &intervals_csv(&ens.test, &test_targets, &config.metrics.coverage_levels),
            &mut manifest,
        )?;
        write_artifact(
            out_dir,
            &format!("intervals/{method}_scaled.csv"),
            &intervals_csv(&scaled_test, &test_targets, &config.metrics.coverage_levels),
            &mut manifest,
        )?;
        write_artifact(
            out_dir,
            &format!("ensembles/{method}.csv"),
            &ensembles_csv(&ens.test),
            &mut manifest,
        )?;
        #[derive(Serialize)]
        struct DumpMeta<'a> {
            method: &'a str,
            params: &'a str,
            master_seed: u64,
            n_cases: usize,
            samples_per_case: usize,
            tau: f64,
        }
        write_artifact(
            out_dir,
            &format!("ensembles/{method}_meta.json"),
            &pretty_json(&DumpMeta {
                method,
                params: &ens.test[0].meta.params,
                master_seed: master,
                n_cases: ens.test.len(),
                samples_per_case: ens.test[0].len(),
                tau,
            }),
            &mut manifest,
        )?;

        let cost = ledger.method_mut(method);
        cost.eval_passes += ens.eval_passes;
        cost.temperature_passes += ens.temperature_passes;
        cost.training_steps += ens.training_steps;
        timings.add(method, ens.seconds + started.elapsed().as_secs_f64());

        summary.methods.insert(
            method.to_string(),
            MethodEvaluation {
                native_w1: native_report.pit_w1,
                scaled_w1: scaled_report.pit_w1,
                tau,
                native_crps: native_report.crps,
            },
        );
    }

    ledger.save(out_dir)?;
    timings.save(out_dir)?;
    write_artifact(
        out_dir,
        "evaluate_summary.json",
        &pretty_json(&summary),
        &mut manifest,
    )?;
    manifest.record(out_dir, "cost_ledger.json")?;
    manifest.record(out_dir, "timings.json")?;
    manifest.save(out_dir)?;
    Ok(summary)
}

/// Evaluate the calibration loss and the ensemble metrics across a list of
/// `nu` values at fixed seeds, one CSV row per `nu`.
pub fn cmd_sweep_nu(
    config: &RunConfig,
    model_path: &Path,
    nus: &[u64],
    out_dir: &Path,
) -> Result<(), PipelineError> {
    config.validate()?;
    if nus.is_empty() {
        return Err(PipelineError::Config("sweep list is empty".into()));
    }
    ensure_dir(out_dir)?;
    let model = load_model(model_path)?;
    let (_, cal, test) = config.build_splits()?;
    let test_targets = targets_of(&test);
    let batch = CalibrationBatch::new(cal.cases.clone(), config.sa.b, config.sa.m)?;
    let master = config.sa.master_seed;
    let level = config.metrics.coverage_levels[0];

    let mut csv = String::from("nu,loss,loss_stderr,w1,coverage,crps,energy\n");
    for &nu in nus {
        let nu_param = ConcentrationParam::new(nu)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        // Same seeds across nu values: differences are due to nu alone.
        let (record, diags) = eval_loss_detailed(&model, &batch, nu_param, master)?;
        let case_losses: Vec<f64> = diags
            .iter()
            .map(|d| {
                d.deltas
                    .iter()
                    .map(|x| (x - d.residual) * (x - d.residual))
                    .sum::<f64>()
                    / d.deltas.len() as f64
            })
            .collect();
        let mean_loss = record.loss_estimate;
        let var: f64 = case_losses
            .iter()
            .map(|l| (l - mean_loss) * (l - mean_loss))
            .sum::<f64>()
            / case_losses.len() as f64;
        let stderr = (var / case_losses.len() as f64).sqrt();

        let ensembles: Vec<PredictiveEnsemble> = test
            .cases
            .iter()
            .enumerate()
            .map(|(i, case)| {
                let seed = case_seed(master, domain::ATTENTION_ROW, SPLIT_TEST, i);
                Ok(draw_ensemble(&model, case, nu_param, config.sa.m, seed)?)
            })
            .collect::<Result<_, PipelineError>>()?;
        let pit_sample = pit(&ensembles, &test_targets)?;
        let w1 = w1_to_uniform(&pit_sample)?;
        let (coverage, _) = coverage_and_sharpness(&ensembles, &test_targets, level)?;
        let mut crps_sum = 0.0;
        let mut energy_sum = 0.0;
        for (e, &y) in ensembles.iter().zip(&test_targets) {
            crps_sum += crps_decomposed(e, y)?.0;
            energy_sum += energy_score(e, y)?;
        }
        let n = ensembles.len() as f64;
        csv.push_str(&format!(
            "{nu},{},{},{},{},{},{}\n",
            fmt(record.loss_estimate),
            fmt(stderr),
            fmt(w1),
            fmt(coverage),
            fmt(crps_sum / n),
            fmt(energy_sum / n)
        ));
    }

    let mut manifest = Manifest::load_or_default(out_dir);
    write_artifact(out_dir, "sweep_nu.csv", &csv, &mut manifest)?;
    manifest.save(out_dir)?;
    Ok(())
}

/// Rebuild the surrogate landscape from a BO trace: the posterior-mean
/// objective over the domain, Thompson-sample curves, and the per-sample
/// continuous minimizers in log space.
pub fn cmd_report(
    config: &RunConfig,
    trace_path: &Path,
    out_dir: &Path,
) -> Result<(), PipelineError> {
    ensure_dir(out_dir)?;
    let text = std::fs::read_to_string(trace_path)
        .map_err(|e| PipelineError::io(&format!("reading trace {}", trace_path.display()), e))?;
    let mut iterations = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let it: BoIteration = serde_json::from_str(line).map_err(|e| {
            PipelineError::Config(format!("trace line {}: {e}", i + 1))
        })?;
        iterations.push(it);
    }
    if iterations.is_empty() {
        return Err(PipelineError::Config("trace has no iterations".into()));
    }
    let s0 = iterations[0].s0;
    let records: Vec<_> = iterations
        .iter()
        .map(|it| it.record.clone())
        .filter(|r| r.scale_estimate > 0.0)
        .collect();
    let posterior = fit_surrogate(&records)?;
    let domain_range = SearchDomain::new(config.sa.nu_min, config.sa.nu_max)?;

    // Integer grid over the domain, log-spaced when the domain is large.
    let mut grid: Vec<u64> = if domain_range.len() <= 512 {
        (domain_range.nu_min..=domain_range.nu_max).collect()
    } else {
        let lo = (domain_range.nu_min as f64).ln();
        let hi = (domain_range.nu_max as f64).ln();
        let mut g: Vec<u64> = (0..512)
            .map(|i| (lo + (hi - lo) * i as f64 / 511.0).exp().round() as u64)
            .collect();
        g.sort_unstable();
        g.dedup();
        g
    };
    grid.retain(|&nu| domain_range.contains(nu));

    let eps2_mean = posterior.noise_variance_mean();
    let mean_curve: Vec<f64> = grid
        .iter()
        .map(|&nu| {
            acquisition_objective(
                posterior.coeff_mean[0],
                posterior.coeff_mean[1],
                eps2_mean,
                s0,
                nu as f64,
            )
        })
        .collect();
    let min_obj = mean_curve.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-300);
    let mut landscape = String::from("nu,ln_nu,objective,normalized\n");
    for (&nu, &obj) in grid.iter().zip(&mean_curve) {
        landscape.push_str(&format!(
            "{nu},{},{},{}\n",
            fmt((nu as f64).ln()),
            fmt(obj),
            fmt(obj / min_obj)
        ));
    }

    let n_samples = 20;
    let mut samples_csv = String::from("sample_id,nu,objective\n");
    let mut beta_csv = String::from("sample_id,a,ln_b,eps2,beta_star\n");
    for sample_id in 0..n_samples {
        let mut rng = crate::rng::substream(
            config.sa.master_seed,
            domain::REPORT,
            &[sample_id as u64],
        );
        let (a, ln_b, eps2) = thompson_draw(&posterior, &mut rng);
        for &nu in &grid {
            let obj = acquisition_objective(a, ln_b, eps2, s0, nu as f64);
            samples_csv.push_str(&format!("{sample_id},{nu},{}\n", fmt(obj)));
        }
        let beta_star = if a == 0.0 {
            f64::NAN
        } else {
            ((s0.ln() - 1.5 * eps2 - ln_b) / a).clamp(
                (domain_range.nu_min as f64).ln(),
                (domain_range.nu_max as f64).ln(),
            )
        };
        beta_csv.push_str(&format!(
            "{sample_id},{},{},{},{}\n",
            fmt(a),
            fmt(ln_b),
            fmt(eps2),
            fmt(beta_star)
        ));
    }

    let mut manifest = Manifest::load_or_default(out_dir);
    write_artifact(out_dir, "surrogate_landscape.csv", &landscape, &mut manifest)?;
    write_artifact(out_dir, "surrogate_samples.csv", &samples_csv, &mut manifest)?;
    write_artifact(out_dir, "surrogate_beta_star.csv", &beta_csv, &mut manifest)?;
    manifest.save(out_dir)?;
    Ok(())
}
