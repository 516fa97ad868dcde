//! Experiment orchestration: flat `key=value` configuration, channel
//! datasets, estimator training, the MSE and BER sweeps, and CSV/SVG
//! output.

mod config;
mod dataset;
mod experiments;
mod output;

pub use config::{
    load_config, load_config_with, split_counts, BerMode, ChannelParams, CompParams, ConfigMap, EstimatorKind,
    ExperimentConfig, FrameParams, Paths, PnKind, PnParams, PriorKind, SweepParams, TrainingParams, KEYS,
};
pub use dataset::{
    decode_records, encode_records, freq_responses, generate_dataset, generate_realizations, load_dataset,
    manifest_path, realizations, split_ranges, ChannelRecord, DatasetSplit, Manifest, DATASET_MAGIC, DATASET_VERSION,
};
pub use experiments::{
    flat_rayleigh_ber, oracle_compensation_ber, run_ber_experiment, run_mse_experiment, simulate_trial, OracleBer,
    TrialFrame,
};
pub use output::{emit_outputs, format_real, svg_plots, write_file, ResultTable, BUILD_ID};

use crate::estimator::{
    build_network_with, spline_validation_l1, train_with_progress, EpochRecord, EstimatorNetwork, LossHistory,
    TrainingData, TABLE_I,
};
use crate::Result;

/// Table I network at the configured grid size, trained on the split.
pub fn run_training(
    cfg: &ExperimentConfig,
    split: &DatasetSplit,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(EstimatorNetwork, LossHistory)> {
    let pattern = cfg.pilot_pattern()?;
    let train = freq_responses(&split.train);
    let validation = freq_responses(&split.validation);
    let data = TrainingData {
        pattern: &pattern,
        train: &train,
        validation: &validation,
    };
    let net = build_network_with(&TABLE_I, cfg.frame.nc, cfg.frame.ns, cfg.training.init_seed)?;
    let (mut net, history) = train_with_progress(net, &data, &cfg.train_hyper(), on_epoch)?;
    net.meta.doppler_hz = cfg.channel.doppler_hz;
    Ok((net, history))
}

/// Spline L1 on the validation planes the training loop scores.
pub fn spline_baseline_l1(cfg: &ExperimentConfig, split: &DatasetSplit) -> Result<f64> {
    let pattern = cfg.pilot_pattern()?;
    let validation = freq_responses(&split.validation);
    let data = TrainingData {
        pattern: &pattern,
        train: &[],
        validation: &validation,
    };
    spline_validation_l1(&data, &cfg.train_hyper())
}

/// Metadata common to every table produced under `cfg`.
pub fn base_meta(cfg: &ExperimentConfig, seed: u64) -> std::collections::BTreeMap<String, String> {
    let mut m = std::collections::BTreeMap::new();
    m.insert("experiment".into(), cfg.experiment.clone());
    m.insert("config_hash".into(), cfg.hash());
    m.insert("seed".into(), seed.to_string());
    m.insert("build_id".into(), BUILD_ID.into());
    m.insert("config".into(), cfg.canonical().trim_end().to_string());
    m
}

pub fn loss_table(cfg: &ExperimentConfig, history: &LossHistory, spline_l1: f64) -> Result<ResultTable> {
    let mut t = ResultTable::new(&["epoch", "lr", "loss_train", "loss_validation"]);
    for r in &history.records {
        t.push_row(&[r.epoch as f64, r.lr, r.train_loss, r.validation_loss])?;
    }
    t.meta = base_meta(cfg, cfg.training.train_seed);
    t.meta.insert("spline_validation_l1".into(), format_real(spline_l1));
    Ok(t)
}
