use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ofdmlab::estimator::EstimatorNetwork;
use ofdmlab::harness::{self, ExperimentConfig, ResultTable};
use ofdmlab::{Error, Result};

#[derive(Parser)]
#[command(name = "ofdmlab", version, about = "CNN channel estimation and phase-noise compensation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Config overrides as `--key value` or `--key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the channel dataset and its manifest.
    GenData(Common),
    /// Train the estimator and write its checkpoint and loss history.
    Train(Common),
    /// Channel-estimation MSE sweep.
    EvalMse {
        #[arg(long)]
        plot: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Bit-error-rate sweep.
    EvalBer {
        #[arg(long)]
        plot: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Render SVG plots for an existing CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
    },
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = raw.iter();
    while let Some(arg) = it.next() {
        let key = arg.strip_prefix("--").ok_or_else(|| Error::InvalidArgument(format!("expected --key, got '{arg}'")))?;
        match key.split_once('=') {
            Some((k, v)) => out.push((k.replace('-', "_"), v.to_string())),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::InvalidArgument(format!("missing value for --{key}")))?;
                out.push((key.replace('-', "_"), v.clone()));
            }
        }
    }
    Ok(out)
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    harness::load_config_with(&common.config, &parse_overrides(&common.overrides)?)
}

fn load_network(cfg: &ExperimentConfig) -> Result<EstimatorNetwork> {
    let path = &cfg.paths.checkpoint;
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    EstimatorNetwork::from_checkpoint(&bytes, cfg.frame.nc, cfg.frame.ns)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn gen_data(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let t = &cfg.training;
    let m = harness::generate_dataset(&cfg, t.dataset_count, t.data_seed, &cfg.paths.dataset)?;
    println!(
        "wrote {} ({} records: train {:?}, validation {:?}, test {:?})",
        m.data_file.display(),
        m.count,
        m.train,
        m.validation,
        m.test
    );
    println!("wrote {}", harness::manifest_path(&m.data_file).display());
    Ok(())
}

fn train(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let split = harness::DatasetSplit::for_config(&cfg)?;
    let spline = harness::spline_baseline_l1(&cfg, &split)?;
    println!(
        "training on {} realizations, validating on {}; spline validation L1 {spline:.6}",
        split.train.len(),
        split.validation.len()
    );
    let (net, history) = harness::run_training(&cfg, &split, |r| {
        println!(
            "epoch {:>5} lr {:.3e} train {:.6} validation {:.6}",
            r.epoch, r.lr, r.train_loss, r.validation_loss
        );
    })?;
    write_bytes(&cfg.paths.checkpoint, &net.to_checkpoint())?;
    println!("wrote {}", cfg.paths.checkpoint.display());
    let table = harness::loss_table(&cfg, &history, spline)?;
    report(&harness::emit_outputs(&table, &cfg.paths.output_dir.join("train_loss.csv"), true)?);
    Ok(())
}

fn eval(common: &Common, plot: bool, ber: bool) -> Result<()> {
    let cfg = load(common)?;
    let split = harness::DatasetSplit::for_config(&cfg)?;
    let channels = harness::realizations(&split.test);
    let network = match cfg.sweep.estimator {
        harness::EstimatorKind::Network => Some(load_network(&cfg)?),
        harness::EstimatorKind::Spline => None,
    };
    let (table, name) = if ber {
        (harness::run_ber_experiment(&cfg, network.as_ref(), &channels)?, "ber.csv")
    } else {
        (harness::run_mse_experiment(&cfg, network.as_ref(), &channels)?, "mse.csv")
    };
    report(&harness::emit_outputs(&table, &cfg.paths.output_dir.join(name), plot)?);
    Ok(())
}

fn read_csv(path: &Path) -> Result<ResultTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let mut table = ResultTable::new(&header);
    for (n, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("{}: row {}: {e}", path.display(), n + 2)))?;
        table.push_row(&row)?;
    }
    Ok(table)
}

fn plot(csv: &Path) -> Result<()> {
    let table = read_csv(csv)?;
    let mut files = Vec::new();
    for (family, svg) in harness::svg_plots(&table) {
        let stem = csv.with_extension("");
        let path = PathBuf::from(format!("{}_{family}.svg", stem.display()));
        harness::write_file(&path, &svg)?;
        files.push(path);
    }
    report(&files);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(c) => gen_data(c),
        Command::Train(c) => train(c),
        Command::EvalMse { plot, common } => eval(common, *plot, false),
        Command::EvalBer { plot, common } => eval(common, *plot, true),
        Command::Plot { csv } => plot(csv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::from(2)
        }
    }
}
