use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::channel::{ChannelSpec, PowerDelayProfile};
use crate::estimator::TrainHyper;
use crate::nn::LrSchedule;
use crate::numerics::rng_stream;
use crate::ofdm::{build_pilot_pattern, DataSnr, FrameConfig, Modulation, PilotPattern};
use crate::phase_noise::{gen_gaussian_pn, gen_psd_pn, gen_wiener_pn, PnPsdParams, PnSequence};
use crate::pncomp::{FillPolicy, InterpMode, PnCompConfig, PnPrior, SampleSet};
use crate::{Error, Result};

use rand::Rng;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Every accepted key with its default. An empty default means "unset".
pub const KEYS: &[(&str, &str, &str)] = &[
    ("experiment", "", "experiment id (required)"),
    ("nc", "72", "subcarriers per OFDM symbol"),
    ("ns", "14", "OFDM symbols per subframe"),
    ("n_cp", "16", "cyclic prefix length in samples"),
    ("sf", "6", "pilot spacing along frequency"),
    ("st", "7", "pilot spacing along time"),
    ("modulation", "4", "QAM order: 4, 16 or 64"),
    ("pdp", "veh-a", "power-delay profile: veh-a or custom"),
    ("pdp_delays_ns", "", "custom profile delays, comma separated"),
    ("pdp_powers_db", "", "custom profile powers, comma separated"),
    ("doppler_hz", "97", "maximum Doppler frequency"),
    ("ue_speed_kmh", "", "if set, Doppler is derived from speed and carrier"),
    ("carrier_hz", "2.1e9", "carrier frequency"),
    ("bandwidth_hz", "1.6e6", "sample rate of the baseband signal"),
    ("pn_model", "psd", "phase noise: none, gaussian, psd or wiener"),
    ("pn_sets", "3", "phase-noise sets to sweep (0 = no phase noise)"),
    ("pn_target_sigma", "true", "rescale PSD trajectories to the nominal set sigma"),
    ("pn_beta_hz", "100", "Wiener 3-dB bandwidth"),
    ("comp_fill", "dd", "reference fill at data positions: dd, pilot or known"),
    ("comp_samples", "pilot", "time samples per symbol: pilot (pilot indices) or all"),
    ("comp_all_symbols", "false", "estimate phase on every symbol"),
    ("comp_interp", "mmse", "phase interpolation: mmse or bilinear"),
    ("comp_prior", "fixed", "mmse prior: fixed (rho values) or model (matched to the pn process)"),
    ("comp_rho_t", "0.999", "fixed prior correlation between adjacent samples"),
    ("comp_rho_s", "0.95", "fixed prior correlation between adjacent symbols"),
    ("comp_threshold", "1e-3", "reference magnitude threshold relative to its rms"),
    ("dataset_count", "50000", "channel realizations in the dataset"),
    ("train_count", "", "explicit training split size"),
    ("val_count", "", "explicit validation split size"),
    ("test_count", "", "explicit test split size"),
    ("epochs", "10000", "training epochs"),
    ("samples_per_epoch", "1000", "planes drawn per epoch"),
    ("mini_batch", "64", "planes per Adam step"),
    ("lr", "1e-3", "initial learning rate"),
    ("lr_period", "", "epochs between halvings (default epochs/5)"),
    ("sigma_train_deg", "1.58", "phase perturbation of training pilots"),
    ("train_snr_min_db", "0", "lowest training pilot SNR"),
    ("train_snr_max_db", "30", "highest training pilot SNR"),
    ("val_limit", "0", "validation realizations scored per epoch (0 = all)"),
    ("init_seed", "1", "network initialisation seed"),
    ("data_seed", "2", "dataset generation seed"),
    ("train_seed", "3", "training sample seed"),
    ("eval_seed", "4", "evaluation seed"),
    ("estimator", "network", "first-pass estimator: network or spline"),
    ("pilot_snr_db", "0,5,10,15,20,25,30", "pilot SNR sweep for the MSE experiment"),
    ("ebn0_db", "0,5,10,15,20,25,30", "Eb/N0 sweep for the BER experiment"),
    ("ber_mode", "ebn0", "BER sweep axis: ebn0 or pilot"),
    ("ber_pilot_snr_db", "30", "pilot SNR held fixed in ebn0 mode"),
    ("ber_ebn0_db", "25", "Eb/N0 held fixed in pilot mode"),
    ("trials", "500", "subframes per sweep point (minimum for BER)"),
    ("min_errors", "100", "BER points run until every column has this many errors"),
    ("max_trials", "5000", "cap on subframes per BER point"),
    ("dataset_path", "data/channels.cech", "dataset file"),
    ("checkpoint_path", "data/estimator.cecn", "estimator checkpoint"),
    ("output_dir", "out", "directory for CSV, metadata and plots"),
];

fn default_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|k| k.0 == key).map(|k| k.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnKind {
    None,
    Gaussian,
    Psd,
    Wiener,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Fixed,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Network,
    Spline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BerMode {
    EbN0,
    PilotSnr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameParams {
    pub nc: usize,
    pub ns: usize,
    pub n_cp: usize,
    pub sf: usize,
    pub st: usize,
    pub modulation: Modulation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub pdp: PowerDelayProfile,
    pub doppler_hz: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnParams {
    pub model: PnKind,
    pub sets: Vec<usize>,
    pub target_sigma: bool,
    pub beta_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompParams {
    pub base: PnCompConfig,
    pub prior: PriorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingParams {
    pub dataset_count: usize,
    /// Train/validation/test sizes.
    pub split: [usize; 3],
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub mini_batch: usize,
    pub lr: f64,
    pub lr_period: usize,
    pub sigma_train_deg: f64,
    pub snr_range_db: (f64, f64),
    pub val_limit: Option<usize>,
    pub init_seed: u64,
    pub data_seed: u64,
    pub train_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub estimator: EstimatorKind,
    pub pilot_snr_db: Vec<f64>,
    pub ebn0_db: Vec<f64>,
    pub ber_mode: BerMode,
    pub ber_pilot_snr_db: f64,
    pub ber_ebn0_db: f64,
    pub trials: usize,
    pub min_errors: usize,
    pub max_trials: usize,
    pub eval_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub frame: FrameParams,
    pub channel: ChannelParams,
    pub pn: PnParams,
    pub comp: CompParams,
    pub training: TrainingParams,
    pub sweep: SweepParams,
    pub paths: Paths,
    values: BTreeMap<String, String>,
}

/// Raw `key=value` pairs with the line each came from (0 for overrides).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = ConfigMap::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected key=value, got '{body}'"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if default_of(k).is_none() {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key '{k}'"),
                });
            }
            if let Some((_, first)) = map.entries.get(k) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key '{k}' (first set on line {first})"),
                });
            }
            map.entries.insert(k.to_string(), (v.to_string(), line));
        }
        Ok(map)
    }

    /// Replaces or adds a value; later overrides win.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if default_of(key).is_none() {
            return Err(Error::Config {
                line: 0,
                message: format!("unknown key '{key}'"),
            });
        }
        self.entries.insert(key.to_string(), (value.trim().to_string(), 0));
        Ok(())
    }
}

struct Reader<'a> {
    map: &'a ConfigMap,
    resolved: BTreeMap<String, String>,
}

impl Reader<'_> {
    fn raw(&mut self, key: &str) -> (String, usize) {
        let (v, line) = match self.map.entries.get(key) {
            Some((v, l)) => (v.clone(), *l),
            None => (default_of(key).expect("key is registered").to_string(), 0),
        };
        self.resolved.insert(key.to_string(), v.clone());
        (v, line)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (v, line) = self.raw(key);
        v.parse().map_err(|_| Error::Config {
            line,
            message: format!("cannot parse '{v}' for key '{key}'"),
        })
    }

    fn optional<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        let (v, _) = self.raw(key);
        if v.is_empty() {
            return Ok(None);
        }
        self.parse(key).map(Some)
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let (v, line) = self.raw(key);
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|_| Error::Config {
                    line,
                    message: format!("cannot parse list item '{s}' for key '{key}'"),
                })
            })
            .collect()
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)]) -> Result<T> {
        let (v, line) = self.raw(key);
        options.iter().find(|o| o.0 == v).map(|o| o.1).ok_or_else(|| Error::Config {
            line,
            message: format!(
                "key '{key}' must be one of {}, got '{v}'",
                options.iter().map(|o| o.0).collect::<Vec<_>>().join("/")
            ),
        })
    }

    fn fail(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            line: self.map.entries.get(key).map_or(0, |e| e.1),
            message: format!("{key}: {}", message.into()),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    load_config_with(path, &[])
}

/// Loads a file and applies `key=value` overrides on top.
pub fn load_config_with(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = ConfigMap::parse(&text)?;
    for (k, v) in overrides {
        map.set(k, v)?;
    }
    ExperimentConfig::from_map(&map)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(&ConfigMap::parse(text)?)
    }

    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let mut r = Reader {
            map,
            resolved: BTreeMap::new(),
        };
        let experiment = r.raw("experiment").0;
        if experiment.is_empty() {
            return Err(Error::Config {
                line: 0,
                message: "missing required key 'experiment'".into(),
            });
        }

        let frame = FrameParams {
            nc: r.parse("nc")?,
            ns: r.parse("ns")?,
            n_cp: r.parse("n_cp")?,
            sf: r.parse("sf")?,
            st: r.parse("st")?,
            modulation: {
                let m: usize = r.parse("modulation")?;
                Modulation::from_order(m).map_err(|e| r.fail("modulation", e.to_string()))?
            },
        };
        for (key, v) in [("nc", frame.nc), ("ns", frame.ns), ("sf", frame.sf), ("st", frame.st)] {
            if v == 0 {
                return Err(r.fail(key, "must be positive"));
            }
        }
        if frame.n_cp >= frame.nc {
            return Err(r.fail("n_cp", "must be shorter than the symbol"));
        }

        let pdp = match r.choice("pdp", &[("veh-a", true), ("custom", false)])? {
            true => {
                r.raw("pdp_delays_ns");
                r.raw("pdp_powers_db");
                PowerDelayProfile::vehicular_a()
            }
            false => {
                let d = r.list("pdp_delays_ns")?;
                let p = r.list("pdp_powers_db")?;
                PowerDelayProfile::new(d, p).map_err(|e| r.fail("pdp_delays_ns", e.to_string()))?
            }
        };
        let carrier_hz: f64 = r.parse("carrier_hz")?;
        let mut doppler_hz: f64 = r.parse("doppler_hz")?;
        if let Some(kmh) = r.optional::<f64>("ue_speed_kmh")? {
            doppler_hz = kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT;
        }
        let bandwidth_hz: f64 = r.parse("bandwidth_hz")?;
        if !(doppler_hz >= 0.0) || !(bandwidth_hz > 0.0) || !(carrier_hz > 0.0) {
            return Err(r.fail("doppler_hz", "frequencies must be positive"));
        }
        let channel = ChannelParams {
            pdp,
            doppler_hz,
            carrier_hz,
            bandwidth_hz,
        };

        let pn = PnParams {
            model: r.choice(
                "pn_model",
                &[
                    ("none", PnKind::None),
                    ("gaussian", PnKind::Gaussian),
                    ("psd", PnKind::Psd),
                    ("wiener", PnKind::Wiener),
                ],
            )?,
            sets: r.list("pn_sets")?,
            target_sigma: r.parse("pn_target_sigma")?,
            beta_hz: r.parse("pn_beta_hz")?,
        };
        if pn.sets.is_empty() || pn.sets.iter().any(|&s| s > 3) {
            return Err(r.fail("pn_sets", "expected a non-empty list of sets in 0..=3"));
        }

        let comp = CompParams {
            base: PnCompConfig {
                fill: r.choice(
                    "comp_fill",
                    &[
                        ("dd", FillPolicy::DecisionDirected),
                        ("pilot", FillPolicy::PilotOnly),
                        ("known", FillPolicy::Known),
                    ],
                )?,
                samples: r.choice("comp_samples", &[("pilot", SampleSet::PilotIndices), ("all", SampleSet::All)])?,
                all_symbols: r.parse("comp_all_symbols")?,
                interp: r.choice("comp_interp", &[("mmse", InterpMode::Mmse), ("bilinear", InterpMode::Bilinear)])?,
                prior: PnPrior {
                    rho_t: r.parse("comp_rho_t")?,
                    rho_s: r.parse("comp_rho_s")?,
                    variance: None,
                },
                noise_var: 1.0,
                threshold_rel: r.parse("comp_threshold")?,
            },
            prior: r.choice("comp_prior", &[("fixed", PriorKind::Fixed), ("model", PriorKind::Model)])?,
        };

        let dataset_count: usize = r.parse("dataset_count")?;
        let explicit = [
            r.optional::<usize>("train_count")?,
            r.optional::<usize>("val_count")?,
            r.optional::<usize>("test_count")?,
        ];
        let split = match explicit {
            [None, None, None] => split_counts(dataset_count),
            [Some(a), Some(b), Some(c)] if a + b + c == dataset_count => [a, b, c],
            _ => return Err(r.fail("train_count", "explicit split sizes must all be set and sum to dataset_count")),
        };
        if dataset_count == 0 {
            return Err(r.fail("dataset_count", "must be positive"));
        }
        let epochs: usize = r.parse("epochs")?;
        let lr_period = r.optional::<usize>("lr_period")?.unwrap_or((epochs / 5).max(1));
        let training = TrainingParams {
            dataset_count,
            split,
            epochs,
            samples_per_epoch: r.parse("samples_per_epoch")?,
            mini_batch: r.parse("mini_batch")?,
            lr: r.parse("lr")?,
            lr_period,
            sigma_train_deg: r.parse("sigma_train_deg")?,
            snr_range_db: (r.parse("train_snr_min_db")?, r.parse("train_snr_max_db")?),
            val_limit: match r.parse::<usize>("val_limit")? {
                0 => None,
                n => Some(n),
            },
            init_seed: r.parse("init_seed")?,
            data_seed: r.parse("data_seed")?,
            train_seed: r.parse("train_seed")?,
        };
        if training.mini_batch == 0 || training.samples_per_epoch == 0 {
            return Err(r.fail("mini_batch", "batch sizes must be positive"));
        }

        let sweep = SweepParams {
            estimator: r.choice(
                "estimator",
                &[("network", EstimatorKind::Network), ("spline", EstimatorKind::Spline)],
            )?,
            pilot_snr_db: r.list("pilot_snr_db")?,
            ebn0_db: r.list("ebn0_db")?,
            ber_mode: r.choice("ber_mode", &[("ebn0", BerMode::EbN0), ("pilot", BerMode::PilotSnr)])?,
            ber_pilot_snr_db: r.parse("ber_pilot_snr_db")?,
            ber_ebn0_db: r.parse("ber_ebn0_db")?,
            trials: r.parse("trials")?,
            min_errors: r.parse("min_errors")?,
            max_trials: r.parse("max_trials")?,
            eval_seed: r.parse("eval_seed")?,
        };
        if sweep.pilot_snr_db.is_empty() {
            return Err(r.fail("pilot_snr_db", "list must not be empty"));
        }
        if sweep.ebn0_db.is_empty() {
            return Err(r.fail("ebn0_db", "list must not be empty"));
        }
        if sweep.trials == 0 || sweep.max_trials < sweep.trials {
            return Err(r.fail("trials", "need 0 < trials <= max_trials"));
        }

        let paths = Paths {
            dataset: r.raw("dataset_path").0.into(),
            checkpoint: r.raw("checkpoint_path").0.into(),
            output_dir: r.raw("output_dir").0.into(),
        };
        let cfg = ExperimentConfig {
            experiment,
            frame,
            channel,
            pn,
            comp,
            training,
            sweep,
            paths,
            values: r.resolved,
        };
        cfg.channel_spec().map_err(|e| Error::Config {
            line: 0,
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    /// Every key with its resolved value, one `key=value` per line, sorted.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of [`ExperimentConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn value(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn pilot_pattern(&self) -> Result<PilotPattern> {
        let f = &self.frame;
        build_pilot_pattern(f.nc, f.ns, f.sf, f.st)
    }

    pub fn frame_config(&self, pilot_snr_db: f64, data_snr: DataSnr) -> Result<FrameConfig> {
        let f = &self.frame;
        Ok(FrameConfig {
            nc: f.nc,
            ns: f.ns,
            n_cp: f.n_cp,
            modulation: f.modulation,
            pattern: self.pilot_pattern()?,
            pilot_snr_db,
            data_snr,
        })
    }

    pub fn channel_spec(&self) -> Result<ChannelSpec> {
        let f = &self.frame;
        let c = &self.channel;
        ChannelSpec::new(&c.pdp, c.doppler_hz, f.nc, f.ns, f.n_cp, c.bandwidth_hz)
    }

    pub fn samples_per_subframe(&self) -> usize {
        (self.frame.nc + self.frame.n_cp) * self.frame.ns
    }

    /// Nominal σ in degrees of a phase-noise set for this model.
    pub fn pn_sigma_deg(&self, set: usize) -> Result<f64> {
        if set == 0 || self.pn.model == PnKind::None {
            return Ok(0.0);
        }
        match self.pn.model {
            PnKind::Wiener => Ok(f64::NAN),
            _ => PnPsdParams::table_sigma_deg(set),
        }
    }

    /// One subframe of phase noise for `set` (0 gives zeros).
    pub fn draw_pn(&self, set: usize, seed: u64) -> Result<PnSequence> {
        let n = self.samples_per_subframe();
        if set == 0 || self.pn.model == PnKind::None {
            return Ok(PnSequence::zeros(n));
        }
        let fs = self.channel.bandwidth_hz;
        match self.pn.model {
            PnKind::None => unreachable!(),
            PnKind::Gaussian => gen_gaussian_pn(PnPsdParams::table_sigma_deg(set)?, n, seed),
            PnKind::Psd => {
                let target = if self.pn.target_sigma {
                    Some(PnPsdParams::table_sigma_deg(set)?)
                } else {
                    None
                };
                gen_psd_pn(&PnPsdParams::table_set(set)?, n, fs, target, seed)
            }
            PnKind::Wiener => gen_wiener_pn(self.pn.beta_hz, n, fs, seed),
        }
    }

    /// Compensation settings for `set`; the model prior is matched to 32
    /// trajectories drawn from a fixed stream.
    pub fn pncomp_config(&self, set: usize) -> Result<PnCompConfig> {
        let mut cfg = self.comp.base;
        if self.comp.prior == PriorKind::Model && set != 0 && self.pn.model != PnKind::None {
            let mut rng = rng_stream(self.sweep.eval_seed, 0x9710);
            let draws: Vec<PnSequence> = (0..32).map(|_| self.draw_pn(set, rng.random())).collect::<Result<_>>()?;
            let refs: Vec<&[f64]> = draws.iter().map(|p| p.phases.as_slice()).collect();
            cfg.prior = PnPrior::from_trajectories(&refs, self.frame.nc, self.frame.n_cp)?;
        }
        Ok(cfg)
    }

    pub fn train_hyper(&self) -> TrainHyper {
        let t = &self.training;
        TrainHyper {
            epochs: t.epochs,
            samples_per_epoch: t.samples_per_epoch,
            mini_batch: t.mini_batch,
            schedule: LrSchedule {
                base: t.lr,
                period: t.lr_period,
            },
            sigma_train_deg: t.sigma_train_deg,
            pilot_snr_db: Some(t.snr_range_db),
            validation_limit: t.val_limit,
            seed: t.train_seed,
        }
    }
}

/// 70/10/20 split, rounding toward the training share.
pub fn split_counts(count: usize) -> [usize; 3] {
    let val = count / 10;
    let test = count / 5;
    [count - val - test, val, test]
}
