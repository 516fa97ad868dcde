use rand::seq::SliceRandom;
use rand::Rng;

use super::{make_training_sample, EstimatorNetwork, TrainingSample};
use crate::nn::{l1_loss, AdamState, LrSchedule, NetworkGrads, Tensor4};
use crate::numerics::{rng_stream, spline_interpolate_2d, ComplexGrid, SparseGrid};
use crate::ofdm::PilotPattern;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHyper {
    pub epochs: usize,
    /// Planes drawn from the training pool per epoch.
    pub samples_per_epoch: usize,
    pub mini_batch: usize,
    pub schedule: LrSchedule,
    pub sigma_train_deg: f64,
    /// Pilot SNR range in dB drawn uniformly per realization; `None` trains
    /// on noiseless pilots.
    pub pilot_snr_db: Option<(f64, f64)>,
    /// Validation realizations scored each epoch (`None` = all).
    pub validation_limit: Option<usize>,
    pub seed: u64,
}

impl TrainHyper {
    pub fn desk(seed: u64) -> Self {
        TrainHyper {
            epochs: 300,
            samples_per_epoch: 1000,
            mini_batch: 64,
            schedule: LrSchedule::scaled(300),
            sigma_train_deg: 1.58,
            pilot_snr_db: Some((0.0, 30.0)),
            validation_limit: Some(128),
            seed,
        }
    }
}

/// Channel realizations split for training.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub pattern: &'a PilotPattern,
    pub train: &'a [ComplexGrid],
    pub validation: &'a [ComplexGrid],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// NaN when there is no validation data.
    pub validation_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub records: Vec<EpochRecord>,
}

fn draw_snr(rng: &mut impl Rng, range: Option<(f64, f64)>) -> f64 {
    match range {
        None => f64::INFINITY,
        Some((lo, hi)) if hi > lo => rng.random_range(lo..hi),
        Some((lo, _)) => lo,
    }
}

fn batch_tensors(samples: &[&TrainingSample], nc: usize, ns: usize) -> Result<(Tensor4<f32>, Tensor4<f32>)> {
    let b = samples.len();
    let mut x = Vec::with_capacity(b * nc * ns);
    let mut t = Vec::with_capacity(b * nc * ns);
    for s in samples {
        x.extend_from_slice(&s.input);
        t.extend_from_slice(&s.target);
    }
    Ok((Tensor4::from_vec([b, 1, nc, ns], x)?, Tensor4::from_vec([b, 1, nc, ns], t)?))
}

/// Fixed validation planes, one pair per realization.
fn validation_planes(data: &TrainingData, hyper: &TrainHyper) -> Result<Vec<TrainingSample>> {
    let n = hyper.validation_limit.map_or(data.validation.len(), |l| l.min(data.validation.len()));
    let mut rng = rng_stream(hyper.seed, 0x7a1);
    let mut out = Vec::with_capacity(2 * n);
    for h in &data.validation[..n] {
        let snr = draw_snr(&mut rng, hyper.pilot_snr_db);
        let seed = rng.random();
        out.extend(make_training_sample(h, data.pattern, hyper.sigma_train_deg, snr, seed)?);
    }
    Ok(out)
}

/// Mean L1 loss of the network over `samples`, no parameter updates.
pub(crate) fn evaluate_l1(network: &EstimatorNetwork, samples: &[TrainingSample], mini_batch: usize) -> Result<f64> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut acc = 0.0;
    for chunk in samples.chunks(mini_batch.max(1)) {
        let refs: Vec<&TrainingSample> = chunk.iter().collect();
        let (x, t) = batch_tensors(&refs, network.nc, network.ns)?;
        let y = network.net.forward(&x)?;
        acc += l1_loss(&y, &t)?.0 * chunk.len() as f64;
    }
    Ok(acc / samples.len() as f64)
}

/// Mean L1 loss of the 2D spline baseline on the same validation planes
/// the training loop scores.
pub fn spline_validation_l1(data: &TrainingData, hyper: &TrainHyper) -> Result<f64> {
    let planes = validation_planes(data, hyper)?;
    if planes.is_empty() {
        return Ok(f64::NAN);
    }
    let (nc, ns) = (data.pattern.nc, data.pattern.ns);
    let mut acc = 0.0;
    for pair in planes.chunks(2) {
        let grid = ComplexGrid::from_fn(nc, ns, |k, i| {
            C64::new(pair[0].input[k * ns + i] as f64, pair[1].input[k * ns + i] as f64)
        });
        let fit = spline_interpolate_2d(&SparseGrid::new(grid, data.pattern.positions().to_vec())?)?.grid;
        for k in 0..nc {
            for i in 0..ns {
                let z = fit.get(k, i);
                acc += (z.re as f32 - pair[0].target[k * ns + i]).abs() as f64;
                acc += (z.im as f32 - pair[1].target[k * ns + i]).abs() as f64;
            }
        }
    }
    Ok(acc / (planes.len() * nc * ns) as f64)
}

pub fn train(
    network: EstimatorNetwork,
    data: &TrainingData,
    hyper: &TrainHyper,
) -> Result<(EstimatorNetwork, LossHistory)> {
    train_with_progress(network, data, hyper, |_| {})
}

/// Adam on mini-batches of freshly drawn planes; `on_epoch` sees each
/// epoch's losses as they are recorded.
pub fn train_with_progress(
    mut network: EstimatorNetwork,
    data: &TrainingData,
    hyper: &TrainHyper,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(EstimatorNetwork, LossHistory)> {
    if data.train.is_empty() {
        return Err(Error::invalid("training pool is empty"));
    }
    if hyper.mini_batch == 0 || hyper.samples_per_epoch == 0 {
        return Err(Error::invalid("batch sizes must be positive"));
    }
    if data.train.iter().chain(data.validation).any(|h| h.dims() != (network.nc, network.ns)) {
        return Err(Error::invalid("realization dims differ from the network's"));
    }
    let (nc, ns) = (network.nc, network.ns);
    let validation = validation_planes(data, hyper)?;
    let mut state = AdamState::new(&network.net.param_sizes());
    let mut history = LossHistory::default();
    for epoch in 0..hyper.epochs {
        let lr = hyper.schedule.lr_at_epoch(epoch);
        let mut rng = rng_stream(hyper.seed, 0x1000 + epoch as u64);
        let mut pool = Vec::with_capacity(hyper.samples_per_epoch + 1);
        while pool.len() < hyper.samples_per_epoch {
            let h = &data.train[rng.random_range(0..data.train.len())];
            let snr = draw_snr(&mut rng, hyper.pilot_snr_db);
            pool.extend(make_training_sample(h, data.pattern, hyper.sigma_train_deg, snr, rng.random())?);
        }
        pool.truncate(hyper.samples_per_epoch);
        pool.shuffle(&mut rng);

        let mut acc = 0.0;
        for chunk in pool.chunks(hyper.mini_batch) {
            let refs: Vec<&TrainingSample> = chunk.iter().collect();
            let (x, t) = batch_tensors(&refs, nc, ns)?;
            let cache = network.net.forward_cached(&x)?;
            let (loss, grad) = l1_loss(cache.output(), &t)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("mini-batch loss {loss}"),
                });
            }
            acc += loss * chunk.len() as f64;
            let mut grads = NetworkGrads::zeros_like(&network.net);
            network.net.backward_into(&cache, &grad, &mut grads)?;
            network.net.adam_update(&grads, &mut state, lr)?;
        }
        if !network.net.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: "non-finite weights after update".into(),
            });
        }
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: acc / pool.len() as f64,
            validation_loss: evaluate_l1(&network, &validation, hyper.mini_batch)?,
        };
        if record.validation_loss.is_infinite() {
            return Err(Error::Diverged {
                epoch,
                detail: "validation loss is infinite".into(),
            });
        }
        on_epoch(&record);
        history.records.push(record);
    }
    network.trained = true;
    network.meta.sigma_train_deg = hyper.sigma_train_deg;
    network.meta.epochs += hyper.epochs;
    Ok((network, history))
}
