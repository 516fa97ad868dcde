//! The channel-estimation network: a four-layer same-padded CNN that
//! completes a sparse grid of pilot estimates into a dense channel grid.
//! Real and imaginary parts go through the same weights one after the
//! other.

mod sample;
mod train;

pub use sample::{make_full_chain_sample, make_training_sample, TrainingSample};
pub use train::{spline_validation_l1, train, train_with_progress, EpochRecord, LossHistory, TrainHyper, TrainingData};

use crate::nn::{checkpoint_load, checkpoint_save, ConvLayer, Network, Tensor4};
use crate::numerics::{rng_stream, spline_interpolate_2d, ComplexGrid, SparseGrid};
use crate::{Error, Result, C64};

/// (in, out, kh, kw) of every layer.
pub const TABLE_I: [(usize, usize, usize, usize); 4] = [(1, 64, 16, 4), (64, 32, 16, 4), (32, 21, 17, 5), (21, 1, 20, 8)];

pub const TABLE_I_PARAMS: usize = 195_766;

/// Provenance of a trained estimator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingMeta {
    pub sigma_train_deg: f64,
    pub doppler_hz: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorNetwork {
    pub net: Network<f32>,
    /// Grid size the network is used at.
    pub nc: usize,
    pub ns: usize,
    pub trained: bool,
    pub meta: TrainingMeta,
}

/// Fresh Table I network with fan-in initialisation.
pub fn build_network(seed: u64) -> EstimatorNetwork {
    build_network_with(&TABLE_I, 72, 14, seed).expect("Table I chain is consistent")
}

/// Same construction for an arbitrary layer list.
pub fn build_network_with(
    layers: &[(usize, usize, usize, usize)],
    nc: usize,
    ns: usize,
    seed: u64,
) -> Result<EstimatorNetwork> {
    let mut rng = rng_stream(seed, 0);
    let layers = layers
        .iter()
        .map(|&(i, o, kh, kw)| ConvLayer::init(i, o, kh, kw, &mut rng))
        .collect();
    Ok(EstimatorNetwork {
        net: Network::new(layers)?,
        nc,
        ns,
        trained: false,
        meta: TrainingMeta::default(),
    })
}

impl EstimatorNetwork {
    pub fn is_table_i(&self) -> bool {
        self.net.layers().len() == TABLE_I.len()
            && self
                .net
                .layers()
                .iter()
                .zip(TABLE_I)
                .all(|(l, d)| (l.in_channels, l.out_channels, l.kh, l.kw) == d)
    }

    pub fn to_checkpoint(&self) -> Vec<u8> {
        checkpoint_save(&self.net)
    }

    /// Loads Table I weights; any other architecture is rejected.
    pub fn from_checkpoint(bytes: &[u8], nc: usize, ns: usize) -> Result<Self> {
        let net = checkpoint_load(bytes)?;
        let est = EstimatorNetwork {
            net,
            nc,
            ns,
            trained: true,
            meta: TrainingMeta::default(),
        };
        if !est.is_table_i() {
            return Err(Error::CorruptCheckpoint("layer dimensions differ from the estimator architecture".into()));
        }
        Ok(est)
    }

    /// Runs planes laid out as (batch, 1, nc, ns) through the network.
    pub fn forward_planes(&self, planes: &Tensor4<f32>) -> Result<Tensor4<f32>> {
        self.net.forward(planes)
    }
}

/// Real and imaginary planes of a grid as a (2, 1, nc, ns) tensor.
pub(crate) fn grid_to_planes(g: &ComplexGrid) -> Tensor4<f32> {
    let (nc, ns) = g.dims();
    let mut t = Tensor4::zeros([2, 1, nc, ns]);
    for i in 0..ns {
        for k in 0..nc {
            let z = g.get(k, i);
            t.item_mut(0)[k * ns + i] = z.re as f32;
            t.item_mut(1)[k * ns + i] = z.im as f32;
        }
    }
    t
}

pub(crate) fn planes_to_grid(t: &Tensor4<f32>, nc: usize, ns: usize) -> ComplexGrid {
    ComplexGrid::from_fn(nc, ns, |k, i| {
        C64::new(t.item(0)[k * ns + i] as f64, t.item(1)[k * ns + i] as f64)
    })
}

/// Anything that turns sparse pilot estimates into a dense channel grid.
pub trait ChannelEstimator {
    fn estimate(&self, sparse: &SparseGrid) -> Result<ComplexGrid>;
}

impl ChannelEstimator for EstimatorNetwork {
    fn estimate(&self, sparse: &SparseGrid) -> Result<ComplexGrid> {
        estimate(self, sparse)
    }
}

/// Separable cubic-spline interpolation of the pilot estimates.
#[derive(Debug, Clone, Copy, Default)]
pub struct SplineEstimator;

impl ChannelEstimator for SplineEstimator {
    fn estimate(&self, sparse: &SparseGrid) -> Result<ComplexGrid> {
        Ok(spline_interpolate_2d(sparse)?.grid)
    }
}

/// Returns a fixed grid regardless of the pilots (perfect-CSI oracle).
#[derive(Debug, Clone)]
pub struct FixedEstimate(pub ComplexGrid);

impl ChannelEstimator for FixedEstimate {
    fn estimate(&self, sparse: &SparseGrid) -> Result<ComplexGrid> {
        if sparse.dims() != self.0.dims() {
            return Err(Error::invalid("fixed estimate does not match the grid"));
        }
        Ok(self.0.clone())
    }
}

/// Dense channel estimate from sparse pilot estimates.
pub fn estimate(network: &EstimatorNetwork, sparse: &SparseGrid) -> Result<ComplexGrid> {
    let (nc, ns) = sparse.dims();
    if (nc, ns) != (network.nc, network.ns) {
        return Err(Error::invalid(format!(
            "grid {nc}x{ns} does not match the network's {}x{}",
            network.nc, network.ns
        )));
    }
    let out = network.forward_planes(&grid_to_planes(sparse.grid()))?;
    Ok(planes_to_grid(&out, nc, ns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_i_layers_and_count() {
        let est = build_network(1);
        let dims: Vec<_> = est.net.layers().iter().map(|l| (l.in_channels, l.out_channels, l.kh, l.kw)).collect();
        assert_eq!(dims, TABLE_I.to_vec());
        let by_hand = 64 * 64 + 64 + 32 * 64 * 64 + 32 + 21 * 32 * 85 + 21 + 21 * 160 + 1;
        assert_eq!(by_hand, TABLE_I_PARAMS);
        assert_eq!(est.net.param_count(), TABLE_I_PARAMS);
    }

    #[test]
    fn forward_keeps_grid_shape() {
        let est = build_network(2);
        let x = Tensor4::zeros([1, 1, 72, 14]);
        let h = est.net.layers()[0].clone();
        assert_eq!(crate::nn::conv2d_forward(&x, &h).unwrap().shape(), [1, 64, 72, 14]);
        assert_eq!(est.forward_planes(&x).unwrap().shape(), [1, 1, 72, 14]);
    }

    #[test]
    fn estimate_is_deterministic_and_shaped() {
        let est = build_network(3);
        let g = ComplexGrid::from_fn(72, 14, |k, i| C64::new(k as f64 * 0.01, i as f64 * 0.1));
        let mask = vec![(0, 0), (6, 0), (3, 4)];
        let sparse = SparseGrid::new(g, mask).unwrap();
        let a = estimate(&est, &sparse).unwrap();
        assert_eq!(a.dims(), (72, 14));
        assert_eq!(a, estimate(&est, &sparse).unwrap());
    }

    #[test]
    fn wrong_dims_are_rejected() {
        let est = build_network(4);
        let sparse = SparseGrid::new(ComplexGrid::zeros(36, 14), vec![(0, 0)]).unwrap();
        assert!(estimate(&est, &sparse).is_err());
    }

    #[test]
    fn plane_layout_round_trips() {
        let g = ComplexGrid::from_fn(5, 3, |k, i| C64::new(k as f64, -(i as f64)));
        assert_eq!(planes_to_grid(&grid_to_planes(&g), 5, 3), g);
    }

    #[test]
    fn checkpoint_round_trip_verifies_architecture() {
        let est = build_network(5);
        let bytes = est.to_checkpoint();
        let back = EstimatorNetwork::from_checkpoint(&bytes, 72, 14).unwrap();
        assert_eq!(back.net, est.net);
        let small = build_network_with(&[(1, 2, 3, 3), (2, 1, 3, 3)], 8, 4, 0).unwrap();
        assert!(matches!(
            EstimatorNetwork::from_checkpoint(&small.to_checkpoint(), 8, 4),
            Err(Error::CorruptCheckpoint(_))
        ));
    }
}
