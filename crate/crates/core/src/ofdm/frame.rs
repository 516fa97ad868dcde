use rand::Rng;

use super::{qam_map, Modulation, PilotPattern};
use crate::numerics::{rng_stream, ComplexGrid};
use crate::{Error, Result, C64};

/// RNG stream reserved for pilot symbols.
const PILOT_STREAM: u64 = 0x9170;

/// Data power, either per information bit or per QAM symbol, in dB over
/// the unit noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataSnr {
    EbN0(f64),
    EsN0(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub nc: usize,
    pub ns: usize,
    pub n_cp: usize,
    pub modulation: Modulation,
    pub pattern: PilotPattern,
    pub pilot_snr_db: f64,
    pub data_snr: DataSnr,
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nc == 0 || self.ns == 0 {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        if self.pattern.nc != self.nc || self.pattern.ns != self.ns {
            return Err(Error::invalid("pilot pattern does not match grid"));
        }
        Ok(())
    }

    /// Pilot amplitude `√(10^{pilotSNR/10})` (noise variance is 1).
    pub fn pilot_amplitude(&self) -> f64 {
        10f64.powf(self.pilot_snr_db / 20.0)
    }

    /// Data amplitude; for Eb/N0 it is `√(log2 M · 10^{Eb/N0 / 10})`.
    pub fn data_amplitude(&self) -> f64 {
        match self.data_snr {
            DataSnr::EbN0(db) => {
                (self.modulation.bits_per_symbol() as f64 * 10f64.powf(db / 10.0)).sqrt()
            }
            DataSnr::EsN0(db) => 10f64.powf(db / 20.0),
        }
    }

    pub fn data_bit_count(&self) -> usize {
        (self.nc * self.ns - self.pattern.np()) * self.modulation.bits_per_symbol()
    }

    pub fn samples_per_subframe(&self) -> usize {
        (self.nc + self.n_cp) * self.ns
    }
}

/// One transmitted subframe in the frequency domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Subframe {
    pub x_f: ComplexGrid,
    pub data_bits: Vec<u8>,
    /// Unit-modulus pilot symbols, in pattern order.
    pub pilot_values: Vec<C64>,
    pub pilot_amplitude: f64,
    pub data_amplitude: f64,
    /// Unit-power QAM symbols, in data-position order.
    pub data_symbols: Vec<C64>,
    pub data_positions: Vec<(usize, usize)>,
    pub pattern: PilotPattern,
    pub modulation: Modulation,
}

impl Subframe {
    /// Scaled pilot symbol at pattern index `p`.
    pub fn pilot_tx(&self, p: usize) -> C64 {
        self.pilot_values[p] * self.pilot_amplitude
    }
}

pub fn random_bits(n: usize, seed: u64, stream: u64) -> Vec<u8> {
    let mut rng = rng_stream(seed, stream);
    (0..n).map(|_| rng.random::<bool>() as u8).collect()
}

/// Places seeded QPSK pilots and QAM data on the grid.
pub fn assemble_subframe(bits: &[u8], config: &FrameConfig, seed: u64) -> Result<Subframe> {
    config.validate()?;
    let pattern = &config.pattern;
    if bits.len() != config.data_bit_count() {
        return Err(Error::invalid(format!(
            "expected {} data bits, got {}",
            config.data_bit_count(),
            bits.len()
        )));
    }
    let data_symbols = qam_map(bits, config.modulation)?;
    let mut rng = rng_stream(seed, PILOT_STREAM);
    let pilot_values: Vec<C64> = (0..pattern.np())
        .map(|_| {
            let q = rng.random_range(0..4u32) as f64;
            C64::from_polar(1.0, std::f64::consts::FRAC_PI_4 * (2.0 * q + 1.0))
        })
        .collect();
    let (ap, ad) = (config.pilot_amplitude(), config.data_amplitude());
    let mut x_f = ComplexGrid::zeros(config.nc, config.ns);
    for (&(k, i), &v) in pattern.positions().iter().zip(&pilot_values) {
        x_f.set(k, i, v * ap);
    }
    let data_positions = pattern.data_positions();
    for (&(k, i), &s) in data_positions.iter().zip(&data_symbols) {
        x_f.set(k, i, s * ad);
    }
    Ok(Subframe {
        x_f,
        data_bits: bits.to_vec(),
        pilot_values,
        pilot_amplitude: ap,
        data_amplitude: ad,
        data_symbols,
        data_positions,
        pattern: pattern.clone(),
        modulation: config.modulation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::build_pilot_pattern;

    pub(crate) fn config(pilot_db: f64, data: DataSnr) -> FrameConfig {
        FrameConfig {
            nc: 72,
            ns: 14,
            n_cp: 16,
            modulation: Modulation::Qam4,
            pattern: build_pilot_pattern(72, 14, 6, 7).unwrap(),
            pilot_snr_db: pilot_db,
            data_snr: data,
        }
    }

    #[test]
    fn pilots_land_on_pattern() {
        let cfg = config(20.0, DataSnr::EbN0(10.0));
        let bits = random_bits(cfg.data_bit_count(), 1, 0);
        let sub = assemble_subframe(&bits, &cfg, 9).unwrap();
        for (p, &(k, i)) in cfg.pattern.positions().iter().enumerate() {
            assert_eq!(sub.x_f.get(k, i), sub.pilot_tx(p));
            assert!((sub.pilot_values[p].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_snr_gives_equal_magnitudes() {
        let cfg = config(17.0, DataSnr::EsN0(17.0));
        let bits = random_bits(cfg.data_bit_count(), 2, 0);
        let sub = assemble_subframe(&bits, &cfg, 3).unwrap();
        let m = sub.x_f.get(0, 0).norm();
        for z in sub.x_f.as_slice() {
            assert!((z.norm() - m).abs() < 1e-12);
        }
    }

    #[test]
    fn ebn0_amplitude_counts_bits_per_symbol() {
        let cfg = config(0.0, DataSnr::EbN0(30.0));
        assert!((cfg.data_amplitude().powi(2) - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn all_pilot_grid() {
        let positions: Vec<_> = (0..2).flat_map(|i| (0..4).map(move |k| (k, i))).collect();
        let pattern = PilotPattern::from_positions(4, 2, positions).unwrap();
        let cfg = FrameConfig {
            nc: 4,
            ns: 2,
            n_cp: 1,
            modulation: Modulation::Qam4,
            pattern,
            pilot_snr_db: 0.0,
            data_snr: DataSnr::EsN0(0.0),
        };
        let sub = assemble_subframe(&[], &cfg, 1).unwrap();
        assert!(sub.data_positions.is_empty());
        assert!(sub.x_f.as_slice().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn wrong_bit_count_is_rejected() {
        let cfg = config(10.0, DataSnr::EbN0(10.0));
        assert!(assemble_subframe(&[0, 1], &cfg, 0).is_err());
    }
}
