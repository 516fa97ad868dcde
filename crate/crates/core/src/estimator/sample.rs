use std::f64::consts::PI;

use crate::channel::ChannelRealization;
use crate::numerics::{complex_normal, rng_stream, standard_normal, ComplexGrid};
use crate::ofdm::{assemble_subframe, ls_pilot_estimates, random_bits, rx_chain, tx_chain, FrameConfig, PilotPattern};
use crate::phase_noise::gen_gaussian_pn;
use crate::{Error, Result, C64};

/// One real-valued plane pair: network input and its regression target,
/// both nc×ns in row-major (subcarrier, symbol) order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub input: Vec<f32>,
    pub target: Vec<f32>,
    pub pilot_snr_db: f64,
    pub sigma_train_deg: f64,
}

fn split_planes(
    input: &ComplexGrid,
    target: &ComplexGrid,
    pilot_snr_db: f64,
    sigma_train_deg: f64,
) -> [TrainingSample; 2] {
    let (nc, ns) = input.dims();
    let plane = |g: &ComplexGrid, f: fn(C64) -> f64| -> Vec<f32> {
        (0..nc * ns).map(|j| f(g.get(j / ns, j % ns)) as f32).collect()
    };
    let re = |z: C64| z.re;
    let im = |z: C64| z.im;
    [
        TrainingSample {
            input: plane(input, re),
            target: plane(target, re),
            pilot_snr_db,
            sigma_train_deg,
        },
        TrainingSample {
            input: plane(input, im),
            target: plane(target, im),
            pilot_snr_db,
            sigma_train_deg,
        },
    ]
}

/// Pilot-only input built by rotating the true response at each pilot by a
/// random phase and adding estimation noise of variance `1/a_p²`.
///
/// An infinite `pilot_snr_db` gives noiseless pilots.
pub fn make_training_sample(
    h_act: &ComplexGrid,
    pattern: &PilotPattern,
    sigma_train_deg: f64,
    pilot_snr_db: f64,
    seed: u64,
) -> Result<[TrainingSample; 2]> {
    if h_act.dims() != (pattern.nc, pattern.ns) {
        return Err(Error::invalid("channel grid does not match pilot pattern"));
    }
    if !(sigma_train_deg >= 0.0) {
        return Err(Error::invalid("phase spread must be non-negative"));
    }
    let mut rng = rng_stream(seed, 0);
    let noise_var = 10f64.powf(-pilot_snr_db / 10.0);
    let sigma = sigma_train_deg * PI / 180.0;
    let mut input = ComplexGrid::zeros(pattern.nc, pattern.ns);
    for &(k, i) in pattern.positions() {
        let phi = sigma * standard_normal(&mut rng);
        let n = complex_normal(&mut rng, 1.0);
        input.set(k, i, h_act.get(k, i) * C64::from_polar(1.0, phi) + n * noise_var.sqrt());
    }
    Ok(split_planes(&input, h_act, pilot_snr_db, sigma_train_deg))
}

/// Input from LS estimates of a full simulated receiver with Gaussian phase
/// noise of spread `sigma_train_deg`.
pub fn make_full_chain_sample(
    chan: &ChannelRealization,
    config: &FrameConfig,
    sigma_train_deg: f64,
    seed: u64,
) -> Result<[TrainingSample; 2]> {
    let bits = random_bits(config.data_bit_count(), seed, 1);
    let sub = assemble_subframe(&bits, config, seed)?;
    let pn = gen_gaussian_pn(sigma_train_deg, config.samples_per_subframe(), seed ^ 0x5eed)?;
    let y = rx_chain(&tx_chain(&sub, config), chan, &pn, Some(seed.wrapping_add(1)), config)?;
    let ls = ls_pilot_estimates(&y, &sub)?;
    Ok(split_planes(ls.grid(), &chan.freq_response, config.pilot_snr_db, sigma_train_deg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel, ChannelSpec, PowerDelayProfile};
    use crate::ofdm::{build_pilot_pattern, DataSnr, Modulation};

    fn channel(seed: u64) -> ChannelRealization {
        let spec = ChannelSpec::new(&PowerDelayProfile::vehicular_a(), 97.0, 72, 14, 16, 1.6e6).unwrap();
        generate_channel(&spec, seed).unwrap()
    }

    #[test]
    fn clean_sample_copies_channel_on_mask() {
        let pat = build_pilot_pattern(72, 14, 6, 7).unwrap();
        let h = channel(1).freq_response;
        let [re, im] = make_training_sample(&h, &pat, 0.0, f64::INFINITY, 3).unwrap();
        for k in 0..72 {
            for i in 0..14 {
                let j = k * 14 + i;
                if pat.contains(k, i) {
                    assert_eq!(re.input[j], h.get(k, i).re as f32);
                    assert_eq!(im.input[j], h.get(k, i).im as f32);
                } else {
                    assert_eq!((re.input[j], im.input[j]), (0.0, 0.0));
                }
                assert_eq!(re.target[j], h.get(k, i).re as f32);
                assert_eq!(im.target[j], h.get(k, i).im as f32);
            }
        }
    }

    #[test]
    fn noisy_sample_is_zero_off_mask() {
        let pat = build_pilot_pattern(72, 14, 6, 7).unwrap();
        let h = channel(2).freq_response;
        let [re, im] = make_training_sample(&h, &pat, 5.0, 3.0, 4).unwrap();
        for j in 0..72 * 14 {
            if !pat.contains(j / 14, j % 14) {
                assert_eq!((re.input[j], im.input[j]), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn phase_spread_matches_request() {
        let pat = build_pilot_pattern(72, 14, 6, 7).unwrap();
        let h = ComplexGrid::from_fn(72, 14, |_, _| C64::new(1.0, 0.0));
        let mut acc = 0.0;
        let mut n = 0usize;
        let mut seed = 0;
        while n < 100_000 {
            let [re, im] = make_training_sample(&h, &pat, 1.58, f64::INFINITY, seed).unwrap();
            for &(k, i) in pat.positions() {
                let j = k * 14 + i;
                let phi = (im.input[j] as f64).atan2(re.input[j] as f64);
                acc += phi * phi;
                n += 1;
            }
            seed += 1;
        }
        let std_deg = (acc / n as f64).sqrt() * 180.0 / PI;
        assert!((std_deg / 1.58 - 1.0).abs() < 0.02, "{std_deg}");
    }

    #[test]
    fn full_chain_sample_without_impairments_is_exact() {
        let pat = build_pilot_pattern(72, 14, 6, 7).unwrap();
        let cfg = FrameConfig {
            nc: 72,
            ns: 14,
            n_cp: 16,
            modulation: Modulation::Qam4,
            pattern: pat.clone(),
            pilot_snr_db: 60.0,
            data_snr: DataSnr::EbN0(10.0),
        };
        let chan = channel(5);
        let [re, _] = make_full_chain_sample(&chan, &cfg, 0.0, 9).unwrap();
        for &(k, i) in pat.positions() {
            assert!((re.input[k * 14 + i] as f64 - chan.freq_response.get(k, i).re).abs() < 1e-2);
        }
    }
}
