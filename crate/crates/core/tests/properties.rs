use proptest::prelude::*;

use ofdmlab::channel::{generate_channel, ChannelSpec, PowerDelayProfile};
use ofdmlab::harness::{decode_records, encode_records, generate_realizations, ConfigMap, ExperimentConfig};
use ofdmlab::nn::{checkpoint_load, checkpoint_save, l1_loss, ConvLayer, Network, Tensor4};
use ofdmlab::numerics::{circular_convolve, dft, rng_stream, ComplexGrid};
use ofdmlab::ofdm::{qam_demap, qam_map, Modulation};
use ofdmlab::pncomp::{compensate, estimate_pn_samples, predict_time_reference, PnGrid};
use ofdmlab::C64;

fn cvec(max: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0).prop_map(|(a, b)| C64::new(a, b)), 1..max)
}

fn energy(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dft_is_unitary(v in cvec(200)) {
        let f = dft(&v, false).unwrap();
        prop_assert!((energy(&f) - energy(&v)).abs() <= 1e-9 * energy(&v).max(1.0));
        let back = dft(&f, true).unwrap();
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn circular_convolution_diagonalises(seed in any::<u64>(), n in 2usize..96) {
        let mut rng = rng_stream(seed, 0);
        let a: Vec<C64> = (0..n).map(|_| ofdmlab::numerics::complex_normal(&mut rng, 1.0)).collect();
        let b: Vec<C64> = (0..n).map(|_| ofdmlab::numerics::complex_normal(&mut rng, 1.0)).collect();
        let c = dft(&circular_convolve(&a, &b).unwrap(), false).unwrap();
        let (fa, fb) = (dft(&a, false).unwrap(), dft(&b, false).unwrap());
        let s = (n as f64).sqrt();
        for k in 0..n {
            prop_assert!((c[k] - fa[k] * fb[k] * s).norm() < 1e-9);
        }
    }

    #[test]
    fn qam_round_trip(bits in prop::collection::vec(0u8..2, 0..60), m in prop::sample::select(vec![4usize, 16])) {
        let modulation = Modulation::from_order(m).unwrap();
        let k = modulation.bits_per_symbol();
        let bits = &bits[..bits.len() / k * k];
        let syms = qam_map(bits, modulation).unwrap();
        prop_assert_eq!(qam_demap(&syms, modulation), bits.to_vec());
        if !syms.is_empty() {
            prop_assert!(syms.iter().all(|s| s.norm() < 1.6));
        }
    }

    #[test]
    fn compensation_preserves_magnitude(seed in any::<u64>(), scale in 0.0f64..4.0) {
        let mut rng = rng_stream(seed, 1);
        let (nc, ns) = (16usize, 3usize);
        let y: Vec<Vec<C64>> = (0..ns)
            .map(|_| (0..nc).map(|_| ofdmlab::numerics::complex_normal(&mut rng, 1.0)).collect())
            .collect();
        let phases: Vec<f64> = (0..nc * ns).map(|i| scale * ((i * 7919) % 97) as f64 / 97.0).collect();
        let seq: Vec<f64> = (0..ns).flat_map(|i| {
            let mut v = vec![0.0; 4];
            v.extend_from_slice(&phases[i * nc..(i + 1) * nc]);
            v
        }).collect();
        let grid = PnGrid::from_sequence(&seq, nc, ns, 4).unwrap();
        let (comp, _) = compensate(&y, &grid).unwrap();
        for (a, b) in comp.iter().flatten().zip(y.iter().flatten()) {
            prop_assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        let (same, _) = compensate(&y, &PnGrid::zeros(nc, ns)).unwrap();
        prop_assert_eq!(same, y);
    }

    #[test]
    fn pn_estimates_are_scale_invariant_in_reference(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = rng_stream(seed, 2);
        let s: Vec<C64> = (0..32).map(|_| ofdmlab::numerics::complex_normal(&mut rng, 1.0)).collect();
        let y: Vec<C64> = (0..32).map(|_| ofdmlab::numerics::complex_normal(&mut rng, 1.0)).collect();
        let scaled: Vec<C64> = s.iter().map(|z| z * c).collect();
        let j: Vec<usize> = (0..32).step_by(3).collect();
        let a = estimate_pn_samples(&y, &s, &j, 0).unwrap();
        let b = estimate_pn_samples(&y, &scaled, &j, 0).unwrap();
        prop_assert_eq!(a.entries.len(), b.entries.len());
        for (p, q) in a.entries.iter().zip(&b.entries) {
            prop_assert!((p.psi - q.psi).norm() < 1e-12);
            prop_assert!((p.psi.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_model_recovers_phases(seed in any::<u64>()) {
        let spec = ChannelSpec::new(&PowerDelayProfile::vehicular_a(), 97.0, 72, 1, 16, 1.6e6).unwrap();
        let ch = generate_channel(&spec, seed).unwrap();
        let mut rng = rng_stream(seed, 3);
        let x: Vec<C64> = (0..72).map(|_| ofdmlab::numerics::complex_normal(&mut rng, 1.0)).collect();
        let s = predict_time_reference(ch.freq_response.column(0), &x).unwrap();
        let phi: Vec<f64> = (0..72).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
        let y: Vec<C64> = s.iter().zip(&phi).map(|(v, p)| v * C64::from_polar(1.0, *p)).collect();
        let j: Vec<usize> = (0..72).collect();
        let est = estimate_pn_samples(&y, &s, &j, 0).unwrap();
        for e in &est.entries {
            prop_assert!((e.psi - C64::from_polar(1.0, phi[e.sample])).norm() < 1e-9);
        }
    }

    #[test]
    fn l1_loss_is_a_metric(a in prop::collection::vec(-5.0f32..5.0, 12), b in prop::collection::vec(-5.0f32..5.0, 12)) {
        let ta = Tensor4::from_vec([2, 1, 3, 2], a).unwrap();
        let tb = Tensor4::from_vec([2, 1, 3, 2], b).unwrap();
        let (ab, _) = l1_loss(&ta, &tb).unwrap();
        let (ba, _) = l1_loss(&tb, &ta).unwrap();
        let (aa, _) = l1_loss(&ta, &ta).unwrap();
        prop_assert!(ab >= 0.0 && aa == 0.0);
        prop_assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), c1 in 1usize..5, k in 1usize..5) {
        let mut rng = rng_stream(seed, 4);
        let net = Network::<f32>::new(vec![
            ConvLayer::init(1, c1, k, k + 1, &mut rng),
            ConvLayer::init(c1, 1, k + 1, k, &mut rng),
        ]).unwrap();
        let bytes = checkpoint_save(&net);
        let back: Network<f32> = checkpoint_load(&bytes).unwrap();
        prop_assert_eq!(checkpoint_save(&back), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dataset_records_round_trip(seed in any::<u64>(), count in 0usize..4) {
        let cfg = ExperimentConfig::parse("experiment=p\n").unwrap();
        let recs = generate_realizations(&cfg.channel_spec().unwrap(), count, seed).unwrap();
        prop_assert_eq!(decode_records(&encode_records(&recs)).unwrap(), recs);
    }

    #[test]
    fn overrides_win_and_hash_tracks_values(epochs in 1usize..100_000) {
        let mut map = ConfigMap::parse("experiment=p\nepochs=5\n").unwrap();
        map.set("epochs", &epochs.to_string()).unwrap();
        let cfg = ExperimentConfig::from_map(&map).unwrap();
        prop_assert_eq!(cfg.training.epochs, epochs);
        let again = ExperimentConfig::from_map(&map).unwrap();
        prop_assert_eq!(cfg.hash(), again.hash());
        prop_assert_eq!(cfg.hash() == ExperimentConfig::parse("experiment=p\nepochs=5\n").unwrap().hash(), epochs == 5);
    }

    #[test]
    fn frequency_response_energy_matches_taps(seed in any::<u64>()) {
        let spec = ChannelSpec::new(&PowerDelayProfile::vehicular_a(), 97.0, 72, 14, 16, 1.6e6).unwrap();
        let ch = generate_channel(&spec, seed).unwrap();
        let g: &ComplexGrid = &ch.freq_response;
        prop_assert!(g.is_finite());
        // per symbol, mean |H_k|² equals the total tap energy
        for i in 0..14 {
            let taps: f64 = ch.taps.column(i).iter().map(|z| z.norm_sqr()).sum();
            let freq: f64 = g.column(i).iter().map(|z| z.norm_sqr()).sum::<f64>() / 72.0;
            prop_assert!((taps - freq).abs() < 1e-9 * taps.max(1e-12));
        }
    }
}
