use nalgebra::DMatrix;
use proptest::prelude::*;
use quadrl::mlp::Mlp;
use quadrl::policy::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain-loop forward pass written against the row-major layout.
fn reference_forward(mlp: &Mlp, obs: &[f64]) -> Vec<f64> {
    let sizes = mlp.sizes().to_vec();
    let mut x = obs.to_vec();
    for l in 0..mlp.num_layers() {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let (w, b) = (mlp.weights(l), mlp.bias(l));
        let mut y = vec![0.0; n_out];
        for o in 0..n_out {
            let mut acc = b[o];
            for i in 0..n_in {
                acc += w[o * n_in + i] * x[i];
            }
            y[o] = if l + 1 < mlp.num_layers() { acc.tanh() } else { acc };
        }
        x = y;
    }
    x
}

fn random_net(seed: u64, scale: f64) -> PolicyNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = PolicyNet::init(&mut rng);
    for p in net.mlp.params_mut() {
        *p = rng.random_range(-scale..scale);
    }
    net.log_std = (0..4).map(|_| rng.random_range(-2.0..0.5)).collect();
    net
}

fn random_obs(rng: &mut impl Rng, scale: f64) -> Vec<f64> {
    (0..18).map(|_| rng.random_range(-scale..scale)).collect()
}

fn spectral_norm(mlp: &Mlp, l: usize) -> f64 {
    let (n_in, n_out) = (mlp.sizes()[l], mlp.sizes()[l + 1]);
    DMatrix::from_row_slice(n_out, n_in, mlp.weights(l)).singular_values().max()
}

#[test]
fn zero_net_outputs_zero() {
    let net = PolicyNet::zeros();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..10 {
        assert_eq!(net.forward(&random_obs(&mut rng, 5.0)).unwrap(), [0.0; 4]);
    }
}

#[test]
fn wrong_input_length_is_rejected() {
    let net = PolicyNet::zeros();
    assert!(net.forward(&[0.0; 17]).is_err());
    assert!(net.log_prob(&[0.0; 19], &[0.0; 4]).is_err());
}

#[test]
fn degenerate_noise_returns_the_mean() {
    let mut net = random_net(1, 0.3);
    net.log_std = vec![-20.0; 4];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let obs = random_obs(&mut rng, 1.0);
    let mean = net.forward(&obs).unwrap();
    let (a, _) = net.sample_action(&obs, &mut rng).unwrap();
    for j in 0..4 {
        assert!((a[j] - mean[j]).abs() < 1e-7);
    }
}

#[test]
fn unit_noise_statistics() {
    let mut net = random_net(3, 0.3);
    net.log_std = vec![0.0; 4];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let obs = random_obs(&mut rng, 1.0);
    let mean = net.forward(&obs).unwrap();
    let n = 100_000;
    let mut sq = [0.0; 4];
    for _ in 0..n {
        let (a, _) = net.sample_around(&mean, &mut rng);
        for j in 0..4 {
            sq[j] += (a[j] - mean[j]).powi(2);
        }
    }
    for s in sq {
        let sd = (s / n as f64).sqrt();
        assert!((sd - 1.0).abs() < 0.03, "{sd}");
    }
}

#[test]
fn log_prob_at_mode() {
    let net = random_net(5, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let obs = random_obs(&mut rng, 1.0);
    let mean = net.forward(&obs).unwrap();
    let expect = -0.5 * net.log_std.iter().map(|l| 2.0 * l + (2.0 * std::f64::consts::PI).ln()).sum::<f64>();
    assert!((net.log_prob(&obs, &mean).unwrap() - expect).abs() < 1e-12);
}

#[test]
fn sampled_log_prob_matches_density() {
    let net = random_net(7, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let obs = random_obs(&mut rng, 1.0);
    for _ in 0..100 {
        let (a, lp) = net.sample_action(&obs, &mut rng).unwrap();
        assert!((net.log_prob(&obs, &a).unwrap() - lp).abs() < 1e-12);
    }
}

#[test]
fn one_dimensional_density_integrates_to_one() {
    // uniform Monte-Carlo over ±8σ of a single coordinate
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (mean, log_std) in [(0.0, 0.0), (0.4, -1.0), (-1.3, 0.7)] {
        let sigma: f64 = f64::exp(log_std);
        let (lo, hi) = (mean - 8.0 * sigma, mean + 8.0 * sigma);
        let n = 200_000;
        let sum: f64 = (0..n)
            .map(|_| gaussian_log_prob(&[mean], &[log_std], &[rng.random_range(lo..hi)]).exp())
            .sum();
        let integral = sum / n as f64 * (hi - lo);
        assert!((integral - 1.0).abs() < 0.02, "{integral}");
    }
}

#[test]
fn snapshot_round_trip_is_bit_exact() {
    let net = random_net(10, 0.5).quantized();
    let back = PolicyNet::from_snapshot(&net.to_snapshot()).unwrap();
    assert_eq!(back, net);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let obs = random_obs(&mut rng, 3.0);
        let (a, b) = (net.forward(&obs).unwrap(), back.forward(&obs).unwrap());
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }
    assert_eq!(back.to_snapshot(), net.to_snapshot());
}

#[test]
fn snapshot_file_round_trip() {
    let net = random_net(12, 0.5).quantized();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.qrlp");
    net.save(&path).unwrap();
    assert_eq!(PolicyNet::load(&path).unwrap(), net);
}

#[test]
fn corrupted_snapshots_are_rejected() {
    let bytes = random_net(13, 0.5).to_snapshot();
    assert!(PolicyNet::from_snapshot(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(PolicyNet::from_snapshot(&bad).is_err());
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(PolicyNet::from_snapshot(&bad).is_err());
    let mut bad = bytes.clone();
    let n = bad.len();
    bad[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(PolicyNet::from_snapshot(&bad).is_err());
    let mut bad = bytes;
    bad[12..16].copy_from_slice(&17u32.to_le_bytes());
    assert!(PolicyNet::from_snapshot(&bad).is_err());
}

#[test]
fn snapshot_header_layout() {
    let bytes = PolicyNet::zeros().to_snapshot();
    assert_eq!(&bytes[0..4], b"QRLP");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
    let sizes: Vec<u32> = (0..4).map(|i| u32::from_le_bytes(bytes[12 + 4 * i..16 + 4 * i].try_into().unwrap())).collect();
    assert_eq!(sizes, [18, 64, 64, 4]);
    let params = 18 * 64 + 64 + 64 * 64 + 64 + 64 * 4 + 4;
    assert_eq!(bytes.len(), 28 + 4 * (params + 4));
}

#[test]
fn export_is_deterministic() {
    let net = random_net(14, 0.5);
    let a = net.export_c("policy");
    assert_eq!(a, net.export_c("policy"));
    assert!(a.contains("void policy(const float obs[18], float action[4])"));
    assert!(!a.contains("NaN") && !a.contains("inf"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_matches_scalar_reference(seed in any::<u64>(), scale in 0.01..1.0f64) {
        let net = random_net(seed, scale);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..10 {
            let obs = random_obs(&mut rng, 4.0);
            let a = net.forward(&obs).unwrap();
            let r = reference_forward(&net.mlp, &obs);
            for j in 0..4 {
                prop_assert!((a[j] - r[j]).abs() <= 1e-6);
            }
        }
        let batch: Vec<f64> = (0..5).flat_map(|_| random_obs(&mut rng, 4.0)).collect();
        let out = net.forward_batch(&batch, 5);
        for k in 0..5 {
            let r = reference_forward(&net.mlp, &batch[18 * k..18 * (k + 1)]);
            for j in 0..4 {
                prop_assert!((out[4 * k + j] - r[j]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn forward_is_lipschitz(seed in any::<u64>(), scale in 0.01..0.5f64, eps in 1e-6..1.0f64) {
        let net = random_net(seed, scale);
        let bound: f64 = (0..3).map(|l| spectral_norm(&net.mlp, l)).product();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let x = random_obs(&mut rng, 2.0);
        let delta: Vec<f64> = random_obs(&mut rng, eps);
        let y: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let (ax, ay) = (net.forward(&x).unwrap(), net.forward(&y).unwrap());
        let da = ax.iter().zip(&ay).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let dn = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        prop_assert!(da <= bound * dn * (1.0 + 1e-9) + 1e-12);
    }
}
