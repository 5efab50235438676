//! Statistical invariants of channel generation, topology and training.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fdmimo::channel::realize_channels;
use fdmimo::config::{Link, SystemConfig};
use fdmimo::estimation::{estimate_channels, EstimateStatistics};
use fdmimo::experiments::{ratio_of_means, sweep_drops};
use fdmimo::profile::LargeScaleProfile;
use fdmimo::scenario::ScenarioParams;
use fdmimo::topology::{build_topology, in_hexagon, sample_hexagon};

fn two_cell() -> (LargeScaleProfile, SystemConfig) {
    let cfg = SystemConfig::new(2, 1, 1, 1, 1).with_powers(1.0, 1.0, 3.0).with_noise(0.5);
    let p = LargeScaleProfile::from_fn(
        &cfg,
        |j, l, n| if j == l { 1.0 - 0.3 * n as f64 } else { 0.2 + 0.1 * n as f64 },
        |j, l, k| if j == l { 0.8 - 0.2 * k as f64 } else { 0.15 },
        |j, l| if j == l { 2.0 } else { 0.05 },
        |l, k, j, n| 0.01 + 0.02 * (l + k + j + n) as f64,
    );
    (p, cfg)
}

#[test]
fn channel_entry_variances_match_gains() {
    let (p, cfg) = two_cell();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 100_000;
    let (l_n, k_u, k_d) = (cfg.cells, cfg.k_u(), cfg.k_d());
    let mut su = vec![0.0; l_n * l_n * k_u];
    let mut sd = vec![0.0; l_n * l_n * k_d];
    for _ in 0..draws {
        let r = realize_channels(&p, 1, &mut rng);
        for j in 0..l_n {
            for l in 0..l_n {
                for n in 0..k_u {
                    su[(j * l_n + l) * k_u + n] += r.g_u(j, l)[(0, n)].norm_sqr();
                }
                for k in 0..k_d {
                    sd[(j * l_n + l) * k_d + k] += r.g_d(j, l)[(0, k)].norm_sqr();
                }
            }
        }
    }
    for j in 0..l_n {
        for l in 0..l_n {
            for n in 0..k_u {
                let v = su[(j * l_n + l) * k_u + n] / draws as f64;
                let b = p.beta_u(j, l, n);
                assert!((v - b).abs() <= 0.02 * b, "G_u[{j}][{l}] col {n}: {v} vs {b}");
            }
            for k in 0..k_d {
                let v = sd[(j * l_n + l) * k_d + k] / draws as f64;
                let b = p.beta_d(j, l, k);
                assert!((v - b).abs() <= 0.02 * b, "G_d[{j}][{l}] col {k}: {v} vs {b}");
            }
        }
    }
}

#[test]
fn estimate_variances_match_mmse_statistics() {
    let (p, cfg) = two_cell();
    let stats = EstimateStatistics::new(&p, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let draws = 100_000;
    let mut s = [[0.0; 2]; 2];
    for _ in 0..draws {
        let r = realize_channels(&p, 1, &mut rng);
        let e = estimate_channels(&r, &p, &cfg, &mut rng).unwrap();
        for (slot, link) in [Link::Uplink, Link::Downlink].into_iter().enumerate() {
            for (k, acc) in s[slot].iter_mut().enumerate() {
                *acc += e.g_hat(link, 1)[(0, k)].norm_sqr();
            }
        }
    }
    for (slot, link) in [Link::Uplink, Link::Downlink].into_iter().enumerate() {
        for (k, sum) in s[slot].iter().enumerate() {
            let v = sum / draws as f64;
            let want = stats.get(link, 1, k).est_var;
            assert!((v - want).abs() <= 0.02 * want, "{link} user {k}: {v} vs {want}");
        }
    }
}

/// 12 equal-area regions: six 60-degree sectors, each split at the radius
/// scale 1/sqrt(2) into an inner and outer half.
fn region(p: [f64; 2], r: f64) -> usize {
    let sector = ((p[1].atan2(p[0]) + std::f64::consts::PI) / (std::f64::consts::PI / 3.0)).floor() as usize % 6;
    let inner = in_hexagon([p[0] * 2f64.sqrt(), p[1] * 2f64.sqrt()], r);
    sector * 2 + usize::from(inner)
}

#[test]
fn hexagon_sampling_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 120_000;
    let r = 300.0;
    let mut counts = [0usize; 12];
    for _ in 0..n {
        let p = sample_hexagon(&mut rng, r);
        assert!(in_hexagon(p, r));
        counts[region(p, r)] += 1;
    }
    let expected = n as f64 / 12.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of chi-square with 11 degrees of freedom
    assert!(chi2 < 24.725, "chi-square {chi2}, counts {counts:?}");
}

#[test]
fn confidence_intervals_shrink_with_more_drops() {
    let params = ScenarioParams {
        n_bs: 3,
        n_ul_hd: 1,
        n_dl_hd: 1,
        ..ScenarioParams::default()
    };
    let points = [(4, -60.0)];
    let few = sweep_drops(&params, &points, 10, 3, 20).unwrap();
    let many = sweep_drops(&params, &points, 100, 3, 20).unwrap();
    for link in [Link::Uplink, Link::Downlink] {
        let a = ratio_of_means(&few[0], link).half_width.unwrap();
        let b = ratio_of_means(&many[0], link).half_width.unwrap();
        assert!(b < a, "{link}: {b} (100 drops) vs {a} (10 drops)");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn topologies_satisfy_constraints_or_fail(
        n_bs in 1usize..8,
        radius in 30.0..400.0f64,
        ue_radius in 5.0..60.0f64,
        min_bs in 0.0..80.0f64,
        seed in any::<u64>(),
    ) {
        let params = ScenarioParams {
            n_bs,
            hex_radius_m: radius,
            ue_drop_radius_m: ue_radius,
            min_dist_bs_bs_m: min_bs,
            n_ul_hd: 2,
            n_dl_hd: 2,
            placement_retry_budget: 2000,
            ..ScenarioParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Ok(t) = build_topology(&params, &mut rng) {
            prop_assert!(t.satisfies(&params));
        }
    }
}
