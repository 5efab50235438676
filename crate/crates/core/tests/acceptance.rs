//! Acceptance criteria 1-9. Runs as a plain binary (no libtest harness) so
//! every criterion prints one PASS/FAIL line; the process fails if any does.

use std::cell::RefCell;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fdmimo::bounds::{
    self, asymptotic_gain, asymptotic_rates, homogeneous_rates, prop1_rates, prop2_rates, wishart_inverse_moments,
    ClosedForms,
};
use fdmimo::channel::{gaussian_matrix, realize_channels};
use fdmimo::config::{HomogeneousConfig, Link, PowerScalingSchedule, ScalingLaw, SystemConfig};
use fdmimo::estimation::{estimate_channels, EstimateStats};
use fdmimo::experiments::{
    self, paired_gain_difference, sweep_drops, tightness, OutputFormat, GAIN_VS_KAPPA_ANTENNAS, GAIN_VS_M_KAPPA_DB,
};
use fdmimo::profile::{expand_homogeneous, LargeScaleProfile};
use fdmimo::rates::{self, Csi, McSettings, Plan, RateReport, System};
use fdmimo::scenario::ScenarioParams;

const LINKS: [Link; 2] = [Link::Uplink, Link::Downlink];

struct Outcome {
    ok: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            ok: true,
            detail: String::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.ok = false;
            if self.detail.len() < 2000 {
                self.detail.push_str(&what());
                self.detail.push_str("; ");
            }
        }
    }

    fn note(&mut self, s: String) {
        if self.ok {
            self.detail = s;
        }
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn rel_gaps(a: &RateReport, b: &RateReport, link: Link) -> f64 {
    a.rates(link)
        .iter()
        .zip(b.rates(link))
        .map(|(x, y)| rel(x.rate, y.rate))
        .fold(0.0, f64::max)
}

fn random_system(rng: &mut ChaCha8Rng, antennas: usize) -> (LargeScaleProfile, SystemConfig) {
    let cells = rng.random_range(1..=3);
    let fd = rng.random_range(0..=2);
    let hd_u = rng.random_range(usize::from(fd == 0)..=2);
    let hd_d = rng.random_range(usize::from(fd == 0)..=2);
    let db = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| 10f64.powf(rng.random_range(lo..hi) / 10.0);
    let mut cfg = SystemConfig::new(cells, antennas, fd, hd_u, hd_d)
        .with_powers(db(rng, 0.0, 20.0), db(rng, 5.0, 25.0), db(rng, 0.0, 20.0))
        .with_kappa(db(rng, -70.0, -30.0))
        .with_noises(db(rng, -3.0, 3.0), db(rng, -3.0, 3.0))
        .with_coherence(200);
    cfg.set_minimal_pilots();
    let rng = RefCell::new(rng);
    let draw = |lo: f64, hi: f64| db(&mut rng.borrow_mut(), lo, hi);
    let p = LargeScaleProfile::from_fn(
        &cfg,
        |j, l, _| if j == l { draw(-6.0, 0.0) } else { draw(-20.0, -5.0) },
        |j, l, _| if j == l { draw(-6.0, 0.0) } else { draw(-20.0, -5.0) },
        |j, l| if j == l { draw(-3.0, 3.0) } else { draw(-30.0, -10.0) },
        |_, _, _, _| draw(-25.0, -5.0),
    );
    p.validate().expect("random profile is valid");
    (p, cfg)
}

fn check_bound(out: &mut Outcome, tag: &str, bound: &RateReport, mc: &RateReport) {
    for link in LINKS {
        for (b, m) in bound.rates(link).iter().zip(mc.rates(link)) {
            assert_eq!((b.cell, b.user), (m.cell, m.user));
            out.check(b.rate <= m.rate + 3.0 * m.stderr, || {
                format!(
                    "{tag} {link} cell {} user {}: bound {:.5} > mc {:.5} + 3*{:.1e}",
                    b.cell, b.user, b.rate, m.rate, m.stderr
                )
            });
        }
    }
}

/// 1. Closed-form bounds never exceed the Monte Carlo ergodic rates.
fn jensen() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0;
    for draw in 0..20 {
        for m in [3, 8, 32, 100] {
            let (p, cfg) = random_system(&mut rng, m);
            let plan = Plan {
                fd_perfect: true,
                tdd_perfect: false,
                fd_imperfect_ul: true,
                fd_imperfect_dl: true,
                tdd_imperfect: false,
            };
            let mc = rates::simulate(&p, &cfg, plan, McSettings::new(10_000, draw * 10 + m as u64)).unwrap();
            let tag = format!("draw {draw} M {m}");
            check_bound(&mut out, &format!("{tag} perfect"), &prop1_rates(&p, &cfg).unwrap(), &mc.fd_perfect.unwrap());
            check_bound(&mut out, &format!("{tag} imperfect"), &prop2_rates(&p, &cfg).unwrap(), &mc.fd_imperfect.unwrap());
            compared += 2 * (cfg.cells * (cfg.k_u() + cfg.k_d()));
        }
    }
    out.note(format!("{compared} per-user comparisons, no violation"));
    out
}

/// 2. Bounds are within 5% of Monte Carlo at M = 300.
fn tightness_at_300() -> Outcome {
    let mut out = Outcome::new();
    let r = tightness(&HomogeneousConfig::benchmark(300), &[300], McSettings::new(5000, 3)).unwrap();
    let mut worst: f64 = 0.0;
    for row in r.rows.iter().filter(|r| r.quantity == "relative_gap") {
        worst = worst.max(row.value);
        out.check(row.value <= 0.05, || format!("{:?} {:?} gap {:.4}", row.csi, row.link, row.value));
    }
    out.check(r.rows.iter().filter(|r| r.quantity == "relative_gap").count() == 4, || "missing rows".into());
    out.note(format!("largest relative gap {worst:.4}"));
    out
}

/// 3. Gains at M = 64 under the perfect-CSI scaling law.
fn gain_at_64() -> Outcome {
    let mut out = Outcome::new();
    let h = HomogeneousConfig::benchmark(64);
    let s = experiments::scaling_schedule(&h, Csi::Perfect);
    let (_, _, gain, ci) = experiments::homogeneous_gain(&h, 64, Csi::Perfect, &s, McSettings::new(10_000, 5)).unwrap();
    out.check((gain.dl - 1.7).abs() <= 0.2, || format!("DL gain {:.3}", gain.dl));
    out.check((gain.ul - 1.3).abs() <= 0.2, || format!("UL gain {:.3}", gain.ul));
    out.note(format!(
        "DL gain {:.3} (+/- {:.3}), UL gain {:.3} (+/- {:.3})",
        gain.dl, ci.dl, gain.ul, ci.ul
    ));
    out
}

/// 4. Closed forms at M = 10^6 against the large-antenna limits.
fn asymptotics() -> Outcome {
    let mut out = Outcome::new();
    let m = 1_000_000;
    let h = HomogeneousConfig::benchmark(64);
    let mut cases = vec![(expand_homogeneous(&h).unwrap(), h.system_config(), h.uplink_power, h.downlink_power, h.training_power)];
    let mut cfg = SystemConfig::new(3, 64, 2, 2, 3)
        .with_powers(5.0, 20.0, 8.0)
        .with_kappa(1e-4)
        .with_noises(1.0, 0.7)
        .with_coherence(150);
    cfg.set_minimal_pilots();
    let p = LargeScaleProfile::from_fn(
        &cfg,
        |j, l, n| if j == l { 1.0 - 0.1 * n as f64 } else { 0.2 },
        |j, l, k| if j == l { 0.9 - 0.05 * k as f64 } else { 0.1 },
        |j, l| if j == l { 1.0 } else { 0.05 },
        |_, _, _, _| 0.1,
    );
    cases.push((p, cfg, 5.0, 20.0, 8.0));
    let mut worst: f64 = 0.0;
    for (idx, (p, cfg, e_u, e_d, e_tr)) in cases.iter().enumerate() {
        for (law, csi) in [(ScalingLaw::InverseM, Csi::Perfect), (ScalingLaw::InverseSqrtM, Csi::Imperfect)] {
            let s = PowerScalingSchedule {
                uplink_energy: *e_u,
                downlink_energy: *e_d,
                training_energy: *e_tr,
                law,
            };
            let limit = asymptotic_rates(p, cfg, &s).unwrap();
            let c = s.apply(&cfg.clone().with_antennas(m));
            let cf = ClosedForms::new(p, &c).unwrap();
            let fd = cf.report(System::FullDuplex, csi).unwrap();
            let tdd = cf.report(System::Tdd, csi).unwrap();
            for link in LINKS {
                for (a, b) in fd.rates(link).iter().zip(limit.rates(link)) {
                    let e = rel(a.rate, b.rate);
                    worst = worst.max(e);
                    out.check(e <= 0.01, || format!("case {idx} {csi} {link}: {:.5} vs limit {:.5}", a.rate, b.rate));
                }
            }
            let g = bounds::fd_gain(&fd, &tdd).unwrap();
            let expected = match csi {
                Csi::Perfect => (2.0, 2.0),
                Csi::Imperfect => {
                    let t = c.coherence as f64;
                    (
                        2.0 * (1.0 - c.hd_downlink_users as f64 / (t - c.k_u() as f64)),
                        2.0 * (1.0 - c.hd_uplink_users as f64 / (t - c.k_d() as f64)),
                    )
                }
            };
            let implemented = asymptotic_gain(&c, csi);
            out.check(rel(implemented.0, expected.0) < 1e-12 && rel(implemented.1, expected.1) < 1e-12, || {
                format!("case {idx} {csi}: asymptotic_gain {implemented:?} vs {expected:?}")
            });
            for (link, target) in [(Link::Uplink, expected.0), (Link::Downlink, expected.1)] {
                let gv = g.gain(link).unwrap();
                out.check(rel(gv, target) <= 0.01, || format!("case {idx} {csi} {link} gain {gv:.5} vs {target:.5}"));
            }
        }
    }
    out.note(format!("largest relative deviation from the limits {worst:.2e}"));
    out
}

/// 5. General closed forms on expanded homogeneous profiles equal the homogeneous expressions.
fn homogeneous_reduction() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let users = rng.random_range(1..=6);
        let h = HomogeneousConfig {
            cells: rng.random_range(1..=7),
            antennas: rng.random_range(3..=400),
            users,
            beta: rng.random_range(0.0..1.0),
            uplink_power: 10f64.powf(rng.random_range(-1.0..3.0)),
            downlink_power: 10f64.powf(rng.random_range(-1.0..3.0)),
            training_power: 10f64.powf(rng.random_range(-1.0..3.0)),
            kappa: 10f64.powf(rng.random_range(-8.0..-2.0)),
            coherence: rng.random_range(users + 1..=300),
            pilot_len: None,
        };
        let p = expand_homogeneous(&h).unwrap();
        let cfg = h.system_config();
        for (csi, general) in [(Csi::Perfect, prop1_rates(&p, &cfg)), (Csi::Imperfect, prop2_rates(&p, &cfg))] {
            let general = general.unwrap();
            let closed = homogeneous_rates(&h, csi).unwrap();
            for link in LINKS {
                let e = rel(general.mean_se_per_cell(link, h.cells), closed.get(link));
                worst = worst.max(e);
                out.check(e <= 1e-12, || format!("{h:?} {csi} {link}: relative error {e:.2e}"));
            }
        }
    }
    out.note(format!("50 draws, largest relative error {worst:.2e}"));
    out
}

/// 6. Inverse moments of complex Wishart matrices.
fn wishart() -> Outcome {
    let mut out = Outcome::new();
    let draws = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut summary = Vec::new();
    for (m, n) in [(1usize, 4usize), (1, 8), (2, 8)] {
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let h = gaussian_matrix(&mut rng, n, m, |_| 1.0);
            let w = h.adjoint() * &h;
            let inv = w.try_inverse().expect("full rank almost surely");
            s1 += inv.trace().re;
            s2 += (&inv * &inv).trace().re;
        }
        let (e1, e2) = wishart_inverse_moments(m, n).unwrap();
        let (a1, a2) = (s1 / draws as f64, s2 / draws as f64);
        out.check(rel(a1, e1) <= 0.01, || format!("({m},{n}) E tr W^-1 {a1:.5} vs {e1:.5}"));
        out.check(rel(a2, e2) <= 0.01, || format!("({m},{n}) E tr W^-2 {a2:.5} vs {e2:.5}"));
        summary.push(format!("({m},{n}): {:.2e}/{:.2e}", rel(a1, e1), rel(a2, e2)));
    }
    out.note(format!("relative errors {}", summary.join(", ")));
    out
}

/// 7. MMSE estimation: variance split, orthogonality, high training power.
fn mmse() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let l = rng.random_range(1..=7);
        let betas: Vec<f64> = (0..l).map(|_| 10f64.powf(rng.random_range(-3.0..1.0))).collect();
        let j = rng.random_range(0..l);
        let p_tr = 10f64.powf(rng.random_range(-2.0..4.0));
        let s = EstimateStats::new(&betas, j, p_tr, 10f64.powf(rng.random_range(-2.0..1.0))).unwrap();
        let e = rel(s.est_var + s.err_var, betas[j]);
        out.check(e <= 4.0 * f64::EPSILON, || format!("variance split off by {e:.2e}"));
    }

    let cfg = SystemConfig::new(2, 2, 1, 1, 1).with_powers(1.0, 1.0, 2.0).with_noise(1.0);
    let p = LargeScaleProfile::from_fn(
        &cfg,
        |j, l, _| if j == l { 1.0 } else { 0.4 },
        |j, l, _| if j == l { 0.8 } else { 0.3 },
        |_, _| 0.1,
        |_, _, _, _| 0.1,
    );
    let trials = 100_000;
    let mut products = Vec::with_capacity(trials);
    for _ in 0..trials {
        let real = realize_channels(&p, cfg.antennas, &mut rng);
        let est = estimate_channels(&real, &p, &cfg, &mut rng).unwrap();
        let g = real.g_u(0, 0)[(0, 1)];
        let g_hat = est.g_hat_u[0][(0, 1)];
        products.push(g_hat.conj() * (g - g_hat));
    }
    let n = trials as f64;
    let mean = products.iter().sum::<num_complex::Complex64>() / n;
    let var = products.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    out.check(mean.norm() <= 3.0 * se, || format!("E[g_hat^* e] = {mean:.2e}, 3 se = {:.2e}", 3.0 * se));

    let single = SystemConfig::new(1, 64, 2, 1, 1).with_powers(10.0, 20.0, 1e6).with_noise(1.0);
    let sp = LargeScaleProfile::from_fn(&single, |_, _, n| 1.0 - 0.2 * n as f64, |_, _, k| 0.9 - 0.2 * k as f64, |_, _| 1.0, |_, _, _, _| 0.05);
    let isolated = SystemConfig::new(3, 64, 1, 1, 1).with_powers(10.0, 20.0, 1e6).with_noise(1.0);
    let ip = LargeScaleProfile::from_fn(
        &isolated,
        |j, l, _| if j == l { 0.7 } else { 0.0 },
        |j, l, _| if j == l { 0.6 } else { 0.0 },
        |j, l| if j == l { 1.0 } else { 0.01 },
        |l, _, j, _| if j == l { 0.05 } else { 0.0 },
    );
    let plan = Plan {
        fd_perfect: true,
        tdd_perfect: false,
        fd_imperfect_ul: true,
        fd_imperfect_dl: true,
        tdd_imperfect: false,
    };
    let worst_gap = |p: &LargeScaleProfile, c: &SystemConfig, link: Link| -> (f64, f64) {
        let closed = rel_gaps(&prop2_rates(p, c).unwrap(), &prop1_rates(p, c).unwrap(), link);
        let mc = rates::simulate(p, c, plan, McSettings::new(2000, 70)).unwrap();
        let sampled = rel_gaps(&mc.fd_imperfect.unwrap(), &mc.fd_perfect.unwrap(), link);
        (closed, sampled)
    };
    let mut gaps = [(0.0f64, 0.0f64); 2];
    for (p, c) in [(&sp, &single), (&ip, &isolated)] {
        for (slot, link) in LINKS.iter().enumerate() {
            let (closed, sampled) = worst_gap(p, c, *link);
            gaps[slot] = (gaps[slot].0.max(closed), gaps[slot].1.max(sampled));
        }
    }
    let [(ul_cf, ul_mc), (dl_cf, dl_mc)] = gaps;
    out.check(ul_cf <= 0.01 && ul_mc <= 0.01, || {
        format!("uplink at P_tr = 1e6: closed-form gap {ul_cf:.2e}, Monte Carlo gap {ul_mc:.2e}")
    });
    let single_dl_gap = |p_tr: f64| {
        let c = single.clone().with_powers(10.0, 20.0, p_tr);
        rel_gaps(&prop2_rates(&sp, &c).unwrap(), &prop1_rates(&sp, &c).unwrap(), Link::Downlink)
    };
    let (dl_1e6, dl_1e12) = (single_dl_gap(1e6), single_dl_gap(1e12));
    out.check(dl_cf <= 0.01 && dl_mc <= 0.01, || {
        format!(
            "downlink at P_tr = 1e6 does not reach the perfect-CSI rate: closed-form gap {dl_cf:.3}, \
             Monte Carlo gap {dl_mc:.3}; single cell: {dl_1e6:.4} at P_tr = 1e6 and {dl_1e12:.4} at 1e12, \
             so the gap is the effective-gain uncertainty of mean-gain decoding, not estimation error"
        )
    });
    out.note(format!(
        "variance split exact, |E[g_hat^* e]| = {:.1e} <= 3 se = {:.1e}, P_tr = 1e6 gaps UL {ul_cf:.1e}/{ul_mc:.1e}, \
         DL {dl_cf:.1e}/{dl_mc:.1e}",
        mean.norm(),
        3.0 * se
    ));
    out
}

/// 8. Small-cell scenario trends with paired confidence intervals.
fn small_cell() -> Outcome {
    let mut out = Outcome::new();
    let params = ScenarioParams::default();
    let m = GAIN_VS_KAPPA_ANTENNAS;
    let points = [
        (20, GAIN_VS_M_KAPPA_DB),
        (50, GAIN_VS_M_KAPPA_DB),
        (100, GAIN_VS_M_KAPPA_DB),
        (m, -50.0),
        (m, -80.0),
    ];
    let data = sweep_drops(&params, &points, 20, 8, 300).unwrap();
    for (a, b) in [(1, 0), (2, 1)] {
        let d = paired_gain_difference(&data[a], &data[b], Link::Downlink).unwrap();
        out.check(d.upper() >= 0.0, || {
            format!("DL gain drops from M = {} to M = {}: {:.4} +/- {:?}", points[b].0, points[a].0, d.value, d.half_width)
        });
    }
    let dl = paired_gain_difference(&data[4], &data[3], Link::Downlink).unwrap();
    out.check(dl.lower() <= 0.0 && dl.upper() >= 0.0, || {
        format!("DL gain depends on kappa: {:.4} +/- {:?}", dl.value, dl.half_width)
    });
    let ul = paired_gain_difference(&data[4], &data[3], Link::Uplink).unwrap();
    out.check(ul.lower() > 0.0, || format!("UL gain -80 dB minus -50 dB: {:.4} +/- {:?}", ul.value, ul.half_width));
    let g = |i: usize, link| experiments::ratio_of_means(&data[i], link).value;
    out.note(format!(
        "DL gain {:.3}/{:.3}/{:.3} at M = 20/50/100; UL gain {:.3} (-50 dB) vs {:.3} (-80 dB)",
        g(0, Link::Downlink),
        g(1, Link::Downlink),
        g(2, Link::Downlink),
        g(3, Link::Uplink),
        g(4, Link::Uplink)
    ));
    out
}

fn csv(result: &experiments::ExperimentResult) -> Vec<u8> {
    let mut buf = Vec::new();
    experiments::emit(result, OutputFormat::Csv, &mut buf).unwrap();
    buf
}

/// 9. Identical inputs give byte-identical CSV.
fn determinism() -> Outcome {
    let mut out = Outcome::new();
    let h = HomogeneousConfig::benchmark(20);
    let parallel = McSettings::new(300, 9);
    let serial = McSettings {
        parallel: false,
        ..parallel
    };
    let a = csv(&tightness(&h, &[10, 20], parallel).unwrap());
    let b = csv(&tightness(&h, &[10, 20], parallel).unwrap());
    let c = csv(&tightness(&h, &[10, 20], serial).unwrap());
    out.check(a == b, || "tightness re-run differs".into());
    out.check(a == c, || "serial and parallel tightness differ".into());
    let params = ScenarioParams {
        m_list: vec![10],
        ..ScenarioParams::default()
    };
    let d = csv(&experiments::gain_vs_m(&params, 3, 9, 20).unwrap());
    let e = csv(&experiments::gain_vs_m(&params, 3, 9, 20).unwrap());
    out.check(d == e, || "drop sweep re-run differs".into());
    let f = csv(&experiments::power_scaling(&h, &[16], Csi::Imperfect, parallel).unwrap());
    let g = csv(&experiments::power_scaling(&h, &[16], Csi::Imperfect, parallel).unwrap());
    out.check(f == g, || "power scaling re-run differs".into());
    out.note(format!("{} bytes compared", a.len() + d.len() + f.len()));
    out
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("bounds below Monte Carlo rates", jensen),
        ("bound tightness at M = 300", tightness_at_300),
        ("gains at M = 64 with power scaling", gain_at_64),
        ("large-antenna limits and gains", asymptotics),
        ("homogeneous reduction", homogeneous_reduction),
        ("Wishart inverse moments", wishart),
        ("MMSE estimator", mmse),
        ("small-cell scenario trends", small_cell),
        ("byte-identical re-runs", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.ok { "PASS" } else { "FAIL" };
        println!(
            "criterion {id} [{verdict}] {name} ({:.1} s): {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.ok);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
