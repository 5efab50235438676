//! Deterministic full-duplex downlink rate with MMSE-estimated CSI.
//!
//! Users decode against the mean of their effective gain
//! `mu_lk = g_d,llk^T conj(g_hat_d,llk)`; everything else, including the
//! fluctuation of `mu_lk`, is uncorrelated effective noise. All moments are
//! exact for Rayleigh fading with pilot contamination.

use super::sinr::dl_noise_fd;
use super::{check_inputs, user_class, Csi, PerCellFactors, RateReport, System, UserRate};
use crate::config::{Link, SystemConfig};
use crate::error::{Error, Result};
use crate::estimation::EstimateStatistics;
use crate::profile::LargeScaleProfile;

fn check_dl_user(cfg: &SystemConfig, l: usize, k: usize) -> Result<()> {
    if l >= cfg.cells || k >= cfg.k_d() {
        return Err(Error::IndexOutOfRange(format!(
            "downlink user {k} of cell {l} (L = {}, K_d = {})",
            cfg.cells,
            cfg.k_d()
        )));
    }
    Ok(())
}

struct Moments<'a> {
    profile: &'a LargeScaleProfile,
    cfg: &'a SystemConfig,
    stats: EstimateStatistics,
}

impl<'a> Moments<'a> {
    fn new(profile: &'a LargeScaleProfile, cfg: &'a SystemConfig) -> Result<Self> {
        profile.check_shape(cfg)?;
        Ok(Moments {
            profile,
            cfg,
            stats: EstimateStatistics::new(profile, cfg)?,
        })
    }

    fn m(&self) -> f64 {
        self.cfg.antennas as f64
    }

    /// `E[mu_lk] = M P_tr beta^2 / lambda`.
    fn mean(&self, l: usize, k: usize) -> f64 {
        self.m() * self.stats.get(Link::Downlink, l, k).est_var
    }

    /// `var[mu_lk] = M P_tr beta^3 / lambda`.
    fn var(&self, l: usize, k: usize) -> f64 {
        self.m() * self.stats.get(Link::Downlink, l, k).est_var * self.profile.beta_d(l, l, k)
    }

    /// `E|g_d,jlk^T conj(g_hat_d,jji)|^2`.
    fn cross(&self, j: usize, l: usize, k: usize, i: usize) -> f64 {
        let m = self.m();
        if j == l && i == k {
            let mean = self.mean(l, k);
            return self.var(l, k) + mean * mean;
        }
        if i != k {
            return m * self.profile.beta_d(j, l, k) * self.stats.get(Link::Downlink, j, i).est_var;
        }
        let st = self.stats.get(Link::Downlink, j, k);
        let p_tr = self.cfg.training_power;
        let w = p_tr * self.profile.beta_d(j, j, k) / st.lambda;
        let b = self.profile.beta_d(j, l, k);
        let others: f64 = (0..self.cfg.cells)
            .filter(|&l1| l1 != l)
            .map(|l1| self.profile.beta_d(j, l1, k))
            .sum();
        w * w * m * ((m + 1.0) * b * b + others * b + b * self.cfg.noise_power / p_tr)
    }

    fn sinr(&self, factors: &PerCellFactors, l: usize, k: usize) -> f64 {
        let cfg = self.cfg;
        let scale_l = factors.dl_scale(l, Csi::Imperfect);
        let mean = self.mean(l, k);
        let desired = scale_l * mean * mean;
        let uncertainty = scale_l * self.var(l, k);
        let mut other = 0.0;
        for j in 0..cfg.cells {
            let c = factors.dl_scale(j, Csi::Imperfect);
            for i in 0..cfg.k_d() {
                if (j, i) != (l, k) {
                    other += c * self.cross(j, l, k, i);
                }
            }
        }
        let mut ue_ue = 0.0;
        for j in 0..cfg.cells {
            for n in 0..cfg.k_u() {
                if !(cfg.is_fd_user(k) && j == l && n == k) {
                    ue_ue += self.profile.beta_i(l, k, j, n);
                }
            }
        }
        desired / (uncertainty + other + cfg.uplink_power * ue_ue + dl_noise_fd(self.profile, cfg, l, k))
    }
}

/// Mean effective downlink gain `E[g_d,llk^T conj(g_hat_d,llk)]` of user `k` in cell `l`.
pub fn effective_gain_mean(profile: &LargeScaleProfile, cfg: &SystemConfig, l: usize, k: usize) -> Result<f64> {
    check_dl_user(cfg, l, k)?;
    Ok(Moments::new(profile, cfg)?.mean(l, k))
}

/// Variance of the effective downlink gain of user `k` in cell `l`.
pub fn effective_gain_var(profile: &LargeScaleProfile, cfg: &SystemConfig, l: usize, k: usize) -> Result<f64> {
    check_dl_user(cfg, l, k)?;
    Ok(Moments::new(profile, cfg)?.var(l, k))
}

/// `E|g_d,jlk^T conj(g_hat_d,jji)|^2`: power that BS `j`'s stream for its
/// user `i` delivers to downlink user `k` of cell `l`, before precoder scaling.
pub fn cross_moment(profile: &LargeScaleProfile, cfg: &SystemConfig, j: usize, l: usize, k: usize, i: usize) -> Result<f64> {
    check_dl_user(cfg, l, k)?;
    check_dl_user(cfg, j, i)?;
    Ok(Moments::new(profile, cfg)?.cross(j, l, k, i))
}

/// Full-duplex downlink rates with imperfect CSI, evaluated from exact moments.
/// Only `dl` is populated; `ul` is empty.
pub fn dl_rate_fd_imperfect(profile: &LargeScaleProfile, cfg: &SystemConfig) -> Result<RateReport> {
    check_inputs(profile, cfg)?;
    let mo = Moments::new(profile, cfg)?;
    let factors = PerCellFactors::with_stats(profile, cfg, &mo.stats)?;
    let mut dl = Vec::with_capacity(cfg.cells * cfg.k_d());
    for l in 0..cfg.cells {
        for k in 0..cfg.k_d() {
            dl.push(UserRate {
                link: Link::Downlink,
                cell: l,
                user: k,
                class: user_class(cfg, k),
                rate: (1.0 + mo.sinr(&factors, l, k)).log2(),
                stderr: 0.0,
            });
        }
    }
    let overhead = cfg.fd_data_fraction();
    Ok(RateReport {
        system: System::FullDuplex,
        csi: Csi::Imperfect,
        ul: Vec::new(),
        dl,
        ul_overhead: overhead,
        dl_overhead: overhead,
        ul_sum_stderr: 0.0,
        dl_sum_stderr: 0.0,
        n_trials: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::realize_channels;
    use crate::estimation::estimate_channels;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (LargeScaleProfile, SystemConfig) {
        let cfg = SystemConfig::new(2, 5, 1, 1, 1).with_powers(2.0, 4.0, 3.0).with_noise(0.5);
        let p = LargeScaleProfile::from_fn(
            &cfg,
            |j, l, _| if j == l { 1.0 } else { 0.3 },
            |j, l, _| if j == l { 0.8 } else { 0.25 },
            |_, _| 0.1,
            |_, _, _, _| 0.05,
        );
        (p, cfg)
    }

    #[test]
    fn moments_match_sampling() {
        let (p, cfg) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 40_000;
        let (mut s_mu, mut s_mu2, mut s_cross_same, mut s_cross_other) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let real = realize_channels(&p, 5, &mut rng);
            let est = estimate_channels(&real, &p, &cfg, &mut rng).unwrap();
            let mu = real.g_d(0, 0).column(1).dot(&est.g_hat_d[0].column(1).map(|z| z.conj()));
            s_mu += mu.re;
            s_mu2 += mu.norm_sqr();
            let x = real.g_d(1, 0).column(0).dot(&est.g_hat_d[1].column(0).map(|z| z.conj()));
            s_cross_same += x.norm_sqr();
            let y = real.g_d(1, 0).column(0).dot(&est.g_hat_d[1].column(1).map(|z| z.conj()));
            s_cross_other += y.norm_sqr();
        }
        let nf = n as f64;
        let mean = effective_gain_mean(&p, &cfg, 0, 1).unwrap();
        let var = effective_gain_var(&p, &cfg, 0, 1).unwrap();
        assert!((s_mu / nf - mean).abs() / mean < 0.02);
        assert!(((s_mu2 / nf - (s_mu / nf).powi(2)) - var).abs() / var < 0.05);
        let same = cross_moment(&p, &cfg, 1, 0, 0, 0).unwrap();
        assert!((s_cross_same / nf - same).abs() / same < 0.05);
        let other = cross_moment(&p, &cfg, 1, 0, 0, 1).unwrap();
        assert!((s_cross_other / nf - other).abs() / other < 0.05);
    }

    #[test]
    fn own_cross_moment_is_second_moment() {
        let (p, cfg) = setup();
        let mean = effective_gain_mean(&p, &cfg, 1, 0).unwrap();
        let var = effective_gain_var(&p, &cfg, 1, 0).unwrap();
        let own = cross_moment(&p, &cfg, 1, 1, 0, 0).unwrap();
        assert!((own - var - mean * mean).abs() < 1e-12);
    }

    #[test]
    fn report_shape() {
        let (p, cfg) = setup();
        let r = dl_rate_fd_imperfect(&p, &cfg).unwrap();
        assert!(r.ul.is_empty());
        assert_eq!(r.dl.len(), 4);
        assert!(r.dl.iter().all(|u| u.rate > 0.0 && u.stderr == 0.0));
        assert_eq!(r.n_trials, 0);
    }

    #[test]
    fn bad_index_rejected() {
        let (p, cfg) = setup();
        assert!(effective_gain_mean(&p, &cfg, 2, 0).is_err());
        assert!(cross_moment(&p, &cfg, 0, 0, 0, 5).is_err());
    }
}
