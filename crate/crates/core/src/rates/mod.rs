//! Instantaneous SINRs and ergodic achievable rates.
//!
//! Full-duplex and TDD systems are evaluated under perfect and imperfect
//! CSI. Monte Carlo rates average `log2(1 + SINR)` over independent
//! coherence blocks; the imperfect-CSI full-duplex downlink rate is also
//! available as a deterministic expression in channel moments
//! ([`dl_rate_fd_imperfect`]).
//!
//! A per-user `rate` includes the 1/2 time share of TDD but not the pilot
//! overhead; spectral efficiencies multiply the rate sums by the report's
//! `ul_overhead` / `dl_overhead`.

mod analytic;
mod mc;
mod sinr;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{Link, SystemConfig};
use crate::error::{Error, Result};
use crate::estimation::EstimateStatistics;
use crate::profile::LargeScaleProfile;

pub use analytic::{cross_moment, dl_rate_fd_imperfect, effective_gain_mean, effective_gain_var};
pub use mc::{
    dl_rate_fd_imperfect_mc, fd_imperfect_report, fd_perfect_mc, simulate, tdd_rates_mc, ul_rate_fd_imperfect_mc,
    BsBsSampling, McOutput, McSettings, Plan,
};
pub use sinr::{dl_sinr_fd_perfect, ul_sinr_fd_perfect};
pub(crate) use mc::overheads;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    FullDuplex,
    Tdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Csi {
    Perfect,
    Imperfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserClass {
    FullDuplex,
    HalfDuplex,
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            System::FullDuplex => "fd",
            System::Tdd => "tdd",
        })
    }
}

impl fmt::Display for Csi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Csi::Perfect => "perfect",
            Csi::Imperfect => "imperfect",
        })
    }
}

impl fmt::Display for UserClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UserClass::FullDuplex => "fd",
            UserClass::HalfDuplex => "hd",
        })
    }
}

/// Rate of one user in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserRate {
    pub link: Link,
    pub cell: usize,
    pub user: usize,
    pub class: UserClass,
    pub rate: f64,
    /// Monte Carlo standard error; zero for deterministic values.
    pub stderr: f64,
}

/// Rates of every user of one system under one CSI assumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub system: System,
    pub csi: Csi,
    pub ul: Vec<UserRate>,
    pub dl: Vec<UserRate>,
    /// Fraction of the coherence interval carrying uplink data.
    pub ul_overhead: f64,
    /// Fraction of the coherence interval carrying downlink data.
    pub dl_overhead: f64,
    /// Standard error of the network uplink rate sum.
    pub ul_sum_stderr: f64,
    pub dl_sum_stderr: f64,
    /// Monte Carlo trials behind the rates; zero for closed forms.
    pub n_trials: usize,
}

/// CSV header of [`RateReport::write_csv`].
pub const RATE_CSV_HEADER: [&str; 8] = ["system", "csi", "link", "cell", "user", "class", "rate", "stderr"];

impl RateReport {
    pub fn rates(&self, link: Link) -> &[UserRate] {
        match link {
            Link::Uplink => &self.ul,
            Link::Downlink => &self.dl,
        }
    }

    pub fn overhead(&self, link: Link) -> f64 {
        match link {
            Link::Uplink => self.ul_overhead,
            Link::Downlink => self.dl_overhead,
        }
    }

    pub fn sum_stderr(&self, link: Link) -> f64 {
        match link {
            Link::Uplink => self.ul_sum_stderr,
            Link::Downlink => self.dl_sum_stderr,
        }
    }

    /// Network spectral efficiency (bits/s/Hz), summed over all cells.
    pub fn sum_se(&self, link: Link) -> f64 {
        let rates: Vec<f64> = self.rates(link).iter().map(|r| r.rate).collect();
        self.overhead(link) * crate::stats::pairwise_sum(&rates)
    }

    /// Standard error of [`RateReport::sum_se`].
    pub fn sum_se_stderr(&self, link: Link) -> f64 {
        self.overhead(link) * self.sum_stderr(link)
    }

    /// Spectral efficiency per cell (bits/s/Hz/cell).
    pub fn se_per_cell(&self, link: Link, cells: usize) -> Vec<f64> {
        let mut out = vec![0.0; cells];
        for r in self.rates(link) {
            out[r.cell] += r.rate;
        }
        out.iter_mut().for_each(|v| *v *= self.overhead(link));
        out
    }

    /// Average spectral efficiency per cell.
    pub fn mean_se_per_cell(&self, link: Link, cells: usize) -> f64 {
        self.sum_se(link) / cells as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rate_csv(std::slice::from_ref(self), out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Writes the users of several reports under one [`RATE_CSV_HEADER`].
pub fn write_rate_csv<W: Write>(reports: &[RateReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATE_CSV_HEADER)?;
    for report in reports {
        for r in report.ul.iter().chain(report.dl.iter()) {
            w.write_record([
                report.system.to_string(),
                report.csi.to_string(),
                r.link.to_string(),
                r.cell.to_string(),
                r.user.to_string(),
                r.class.to_string(),
                r.rate.to_string(),
                r.stderr.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-cell downlink power normalizations.
///
/// With no downlink users a BS is silent and all factors are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerCellFactors {
    /// `M sum_k beta_d,llk / K_d`.
    pub gamma: Vec<f64>,
    /// `(M / K_d) sum_i P_tr beta_d,lli^2 / lambda_d,li`.
    pub gamma_tilde: Vec<f64>,
    /// `1 / (M sum_i beta_d,lli)`.
    pub eta: Vec<f64>,
    /// `(sum_i beta_d,lli^2 / lambda_d,li)^-1`.
    pub eta_tilde: Vec<f64>,
    k_d: usize,
    downlink_power: f64,
}

impl PerCellFactors {
    pub fn new(profile: &LargeScaleProfile, cfg: &SystemConfig) -> Result<Self> {
        let stats = EstimateStatistics::new(profile, cfg)?;
        Self::with_stats(profile, cfg, &stats)
    }

    pub fn with_stats(profile: &LargeScaleProfile, cfg: &SystemConfig, stats: &EstimateStatistics) -> Result<Self> {
        profile.check_shape(cfg)?;
        let (l_n, k_d) = (cfg.cells, cfg.k_d());
        let m = cfg.antennas as f64;
        let mut f = PerCellFactors {
            gamma: vec![0.0; l_n],
            gamma_tilde: vec![0.0; l_n],
            eta: vec![0.0; l_n],
            eta_tilde: vec![0.0; l_n],
            k_d,
            downlink_power: cfg.downlink_power,
        };
        if k_d == 0 {
            return Ok(f);
        }
        for l in 0..l_n {
            let sum_beta: f64 = (0..k_d).map(|i| profile.beta_d(l, l, i)).sum();
            let sum_sq: f64 = (0..k_d)
                .map(|i| profile.beta_d(l, l, i).powi(2) / stats.get(Link::Downlink, l, i).lambda)
                .sum();
            if sum_beta.is_nan() || sum_beta <= 0.0 {
                return Err(Error::InvalidArgument(format!("cell {l} has no downlink gain")));
            }
            f.gamma[l] = m * sum_beta / k_d as f64;
            f.gamma_tilde[l] = m / k_d as f64 * cfg.training_power * sum_sq;
            f.eta[l] = 1.0 / (m * sum_beta);
            f.eta_tilde[l] = 1.0 / sum_sq;
        }
        Ok(f)
    }

    /// Power scale `P_d / (K_d gamma)` of cell `l`'s precoder.
    pub fn dl_scale(&self, l: usize, csi: Csi) -> f64 {
        if self.k_d == 0 {
            return 0.0;
        }
        let g = match csi {
            Csi::Perfect => self.gamma[l],
            Csi::Imperfect => self.gamma_tilde[l],
        };
        self.downlink_power / (self.k_d as f64 * g)
    }
}

/// Class of downlink or uplink user `k` under `cfg`'s indexing.
pub fn user_class(cfg: &SystemConfig, k: usize) -> UserClass {
    if cfg.is_fd_user(k) {
        UserClass::FullDuplex
    } else {
        UserClass::HalfDuplex
    }
}

/// Checks everything a rate evaluation needs from a profile/config pair.
pub(crate) fn check_inputs(profile: &LargeScaleProfile, cfg: &SystemConfig) -> Result<()> {
    cfg.ensure_valid(crate::config::Purpose::Simulation)?;
    profile.check_shape(cfg)?;
    profile.validate()?;
    for j in 0..cfg.cells {
        for n in 0..cfg.k_u() {
            if profile.beta_u(j, j, n).is_nan() || profile.beta_u(j, j, n) <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "uplink user {n} of cell {j} has zero gain to its own BS"
                )));
            }
        }
        for k in 0..cfg.k_d() {
            if profile.beta_d(j, j, k).is_nan() || profile.beta_d(j, j, k) <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "downlink user {k} of cell {j} has zero gain from its own BS"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::HomogeneousConfig;
    use crate::profile::expand_homogeneous;

    #[test]
    fn factor_identities() {
        let h = HomogeneousConfig::benchmark(64);
        let p = expand_homogeneous(&h).unwrap();
        let cfg = h.system_config();
        let f = PerCellFactors::new(&p, &cfg).unwrap();
        for l in 0..cfg.cells {
            assert!((f.gamma[l] * 5.0 / 64.0 - 5.0).abs() < 1e-12);
            assert!((f.eta[l] - 1.0 / (64.0 * 5.0)).abs() < 1e-15);
            let lambda = 1.0 + 10.0 * (1.0 + 6.0 * 0.3);
            assert!((f.eta_tilde[l] - lambda / 5.0).abs() < 1e-12);
            assert!((f.gamma_tilde[l] - 64.0 * 10.0 / lambda).abs() < 1e-9);
            assert!((f.dl_scale(l, Csi::Perfect) - 100.0 / (5.0 * 64.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn silent_bs_has_zero_scale() {
        let p = LargeScaleProfile::filled(1, 0, 1, 0, 1.0).unwrap();
        let cfg = SystemConfig::new(1, 4, 0, 1, 0);
        let f = PerCellFactors::new(&p, &cfg).unwrap();
        assert_eq!(f.dl_scale(0, Csi::Perfect), 0.0);
        assert_eq!(f.dl_scale(0, Csi::Imperfect), 0.0);
    }

    #[test]
    fn report_aggregates() {
        let mk = |cell, user, rate| UserRate {
            link: Link::Uplink,
            cell,
            user,
            class: UserClass::HalfDuplex,
            rate,
            stderr: 0.0,
        };
        let r = RateReport {
            system: System::Tdd,
            csi: Csi::Imperfect,
            ul: vec![mk(0, 0, 1.0), mk(0, 1, 2.0), mk(1, 0, 3.0)],
            dl: vec![],
            ul_overhead: 0.5,
            dl_overhead: 1.0,
            ul_sum_stderr: 0.1,
            dl_sum_stderr: 0.0,
            n_trials: 10,
        };
        assert_eq!(r.sum_se(Link::Uplink), 3.0);
        assert_eq!(r.se_per_cell(Link::Uplink, 2), vec![1.5, 1.5]);
        assert_eq!(r.sum_se_stderr(Link::Uplink), 0.05);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("system,csi,link,cell,user,class,rate,stderr\n"));
        assert!(text.contains("tdd,imperfect,uplink,1,0,hd,3,0"));
        let back: RateReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
