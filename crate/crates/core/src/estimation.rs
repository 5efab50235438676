//! Uplink pilot training with pilot reuse and MMSE channel estimation.
//!
//! Pilot slot `p` is shared by the users that occupy slot `p` in every
//! cell, so the BS observation of slot `p` is contaminated by all of them.
//! Uplink users occupy slots `0..K_u` (full-duplex users first); half-duplex
//! downlink users occupy slots `K_u..K_tot`. A full-duplex user's single
//! observation yields both its uplink and its downlink estimate.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{complex_normal, ChannelRealization};
use crate::config::{Link, SystemConfig};
use crate::error::{Error, Result};
use crate::profile::LargeScaleProfile;
use crate::CMatrix;

pub type CVector = DVector<Complex64>;

/// Second-order statistics of one MMSE estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateStats {
    /// `sigma^2 + P_tr * sum_l beta_l`.
    pub lambda: f64,
    /// Per-entry variance of the estimate, `P_tr beta^2 / lambda`.
    pub est_var: f64,
    /// Per-entry variance of the error, `beta (sigma^2 + P_tr sum_{l != j} beta_l) / lambda`.
    pub err_var: f64,
}

impl EstimateStats {
    /// `pilot_betas[l]` is the gain from the cell-`l` user on this pilot to
    /// the estimating BS `j`.
    pub fn new(pilot_betas: &[f64], j: usize, training_power: f64, noise_power: f64) -> Result<Self> {
        let beta = *pilot_betas
            .get(j)
            .ok_or_else(|| Error::IndexOutOfRange(format!("cell {j} of {}", pilot_betas.len())))?;
        if beta.is_nan() || beta <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "serving-cell gain must be > 0 for MMSE estimation (got {beta})"
            )));
        }
        let others: f64 = pilot_betas.iter().enumerate().filter(|(l, _)| *l != j).map(|(_, b)| b).sum();
        let lambda = noise_power + training_power * (beta + others);
        Ok(EstimateStats {
            lambda,
            est_var: training_power * beta * beta / lambda,
            err_var: beta * (noise_power + training_power * others) / lambda,
        })
    }

    /// Scale mapping the normalized observation to the estimate.
    pub fn weight(&self, training_power: f64, beta: f64) -> f64 {
        training_power * beta / self.lambda
    }
}

/// Estimate statistics of every user in every cell; deterministic given the profile.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateStatistics {
    cells: usize,
    k_u: usize,
    k_d: usize,
    ul: Vec<EstimateStats>,
    dl: Vec<EstimateStats>,
}

impl EstimateStatistics {
    pub fn new(profile: &LargeScaleProfile, cfg: &SystemConfig) -> Result<Self> {
        profile.check_shape(cfg)?;
        let (l_n, k_u, k_d) = (cfg.cells, cfg.k_u(), cfg.k_d());
        let mut ul = Vec::with_capacity(l_n * k_u);
        let mut dl = Vec::with_capacity(l_n * k_d);
        for j in 0..l_n {
            for n in 0..k_u {
                let b = profile.pilot_betas(Link::Uplink, j, n);
                ul.push(EstimateStats::new(&b, j, cfg.training_power, cfg.noise_power)?);
            }
            for k in 0..k_d {
                let b = profile.pilot_betas(Link::Downlink, j, k);
                dl.push(EstimateStats::new(&b, j, cfg.training_power, cfg.noise_power)?);
            }
        }
        Ok(EstimateStatistics {
            cells: l_n,
            k_u,
            k_d,
            ul,
            dl,
        })
    }

    pub fn get(&self, link: Link, j: usize, k: usize) -> &EstimateStats {
        match link {
            Link::Uplink => &self.ul[j * self.k_u + k],
            Link::Downlink => &self.dl[j * self.k_d + k],
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }
}

/// MMSE estimates of every serving-cell channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimateSet {
    /// Per cell `j`: `M x K_u` estimate of the own-cell uplink channels.
    pub g_hat_u: Vec<CMatrix>,
    /// Per cell `j`: `M x K_d` estimate of the own-cell downlink channels.
    pub g_hat_d: Vec<CMatrix>,
}

impl ChannelEstimateSet {
    pub fn g_hat(&self, link: Link, j: usize) -> &CMatrix {
        match link {
            Link::Uplink => &self.g_hat_u[j],
            Link::Downlink => &self.g_hat_d[j],
        }
    }
}

fn check_user(cfg: &SystemConfig, link: Link, j: usize, k: usize) -> Result<()> {
    if j >= cfg.cells {
        return Err(Error::IndexOutOfRange(format!("cell {j} (L = {})", cfg.cells)));
    }
    if k >= cfg.users(link) {
        return Err(Error::IndexOutOfRange(format!(
            "{link} user {k} (cell has {})",
            cfg.users(link)
        )));
    }
    Ok(())
}

/// Correlated training observation of user `k` at BS `j`: the sum of the
/// channels of every user sharing the pilot, plus `n / sqrt(P_tr)` with
/// `n ~ CN(0, sigma^2 I)` drawn from `rng`.
pub fn training_observation<R: Rng + ?Sized>(
    real: &ChannelRealization,
    cfg: &SystemConfig,
    link: Link,
    j: usize,
    k: usize,
    rng: &mut R,
) -> Result<CVector> {
    check_user(cfg, link, j, k)?;
    let noise_var = cfg.noise_power / cfg.training_power;
    Ok(observation(real, link, j, k, noise_var, rng))
}

fn observation<R: Rng + ?Sized>(
    real: &ChannelRealization,
    link: Link,
    j: usize,
    k: usize,
    noise_var: f64,
    rng: &mut R,
) -> CVector {
    let m = real.antennas();
    let mut y = CVector::zeros(m);
    for l in 0..real.cells() {
        let g = match link {
            Link::Uplink => real.g_u(j, l),
            Link::Downlink => real.g_d(j, l),
        };
        y += g.column(k);
    }
    for i in 0..m {
        y[i] += complex_normal(rng, noise_var);
    }
    y
}

/// MMSE estimate of the serving-cell channel from an observation.
/// `pilot_betas[l]` is the gain of the cell-`l` user on this pilot to BS `j`.
pub fn mmse_estimate(
    y: &CVector,
    cfg: &SystemConfig,
    pilot_betas: &[f64],
    j: usize,
) -> Result<(CVector, EstimateStats)> {
    let stats = EstimateStats::new(pilot_betas, j, cfg.training_power, cfg.noise_power)?;
    let w = stats.weight(cfg.training_power, pilot_betas[j]);
    Ok((y * Complex64::new(w, 0.0), stats))
}

/// Trains every pilot slot in every cell and forms all MMSE estimates.
/// Noise is drawn per (cell, pilot slot) in that order.
pub fn estimate_channels<R: Rng + ?Sized>(
    real: &ChannelRealization,
    profile: &LargeScaleProfile,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<ChannelEstimateSet> {
    let stats = EstimateStatistics::new(profile, cfg)?;
    Ok(estimate_with(real, profile, &stats, cfg, rng))
}

pub(crate) fn estimate_with<R: Rng + ?Sized>(
    real: &ChannelRealization,
    profile: &LargeScaleProfile,
    stats: &EstimateStatistics,
    cfg: &SystemConfig,
    rng: &mut R,
) -> ChannelEstimateSet {
    let (l_n, m) = (cfg.cells, real.antennas());
    let (k_f, k_u, k_d) = (cfg.fd_users, cfg.k_u(), cfg.k_d());
    let noise_var = cfg.noise_power / cfg.training_power;
    let mut g_hat_u = Vec::with_capacity(l_n);
    let mut g_hat_d = Vec::with_capacity(l_n);
    let weight = |link: Link, j: usize, k: usize| -> f64 {
        let beta = match link {
            Link::Uplink => profile.beta_u(j, j, k),
            Link::Downlink => profile.beta_d(j, j, k),
        };
        stats.get(link, j, k).weight(cfg.training_power, beta)
    };
    for j in 0..l_n {
        let mut gu = CMatrix::zeros(m, k_u);
        let mut gd = CMatrix::zeros(m, k_d);
        for n in 0..k_u {
            let y = observation(real, Link::Uplink, j, n, noise_var, rng);
            gu.set_column(n, &(&y * Complex64::new(weight(Link::Uplink, j, n), 0.0)));
            if n < k_f {
                gd.set_column(n, &(&y * Complex64::new(weight(Link::Downlink, j, n), 0.0)));
            }
        }
        for k in k_f..k_d {
            let y = observation(real, Link::Downlink, j, k, noise_var, rng);
            gd.set_column(k, &(&y * Complex64::new(weight(Link::Downlink, j, k), 0.0)));
        }
        g_hat_u.push(gu);
        g_hat_d.push(gd);
    }
    ChannelEstimateSet { g_hat_u, g_hat_d }
}
