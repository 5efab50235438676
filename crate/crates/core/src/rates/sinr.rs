//! SINR assembly shared by the per-user evaluators and the Monte Carlo engine.

use num_complex::Complex64;

use super::{Csi, PerCellFactors, UserClass};
use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::profile::LargeScaleProfile;

/// Uplink SINR terms after MRC with receive vector `a`.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct UlTerms {
    /// `P_u ||a||^4`.
    pub signal: f64,
    /// `P_u |a^H eps|^2`; zero with perfect CSI.
    pub estimation_error: f64,
    /// `P_u sum |a^H g|^2` over all other uplink users in all cells.
    pub multiuser: f64,
    /// Downlink signals of other BSs leaking over BS-BS channels.
    pub bs_bs: f64,
    /// `||a||^2`, multiplying the effective receiver noise.
    pub norm_sq: f64,
}

impl UlTerms {
    /// `noise` is the per-antenna noise plus residual self-interference variance.
    pub fn sinr(&self, noise: f64) -> f64 {
        debug_assert!(self.estimation_error >= 0.0 && self.multiuser >= 0.0 && self.bs_bs >= 0.0);
        self.signal / (self.estimation_error + self.multiuser + self.bs_bs + self.norm_sq * noise)
    }
}

/// Downlink SINR terms at one user.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct DlTerms {
    pub desired: f64,
    /// Beamforming-gain uncertainty; zero with perfect CSI.
    pub gain_uncertainty: f64,
    /// Precoded streams of all BSs intended for other users.
    pub multiuser: f64,
    /// UE-UE interference (own self-interference removed for full-duplex users).
    pub ue_ue: f64,
}

impl DlTerms {
    /// `noise` is the UE noise plus residual self-interference variance.
    pub fn sinr(&self, noise: f64) -> f64 {
        debug_assert!(self.gain_uncertainty >= 0.0 && self.multiuser >= 0.0 && self.ue_ue >= 0.0);
        self.desired / (self.gain_uncertainty + self.multiuser + self.ue_ue + noise)
    }
}

/// `sigma^2 + kappa P_d beta_b,jj` at BS `j`; a BS without downlink users
/// does not transmit and leaves no residual.
pub(crate) fn ul_noise_fd(profile: &LargeScaleProfile, cfg: &SystemConfig, j: usize) -> f64 {
    if cfg.k_d() == 0 {
        cfg.noise_power
    } else {
        cfg.noise_power + cfg.kappa * cfg.downlink_power * profile.beta_b(j, j)
    }
}

/// UE noise plus the residual transmitter noise of a full-duplex user.
pub(crate) fn dl_noise_fd(profile: &LargeScaleProfile, cfg: &SystemConfig, l: usize, k: usize) -> f64 {
    if cfg.is_fd_user(k) {
        cfg.ue_noise_power + cfg.kappa * cfg.uplink_power * profile.beta_i(l, k, l, k)
    } else {
        cfg.ue_noise_power
    }
}

fn check_cell(cfg: &SystemConfig, j: usize) -> Result<()> {
    if j >= cfg.cells {
        return Err(Error::IndexOutOfRange(format!("cell {j} (L = {})", cfg.cells)));
    }
    Ok(())
}

/// Instantaneous uplink SINR of user `n` in cell `j` with perfect CSI in a
/// full-duplex network. Requires a realization with explicit BS-BS channels.
pub fn ul_sinr_fd_perfect(
    real: &ChannelRealization,
    profile: &LargeScaleProfile,
    cfg: &SystemConfig,
    factors: &PerCellFactors,
    j: usize,
    n: usize,
) -> Result<f64> {
    check_cell(cfg, j)?;
    if n >= cfg.k_u() {
        return Err(Error::IndexOutOfRange(format!("uplink user {n} (K_u = {})", cfg.k_u())));
    }
    let a = real.g_u(j, j).column(n);
    let norm_sq = a.norm_squared();
    if norm_sq == 0.0 {
        return Err(Error::ZeroChannel(format!("uplink user {n} of cell {j}")));
    }
    let mut multiuser = 0.0;
    for l in 0..cfg.cells {
        let g = real.g_u(j, l);
        for m in 0..cfg.k_u() {
            if (l, m) != (j, n) {
                multiuser += a.dotc(&g.column(m)).norm_sqr();
            }
        }
    }
    let mut bs_bs = 0.0;
    if cfg.k_d() > 0 {
        for l in (0..cfg.cells).filter(|&l| l != j) {
            let c = factors.dl_scale(l, Csi::Perfect);
            let av = real.v(j, l).ad_mul(&a);
            let g = real.g_d(l, l);
            for k in 0..cfg.k_d() {
                let b = g.column(k).map(|z| z.conj());
                bs_bs += c * av.dotc(&b).norm_sqr();
            }
        }
    }
    let terms = UlTerms {
        signal: cfg.uplink_power * norm_sq * norm_sq,
        estimation_error: 0.0,
        multiuser: cfg.uplink_power * multiuser,
        bs_bs,
        norm_sq,
    };
    Ok(terms.sinr(ul_noise_fd(profile, cfg, j)))
}

/// Instantaneous downlink SINR of user `k` in cell `l` with perfect CSI in a
/// full-duplex network. `class` must match the user's index range.
pub fn dl_sinr_fd_perfect(
    real: &ChannelRealization,
    profile: &LargeScaleProfile,
    cfg: &SystemConfig,
    factors: &PerCellFactors,
    l: usize,
    k: usize,
    class: UserClass,
) -> Result<f64> {
    check_cell(cfg, l)?;
    let ok = match class {
        UserClass::FullDuplex => k < cfg.fd_users,
        UserClass::HalfDuplex => k >= cfg.fd_users && k < cfg.k_d(),
    };
    if !ok {
        return Err(Error::InvalidArgument(format!(
            "downlink user {k} is not a {class} user (K_f = {}, K_d = {})",
            cfg.fd_users,
            cfg.k_d()
        )));
    }
    let g = real.g_d(l, l).column(k);
    let norm_sq = g.norm_squared();
    if norm_sq == 0.0 {
        return Err(Error::ZeroChannel(format!("downlink user {k} of cell {l}")));
    }
    let mut multiuser = 0.0;
    for j in 0..cfg.cells {
        let c = factors.dl_scale(j, Csi::Perfect);
        let gk = real.g_d(j, l).column(k);
        let own = real.g_d(j, j);
        for i in 0..cfg.k_d() {
            if (j, i) != (l, k) {
                multiuser += c * gk.dot(&own.column(i).map(|z: Complex64| z.conj())).norm_sqr();
            }
        }
    }
    let mut ue_ue = 0.0;
    for j in 0..cfg.cells {
        let f = real.f(l, j);
        for n in 0..cfg.k_u() {
            ue_ue += f[(k, n)].norm_sqr();
        }
    }
    if class == UserClass::FullDuplex {
        ue_ue -= real.f(l, l)[(k, k)].norm_sqr();
    }
    let terms = DlTerms {
        desired: factors.dl_scale(l, Csi::Perfect) * norm_sq * norm_sq,
        gain_uncertainty: 0.0,
        multiuser,
        ue_ue: (cfg.uplink_power * ue_ue).max(0.0),
    };
    Ok(terms.sinr(dl_noise_fd(profile, cfg, l, k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::realize_channels;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lone_uplink_user_sees_only_noise() {
        let p = LargeScaleProfile::filled(1, 0, 1, 0, 1.0).unwrap();
        let cfg = SystemConfig::new(1, 6, 0, 1, 0).with_powers(2.0, 1.0, 1.0).with_noise(0.5);
        let f = PerCellFactors::new(&p, &cfg).unwrap();
        let r = realize_channels(&p, 6, &mut ChaCha8Rng::seed_from_u64(0));
        let s = ul_sinr_fd_perfect(&r, &p, &cfg, &f, 0, 0).unwrap();
        let want = 2.0 * r.g_u(0, 0).column(0).norm_squared() / 0.5;
        assert!((s / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lone_downlink_user_sees_only_noise() {
        let p = LargeScaleProfile::filled(1, 0, 0, 1, 1.0).unwrap();
        let cfg = SystemConfig::new(1, 6, 0, 0, 1).with_powers(1.0, 3.0, 1.0).with_noise(1.0);
        let f = PerCellFactors::new(&p, &cfg).unwrap();
        let r = realize_channels(&p, 6, &mut ChaCha8Rng::seed_from_u64(1));
        let s = dl_sinr_fd_perfect(&r, &p, &cfg, &f, 0, 0, UserClass::HalfDuplex).unwrap();
        let n2 = r.g_d(0, 0).column(0).norm_squared();
        let want = 3.0 / 6.0 * n2 * n2;
        assert!((s / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_radio_cancels_self_interference() {
        let mut p = LargeScaleProfile::filled(1, 1, 1, 1, 1.0).unwrap();
        p.set_beta_i(0, 0, 0, 0, 5.0);
        let cfg = SystemConfig::new(1, 6, 1, 0, 0).with_kappa(0.0);
        let f = PerCellFactors::new(&p, &cfg).unwrap();
        let r = realize_channels(&p, 6, &mut ChaCha8Rng::seed_from_u64(2));
        let s = dl_sinr_fd_perfect(&r, &p, &cfg, &f, 0, 0, UserClass::FullDuplex).unwrap();
        let n2 = r.g_d(0, 0).column(0).norm_squared();
        assert!((s / (n2 * n2 / 6.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn class_mismatch_is_rejected() {
        let p = LargeScaleProfile::filled(1, 1, 1, 2, 1.0).unwrap();
        let cfg = SystemConfig::new(1, 4, 1, 0, 1);
        let f = PerCellFactors::new(&p, &cfg).unwrap();
        let r = realize_channels(&p, 4, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(dl_sinr_fd_perfect(&r, &p, &cfg, &f, 0, 0, UserClass::HalfDuplex).is_err());
        assert!(dl_sinr_fd_perfect(&r, &p, &cfg, &f, 0, 1, UserClass::FullDuplex).is_err());
        assert!(dl_sinr_fd_perfect(&r, &p, &cfg, &f, 0, 2, UserClass::HalfDuplex).is_err());
        assert!(dl_sinr_fd_perfect(&r, &p, &cfg, &f, 0, 1, UserClass::HalfDuplex).is_ok());
    }

    #[test]
    fn orthogonal_interferer_adds_nothing() {
        let p = LargeScaleProfile::filled(1, 0, 2, 0, 1.0).unwrap();
        let cfg = SystemConfig::new(1, 2, 0, 2, 0);
        let f = PerCellFactors::new(&p, &cfg).unwrap();
        let mut g = crate::CMatrix::zeros(2, 2);
        g[(0, 0)] = Complex64::new(1.0, 0.0);
        g[(1, 1)] = Complex64::new(1.0, 0.0);
        let r = ChannelRealization::from_parts(
            1,
            2,
            crate::channel::Links {
                g_u: vec![g],
                g_d: vec![crate::CMatrix::zeros(2, 0)],
            },
            vec![crate::CMatrix::zeros(0, 0)],
            vec![crate::CMatrix::zeros(0, 2)],
        );
        let s = ul_sinr_fd_perfect(&r, &p, &cfg, &f, 0, 0).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_channel_guard() {
        let mut p = LargeScaleProfile::filled(1, 0, 1, 0, 1.0).unwrap();
        p.set_beta_u(0, 0, 0, 0.0);
        let cfg = SystemConfig::new(1, 3, 0, 1, 0);
        let f = PerCellFactors::new(&LargeScaleProfile::filled(1, 0, 1, 0, 1.0).unwrap(), &cfg).unwrap();
        let r = realize_channels(&p, 3, &mut ChaCha8Rng::seed_from_u64(5));
        assert!(matches!(ul_sinr_fd_perfect(&r, &p, &cfg, &f, 0, 0), Err(Error::ZeroChannel(_))));
    }
}
