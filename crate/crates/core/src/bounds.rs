//! Closed-form rate bounds, their homogeneous specializations, large-antenna
//! limits, full-duplex gains and the gain / antenna-reduction tradeoff.
//!
//! [`ClosedForms`] exposes every bound term by term. The full-duplex
//! perfect-CSI bounds come from Jensen's inequality with Wishart inverse
//! moments; the imperfect-CSI downlink expression is exact given the
//! average-gain decoding model. TDD analogues drop the full-duplex-only
//! terms (BS-BS, UE-UE, residual self-interference) and carry the 1/2 time
//! share.

use serde::{Deserialize, Serialize};

use crate::config::{HomogeneousConfig, Link, PowerScalingSchedule, Purpose, ScalingLaw, SystemConfig};
use crate::error::{Error, Result};
use crate::estimation::EstimateStatistics;
use crate::profile::{expand_homogeneous, LargeScaleProfile};
use crate::rates::{check_inputs, overheads, user_class, Csi, PerCellFactors, RateReport, System, UserRate};

/// Perfect-CSI uplink bound terms; SINR = `numerator / (i_up + noise)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfectUplinkTerms {
    /// `P_u (M - 1) beta_u,jjn`.
    pub numerator: f64,
    /// Multiuser interference plus (full duplex) BS-BS interference.
    pub i_up: f64,
    /// `sigma^2` plus (full duplex) `kappa P_d beta_b,jj`.
    pub noise: f64,
}

impl PerfectUplinkTerms {
    pub fn sinr(&self) -> f64 {
        self.numerator / (self.i_up + self.noise)
    }
}

/// Perfect-CSI downlink bound terms; SINR = `numerator / (i_down + fd_correction + noise)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfectDownlinkTerms {
    /// `eta_l P_d (M - 1)(M - 2) beta_d,llk^2`.
    pub numerator: f64,
    pub i_down: f64,
    /// `(kappa - 1) P_u beta_I,lklk` for a full-duplex user, else zero.
    pub fd_correction: f64,
    pub noise: f64,
}

impl PerfectDownlinkTerms {
    pub fn sinr(&self) -> f64 {
        self.numerator / (self.i_down + self.fd_correction + self.noise)
    }
}

/// Imperfect-CSI uplink bound terms; SINR = `numerator / (own_error + i_up_tilde + n_tilde)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImperfectUplinkTerms {
    /// `P_tr P_u (M - 1) beta_u,jjn^2`.
    pub numerator: f64,
    /// `P_u beta_u,jjn (sigma^2 + P_tr sum_{l != j} beta_u,jln)`.
    pub own_error: f64,
    /// Pilot-contaminated interference `I~_up`.
    pub i_up_tilde: f64,
    /// `N~ = lambda_u,jn (...)`.
    pub n_tilde: f64,
}

impl ImperfectUplinkTerms {
    pub fn sinr(&self) -> f64 {
        self.numerator / (self.own_error + self.i_up_tilde + self.n_tilde)
    }
}

/// The five summands of `I~_down(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DownlinkInterferenceTilde {
    /// `eta~_l P_d beta_d,llk^3 / lambda_d,lk`.
    pub gain_variance: f64,
    /// Coherent pilot-contamination term with the `(M + 1)` factor.
    pub pilot_contamination: f64,
    /// Non-coherent part of other cells' same-pilot streams.
    pub contaminated_estimation: f64,
    /// Streams for other users of every cell.
    pub multiuser: f64,
    /// `sum_j sum_n P_u beta_I,lkjn` (full duplex only).
    pub ue_ue: f64,
}

impl DownlinkInterferenceTilde {
    pub fn total(&self) -> f64 {
        self.gain_variance + self.pilot_contamination + self.contaminated_estimation + self.multiuser + self.ue_ue
    }
}

/// Imperfect-CSI downlink terms; SINR = `numerator / (lambda_sq (I~_down + fd_correction + noise))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImperfectDownlinkTerms {
    /// `eta~_l P_tr P_d M beta_d,llk^4`.
    pub numerator: f64,
    /// `lambda_d,lk^2`.
    pub lambda_sq: f64,
    pub i_down_tilde: DownlinkInterferenceTilde,
    pub fd_correction: f64,
    pub noise: f64,
}

impl ImperfectDownlinkTerms {
    pub fn sinr(&self) -> f64 {
        self.numerator / (self.lambda_sq * (self.i_down_tilde.total() + self.fd_correction + self.noise))
    }
}

/// Closed-form evaluator bound to one profile and configuration.
#[derive(Debug, Clone)]
pub struct ClosedForms<'a> {
    profile: &'a LargeScaleProfile,
    cfg: &'a SystemConfig,
    stats: EstimateStatistics,
    factors: PerCellFactors,
}

impl<'a> ClosedForms<'a> {
    /// Fails if `M < 3` or the inputs are inconsistent.
    pub fn new(profile: &'a LargeScaleProfile, cfg: &'a SystemConfig) -> Result<Self> {
        cfg.ensure_valid(Purpose::ClosedForm)?;
        check_inputs(profile, cfg)?;
        let stats = EstimateStatistics::new(profile, cfg)?;
        let factors = PerCellFactors::with_stats(profile, cfg, &stats)?;
        Ok(ClosedForms {
            profile,
            cfg,
            stats,
            factors,
        })
    }

    fn m(&self) -> f64 {
        self.cfg.antennas as f64
    }

    /// Whether BS transmissions interfere with uplink reception.
    fn bs_transmits(&self, system: System) -> bool {
        system == System::FullDuplex && self.cfg.k_d() > 0
    }

    fn check(&self, link: Link, cell: usize, user: usize) -> Result<()> {
        if cell >= self.cfg.cells || user >= self.cfg.users(link) {
            return Err(Error::IndexOutOfRange(format!("{link} user {user} of cell {cell}")));
        }
        Ok(())
    }

    fn ue_ue_sum(&self, system: System, l: usize, k: usize) -> f64 {
        if system != System::FullDuplex {
            return 0.0;
        }
        let p = self.profile;
        let s: f64 = (0..self.cfg.cells)
            .flat_map(|j| (0..self.cfg.k_u()).map(move |n| p.beta_i(l, k, j, n)))
            .sum();
        self.cfg.uplink_power * s
    }

    fn fd_correction(&self, system: System, l: usize, k: usize) -> f64 {
        if system == System::FullDuplex && self.cfg.is_fd_user(k) {
            (self.cfg.kappa - 1.0) * self.cfg.uplink_power * self.profile.beta_i(l, k, l, k)
        } else {
            0.0
        }
    }

    fn bs_bs_power(&self, system: System, j: usize) -> (f64, f64) {
        if !self.bs_transmits(system) {
            return (0.0, 0.0);
        }
        let p_d = self.cfg.downlink_power;
        let cross: f64 = (0..self.cfg.cells).filter(|&l| l != j).map(|l| self.profile.beta_b(j, l)).sum();
        (p_d * cross, self.cfg.kappa * p_d * self.profile.beta_b(j, j))
    }

    pub fn perfect_uplink(&self, system: System, j: usize, n: usize) -> Result<PerfectUplinkTerms> {
        self.check(Link::Uplink, j, n)?;
        let (p, cfg) = (self.profile, self.cfg);
        let mut multiuser = 0.0;
        for l in 0..cfg.cells {
            for m in 0..cfg.k_u() {
                if (l, m) != (j, n) {
                    multiuser += p.beta_u(j, l, m);
                }
            }
        }
        let (bs_bs, residual) = self.bs_bs_power(system, j);
        Ok(PerfectUplinkTerms {
            numerator: cfg.uplink_power * (self.m() - 1.0) * p.beta_u(j, j, n),
            i_up: cfg.uplink_power * multiuser + bs_bs,
            noise: cfg.noise_power + residual,
        })
    }

    pub fn perfect_downlink(&self, system: System, l: usize, k: usize) -> Result<PerfectDownlinkTerms> {
        self.check(Link::Downlink, l, k)?;
        let (p, cfg, m) = (self.profile, self.cfg, self.m());
        let (eta, p_d) = (self.factors.eta[l], cfg.downlink_power);
        let b = p.beta_d(l, l, k);
        let intra: f64 = (0..cfg.k_d())
            .filter(|&i| i != k)
            .map(|i| eta * p_d * b * p.beta_d(l, l, i) * (m - 2.0))
            .sum();
        let inter: f64 = (0..cfg.cells).filter(|&j| j != l).map(|j| p_d * p.beta_d(j, l, k)).sum();
        Ok(PerfectDownlinkTerms {
            numerator: eta * p_d * (m - 1.0) * (m - 2.0) * b * b,
            i_down: intra + inter + self.ue_ue_sum(system, l, k),
            fd_correction: self.fd_correction(system, l, k),
            noise: cfg.ue_noise_power,
        })
    }

    pub fn imperfect_uplink(&self, system: System, j: usize, n: usize) -> Result<ImperfectUplinkTerms> {
        self.check(Link::Uplink, j, n)?;
        let (p, cfg, m) = (self.profile, self.cfg, self.m());
        let (p_u, p_tr, sigma2) = (cfg.uplink_power, cfg.training_power, cfg.noise_power);
        let lambda = self.stats.get(Link::Uplink, j, n).lambda;
        let b = p.beta_u(j, j, n);
        let others: f64 = (0..cfg.cells).filter(|&l| l != j).map(|l| p.beta_u(j, l, n)).sum();

        let mut i_up_tilde = 0.0;
        for l in (0..cfg.cells).filter(|&l| l != j) {
            let bl = p.beta_u(j, l, n);
            let rest: f64 = (0..cfg.cells).filter(|&l1| l1 != l).map(|l1| p.beta_u(j, l1, n)).sum();
            i_up_tilde += (m + 1.0) * bl * bl + rest * bl + bl * sigma2 / p_tr;
        }
        i_up_tilde *= p_tr * p_u;

        let mut multiuser = 0.0;
        for l in 0..cfg.cells {
            for mm in (0..cfg.k_u()).filter(|&mm| mm != n) {
                multiuser += p.beta_u(j, l, mm);
            }
        }
        let (bs_bs, residual) = self.bs_bs_power(system, j);
        Ok(ImperfectUplinkTerms {
            numerator: p_tr * p_u * (m - 1.0) * b * b,
            own_error: p_u * b * (sigma2 + p_tr * others),
            i_up_tilde,
            n_tilde: lambda * (bs_bs + p_u * multiuser + sigma2 + residual),
        })
    }

    pub fn imperfect_downlink(&self, system: System, l: usize, k: usize) -> Result<ImperfectDownlinkTerms> {
        self.check(Link::Downlink, l, k)?;
        let (p, cfg, m) = (self.profile, self.cfg, self.m());
        let (p_d, p_tr, sigma2) = (cfg.downlink_power, cfg.training_power, cfg.noise_power);
        let eta = &self.factors.eta_tilde;
        let lambda = |j: usize, i: usize| self.stats.get(Link::Downlink, j, i).lambda;
        let b = p.beta_d(l, l, k);

        let mut contamination = 0.0;
        let mut contaminated_estimation = 0.0;
        for j in (0..cfg.cells).filter(|&j| j != l) {
            let (bjj, bjl, lam) = (p.beta_d(j, j, k), p.beta_d(j, l, k), lambda(j, k));
            contamination += eta[j] * p_tr * p_d * (m + 1.0) * bjl * bjl * bjj * bjj / (lam * lam);
            let rest: f64 = (0..cfg.cells).filter(|&l1| l1 != l).map(|l1| p.beta_d(j, l1, k)).sum();
            contaminated_estimation += eta[j] * p_d * bjj * bjj * (sigma2 + p_tr * rest) * bjl / (lam * lam);
        }
        let mut multiuser = 0.0;
        for (j, eta_j) in eta.iter().enumerate() {
            for i in (0..cfg.k_d()).filter(|&i| i != k) {
                let bji = p.beta_d(j, j, i);
                multiuser += eta_j * p_d * bji * bji * p.beta_d(j, l, k) / lambda(j, i);
            }
        }
        let lam = lambda(l, k);
        Ok(ImperfectDownlinkTerms {
            numerator: eta[l] * p_tr * p_d * m * b.powi(4),
            lambda_sq: lam * lam,
            i_down_tilde: DownlinkInterferenceTilde {
                gain_variance: eta[l] * p_d * b.powi(3) / lam,
                pilot_contamination: contamination,
                contaminated_estimation,
                multiuser,
                ue_ue: self.ue_ue_sum(system, l, k),
            },
            fd_correction: self.fd_correction(system, l, k),
            noise: cfg.ue_noise_power,
        })
    }

    fn sinr(&self, system: System, csi: Csi, link: Link, cell: usize, user: usize) -> Result<f64> {
        Ok(match (csi, link) {
            (Csi::Perfect, Link::Uplink) => self.perfect_uplink(system, cell, user)?.sinr(),
            (Csi::Perfect, Link::Downlink) => self.perfect_downlink(system, cell, user)?.sinr(),
            (Csi::Imperfect, Link::Uplink) => self.imperfect_uplink(system, cell, user)?.sinr(),
            (Csi::Imperfect, Link::Downlink) => self.imperfect_downlink(system, cell, user)?.sinr(),
        })
    }

    /// Per-user closed-form rates of `system` under `csi`.
    pub fn report(&self, system: System, csi: Csi) -> Result<RateReport> {
        let share = match system {
            System::FullDuplex => 1.0,
            System::Tdd => 0.5,
        };
        let per_link = |link: Link| -> Result<Vec<UserRate>> {
            let mut out = Vec::with_capacity(self.cfg.cells * self.cfg.users(link));
            for cell in 0..self.cfg.cells {
                for user in 0..self.cfg.users(link) {
                    let sinr = self.sinr(system, csi, link, cell, user)?;
                    out.push(UserRate {
                        link,
                        cell,
                        user,
                        class: user_class(self.cfg, user),
                        rate: share * (1.0 + sinr).log2(),
                        stderr: 0.0,
                    });
                }
            }
            Ok(out)
        };
        let ul = per_link(Link::Uplink)?;
        let dl = per_link(Link::Downlink)?;
        let (ul_overhead, dl_overhead) = overheads(self.cfg, system, csi);
        Ok(RateReport {
            system,
            csi,
            ul,
            dl,
            ul_overhead,
            dl_overhead,
            ul_sum_stderr: 0.0,
            dl_sum_stderr: 0.0,
            n_trials: 0,
        })
    }
}

/// Full-duplex perfect-CSI lower bounds for every user.
pub fn prop1_rates(profile: &LargeScaleProfile, cfg: &SystemConfig) -> Result<RateReport> {
    ClosedForms::new(profile, cfg)?.report(System::FullDuplex, Csi::Perfect)
}

/// Full-duplex imperfect-CSI achievable rates for every user.
pub fn prop2_rates(profile: &LargeScaleProfile, cfg: &SystemConfig) -> Result<RateReport> {
    ClosedForms::new(profile, cfg)?.report(System::FullDuplex, Csi::Imperfect)
}

/// TDD counterparts of the full-duplex closed forms.
pub fn tdd_closed_form_rates(profile: &LargeScaleProfile, cfg: &SystemConfig, csi: Csi) -> Result<RateReport> {
    ClosedForms::new(profile, cfg)?.report(System::Tdd, csi)
}

/// Intermediate quantities of the homogeneous closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousTerms {
    /// `1 + (L - 1) beta`.
    pub l_bar: f64,
    pub v: f64,
    pub j: f64,
    pub u1: f64,
    pub u2: f64,
}

impl HomogeneousTerms {
    pub fn new(h: &HomogeneousConfig) -> Self {
        let (l, k, m) = (h.cells as f64, h.users as f64, h.antennas as f64);
        let (p_u, p_d, p_tr, kappa, beta) = (h.uplink_power, h.downlink_power, h.training_power, h.kappa, h.beta);
        let l_bar = 1.0 + (l - 1.0) * beta;
        HomogeneousTerms {
            l_bar,
            v: m * k * (k - 1.0 + (l - 1.0) * k * beta) * p_u,
            j: p_d * (1.0 + p_tr * l_bar) * (l_bar - 1.0)
                + p_u * k * l_bar
                + p_tr * (1.0 + kappa * p_d) * l_bar
                + kappa * p_d
                + 1.0,
            u1: p_d * (1.0 + (k - 1.0) * l_bar)
                + k * (p_u * (k - 1.0) + p_u * (l_bar - 1.0) * k + 1.0 + kappa * p_u),
            u2: p_tr * p_d * (m * beta + l_bar) + p_d,
        }
    }
}

/// Per-cell spectral efficiency (bits/s/Hz/cell).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSe {
    pub ul: f64,
    pub dl: f64,
}

impl CellSe {
    pub fn get(&self, link: Link) -> f64 {
        match link {
            Link::Uplink => self.ul,
            Link::Downlink => self.dl,
        }
    }
}

/// Full-duplex per-cell spectral efficiency of a homogeneous all-full-duplex
/// network with unit noise. The imperfect-CSI values include the pilot overhead.
pub fn homogeneous_rates(h: &HomogeneousConfig, csi: Csi) -> Result<CellSe> {
    h.validate()?;
    if h.antennas < 3 {
        return Err(Error::InvalidConfig(vec![crate::config::Violation::new(
            "antennas",
            "M ≥ 3 required for closed-form bounds",
        )]));
    }
    let t = HomogeneousTerms::new(h);
    let (l, k, m) = (h.cells as f64, h.users as f64, h.antennas as f64);
    let (p_u, p_d, p_tr, kappa, beta) = (h.uplink_power, h.downlink_power, h.training_power, h.kappa, h.beta);
    Ok(match csi {
        Csi::Perfect => {
            let ul = p_u * (m - 1.0) / (p_u * (k - 1.0) + (l - 1.0) * beta * (p_u * k + p_d) + kappa * p_d + 1.0);
            let dl = p_d * (m - 1.0) * (m - 2.0)
                / (p_d * (k - 1.0) * (m - 2.0) + m * k * (l - 1.0) * beta * p_d + t.v + m * k * (kappa * p_u + 1.0));
            CellSe {
                ul: k * (1.0 + ul).log2(),
                dl: k * (1.0 + dl).log2(),
            }
        }
        Csi::Imperfect => {
            let tau = h.pilot_len.unwrap_or(h.users) as f64;
            let pre = k * (h.coherence as f64 - tau) / h.coherence as f64;
            let ul = p_tr * p_u * (m - 1.0) / (p_tr * p_u * (k * t.l_bar * t.l_bar - 1.0 + beta * (t.l_bar - 1.0) * m) + t.j);
            let dl = p_tr * p_d * m / ((1.0 + p_tr * t.l_bar) * t.u1 + (t.l_bar - 1.0) * t.u2);
            CellSe {
                ul: pre * (1.0 + ul).log2(),
                dl: pre * (1.0 + dl).log2(),
            }
        }
    })
}

fn csi_for(law: ScalingLaw) -> Result<Csi> {
    match law {
        ScalingLaw::InverseM => Ok(Csi::Perfect),
        ScalingLaw::InverseSqrtM => Ok(Csi::Imperfect),
        ScalingLaw::None => Err(Error::InvalidArgument(
            "large-antenna limits need a 1/M (perfect CSI) or 1/sqrt(M) (imperfect CSI) schedule".into(),
        )),
    }
}

/// Full-duplex per-user rates as `M -> infinity` under `schedule`. The
/// scaling law selects the CSI model: `1/M` for perfect, `1/sqrt(M)` for
/// imperfect. TDD limits are half of these.
pub fn asymptotic_rates(profile: &LargeScaleProfile, cfg: &SystemConfig, schedule: &PowerScalingSchedule) -> Result<RateReport> {
    let csi = csi_for(schedule.law)?;
    check_inputs(profile, cfg)?;
    let p = profile;
    let (s_bs, s_ue) = (cfg.noise_power, cfg.ue_noise_power);
    let (e_u, e_d, e_tr) = (schedule.uplink_energy, schedule.downlink_energy, schedule.training_energy);
    let z = |l: usize| (0..cfg.k_d()).map(|i| p.beta_d(l, l, i).powi(2)).sum::<f64>() / s_bs;

    let mut ul = Vec::new();
    for j in 0..cfg.cells {
        for n in 0..cfg.k_u() {
            let b = p.beta_u(j, j, n);
            let sinr = match csi {
                Csi::Perfect => b * e_u / s_bs,
                Csi::Imperfect => {
                    let cont: f64 = (0..cfg.cells).filter(|&l| l != j).map(|l| p.beta_u(j, l, n).powi(2)).sum();
                    e_tr * e_u * b * b / (e_tr * e_u * cont + s_bs * s_bs)
                }
            };
            ul.push(UserRate {
                link: Link::Uplink,
                cell: j,
                user: n,
                class: user_class(cfg, n),
                rate: (1.0 + sinr).log2(),
                stderr: 0.0,
            });
        }
    }
    let mut dl = Vec::new();
    for l in 0..cfg.cells {
        for k in 0..cfg.k_d() {
            let b = p.beta_d(l, l, k);
            let sinr = match csi {
                Csi::Perfect => {
                    let sum: f64 = (0..cfg.k_d()).map(|i| p.beta_d(l, l, i)).sum();
                    b * b * e_d / (sum * s_ue)
                }
                Csi::Imperfect => {
                    let cont: f64 = (0..cfg.cells)
                        .filter(|&j| j != l)
                        .map(|j| e_tr * e_d * p.beta_d(j, j, k).powi(2) * p.beta_d(j, l, k).powi(2) / z(j))
                        .sum();
                    e_tr * e_d * b.powi(4) / (z(l) * (cont + s_bs * s_bs * s_ue))
                }
            };
            dl.push(UserRate {
                link: Link::Downlink,
                cell: l,
                user: k,
                class: user_class(cfg, k),
                rate: (1.0 + sinr).log2(),
                stderr: 0.0,
            });
        }
    }
    let (ul_overhead, dl_overhead) = overheads(cfg, System::FullDuplex, csi);
    Ok(RateReport {
        system: System::FullDuplex,
        csi,
        ul,
        dl,
        ul_overhead,
        dl_overhead,
        ul_sum_stderr: 0.0,
        dl_sum_stderr: 0.0,
        n_trials: 0,
    })
}

/// Limiting full-duplex over TDD gains `(uplink, downlink)`: 2 with perfect
/// CSI, `2 (T - tau) / (T - tau_u)` and `2 (T - tau) / (T - tau_d)` with imperfect CSI.
pub fn asymptotic_gain(cfg: &SystemConfig, csi: Csi) -> (f64, f64) {
    match csi {
        Csi::Perfect => (2.0, 2.0),
        Csi::Imperfect => {
            let fd = cfg.fd_data_fraction();
            (
                2.0 * fd / cfg.tdd_data_fraction(Link::Uplink),
                2.0 * fd / cfg.tdd_data_fraction(Link::Downlink),
            )
        }
    }
}

/// Ratio of full-duplex to TDD network spectral efficiency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub csi: Csi,
    pub antennas: Option<usize>,
    pub scaling: Option<PowerScalingSchedule>,
    /// `None` when the system has no uplink users.
    pub gain_ul: Option<f64>,
    pub gain_dl: Option<f64>,
    pub fd_se_ul: f64,
    pub fd_se_dl: f64,
    pub tdd_se_ul: f64,
    pub tdd_se_dl: f64,
}

impl GainReport {
    pub fn gain(&self, link: Link) -> Option<f64> {
        match link {
            Link::Uplink => self.gain_ul,
            Link::Downlink => self.gain_dl,
        }
    }

    pub fn at(mut self, antennas: usize, scaling: Option<PowerScalingSchedule>) -> Self {
        self.antennas = Some(antennas);
        self.scaling = scaling;
        self
    }
}

/// Gains of `fd` over `tdd`, both summed over the network with their overheads.
pub fn fd_gain(fd: &RateReport, tdd: &RateReport) -> Result<GainReport> {
    if fd.system != System::FullDuplex || tdd.system != System::Tdd {
        return Err(Error::InvalidArgument("fd_gain expects a full-duplex and a TDD report".into()));
    }
    if fd.csi != tdd.csi {
        return Err(Error::InvalidArgument("reports use different CSI models".into()));
    }
    let mut gains = [None, None];
    for (slot, link) in [Link::Uplink, Link::Downlink].into_iter().enumerate() {
        let (a, b) = (fd.rates(link), tdd.rates(link));
        let same = a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x.cell, x.user) == (y.cell, y.user));
        if !same {
            return Err(Error::InvalidArgument(format!("{link} user populations differ")));
        }
        if a.is_empty() {
            continue;
        }
        let t = tdd.sum_se(link);
        if t.is_nan() || t <= 0.0 {
            return Err(Error::InvalidArgument(format!("TDD {link} spectral efficiency is zero")));
        }
        gains[slot] = Some(fd.sum_se(link) / t);
    }
    Ok(GainReport {
        csi: fd.csi,
        antennas: None,
        scaling: None,
        gain_ul: gains[0],
        gain_dl: gains[1],
        fd_se_ul: fd.sum_se(Link::Uplink),
        fd_se_dl: fd.sum_se(Link::Downlink),
        tdd_se_ul: tdd.sum_se(Link::Uplink),
        tdd_se_dl: tdd.sum_se(Link::Downlink),
    })
}

/// Exact `(E[tr W^-1], E[tr W^-2])` for a central complex Wishart matrix
/// `W ~ W_m(n, I)`. Requires `n > m + 1`.
pub fn wishart_inverse_moments(m: usize, n: usize) -> Result<(f64, f64)> {
    if m == 0 || n <= m + 1 {
        return Err(Error::InvalidArgument(format!(
            "Wishart inverse moments need m >= 1 and n > m + 1 (got m = {m}, n = {n})"
        )));
    }
    let (m, n) = (m as f64, n as f64);
    let d = n - m;
    Ok((m / d, m * n / (d * d * d - d)))
}

/// `E[tr W^-1] = m / (n - m)`; requires only `n > m`.
pub fn wishart_trace_inverse_mean(m: usize, n: usize) -> Result<f64> {
    if m == 0 || n <= m {
        return Err(Error::InvalidArgument(format!("need m >= 1 and n > m (got m = {m}, n = {n})")));
    }
    Ok(m as f64 / (n - m) as f64)
}

/// One point of the spectral-efficiency gain versus antenna-reduction tradeoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub link: Link,
    pub m_tdd: usize,
    /// Smallest full-duplex array reaching the target; `None` if unreachable.
    pub m_fd: Option<usize>,
    /// Target full-duplex over TDD spectral-efficiency ratio.
    pub se_gain: f64,
    /// `m_tdd / m_fd`.
    pub antenna_reduction: Option<f64>,
}

pub const TRADEOFF_MIN_ANTENNAS: usize = 3;
pub const TRADEOFF_MAX_ANTENNAS: usize = 10_000_000;

/// Relative slack within which an attained spectral efficiency meets a target.
const SE_TIE_TOLERANCE: f64 = 1e-12;

fn fd_cell_se(h: &HomogeneousConfig, m: usize, csi: Csi, link: Link) -> Result<f64> {
    Ok(homogeneous_rates(&h.with_antennas(m), csi)?.get(link))
}

fn check_monotone(h: &HomogeneousConfig, csi: Csi, link: Link) -> Result<()> {
    let mut grid = vec![TRADEOFF_MIN_ANTENNAS];
    let mut m = 10;
    while m <= TRADEOFF_MAX_ANTENNAS {
        grid.push(m);
        m *= 10;
    }
    let mut prev = f64::NEG_INFINITY;
    for m in grid {
        let se = fd_cell_se(h, m, csi, link)?;
        if se < prev * (1.0 - SE_TIE_TOLERANCE) {
            return Err(Error::InvalidArgument(format!(
                "full-duplex {link} spectral efficiency decreases in M near M = {m}"
            )));
        }
        prev = se;
    }
    Ok(())
}

/// Smallest `M` in the search range whose full-duplex per-cell SE reaches `target`.
fn min_antennas(h: &HomogeneousConfig, csi: Csi, link: Link, target: f64) -> Result<Option<usize>> {
    let reached = |m: usize| -> Result<bool> { Ok(fd_cell_se(h, m, csi, link)? >= target * (1.0 - SE_TIE_TOLERANCE)) };
    let (mut lo, mut hi) = (TRADEOFF_MIN_ANTENNAS, TRADEOFF_MAX_ANTENNAS);
    if !reached(hi)? {
        return Ok(None);
    }
    if reached(lo)? {
        return Ok(Some(lo));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reached(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// For each TDD array size and target gain, the smallest full-duplex array
/// whose per-cell spectral efficiency is at least `gain` times the TDD one.
/// `tdd_se(M)` supplies the TDD per-cell spectral efficiency.
pub fn antenna_reduction_curve<F>(
    h: &HomogeneousConfig,
    m_tdd_list: &[usize],
    gains: &[f64],
    csi: Csi,
    mut tdd_se: F,
) -> Result<Vec<TradeoffPoint>>
where
    F: FnMut(usize) -> Result<CellSe>,
{
    if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(Error::InvalidArgument(format!("target gains must be finite and > 0 (got {g})")));
    }
    if let Some(m) = m_tdd_list.iter().find(|&&m| m < TRADEOFF_MIN_ANTENNAS) {
        return Err(Error::InvalidArgument(format!("TDD antenna counts must be >= 3 (got {m})")));
    }
    for link in [Link::Uplink, Link::Downlink] {
        check_monotone(h, csi, link)?;
    }
    let mut out = Vec::new();
    for &m_tdd in m_tdd_list {
        let tdd = tdd_se(m_tdd)?;
        for link in [Link::Uplink, Link::Downlink] {
            for &g in gains {
                let m_fd = min_antennas(h, csi, link, g * tdd.get(link))?;
                out.push(TradeoffPoint {
                    link,
                    m_tdd,
                    m_fd,
                    se_gain: g,
                    antenna_reduction: m_fd.map(|m| m_tdd as f64 / m as f64),
                });
            }
        }
    }
    Ok(out)
}

/// TDD per-cell spectral efficiency of the homogeneous network from the
/// TDD closed forms.
pub fn tdd_homogeneous_se(h: &HomogeneousConfig, antennas: usize, csi: Csi) -> Result<CellSe> {
    let h = h.with_antennas(antennas);
    let profile = expand_homogeneous(&h)?;
    let cfg = h.system_config();
    let r = tdd_closed_form_rates(&profile, &cfg, csi)?;
    Ok(CellSe {
        ul: r.mean_se_per_cell(Link::Uplink, cfg.cells),
        dl: r.mean_se_per_cell(Link::Downlink, cfg.cells),
    })
}
