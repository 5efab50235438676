//! Small-cell evaluation scenario: parameters and per-drop large-scale profiles.
//!
//! Defaults describe twelve full-duplex small-cell BSs in a 300 m hexagon,
//! each serving five half-duplex uplink and five half-duplex downlink UEs
//! within 40 m. The log-distance pathloss constants are calibration inputs;
//! the shipped values follow common small-cell (pico) evaluation models and
//! can be overridden from a scenario file.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::{compose_large_scale, LinkClass, PathlossModel};
use crate::config::{units, SystemConfig, Violation};
use crate::error::{Error, Result};
use crate::profile::LargeScaleProfile;
use crate::topology::{distance, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub hex_radius_m: f64,
    pub n_bs: usize,
    pub ue_drop_radius_m: f64,
    pub n_ul_hd: usize,
    pub n_dl_hd: usize,
    pub bs_power_dbm: f64,
    pub ue_power_dbm: f64,
    /// Pilot power; the UE data power when absent.
    pub training_power_dbm: Option<f64>,
    pub bs_antenna_gain_dbi: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_bs_db: f64,
    pub noise_figure_ue_db: f64,
    pub kappa_db_list: Vec<f64>,
    pub m_list: Vec<usize>,
    pub min_dist_bs_bs_m: f64,
    pub min_dist_bs_ue_m: f64,
    pub min_dist_ue_ue_m: f64,
    pub si_loss_db: f64,
    pub bandwidth_hz: f64,
    pub coherence: usize,
    pub bs_ue: PathlossModel,
    pub bs_bs: PathlossModel,
    pub ue_ue: PathlossModel,
    pub placement_retry_budget: usize,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            hex_radius_m: 300.0,
            n_bs: 12,
            ue_drop_radius_m: 40.0,
            n_ul_hd: 5,
            n_dl_hd: 5,
            bs_power_dbm: 24.0,
            ue_power_dbm: 23.0,
            training_power_dbm: None,
            bs_antenna_gain_dbi: 5.0,
            noise_density_dbm_hz: -174.0,
            noise_figure_bs_db: 9.0,
            noise_figure_ue_db: 5.0,
            kappa_db_list: vec![-50.0, -60.0, -70.0, -80.0],
            m_list: vec![20, 50, 100, 300, 500],
            min_dist_bs_bs_m: 40.0,
            min_dist_bs_ue_m: 10.0,
            min_dist_ue_ue_m: 3.0,
            si_loss_db: 40.0,
            bandwidth_hz: 2e7,
            coherence: 196,
            bs_ue: PathlossModel {
                class: LinkClass::BsUe,
                intercept_db: 30.6,
                slope_db: 36.7,
                shadowing_std_db: 10.0,
                extra_loss_db: 0.0,
            },
            bs_bs: PathlossModel {
                class: LinkClass::BsBs,
                intercept_db: 49.36,
                slope_db: 40.0,
                shadowing_std_db: 12.0,
                extra_loss_db: 0.0,
            },
            ue_ue: PathlossModel {
                class: LinkClass::UeUe,
                intercept_db: 55.78,
                slope_db: 40.0,
                shadowing_std_db: 6.0,
                extra_loss_db: 0.0,
            },
            placement_retry_budget: 100_000,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let mut bad = |field: &str, rule: &str| {
            v.push(Violation {
                field: field.to_string(),
                rule: rule.to_string(),
            })
        };
        for (name, x) in [
            ("hex_radius_m", self.hex_radius_m),
            ("ue_drop_radius_m", self.ue_drop_radius_m),
            ("bandwidth_hz", self.bandwidth_hz),
        ] {
            if !(x.is_finite() && x > 0.0) {
                bad(name, "must be finite and > 0");
            }
        }
        for (name, x) in [
            ("min_dist_bs_bs_m", self.min_dist_bs_bs_m),
            ("min_dist_bs_ue_m", self.min_dist_bs_ue_m),
            ("min_dist_ue_ue_m", self.min_dist_ue_ue_m),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                bad(name, "must be finite and >= 0");
            }
        }
        if self.n_bs == 0 {
            bad("n_bs", "at least one BS required");
        }
        if self.n_ul_hd + self.n_dl_hd == 0 {
            bad("n_ul_hd", "at least one UE per cell required");
        }
        if self.placement_retry_budget == 0 {
            bad("placement_retry_budget", "must be >= 1");
        }
        for pl in [&self.bs_ue, &self.bs_bs, &self.ue_ue] {
            if !(pl.slope_db >= 0.0 && pl.shadowing_std_db >= 0.0) {
                bad("pathloss", "slope and shadowing std must be >= 0");
            }
        }
        if self.m_list.contains(&0) {
            bad("m_list", "antenna counts must be >= 1");
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    pub fn bs_power_w(&self) -> f64 {
        units::dbm_to_watts(self.bs_power_dbm)
    }

    pub fn ue_power_w(&self) -> f64 {
        units::dbm_to_watts(self.ue_power_dbm)
    }

    pub fn training_power_w(&self) -> f64 {
        units::dbm_to_watts(self.training_power_dbm.unwrap_or(self.ue_power_dbm))
    }

    /// Thermal noise over the channel bandwidth plus the receiver noise figure.
    pub fn noise_power_w(&self, noise_figure_db: f64) -> f64 {
        units::dbm_to_watts(self.noise_density_dbm_hz + 10.0 * self.bandwidth_hz.log10() + noise_figure_db)
    }

    pub fn bs_noise_w(&self) -> f64 {
        self.noise_power_w(self.noise_figure_bs_db)
    }

    pub fn ue_noise_w(&self) -> f64 {
        self.noise_power_w(self.noise_figure_ue_db)
    }

    /// System parameters of one drop with `antennas` BS antennas and the given
    /// dynamic range. All UEs are half-duplex; pilot lengths are minimal.
    pub fn system_config(&self, antennas: usize, kappa_db: f64) -> SystemConfig {
        SystemConfig::new(self.n_bs, antennas, 0, self.n_ul_hd, self.n_dl_hd)
            .with_powers(self.ue_power_w(), self.bs_power_w(), self.training_power_w())
            .with_kappa(units::db_to_linear(kappa_db))
            .with_noises(self.bs_noise_w(), self.ue_noise_w())
            .with_coherence(self.coherence)
    }
}

/// Large-scale gains of one drop. Shadowing is independent log-normal per
/// link; BS-BS shadowing is drawn once per unordered pair. The BS antenna
/// gain is applied once per BS endpoint, and the BS self-interference gain
/// is the fixed isolation loss.
pub fn compose_profile<R: Rng + ?Sized>(
    topo: &Topology,
    params: &ScenarioParams,
    rng: &mut R,
) -> Result<LargeScaleProfile> {
    let l_n = topo.bs_positions.len();
    let (k_u, k_d) = (params.n_ul_hd, params.n_dl_hd);
    let mut p = LargeScaleProfile::filled(l_n, 0, k_u, k_d, 0.0)?;
    let g = params.bs_antenna_gain_dbi;
    let shadow = |pl: &PathlossModel, rng: &mut R| -> Result<f64> {
        if pl.shadowing_std_db == 0.0 {
            return Ok(0.0);
        }
        let n = Normal::new(0.0, pl.shadowing_std_db).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(n.sample(rng))
    };

    for j in 0..l_n {
        let bs = topo.bs_positions[j];
        for l in 0..l_n {
            for n in 0..k_u {
                let d = distance(bs, topo.ul_ue_positions[l][n]);
                let s = shadow(&params.bs_ue, rng)?;
                p.set_beta_u(j, l, n, compose_large_scale(&params.bs_ue, d, s, g)?);
            }
            for k in 0..k_d {
                let d = distance(bs, topo.dl_ue_positions[l][k]);
                let s = shadow(&params.bs_ue, rng)?;
                p.set_beta_d(j, l, k, compose_large_scale(&params.bs_ue, d, s, g)?);
            }
        }
    }

    let si = PathlossModel::self_interference(params.si_loss_db);
    for j in 0..l_n {
        p.set_beta_b(j, j, compose_large_scale(&si, 0.0, 0.0, 0.0)?);
        for l in j + 1..l_n {
            let d = distance(topo.bs_positions[j], topo.bs_positions[l]);
            let s = shadow(&params.bs_bs, rng)?;
            let b = compose_large_scale(&params.bs_bs, d, s, 2.0 * g)?;
            p.set_beta_b(j, l, b);
            p.set_beta_b(l, j, b);
        }
    }

    for l in 0..l_n {
        for k in 0..k_d {
            for j in 0..l_n {
                for n in 0..k_u {
                    let d = distance(topo.dl_ue_positions[l][k], topo.ul_ue_positions[j][n]);
                    let s = shadow(&params.ue_ue, rng)?;
                    p.set_beta_i(l, k, j, n, compose_large_scale(&params.ue_ue, d, s, 0.0)?);
                }
            }
        }
    }
    p.validate()?;
    Ok(p)
}
