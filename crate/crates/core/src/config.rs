//! System parameters, validation and canonical parameter sets.
//!
//! Powers are linear (watts, or normalized units when the noise power is 1)
//! everywhere inside the crate. Decibel quantities only exist in the config
//! file schema ([`SystemConfigFile`]) and in the scenario description, and are
//! converted through [`units`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod units {
    /// 10^(db/10).
    pub fn db_to_linear(db: f64) -> f64 {
        10f64.powf(db / 10.0)
    }

    pub fn linear_to_db(x: f64) -> f64 {
        10.0 * x.log10()
    }

    /// dBm to watts.
    pub fn dbm_to_watts(dbm: f64) -> f64 {
        db_to_linear(dbm - 30.0)
    }

    pub fn watts_to_dbm(w: f64) -> f64 {
        linear_to_db(w) + 30.0
    }
}

/// Transmission direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Uplink,
    Downlink,
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Link::Uplink => "uplink",
            Link::Downlink => "downlink",
        })
    }
}

/// Scalar parameters of an L-cell network.
///
/// User indexing inside a cell follows one convention throughout the crate:
/// uplink users are `0..k_u()` with the full-duplex users first, downlink
/// users are `0..k_d()` with the same full-duplex users first. A full-duplex
/// user `i < fd_users` is therefore both uplink user `i` and downlink user `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub cells: usize,
    pub antennas: usize,
    pub fd_users: usize,
    pub hd_uplink_users: usize,
    pub hd_downlink_users: usize,
    /// Per-user uplink transmit power.
    pub uplink_power: f64,
    /// Total downlink transmit power per BS.
    pub downlink_power: f64,
    /// Per-user pilot power.
    pub training_power: f64,
    /// Transmitter-noise to signal power ratio of full-duplex radios.
    pub kappa: f64,
    /// Receiver noise variance at the BS (uplink data and pilots).
    pub noise_power: f64,
    /// Receiver noise variance at the UEs (downlink data).
    pub ue_noise_power: f64,
    /// Coherence interval in symbols.
    pub coherence: usize,
    /// Full-duplex pilot length.
    pub pilot_len: usize,
    pub tdd_uplink_pilot_len: usize,
    pub tdd_downlink_pilot_len: usize,
}

/// What a configuration is about to be used for. Closed forms need M >= 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Simulation,
    ClosedForm,
}

/// A single broken rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: &str, rule: impl Into<String>) -> Self {
        Violation {
            field: field.to_string(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(self.violations))
        }
    }
}

/// Above this the dynamic-range model stops being a small perturbation.
pub const KAPPA_WARN: f64 = 0.1;

impl SystemConfig {
    /// Unit powers, `kappa = 0`, unit noise, `T = 196` and minimal pilot lengths.
    pub fn new(
        cells: usize,
        antennas: usize,
        fd_users: usize,
        hd_uplink_users: usize,
        hd_downlink_users: usize,
    ) -> Self {
        let mut cfg = SystemConfig {
            cells,
            antennas,
            fd_users,
            hd_uplink_users,
            hd_downlink_users,
            uplink_power: 1.0,
            downlink_power: 1.0,
            training_power: 1.0,
            kappa: 0.0,
            noise_power: 1.0,
            ue_noise_power: 1.0,
            coherence: 196,
            pilot_len: 0,
            tdd_uplink_pilot_len: 0,
            tdd_downlink_pilot_len: 0,
        };
        cfg.set_minimal_pilots();
        cfg
    }

    pub fn with_powers(mut self, uplink: f64, downlink: f64, training: f64) -> Self {
        self.uplink_power = uplink;
        self.downlink_power = downlink;
        self.training_power = training;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    /// Sets the same noise variance at BSs and UEs.
    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise_power = noise;
        self.ue_noise_power = noise;
        self
    }

    pub fn with_noises(mut self, bs: f64, ue: f64) -> Self {
        self.noise_power = bs;
        self.ue_noise_power = ue;
        self
    }

    pub fn with_coherence(mut self, coherence: usize) -> Self {
        self.coherence = coherence;
        self
    }

    pub fn with_antennas(mut self, antennas: usize) -> Self {
        self.antennas = antennas;
        self
    }

    pub fn with_pilot_lengths(mut self, fd: usize, tdd_uplink: usize, tdd_downlink: usize) -> Self {
        self.pilot_len = fd;
        self.tdd_uplink_pilot_len = tdd_uplink;
        self.tdd_downlink_pilot_len = tdd_downlink;
        self
    }

    /// tau = K_tot, tau_u = K_u, tau_d = K_d (at least one symbol each).
    pub fn set_minimal_pilots(&mut self) {
        self.pilot_len = self.k_tot().max(1);
        self.tdd_uplink_pilot_len = self.k_u().max(1);
        self.tdd_downlink_pilot_len = self.k_d().max(1);
    }

    pub fn k_u(&self) -> usize {
        self.fd_users + self.hd_uplink_users
    }

    pub fn k_d(&self) -> usize {
        self.fd_users + self.hd_downlink_users
    }

    /// Number of orthogonal pilots a full-duplex cell needs.
    pub fn k_tot(&self) -> usize {
        self.k_u() + self.k_d() - self.fd_users
    }

    pub fn users(&self, link: Link) -> usize {
        match link {
            Link::Uplink => self.k_u(),
            Link::Downlink => self.k_d(),
        }
    }

    pub fn is_fd_user(&self, k: usize) -> bool {
        k < self.fd_users
    }

    /// Pilot slot used by user `k` of the given link. Full-duplex users share
    /// one slot for both directions; half-duplex downlink users come after
    /// all uplink users.
    pub fn pilot_index(&self, link: Link, k: usize) -> usize {
        match link {
            Link::Uplink => k,
            Link::Downlink if k < self.fd_users => k,
            Link::Downlink => self.k_u() + (k - self.fd_users),
        }
    }

    /// Fraction of the coherence interval left for data in a full-duplex system.
    pub fn fd_data_fraction(&self) -> f64 {
        (self.coherence - self.pilot_len) as f64 / self.coherence as f64
    }

    /// Same for a TDD system (pilot overhead of the given direction only).
    pub fn tdd_data_fraction(&self, link: Link) -> f64 {
        let tau = match link {
            Link::Uplink => self.tdd_uplink_pilot_len,
            Link::Downlink => self.tdd_downlink_pilot_len,
        };
        (self.coherence - tau) as f64 / self.coherence as f64
    }

    pub fn validate(&self, purpose: Purpose) -> ValidationResult {
        let mut out = ValidationResult::default();
        let mut fail = |field: &str, rule: String| out.violations.push(Violation::new(field, rule));

        if self.cells == 0 {
            fail("cells", "L >= 1 required".into());
        }
        if self.antennas == 0 {
            fail("antennas", "M >= 1 required".into());
        }
        if purpose == Purpose::ClosedForm && self.antennas < 3 {
            fail("antennas", "M ≥ 3 required for closed-form bounds".into());
        }
        for (field, v) in [
            ("uplink_power", self.uplink_power),
            ("downlink_power", self.downlink_power),
            ("training_power", self.training_power),
            ("noise_power", self.noise_power),
            ("ue_noise_power", self.ue_noise_power),
        ] {
            if !(v.is_finite() && v > 0.0) {
                fail(field, format!("must be finite and > 0 (got {v})"));
            }
        }
        if !(self.kappa.is_finite() && (0.0..1.0).contains(&self.kappa)) {
            fail("kappa", format!("must lie in [0, 1) (got {})", self.kappa));
        }
        if self.coherence == 0 {
            fail("coherence", "T >= 1 required".into());
        }
        let pilots = [
            ("pilot_len", self.pilot_len, self.k_tot(), "K_tot"),
            ("tdd_uplink_pilot_len", self.tdd_uplink_pilot_len, self.k_u(), "K_u"),
            ("tdd_downlink_pilot_len", self.tdd_downlink_pilot_len, self.k_d(), "K_d"),
        ];
        for (field, tau, need, name) in pilots {
            if tau == 0 {
                fail(field, "must be >= 1".into());
            }
            if tau < need {
                fail(field, format!("must be >= {name} = {need} (got {tau})"));
            }
            if tau >= self.coherence {
                fail(field, format!("tau < T required (got {tau} >= {})", self.coherence));
            }
        }
        if self.kappa > KAPPA_WARN {
            out.warnings.push(format!(
                "kappa = {} is large; the dynamic-range model assumes kappa << 1",
                self.kappa
            ));
        }
        out
    }

    pub fn ensure_valid(&self, purpose: Purpose) -> Result<()> {
        self.validate(purpose).into_result()
    }
}

/// Network where every same-cell link has unit gain and every cross-cell
/// link has gain `beta`; all users full-duplex; unit noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousConfig {
    pub cells: usize,
    pub antennas: usize,
    /// Full-duplex users per cell.
    pub users: usize,
    /// Inter-cell interference level in [0, 1].
    pub beta: f64,
    pub uplink_power: f64,
    pub downlink_power: f64,
    pub training_power: f64,
    pub kappa: f64,
    pub coherence: usize,
    /// Full-duplex pilot length; defaults to `users`.
    #[serde(default)]
    pub pilot_len: Option<usize>,
}

impl HomogeneousConfig {
    /// Seven cells, beta = 0.3, five users per cell, P_tr = P_u = 10 dB,
    /// P_d = 20 dB, kappa = -50 dB, T = 196, tau = K.
    pub fn benchmark(antennas: usize) -> Self {
        HomogeneousConfig {
            cells: 7,
            antennas,
            users: 5,
            beta: 0.3,
            uplink_power: units::db_to_linear(10.0),
            downlink_power: units::db_to_linear(20.0),
            training_power: units::db_to_linear(10.0),
            kappa: units::db_to_linear(-50.0),
            coherence: 196,
            pilot_len: None,
        }
    }

    pub fn with_antennas(&self, antennas: usize) -> Self {
        HomogeneousConfig {
            antennas,
            ..self.clone()
        }
    }

    pub fn with_powers(&self, uplink: f64, downlink: f64, training: f64) -> Self {
        HomogeneousConfig {
            uplink_power: uplink,
            downlink_power: downlink,
            training_power: training,
            ..self.clone()
        }
    }

    pub fn system_config(&self) -> SystemConfig {
        let mut cfg = SystemConfig::new(self.cells, self.antennas, self.users, 0, 0)
            .with_powers(self.uplink_power, self.downlink_power, self.training_power)
            .with_kappa(self.kappa)
            .with_noise(1.0)
            .with_coherence(self.coherence);
        if let Some(tau) = self.pilot_len {
            cfg.pilot_len = tau;
            cfg.tdd_uplink_pilot_len = tau;
            cfg.tdd_downlink_pilot_len = tau;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig(vec![Violation::new(
                "beta",
                format!("must lie in [0, 1] (got {})", self.beta),
            )]));
        }
        if self.users == 0 {
            return Err(Error::InvalidConfig(vec![Violation::new("users", "K >= 1 required")]));
        }
        self.system_config().ensure_valid(Purpose::Simulation)
    }
}

/// How transmit powers shrink with the antenna count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingLaw {
    /// P = E / M, the perfect-CSI law.
    #[serde(rename = "perfect_csi_1_over_M")]
    InverseM,
    /// P = E / sqrt(M), the imperfect-CSI law.
    #[serde(rename = "imperfect_csi_1_over_sqrtM")]
    InverseSqrtM,
    #[serde(rename = "none")]
    None,
}

/// Fixed "energies" mapped to powers at a given antenna count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerScalingSchedule {
    pub uplink_energy: f64,
    pub downlink_energy: f64,
    pub training_energy: f64,
    pub law: ScalingLaw,
}

/// Uplink, downlink and training power at one antenna count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Powers {
    pub uplink: f64,
    pub downlink: f64,
    pub training: f64,
}

impl PowerScalingSchedule {
    pub fn powers(&self, antennas: usize) -> Powers {
        let m = antennas as f64;
        let divisor = match self.law {
            ScalingLaw::InverseM => m,
            ScalingLaw::InverseSqrtM => m.sqrt(),
            ScalingLaw::None => 1.0,
        };
        Powers {
            uplink: self.uplink_energy / divisor,
            downlink: self.downlink_energy / divisor,
            training: self.training_energy / divisor,
        }
    }

    /// Copy of `cfg` with powers taken from this schedule at `cfg.antennas`.
    pub fn apply(&self, cfg: &SystemConfig) -> SystemConfig {
        let p = self.powers(cfg.antennas);
        cfg.clone().with_powers(p.uplink, p.downlink, p.training)
    }
}

/// A power given either linearly or in dB / dBm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerField {
    linear: Option<f64>,
    db: Option<f64>,
    dbm: Option<f64>,
}

impl PowerField {
    fn resolve(self, name: &str, default: Option<f64>) -> Result<f64> {
        let given = [self.linear, self.db.map(units::db_to_linear), self.dbm.map(units::dbm_to_watts)];
        let set: Vec<f64> = given.into_iter().flatten().collect();
        match (set.as_slice(), default) {
            ([v], _) => Ok(*v),
            ([], Some(d)) => Ok(d),
            ([], None) => Err(Error::InvalidConfig(vec![Violation::new(
                name,
                "missing (give it linearly or with a _db / _dbm suffix)",
            )])),
            _ => Err(Error::InvalidConfig(vec![Violation::new(
                name,
                "given more than once (linear, _db and _dbm are exclusive)",
            )])),
        }
    }
}

/// On-disk form of [`SystemConfig`]. Every power may be given linearly
/// (`uplink_power`), relative in dB (`uplink_power_db`) or absolute in dBm
/// (`uplink_power_dbm`); `kappa` may be given as `kappa_db`. Omitted pilot
/// lengths take their minimal values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfigFile {
    pub cells: usize,
    pub antennas: usize,
    #[serde(default)]
    pub fd_users: usize,
    #[serde(default)]
    pub hd_uplink_users: usize,
    #[serde(default)]
    pub hd_downlink_users: usize,
    pub uplink_power: Option<f64>,
    pub uplink_power_db: Option<f64>,
    pub uplink_power_dbm: Option<f64>,
    pub downlink_power: Option<f64>,
    pub downlink_power_db: Option<f64>,
    pub downlink_power_dbm: Option<f64>,
    pub training_power: Option<f64>,
    pub training_power_db: Option<f64>,
    pub training_power_dbm: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_db: Option<f64>,
    pub noise_power: Option<f64>,
    pub noise_power_db: Option<f64>,
    pub noise_power_dbm: Option<f64>,
    pub ue_noise_power: Option<f64>,
    pub ue_noise_power_db: Option<f64>,
    pub ue_noise_power_dbm: Option<f64>,
    pub coherence: Option<usize>,
    pub pilot_len: Option<usize>,
    pub tdd_uplink_pilot_len: Option<usize>,
    pub tdd_downlink_pilot_len: Option<usize>,
}

impl SystemConfigFile {
    pub fn resolve(&self) -> Result<SystemConfig> {
        let pf = |linear, db, dbm| PowerField { linear, db, dbm };
        let uplink = pf(self.uplink_power, self.uplink_power_db, self.uplink_power_dbm).resolve("uplink_power", None)?;
        let downlink =
            pf(self.downlink_power, self.downlink_power_db, self.downlink_power_dbm).resolve("downlink_power", None)?;
        let training = pf(self.training_power, self.training_power_db, self.training_power_dbm)
            .resolve("training_power", Some(uplink))?;
        let kappa = pf(self.kappa, self.kappa_db, None).resolve("kappa", Some(0.0))?;
        let noise = pf(self.noise_power, self.noise_power_db, self.noise_power_dbm).resolve("noise_power", Some(1.0))?;
        let ue_noise = pf(self.ue_noise_power, self.ue_noise_power_db, self.ue_noise_power_dbm)
            .resolve("ue_noise_power", Some(noise))?;

        let mut cfg = SystemConfig::new(
            self.cells,
            self.antennas,
            self.fd_users,
            self.hd_uplink_users,
            self.hd_downlink_users,
        )
        .with_powers(uplink, downlink, training)
        .with_kappa(kappa)
        .with_noises(noise, ue_noise);
        if let Some(t) = self.coherence {
            cfg.coherence = t;
        }
        if let Some(tau) = self.pilot_len {
            cfg.pilot_len = tau;
        }
        if let Some(tau) = self.tdd_uplink_pilot_len {
            cfg.tdd_uplink_pilot_len = tau;
        }
        if let Some(tau) = self.tdd_downlink_pilot_len {
            cfg.tdd_downlink_pilot_len = tau;
        }
        Ok(cfg)
    }
}
