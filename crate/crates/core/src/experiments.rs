//! End-to-end experiments and their machine-readable results.
//!
//! Every experiment is a pure function of its inputs and a master seed.
//! Drop-based sweeps reuse the same drops (topology, shadowing and Monte
//! Carlo streams) at every antenna count and dynamic range, so differences
//! between sweep points are paired comparisons. Gains are ratios of
//! drop-averaged network spectral efficiencies with delta-method 95%
//! confidence intervals; per-drop ratios are emitted as well.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{antenna_reduction_curve, homogeneous_rates, CellSe, ClosedForms};
use crate::config::{HomogeneousConfig, Link, PowerScalingSchedule, ScalingLaw};
use crate::error::{Error, Result};
use crate::profile::{expand_homogeneous, LargeScaleProfile};
use crate::rates::{dl_rate_fd_imperfect, simulate, tdd_rates_mc, Csi, McSettings, Plan, RateReport, System};
use crate::scenario::{compose_profile, ScenarioParams};
use crate::stats::{ci95_half_width, mean, Z95};
use crate::topology::build_topology;

const LINKS: [Link; 2] = [Link::Uplink, Link::Downlink];

/// One output record. Empty optional fields are written as empty CSV cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub drop: Option<usize>,
    pub m: Option<usize>,
    pub kappa_db: Option<f64>,
    pub csi: Option<Csi>,
    pub link: Option<Link>,
    /// Sweep target such as a spectral-efficiency gain.
    pub target: Option<f64>,
    pub quantity: String,
    pub value: f64,
    /// 95% confidence half-width, where one is defined.
    pub uncertainty: Option<f64>,
}

impl ResultRow {
    fn new(quantity: &str, value: f64) -> Self {
        ResultRow {
            drop: None,
            m: None,
            kappa_db: None,
            csi: None,
            link: None,
            target: None,
            quantity: quantity.to_string(),
            value,
            uncertainty: None,
        }
    }

    fn m(mut self, m: usize) -> Self {
        self.m = Some(m);
        self
    }

    fn kappa_db(mut self, k: f64) -> Self {
        self.kappa_db = Some(k);
        self
    }

    fn csi(mut self, csi: Csi) -> Self {
        self.csi = Some(csi);
        self
    }

    fn link(mut self, link: Link) -> Self {
        self.link = Some(link);
        self
    }

    fn drop(mut self, d: usize) -> Self {
        self.drop = Some(d);
        self
    }

    fn target(mut self, t: f64) -> Self {
        self.target = Some(t);
        self
    }

    fn uncertainty(mut self, u: Option<f64>) -> Self {
        self.uncertainty = u;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    /// SHA-256 of the canonical JSON of the experiment inputs.
    pub config_digest: String,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    /// Rows matching `quantity`, optionally restricted to one link.
    pub fn find<'a>(&'a self, quantity: &'a str, link: Option<Link>) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.quantity == quantity && (link.is_none() || r.link == link))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

pub const RESULT_CSV_HEADER: [&str; 12] = [
    "experiment",
    "seed",
    "config_digest",
    "drop",
    "m",
    "kappa_db",
    "csi",
    "link",
    "target",
    "quantity",
    "value",
    "uncertainty",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

/// Writes `result` in a stable layout; identical results give identical bytes.
pub fn emit<W: Write>(result: &ExperimentResult, format: OutputFormat, mut out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(RESULT_CSV_HEADER)?;
            for r in &result.rows {
                w.write_record([
                    result.experiment.clone(),
                    result.seed.to_string(),
                    result.config_digest.clone(),
                    opt(&r.drop),
                    opt(&r.m),
                    opt(&r.kappa_db),
                    opt(&r.csi),
                    opt(&r.link),
                    opt(&r.target),
                    r.quantity.clone(),
                    r.value.to_string(),
                    opt(&r.uncertainty),
                ])?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, result)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn emit_to_path(result: &ExperimentResult, format: OutputFormat, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    emit(result, format, BufWriter::new(file))
}

/// Hex SHA-256 of the JSON serialization of `inputs`.
pub fn config_digest<T: Serialize>(inputs: &T) -> Result<String> {
    let bytes = serde_json::to_vec(inputs)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn non_finite_guard(rows: &[ResultRow]) -> Result<()> {
    if let Some(r) = rows.iter().find(|r| !r.value.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite result for {}", r.quantity)));
    }
    Ok(())
}

fn finish<T: Serialize>(experiment: &str, inputs: &T, seed: u64, rows: Vec<ResultRow>) -> Result<ExperimentResult> {
    non_finite_guard(&rows)?;
    Ok(ExperimentResult {
        experiment: experiment.to_string(),
        config_digest: config_digest(inputs)?,
        seed,
        rows,
    })
}

fn per_cell(report: &RateReport, link: Link, cells: usize) -> (f64, f64) {
    (
        report.mean_se_per_cell(link, cells),
        Z95 * report.sum_se_stderr(link) / cells as f64,
    )
}

#[derive(Serialize)]
struct HomogeneousInputs<'a> {
    config: &'a HomogeneousConfig,
    antennas: &'a [usize],
    trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    csi: Option<Csi>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gains: Option<&'a [f64]>,
}

/// Monte Carlo ergodic rates against the closed-form bounds of the
/// homogeneous network, per cell, for both CSI models. The imperfect-CSI
/// downlink reference decodes against the mean effective gain.
pub fn tightness(h: &HomogeneousConfig, m_list: &[usize], settings: McSettings) -> Result<ExperimentResult> {
    let mut rows = Vec::new();
    for &m in m_list {
        let hm = h.with_antennas(m);
        let profile = expand_homogeneous(&hm)?;
        let cfg = hm.system_config();
        let plan = Plan {
            fd_perfect: true,
            fd_imperfect_ul: true,
            fd_imperfect_dl: true,
            ..Plan::default()
        };
        let out = simulate(&profile, &cfg, plan, settings)?;
        let cf = ClosedForms::new(&profile, &cfg)?;
        for csi in [Csi::Perfect, Csi::Imperfect] {
            let mc = match csi {
                Csi::Perfect => out.fd_perfect.as_ref(),
                Csi::Imperfect => out.fd_imperfect.as_ref(),
            }
            .expect("planned");
            let bound = cf.report(System::FullDuplex, csi)?;
            for link in LINKS {
                let (se, ci) = per_cell(mc, link, cfg.cells);
                let b = bound.mean_se_per_cell(link, cfg.cells);
                let base = || ResultRow::new("", 0.0).m(m).csi(csi).link(link);
                rows.push(ResultRow {
                    quantity: "mc_se_per_cell".into(),
                    value: se,
                    uncertainty: Some(ci),
                    ..base()
                });
                rows.push(ResultRow {
                    quantity: "bound_se_per_cell".into(),
                    value: b,
                    ..base()
                });
                rows.push(ResultRow {
                    quantity: "relative_gap".into(),
                    value: (se - b) / se,
                    ..base()
                });
            }
        }
    }
    let inputs = HomogeneousInputs {
        config: h,
        antennas: m_list,
        trials: settings.trials,
        csi: None,
        gains: None,
    };
    finish("tightness", &inputs, settings.seed, rows)
}

/// Energies equal to the configured powers, scaled with the law matching `csi`.
pub fn scaling_schedule(h: &HomogeneousConfig, csi: Csi) -> PowerScalingSchedule {
    PowerScalingSchedule {
        uplink_energy: h.uplink_power,
        downlink_energy: h.downlink_power,
        training_energy: h.training_power,
        law: match csi {
            Csi::Perfect => ScalingLaw::InverseM,
            Csi::Imperfect => ScalingLaw::InverseSqrtM,
        },
    }
}

/// Full-duplex (closed form) over TDD (Monte Carlo) spectral-efficiency
/// gains of one homogeneous network at `m` antennas under `schedule`.
pub fn homogeneous_gain(
    h: &HomogeneousConfig,
    m: usize,
    csi: Csi,
    schedule: &PowerScalingSchedule,
    settings: McSettings,
) -> Result<(CellSe, CellSe, CellSe, CellSe)> {
    let p = schedule.powers(m);
    let hm = h.with_antennas(m).with_powers(p.uplink, p.downlink, p.training);
    let fd = homogeneous_rates(&hm, csi)?;
    let profile = expand_homogeneous(&hm)?;
    let cfg = hm.system_config();
    let tdd = tdd_rates_mc(&profile, &cfg, csi, settings)?;
    let (tu, tu_ci) = per_cell(&tdd, Link::Uplink, cfg.cells);
    let (td, td_ci) = per_cell(&tdd, Link::Downlink, cfg.cells);
    let gain = CellSe {
        ul: fd.ul / tu,
        dl: fd.dl / td,
    };
    let gain_ci = CellSe {
        ul: gain.ul * tu_ci / tu,
        dl: gain.dl * td_ci / td,
    };
    Ok((fd, CellSe { ul: tu, dl: td }, gain, gain_ci))
}

/// Gains versus `M` with the power-scaling law of `csi` and with fixed powers.
pub fn power_scaling(h: &HomogeneousConfig, m_list: &[usize], csi: Csi, settings: McSettings) -> Result<ExperimentResult> {
    let scaled = scaling_schedule(h, csi);
    let fixed = PowerScalingSchedule {
        law: ScalingLaw::None,
        ..scaled
    };
    let mut rows = Vec::new();
    for &m in m_list {
        for (suffix, schedule) in [("scaled", &scaled), ("fixed_power", &fixed)] {
            let (fd, tdd, gain, gain_ci) = homogeneous_gain(h, m, csi, schedule, settings)?;
            for link in LINKS {
                let base = || ResultRow::new("", 0.0).m(m).csi(csi).link(link);
                rows.push(ResultRow {
                    quantity: format!("fd_se_{suffix}"),
                    value: fd.get(link),
                    ..base()
                });
                rows.push(ResultRow {
                    quantity: format!("tdd_se_{suffix}"),
                    value: tdd.get(link),
                    ..base()
                });
                rows.push(ResultRow {
                    quantity: format!("gain_{suffix}"),
                    value: gain.get(link),
                    uncertainty: Some(gain_ci.get(link)),
                    ..base()
                });
            }
        }
    }
    let inputs = HomogeneousInputs {
        config: h,
        antennas: m_list,
        trials: settings.trials,
        csi: Some(csi),
        gains: None,
    };
    finish("power_scaling", &inputs, settings.seed, rows)
}

/// Antenna reduction reachable at each target gain: the TDD per-cell
/// spectral efficiency comes from Monte Carlo, the full-duplex one from the
/// homogeneous closed forms.
pub fn tradeoff(
    h: &HomogeneousConfig,
    m_tdd_list: &[usize],
    gains: &[f64],
    csi: Csi,
    settings: McSettings,
) -> Result<ExperimentResult> {
    let mut tdd_rows = Vec::new();
    let points = antenna_reduction_curve(h, m_tdd_list, gains, csi, |m| {
        let hm = h.with_antennas(m);
        let profile = expand_homogeneous(&hm)?;
        let cfg = hm.system_config();
        let r = tdd_rates_mc(&profile, &cfg, csi, settings)?;
        let mut se = CellSe { ul: 0.0, dl: 0.0 };
        for link in LINKS {
            let (v, ci) = per_cell(&r, link, cfg.cells);
            match link {
                Link::Uplink => se.ul = v,
                Link::Downlink => se.dl = v,
            }
            tdd_rows.push(ResultRow::new("tdd_se", v).m(m).csi(csi).link(link).uncertainty(Some(ci)));
        }
        Ok(se)
    })?;
    let mut rows = tdd_rows;
    for p in points {
        let base = || ResultRow::new("", 0.0).m(p.m_tdd).csi(csi).link(p.link).target(p.se_gain);
        rows.push(ResultRow {
            quantity: "reachable".into(),
            value: if p.m_fd.is_some() { 1.0 } else { 0.0 },
            ..base()
        });
        if let (Some(m_fd), Some(red)) = (p.m_fd, p.antenna_reduction) {
            rows.push(ResultRow {
                quantity: "m_fd".into(),
                value: m_fd as f64,
                ..base()
            });
            rows.push(ResultRow {
                quantity: "antenna_reduction".into(),
                value: red,
                ..base()
            });
        }
    }
    let inputs = HomogeneousInputs {
        config: h,
        antennas: m_tdd_list,
        trials: settings.trials,
        csi: Some(csi),
        gains: Some(gains),
    };
    finish("tradeoff", &inputs, settings.seed, rows)
}

/// Seeds of drop `drop` under master seed `seed`: one for the topology and
/// shadowing, one for the Monte Carlo channel draws.
pub fn drop_seeds(seed: u64, drop: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(drop as u64);
    (rng.next_u64(), rng.next_u64())
}

/// Large-scale profile of one random drop.
pub fn drop_profile(params: &ScenarioParams, seed: u64, drop: usize) -> Result<LargeScaleProfile> {
    params.validate()?;
    let (topo_seed, _) = drop_seeds(seed, drop);
    let mut rng = ChaCha8Rng::seed_from_u64(topo_seed);
    let topo = build_topology(params, &mut rng)?;
    compose_profile(&topo, params, &mut rng)
}

/// Full-duplex and TDD imperfect-CSI rates of one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropOutcome {
    pub fd: RateReport,
    pub tdd: RateReport,
}

/// Network spectral efficiencies of one drop at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropSe {
    pub fd_ul: f64,
    pub fd_dl: f64,
    pub tdd_ul: f64,
    pub tdd_dl: f64,
}

impl DropSe {
    pub fn from_outcome(o: &DropOutcome) -> Self {
        DropSe {
            fd_ul: o.fd.sum_se(Link::Uplink),
            fd_dl: o.fd.sum_se(Link::Downlink),
            tdd_ul: o.tdd.sum_se(Link::Uplink),
            tdd_dl: o.tdd.sum_se(Link::Downlink),
        }
    }

    pub fn fd(&self, link: Link) -> f64 {
        match link {
            Link::Uplink => self.fd_ul,
            Link::Downlink => self.fd_dl,
        }
    }

    pub fn tdd(&self, link: Link) -> f64 {
        match link {
            Link::Uplink => self.tdd_ul,
            Link::Downlink => self.tdd_dl,
        }
    }
}

/// Rates of a drop's profile at one antenna count and dynamic range.
/// Full duplex: Monte Carlo uplink and deterministic downlink; TDD: Monte Carlo.
pub fn evaluate_drop(
    profile: &LargeScaleProfile,
    params: &ScenarioParams,
    antennas: usize,
    kappa_db: f64,
    settings: McSettings,
) -> Result<DropOutcome> {
    let cfg = params.system_config(antennas, kappa_db);
    let plan = Plan {
        fd_imperfect_ul: true,
        tdd_imperfect: true,
        ..Plan::default()
    };
    let out = simulate(profile, &cfg, plan, settings)?;
    let mut fd = out.fd_imperfect.expect("planned");
    let dl = dl_rate_fd_imperfect(profile, &cfg)?;
    fd.dl = dl.dl;
    fd.dl_sum_stderr = 0.0;
    Ok(DropOutcome {
        fd,
        tdd: out.tdd_imperfect.expect("planned"),
    })
}

/// One random drop: topology, large-scale profile, then FD and TDD rates.
pub fn run_drop(
    params: &ScenarioParams,
    antennas: usize,
    kappa_db: f64,
    seed: u64,
    drop: usize,
    trials: usize,
) -> Result<DropOutcome> {
    let profile = drop_profile(params, seed, drop)?;
    let (_, mc_seed) = drop_seeds(seed, drop);
    evaluate_drop(&profile, params, antennas, kappa_db, McSettings::new(trials, mc_seed))
}

/// Sweep point `(M, kappa_db)`.
pub type SweepPoint = (usize, f64);

/// Per point, per drop network spectral efficiencies. Drops run in parallel.
pub fn sweep_drops(
    params: &ScenarioParams,
    points: &[SweepPoint],
    drops: usize,
    seed: u64,
    trials: usize,
) -> Result<Vec<Vec<DropSe>>> {
    if drops == 0 {
        return Err(Error::InvalidArgument("at least one drop required".into()));
    }
    params.validate()?;
    let per_drop: Vec<Vec<DropSe>> = (0..drops)
        .into_par_iter()
        .map(|d| -> Result<Vec<DropSe>> {
            let profile = drop_profile(params, seed, d)?;
            let (_, mc_seed) = drop_seeds(seed, d);
            let settings = McSettings {
                parallel: false,
                ..McSettings::new(trials, mc_seed)
            };
            points
                .iter()
                .map(|&(m, k)| Ok(DropSe::from_outcome(&evaluate_drop(&profile, params, m, k, settings)?)))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..points.len())
        .map(|p| per_drop.iter().map(|d| d[p]).collect())
        .collect())
}

/// A point estimate with a 95% confidence half-width (`None` for one drop).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub half_width: Option<f64>,
}

impl Estimate {
    pub fn lower(&self) -> f64 {
        self.value - self.half_width.unwrap_or(f64::INFINITY)
    }

    pub fn upper(&self) -> f64 {
        self.value + self.half_width.unwrap_or(f64::INFINITY)
    }
}

/// Linearized per-drop contributions of the ratio of means `mean(fd) / mean(tdd)`.
fn ratio_influence(drops: &[DropSe], link: Link) -> (f64, Vec<f64>) {
    let f = mean(&drops.iter().map(|d| d.fd(link)).collect::<Vec<_>>());
    let t = mean(&drops.iter().map(|d| d.tdd(link)).collect::<Vec<_>>());
    let g = f / t;
    (g, drops.iter().map(|d| (d.fd(link) - g * d.tdd(link)) / t).collect())
}

fn half_width(influence: &[f64]) -> Option<f64> {
    (influence.len() >= 2).then(|| ci95_half_width(influence))
}

/// Gain as the ratio of drop-averaged full-duplex and TDD spectral efficiencies.
pub fn ratio_of_means(drops: &[DropSe], link: Link) -> Estimate {
    let (g, z) = ratio_influence(drops, link);
    Estimate {
        value: g,
        half_width: half_width(&z),
    }
}

/// Difference `gain(a) - gain(b)` of two sweep points evaluated on the same drops.
pub fn paired_gain_difference(a: &[DropSe], b: &[DropSe], link: Link) -> Result<Estimate> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("paired comparison needs the same drops".into()));
    }
    let (ga, za) = ratio_influence(a, link);
    let (gb, zb) = ratio_influence(b, link);
    let z: Vec<f64> = za.iter().zip(&zb).map(|(x, y)| x - y).collect();
    Ok(Estimate {
        value: ga - gb,
        half_width: half_width(&z),
    })
}

fn drop_rows(rows: &mut Vec<ResultRow>, drops: &[DropSe], m: usize, kappa_db: f64) {
    let tag = |r: ResultRow| r.m(m).kappa_db(kappa_db).csi(Csi::Imperfect);
    for link in LINKS {
        let gain = ratio_of_means(drops, link);
        rows.push(tag(ResultRow::new("gain", gain.value).link(link).uncertainty(gain.half_width)));
        let per: Vec<f64> = drops.iter().map(|d| d.fd(link) / d.tdd(link)).collect();
        rows.push(tag(
            ResultRow::new("mean_drop_gain", mean(&per)).link(link).uncertainty(half_width(&per)),
        ));
        let fd: Vec<f64> = drops.iter().map(|d| d.fd(link)).collect();
        let tdd: Vec<f64> = drops.iter().map(|d| d.tdd(link)).collect();
        rows.push(tag(ResultRow::new("fd_se", mean(&fd)).link(link).uncertainty(half_width(&fd))));
        rows.push(tag(ResultRow::new("tdd_se", mean(&tdd)).link(link).uncertainty(half_width(&tdd))));
        for (d, g) in per.iter().enumerate() {
            rows.push(tag(ResultRow::new("drop_gain", *g).link(link).drop(d)));
        }
    }
}

#[derive(Serialize)]
struct DropInputs<'a> {
    params: &'a ScenarioParams,
    points: &'a [SweepPoint],
    drops: usize,
    trials: usize,
}

/// Drop sweep over arbitrary `(M, kappa_db)` points.
pub fn drop_sweep(
    experiment: &str,
    params: &ScenarioParams,
    points: &[SweepPoint],
    drops: usize,
    seed: u64,
    trials: usize,
) -> Result<(ExperimentResult, Vec<Vec<DropSe>>)> {
    let data = sweep_drops(params, points, drops, seed, trials)?;
    let mut rows = Vec::new();
    for (&(m, k), d) in points.iter().zip(&data) {
        drop_rows(&mut rows, d, m, k);
    }
    let inputs = DropInputs {
        params,
        points,
        drops,
        trials,
    };
    Ok((finish(experiment, &inputs, seed, rows)?, data))
}

pub const GAIN_VS_M_KAPPA_DB: f64 = -60.0;
pub const GAIN_VS_KAPPA_ANTENNAS: usize = 100;

/// Gains over `params.m_list` at a -60 dB dynamic range.
pub fn gain_vs_m(params: &ScenarioParams, drops: usize, seed: u64, trials: usize) -> Result<ExperimentResult> {
    let points: Vec<SweepPoint> = params.m_list.iter().map(|&m| (m, GAIN_VS_M_KAPPA_DB)).collect();
    Ok(drop_sweep("gain_vs_m", params, &points, drops, seed, trials)?.0)
}

/// Gains over `params.kappa_db_list` with 100 BS antennas.
pub fn gain_vs_kappa(params: &ScenarioParams, drops: usize, seed: u64, trials: usize) -> Result<ExperimentResult> {
    let points: Vec<SweepPoint> = params
        .kappa_db_list
        .iter()
        .map(|&k| (GAIN_VS_KAPPA_ANTENNAS, k))
        .collect();
    Ok(drop_sweep("gain_vs_kappa", params, &points, drops, seed, trials)?.0)
}
