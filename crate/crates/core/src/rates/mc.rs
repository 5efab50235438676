//! Trial-parallel Monte Carlo evaluation of ergodic rates.
//!
//! Each trial owns independent ChaCha streams derived from the master seed
//! and the trial index, one per random purpose, so results do not depend on
//! scheduling and enabling one quantity never perturbs the draws of another.
//! Trials are grouped in fixed-size blocks; per-block moments are merged
//! with a fixed pairwise tree, so serial and parallel runs are bit-identical.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analytic::dl_rate_fd_imperfect;
use super::sinr::{dl_noise_fd, ul_noise_fd, DlTerms, UlTerms};
use super::{check_inputs, user_class, Csi, PerCellFactors, RateReport, System, UserRate};
use crate::channel::{draw_bs_bs, draw_links, draw_ue_ue, gaussian_matrix, ChannelRealization};
use crate::config::{Link, SystemConfig};
use crate::error::{Error, Result};
use crate::estimation::{estimate_with, EstimateStatistics};
use crate::profile::LargeScaleProfile;
use crate::stats::{merge_pairwise, Moments};
use crate::CMatrix;

const BLOCK: usize = 64;

const STREAM_CHANNELS: u64 = 0;
const STREAM_TRAINING: u64 = 1;
const STREAM_UE_UE: u64 = 2;
const STREAM_BS_BS: u64 = 3;
const STREAM_BS_BS_IMPERFECT: u64 = 4;
const STREAMS_PER_TRIAL: u64 = 8;

/// How the BS-BS interference term is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BsBsSampling {
    /// Draw every `M x M` BS-BS matrix.
    Explicit,
    /// Draw only the projection of each BS-BS matrix onto the combiner and
    /// precoder subspaces. Exact in distribution and O(M K^2) instead of O(M^2).
    #[default]
    Projected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub trials: usize,
    pub seed: u64,
    pub parallel: bool,
    pub bs_bs: BsBsSampling,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            trials: 10_000,
            seed: 0,
            parallel: true,
            bs_bs: BsBsSampling::Projected,
        }
    }
}

impl McSettings {
    pub fn new(trials: usize, seed: u64) -> Self {
        McSettings {
            trials,
            seed,
            ..McSettings::default()
        }
    }
}

/// Which Monte Carlo quantities one pass evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Plan {
    pub fd_perfect: bool,
    pub tdd_perfect: bool,
    pub fd_imperfect_ul: bool,
    /// Full-duplex downlink with imperfect CSI, decoded against the average
    /// effective gain (instantaneous effective noise).
    pub fd_imperfect_dl: bool,
    pub tdd_imperfect: bool,
}

impl Plan {
    fn needs(&self, csi: Csi) -> bool {
        match csi {
            Csi::Perfect => self.fd_perfect || self.tdd_perfect,
            Csi::Imperfect => self.fd_imperfect_ul || self.fd_imperfect_dl || self.tdd_imperfect,
        }
    }
}

/// Reports produced by [`simulate`]; `None` where the plan did not ask.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct McOutput {
    pub fd_perfect: Option<RateReport>,
    pub tdd_perfect: Option<RateReport>,
    /// Uplink and/or effective-noise downlink, as planned.
    pub fd_imperfect: Option<RateReport>,
    pub tdd_imperfect: Option<RateReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    FdPerfect,
    TddPerfect,
    FdImperfect,
    TddImperfect,
}

/// Position of each (section, link) block of per-user values in a trial's
/// output vector. Each block holds one value per user plus the network sum.
struct Layout {
    k_u: usize,
    k_d: usize,
    cells: usize,
    offsets: Vec<((Section, Link), usize)>,
    len: usize,
}

impl Layout {
    fn new(plan: &Plan, cfg: &SystemConfig) -> Self {
        let (cells, k_u, k_d) = (cfg.cells, cfg.k_u(), cfg.k_d());
        let mut wanted = Vec::new();
        if plan.fd_perfect {
            wanted.push((Section::FdPerfect, Link::Uplink));
            wanted.push((Section::FdPerfect, Link::Downlink));
        }
        if plan.tdd_perfect {
            wanted.push((Section::TddPerfect, Link::Uplink));
            wanted.push((Section::TddPerfect, Link::Downlink));
        }
        if plan.fd_imperfect_ul {
            wanted.push((Section::FdImperfect, Link::Uplink));
        }
        if plan.fd_imperfect_dl {
            wanted.push((Section::FdImperfect, Link::Downlink));
        }
        if plan.tdd_imperfect {
            wanted.push((Section::TddImperfect, Link::Uplink));
            wanted.push((Section::TddImperfect, Link::Downlink));
        }
        let mut offsets = Vec::new();
        let mut len = 0;
        for key in wanted {
            offsets.push((key, len));
            let users = if key.1 == Link::Uplink { k_u } else { k_d };
            len += cells * users + 1;
        }
        Layout {
            k_u,
            k_d,
            cells,
            offsets,
            len,
        }
    }

    fn offset(&self, section: Section, link: Link) -> Option<usize> {
        self.offsets.iter().find(|(k, _)| *k == (section, link)).map(|(_, o)| *o)
    }

    fn users(&self, link: Link) -> usize {
        match link {
            Link::Uplink => self.k_u,
            Link::Downlink => self.k_d,
        }
    }
}

struct Context<'a> {
    profile: &'a LargeScaleProfile,
    cfg: &'a SystemConfig,
    plan: Plan,
    settings: McSettings,
    factors: PerCellFactors,
    stats: Option<EstimateStatistics>,
    layout: Layout,
}

fn stream(seed: u64, trial: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 * STREAMS_PER_TRIAL + purpose);
    rng
}

fn conj(m: &CMatrix) -> CMatrix {
    m.map(|z| z.conj())
}

/// Upper-triangular factor of a thin QR decomposition.
fn r_factor(m: &CMatrix) -> CMatrix {
    m.clone().qr().r()
}

fn log_rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

impl Context<'_> {
    fn write(&self, out: &mut [f64], section: Section, link: Link, cell: usize, user: usize, value: f64) {
        if let Some(o) = self.layout.offset(section, link) {
            out[o + cell * self.layout.users(link) + user] = value;
        }
    }

    fn finish_sums(&self, out: &mut [f64]) {
        for ((_, link), o) in &self.layout.offsets {
            let n = self.layout.cells * self.layout.users(*link);
            out[o + n] = crate::stats::pairwise_sum(&out[*o..o + n]);
        }
    }

    fn trial(&self, t: usize) -> Vec<f64> {
        let cfg = self.cfg;
        let m = cfg.antennas;
        let seed = self.settings.seed;
        let links = draw_links(self.profile, m, &mut stream(seed, t, STREAM_CHANNELS));
        let needs_fd_dl = self.plan.fd_perfect || self.plan.fd_imperfect_dl;
        let f = if needs_fd_dl && cfg.k_u() > 0 {
            draw_ue_ue(self.profile, &mut stream(seed, t, STREAM_UE_UE))
        } else {
            Vec::new()
        };
        let needs_fd_ul = self.plan.fd_perfect || self.plan.fd_imperfect_ul;
        let explicit = self.settings.bs_bs == BsBsSampling::Explicit && needs_fd_ul && cfg.cells > 1 && cfg.k_d() > 0;
        let v = if explicit {
            draw_bs_bs(self.profile, m, &mut stream(seed, t, STREAM_BS_BS))
        } else {
            Vec::new()
        };
        let real = ChannelRealization::from_parts(cfg.cells, m, links, v, f);

        let mut out = vec![0.0; self.layout.len];
        if self.plan.needs(Csi::Perfect) {
            let a: Vec<CMatrix> = (0..cfg.cells).map(|j| real.g_u(j, j).clone()).collect();
            let b: Vec<CMatrix> = (0..cfg.cells).map(|l| real.g_d(l, l).clone()).collect();
            self.evaluate(&real, &a, &b, Csi::Perfect, t, &mut out);
        }
        if self.plan.needs(Csi::Imperfect) {
            let stats = self.stats.as_ref().expect("estimate statistics prepared");
            let est = estimate_with(&real, self.profile, stats, cfg, &mut stream(seed, t, STREAM_TRAINING));
            self.evaluate(&real, &est.g_hat_u, &est.g_hat_d, Csi::Imperfect, t, &mut out);
        }
        self.finish_sums(&mut out);
        out
    }

    /// Rates of every section sharing the combiners `a` and precoder channels `b`.
    fn evaluate(&self, real: &ChannelRealization, a: &[CMatrix], b: &[CMatrix], csi: Csi, t: usize, out: &mut [f64]) {
        let (fd, tdd) = match csi {
            Csi::Perfect => (Section::FdPerfect, Section::TddPerfect),
            Csi::Imperfect => (Section::FdImperfect, Section::TddImperfect),
        };
        let want_fd_ul = self.layout.offset(fd, Link::Uplink).is_some();
        let want_tdd_ul = self.layout.offset(tdd, Link::Uplink).is_some();
        let want_fd_dl = self.layout.offset(fd, Link::Downlink).is_some();
        let want_tdd_dl = self.layout.offset(tdd, Link::Downlink).is_some();
        let b_conj: Vec<CMatrix> = b.iter().map(conj).collect();
        if want_fd_ul || want_tdd_ul {
            self.uplink(real, a, &b_conj, csi, want_fd_ul, want_tdd_ul, t, out);
        }
        if want_fd_dl || want_tdd_dl {
            self.downlink(real, &b_conj, csi, want_fd_dl, want_tdd_dl, out);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn uplink(
        &self,
        real: &ChannelRealization,
        a: &[CMatrix],
        b_conj: &[CMatrix],
        csi: Csi,
        want_fd: bool,
        want_tdd: bool,
        t: usize,
        out: &mut [f64],
    ) {
        let cfg = self.cfg;
        let (l_n, k_u, k_d) = (cfg.cells, cfg.k_u(), cfg.k_d());
        let p_u = cfg.uplink_power;
        let (fd, tdd) = match csi {
            Csi::Perfect => (Section::FdPerfect, Section::TddPerfect),
            Csi::Imperfect => (Section::FdImperfect, Section::TddImperfect),
        };
        let bs_bs_active = want_fd && l_n > 1 && k_d > 0;
        let projected = bs_bs_active && self.settings.bs_bs == BsBsSampling::Projected;
        let r_b: Vec<CMatrix> = if projected { b_conj.iter().map(r_factor).collect() } else { Vec::new() };
        let mut w_rng = projected.then(|| {
            let purpose = match csi {
                Csi::Perfect => STREAM_BS_BS,
                Csi::Imperfect => STREAM_BS_BS_IMPERFECT,
            };
            stream(self.settings.seed, t, purpose)
        });

        for j in 0..l_n {
            let aj = &a[j];
            let grams: Vec<CMatrix> = (0..l_n).map(|l| aj.ad_mul(real.g_u(j, l))).collect();
            let norms: Vec<f64> = (0..k_u).map(|n| aj.column(n).norm_squared()).collect();

            let mut bs_bs = vec![0.0; k_u];
            if bs_bs_active {
                let r_a = projected.then(|| r_factor(aj));
                for l in (0..l_n).filter(|&l| l != j) {
                    let cross = match (&r_a, w_rng.as_mut()) {
                        (Some(r_a), Some(rng)) => {
                            let beta = self.profile.beta_b(j, l);
                            let w = gaussian_matrix(rng, r_a.nrows(), r_b[l].nrows(), |_| beta);
                            r_a.ad_mul(&(w * &r_b[l]))
                        }
                        _ => aj.ad_mul(&(real.v(j, l) * &b_conj[l])),
                    };
                    let c = self.factors.dl_scale(l, csi);
                    for (n, acc) in bs_bs.iter_mut().enumerate() {
                        *acc += c * cross.row(n).iter().map(|z| z.norm_sqr()).sum::<f64>();
                    }
                }
            }

            for n in 0..k_u {
                let norm_sq = norms[n];
                let own = grams[j][(n, n)];
                let total: f64 = grams.iter().map(|g| g.row(n).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum();
                let multiuser = (total - own.norm_sqr()).max(0.0);
                let error = match csi {
                    Csi::Perfect => 0.0,
                    Csi::Imperfect => p_u * (own - Complex64::new(norm_sq, 0.0)).norm_sqr(),
                };
                let mut terms = UlTerms {
                    signal: p_u * norm_sq * norm_sq,
                    estimation_error: error,
                    multiuser: p_u * multiuser,
                    bs_bs: 0.0,
                    norm_sq,
                };
                if want_tdd {
                    let r = 0.5 * log_rate(terms.sinr(cfg.noise_power));
                    self.write(out, tdd, Link::Uplink, j, n, r);
                }
                if want_fd {
                    terms.bs_bs = bs_bs[n];
                    let r = log_rate(terms.sinr(ul_noise_fd(self.profile, cfg, j)));
                    self.write(out, fd, Link::Uplink, j, n, r);
                }
            }
        }
    }

    fn downlink(&self, real: &ChannelRealization, b_conj: &[CMatrix], csi: Csi, want_fd: bool, want_tdd: bool, out: &mut [f64]) {
        let cfg = self.cfg;
        let (l_n, k_u, k_d) = (cfg.cells, cfg.k_u(), cfg.k_d());
        let m = cfg.antennas as f64;
        let (fd, tdd) = match csi {
            Csi::Perfect => (Section::FdPerfect, Section::TddPerfect),
            Csi::Imperfect => (Section::FdImperfect, Section::TddImperfect),
        };
        let scales: Vec<f64> = (0..l_n).map(|j| self.factors.dl_scale(j, csi)).collect();
        for l in 0..l_n {
            let grams: Vec<CMatrix> = (0..l_n).map(|j| real.g_d(j, l).tr_mul(&b_conj[j])).collect();
            for k in 0..k_d {
                let own = grams[l][(k, k)];
                let weighted_total: f64 = (0..l_n)
                    .map(|j| scales[j] * grams[j].row(k).iter().map(|z| z.norm_sqr()).sum::<f64>())
                    .sum();
                let multiuser = (weighted_total - scales[l] * own.norm_sqr()).max(0.0);
                let (desired, uncertainty) = match csi {
                    Csi::Perfect => (scales[l] * own.norm_sqr(), 0.0),
                    Csi::Imperfect => {
                        let stats = self.stats.as_ref().expect("estimate statistics prepared");
                        let mean_gain = m * stats.get(Link::Downlink, l, k).est_var;
                        (
                            scales[l] * mean_gain * mean_gain,
                            scales[l] * (own - Complex64::new(mean_gain, 0.0)).norm_sqr(),
                        )
                    }
                };
                let mut terms = DlTerms {
                    desired,
                    gain_uncertainty: uncertainty,
                    multiuser,
                    ue_ue: 0.0,
                };
                if want_tdd {
                    let r = 0.5 * log_rate(terms.sinr(cfg.ue_noise_power));
                    self.write(out, tdd, Link::Downlink, l, k, r);
                }
                if want_fd {
                    if k_u > 0 {
                        let mut ue = 0.0;
                        for j in 0..l_n {
                            ue += real.f(l, j).row(k).iter().map(|z| z.norm_sqr()).sum::<f64>();
                        }
                        if cfg.is_fd_user(k) {
                            ue -= real.f(l, l)[(k, k)].norm_sqr();
                        }
                        terms.ue_ue = (cfg.uplink_power * ue).max(0.0);
                    }
                    let r = log_rate(terms.sinr(dl_noise_fd(self.profile, cfg, l, k)));
                    self.write(out, fd, Link::Downlink, l, k, r);
                }
            }
        }
    }

    fn block(&self, index: usize) -> Vec<Moments> {
        let start = index * BLOCK;
        let end = (start + BLOCK).min(self.settings.trials);
        let rows: Vec<Vec<f64>> = (start..end).map(|t| self.trial(t)).collect();
        (0..self.layout.len)
            .map(|s| {
                let column: Vec<f64> = rows.iter().map(|r| r[s]).collect();
                Moments::from_slice(&column)
            })
            .collect()
    }

    fn run(&self) -> Vec<Moments> {
        let n_blocks = self.settings.trials.div_ceil(BLOCK);
        let blocks: Vec<Vec<Moments>> = if self.settings.parallel {
            (0..n_blocks).into_par_iter().map(|b| self.block(b)).collect()
        } else {
            (0..n_blocks).map(|b| self.block(b)).collect()
        };
        (0..self.layout.len)
            .map(|s| {
                let parts: Vec<Moments> = blocks.iter().map(|b| b[s]).collect();
                merge_pairwise(&parts)
            })
            .collect()
    }

    fn section_rates(&self, moments: &[Moments], section: Section, link: Link) -> (Vec<UserRate>, f64) {
        let Some(o) = self.layout.offset(section, link) else {
            return (Vec::new(), 0.0);
        };
        let users = self.layout.users(link);
        let mut rates = Vec::with_capacity(self.layout.cells * users);
        for cell in 0..self.layout.cells {
            for user in 0..users {
                let mo = &moments[o + cell * users + user];
                rates.push(UserRate {
                    link,
                    cell,
                    user,
                    class: user_class(self.cfg, user),
                    rate: mo.mean(),
                    stderr: mo.stderr(),
                });
            }
        }
        (rates, moments[o + self.layout.cells * users].stderr())
    }

    fn report(&self, moments: &[Moments], section: Section) -> RateReport {
        let (system, csi) = match section {
            Section::FdPerfect => (System::FullDuplex, Csi::Perfect),
            Section::TddPerfect => (System::Tdd, Csi::Perfect),
            Section::FdImperfect => (System::FullDuplex, Csi::Imperfect),
            Section::TddImperfect => (System::Tdd, Csi::Imperfect),
        };
        let (ul, ul_sum_stderr) = self.section_rates(moments, section, Link::Uplink);
        let (dl, dl_sum_stderr) = self.section_rates(moments, section, Link::Downlink);
        let (ul_overhead, dl_overhead) = overheads(self.cfg, system, csi);
        RateReport {
            system,
            csi,
            ul,
            dl,
            ul_overhead,
            dl_overhead,
            ul_sum_stderr,
            dl_sum_stderr,
            n_trials: self.settings.trials,
        }
    }
}

/// Fraction of the coherence interval carrying data in each direction.
pub(crate) fn overheads(cfg: &SystemConfig, system: System, csi: Csi) -> (f64, f64) {
    match (system, csi) {
        (_, Csi::Perfect) => (1.0, 1.0),
        (System::FullDuplex, Csi::Imperfect) => (cfg.fd_data_fraction(), cfg.fd_data_fraction()),
        (System::Tdd, Csi::Imperfect) => (cfg.tdd_data_fraction(Link::Uplink), cfg.tdd_data_fraction(Link::Downlink)),
    }
}

/// Runs every quantity of `plan` over one shared set of channel draws.
pub fn simulate(profile: &LargeScaleProfile, cfg: &SystemConfig, plan: Plan, settings: McSettings) -> Result<McOutput> {
    check_inputs(profile, cfg)?;
    if settings.trials == 0 {
        return Err(Error::InvalidArgument("at least one Monte Carlo trial required".into()));
    }
    let stats = EstimateStatistics::new(profile, cfg)?;
    let factors = PerCellFactors::with_stats(profile, cfg, &stats)?;
    let ctx = Context {
        profile,
        cfg,
        plan,
        settings,
        factors,
        stats: plan.needs(Csi::Imperfect).then_some(stats),
        layout: Layout::new(&plan, cfg),
    };
    let moments = ctx.run();
    let pick = |on: bool, s: Section| on.then(|| ctx.report(&moments, s));
    Ok(McOutput {
        fd_perfect: pick(plan.fd_perfect, Section::FdPerfect),
        tdd_perfect: pick(plan.tdd_perfect, Section::TddPerfect),
        fd_imperfect: pick(plan.fd_imperfect_ul || plan.fd_imperfect_dl, Section::FdImperfect),
        tdd_imperfect: pick(plan.tdd_imperfect, Section::TddImperfect),
    })
}

/// Full-duplex ergodic rates with perfect CSI, both directions.
pub fn fd_perfect_mc(profile: &LargeScaleProfile, cfg: &SystemConfig, settings: McSettings) -> Result<RateReport> {
    let plan = Plan {
        fd_perfect: true,
        ..Plan::default()
    };
    Ok(simulate(profile, cfg, plan, settings)?.fd_perfect.expect("planned"))
}

/// Full-duplex uplink ergodic rates with MMSE-estimated CSI.
pub fn ul_rate_fd_imperfect_mc(profile: &LargeScaleProfile, cfg: &SystemConfig, settings: McSettings) -> Result<RateReport> {
    let plan = Plan {
        fd_imperfect_ul: true,
        ..Plan::default()
    };
    Ok(simulate(profile, cfg, plan, settings)?.fd_imperfect.expect("planned"))
}

/// Full-duplex downlink rates with imperfect CSI where each user decodes
/// against its average effective gain and the instantaneous remainder acts
/// as noise. Serves as a numerical reference for the deterministic rate.
pub fn dl_rate_fd_imperfect_mc(profile: &LargeScaleProfile, cfg: &SystemConfig, settings: McSettings) -> Result<RateReport> {
    let plan = Plan {
        fd_imperfect_dl: true,
        ..Plan::default()
    };
    Ok(simulate(profile, cfg, plan, settings)?.fd_imperfect.expect("planned"))
}

/// Full-duplex rates with imperfect CSI: Monte Carlo uplink, deterministic downlink.
pub fn fd_imperfect_report(profile: &LargeScaleProfile, cfg: &SystemConfig, settings: McSettings) -> Result<RateReport> {
    let mut report = ul_rate_fd_imperfect_mc(profile, cfg, settings)?;
    let dl = dl_rate_fd_imperfect(profile, cfg)?;
    report.dl = dl.dl;
    report.dl_sum_stderr = 0.0;
    Ok(report)
}

/// TDD ergodic rates (with the 1/2 time share) under the given CSI assumption.
pub fn tdd_rates_mc(profile: &LargeScaleProfile, cfg: &SystemConfig, csi: Csi, settings: McSettings) -> Result<RateReport> {
    let plan = match csi {
        Csi::Perfect => Plan {
            tdd_perfect: true,
            ..Plan::default()
        },
        Csi::Imperfect => Plan {
            tdd_imperfect: true,
            ..Plan::default()
        },
    };
    let out = simulate(profile, cfg, plan, settings)?;
    Ok(match csi {
        Csi::Perfect => out.tdd_perfect,
        Csi::Imperfect => out.tdd_imperfect,
    }
    .expect("planned"))
}
