//! Large-scale gain composition and small-scale Rayleigh channel draws.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::LargeScaleProfile;
use crate::CMatrix;

/// Which pair of nodes a pathloss model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    BsUe,
    BsBs,
    UeUe,
    /// Self-interference: fixed loss, distance ignored.
    SelfInterference,
}

/// Log-distance pathloss `A + B log10(d)` (dB, d in metres) with log-normal shadowing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathlossModel {
    pub class: LinkClass,
    pub intercept_db: f64,
    pub slope_db: f64,
    pub shadowing_std_db: f64,
    #[serde(default)]
    pub extra_loss_db: f64,
}

impl PathlossModel {
    pub fn self_interference(loss_db: f64) -> Self {
        PathlossModel {
            class: LinkClass::SelfInterference,
            intercept_db: 0.0,
            slope_db: 0.0,
            shadowing_std_db: 0.0,
            extra_loss_db: loss_db,
        }
    }

    /// Deterministic pathloss in dB (no shadowing, no antenna gain).
    pub fn pathloss_db(&self, distance_m: f64) -> Result<f64> {
        match self.class {
            LinkClass::SelfInterference => Ok(self.extra_loss_db),
            _ => {
                if !distance_m.is_finite() || distance_m <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "distance must be positive for {:?} links (got {distance_m})",
                        self.class
                    )));
                }
                Ok(self.intercept_db + self.slope_db * distance_m.log10() + self.extra_loss_db)
            }
        }
    }
}

/// Linear large-scale gain of one link.
pub fn compose_large_scale(pl: &PathlossModel, distance_m: f64, shadow_db: f64, antenna_gain_dbi: f64) -> Result<f64> {
    let loss = pl.pathloss_db(distance_m)?;
    let shadow = if pl.class == LinkClass::SelfInterference { 0.0 } else { shadow_db };
    Ok(10f64.powf((-loss + antenna_gain_dbi + shadow) / 10.0))
}

/// One draw of every small-scale channel in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    cells: usize,
    antennas: usize,
    g_u: Vec<CMatrix>,
    g_d: Vec<CMatrix>,
    v: Vec<CMatrix>,
    f: Vec<CMatrix>,
}

impl ChannelRealization {
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// `M x K_u` channel from the uplink users of cell `l` to BS `j`.
    pub fn g_u(&self, j: usize, l: usize) -> &CMatrix {
        &self.g_u[j * self.cells + l]
    }

    /// `M x K_d` channel from BS `j` to the downlink users of cell `l`.
    pub fn g_d(&self, j: usize, l: usize) -> &CMatrix {
        &self.g_d[j * self.cells + l]
    }

    /// `M x M` channel from BS `l` to BS `j`; empty on the diagonal, where
    /// self-interference enters only through its residual transmitter noise.
    pub fn v(&self, j: usize, l: usize) -> &CMatrix {
        &self.v[j * self.cells + l]
    }

    /// `K_d x K_u` channel from the uplink users of cell `j` to the downlink users of cell `l`.
    pub fn f(&self, l: usize, j: usize) -> &CMatrix {
        &self.f[l * self.cells + j]
    }

    pub(crate) fn from_parts(cells: usize, antennas: usize, links: Links, v: Vec<CMatrix>, f: Vec<CMatrix>) -> Self {
        ChannelRealization {
            cells,
            antennas,
            g_u: links.g_u,
            g_d: links.g_d,
            v,
            f,
        }
    }
}

/// Draw of `CN(0, variance)`.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `rows x cols` matrix with independent `CN(0, variance(col))` entries,
/// filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: impl Fn(usize) -> f64) -> CMatrix {
    let mut data = Vec::with_capacity(rows * cols);
    for c in 0..cols {
        let s = (variance(c) / 2.0).sqrt();
        for _ in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            data.push(Complex64::new(s * re, s * im));
        }
    }
    DMatrix::from_vec(rows, cols, data)
}

/// BS-UE channels of one realization.
pub(crate) struct Links {
    pub g_u: Vec<CMatrix>,
    pub g_d: Vec<CMatrix>,
}

/// Draws all BS-UE channels. Full-duplex downlink columns are copied from
/// the uplink draw.
pub(crate) fn draw_links<R: Rng + ?Sized>(profile: &LargeScaleProfile, antennas: usize, rng: &mut R) -> Links {
    let l_n = profile.cells();
    let (k_u, k_d, k_f) = (profile.ul_users(), profile.dl_users(), profile.fd_users());
    let mut g_u = Vec::with_capacity(l_n * l_n);
    for j in 0..l_n {
        for l in 0..l_n {
            g_u.push(gaussian_matrix(rng, antennas, k_u, |n| profile.beta_u(j, l, n)));
        }
    }
    let mut g_d = Vec::with_capacity(l_n * l_n);
    for j in 0..l_n {
        for l in 0..l_n {
            let hd = gaussian_matrix(rng, antennas, k_d - k_f, |c| profile.beta_d(j, l, k_f + c));
            let up = &g_u[j * l_n + l];
            let mut g = CMatrix::zeros(antennas, k_d);
            g.columns_mut(0, k_f).copy_from(&up.columns(0, k_f));
            g.columns_mut(k_f, k_d - k_f).copy_from(&hd);
            g_d.push(g);
        }
    }
    Links { g_u, g_d }
}

/// Draws the BS-BS matrices for every ordered pair of distinct cells.
pub(crate) fn draw_bs_bs<R: Rng + ?Sized>(profile: &LargeScaleProfile, antennas: usize, rng: &mut R) -> Vec<CMatrix> {
    let l_n = profile.cells();
    let mut out = Vec::with_capacity(l_n * l_n);
    for j in 0..l_n {
        for l in 0..l_n {
            if j == l {
                out.push(CMatrix::zeros(0, 0));
            } else {
                let b = profile.beta_b(j, l);
                out.push(gaussian_matrix(rng, antennas, antennas, |_| b));
            }
        }
    }
    out
}

/// Draws the UE-UE matrices.
pub(crate) fn draw_ue_ue<R: Rng + ?Sized>(profile: &LargeScaleProfile, rng: &mut R) -> Vec<CMatrix> {
    let l_n = profile.cells();
    let (k_u, k_d) = (profile.ul_users(), profile.dl_users());
    let mut out = Vec::with_capacity(l_n * l_n);
    for l in 0..l_n {
        for j in 0..l_n {
            let mut f = CMatrix::zeros(k_d, k_u);
            for n in 0..k_u {
                for k in 0..k_d {
                    f[(k, n)] = complex_normal(rng, profile.beta_i(l, k, j, n));
                }
            }
            out.push(f);
        }
    }
    out
}

/// Draws one realization of every channel in the network: BS-UE links,
/// then BS-BS, then UE-UE, all from `rng`.
pub fn realize_channels<R: Rng + ?Sized>(
    profile: &LargeScaleProfile,
    antennas: usize,
    rng: &mut R,
) -> ChannelRealization {
    let links = draw_links(profile, antennas, rng);
    let v = draw_bs_bs(profile, antennas, rng);
    let f = draw_ue_ue(profile, rng);
    ChannelRealization::from_parts(profile.cells(), antennas, links, v, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bs_ue() -> PathlossModel {
        PathlossModel {
            class: LinkClass::BsUe,
            intercept_db: 100.0,
            slope_db: 0.0,
            shadowing_std_db: 10.0,
            extra_loss_db: 0.0,
        }
    }

    #[test]
    fn db_arithmetic() {
        let b = compose_large_scale(&bs_ue(), 50.0, 0.0, 5.0).unwrap();
        assert!((b / 10f64.powf(-9.5) - 1.0).abs() < 1e-12);
        let b = compose_large_scale(&bs_ue(), 1.0, 10.0, 0.0).unwrap();
        assert!((b / 1e-9 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn self_interference_ignores_distance() {
        let si = PathlossModel::self_interference(40.0);
        assert!((compose_large_scale(&si, 0.0, 3.0, 0.0).unwrap() / 1e-4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slope_applies_per_decade() {
        let pl = PathlossModel {
            slope_db: 20.0,
            ..bs_ue()
        };
        let near = compose_large_scale(&pl, 10.0, 0.0, 0.0).unwrap();
        let far = compose_large_scale(&pl, 100.0, 0.0, 0.0).unwrap();
        assert!((near / far - 100.0).abs() < 1e-9);
    }

    #[test]
    fn nonpositive_distance_is_an_error() {
        assert!(compose_large_scale(&bs_ue(), 0.0, 0.0, 0.0).is_err());
        assert!(compose_large_scale(&bs_ue(), -3.0, 0.0, 0.0).is_err());
    }

    fn mixed_profile() -> LargeScaleProfile {
        let mut p = LargeScaleProfile::filled(2, 1, 2, 3, 0.5).unwrap();
        p.set_beta_u(0, 1, 1, 0.0);
        p.set_beta_d(1, 0, 2, 0.0);
        p
    }

    #[test]
    fn shapes_and_reciprocity() {
        let p = mixed_profile();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = realize_channels(&p, 6, &mut rng);
        assert_eq!(r.g_u(0, 1).shape(), (6, 2));
        assert_eq!(r.g_d(1, 0).shape(), (6, 3));
        assert_eq!(r.v(0, 1).shape(), (6, 6));
        assert_eq!(r.v(1, 1).shape(), (0, 0));
        assert_eq!(r.f(1, 0).shape(), (3, 2));
        for j in 0..2 {
            for l in 0..2 {
                assert_eq!(r.g_u(j, l).column(0), r.g_d(j, l).column(0));
                assert_ne!(r.g_u(j, l).column(1), r.g_d(j, l).column(1));
            }
        }
    }

    #[test]
    fn zero_variance_entries_are_zero() {
        let p = mixed_profile();
        let r = realize_channels(&p, 4, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(r.g_u(0, 1).column(1).iter().all(|z| z.norm() == 0.0));
        assert!(r.g_d(1, 0).column(2).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn same_seed_same_realization() {
        let p = mixed_profile();
        let a = realize_channels(&p, 5, &mut ChaCha8Rng::seed_from_u64(9));
        let b = realize_channels(&p, 5, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn unit_variance_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let s: f64 = (0..n).map(|_| complex_normal(&mut rng, 1.0).norm_sqr()).sum();
        assert!((s / n as f64 - 1.0).abs() < 0.01);
    }
}
