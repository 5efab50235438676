//! Large-scale fading coefficients of an L-cell network.

use serde::{Deserialize, Serialize};

use crate::config::{HomogeneousConfig, SystemConfig, Violation};
use crate::error::{Error, Result};

/// The four families of large-scale gains.
///
/// * `beta_u(j, l, n)`: uplink user `n` of cell `l` to BS `j`.
/// * `beta_d(j, l, k)`: BS `j` to downlink user `k` of cell `l`.
/// * `beta_b(j, l)`: BS `l` to BS `j`; the diagonal is the BS self-interference gain.
/// * `beta_i(l, k, j, n)`: uplink user `n` of cell `j` to downlink user `k` of
///   cell `l`; `beta_i(l, k, l, k)` with `k < fd_users` is a UE self-interference gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleProfile {
    cells: usize,
    fd_users: usize,
    ul_users: usize,
    dl_users: usize,
    beta_u: Vec<f64>,
    beta_d: Vec<f64>,
    beta_b: Vec<f64>,
    beta_i: Vec<f64>,
}

impl LargeScaleProfile {
    /// Profile with every entry set to `value`.
    pub fn filled(cells: usize, fd_users: usize, ul_users: usize, dl_users: usize, value: f64) -> Result<Self> {
        if fd_users > ul_users || fd_users > dl_users {
            return Err(Error::InvalidArgument(format!(
                "fd_users = {fd_users} exceeds K_u = {ul_users} or K_d = {dl_users}"
            )));
        }
        Ok(LargeScaleProfile {
            cells,
            fd_users,
            ul_users,
            dl_users,
            beta_u: vec![value; cells * cells * ul_users],
            beta_d: vec![value; cells * cells * dl_users],
            beta_b: vec![value; cells * cells],
            beta_i: vec![value; cells * dl_users * cells * ul_users],
        })
    }

    /// Profile sized for `cfg`, every entry produced by the given closures.
    /// Full-duplex downlink entries are taken from `fu` so reciprocity holds
    /// by construction.
    pub fn from_fn(
        cfg: &SystemConfig,
        mut fu: impl FnMut(usize, usize, usize) -> f64,
        mut fd: impl FnMut(usize, usize, usize) -> f64,
        mut fb: impl FnMut(usize, usize) -> f64,
        mut fi: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut p = LargeScaleProfile::filled(cfg.cells, cfg.fd_users, cfg.k_u(), cfg.k_d(), 0.0)
            .expect("SystemConfig user counts are consistent");
        let l_n = cfg.cells;
        for j in 0..l_n {
            for l in 0..l_n {
                for n in 0..p.ul_users {
                    p.set_beta_u(j, l, n, fu(j, l, n));
                }
                for k in 0..p.dl_users {
                    let v = if k < p.fd_users { p.beta_u(j, l, k) } else { fd(j, l, k) };
                    p.set_beta_d(j, l, k, v);
                }
                p.set_beta_b(j, l, fb(j, l));
            }
        }
        for l in 0..l_n {
            for k in 0..p.dl_users {
                for j in 0..l_n {
                    for n in 0..p.ul_users {
                        p.set_beta_i(l, k, j, n, fi(l, k, j, n));
                    }
                }
            }
        }
        p
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn fd_users(&self) -> usize {
        self.fd_users
    }

    pub fn ul_users(&self) -> usize {
        self.ul_users
    }

    pub fn dl_users(&self) -> usize {
        self.dl_users
    }

    #[inline]
    fn iu(&self, j: usize, l: usize, n: usize) -> usize {
        (j * self.cells + l) * self.ul_users + n
    }

    #[inline]
    fn id(&self, j: usize, l: usize, k: usize) -> usize {
        (j * self.cells + l) * self.dl_users + k
    }

    #[inline]
    fn ii(&self, l: usize, k: usize, j: usize, n: usize) -> usize {
        ((l * self.dl_users + k) * self.cells + j) * self.ul_users + n
    }

    #[inline]
    pub fn beta_u(&self, j: usize, l: usize, n: usize) -> f64 {
        self.beta_u[self.iu(j, l, n)]
    }

    #[inline]
    pub fn beta_d(&self, j: usize, l: usize, k: usize) -> f64 {
        self.beta_d[self.id(j, l, k)]
    }

    #[inline]
    pub fn beta_b(&self, j: usize, l: usize) -> f64 {
        self.beta_b[j * self.cells + l]
    }

    #[inline]
    pub fn beta_i(&self, l: usize, k: usize, j: usize, n: usize) -> f64 {
        self.beta_i[self.ii(l, k, j, n)]
    }

    pub fn set_beta_u(&mut self, j: usize, l: usize, n: usize, v: f64) {
        let i = self.iu(j, l, n);
        self.beta_u[i] = v;
    }

    pub fn set_beta_d(&mut self, j: usize, l: usize, k: usize, v: f64) {
        let i = self.id(j, l, k);
        self.beta_d[i] = v;
    }

    pub fn set_beta_b(&mut self, j: usize, l: usize, v: f64) {
        let i = j * self.cells + l;
        self.beta_b[i] = v;
    }

    pub fn set_beta_i(&mut self, l: usize, k: usize, j: usize, n: usize, v: f64) {
        let i = self.ii(l, k, j, n);
        self.beta_i[i] = v;
    }

    /// Sets the gain of full-duplex user `i` towards BS `j` in both directions.
    pub fn set_beta_fd(&mut self, j: usize, l: usize, i: usize, v: f64) {
        self.set_beta_u(j, l, i, v);
        self.set_beta_d(j, l, i, v);
    }

    /// Large-scale gains of one pilot slot as seen by BS `j`, indexed by the
    /// cell of the transmitting user.
    pub fn pilot_betas(&self, link: crate::config::Link, j: usize, k: usize) -> Vec<f64> {
        (0..self.cells)
            .map(|l| match link {
                crate::config::Link::Uplink => self.beta_u(j, l, k),
                crate::config::Link::Downlink => self.beta_d(j, l, k),
            })
            .collect()
    }

    /// Entries must be finite and nonnegative, and full-duplex users must
    /// see identical uplink and downlink gains towards every BS.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        let families: [(&str, &[f64]); 4] = [
            ("beta_u", &self.beta_u),
            ("beta_d", &self.beta_d),
            ("beta_b", &self.beta_b),
            ("beta_i", &self.beta_i),
        ];
        for (name, values) in families {
            if let Some(pos) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                violations.push(Violation {
                    field: name.to_string(),
                    rule: format!("entries must be finite and >= 0 (flat index {pos} = {})", values[pos]),
                });
            }
        }
        'outer: for j in 0..self.cells {
            for l in 0..self.cells {
                for i in 0..self.fd_users {
                    if self.beta_u(j, l, i) != self.beta_d(j, l, i) {
                        violations.push(Violation {
                            field: "beta_d".to_string(),
                            rule: format!(
                                "full-duplex user {i} of cell {l} must have beta_u = beta_d towards BS {j}"
                            ),
                        });
                        break 'outer;
                    }
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(violations))
        }
    }

    /// Checks that the profile has the shape `cfg` describes.
    pub fn check_shape(&self, cfg: &SystemConfig) -> Result<()> {
        if self.cells != cfg.cells
            || self.fd_users != cfg.fd_users
            || self.ul_users != cfg.k_u()
            || self.dl_users != cfg.k_d()
        {
            return Err(Error::InvalidArgument(format!(
                "profile shape (L={}, K_f={}, K_u={}, K_d={}) does not match config (L={}, K_f={}, K_u={}, K_d={})",
                self.cells,
                self.fd_users,
                self.ul_users,
                self.dl_users,
                cfg.cells,
                cfg.fd_users,
                cfg.k_u(),
                cfg.k_d()
            )));
        }
        Ok(())
    }
}

/// Profile of a homogeneous network: same-cell gains 1, cross-cell gains `beta`.
pub fn expand_homogeneous(h: &HomogeneousConfig) -> Result<LargeScaleProfile> {
    h.validate()?;
    let cfg = h.system_config();
    let b = h.beta;
    let pick = |same: bool| if same { 1.0 } else { b };
    Ok(LargeScaleProfile::from_fn(
        &cfg,
        |j, l, _| pick(j == l),
        |j, l, _| pick(j == l),
        |j, l| pick(j == l),
        |l, _, j, _| pick(l == j),
    ))
}
