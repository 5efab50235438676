//! Random drops of small-cell BSs and their UEs.
//!
//! BSs are placed uniformly in a flat-top hexagon, UEs uniformly in a disc
//! around their serving BS. Every placement is redrawn until the minimum
//! distance constraints hold, up to a fixed retry budget per entity.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ScenarioParams;

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Whether `p` lies inside the flat-top hexagon of circumradius `r` centred at the origin.
pub fn in_hexagon(p: Point, r: f64) -> bool {
    let (x, y) = (p[0].abs(), p[1].abs());
    let s3 = 3f64.sqrt();
    y <= s3 / 2.0 * r && s3 * x + y <= s3 * r
}

/// Uniform point in the hexagon by rejection from its bounding box.
pub fn sample_hexagon<R: Rng + ?Sized>(rng: &mut R, r: f64) -> Point {
    let h = 3f64.sqrt() / 2.0 * r;
    loop {
        let p = [rng.random_range(-r..=r), rng.random_range(-h..=h)];
        if in_hexagon(p, r) {
            return p;
        }
    }
}

/// Uniform point in the disc of the given radius around `center`.
pub fn sample_disc<R: Rng + ?Sized>(rng: &mut R, center: Point, radius: f64) -> Point {
    let rho = radius * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    [center[0] + rho * theta.cos(), center[1] + rho * theta.sin()]
}

/// Node positions of one drop, in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub hex_radius: f64,
    pub bs_positions: Vec<Point>,
    /// Uplink UEs per cell.
    pub ul_ue_positions: Vec<Vec<Point>>,
    /// Downlink UEs per cell.
    pub dl_ue_positions: Vec<Vec<Point>>,
}

impl Topology {
    fn all_ues(&self) -> impl Iterator<Item = (usize, Point)> + '_ {
        let ul = self.ul_ue_positions.iter().enumerate().flat_map(|(c, v)| v.iter().map(move |p| (c, *p)));
        let dl = self.dl_ue_positions.iter().enumerate().flat_map(|(c, v)| v.iter().map(move |p| (c, *p)));
        ul.chain(dl)
    }

    /// Checks every placement rule of `params`.
    pub fn satisfies(&self, params: &ScenarioParams) -> bool {
        let bs = &self.bs_positions;
        if bs.len() != params.n_bs {
            return false;
        }
        let bs_ok = bs.iter().all(|p| in_hexagon(*p, self.hex_radius))
            && (0..bs.len()).all(|a| (a + 1..bs.len()).all(|b| distance(bs[a], bs[b]) >= params.min_dist_bs_bs_m));
        let ues: Vec<(usize, Point)> = self.all_ues().collect();
        let ue_ok = ues.iter().all(|(c, p)| {
            distance(*p, bs[*c]) <= params.ue_drop_radius_m + 1e-9
                && bs.iter().all(|b| distance(*p, *b) >= params.min_dist_bs_ue_m)
        }) && (0..ues.len()).all(|a| (a + 1..ues.len()).all(|b| distance(ues[a].1, ues[b].1) >= params.min_dist_ue_ue_m));
        bs_ok && ue_ok
    }

    /// Dumps positions as CSV with columns `entity, cell, x, y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["entity", "cell", "x", "y"])?;
        let mut row = |entity: &str, cell: usize, p: Point| {
            w.write_record([entity.to_string(), cell.to_string(), p[0].to_string(), p[1].to_string()])
        };
        for (c, p) in self.bs_positions.iter().enumerate() {
            row("bs", c, *p)?;
        }
        for (c, v) in self.ul_ue_positions.iter().enumerate() {
            for p in v {
                row("ul_ue", c, *p)?;
            }
        }
        for (c, v) in self.dl_ue_positions.iter().enumerate() {
            for p in v {
                row("dl_ue", c, *p)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn place<R: Rng + ?Sized>(
    rng: &mut R,
    budget: usize,
    what: &str,
    mut draw: impl FnMut(&mut R) -> Point,
    ok: impl Fn(Point) -> bool,
) -> Result<Point> {
    for _ in 0..budget {
        let p = draw(rng);
        if ok(p) {
            return Ok(p);
        }
    }
    Err(Error::Infeasible(format!(
        "could not place {what} within {budget} attempts; the area is too small for the distance constraints"
    )))
}

/// Draws one network layout. All UEs keep the minimum distance to every BS
/// and to every other UE.
pub fn build_topology<R: Rng + ?Sized>(params: &ScenarioParams, rng: &mut R) -> Result<Topology> {
    params.validate()?;
    let budget = params.placement_retry_budget;
    let r = params.hex_radius_m;
    let mut bs: Vec<Point> = Vec::with_capacity(params.n_bs);
    for c in 0..params.n_bs {
        let p = place(rng, budget, &format!("BS {c}"), |g| sample_hexagon(g, r), |p| {
            bs.iter().all(|q| distance(p, *q) >= params.min_dist_bs_bs_m)
        })?;
        bs.push(p);
    }

    let mut ues: Vec<Point> = Vec::new();
    let mut ul = vec![Vec::with_capacity(params.n_ul_hd); params.n_bs];
    let mut dl = vec![Vec::with_capacity(params.n_dl_hd); params.n_bs];
    for c in 0..params.n_bs {
        for (kind, count, dest) in [("uplink", params.n_ul_hd, &mut ul[c]), ("downlink", params.n_dl_hd, &mut dl[c])] {
            for k in 0..count {
                let p = place(
                    rng,
                    budget,
                    &format!("{kind} UE {k} of cell {c}"),
                    |g| sample_disc(g, bs[c], params.ue_drop_radius_m),
                    |p| {
                        bs.iter().all(|q| distance(p, *q) >= params.min_dist_bs_ue_m)
                            && ues.iter().all(|q| distance(p, *q) >= params.min_dist_ue_ue_m)
                    },
                )?;
                ues.push(p);
                dest.push(p);
            }
        }
    }
    Ok(Topology {
        hex_radius: r,
        bs_positions: bs,
        ul_ue_positions: ul,
        dl_ue_positions: dl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_drop_satisfies_constraints() {
        let params = ScenarioParams::default();
        for seed in 0..5 {
            let t = build_topology(&params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!(t.satisfies(&params));
            assert_eq!(t.bs_positions.len(), 12);
            assert!(t.ul_ue_positions.iter().all(|v| v.len() == 5));
        }
    }

    #[test]
    fn single_bs_single_ue() {
        let params = ScenarioParams {
            n_bs: 1,
            n_ul_hd: 1,
            n_dl_hd: 0,
            ..ScenarioParams::default()
        };
        let t = build_topology(&params, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let d = distance(t.ul_ue_positions[0][0], t.bs_positions[0]);
        assert!((10.0..=40.0).contains(&d));
    }

    #[test]
    fn tiny_region_is_infeasible() {
        let params = ScenarioParams {
            hex_radius_m: 0.1,
            placement_retry_budget: 1000,
            ..ScenarioParams::default()
        };
        let err = build_topology(&params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn csv_dump_has_one_row_per_node() {
        let params = ScenarioParams {
            n_bs: 2,
            ..ScenarioParams::default()
        };
        let t = build_topology(&params, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("entity,cell,x,y\n"));
        assert_eq!(text.lines().count(), 1 + 2 + 2 * 10);
    }

    #[test]
    fn hexagon_membership() {
        assert!(in_hexagon([0.0, 0.0], 1.0));
        assert!(in_hexagon([0.99, 0.0], 1.0));
        assert!(!in_hexagon([0.0, 0.9], 1.0));
        assert!(!in_hexagon([0.8, 0.5], 1.0));
    }
}
