//! Square-shell direction sets and their per-grid preparation.

use std::sync::Arc;

use crate::grid::Grid2D;

/// Directions of the square shell `max(|i|,|j|) = k`, for every radius `1..=k`.
///
/// Samples are taken at Euclidean distance `r h` along each lattice direction
/// and obtained by bilinear interpolation, so every tap weight is non-negative.
#[derive(Debug, Clone)]
pub struct Stencil {
    k: usize,
    shells: Vec<Shell>,
}

#[derive(Debug, Clone)]
pub struct Shell {
    radius: usize,
    dirs: Vec<Direction>,
}

#[derive(Debug, Clone)]
pub struct Direction {
    /// Lattice offset on the square shell.
    pub offset: (i64, i64),
    /// Unit vector along `offset`.
    pub unit: [f64; 2],
    /// `(di, dj, weight)` bilinear taps of the point `radius * unit`.
    pub taps: Vec<(i64, i64, f64)>,
}

impl Stencil {
    pub fn new(k: usize) -> Self {
        let k = k.max(1);
        let shells = (1..=k).map(Shell::new).collect();
        Self { k, shells }
    }

    /// Default radius multiplier `k ~ h^{-1/2}`.
    pub fn default_radius(h: f64) -> usize {
        (h.powf(-0.5)).round().max(1.0) as usize
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn shell(&self, radius: usize) -> &Shell {
        &self.shells[radius - 1]
    }

    pub fn prepare(&self, grid: &Arc<Grid2D>) -> PreparedStencil {
        PreparedStencil::new(self, grid)
    }
}

impl Shell {
    fn new(r: usize) -> Self {
        let ri = r as i64;
        let mut offs = Vec::with_capacity(8 * r);
        for d in -ri..=ri {
            offs.push((d, -ri));
            offs.push((d, ri));
        }
        for d in -ri + 1..ri {
            offs.push((-ri, d));
            offs.push((ri, d));
        }
        // counterclockwise from angle 0, so the opposite of entry i is entry i + 4r
        offs.sort_by(|a, b| angle(*a).total_cmp(&angle(*b)));
        let dirs = offs
            .into_iter()
            .map(|(i, j)| {
                let len = ((i * i + j * j) as f64).sqrt();
                let unit = [i as f64 / len, j as f64 / len];
                let taps = bilinear_taps(r as f64 * unit[0], r as f64 * unit[1]);
                Direction {
                    offset: (i, j),
                    unit,
                    taps,
                }
            })
            .collect();
        Self { radius: r, dirs }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn directions(&self) -> &[Direction] {
        &self.dirs
    }
}

fn angle((i, j): (i64, i64)) -> f64 {
    let a = (j as f64).atan2(i as f64);
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-12 {
        r
    } else {
        x
    }
}

fn bilinear_taps(x: f64, y: f64) -> Vec<(i64, i64, f64)> {
    let (x, y) = (snap(x), snap(y));
    let (fx, fy) = (x.floor(), y.floor());
    let (tx, ty) = (x - fx, y - fy);
    let (i, j) = (fx as i64, fy as i64);
    [
        (i, j, (1.0 - tx) * (1.0 - ty)),
        (i + 1, j, tx * (1.0 - ty)),
        (i, j + 1, (1.0 - tx) * ty),
        (i + 1, j + 1, tx * ty),
    ]
    .into_iter()
    .filter(|t| t.2 > 1e-14)
    .collect()
}

/// A stencil bound to one grid: linear tap offsets and the clipped radius of
/// every inside node.
#[derive(Debug, Clone)]
pub struct PreparedStencil {
    pub(crate) grid: Arc<Grid2D>,
    k: usize,
    /// Per radius `r` (index `r-1`): start index of each direction into `taps`.
    dir_start: Vec<Vec<usize>>,
    taps: Vec<(isize, f64)>,
    /// Clipped radius of each inside node, in `grid.inside()` order.
    node_radius: Vec<usize>,
}

impl PreparedStencil {
    fn new(st: &Stencil, grid: &Arc<Grid2D>) -> Self {
        let nx = grid.nx() as isize;
        let mut dir_start = Vec::with_capacity(st.k);
        let mut taps = Vec::new();
        for shell in &st.shells {
            let mut starts = Vec::with_capacity(shell.dirs.len() + 1);
            for d in &shell.dirs {
                starts.push(taps.len());
                taps.extend(d.taps.iter().map(|&(di, dj, w)| (di as isize + dj as isize * nx, w)));
            }
            starts.push(taps.len());
            dir_start.push(starts);
        }
        let node_radius = grid
            .inside()
            .iter()
            .map(|&k| grid.clear_radius(k, st.k).max(1))
            .collect();
        Self {
            grid: Arc::clone(grid),
            k: st.k,
            dir_start,
            taps,
            node_radius,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    /// Clipped radius of the `pos`-th inside node.
    #[inline]
    pub fn node_radius(&self, pos: usize) -> usize {
        self.node_radius[pos]
    }

    #[inline]
    pub fn n_dirs(&self, radius: usize) -> usize {
        self.dir_start[radius - 1].len() - 1
    }

    /// Interpolated increment `u(x + r e_dir) - u(x)` at node `k`.
    #[inline]
    pub fn increment(&self, values: &[f64], k: usize, radius: usize, dir: usize) -> f64 {
        let starts = &self.dir_start[radius - 1];
        let u0 = values[k];
        let mut s = 0.0;
        for &(off, w) in &self.taps[starts[dir]..starts[dir + 1]] {
            s += w * (values[(k as isize + off) as usize] - u0);
        }
        s
    }

    /// `(max increment, argmax, min increment, argmin)` over the shell.
    #[inline]
    pub fn extremes(&self, values: &[f64], k: usize, radius: usize) -> (f64, usize, f64, usize) {
        let mut hi = (f64::NEG_INFINITY, 0);
        let mut lo = (f64::INFINITY, 0);
        for dir in 0..self.n_dirs(radius) {
            let d = self.increment(values, k, radius, dir);
            if d > hi.0 {
                hi = (d, dir);
            }
            if d < lo.0 {
                lo = (d, dir);
            }
        }
        (hi.0, hi.1, lo.0, lo.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shells_are_point_symmetric() {
        for k in 1..=6 {
            let st = Stencil::new(k);
            for r in 1..=k {
                let dirs = st.shell(r).directions();
                assert_eq!(dirs.len(), 8 * r);
                assert!(dirs.len() >= 8);
                for (i, d) in dirs.iter().enumerate() {
                    let opp = &dirs[(i + 4 * r) % (8 * r)];
                    assert_eq!(opp.offset, (-d.offset.0, -d.offset.1));
                    assert_eq!(d.offset.0.abs().max(d.offset.1.abs()), r as i64);
                }
            }
        }
    }

    #[test]
    fn taps_are_convex_weights_inside_the_shell() {
        let st = Stencil::new(5);
        for r in 1..=5 {
            for d in st.shell(r).directions() {
                let s: f64 = d.taps.iter().map(|t| t.2).sum();
                assert!((s - 1.0).abs() < 1e-12);
                for &(i, j, w) in &d.taps {
                    assert!(w > 0.0);
                    assert!(i.abs().max(j.abs()) <= r as i64);
                }
                // taps reproduce the sample point
                let x: f64 = d.taps.iter().map(|t| t.0 as f64 * t.2).sum();
                let y: f64 = d.taps.iter().map(|t| t.1 as f64 * t.2).sum();
                assert!((x - r as f64 * d.unit[0]).abs() < 1e-12);
                assert!((y - r as f64 * d.unit[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn axis_directions_hit_lattice_nodes() {
        let st = Stencil::new(3);
        let d = &st.shell(3).directions()[0];
        assert_eq!(d.offset, (3, 0));
        assert_eq!(d.taps, vec![(3, 0, 1.0)]);
    }

    #[test]
    fn default_radius_scaling() {
        assert_eq!(Stencil::default_radius(1.0 / 64.0), 8);
        assert_eq!(Stencil::default_radius(1.0 / 128.0), 11);
        assert_eq!(Stencil::default_radius(4.0), 1);
    }
}
