//! Exact fixed-radius neighbor search on a uniform cell grid.

use std::collections::HashMap;

use rayon::prelude::*;

/// Squared Euclidean distance.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Grid of cubic cells of side `radius`, hashed by integer cell coordinates.
pub struct CellGrid<'a> {
    points: &'a [Vec<f64>],
    radius: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> CellGrid<'a> {
    pub fn new(points: &'a [Vec<f64>], radius: f64) -> Self {
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(cell_of(p, radius)).or_default().push(i);
        }
        CellGrid {
            points,
            radius,
            cells,
        }
    }

    /// Indices `j > i` with `|x_i - x_j| <= radius`, ascending, with distances.
    pub fn upper_neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        let p = &self.points[i];
        let home = cell_of(p, self.radius);
        let r2 = self.radius * self.radius;
        let mut out = Vec::new();
        let dim = home.len();
        let mut offset = vec![-1i64; dim];
        loop {
            let key: Vec<i64> = home.iter().zip(&offset).map(|(a, b)| a + b).collect();
            if let Some(members) = self.cells.get(&key) {
                for &j in members {
                    if j > i {
                        let d2 = dist2(p, &self.points[j]);
                        if d2 <= r2 {
                            out.push((j, d2.sqrt()));
                        }
                    }
                }
            }
            // odometer over {-1, 0, 1}^dim
            let mut a = 0;
            while a < dim && offset[a] == 1 {
                offset[a] = -1;
                a += 1;
            }
            if a == dim {
                break;
            }
            offset[a] += 1;
        }
        out.sort_by_key(|&(j, _)| j);
        out
    }
}

fn cell_of(p: &[f64], radius: f64) -> Vec<i64> {
    p.iter().map(|v| (v / radius).floor() as i64).collect()
}

/// All pairs `i < j` within `radius`, grouped by `i` in ascending order.
pub fn radius_pairs(points: &[Vec<f64>], radius: f64) -> Vec<Vec<(usize, f64)>> {
    let grid = CellGrid::new(points, radius);
    (0..points.len())
        .into_par_iter()
        .map(|i| grid.upper_neighbors(i))
        .collect()
}
