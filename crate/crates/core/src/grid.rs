//! Sparse uniform-grid index with a pyramid of coarser levels.
//!
//! Leaves have side `cell`; level `L` groups `2^L x 2^L` leaves. Ball counts
//! take whole cells that lie strictly inside the ball, skip cells strictly
//! outside, and only test individual points in leaves that straddle the
//! boundary. Counts are exact: they agree with a linear scan using
//! [`in_open_ball`].

use num_complex::Complex64;
use rustc_hash::FxHashMap;

type Key = (i64, i64);

/// Stop adding levels once the top level has at most this many cells.
const TOP_LEVEL_CELLS: usize = 16;

/// Open-ball membership, the single predicate all counting goes through.
#[inline]
pub fn in_open_ball(p: Complex64, center: Complex64, r: f64) -> bool {
    (p - center).norm() < r
}

#[derive(Debug, Clone)]
pub struct GridIndex {
    origin: (f64, f64),
    cell: f64,
    /// Points sorted by leaf key.
    points: Vec<Complex64>,
    leaves: FxHashMap<Key, (u32, u32)>,
    /// `levels[i]` holds counts for level `i + 1`.
    levels: Vec<FxHashMap<Key, u32>>,
    top: Vec<Key>,
}

impl GridIndex {
    /// Panics if `cell` is not a positive finite number or a point is not finite.
    pub fn new(points: Vec<Complex64>, cell: f64) -> Self {
        assert!(cell.is_finite() && cell > 0.0, "cell size must be positive");
        assert!(points.iter().all(|p| p.is_finite()), "points must be finite");
        let ox = points.iter().map(|p| p.re).fold(f64::INFINITY, f64::min);
        let oy = points.iter().map(|p| p.im).fold(f64::INFINITY, f64::min);
        let origin = if points.is_empty() { (0.0, 0.0) } else { (ox - cell, oy - cell) };
        let key_of = |p: &Complex64| -> Key {
            (((p.re - origin.0) / cell).floor() as i64, ((p.im - origin.1) / cell).floor() as i64)
        };

        let mut keyed: Vec<(Key, Complex64)> = points.iter().map(|p| (key_of(p), *p)).collect();
        // Stable sort keeps input order inside a leaf.
        keyed.sort_by_key(|(k, _)| *k);
        let mut leaves = FxHashMap::default();
        let mut start = 0usize;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start;
            while end < keyed.len() && keyed[end].0 == key {
                end += 1;
            }
            leaves.insert(key, (start as u32, (end - start) as u32));
            start = end;
        }
        let points: Vec<Complex64> = keyed.into_iter().map(|(_, p)| p).collect();

        let mut levels: Vec<FxHashMap<Key, u32>> = Vec::new();
        let mut current: FxHashMap<Key, u32> = leaves.iter().map(|(k, &(_, n))| (*k, n)).collect();
        while current.len() > TOP_LEVEL_CELLS {
            let mut next: FxHashMap<Key, u32> = FxHashMap::default();
            for (&(i, j), &n) in &current {
                *next.entry((i >> 1, j >> 1)).or_insert(0) += n;
            }
            levels.push(next.clone());
            current = next;
        }
        let mut top: Vec<Key> = current.keys().copied().collect();
        top.sort_unstable();
        Self {
            origin,
            cell,
            points,
            leaves,
            levels,
            top,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Points in leaf order (not input order).
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    fn top_level(&self) -> usize {
        self.levels.len()
    }

    fn cell_count(&self, level: usize, key: Key) -> u32 {
        if level == 0 {
            self.leaves.get(&key).map_or(0, |&(_, n)| n)
        } else {
            self.levels[level - 1].get(&key).copied().unwrap_or(0)
        }
    }

    /// Min and max distance from `z` to the closed rectangle of a cell.
    fn cell_distances(&self, level: usize, key: Key, z: Complex64) -> (f64, f64) {
        let size = self.cell * (1u64 << level) as f64;
        let x0 = self.origin.0 + key.0 as f64 * size;
        let y0 = self.origin.1 + key.1 as f64 * size;
        let (x1, y1) = (x0 + size, y0 + size);
        let dx = (x0 - z.re).max(0.0).max(z.re - x1);
        let dy = (y0 - z.im).max(0.0).max(z.im - y1);
        let fx = (z.re - x0).abs().max((x1 - z.re).abs());
        let fy = (z.im - y0).abs().max((y1 - z.im).abs());
        (dx.hypot(dy), fx.hypot(fy))
    }

    fn margin(&self, z: Complex64, r: f64) -> f64 {
        1e-9 * self.cell + 1e-14 * (z.norm() + r + self.origin.0.abs() + self.origin.1.abs())
    }

    /// Number of points with `|p - z| < r`.
    pub fn count_in_ball(&self, z: Complex64, r: f64) -> usize {
        if !(r > 0.0) || self.points.is_empty() {
            return 0;
        }
        let margin = self.margin(z, r);
        let level = self.top_level();
        self.top.iter().map(|&k| self.count_rec(level, k, z, r, margin)).sum()
    }

    fn count_rec(&self, level: usize, key: Key, z: Complex64, r: f64, margin: f64) -> usize {
        let n = self.cell_count(level, key);
        if n == 0 {
            return 0;
        }
        let (dmin, dmax) = self.cell_distances(level, key, z);
        if dmin > r + margin {
            return 0;
        }
        if dmax < r - margin {
            return n as usize;
        }
        if level == 0 {
            let (start, len) = self.leaves[&key];
            return self.points[start as usize..(start + len) as usize]
                .iter()
                .filter(|&&p| in_open_ball(p, z, r))
                .count();
        }
        let (i, j) = key;
        [(2 * i, 2 * j), (2 * i + 1, 2 * j), (2 * i, 2 * j + 1), (2 * i + 1, 2 * j + 1)]
            .into_iter()
            .map(|child| self.count_rec(level - 1, child, z, r, margin))
            .sum()
    }

    /// Calls `f` on every point with `|p - z| < r`.
    pub fn for_each_in_ball<F: FnMut(Complex64)>(&self, z: Complex64, r: f64, mut f: F) {
        if !(r > 0.0) {
            return;
        }
        let margin = self.margin(z, r);
        let level = self.top_level();
        for &k in &self.top {
            self.visit_rec(level, k, z, r, margin, &mut f);
        }
    }

    fn visit_rec<F: FnMut(Complex64)>(&self, level: usize, key: Key, z: Complex64, r: f64, margin: f64, f: &mut F) {
        if self.cell_count(level, key) == 0 {
            return;
        }
        let (dmin, _) = self.cell_distances(level, key, z);
        if dmin > r + margin {
            return;
        }
        if level == 0 {
            let (start, len) = self.leaves[&key];
            for &p in &self.points[start as usize..(start + len) as usize] {
                if in_open_ball(p, z, r) {
                    f(p);
                }
            }
            return;
        }
        let (i, j) = key;
        for child in [(2 * i, 2 * j), (2 * i + 1, 2 * j), (2 * i, 2 * j + 1), (2 * i + 1, 2 * j + 1)] {
            self.visit_rec(level - 1, child, z, r, margin, f);
        }
    }

    /// Nearest indexed point and its distance.
    pub fn nearest(&self, z: Complex64) -> Option<(Complex64, f64)> {
        let mut best: Option<(Complex64, f64)> = None;
        let level = self.top_level();
        let mut tops: Vec<(f64, Key)> = self
            .top
            .iter()
            .map(|&k| (self.cell_distances(level, k, z).0, k))
            .collect();
        tops.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, k) in tops {
            self.nearest_rec(level, k, z, &mut best);
        }
        best
    }

    fn nearest_rec(&self, level: usize, key: Key, z: Complex64, best: &mut Option<(Complex64, f64)>) {
        if self.cell_count(level, key) == 0 {
            return;
        }
        let (dmin, _) = self.cell_distances(level, key, z);
        if let Some((_, d)) = best {
            if dmin > *d {
                return;
            }
        }
        if level == 0 {
            let (start, len) = self.leaves[&key];
            for &p in &self.points[start as usize..(start + len) as usize] {
                let d = (p - z).norm();
                if best.map_or(true, |(_, bd)| d < bd) {
                    *best = Some((p, d));
                }
            }
            return;
        }
        let (i, j) = key;
        let mut children: Vec<(f64, Key)> = [(2 * i, 2 * j), (2 * i + 1, 2 * j), (2 * i, 2 * j + 1), (2 * i + 1, 2 * j + 1)]
            .into_iter()
            .map(|c| (self.cell_distances(level - 1, c, z).0, c))
            .collect();
        children.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, c) in children {
            self.nearest_rec(level - 1, c, z, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Complex64], z: Complex64, r: f64) -> usize {
        points.iter().filter(|&&p| in_open_ball(p, z, r)).count()
    }

    #[test]
    fn counts_match_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Complex64> = (0..5000)
            .map(|_| Complex64::from_polar(rng.gen_range(0.5..1.0), rng.gen_range(0.0..6.3)))
            .collect();
        let index = GridIndex::new(pts.clone(), 1e-3);
        for _ in 0..1000 {
            let z = Complex64::new(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2));
            let r = 10f64.powf(rng.gen_range(-3.5..0.5));
            assert_eq!(index.count_in_ball(z, r), brute(&pts, z, r));
        }
    }

    #[test]
    fn ball_on_sample_point_and_zero_radius() {
        let pts = vec![Complex64::new(0.25, 0.0), Complex64::new(0.5, 0.0)];
        let index = GridIndex::new(pts, 0.01);
        assert_eq!(index.count_in_ball(Complex64::new(0.25, 0.0), 0.0), 0);
        // Open ball: the point at distance exactly 0.25 is excluded.
        assert_eq!(index.count_in_ball(Complex64::new(0.25, 0.0), 0.25), 1);
        assert_eq!(index.count_in_ball(Complex64::new(0.25, 0.0), 0.2500001), 2);
    }

    #[test]
    fn nearest_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Complex64> = (0..2000)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let index = GridIndex::new(pts.clone(), 0.01);
        for _ in 0..200 {
            let z = Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let (_, d) = index.nearest(z).unwrap();
            let best = pts.iter().map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min);
            assert_eq!(d, best);
        }
        assert!(GridIndex::new(Vec::new(), 1.0).nearest(Complex64::new(0.0, 0.0)).is_none());
    }

    #[test]
    fn visits_exactly_the_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Complex64> = (0..3000)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let index = GridIndex::new(pts.clone(), 0.005);
        let z = Complex64::new(0.1, -0.2);
        let mut seen = 0;
        index.for_each_in_ball(z, 0.3, |p| {
            assert!(in_open_ball(p, z, 0.3));
            seen += 1;
        });
        assert_eq!(seen, brute(&pts, z, 0.3));
    }
}
