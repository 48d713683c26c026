//! Occupancy bitmap with per-row prefix counts and an exact distance transform.

use super::footprint::Mask;

#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub width: usize,
    pub height: usize,
    bits: Vec<bool>,
    /// `(width + 1)` prefix counts of occupied cells per row.
    prefix: Vec<u32>,
}

impl Occupancy {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Occupancy {
        assert_eq!(bits.len(), width * height, "bitmap size mismatch");
        let mut o = Occupancy { width, height, bits, prefix: vec![0; (width + 1) * height] };
        for r in 0..height {
            o.refresh_row(r);
        }
        o
    }

    fn refresh_row(&mut self, r: usize) {
        let w = self.width;
        let base = r * (w + 1);
        let mut acc = 0u32;
        self.prefix[base] = 0;
        for c in 0..w {
            acc += self.bits[r * w + c] as u32;
            self.prefix[base + c + 1] = acc;
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn free_count(&self) -> usize {
        self.bits.iter().filter(|b| !**b).count()
    }

    /// Occupied cells among columns `lo..=hi` of row `r`; out-of-range columns count as occupied.
    fn occupied_in(&self, r: i64, lo: i64, hi: i64) -> bool {
        if r < 0 || r >= self.height as i64 || lo < 0 || hi >= self.width as i64 {
            return true;
        }
        let base = r as usize * (self.width + 1);
        self.prefix[base + hi as usize + 1] != self.prefix[base + lo as usize]
    }

    /// True iff every mask cell anchored at `(col, row)` is free and inside the grid.
    pub fn fits(&self, mask: &Mask, col: usize, row: usize) -> bool {
        let (c, r) = (col as i64, row as i64);
        mask.rows().all(|(dr, lo, hi)| !self.occupied_in(r + dr as i64, c + lo as i64, c + hi as i64))
    }

    /// Free in-grid cells the mask covers when anchored at `(col, row)`.
    pub fn covered_free(&self, mask: &Mask, col: usize, row: usize, out: &mut Vec<usize>) {
        out.clear();
        let (c, r) = (col as i64, row as i64);
        for (dr, lo, hi) in mask.rows() {
            let rr = r + dr as i64;
            if rr < 0 || rr >= self.height as i64 {
                continue;
            }
            let lo = (c + lo as i64).max(0);
            let hi = (c + hi as i64).min(self.width as i64 - 1);
            for cc in lo..=hi {
                let i = rr as usize * self.width + cc as usize;
                if !self.bits[i] {
                    out.push(i);
                }
            }
        }
    }

    /// Marks the mask cells occupied; returns how many were free before.
    pub fn stamp(&mut self, mask: &Mask, col: usize, row: usize) -> usize {
        let mut cells = Vec::new();
        self.covered_free(mask, col, row, &mut cells);
        for &i in &cells {
            self.bits[i] = true;
        }
        let mut rows: Vec<usize> = cells.iter().map(|&i| i / self.width).collect();
        rows.dedup();
        for r in rows {
            self.refresh_row(r);
        }
        cells.len()
    }

    /// Squared distance (in cells) from each cell center to the nearest
    /// occupied cell center, counting every cell outside the grid as occupied.
    pub fn distance2(&self) -> Vec<i64> {
        distance2(&self.bits, self.width, self.height)
    }
}

const FAR: i64 = i64::MAX / 4;

/// Exact squared Euclidean distance transform (separable lower-envelope method).
pub fn distance2(bits: &[bool], width: usize, height: usize) -> Vec<i64> {
    let (w, h) = (width, height);
    // columns first; rows outside the grid are occupied
    let mut g = vec![0i64; w * h];
    for c in 0..w {
        let mut last: i64 = -1;
        for r in 0..h {
            if bits[r * w + c] {
                last = r as i64;
                g[r * w + c] = 0;
            } else {
                g[r * w + c] = r as i64 - last;
            }
        }
        let mut next = h as i64;
        for r in (0..h).rev() {
            if bits[r * w + c] {
                next = r as i64;
            } else {
                let d = next - r as i64;
                if d < g[r * w + c] {
                    g[r * w + c] = d;
                }
            }
        }
    }
    // rows: squared distances with virtual occupied cells at -1 and w
    let mut out = vec![0i64; w * h];
    let n = w + 2;
    let mut f = vec![0i64; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    for r in 0..h {
        f[0] = 0;
        f[n - 1] = 0;
        for c in 0..w {
            let d = g[r * w + c];
            f[c + 1] = if d >= FAR { FAR } else { d * d };
        }
        let mut k = 0usize;
        v[0] = 0;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for q in 1..n {
            let mut s;
            loop {
                let p = v[k];
                s = ((f[q] + (q * q) as i64) - (f[p] + (p * p) as i64)) as f64 / (2.0 * (q - p) as f64);
                if s <= z[k] {
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        k = 0;
        for q in 1..=w {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let p = v[k] as i64;
            let dq = q as i64 - p;
            out[r * w + q - 1] = dq * dq + f[v[k]];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(bits: &[bool], w: usize, h: usize) -> Vec<i64> {
        let mut occ: Vec<(i64, i64)> = Vec::new();
        for r in -1..=h as i64 {
            for c in -1..=w as i64 {
                let outside = r < 0 || c < 0 || r >= h as i64 || c >= w as i64;
                if outside || bits[r as usize * w + c as usize] {
                    occ.push((c, r));
                }
            }
        }
        (0..w * h)
            .map(|i| {
                let (c, r) = ((i % w) as i64, (i / w) as i64);
                occ.iter().map(|&(oc, or)| (oc - c).pow(2) + (or - r).pow(2)).min().unwrap()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn distance_transform_matches_brute_force(w in 1usize..14, h in 1usize..14, seed in 0u64..1000, density in 0.0..0.5f64) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
            prop_assert_eq!(distance2(&bits, w, h), brute(&bits, w, h));
        }
    }

    #[test]
    fn fit_and_stamp() {
        let mask = Mask::from_runs(-1, vec![(0, 1), (-1, 1), (0, 0)]);
        let mut o = Occupancy::new(5, 5, vec![false; 25]);
        assert!(o.fits(&mask, 2, 2));
        assert!(!o.fits(&mask, 0, 2), "run leaves the grid");
        assert_eq!(o.stamp(&mask, 2, 2), 6);
        assert!(!o.fits(&mask, 2, 2));
        assert_eq!(o.free_count(), 19);
        assert!(o.fits(&mask, 2, 4) == false && o.fits(&Mask::from_runs(0, vec![(0, 0)]), 0, 0));
    }
}
