//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use gemset::generator::{FootprintTable, Mask};
use gemset::geometry::{contains, overlap_area};
use gemset::Layout;

/// 4-connected free components by breadth-first search, cells ascending.
pub fn components(bits: &[bool], w: usize, h: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; bits.len()];
    let mut out = Vec::new();
    for start in 0..bits.len() {
        if bits[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut q = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = q.pop_front() {
            comp.push(i);
            let (c, r) = ((i % w) as i64, (i / w) as i64);
            for (dc, dr) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let (nc, nr) = (c + dc, r + dr);
                if nc < 0 || nr < 0 || nc >= w as i64 || nr >= h as i64 {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                if !bits[j] && !seen[j] {
                    seen[j] = true;
                    q.push_back(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Slides `mask` over every anchor and checks each of its cells against `inside`.
pub fn mask_fits_somewhere(mask: &Mask, inside: &[bool], w: usize, h: usize) -> bool {
    let offsets: Vec<(i32, i32)> = mask.offsets().collect();
    for row in 0..h as i32 {
        for col in 0..w as i32 {
            let ok = offsets.iter().all(|&(dc, dr)| {
                let (c, r) = (col + dc, row + dr);
                c >= 0 && r >= 0 && c < w as i32 && r < h as i32 && inside[r as usize * w + c as usize]
            });
            if ok {
                return true;
            }
        }
    }
    false
}

/// Cover masks of the table, deduplicated, smallest first.
pub fn cover_masks(table: &FootprintTable) -> Vec<&Mask> {
    let mut ids: Vec<usize> = table.entries().iter().map(|f| f.cover).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut masks: Vec<&Mask> = ids.into_iter().map(|i| table.mask(i)).collect();
    masks.sort_by_key(|m| m.cells);
    masks
}

/// Whether some stone fits inside the component, by exhaustive sliding.
pub fn fits_some_stone(comp: &[usize], masks: &[&Mask], w: usize, h: usize) -> bool {
    let mut inside = vec![false; w * h];
    for &i in comp {
        inside[i] = true;
    }
    masks.iter().any(|m| m.cells <= comp.len() && mask_fits_somewhere(m, &inside, w, h))
}

/// Salvageable by definition: a sliver or able to hold a stone.
pub fn salvageable(comp: &[usize], masks: &[&Mask], w: usize, h: usize, slack_area: f64, cell: f64) -> bool {
    (comp.len() as f64) * cell * cell < slack_area || fits_some_stone(comp, masks, w, h)
}

/// Packing violations of a layout: overlaps, containment and stone count.
pub fn packing_violations(layout: &Layout, margin: f64, cell: f64) -> Vec<String> {
    let mut v = Vec::new();
    let s = &layout.stones;
    for i in 0..s.len() {
        if !contains(&layout.container, &s[i].polygon, margin - cell) {
            v.push(format!("stone {i} breaks containment"));
        }
        for j in i + 1..s.len() {
            let a = overlap_area(&s[i].polygon, &s[j].polygon);
            if a > 1e-6 {
                v.push(format!("stones {i} and {j} overlap by {a}"));
            }
        }
    }
    v
}
