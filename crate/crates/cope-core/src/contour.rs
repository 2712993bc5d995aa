//! Level-crossing extraction on the cell-center lattice.
//!
//! [`extract_boundary`] walks every lattice edge once and emits one linearly
//! interpolated point per sign change of `field - c`; this is the plug-in
//! boundary the bootstrap evaluates suprema on. [`contour_polylines`] runs a
//! full marching-squares pass (saddles resolved by the cell-center average
//! rule) and chains the crossings into polylines for rendering.
//!
//! Cells exactly at the level count as inside, matching
//! [`ScalarField::excursion_set`]. Edges touching a masked-out cell are
//! skipped, so contours are clipped to the valid domain.

use crate::error::Result;
use crate::grid::{ContourPoint, ContourSet, RegionMask, ScalarField};
use std::collections::HashMap;

fn crossing_point(field: &ScalarField, c: f64, lo: usize, hi: usize) -> ContourPoint {
    let geom = field.geometry();
    let v_lo = field.values()[lo];
    let v_hi = field.values()[hi];
    let t = (c - v_lo) / (v_hi - v_lo);
    let (lx, ly) = geom.coords(lo);
    let (hx, hy) = geom.coords(hi);
    let (x0, y0) = geom.center(lx, ly);
    let (x1, y1) = geom.center(hx, hy);
    ContourPoint {
        x: x0 + t * (x1 - x0),
        y: y0 + t * (y1 - y0),
        cell_lo: lo,
        cell_hi: hi,
        weight_lo: 1.0 - t,
        weight_hi: t,
    }
}

/// One interpolated point per lattice edge where `field - c` changes sign.
///
/// Edge order is canonical: all horizontal edges row-major, then all vertical
/// edges row-major. A constant field (or any field never crossing `c`)
/// yields an empty set; that is not an error.
pub fn extract_boundary(field: &ScalarField, c: f64) -> Result<ContourSet> {
    field.ensure_finite("extract_boundary")?;
    let geom = *field.geometry();
    let (nx, ny) = (geom.nx(), geom.ny());
    let v = field.values();
    let inside = |i: usize| field.is_active(i) && v[i] >= c;
    let active = |i: usize| field.is_active(i);

    let mut points = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx - 1 {
            let lo = iy * nx + ix;
            let hi = lo + 1;
            if active(lo) && active(hi) && inside(lo) != inside(hi) {
                points.push(crossing_point(field, c, lo, hi));
            }
        }
    }
    for iy in 0..ny - 1 {
        for ix in 0..nx {
            let lo = iy * nx + ix;
            let hi = lo + nx;
            if active(lo) && active(hi) && inside(lo) != inside(hi) {
                points.push(crossing_point(field, c, lo, hi));
            }
        }
    }
    Ok(ContourSet {
        geometry: geom,
        level: c,
        points,
    })
}

/// The alternate boundary discretization: every active cell flanking a
/// crossing edge, as a cell mask.
pub fn adjacent_cells(field: &ScalarField, c: f64) -> Result<RegionMask> {
    let contour = extract_boundary(field, c)?;
    let mut inside = vec![false; field.geometry().len()];
    for p in contour.points() {
        inside[p.cell_lo] = true;
        inside[p.cell_hi] = true;
    }
    RegionMask::new(*field.geometry(), inside)
}

// Edge keys for chaining marching-squares segments. A horizontal edge joins
// (ix,iy)-(ix+1,iy), a vertical edge joins (ix,iy)-(ix,iy+1).
fn hkey(ix: usize, iy: usize) -> u64 {
    (iy as u64) << 32 | ix as u64
}

fn vkey(ix: usize, iy: usize) -> u64 {
    1 << 63 | (iy as u64) << 32 | ix as u64
}

fn edge_cells(key: u64, nx: usize) -> (usize, usize) {
    let ix = (key & 0xffff_ffff) as usize;
    let iy = ((key >> 32) & 0x7fff_ffff) as usize;
    let lo = iy * nx + ix;
    if key >> 63 == 0 {
        (lo, lo + 1)
    } else {
        (lo, lo + nx)
    }
}

/// Marching-squares contour of `{field = c}`, chained into polylines in
/// physical coordinates. Closed loops repeat their first vertex at the end.
///
/// Saddle squares (two opposite corners inside) are split according to the
/// average of the four corner values: average >= c connects the inside
/// corners, otherwise they stay separate blobs.
pub fn contour_polylines(field: &ScalarField, c: f64) -> Result<Vec<Vec<(f64, f64)>>> {
    field.ensure_finite("contour_polylines")?;
    let geom = field.geometry();
    let (nx, ny) = (geom.nx(), geom.ny());
    let v = field.values();
    let inside = |i: usize| v[i] >= c;

    let mut segments: Vec<(u64, u64)> = Vec::new();
    for sy in 0..ny - 1 {
        for sx in 0..nx - 1 {
            let bl = sy * nx + sx;
            let br = bl + 1;
            let tl = bl + nx;
            let tr = tl + 1;
            if !(field.is_active(bl)
                && field.is_active(br)
                && field.is_active(tl)
                && field.is_active(tr))
            {
                continue;
            }
            let mut case = 0u8;
            if inside(bl) {
                case |= 1;
            }
            if inside(br) {
                case |= 2;
            }
            if inside(tr) {
                case |= 4;
            }
            if inside(tl) {
                case |= 8;
            }
            let bottom = hkey(sx, sy);
            let top = hkey(sx, sy + 1);
            let left = vkey(sx, sy);
            let right = vkey(sx + 1, sy);
            match case {
                0 | 15 => {}
                1 => segments.push((left, bottom)),
                2 => segments.push((bottom, right)),
                3 => segments.push((left, right)),
                4 => segments.push((right, top)),
                5 => {
                    let center = 0.25 * (v[bl] + v[br] + v[tl] + v[tr]);
                    if center >= c {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                6 => segments.push((bottom, top)),
                7 => segments.push((left, top)),
                8 => segments.push((top, left)),
                9 => segments.push((bottom, top)),
                10 => {
                    let center = 0.25 * (v[bl] + v[br] + v[tl] + v[tr]);
                    if center >= c {
                        segments.push((bottom, left));
                        segments.push((top, right));
                    } else {
                        segments.push((bottom, right));
                        segments.push((top, left));
                    }
                }
                11 => segments.push((right, top)),
                12 => segments.push((right, left)),
                13 => segments.push((bottom, right)),
                14 => segments.push((left, bottom)),
                _ => unreachable!(),
            }
        }
    }

    // Chain segments into paths. Every edge hosts at most one crossing point
    // and belongs to at most two squares, so the segment graph has maximum
    // degree two: paths and cycles only.
    let mut by_edge: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(i);
        by_edge.entry(b).or_default().push(i);
    }
    let mut point_cache: HashMap<u64, (f64, f64)> = HashMap::new();
    let mut point_at = |key: u64| -> (f64, f64) {
        *point_cache.entry(key).or_insert_with(|| {
            let (lo, hi) = edge_cells(key, nx);
            let p = crossing_point(field, c, lo, hi);
            (p.x, p.y)
        })
    };

    let mut used = vec![false; segments.len()];
    let mut paths = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        // Walk backwards to an endpoint (degree-1 edge) or around the loop.
        let mut first = start;
        let mut entry_edge = segments[start].0;
        loop {
            let others: Vec<usize> = by_edge[&entry_edge]
                .iter()
                .copied()
                .filter(|&s| s != first)
                .collect();
            match others.first() {
                Some(&prev) if prev != start => {
                    entry_edge = if segments[prev].0 == entry_edge {
                        segments[prev].1
                    } else {
                        segments[prev].0
                    };
                    first = prev;
                }
                _ => break,
            }
        }
        // Walk forwards from `first`, entering through `entry_edge`.
        let mut path = vec![point_at(entry_edge)];
        let mut seg = first;
        let mut edge = entry_edge;
        loop {
            used[seg] = true;
            edge = if segments[seg].0 == edge {
                segments[seg].1
            } else {
                segments[seg].0
            };
            path.push(point_at(edge));
            match by_edge[&edge].iter().copied().find(|&s| !used[s]) {
                Some(next) => seg = next,
                None => break,
            }
        }
        paths.push(path);
    }
    Ok(paths)
}
