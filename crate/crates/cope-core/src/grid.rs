//! Grid geometry, scalar fields and region masks.
//!
//! Everything downstream (regression surfaces, bootstrap fields, excursion
//! masks) lives on one rectangular lattice of cell centers. Values are stored
//! row-major (`index = iy * nx + ix`), and a field may carry a validity mask;
//! masked-out cells never contribute to excursion sets, suprema, fits or
//! contours.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A rectangular lattice of cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    nx: usize,
    ny: usize,
    spacing_x: f64,
    spacing_y: f64,
    origin_x: f64,
    origin_y: f64,
}

impl GridGeometry {
    /// `origin` is the physical coordinate of the center of cell (0, 0).
    pub fn new(
        nx: usize,
        ny: usize,
        spacing_x: f64,
        spacing_y: f64,
        origin: (f64, f64),
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2x2 cells, got {nx}x{ny}"
            )));
        }
        if !(spacing_x > 0.0) || !(spacing_y > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "spacings must be strictly positive, got ({spacing_x}, {spacing_y})"
            )));
        }
        Ok(Self {
            nx,
            ny,
            spacing_x,
            spacing_y,
            origin_x: origin.0,
            origin_y: origin.1,
        })
    }

    /// Unit-spacing lattice with the origin at (0, 0).
    pub fn unit(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, 1.0, 1.0, (0.0, 0.0))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Total cell count.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.spacing_x, self.spacing_y)
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        iy * self.nx + ix
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    /// Physical coordinate of a cell center.
    pub fn center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin_x + ix as f64 * self.spacing_x,
            self.origin_y + iy as f64 * self.spacing_y,
        )
    }

    /// Errors unless the two geometries are identical.
    pub fn check_same(&self, other: &GridGeometry, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GeometryMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.nx, self.ny, other.nx, other.ny
            )));
        }
        Ok(())
    }
}

/// One real value per grid cell, with an optional validity mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    geometry: GridGeometry,
    values: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl ScalarField {
    pub fn new(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                geometry.len(),
                values.len()
            )));
        }
        Ok(Self {
            geometry,
            values,
            mask: None,
        })
    }

    pub fn with_mask(geometry: GridGeometry, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != geometry.len() {
            return Err(Error::InvalidField(format!(
                "expected {} mask entries, got {}",
                geometry.len(),
                mask.len()
            )));
        }
        let mut f = Self::new(geometry, values)?;
        f.mask = Some(mask);
        Ok(f)
    }

    pub fn constant(geometry: GridGeometry, value: f64) -> Self {
        let n = geometry.len();
        Self {
            geometry,
            values: vec![value; n],
            mask: None,
        }
    }

    /// Evaluates `f(x, y)` at every cell center.
    pub fn from_fn(geometry: GridGeometry, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(geometry.len());
        for iy in 0..geometry.ny() {
            for ix in 0..geometry.nx() {
                let (x, y) = geometry.center(ix, iy);
                values.push(f(x, y));
            }
        }
        Self {
            geometry,
            values,
            mask: None,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    /// Whether the cell participates in fits, suprema and contours.
    pub fn is_active(&self, index: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[index])
    }

    /// Returns a copy whose mask additionally excludes `excluded` cells.
    pub fn mask_excluding(&self, excluded: &RegionMask) -> Result<ScalarField> {
        self.geometry
            .check_same(excluded.geometry(), "mask_excluding")?;
        let mask: Vec<bool> = (0..self.values.len())
            .map(|i| self.is_active(i) && !excluded.is_inside(i))
            .collect();
        let mut f = self.clone();
        f.mask = Some(mask);
        Ok(f)
    }

    pub(crate) fn ensure_finite(&self, what: &str) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if self.is_active(i) && !v.is_finite() {
                return Err(Error::InvalidField(format!(
                    "{what}: non-finite value {v} at active cell {i}"
                )));
            }
        }
        Ok(())
    }

    /// Excursion set at level `c`: the active cells with value >= c.
    ///
    /// The inequality is weak; cells exactly at the level are inside.
    pub fn excursion_set(&self, c: f64) -> Result<RegionMask> {
        self.ensure_finite("excursion_set")?;
        let inside = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| self.is_active(i) && v >= c)
            .collect();
        Ok(RegionMask {
            geometry: self.geometry,
            inside,
        })
    }

    /// Evaluates the field at interpolated contour points: each value is the
    /// convex combination of the two cells flanking the point's edge,
    /// computed in lerp form (exact for constant fields).
    pub fn interpolate_on_contour(&self, contour: &ContourSet) -> Result<Vec<f64>> {
        self.geometry
            .check_same(&contour.geometry, "interpolate_on_contour")?;
        Ok(contour
            .points
            .iter()
            .map(|p| {
                let lo = self.values[p.cell_lo];
                lo + p.weight_hi * (self.values[p.cell_hi] - lo)
            })
            .collect())
    }
}

/// A boolean excursion region on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    geometry: GridGeometry,
    inside: Vec<bool>,
}

impl RegionMask {
    pub fn new(geometry: GridGeometry, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != geometry.len() {
            return Err(Error::InvalidField(format!(
                "expected {} mask entries, got {}",
                geometry.len(),
                inside.len()
            )));
        }
        Ok(Self { geometry, inside })
    }

    pub fn empty(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        Self {
            geometry,
            inside: vec![false; n],
        }
    }

    pub fn full(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        Self {
            geometry,
            inside: vec![true; n],
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn is_inside(&self, index: usize) -> bool {
        self.inside[index]
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Row-major indices of the cells inside the region.
    pub fn cell_indices(&self) -> Vec<usize> {
        self.inside
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> Result<bool> {
        self.geometry.check_same(&other.geometry, "is_subset_of")?;
        Ok(self
            .inside
            .iter()
            .zip(&other.inside)
            .all(|(&a, &b)| !a || b))
    }

    pub fn intersection(&self, other: &RegionMask) -> Result<RegionMask> {
        self.geometry.check_same(&other.geometry, "intersection")?;
        let inside = self
            .inside
            .iter()
            .zip(&other.inside)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(RegionMask {
            geometry: self.geometry,
            inside,
        })
    }

    pub fn union(&self, other: &RegionMask) -> Result<RegionMask> {
        self.geometry.check_same(&other.geometry, "union")?;
        let inside = self
            .inside
            .iter()
            .zip(&other.inside)
            .map(|(&a, &b)| a || b)
            .collect();
        Ok(RegionMask {
            geometry: self.geometry,
            inside,
        })
    }

    pub fn difference(&self, other: &RegionMask) -> Result<RegionMask> {
        self.geometry.check_same(&other.geometry, "difference")?;
        let inside = self
            .inside
            .iter()
            .zip(&other.inside)
            .map(|(&a, &b)| a && !b)
            .collect();
        Ok(RegionMask {
            geometry: self.geometry,
            inside,
        })
    }

    /// The mask plus all 8-connected neighbours of its cells.
    pub fn dilate8(&self) -> RegionMask {
        let (nx, ny) = (self.geometry.nx(), self.geometry.ny());
        let mut inside = self.inside.clone();
        for iy in 0..ny {
            for ix in 0..nx {
                if !self.inside[iy * nx + ix] {
                    continue;
                }
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let jx = ix as i64 + dx;
                        let jy = iy as i64 + dy;
                        if jx >= 0 && jy >= 0 && (jx as usize) < nx && (jy as usize) < ny {
                            inside[jy as usize * nx + jx as usize] = true;
                        }
                    }
                }
            }
        }
        RegionMask {
            geometry: self.geometry,
            inside,
        }
    }

    /// Cells of the region with a 4-neighbour outside it (restricted to
    /// `domain` so that cells clipped by the domain mask do not count).
    pub fn inner_boundary(&self, domain: Option<&[bool]>) -> RegionMask {
        let (nx, ny) = (self.geometry.nx(), self.geometry.ny());
        let active = |i: usize| domain.map_or(true, |d| d[i]);
        let mut inside = vec![false; self.inside.len()];
        for iy in 0..ny {
            for ix in 0..nx {
                let i = iy * nx + ix;
                if !self.inside[i] || !active(i) {
                    continue;
                }
                let neighbours = [
                    (ix.wrapping_sub(1), iy),
                    (ix + 1, iy),
                    (ix, iy.wrapping_sub(1)),
                    (ix, iy + 1),
                ];
                for (jx, jy) in neighbours {
                    if jx < nx && jy < ny {
                        let j = jy * nx + jx;
                        if active(j) && !self.inside[j] {
                            inside[i] = true;
                            break;
                        }
                    }
                }
            }
        }
        RegionMask {
            geometry: self.geometry,
            inside,
        }
    }
}

/// An interpolated point of a level-crossing contour.
///
/// The point lies on the segment joining two adjacent cell centers; its
/// weights are convex and reproduce the crossing level when applied to the
/// source field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub x: f64,
    pub y: f64,
    /// Row-major index of the lower-indexed cell of the crossing edge.
    pub cell_lo: usize,
    /// Row-major index of the higher-indexed cell of the crossing edge.
    pub cell_hi: usize,
    pub weight_lo: f64,
    pub weight_hi: f64,
}

/// Interpolated sample points of the contour `{field = c}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub(crate) geometry: GridGeometry,
    pub(crate) level: f64,
    pub(crate) points: Vec<ContourPoint>,
}

impl ContourSet {
    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    /// The level the contour was extracted at.
    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn points(&self) -> &[ContourPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sorted, deduplicated indices of all cells flanking a contour point.
    pub fn touched_cells(&self) -> Vec<usize> {
        let mut cells: Vec<usize> = self
            .points
            .iter()
            .flat_map(|p| [p.cell_lo, p.cell_hi])
            .collect();
        cells.sort_unstable();
        cells.dedup();
        cells
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize) -> GridGeometry {
        GridGeometry::unit(nx, ny).unwrap()
    }

    #[test]
    fn geometry_invariants() {
        assert!(GridGeometry::new(1, 4, 1.0, 1.0, (0.0, 0.0)).is_err());
        assert!(GridGeometry::new(4, 4, 0.0, 1.0, (0.0, 0.0)).is_err());
        assert!(GridGeometry::new(4, 4, 1.0, -2.0, (0.0, 0.0)).is_err());
        let g = GridGeometry::new(4, 3, 0.5, 0.25, (1.0, 2.0)).unwrap();
        assert_eq!(g.center(2, 1), (2.0, 2.25));
        assert_eq!(g.index(3, 2), 11);
        assert_eq!(g.coords(11), (3, 2));
    }

    #[test]
    fn excursion_constant_above_level_is_empty() {
        let f = ScalarField::constant(grid(3, 3), 1.0);
        assert_eq!(f.excursion_set(2.0).unwrap().count(), 0);
    }

    #[test]
    fn excursion_2x2_hand_case() {
        let f = ScalarField::new(grid(2, 2), vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let m = f.excursion_set(1.5).unwrap();
        assert_eq!(m.inside(), &[false, false, true, true]);
    }

    #[test]
    fn excursion_ties_are_inside() {
        let f = ScalarField::new(grid(2, 2), vec![1.0, 1.0, 0.0, 2.0]).unwrap();
        let m = f.excursion_set(1.0).unwrap();
        assert_eq!(m.inside(), &[true, true, false, true]);
    }

    #[test]
    fn excursion_rejects_non_finite_active_cells() {
        let f = ScalarField::new(grid(2, 2), vec![0.0, f64::NAN, 0.0, 0.0]).unwrap();
        assert!(matches!(f.excursion_set(0.5), Err(Error::InvalidField(_))));
        // masked-out non-finite cells are fine
        let f = ScalarField::with_mask(
            grid(2, 2),
            vec![0.0, f64::NAN, 0.0, 0.0],
            vec![true, false, true, true],
        )
        .unwrap();
        let m = f.excursion_set(-1.0).unwrap();
        assert_eq!(m.inside(), &[true, false, true, true]);
    }

    #[test]
    fn masked_cells_never_enter_the_excursion_set() {
        let f = ScalarField::with_mask(
            grid(2, 2),
            vec![5.0, 5.0, 5.0, 5.0],
            vec![true, false, true, false],
        )
        .unwrap();
        let m = f.excursion_set(0.0).unwrap();
        assert_eq!(m.count(), 2);
    }

    #[test]
    fn mask_ops() {
        let g = grid(3, 2);
        let a = RegionMask::new(g, vec![true, true, false, false, false, false]).unwrap();
        let b = RegionMask::new(g, vec![true, true, true, false, true, false]).unwrap();
        assert!(a.is_subset_of(&b).unwrap());
        assert!(!b.is_subset_of(&a).unwrap());
        assert_eq!(a.intersection(&b).unwrap().count(), 2);
        assert_eq!(b.difference(&a).unwrap().count(), 2);
        assert_eq!(a.union(&b).unwrap().count(), 4);
    }

    #[test]
    fn dilate8_grows_by_one_ring() {
        let g = grid(5, 5);
        let mut inside = vec![false; 25];
        inside[12] = true; // center
        let m = RegionMask::new(g, inside).unwrap();
        let d = m.dilate8();
        assert_eq!(d.count(), 9);
        assert!(d.is_inside(6) && d.is_inside(18) && !d.is_inside(0));
    }

    #[test]
    fn inner_boundary_of_a_block() {
        let g = grid(4, 4);
        // 3x3 block in the corner. Only cells with a 4-neighbour that exists
        // and lies outside count: the column at ix=2 and the row at iy=2.
        // The grid edge itself is not "outside".
        let mut inside = vec![false; 16];
        for iy in 0..3 {
            for ix in 0..3 {
                inside[iy * 4 + ix] = true;
            }
        }
        let m = RegionMask::new(g, inside).unwrap();
        let bdry = m.inner_boundary(None);
        assert!(!bdry.is_inside(0));
        assert!(!bdry.is_inside(5));
        assert_eq!(bdry.count(), 5);
        for i in [2, 6, 8, 9, 10] {
            assert!(bdry.is_inside(i));
        }
    }

    #[test]
    fn geometry_mismatch_is_an_error() {
        let a = RegionMask::full(grid(3, 3));
        let b = RegionMask::full(grid(3, 4));
        assert!(matches!(
            a.is_subset_of(&b),
            Err(Error::GeometryMismatch(_))
        ));
    }
}
