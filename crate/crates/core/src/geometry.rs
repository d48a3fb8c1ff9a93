//! Circle geometry: fitting a circle through three pixels, integer
//! rasterization of candidate perimeters, and the L1 mismatch measure used
//! to tell detected circles apart.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// A candidate circle: the triplet of sampled-point indices it came from
/// plus the real-valued parameters derived from their coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateCircle {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub x0: f64,
    pub y0: f64,
    pub r: f64,
}

impl CandidateCircle {
    pub fn params(&self) -> (f64, f64, f64) {
        (self.x0, self.y0, self.r)
    }

    pub fn rasterize(&self, width: u32, height: u32) -> Result<PerimeterSet> {
        rasterize_circle(self.x0, self.y0, self.r, width, height)
    }
}

/// Center and radius of the circle through three integer pixels.
///
/// The center comes from the two 2x2 determinants of the perpendicular
/// bisector system; the shared denominator is 4 times the doubled signed
/// triangle area, so collinearity is an exact integer test. The radius is
/// the mean of the three center-to-point distances, which agree to
/// rounding error by construction.
///
/// Coordinates are expected to be pixel-scale; magnitudes up to 2^20 are
/// exact in the intermediate i64 arithmetic.
pub fn circle_from_triplet(
    p_i: (i32, i32),
    p_j: (i32, i32),
    p_k: (i32, i32),
) -> Result<(f64, f64, f64)> {
    for p in [p_i, p_j, p_k] {
        debug_assert!(
            p.0.unsigned_abs() <= 1 << 20 && p.1.unsigned_abs() <= 1 << 20,
            "coordinate {p:?} exceeds the exact-arithmetic range"
        );
    }
    let (xi, yi) = (p_i.0 as i64, p_i.1 as i64);
    let (xj, yj) = (p_j.0 as i64, p_j.1 as i64);
    let (xk, yk) = (p_k.0 as i64, p_k.1 as i64);

    let den = 4 * ((xj - xi) * (yk - yi) - (xk - xi) * (yj - yi));
    if den == 0 {
        return Err(Error::CollinearPoints);
    }
    let sj = xj * xj + yj * yj - xi * xi - yi * yi;
    let sk = xk * xk + yk * yk - xi * xi - yi * yi;
    let det_a = sj * (2 * (yk - yi)) - sk * (2 * (yj - yi));
    let det_b = (2 * (xj - xi)) * sk - (2 * (xk - xi)) * sj;

    let x0 = det_a as f64 / den as f64;
    let y0 = det_b as f64 / den as f64;
    let r = [(xi, yi), (xj, yj), (xk, yk)]
        .iter()
        .map(|&(x, y)| ((x as f64 - x0).powi(2) + (y as f64 - y0).powi(2)).sqrt())
        .sum::<f64>()
        / 3.0;
    Ok((x0, y0, r))
}

/// Unique in-bounds perimeter pixels of a rasterized circle, plus the
/// number of ideal pixels that were clipped away by the image border.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerimeterSet {
    points: Vec<(i32, i32)>,
    clipped: usize,
}

impl PerimeterSet {
    /// In-bounds perimeter pixels, sorted, duplicate-free.
    pub fn points(&self) -> &[(i32, i32)] {
        &self.points
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// clipped / (clipped + retained)
    pub fn clipped_fraction(&self) -> f64 {
        self.clipped as f64 / (self.clipped + self.points.len()) as f64
    }
}

/// Midpoint rasterization of the circle on the integer grid.
///
/// Center and radius are rounded to the nearest integer (half away from
/// zero); the first octant is stepped and reflected eightfold; seam
/// duplicates collapse in the point set; pixels outside
/// [0,width) x [0,height) are dropped and counted as clipped.
pub fn rasterize_circle(x0: f64, y0: f64, r: f64, width: u32, height: u32) -> Result<PerimeterSet> {
    let ri = r.round() as i64;
    if ri < 1 {
        return Err(Error::RadiusTooSmall(r));
    }
    let (cx, cy) = (x0.round() as i64, y0.round() as i64);

    let mut ideal = BTreeSet::new();
    let (mut x, mut y) = (ri, 0i64);
    let mut err = 1 - ri;
    while y <= x {
        for (px, py) in [
            (x, y),
            (y, x),
            (-x, y),
            (-y, x),
            (x, -y),
            (y, -x),
            (-x, -y),
            (-y, -x),
        ] {
            ideal.insert((cx + px, cy + py));
        }
        y += 1;
        if err < 0 {
            err += 2 * y + 1;
        } else {
            x -= 1;
            err += 2 * (y - x) + 1;
        }
    }

    let total = ideal.len();
    let points: Vec<(i32, i32)> = ideal
        .into_iter()
        .filter(|&(px, py)| px >= 0 && py >= 0 && px < width as i64 && py < height as i64)
        .map(|(px, py)| (px as i32, py as i32))
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyPerimeter);
    }
    let clipped = total - points.len();
    Ok(PerimeterSet { points, clipped })
}

/// L1 mismatch between two circles' (x0, y0, r) triples.
pub fn distinctiveness(a: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs() + (a.2 - b.2).abs()
}

/// Minimum mismatch for two circles to count as distinct:
/// (r_max - r_min) / s. Larger sensitivity s accepts closer circles.
pub fn distinctiveness_threshold(r_min: f64, r_max: f64, s: f64) -> f64 {
    debug_assert!(r_max > r_min && s > 0.0);
    (r_max - r_min) / s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_circle_from_symmetric_triplet() {
        let (x0, y0, r) = circle_from_triplet((1, 0), (0, 1), (-1, 0)).unwrap();
        assert_eq!((x0, y0, r), (0.0, 0.0, 1.0));
    }

    #[test]
    fn known_circle_center_2_3_radius_5() {
        let (x0, y0, r) = circle_from_triplet((7, 3), (2, 8), (-3, 3)).unwrap();
        assert_eq!((x0, y0), (2.0, 3.0));
        assert!((r - 5.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_are_rejected_exactly() {
        assert!(matches!(
            circle_from_triplet((0, 0), (1, 1), (2, 2)),
            Err(Error::CollinearPoints)
        ));
        // nearly-collinear but not exactly: must succeed
        assert!(circle_from_triplet((0, 0), (1000, 1), (2000, 0)).is_ok());
        // coincident points are degenerate too
        assert!(matches!(
            circle_from_triplet((5, 5), (5, 5), (9, 2)),
            Err(Error::CollinearPoints)
        ));
    }

    #[test]
    fn tiny_radius_one_cross() {
        let ras = rasterize_circle(100.0, 100.0, 1.0, 200, 200).unwrap();
        assert_eq!(
            ras.points(),
            &[(99, 100), (100, 99), (100, 101), (101, 100)]
        );
        assert_eq!(ras.clipped(), 0);
    }

    #[test]
    fn corner_circle_clips_three_quarters() {
        let ras = rasterize_circle(0.0, 0.0, 10.0, 200, 200).unwrap();
        for &(x, y) in ras.points() {
            assert!(x >= 0 && y >= 0);
        }
        let frac = ras.clipped_fraction();
        assert!(
            (0.65..=0.80).contains(&frac),
            "clipped fraction {frac} not near 3/4"
        );
    }

    #[test]
    fn fully_outside_perimeter_errors() {
        assert!(matches!(
            rasterize_circle(-100.0, -100.0, 5.0, 50, 50),
            Err(Error::EmptyPerimeter)
        ));
    }

    #[test]
    fn subunit_radius_errors() {
        assert!(matches!(
            rasterize_circle(10.0, 10.0, 0.3, 50, 50),
            Err(Error::RadiusTooSmall(_))
        ));
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        // center 10.5 rounds to 11: the cross for r=1 sits around (11, 10)
        let ras = rasterize_circle(10.5, 10.0, 1.4, 50, 50).unwrap();
        assert_eq!(
            ras.points(),
            &[(10, 10), (11, 9), (11, 11), (12, 10)]
        );
    }

    #[test]
    fn mismatch_hand_value() {
        assert_eq!(distinctiveness((10.0, 10.0, 50.0), (12.0, 13.0, 55.0)), 10.0);
        assert_eq!(distinctiveness((1.0, 2.0, 3.0), (1.0, 2.0, 3.0)), 0.0);
    }

    #[test]
    fn threshold_hand_values() {
        assert_eq!(distinctiveness_threshold(40.0, 150.0, 2.0), 55.0);
        assert_eq!(distinctiveness_threshold(10.0, 12.0, 2.0), 1.0);
        assert!(distinctiveness_threshold(40.0, 150.0, 4.0) < distinctiveness_threshold(40.0, 150.0, 2.0));
    }

    fn non_collinear_triplet() -> impl Strategy<Value = [(i32, i32); 3]> {
        let pt = (-512i32..512, -512i32..512);
        [pt.clone(), pt.clone(), pt].prop_filter("collinear", |[a, b, c]| {
            let den = (b.0 as i64 - a.0 as i64) * (c.1 as i64 - a.1 as i64)
                - (c.0 as i64 - a.0 as i64) * (b.1 as i64 - a.1 as i64);
            den != 0
        })
    }

    proptest! {
        #[test]
        fn fitted_center_is_equidistant(t in non_collinear_triplet()) {
            let (x0, y0, r) = circle_from_triplet(t[0], t[1], t[2]).unwrap();
            for p in t {
                let d = ((p.0 as f64 - x0).powi(2) + (p.1 as f64 - y0).powi(2)).sqrt();
                prop_assert!((d - r).abs() <= 1e-6 * r.max(1.0));
            }
        }

        #[test]
        fn fit_is_permutation_invariant(t in non_collinear_triplet()) {
            let a = circle_from_triplet(t[0], t[1], t[2]).unwrap();
            let b = circle_from_triplet(t[2], t[0], t[1]).unwrap();
            let c = circle_from_triplet(t[1], t[2], t[0]).unwrap();
            for (u, v) in [(a, b), (a, c)] {
                prop_assert!((u.0 - v.0).abs() <= 1e-9);
                prop_assert!((u.1 - v.1).abs() <= 1e-9);
                prop_assert!((u.2 - v.2).abs() <= 1e-9);
            }
        }

        #[test]
        fn raster_band_count_and_symmetry(cx in 200i64..300, cy in 200i64..300, r in 1i64..100) {
            // bounds large enough that nothing clips
            let ras = rasterize_circle(cx as f64, cy as f64, r as f64, 512, 512).unwrap();
            prop_assert_eq!(ras.clipped(), 0);
            let n = ras.count() as i64;
            prop_assert!(n >= 4 * r && n <= 8 * r, "count {} outside [4r, 8r]", n);
            let set: std::collections::BTreeSet<_> = ras.points().iter().copied().collect();
            for &(x, y) in ras.points() {
                let (dx, dy) = (x as i64 - cx, y as i64 - cy);
                let d = ((dx * dx + dy * dy) as f64).sqrt();
                prop_assert!((d - r as f64).abs() <= 1.0, "({x},{y}) off band: {d}");
                // eightfold dihedral symmetry about the center
                for (mx, my) in [(dx,-dy),(-dx,dy),(-dx,-dy),(dy,dx),(dy,-dx),(-dy,dx),(-dy,-dx)] {
                    prop_assert!(set.contains(&((cx + mx) as i32, (cy + my) as i32)));
                }
            }
        }

        #[test]
        fn mismatch_is_an_l1_metric(
            a in [(-500.0f64..500.0), (-500.0f64..500.0), (1.0f64..300.0)],
            b in [(-500.0f64..500.0), (-500.0f64..500.0), (1.0f64..300.0)],
            c in [(-500.0f64..500.0), (-500.0f64..500.0), (1.0f64..300.0)],
        ) {
            let (ta, tb, tc) = ((a[0],a[1],a[2]), (b[0],b[1],b[2]), (c[0],c[1],c[2]));
            prop_assert_eq!(distinctiveness(ta, tb), distinctiveness(tb, ta));
            prop_assert!(distinctiveness(ta, tb) >= 0.0);
            prop_assert!(
                distinctiveness(ta, tc) <= distinctiveness(ta, tb) + distinctiveness(tb, tc) + 1e-9
            );
        }
    }
}
