//! Backward warping of the center view along a disparity map.

use crate::error::{shape_mismatch, Result};
use crate::lightfield::{AngularIndex, LightField, View};
use crate::refocus::Boundary;

use super::disparity::DisparityMap;

/// Bilinear sample of `v` at fractional position `(fy, fx)`.
pub fn sample_bilinear(v: &View, fy: f64, fx: f64, ch: usize, boundary: Boundary) -> f64 {
    let (h, w) = (v.height() as i64, v.width() as i64);
    let wrap = |i: i64, n: i64| -> usize {
        match boundary {
            Boundary::Clamp => i.clamp(0, n - 1) as usize,
            Boundary::Circular => i.rem_euclid(n) as usize,
        }
    };
    let (y0, x0) = (fy.floor(), fx.floor());
    let (ay, ax) = (fy - y0, fx - x0);
    let (y0, x0) = (y0 as i64, x0 as i64);
    let (ya, yb) = (wrap(y0, h), wrap(y0 + 1, h));
    let (xa, xb) = (wrap(x0, w), wrap(x0 + 1, w));
    (1.0 - ay) * ((1.0 - ax) * v.get(ya, xa, ch) + ax * v.get(ya, xb, ch))
        + ay * ((1.0 - ax) * v.get(yb, xa, ch) + ax * v.get(yb, xb, ch))
}

/// View `u` of a Lambertian scene: `center(x + disp(x)·u)`.
pub fn warp_view(
    center: &View,
    disp: &DisparityMap,
    u: AngularIndex,
    boundary: Boundary,
) -> Result<View> {
    let (h, w, c) = center.dims();
    if (disp.height(), disp.width()) != (h, w) {
        return Err(shape_mismatch(format!(
            "disparity {}x{} vs view {h}x{w}",
            disp.height(),
            disp.width()
        )));
    }
    if u == AngularIndex::CENTER {
        return Ok(center.clone());
    }
    let (s, t) = u.as_f64();
    Ok(View::from_fn(h, w, c, |y, x, ch| {
        let d = disp.get(y, x);
        sample_bilinear(center, y as f64 + d * t, x as f64 + d * s, ch, boundary)
    }))
}

/// Synthesizes every view of a light field of the given radius.
pub fn warp_synthesize(
    center: &View,
    disp: &DisparityMap,
    radius: usize,
    boundary: Boundary,
) -> Result<LightField> {
    let views = crate::lightfield::angular_indices(radius)
        .map(|u| warp_view(center, disp, u, boundary))
        .collect::<Result<Vec<_>>>()?;
    LightField::new(radius, views)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture_view(h: usize, w: usize) -> View {
        View::from_fn(h, w, 2, |y, x, c| {
            ((y * 5 + x * 3 + c * 7) % 11) as f64 / 10.0
        })
    }

    #[test]
    fn zero_disparity_broadcasts_center() {
        let v = texture_view(6, 7);
        let lf =
            warp_synthesize(&v, &DisparityMap::constant(6, 7, 0.0), 1, Boundary::Clamp).unwrap();
        assert!(lf.views().iter().all(|view| view == &v));
    }

    #[test]
    fn center_is_identity() {
        let v = texture_view(6, 7);
        let lf =
            warp_synthesize(&v, &DisparityMap::constant(6, 7, 0.37), 2, Boundary::Clamp).unwrap();
        assert_eq!(lf.view(AngularIndex::CENTER).unwrap(), &v);
    }

    #[test]
    fn circular_constant_disparity_is_roll() {
        let (h, w) = (6, 8);
        let v = texture_view(h, w);
        let d = 1.0;
        let lf =
            warp_synthesize(&v, &DisparityMap::constant(h, w, d), 1, Boundary::Circular).unwrap();
        for (u, view) in lf.iter() {
            for y in 0..h {
                for x in 0..w {
                    let sy = (y as i64 + u.t as i64).rem_euclid(h as i64) as usize;
                    let sx = (x as i64 + u.s as i64).rem_euclid(w as i64) as usize;
                    for c in 0..2 {
                        assert_eq!(view.get(y, x, c), v.get(sy, sx, c));
                    }
                }
            }
        }
    }

    #[test]
    fn half_pixel_average() {
        let v = View::from_fn(1, 4, 1, |_, x, _| x as f64);
        let out = warp_view(
            &v,
            &DisparityMap::constant(1, 4, 0.5),
            AngularIndex::new(1, 0),
            Boundary::Clamp,
        )
        .unwrap();
        assert_eq!(out.data(), &[0.5, 1.5, 2.5, 3.0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let v = texture_view(6, 7);
        assert!(
            warp_synthesize(&v, &DisparityMap::constant(7, 6, 0.0), 1, Boundary::Clamp).is_err()
        );
    }
}
