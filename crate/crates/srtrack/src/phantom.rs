//! Deterministic synthetic vessel images: a straight ridge, an S-shaped
//! ridge, and a pair of crossing ridges. These stand in for real image
//! patches in tests, examples, and benchmarks.

use std::f64::consts::PI;

use crate::cost::Image;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    Line,
    Scurve,
    Crossing,
}

impl std::str::FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(PhantomKind::Line),
            "scurve" => Ok(PhantomKind::Scurve),
            "crossing" => Ok(PhantomKind::Crossing),
            other => Err(Error::Usage(format!(
                "unknown phantom kind {other:?} (expected line, scurve or crossing)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhantomParams {
    /// Image side length in pixels (square, ≥ 32).
    pub size: usize,
    /// Ridge orientation for `line`, first ridge for `crossing` (radians).
    pub angle: f64,
    /// Second ridge orientation for `crossing`.
    pub angle2: f64,
    /// S-curve amplitude as a fraction of the image size.
    pub amplitude: f64,
    /// Gaussian ridge half-width in pixels.
    pub ridge_width: f64,
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self {
            size: 128,
            angle: 0.0,
            angle2: PI / 2.0,
            amplitude: 0.22,
            ridge_width: 1.5,
        }
    }
}

/// Renders a phantom image.
pub fn phantom(kind: PhantomKind, prm: &PhantomParams) -> Result<Image> {
    if prm.size < 32 {
        return Err(Error::InvalidArgument(format!(
            "phantom size must be >= 32, got {}",
            prm.size
        )));
    }
    if !(prm.ridge_width > 0.0) {
        return Err(Error::InvalidArgument("ridge width must be > 0".into()));
    }
    match kind {
        PhantomKind::Line => Ok(line_image(prm.size, prm.angle, prm.ridge_width)),
        PhantomKind::Scurve => Ok(scurve_image(prm)),
        PhantomKind::Crossing => {
            let a = line_image(prm.size, prm.angle, prm.ridge_width);
            let b = line_image(prm.size, prm.angle2, prm.ridge_width);
            let pixels = a
                .pixels
                .iter()
                .zip(b.pixels.iter())
                .map(|(p, q)| p.max(*q))
                .collect();
            Image::new(prm.size, prm.size, pixels)
        }
    }
}

fn line_image(size: usize, angle: f64, width: f64) -> Image {
    let c = (size - 1) as f64 / 2.0;
    let (st, ct) = angle.sin_cos();
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let u = x as f64 - c;
            let v = y as f64 - c;
            // distance from the line through the center with direction
            // (cos angle, sin angle)
            let d = -u * st + v * ct;
            pixels.push((-0.5 * d * d / (width * width)).exp());
        }
    }
    Image::new(size, size, pixels).expect("pixels in range by construction")
}

/// The S-curve centerline: point-symmetric about the image center, so the
/// rendered phantom is invariant under 180° rotation.
fn scurve_point(prm: &PhantomParams, t: f64) -> (f64, f64) {
    let lx = 0.36 * prm.size as f64;
    let a = prm.amplitude * prm.size as f64;
    (lx * t, a * (PI * t).sin())
}

/// Endpoints of the S-curve centerline in pixel coordinates, with their
/// tangent orientations. Useful as tracking boundary conditions.
pub fn scurve_endpoints(prm: &PhantomParams) -> ((f64, f64, f64), (f64, f64, f64)) {
    let c = (prm.size - 1) as f64 / 2.0;
    let lx = 0.36 * prm.size as f64;
    let a = prm.amplitude * prm.size as f64;
    // dP/dt at t = ±1 is (lx, a·π·cos(±π)) = (lx, −aπ) at both ends
    let tangent = (-a * PI).atan2(lx);
    let (x0, y0) = scurve_point(prm, -1.0);
    let (x1, y1) = scurve_point(prm, 1.0);
    ((c + x0, c + y0, tangent), (c + x1, c + y1, tangent))
}

fn scurve_image(prm: &PhantomParams) -> Image {
    let size = prm.size;
    let c = (size - 1) as f64 / 2.0;
    // odd sample count keeps the parameter set symmetric under t → −t, so
    // the min-distance field is exactly point-symmetric
    let samples = 4 * size + 1;
    let pts: Vec<(f64, f64)> = (0..samples)
        .map(|i| {
            let t = -1.0 + 2.0 * i as f64 / (samples - 1) as f64;
            scurve_point(prm, t)
        })
        .collect();
    let w2 = prm.ridge_width * prm.ridge_width;
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let u = x as f64 - c;
            let v = y as f64 - c;
            let mut d2 = f64::INFINITY;
            for &(px, py) in &pts {
                let dx = u - px;
                let dy = v - py;
                let r2 = dx * dx + dy * dy;
                if r2 < d2 {
                    d2 = r2;
                }
            }
            pixels.push((-0.5 * d2 / w2).exp());
        }
    }
    Image::new(size, size, pixels).expect("pixels in range by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{orientation_lift, CostParams};

    #[test]
    fn line_at_angle_zero_sits_on_central_row() {
        let prm = PhantomParams {
            size: 33,
            ..Default::default()
        };
        let img = phantom(PhantomKind::Line, &prm).unwrap();
        let central = 16;
        for x in 0..img.width {
            assert_eq!(img.at(x, central), 1.0);
            assert!(img.at(x, central - 3) < 0.2);
        }
    }

    #[test]
    fn scurve_invariant_under_half_turn() {
        let prm = PhantomParams {
            size: 64,
            ..Default::default()
        };
        let img = phantom(PhantomKind::Scurve, &prm).unwrap();
        for y in 0..img.height {
            for x in 0..img.width {
                let a = img.at(x, y);
                let b = img.at(img.width - 1 - x, img.height - 1 - y);
                assert_eq!(a, b, "rotation asymmetry at ({x},{y})");
            }
        }
    }

    #[test]
    fn scurve_endpoints_lie_on_the_ridge() {
        let prm = PhantomParams {
            size: 64,
            ..Default::default()
        };
        let img = phantom(PhantomKind::Scurve, &prm).unwrap();
        let (p0, p1) = scurve_endpoints(&prm);
        for p in [p0, p1] {
            let x = p.0.round() as usize;
            let y = p.1.round() as usize;
            assert!(
                img.at(x, y) > 0.6,
                "endpoint off ridge: {} at {p:?}",
                img.at(x, y)
            );
        }
    }

    #[test]
    fn crossing_center_has_two_lifted_orientations() {
        let prm = PhantomParams {
            size: 65,
            angle: 0.0,
            angle2: PI / 2.0,
            ..Default::default()
        };
        let img = phantom(PhantomKind::Crossing, &prm).unwrap();
        let lift_prm = CostParams {
            ntheta: 16,
            ..Default::default()
        };
        let score = orientation_lift(&img, &lift_prm).unwrap();
        let spec = score.spec();
        let profile: Vec<f64> = (0..spec.ntheta)
            .map(|ik| score.at(spec.nx / 2, spec.ny / 2, ik))
            .collect();
        // count circular local maxima of the θ-profile at the crossing
        let n = profile.len();
        let peak = profile.iter().cloned().fold(0.0f64, f64::max);
        let mut maxima = 0;
        for i in 0..n {
            let prev = profile[(i + n - 1) % n];
            let next = profile[(i + 1) % n];
            if profile[i] >= prev && profile[i] > next && profile[i] > 0.5 * peak {
                maxima += 1;
            }
        }
        assert_eq!(maxima, 2, "profile {profile:?}");
    }

    #[test]
    fn too_small_size_is_rejected() {
        let prm = PhantomParams {
            size: 16,
            ..Default::default()
        };
        assert!(phantom(PhantomKind::Line, &prm).is_err());
    }
}
