//! Data-driven cost synthesis from grayscale images: orientation lift via an
//! oriented second-derivative-of-Gaussian filter bank, crosswise vesselness,
//! and the cost map C = 1 / (1 + λVᵖ).
//!
//! The lift is π-periodic by construction (filters respond to line
//! orientation, not direction), so the resulting fields live natively on the
//! projective grid and pass the antipodal-symmetry check when unfolded.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{FieldKind, GridSpec, ScalarField3};

/// A grayscale image with pixels normalized to [0, 1], row-major.
#[derive(Debug, Clone)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "expected {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!(
                "pixel value {p} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Pixel with clamped (replicated) boundary.
    #[inline]
    fn at_clamped(&self, x: i64, y: i64) -> f64 {
        let xc = x.clamp(0, self.width as i64 - 1) as usize;
        let yc = y.clamp(0, self.height as i64 - 1) as usize;
        self.at(xc, yc)
    }

    /// Bilinear sample with clamped boundary.
    fn sample_clamped(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let tx = x - x0;
        let ty = y - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        (1.0 - tx) * (1.0 - ty) * self.at_clamped(x0, y0)
            + tx * (1.0 - ty) * self.at_clamped(x0 + 1, y0)
            + (1.0 - tx) * ty * self.at_clamped(x0, y0 + 1)
            + tx * ty * self.at_clamped(x0 + 1, y0 + 1)
    }
}

/// Parameters of the image-to-cost pipeline.
#[derive(Debug, Clone)]
pub struct CostParams {
    /// Cost strength λ.
    pub lambda: f64,
    /// Contrast exponent p.
    pub p: f64,
    /// Orientation samples on [0, π).
    pub ntheta: usize,
    /// Gaussian scale along the orientation, in pixels.
    pub sigma_long: f64,
    /// Gaussian scale across the orientation (differentiated), in pixels.
    pub sigma_short: f64,
    /// Scale of the crosswise vesselness derivative, in pixels.
    pub sigma_a3: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            lambda: 100.0,
            p: 3.0,
            ntheta: 32,
            sigma_long: 3.0,
            sigma_short: 1.0,
            sigma_a3: 2.0,
        }
    }
}

impl CostParams {
    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.p >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "p must be >= 1, got {}",
                self.p
            )));
        }
        if self.ntheta < 4 || self.ntheta % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "ntheta must be even and >= 4, got {}",
                self.ntheta
            )));
        }
        if !(self.sigma_long > 0.0 && self.sigma_short > 0.0 && self.sigma_a3 > 0.0) {
            return Err(Error::InvalidArgument("filter scales must be > 0".into()));
        }
        Ok(())
    }
}

/// Parses a PGM image (ASCII `P2` or binary `P5`), normalizing pixels by the
/// declared maximum value.
pub fn load_pgm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0usize;
    let bad = |pos: usize, what: &str| Error::BadPgm {
        offset: pos,
        what: what.to_string(),
    };

    if bytes.len() < 2 {
        return Err(bad(0, "missing magic number"));
    }
    let binary = match &bytes[0..2] {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(bad(
                0,
                &format!("bad magic {:?}, expected \"P2\" or \"P5\"", other),
            ))
        }
    };
    pos = 2;

    // header tokens: width, height, maxval; '#' starts a comment to EOL
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(bad(pos, "expected a decimal header field"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *slot = text
            .parse()
            .map_err(|_| bad(start, "header field out of range"))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err(bad(2, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad(pos, "maxval must be in 1..=65535"));
    }

    let n = width * height;
    let mut pixels = Vec::with_capacity(n);
    if binary {
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(bad(pos, "expected single whitespace before raster"));
        }
        pos += 1;
        let bytes_per = if maxval > 255 { 2 } else { 1 };
        let need = n * bytes_per;
        let have = bytes.len() - pos;
        if have < need {
            return Err(bad(
                bytes.len(),
                &format!("truncated raster: {} more bytes expected", need - have),
            ));
        }
        for i in 0..n {
            let v = if bytes_per == 2 {
                // two-byte samples are big-endian per the format
                u16::from_be_bytes([bytes[pos + 2 * i], bytes[pos + 2 * i + 1]]) as usize
            } else {
                bytes[pos + i] as usize
            };
            if v > maxval {
                return Err(bad(pos + i * bytes_per, "sample exceeds maxval"));
            }
            pixels.push(v as f64 / maxval as f64);
        }
    } else {
        for _ in 0..n {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    break;
                }
            }
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            if pos == start {
                return Err(bad(
                    pos,
                    &format!(
                        "truncated raster: {} samples read, {} expected",
                        pixels.len(),
                        n
                    ),
                ));
            }
            let v: usize = std::str::from_utf8(&bytes[start..pos])
                .unwrap()
                .parse()
                .map_err(|_| bad(start, "sample out of range"))?;
            if v > maxval {
                return Err(bad(start, "sample exceeds maxval"));
            }
            pixels.push(v as f64 / maxval as f64);
        }
    }
    Image::new(width, height, pixels)
}

/// Serializes an image as binary PGM (`P5`, maxval 255).
pub fn write_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(
        img.pixels
            .iter()
            .map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

/// Lifts an image to an orientation score on the projective grid: for each
/// θ_k = kπ/nθ the slab holds the absolute response of an oriented
/// second-derivative-of-Gaussian filter (smoothing `sigma_long` along the
/// orientation, differentiating `sigma_short` across it).
///
/// The grid maps pixels to unit spacing with the spatial box
/// [0, width−1] × [0, height−1].
pub fn orientation_lift(img: &Image, prm: &CostParams) -> Result<ScalarField3> {
    orientation_lift_threaded(img, prm, 1)
}

/// [`orientation_lift`] with the θ-slabs filtered in parallel. Each slab is
/// a pure function of the image, so the result does not depend on the
/// thread count.
pub fn orientation_lift_threaded(
    img: &Image,
    prm: &CostParams,
    threads: usize,
) -> Result<ScalarField3> {
    prm.validate()?;
    let radius = (3.0 * prm.sigma_long.max(prm.sigma_short)).ceil() as i64;
    let support = (2 * radius + 1) as usize;
    if img.width < support || img.height < support {
        return Err(Error::ImageTooSmall {
            width: img.width,
            height: img.height,
            support,
        });
    }
    let spec = GridSpec::new(
        img.width,
        img.height,
        prm.ntheta,
        0.0,
        (img.width - 1) as f64,
        0.0,
        (img.height - 1) as f64,
        PI,
    )?;

    let mut data = vec![0.0; spec.node_count()];
    let slab_len = img.width * img.height;
    let slabs: Vec<(usize, &mut [f64])> = data.chunks_mut(slab_len).enumerate().collect();
    let threads = threads.max(1);
    std::thread::scope(|scope| {
        let chunk = slabs.len().div_ceil(threads);
        let mut rest = slabs;
        while !rest.is_empty() {
            let take = chunk.min(rest.len());
            let batch: Vec<(usize, &mut [f64])> = rest.drain(..take).collect();
            scope.spawn(move || {
                for (ik, out) in batch {
                    let theta = spec.theta_at(ik);
                    let kernel = oriented_kernel(theta, prm.sigma_long, prm.sigma_short, radius);
                    convolve_abs(img, &kernel, radius, out);
                }
            });
        }
    });
    ScalarField3::from_data(spec, FieldKind::Score, data, 0.0)
}

/// Oriented second-derivative-of-Gaussian kernel: G(a; σ_long) along the
/// orientation times −∂²/∂b² G(b; σ_short) across it, mean-subtracted so the
/// response to constants is exactly zero.
fn oriented_kernel(theta: f64, sigma_long: f64, sigma_short: f64, radius: i64) -> Vec<f64> {
    let (st, ct) = theta.sin_cos();
    let n = (2 * radius + 1) as usize;
    let mut k = Vec::with_capacity(n * n);
    let s2l = sigma_long * sigma_long;
    let s2s = sigma_short * sigma_short;
    for v in -radius..=radius {
        for u in -radius..=radius {
            let a = u as f64 * ct + v as f64 * st;
            let b = -(u as f64) * st + v as f64 * ct;
            let g_long = (-0.5 * a * a / s2l).exp();
            let g_short = (-0.5 * b * b / s2s).exp();
            // negated second derivative across the orientation: positive on
            // bright ridges
            let d2 = (1.0 - b * b / s2s) / s2s;
            k.push(g_long * d2 * g_short);
        }
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    for v in &mut k {
        *v -= mean;
    }
    k
}

fn convolve_abs(img: &Image, kernel: &[f64], radius: i64, out: &mut [f64]) {
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            let mut acc = 0.0;
            let mut ki = 0usize;
            for v in -radius..=radius {
                for u in -radius..=radius {
                    acc += kernel[ki] * img.at_clamped(x + u, y + v);
                    ki += 1;
                }
            }
            out[(y * img.width as i64 + x) as usize] = acc.abs();
        }
    }
}

/// Crosswise vesselness: per θ-slab, the negated second-order Gaussian
/// derivative of the score along the lateral direction (−sin θ, cos θ),
/// rectified at zero, then max-normalized to [0, 1].
pub fn vesselness(score: &ScalarField3, sigma_a3: f64) -> Result<ScalarField3> {
    if score.kind() != FieldKind::Score {
        return Err(Error::InvalidArgument(
            "vesselness needs a score field".into(),
        ));
    }
    if !score.spec().is_projective() {
        return Err(Error::InvalidArgument(
            "vesselness expects a π-periodic score".into(),
        ));
    }
    if !(sigma_a3 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma_a3 must be > 0, got {sigma_a3}"
        )));
    }
    let spec = *score.spec();
    let radius = (3.0 * sigma_a3).ceil() as i64;
    // 1D second-derivative-of-Gaussian taps, mean-subtracted
    let mut g2 = Vec::with_capacity((2 * radius + 1) as usize);
    let s2 = sigma_a3 * sigma_a3;
    for t in -radius..=radius {
        let tt = t as f64;
        g2.push((tt * tt / s2 - 1.0) / s2 * (-0.5 * tt * tt / s2).exp());
    }
    let mean = g2.iter().sum::<f64>() / g2.len() as f64;
    for v in &mut g2 {
        *v -= mean;
    }

    let width = spec.nx;
    let height = spec.ny;
    let slab_len = width * height;
    let mut data = vec![0.0; spec.node_count()];
    for ik in 0..spec.ntheta {
        let (st, ct) = spec.theta_at(ik).sin_cos();
        let slab_img = Image {
            width,
            height,
            pixels: score.data()[ik * slab_len..(ik + 1) * slab_len].to_vec(),
        };
        let out = &mut data[ik * slab_len..(ik + 1) * slab_len];
        for y in 0..height {
            for x in 0..width {
                let mut acc = 0.0;
                for (j, t) in (-radius..=radius).enumerate() {
                    let tt = t as f64;
                    acc += g2[j] * slab_img.sample_clamped(x as f64 - tt * st, y as f64 + tt * ct);
                }
                out[y * width + x] = (-acc).max(0.0);
            }
        }
    }
    let max = data.iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        for v in &mut data {
            *v /= max;
        }
    }
    ScalarField3::from_data(spec, FieldKind::Score, data, 0.0)
}

/// Cost map C = max(1/(1 + λVᵖ), c_min) from a vesselness field in [0, 1].
pub fn cost_map(v: &ScalarField3, prm: &CostParams, c_min: f64) -> Result<ScalarField3> {
    prm.validate()?;
    let upper = 1.0 / (1.0 + prm.lambda);
    if !(c_min > 0.0 && c_min <= upper) {
        return Err(Error::InvalidArgument(format!(
            "c_min must lie in (0, {upper}], got {c_min}"
        )));
    }
    if v.data().iter().any(|x| !(0.0..=1.0 + 1e-12).contains(x)) {
        return Err(Error::InvalidArgument(
            "vesselness samples must lie in [0, 1]".into(),
        ));
    }
    let data = v
        .data()
        .iter()
        .map(|x| (1.0 / (1.0 + prm.lambda * x.powf(prm.p))).max(c_min))
        .collect();
    ScalarField3::from_data(*v.spec(), FieldKind::Cost, data, c_min)
}

/// Full pipeline: lift, vesselness, cost map. The result lives on the
/// projective grid; use [`ScalarField3::unfold_to_se2`] for full-group
/// solves.
pub fn cost_from_image(img: &Image, prm: &CostParams, c_min: f64) -> Result<ScalarField3> {
    let score = orientation_lift(img, prm)?;
    let ves = vesselness(&score, prm.sigma_a3)?;
    cost_map(&ves, prm, c_min)
}
