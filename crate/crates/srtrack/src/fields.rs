//! Sampled scalar fields on rectangular (x, y, θ) grids with periodic θ.
//!
//! The θ axis is sampled half-open (θ_k = k·period/nθ, no duplicated
//! endpoint), so a projective grid has exactly half the θ nodes of a full
//! grid at equal angular resolution. Data is stored x-fastest so sweeps
//! stream contiguously. Value fields use IEEE +∞ as the explicit
//! "unreached" flag, which keeps pointwise minima exact.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// What a field stores; constrains the per-sample invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Positive running cost C, bounded below by the stored `c_min`.
    Cost,
    /// Distance-map values W ≥ 0, with +∞ marking unreached nodes.
    Value,
    /// Nonnegative filter responses (orientation scores, vesselness).
    Score,
}

impl FieldKind {
    fn to_byte(self) -> u8 {
        match self {
            FieldKind::Cost => 0,
            FieldKind::Value => 1,
            FieldKind::Score => 2,
        }
    }

    fn from_byte(b: u8) -> Option<FieldKind> {
        match b {
            0 => Some(FieldKind::Cost),
            1 => Some(FieldKind::Value),
            2 => Some(FieldKind::Score),
            _ => None,
        }
    }
}

/// Geometry of a rectangular (x, y, θ) grid.
///
/// x and y are sampled inclusively over their ranges; θ is sampled half-open
/// over [0, period) with period π (projective) or 2π (full).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub ntheta: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub theta_period: f64,
}

impl GridSpec {
    pub fn new(
        nx: usize,
        ny: usize,
        ntheta: usize,
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        theta_period: f64,
    ) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "nx, ny must be >= 3, got {nx}, {ny}"
            )));
        }
        if ntheta < 4 {
            return Err(Error::InvalidGrid(format!(
                "ntheta must be >= 4, got {ntheta}"
            )));
        }
        if !(x_max > x_min) || !(y_max > y_min) {
            return Err(Error::InvalidGrid(format!(
                "empty box [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        let is_pi = (theta_period - PI).abs() <= 1e-12;
        let is_two_pi = (theta_period - 2.0 * PI).abs() <= 1e-12;
        if !is_pi && !is_two_pi {
            return Err(Error::InvalidGrid(format!(
                "theta_period must be pi or 2*pi, got {theta_period}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            ntheta,
            x_min,
            x_max,
            y_min,
            y_max,
            theta_period: if is_pi { PI } else { 2.0 * PI },
        })
    }

    /// Centered square box [-half, half]² — the usual setup for
    /// uniform-cost experiments around the group identity.
    pub fn centered(n_spatial: usize, half: f64, ntheta: usize, theta_period: f64) -> Result<Self> {
        Self::new(
            n_spatial,
            n_spatial,
            ntheta,
            -half,
            half,
            -half,
            half,
            theta_period,
        )
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn htheta(&self) -> f64 {
        self.theta_period / self.ntheta as f64
    }

    pub fn min_spacing(&self) -> f64 {
        self.hx().min(self.hy()).min(self.htheta())
    }

    pub fn max_spacing(&self) -> f64 {
        self.hx().max(self.hy()).max(self.htheta())
    }

    /// Diameter of the (x, y, θ) box with θ measured over a half period.
    pub fn domain_diameter(&self) -> f64 {
        let dx = self.x_max - self.x_min;
        let dy = self.y_max - self.y_min;
        let dt = 0.5 * self.theta_period;
        (dx * dx + dy * dy + dt * dt).sqrt()
    }

    pub fn is_projective(&self) -> bool {
        (self.theta_period - PI).abs() <= 1e-12
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny * self.ntheta
    }

    pub fn x_at(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.hx()
    }

    pub fn y_at(&self, iy: usize) -> f64 {
        self.y_min + iy as f64 * self.hy()
    }

    pub fn theta_at(&self, ik: usize) -> f64 {
        ik as f64 * self.htheta()
    }

    /// x-fastest linear index.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, ik: usize) -> usize {
        ix + self.nx * (iy + self.ny * ik)
    }

    /// Nearest grid node to a point; θ wraps with the grid period, (x, y)
    /// must lie inside the bounding box.
    pub fn nearest_node(&self, x: f64, y: f64, theta: f64) -> Result<(usize, usize, usize)> {
        if x < self.x_min - 1e-12 || x > self.x_max + 1e-12 || y < self.y_min - 1e-12
            || y > self.y_max + 1e-12
        {
            return Err(Error::OutOfDomain {
                x,
                y,
                x_min: self.x_min,
                x_max: self.x_max,
                y_min: self.y_min,
                y_max: self.y_max,
            });
        }
        let ix = (((x - self.x_min) / self.hx()).round() as isize).clamp(0, self.nx as isize - 1);
        let iy = (((y - self.y_min) / self.hy()).round() as isize).clamp(0, self.ny as isize - 1);
        let t = theta.rem_euclid(self.theta_period);
        let ik = ((t / self.htheta()).round() as usize) % self.ntheta;
        Ok((ix as usize, iy as usize, ik))
    }
}

/// A sampled scalar function on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3 {
    spec: GridSpec,
    kind: FieldKind,
    /// Positive lower bound of the samples; meaningful for cost fields only
    /// (0 otherwise).
    c_min: f64,
    data: Vec<f64>,
}

impl ScalarField3 {
    /// Wraps sample data, validating the per-kind invariants.
    pub fn from_data(spec: GridSpec, kind: FieldKind, data: Vec<f64>, c_min: f64) -> Result<Self> {
        if data.len() != spec.node_count() {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                spec.node_count(),
                data.len()
            )));
        }
        match kind {
            FieldKind::Cost => {
                if !(c_min > 0.0) {
                    return Err(Error::InvalidField(format!(
                        "cost fields need c_min > 0, got {c_min}"
                    )));
                }
                if let Some(v) = data.iter().find(|v| !(**v >= c_min) || !v.is_finite()) {
                    return Err(Error::InvalidField(format!(
                        "cost sample {v} below lower bound {c_min}"
                    )));
                }
            }
            FieldKind::Value => {
                if let Some(v) = data.iter().find(|v| !(**v >= 0.0)) {
                    return Err(Error::InvalidField(format!(
                        "value sample {v} is negative or NaN"
                    )));
                }
            }
            FieldKind::Score => {
                if let Some(v) = data.iter().find(|v| !v.is_finite()) {
                    return Err(Error::InvalidField(format!(
                        "score sample {v} is not finite"
                    )));
                }
            }
        }
        let c_min = if kind == FieldKind::Cost { c_min } else { 0.0 };
        Ok(Self {
            spec,
            kind,
            c_min,
            data,
        })
    }

    /// Constant field of the given kind. For cost fields the lower bound is
    /// the constant itself.
    pub fn constant(spec: GridSpec, kind: FieldKind, value: f64) -> Result<Self> {
        let c_min = if kind == FieldKind::Cost { value } else { 0.0 };
        Self::from_data(spec, kind, vec![value; spec.node_count()], c_min)
    }

    /// Value field with every node unreached (+∞).
    pub fn unreached(spec: GridSpec) -> Self {
        Self {
            spec,
            kind: FieldKind::Value,
            c_min: 0.0,
            data: vec![f64::INFINITY; spec.node_count()],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize, ik: usize) -> f64 {
        self.data[self.spec.index(ix, iy, ik)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, ik: usize, v: f64) {
        let i = self.spec.index(ix, iy, ik);
        self.data[i] = v;
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest finite sample, or 0 if none is finite.
    pub fn max_finite(&self) -> f64 {
        self.data
            .iter()
            .cloned()
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    }

    /// Trilinear interpolation at (x, y, θ). The θ axis wraps with the
    /// field's period; (x, y) must lie inside the bounding box. Exact at
    /// grid nodes. If any corner that carries weight is +∞ the result
    /// is +∞.
    pub fn sample(&self, x: f64, y: f64, theta: f64) -> Result<f64> {
        let s = &self.spec;
        if x < s.x_min - 1e-12 || x > s.x_max + 1e-12 || y < s.y_min - 1e-12 || y > s.y_max + 1e-12
        {
            return Err(Error::OutOfDomain {
                x,
                y,
                x_min: s.x_min,
                x_max: s.x_max,
                y_min: s.y_min,
                y_max: s.y_max,
            });
        }
        let fx = ((x - s.x_min) / s.hx()).clamp(0.0, (s.nx - 1) as f64);
        let fy = ((y - s.y_min) / s.hy()).clamp(0.0, (s.ny - 1) as f64);
        let ft = (theta.rem_euclid(s.theta_period)) / s.htheta();

        let ix = (fx.floor() as usize).min(s.nx - 2);
        let iy = (fy.floor() as usize).min(s.ny - 2);
        let ik = (ft.floor() as usize).min(s.ntheta - 1);
        let snap = |t: f64| {
            if t < 1e-12 {
                0.0
            } else if t > 1.0 - 1e-12 {
                1.0
            } else {
                t
            }
        };
        let tx = snap(fx - ix as f64);
        let ty = snap(fy - iy as f64);
        let tk = snap(ft - ik as f64);
        let ik1 = (ik + 1) % s.ntheta;

        let mut acc = 0.0;
        let mut hit_inf = false;
        for (dk, wt) in [(0usize, 1.0 - tk), (1, tk)] {
            if wt == 0.0 {
                continue;
            }
            let k = if dk == 0 { ik } else { ik1 };
            for (dy, wy) in [(0usize, 1.0 - ty), (1, ty)] {
                if wy == 0.0 {
                    continue;
                }
                for (dx, wx) in [(0usize, 1.0 - tx), (1, tx)] {
                    if wx == 0.0 {
                        continue;
                    }
                    let v = self.at(ix + dx, iy + dy, k);
                    if v.is_infinite() {
                        hit_inf = true;
                    } else {
                        acc += wt * wy * wx * v;
                    }
                }
            }
        }
        Ok(if hit_inf { f64::INFINITY } else { acc })
    }

    /// Cartesian derivatives (∂x f, ∂y f, ∂θ f) at a node, from central
    /// differences (one-sided at spatial boundaries, periodic in θ).
    /// Unreached (+∞) neighbors fall back to the one-sided difference on the
    /// finite side; the derivative is 0 when no finite side exists.
    ///
    /// Unlike frame coefficients, Cartesian components are periodic with the
    /// grid's θ period even on projective grids, so they interpolate
    /// correctly across the seam.
    pub fn cartesian_derivatives(&self, ix: usize, iy: usize, ik: usize) -> (f64, f64, f64) {
        let s = &self.spec;
        let w0 = self.at(ix, iy, ik);
        if !w0.is_finite() {
            return (0.0, 0.0, 0.0);
        }
        let dx = self.axis_diff(
            w0,
            (ix > 0).then(|| self.at(ix - 1, iy, ik)),
            (ix + 1 < s.nx).then(|| self.at(ix + 1, iy, ik)),
            s.hx(),
        );
        let dy = self.axis_diff(
            w0,
            (iy > 0).then(|| self.at(ix, iy - 1, ik)),
            (iy + 1 < s.ny).then(|| self.at(ix, iy + 1, ik)),
            s.hy(),
        );
        let km = (ik + s.ntheta - 1) % s.ntheta;
        let kp = (ik + 1) % s.ntheta;
        let dt = self.axis_diff(
            w0,
            Some(self.at(ix, iy, km)),
            Some(self.at(ix, iy, kp)),
            s.htheta(),
        );
        (dx, dy, dt)
    }

    /// Left-invariant frame derivatives (A₁f, A₂f, A₃f) at a node, built
    /// from [`Self::cartesian_derivatives`] and the frame at the node's θ.
    pub fn frame_derivatives(&self, ix: usize, iy: usize, ik: usize) -> (f64, f64, f64) {
        let (dx, dy, dt) = self.cartesian_derivatives(ix, iy, ik);
        combine_frame(self.spec.theta_at(ik), dx, dy, dt)
    }

    /// Cartesian derivatives where each axis uses the one-sided difference
    /// toward its smaller neighbor. Used within one cell of a seed, where
    /// the distance map has a kink and central differences degrade.
    pub fn cartesian_derivatives_upwind(&self, ix: usize, iy: usize, ik: usize) -> (f64, f64, f64) {
        let s = &self.spec;
        let w0 = self.at(ix, iy, ik);
        if !w0.is_finite() {
            return (0.0, 0.0, 0.0);
        }
        let one_sided = |wm: Option<f64>, wp: Option<f64>, h: f64| -> f64 {
            let wm = wm.filter(|v| v.is_finite());
            let wp = wp.filter(|v| v.is_finite());
            match (wm, wp) {
                (Some(m), Some(p)) => {
                    let dm = (w0 - m) / h;
                    let dp = (p - w0) / h;
                    if m >= w0 && p >= w0 {
                        // valley kink (the seed cone bottom): the true
                        // derivative vanishes at the floor
                        0.0
                    } else if m <= w0 && p <= w0 {
                        // ridge kink: keep the steeper side
                        if dm.abs() >= dp.abs() {
                            dm
                        } else {
                            dp
                        }
                    } else if m <= p {
                        dm
                    } else {
                        dp
                    }
                }
                (Some(m), None) => (w0 - m) / h,
                (None, Some(p)) => (p - w0) / h,
                (None, None) => 0.0,
            }
        };
        let dx = one_sided(
            (ix > 0).then(|| self.at(ix - 1, iy, ik)),
            (ix + 1 < s.nx).then(|| self.at(ix + 1, iy, ik)),
            s.hx(),
        );
        let dy = one_sided(
            (iy > 0).then(|| self.at(ix, iy - 1, ik)),
            (iy + 1 < s.ny).then(|| self.at(ix, iy + 1, ik)),
            s.hy(),
        );
        let km = (ik + s.ntheta - 1) % s.ntheta;
        let kp = (ik + 1) % s.ntheta;
        let dt = one_sided(
            Some(self.at(ix, iy, km)),
            Some(self.at(ix, iy, kp)),
            s.htheta(),
        );
        (dx, dy, dt)
    }

    /// Upwind variant of [`Self::frame_derivatives`].
    pub fn frame_derivatives_upwind(&self, ix: usize, iy: usize, ik: usize) -> (f64, f64, f64) {
        let (dx, dy, dt) = self.cartesian_derivatives_upwind(ix, iy, ik);
        combine_frame(self.spec.theta_at(ik), dx, dy, dt)
    }

    fn axis_diff(&self, w0: f64, wm: Option<f64>, wp: Option<f64>, h: f64) -> f64 {
        let wm = wm.filter(|v| v.is_finite());
        let wp = wp.filter(|v| v.is_finite());
        match (wm, wp) {
            (Some(m), Some(p)) => (p - m) / (2.0 * h),
            (Some(m), None) => (w0 - m) / h,
            (None, Some(p)) => (p - w0) / h,
            (None, None) => 0.0,
        }
    }

    /// Sample-wise minimum of two fields on the same grid.
    pub fn pointwise_min(&self, other: &ScalarField3) -> Result<ScalarField3> {
        if self.spec != other.spec {
            return Err(Error::IncompatibleGrids(
                "pointwise_min requires identical grids".into(),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.min(*b))
            .collect();
        Ok(ScalarField3 {
            spec: self.spec,
            kind: self.kind,
            c_min: self.c_min.min(other.c_min),
            data,
        })
    }

    /// Restricts a 2π-periodic field to the projective grid over [0, π).
    ///
    /// Value fields take the minimum of antipodal slabs. Cost and score
    /// fields must already be π-symmetric (within `1e-9`) and keep their
    /// first half verbatim.
    pub fn fold_to_projective(&self) -> Result<ScalarField3> {
        let s = &self.spec;
        if s.is_projective() {
            return Err(Error::IncompatibleGrids(
                "field is already on a projective grid".into(),
            ));
        }
        if s.ntheta % 2 != 0 {
            return Err(Error::IncompatibleGrids(format!(
                "folding requires even ntheta, got {}",
                s.ntheta
            )));
        }
        let half = s.ntheta / 2;
        let out_spec = GridSpec::new(s.nx, s.ny, half, s.x_min, s.x_max, s.y_min, s.y_max, PI)?;
        let slab = s.nx * s.ny;
        let mut data = Vec::with_capacity(out_spec.node_count());
        match self.kind {
            FieldKind::Value => {
                for k in 0..half {
                    for i in 0..slab {
                        let a = self.data[k * slab + i];
                        let b = self.data[(k + half) * slab + i];
                        data.push(a.min(b));
                    }
                }
            }
            FieldKind::Cost | FieldKind::Score => {
                const TOL: f64 = 1e-9;
                let mut max_dev: f64 = 0.0;
                for k in 0..half {
                    for i in 0..slab {
                        let a = self.data[k * slab + i];
                        let b = self.data[(k + half) * slab + i];
                        max_dev = max_dev.max((a - b).abs());
                    }
                }
                if max_dev > TOL {
                    return Err(Error::NotProjective { max_dev, tol: TOL });
                }
                data.extend_from_slice(&self.data[..half * slab]);
            }
        }
        ScalarField3::from_data(out_spec, self.kind, data, self.c_min)
    }

    /// Duplicates the slabs of a π-periodic field onto the full 2π grid
    /// (the right inverse of [`Self::fold_to_projective`] for π-symmetric
    /// cost/score data).
    pub fn unfold_to_se2(&self) -> Result<ScalarField3> {
        let s = &self.spec;
        if !s.is_projective() {
            return Err(Error::IncompatibleGrids(
                "field is already on a full 2-pi grid".into(),
            ));
        }
        let out_spec = GridSpec::new(
            s.nx,
            s.ny,
            2 * s.ntheta,
            s.x_min,
            s.x_max,
            s.y_min,
            s.y_max,
            2.0 * PI,
        )?;
        let mut data = Vec::with_capacity(out_spec.node_count());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&self.data);
        ScalarField3::from_data(out_spec, self.kind, data, self.c_min)
    }

    /// Serializes the field in the `SRF1` binary layout: magic "SRF1",
    /// little-endian u32 nx, ny, ntheta, u8 kind, f64 x_min, x_max, y_min,
    /// y_max, theta_period, c_min, then the samples x-fastest as f64.
    pub fn write_srf1<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(b"SRF1")?;
        out.write_all(&(self.spec.nx as u32).to_le_bytes())?;
        out.write_all(&(self.spec.ny as u32).to_le_bytes())?;
        out.write_all(&(self.spec.ntheta as u32).to_le_bytes())?;
        out.write_all(&[self.kind.to_byte()])?;
        for v in [
            self.spec.x_min,
            self.spec.x_max,
            self.spec.y_min,
            self.spec.y_max,
            self.spec.theta_period,
            self.c_min,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a field from the `SRF1` layout, rejecting bad magic bytes,
    /// malformed headers, and truncated payloads.
    pub fn read_srf1<R: Read>(inp: &mut R) -> Result<ScalarField3> {
        let mut magic = [0u8; 4];
        read_exact_at(inp, &mut magic, 0)?;
        if &magic != b"SRF1" {
            return Err(Error::BadSrf1 {
                offset: 0,
                what: format!("wrong magic {magic:?}, expected \"SRF1\""),
            });
        }
        let mut u32buf = [0u8; 4];
        read_exact_at(inp, &mut u32buf, 4)?;
        let nx = u32::from_le_bytes(u32buf) as usize;
        read_exact_at(inp, &mut u32buf, 8)?;
        let ny = u32::from_le_bytes(u32buf) as usize;
        read_exact_at(inp, &mut u32buf, 12)?;
        let ntheta = u32::from_le_bytes(u32buf) as usize;
        let mut kind_byte = [0u8; 1];
        read_exact_at(inp, &mut kind_byte, 16)?;
        let kind = FieldKind::from_byte(kind_byte[0]).ok_or(Error::BadSrf1 {
            offset: 16,
            what: format!("unknown field kind byte {}", kind_byte[0]),
        })?;
        let mut f64buf = [0u8; 8];
        let mut header = [0.0f64; 6];
        for (i, h) in header.iter_mut().enumerate() {
            read_exact_at(inp, &mut f64buf, 17 + 8 * i)?;
            *h = f64::from_le_bytes(f64buf);
        }
        let [x_min, x_max, y_min, y_max, theta_period, c_min] = header;
        let spec = GridSpec::new(nx, ny, ntheta, x_min, x_max, y_min, y_max, theta_period)?;

        let expected = spec.node_count() * 8;
        let mut payload = Vec::new();
        inp.read_to_end(&mut payload)?;
        if payload.len() < expected {
            return Err(Error::BadSrf1 {
                offset: 65 + payload.len(),
                what: format!(
                    "truncated payload: expected {} sample bytes, got {} ({} missing)",
                    expected,
                    payload.len(),
                    expected - payload.len()
                ),
            });
        }
        let data: Vec<f64> = payload[..expected]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        ScalarField3::from_data(spec, kind, data, c_min)
    }

    pub fn save_srf1<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_srf1(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_srf1<P: AsRef<Path>>(path: P) -> Result<ScalarField3> {
        let file = std::fs::File::open(path)?;
        let mut r = std::io::BufReader::new(file);
        Self::read_srf1(&mut r)
    }
}

fn read_exact_at<R: Read>(inp: &mut R, buf: &mut [u8], offset: usize) -> Result<()> {
    inp.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::BadSrf1 {
                offset,
                what: format!("truncated: {} more bytes expected", buf.len()),
            }
        } else {
            Error::Io(e)
        }
    })
}

pub(crate) fn combine_frame(theta: f64, dx: f64, dy: f64, dt: f64) -> (f64, f64, f64) {
    let (st, ct) = theta.sin_cos();
    (ct * dx + st * dy, dt, -st * dx + ct * dy)
}
