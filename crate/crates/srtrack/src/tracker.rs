//! Geodesic extraction by intrinsic gradient descent on a distance map, and
//! cusp analysis of the extracted curves.
//!
//! The descent field is the normalized negative intrinsic gradient of W, so
//! the curve is traversed at unit metric speed and the accumulated parameter
//! equals metric length. Steps are fixed in grid units (a fraction of the
//! local spacing), which stays robust near the seed where W → 0. Gradients
//! between nodes come from trilinear interpolation of precomputed frame
//! derivatives, with an upwind fallback within one cell of a seed where
//! central differences straddle the kink.

use crate::eikonal::SolveMode;
use crate::error::{Error, Result};
use crate::fields::{FieldKind, ScalarField3};
use crate::geometry::{GroupElement, MetricParams, Tangent};

/// One sample of a tracked curve: parameter (metric length from the start),
/// position, and the frame coefficients of the discrete velocity.
#[derive(Debug, Clone, Copy)]
pub struct CurveSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// Spatial control u¹ = ẋ cos θ + ẏ sin θ.
    pub u1: f64,
    /// Angular control u² = θ̇.
    pub u2: f64,
}

/// A discretized geodesic with per-sample controls.
#[derive(Debug, Clone)]
pub struct GeodesicCurve {
    pub samples: Vec<CurveSample>,
    /// Metric length, including the stopped-out remainder W at the last
    /// sample.
    pub total_length: f64,
    pub mode: SolveMode,
}

/// Sign changes of the spatial control along a curve.
#[derive(Debug, Clone)]
pub struct CuspReport {
    pub cusp_times: Vec<f64>,
    pub count: usize,
    /// Set when |u¹| stays inside the zero band over an extended run
    /// (more than 20% of consecutive samples): the curve contains a
    /// near-pure-rotation segment rather than isolated sign switches.
    pub degenerate: bool,
}

/// Backtracking knobs.
#[derive(Debug, Clone)]
pub struct BacktrackOptions {
    /// Step length as a fraction of the smallest grid spacing.
    pub step_factor: f64,
    /// Stop once W drops below this; `None` means 2% of W at the start.
    pub stop_radius: Option<f64>,
    pub max_steps: usize,
}

impl Default for BacktrackOptions {
    fn default() -> Self {
        Self {
            step_factor: 0.4,
            stop_radius: None,
            max_steps: 200_000,
        }
    }
}

/// Precomputed derivative grids of a distance map, shared by repeated
/// backtracks over the same solve.
///
/// Cartesian components (∂xW, ∂yW, ∂θW) are stored rather than frame
/// coefficients: they are periodic with the grid's θ period (frame
/// coefficients are anti-periodic across the π seam of projective grids),
/// so they interpolate correctly everywhere; the frame combination happens
/// at the query angle.
pub struct DescentField<'a> {
    w: &'a ScalarField3,
    metric: MetricParams<'a>,
    dx: ScalarField3,
    dy: ScalarField3,
    dtheta: ScalarField3,
}

impl<'a> DescentField<'a> {
    pub fn new(w: &'a ScalarField3, metric: MetricParams<'a>) -> Result<Self> {
        if w.kind() != FieldKind::Value {
            return Err(Error::InvalidArgument(
                "backtracking needs a value field".into(),
            ));
        }
        if w.spec() != metric.cost().spec() {
            return Err(Error::IncompatibleGrids(
                "distance map and cost field grids differ".into(),
            ));
        }
        let spec = *w.spec();
        // nodes within one cell (Chebyshev, θ wrapping) of an exact seed use
        // upwind one-sided differences
        let mut near_seed = vec![false; spec.node_count()];
        for ik in 0..spec.ntheta {
            for iy in 0..spec.ny {
                for ix in 0..spec.nx {
                    if w.at(ix, iy, ik) != 0.0 {
                        continue;
                    }
                    for dk in -1i32..=1 {
                        let jk = (ik as i32 + dk).rem_euclid(spec.ntheta as i32) as usize;
                        for dy in -1i32..=1 {
                            let jy = iy as i32 + dy;
                            if jy < 0 || jy >= spec.ny as i32 {
                                continue;
                            }
                            for dx in -1i32..=1 {
                                let jx = ix as i32 + dx;
                                if jx < 0 || jx >= spec.nx as i32 {
                                    continue;
                                }
                                near_seed[spec.index(jx as usize, jy as usize, jk)] = true;
                            }
                        }
                    }
                }
            }
        }
        let mut d1 = vec![0.0; spec.node_count()];
        let mut d2 = vec![0.0; spec.node_count()];
        let mut d3 = vec![0.0; spec.node_count()];
        for ik in 0..spec.ntheta {
            for iy in 0..spec.ny {
                for ix in 0..spec.nx {
                    let idx = spec.index(ix, iy, ik);
                    let (dx, dy, dt) = if near_seed[idx] {
                        w.cartesian_derivatives_upwind(ix, iy, ik)
                    } else {
                        w.cartesian_derivatives(ix, iy, ik)
                    };
                    d1[idx] = dx;
                    d2[idx] = dy;
                    d3[idx] = dt;
                }
            }
        }
        Ok(Self {
            w,
            metric,
            dx: ScalarField3::from_data(spec, FieldKind::Score, d1, 0.0)?,
            dy: ScalarField3::from_data(spec, FieldKind::Score, d2, 0.0)?,
            dtheta: ScalarField3::from_data(spec, FieldKind::Score, d3, 0.0)?,
        })
    }

    pub fn w(&self) -> &ScalarField3 {
        self.w
    }

    /// Unit-metric-speed descent velocity at a point, as Cartesian
    /// (ẋ, ẏ, θ̇). `None` when the gradient is numerically zero.
    pub fn velocity(&self, x: f64, y: f64, theta: f64) -> Result<Option<(f64, f64, f64)>> {
        let dw = crate::fields::combine_frame(
            theta,
            self.dx.sample(x, y, theta)?,
            self.dy.sample(x, y, theta)?,
            self.dtheta.sample(x, y, theta)?,
        );
        let c = self.metric.cost_at(x, y, theta)?;
        let xi = self.metric.xi();
        let eps = self.metric.eps();
        let c2 = c * c;
        let xi2 = xi * xi;
        let g1 = dw.0 / (xi2 * c2);
        let g2 = dw.1 / c2;
        let g3 = if eps > 0.0 {
            eps * eps * dw.2 / (xi2 * c2)
        } else {
            0.0
        };
        let mut norm2 = c2 * (xi2 * g1 * g1 + g2 * g2);
        if eps > 0.0 {
            norm2 += c2 * xi2 / (eps * eps) * g3 * g3;
        }
        let norm = norm2.sqrt();
        if norm < 1e-12 {
            return Ok(None);
        }
        let v = Tangent::new(-g1 / norm, -g2 / norm, -g3 / norm);
        Ok(Some(v.to_cartesian(theta)))
    }
}

/// Extracts the minimizing geodesic from `start` down to the seed set of a
/// converged distance map.
///
/// Integrates the normalized descent field with RK4 until W falls below the
/// stop radius; the returned length adds the remaining W at the stop point,
/// so it estimates W(start) directly. On plateaus where the gradient
/// vanishes the partial curve is returned inside [`Error::Stalled`].
pub fn backtrack(
    w: &ScalarField3,
    metric: &MetricParams<'_>,
    start: (f64, f64, f64),
    opts: &BacktrackOptions,
) -> Result<GeodesicCurve> {
    let field = DescentField::new(w, *metric)?;
    backtrack_on(&field, start, opts)
}

/// [`backtrack`] against precomputed descent data; use this when tracing
/// many curves over one solve.
pub fn backtrack_on(
    field: &DescentField<'_>,
    start: (f64, f64, f64),
    opts: &BacktrackOptions,
) -> Result<GeodesicCurve> {
    let w = field.w;
    let spec = *w.spec();
    let period = spec.theta_period;
    let mode = if spec.is_projective() {
        SolveMode::Pt
    } else {
        SolveMode::Se2
    };
    let w_start = w.sample(start.0, start.1, start.2)?;
    if !w_start.is_finite() {
        return Err(Error::InvalidArgument(
            "start point is unreached (W = +inf)".into(),
        ));
    }
    if w_start == 0.0 {
        return Err(Error::InvalidArgument("start point is a seed".into()));
    }
    let stop_radius = opts.stop_radius.unwrap_or(0.02 * w_start);
    let h_min = spec.min_spacing();
    let h_spatial = spec.hx().min(spec.hy());

    let mut positions: Vec<(f64, f64, f64, f64)> = Vec::new(); // (t, x, y, θ)
    let (mut x, mut y, mut theta) = (start.0, start.1, start.2.rem_euclid(period));
    let mut t = 0.0;
    let mut w_here = w_start;
    positions.push((t, x, y, theta));

    let stall = |steps: usize, w_here: f64, positions: &[(f64, f64, f64, f64)]| -> Error {
        Error::Stalled {
            steps,
            w_here,
            partial: Box::new(assemble_curve(positions, f64::NAN, period, mode)),
        }
    };

    let mut steps = 0;
    while w_here >= stop_radius {
        if steps >= opts.max_steps || t > 20.0 * w_start {
            return Err(stall(steps, w_here, &positions));
        }
        let v0 = match field.velocity(x, y, theta)? {
            Some(v) => v,
            None => return Err(stall(steps, w_here, &positions)),
        };
        let spatial_speed = (v0.0 * v0.0 + v0.1 * v0.1).sqrt();
        let mut dt = opts.step_factor
            * (h_spatial / spatial_speed.max(1e-300))
                .min(spec.htheta() / v0.2.abs().max(1e-300))
                .min(1e6 * h_min);
        // do not overshoot the seed: W decreases at unit rate along the flow
        dt = dt.min(w_here.max(0.5 * stop_radius));

        // RK4 with step halving when a stage exits the domain or W fails to
        // strictly decrease
        let mut accepted = None;
        for _ in 0..8 {
            match rk4_step(field, x, y, theta, dt, period) {
                Ok(Some((xn, yn, tn))) => {
                    let w_next = w.sample(xn, yn, tn)?;
                    if w_next.is_finite() && w_next < w_here {
                        accepted = Some((xn, yn, tn, w_next));
                        break;
                    }
                    dt *= 0.5;
                }
                Ok(None) => {
                    dt *= 0.5;
                }
                Err(Error::OutOfDomain { .. }) => {
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        let (xn, yn, tn, w_next) = match accepted {
            Some(s) => s,
            None => return Err(stall(steps, w_here, &positions)),
        };

        // metric length of the realized segment, from the chord at the
        // segment midpoint
        let dtheta = wrap_signed(tn - theta, period);
        let mid_theta = (theta + 0.5 * dtheta).rem_euclid(period);
        let chord = Tangent::from_cartesian(mid_theta, xn - x, yn - y, dtheta);
        let c_mid = field
            .metric
            .cost_at(0.5 * (x + xn), 0.5 * (y + yn), mid_theta)?;
        let xi = field.metric.xi();
        let eps = field.metric.eps();
        let mut len2 = xi * xi * chord.a1 * chord.a1 + chord.a2 * chord.a2;
        if eps > 0.0 {
            len2 += xi * xi / (eps * eps) * chord.a3 * chord.a3;
        }
        t += c_mid * len2.sqrt();

        x = xn;
        y = yn;
        theta = tn;
        w_here = w_next;
        positions.push((t, x, y, theta));
        steps += 1;
    }

    Ok(assemble_curve(&positions, w_here, period, mode))
}

fn rk4_step(
    field: &DescentField<'_>,
    x: f64,
    y: f64,
    theta: f64,
    dt: f64,
    period: f64,
) -> Result<Option<(f64, f64, f64)>> {
    let eval = |x: f64, y: f64, th: f64| field.velocity(x, y, th.rem_euclid(period));
    let k1 = match eval(x, y, theta)? {
        Some(v) => v,
        None => return Ok(None),
    };
    let k2 = match eval(x + 0.5 * dt * k1.0, y + 0.5 * dt * k1.1, theta + 0.5 * dt * k1.2)? {
        Some(v) => v,
        None => return Ok(None),
    };
    let k3 = match eval(x + 0.5 * dt * k2.0, y + 0.5 * dt * k2.1, theta + 0.5 * dt * k2.2)? {
        Some(v) => v,
        None => return Ok(None),
    };
    let k4 = match eval(x + dt * k3.0, y + dt * k3.1, theta + dt * k3.2)? {
        Some(v) => v,
        None => return Ok(None),
    };
    let xn = x + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
    let yn = y + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    let tn = (theta + dt / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2)).rem_euclid(period);
    Ok(Some((xn, yn, tn)))
}

/// Smallest signed representative of an angle difference modulo the period.
fn wrap_signed(d: f64, period: f64) -> f64 {
    let mut r = d.rem_euclid(period);
    if r > 0.5 * period {
        r -= period;
    }
    r
}

fn assemble_curve(
    positions: &[(f64, f64, f64, f64)],
    w_final: f64,
    period: f64,
    mode: SolveMode,
) -> GeodesicCurve {
    let n = positions.len();
    // Controls are measured against the continuous lift of θ: unwrapping
    // removes the artificial frame flip when a projective curve crosses the
    // π seam, so only genuine motion reversals switch the sign of u¹.
    let mut unwrapped = Vec::with_capacity(n);
    for (i, p) in positions.iter().enumerate() {
        if i == 0 {
            unwrapped.push(p.3);
        } else {
            let prev = unwrapped[i - 1];
            unwrapped.push(prev + wrap_signed(p.3 - positions[i - 1].3, period));
        }
    }
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let (t, x, y, theta) = positions[i];
        let (u1, u2) = if n < 2 {
            (0.0, 0.0)
        } else {
            // controls from the discrete velocity of the adjacent segment
            let (j0, j1) = if i + 1 < n { (i, i + 1) } else { (i - 1, i) };
            let (t0, x0, y0, _) = positions[j0];
            let (t1, x1, y1, _) = positions[j1];
            let dt = (t1 - t0).max(1e-300);
            let dth = unwrapped[j1] - unwrapped[j0];
            let v =
                Tangent::from_cartesian(unwrapped[i], (x1 - x0) / dt, (y1 - y0) / dt, dth / dt);
            (v.a1, v.a2)
        };
        samples.push(CurveSample {
            t,
            x,
            y,
            theta,
            u1,
            u2,
        });
    }
    let arc = positions.last().map(|p| p.0).unwrap_or(0.0);
    let total_length = if w_final.is_nan() { arc } else { arc + w_final };
    GeodesicCurve {
        samples,
        total_length,
        mode,
    }
}

/// Detects sign switches of the spatial control u¹ along a curve.
///
/// Samples with |u¹| ≤ `zero_band` count as zero; a cusp is recorded
/// whenever the strict sign flips, with the crossing located by linear
/// interpolation. The default band is 0.05 × median |u¹|.
pub fn detect_cusps(curve: &GeodesicCurve, zero_band: Option<f64>) -> Result<CuspReport> {
    let n = curve.samples.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "cusp detection needs at least 3 samples, got {n}"
        )));
    }
    let band = zero_band.unwrap_or_else(|| {
        let mut mags: Vec<f64> = curve.samples.iter().map(|s| s.u1.abs()).collect();
        mags.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        0.05 * mags[mags.len() / 2]
    });

    let mut cusp_times = Vec::new();
    let mut last_sign = 0i8;
    let mut last_idx = 0usize;
    let mut longest_zero_run = 0usize;
    let mut zero_run = 0usize;
    for (i, s) in curve.samples.iter().enumerate() {
        let sign = if s.u1 > band {
            1
        } else if s.u1 < -band {
            -1
        } else {
            0
        };
        if sign == 0 {
            zero_run += 1;
            longest_zero_run = longest_zero_run.max(zero_run);
            continue;
        }
        zero_run = 0;
        if last_sign != 0 && sign == -last_sign {
            let a = &curve.samples[last_idx];
            let frac = a.u1 / (a.u1 - s.u1);
            cusp_times.push(a.t + frac * (s.t - a.t));
        }
        last_sign = sign;
        last_idx = i;
    }
    let degenerate = longest_zero_run * 5 > n;
    Ok(CuspReport {
        count: cusp_times.len(),
        cusp_times,
        degenerate,
    })
}

/// Result of tracking one SE(2) orientation assignment.
#[derive(Debug, Clone, Copy)]
pub struct AssignmentTrack {
    pub seed_flipped: bool,
    pub end_flipped: bool,
    pub length: f64,
    pub cusp_count: usize,
    pub degenerate: bool,
}

/// Side-by-side tracking of the four SE(2) antipodal orientation
/// assignments against the single projective track.
#[derive(Debug, Clone)]
pub struct ModeComparison {
    pub se2: [AssignmentTrack; 4],
    pub pt_length: f64,
    pub pt_cusp_count: usize,
    pub pt_degenerate: bool,
    /// Length agreement tolerance used for the quotient check.
    pub tolerance: f64,
}

impl ModeComparison {
    pub fn min_se2_length(&self) -> f64 {
        self.se2.iter().map(|a| a.length).fold(f64::INFINITY, f64::min)
    }
}

/// Tracks between two endpoints whose orientations are only known up to π:
/// four SE(2) assignments (each end as given or flipped by π) against one
/// projective track, verifying that the PT length matches the best SE(2)
/// assignment within grid tolerance.
#[allow(clippy::too_many_arguments)]
pub fn compare_modes(
    cost_2pi: &ScalarField3,
    xi: f64,
    eps: f64,
    p0: (f64, f64, f64),
    p1: (f64, f64, f64),
    solve_opts: &crate::eikonal::SolveOptions,
    track_opts: &BacktrackOptions,
) -> Result<ModeComparison> {
    use crate::eikonal::{solve, EikonalProblem, SolveMode};
    use std::f64::consts::PI;

    let cost_pt = cost_2pi.fold_to_projective()?;

    let mut se2: Vec<AssignmentTrack> = Vec::with_capacity(4);
    for seed_flipped in [false, true] {
        let seed_theta = p0.2 + if seed_flipped { PI } else { 0.0 };
        let prob = EikonalProblem::new(
            cost_2pi,
            xi,
            eps,
            &[(p0.0, p0.1, seed_theta)],
            SolveMode::Se2,
        )?;
        let (w, _) = solve(&prob, solve_opts)?;
        let metric = MetricParams::new(xi, eps, cost_2pi)?;
        let descent = DescentField::new(&w, metric)?;
        for end_flipped in [false, true] {
            let end_theta = p1.2 + if end_flipped { PI } else { 0.0 };
            let curve = backtrack_on(&descent, (p1.0, p1.1, end_theta), track_opts)?;
            let cusps = detect_cusps(&curve, None)?;
            se2.push(AssignmentTrack {
                seed_flipped,
                end_flipped,
                length: curve.total_length,
                cusp_count: cusps.count,
                degenerate: cusps.degenerate,
            });
        }
    }

    let g0 = GroupElement::new(p0.0, p0.1, p0.2).project();
    let g1 = GroupElement::new(p1.0, p1.1, p1.2).project();
    let prob_pt = EikonalProblem::new(
        &cost_pt,
        xi,
        eps,
        &[(g0.x, g0.y, g0.theta())],
        SolveMode::Pt,
    )?;
    let (w_pt, _) = solve(&prob_pt, solve_opts)?;
    let metric_pt = MetricParams::new(xi, eps, &cost_pt)?;
    let pt_curve = backtrack(&w_pt, &metric_pt, (g1.x, g1.y, g1.theta()), track_opts)?;
    let pt_cusps = detect_cusps(&pt_curve, None)?;

    let h = cost_2pi.spec().max_spacing();
    let c_max = cost_2pi.data().iter().cloned().fold(0.0f64, f64::max);
    let tolerance = 3.0 * h * c_max * xi.max(1.0);
    let result = ModeComparison {
        se2: [se2[0], se2[1], se2[2], se2[3]],
        pt_length: pt_curve.total_length,
        pt_cusp_count: pt_cusps.count,
        pt_degenerate: pt_cusps.degenerate,
        tolerance,
    };
    let min_se2 = result.min_se2_length();
    if (result.pt_length - min_se2).abs() > tolerance {
        return Err(Error::QuotientMismatch {
            pt: result.pt_length,
            min_se2,
            tol: tolerance,
        });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eikonal::{solve, EikonalProblem, SolveMode, SolveOptions};
    use crate::fields::GridSpec;
    use std::f64::consts::PI;

    fn uniform_setup(
        n: usize,
        half: f64,
        ntheta: usize,
        period: f64,
    ) -> (ScalarField3, ScalarField3) {
        let spec = GridSpec::centered(n, half, ntheta, period).unwrap();
        let cost = ScalarField3::constant(spec, FieldKind::Cost, 1.0).unwrap();
        let mode = if (period - PI).abs() < 1e-9 {
            SolveMode::Pt
        } else {
            SolveMode::Se2
        };
        let prob = EikonalProblem::new(&cost, 1.0, 0.1, &[(0.0, 0.0, 0.0)], mode).unwrap();
        let (w, _) = solve(&prob, &SolveOptions::default()).unwrap();
        (cost, w)
    }

    #[test]
    fn straight_line_geodesic() {
        let (cost, w) = uniform_setup(41, 4.0, 24, PI);
        let metric = MetricParams::new(1.0, 0.1, &cost).unwrap();
        let curve = backtrack(&w, &metric, (3.0, 0.0, 0.0), &BacktrackOptions::default()).unwrap();
        // spatial projection hugs the x-axis
        let h = cost.spec().hx();
        for s in &curve.samples {
            assert!(s.y.abs() <= 2.0 * h, "y deviation {} at x={}", s.y, s.x);
        }
        // length approximates the distance
        let w_start = w.sample(3.0, 0.0, 0.0).unwrap();
        assert!(
            (curve.total_length - w_start).abs() <= 0.02 * w_start,
            "length {} vs W {}",
            curve.total_length,
            w_start
        );
        let cusps = detect_cusps(&curve, None).unwrap();
        assert_eq!(cusps.count, 0);
    }

    #[test]
    fn length_matches_distance_on_sampled_starts() {
        // On this deliberately coarse grid the distance map itself carries a
        // few percent of discretization error, so the batch check uses a
        // grid-level tolerance; the sharp relative bound is exercised at
        // scale by the acceptance suite.
        let (cost, w) = uniform_setup(33, 3.0, 24, PI);
        let metric = MetricParams::new(1.0, 0.1, &cost).unwrap();
        let field = DescentField::new(&w, metric).unwrap();
        let starts = [
            (2.0, 1.0, 0.4),
            (-1.5, 1.5, 2.0),
            (1.0, -2.0, 1.2),
            (-2.0, -1.0, 2.8),
            (0.5, 2.2, 0.1),
        ];
        for &s in &starts {
            let curve = backtrack_on(&field, s, &BacktrackOptions::default()).unwrap();
            let w_start = w.sample(s.0, s.1, s.2).unwrap();
            let rel = (curve.total_length - w_start).abs() / w_start;
            assert!(rel <= 0.15, "start {s:?}: rel err {rel}");
        }
    }

    #[test]
    fn w_strictly_decreases_along_curve() {
        let (_cost, w) = uniform_setup(33, 3.0, 24, PI);
        let cost = ScalarField3::constant(*w.spec(), FieldKind::Cost, 1.0).unwrap();
        let metric = MetricParams::new(1.0, 0.1, &cost).unwrap();
        let curve = backtrack(&w, &metric, (2.0, 1.5, 0.7), &BacktrackOptions::default()).unwrap();
        let mut prev = f64::INFINITY;
        for s in &curve.samples {
            let here = w.sample(s.x, s.y, s.theta).unwrap();
            assert!(here < prev, "W did not decrease: {here} after {prev}");
            prev = here;
        }
    }

    #[test]
    fn start_adjacent_to_seed_gives_short_curve() {
        let (cost, w) = uniform_setup(17, 1.0, 16, PI);
        let metric = MetricParams::new(1.0, 0.1, &cost).unwrap();
        let h = cost.spec().hx();
        let start = (1.2 * h, 0.0, 0.0);
        let w_start = w.sample(start.0, start.1, start.2).unwrap();
        let curve = backtrack(&w, &metric, start, &BacktrackOptions::default()).unwrap();
        assert!(curve.samples.len() <= 8, "{} samples", curve.samples.len());
        assert!((curve.total_length - w_start).abs() <= 0.25 * w_start);
    }

    #[test]
    fn start_at_seed_is_rejected() {
        let (cost, w) = uniform_setup(17, 1.0, 16, PI);
        let metric = MetricParams::new(1.0, 0.1, &cost).unwrap();
        assert!(matches!(
            backtrack(&w, &metric, (0.0, 0.0, 0.0), &BacktrackOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    fn synthetic_curve(u1s: &[f64], dt: f64) -> GeodesicCurve {
        let samples = u1s
            .iter()
            .enumerate()
            .map(|(i, &u1)| CurveSample {
                t: i as f64 * dt,
                x: 0.0,
                y: 0.0,
                theta: 0.0,
                u1,
                u2: 0.0,
            })
            .collect();
        GeodesicCurve {
            samples,
            total_length: u1s.len() as f64 * dt,
            mode: SolveMode::Pt,
        }
    }

    #[test]
    fn cusp_count_of_cosine_control() {
        // u¹(t) = cos t on [0, 3π] switches sign 3 times
        let n = 400;
        let dt = 3.0 * PI / (n - 1) as f64;
        let u1s: Vec<f64> = (0..n).map(|i| (i as f64 * dt).cos()).collect();
        let curve = synthetic_curve(&u1s, dt);
        let report = detect_cusps(&curve, Some(1e-6)).unwrap();
        assert_eq!(report.count, 3);
        assert!(!report.degenerate);
        for (got, expected) in report
            .cusp_times
            .iter()
            .zip([PI / 2.0, 3.0 * PI / 2.0, 5.0 * PI / 2.0])
        {
            assert!((got - expected).abs() < 2.0 * dt, "{got} vs {expected}");
        }
    }

    #[test]
    fn pure_rotation_is_degenerate_not_cusped() {
        let u1s = vec![0.0; 50];
        let curve = synthetic_curve(&u1s, 0.1);
        let report = detect_cusps(&curve, Some(1e-9)).unwrap();
        assert_eq!(report.count, 0);
        assert!(report.degenerate);
    }

    #[test]
    fn reversal_negates_u1_and_keeps_count() {
        let n = 200;
        let dt = 3.0 * PI / (n - 1) as f64;
        let u1s: Vec<f64> = (0..n).map(|i| (i as f64 * dt).cos()).collect();
        let curve = synthetic_curve(&u1s, dt);
        let reversed: Vec<f64> = u1s.iter().rev().map(|u| -u).collect();
        let rcurve = synthetic_curve(&reversed, dt);
        let a = detect_cusps(&curve, Some(1e-6)).unwrap();
        let b = detect_cusps(&rcurve, Some(1e-6)).unwrap();
        assert_eq!(a.count, b.count);
    }

    #[test]
    fn too_short_curve_is_rejected() {
        let curve = synthetic_curve(&[1.0, -1.0], 0.1);
        assert!(detect_cusps(&curve, None).is_err());
    }

    #[test]
    fn compare_modes_uniform_cost() {
        let spec = GridSpec::centered(25, 2.5, 32, 2.0 * PI).unwrap();
        let cost = ScalarField3::constant(spec, FieldKind::Cost, 1.0).unwrap();
        let cmp = compare_modes(
            &cost,
            1.0,
            0.1,
            (-1.5, -0.5, 0.3),
            (1.5, 0.8, 0.5),
            &SolveOptions::default(),
            &BacktrackOptions::default(),
        )
        .unwrap();
        let min_se2 = cmp.min_se2_length();
        assert!((cmp.pt_length - min_se2).abs() <= cmp.tolerance);
        // the projective track never needs more cusps than the best branch
        let best = cmp
            .se2
            .iter()
            .min_by(|a, b| a.length.partial_cmp(&b.length).unwrap())
            .unwrap();
        assert!(cmp.pt_cusp_count <= best.cusp_count);
    }
}
