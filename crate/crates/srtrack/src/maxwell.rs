//! Numerical probing of distance spheres, Maxwell strata, minimizer
//! multiplicity, and the cuspless reachable-set symmetry union, for uniform
//! cost.
//!
//! All probes work on converged distance maps. The quotient-induced stratum
//! is detected through the antipodal value equality on a full-group solve;
//! the remaining strata are observed indirectly, through multiplicity
//! estimates from perturbed backtracks and through the θ = 0 slab where the
//! flipped lift is strictly preferred.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::ScalarField3;
use crate::geometry::{GroupElement, MetricParams, ProjectivePoint};
use crate::tracker::{backtrack_on, BacktrackOptions, DescentField, GeodesicCurve};

/// Grid nodes on (a band around) the level set W = R.
#[derive(Debug, Clone)]
pub struct SphereSample {
    pub radius: f64,
    pub band: f64,
    /// (x, y, θ, W) per node.
    pub points: Vec<(f64, f64, f64, f64)>,
}

/// Identifier of a Maxwell stratum component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StratumId {
    /// Local stratum of the full group, observed indirectly.
    M1,
    /// Quotient-induced stratum: antipodal value equality.
    M2,
    /// Global stratum in the θ = 0 slab, observed through flip preference.
    M3,
}

/// Points attributed to one stratum.
#[derive(Debug, Clone)]
pub struct StratumEstimate {
    pub stratum: StratumId,
    pub points: Vec<MaxwellPoint>,
}

#[derive(Debug, Clone, Copy)]
pub struct MaxwellPoint {
    pub x: f64,
    pub y: f64,
    /// Projective orientation in [0, π).
    pub theta: f64,
    /// Common distance value (the sphere radius the point sits on).
    pub radius: f64,
    /// |W(g) − W(g ⊙ (0,0,π))| at detection.
    pub gap: f64,
}

/// Collects grid nodes with |W − R| ≤ band. An empty result is valid.
pub fn extract_sphere(w: &ScalarField3, radius: f64, band: f64) -> SphereSample {
    let spec = w.spec();
    let mut points = Vec::new();
    for ik in 0..spec.ntheta {
        for iy in 0..spec.ny {
            for ix in 0..spec.nx {
                let v = w.at(ix, iy, ik);
                if v.is_finite() && (v - radius).abs() <= band {
                    points.push((spec.x_at(ix), spec.y_at(iy), spec.theta_at(ik), v));
                }
            }
        }
    }
    SphereSample {
        radius,
        band,
        points,
    }
}

/// Detects the quotient-induced Maxwell stratum on a full-group solve from a
/// single seed: nodes where the distance equals the distance of the
/// antipodal point within `tol` (both finite).
///
/// The antipodal node is an exact grid node (θ shifted by half the slabs),
/// so no interpolation is involved. Each detected pair is reported once, as
/// a projective point with the mean value as its radius.
pub fn maxwell_m2(w_se2: &ScalarField3, tol: f64) -> Result<StratumEstimate> {
    let spec = w_se2.spec();
    if spec.is_projective() {
        return Err(Error::IncompatibleGrids(
            "antipodal equality needs a full 2π-periodic solve".into(),
        ));
    }
    if spec.ntheta % 2 != 0 {
        return Err(Error::IncompatibleGrids(
            "antipodal pairing needs even ntheta".into(),
        ));
    }
    let half = spec.ntheta / 2;
    let mut points = Vec::new();
    for ik in 0..half {
        for iy in 0..spec.ny {
            for ix in 0..spec.nx {
                let a = w_se2.at(ix, iy, ik);
                let b = w_se2.at(ix, iy, ik + half);
                if a.is_finite() && b.is_finite() && (a - b).abs() <= tol {
                    points.push(MaxwellPoint {
                        x: spec.x_at(ix),
                        y: spec.y_at(iy),
                        theta: spec.theta_at(ik),
                        radius: 0.5 * (a + b),
                        gap: (a - b).abs(),
                    });
                }
            }
        }
    }
    Ok(StratumEstimate {
        stratum: StratumId::M2,
        points,
    })
}

/// Lower-bound estimate of the number of distinct minimizers reaching `q`:
/// backtracks from `n_perturb` deterministic one-cell perturbations of `q`,
/// keeps the curves whose lengths are consistent with W(q), and counts
/// clusters under the maximal pointwise distance ≤ `cluster_tol`.
pub fn multiplicity_probe(
    w: &ScalarField3,
    metric: &MetricParams<'_>,
    q: (f64, f64, f64),
    n_perturb: usize,
    cluster_tol: f64,
) -> Result<usize> {
    let field = DescentField::new(w, *metric)?;
    multiplicity_probe_on(&field, q, n_perturb, cluster_tol)
}

/// [`multiplicity_probe`] against a prepared descent field.
pub fn multiplicity_probe_on(
    field: &DescentField<'_>,
    q: (f64, f64, f64),
    n_perturb: usize,
    cluster_tol: f64,
) -> Result<usize> {
    let w = field.w();
    let spec = *w.spec();
    let wq = w.sample(q.0, q.1, q.2)?;
    if !wq.is_finite() || wq == 0.0 {
        return Err(Error::InvalidArgument(
            "probe point must be reached and off the seed".into(),
        ));
    }
    let opts = BacktrackOptions::default();
    let mut curves: Vec<GeodesicCurve> = Vec::new();
    let mut attempts = 0;
    // deterministic unit directions from a spherical spiral, scaled to one
    // grid cell
    for i in 0..n_perturb {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n_perturb as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = 2.399963229728653 * i as f64;
        let dir = (r * phi.cos(), r * phi.sin(), z);
        let start = (
            (q.0 + dir.0 * spec.hx()).clamp(spec.x_min, spec.x_max),
            (q.1 + dir.1 * spec.hy()).clamp(spec.y_min, spec.y_max),
            q.2 + dir.2 * spec.htheta(),
        );
        attempts += 1;
        match backtrack_on(field, start, &opts) {
            Ok(curve) => {
                let h = spec.max_spacing();
                if (curve.total_length - wq).abs() <= 3.0 * h + wq * 0.1 {
                    curves.push(curve);
                }
            }
            Err(Error::Stalled { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if curves.is_empty() {
        return Err(Error::ProbeInconclusive { attempts });
    }

    // greedy first-fit clustering by maximal pointwise curve distance
    let period = spec.theta_period;
    let mut representatives: Vec<&GeodesicCurve> = Vec::new();
    for curve in &curves {
        let mut assigned = false;
        for rep in &representatives {
            if curve_distance(curve, rep, period) <= cluster_tol {
                assigned = true;
                break;
            }
        }
        if !assigned {
            representatives.push(curve);
        }
    }
    Ok(representatives.len())
}

/// Maximal pointwise distance between two curves, matched by remaining arc
/// length (every probe curve ends at the seed, so arrival-aligned matching
/// compares geometrically corresponding points even when the total lengths
/// differ); θ differences wrap with the period.
///
/// The tenth of the curve nearest the probe point and nearest the seed is
/// skipped: there the curves differ only by the perturbation or coincide;
/// distinct minimizers separate mid-path.
fn curve_distance(a: &GeodesicCurve, b: &GeodesicCurve, period: f64) -> f64 {
    const SAMPLES: usize = 25;
    let la = a.samples.last().map(|s| s.t).unwrap_or(0.0);
    let lb = b.samples.last().map(|s| s.t).unwrap_or(0.0);
    let l = la.min(lb);
    let mut worst = 0.0f64;
    for i in 0..SAMPLES {
        let back = (0.1 + 0.8 * i as f64 / (SAMPLES - 1) as f64) * l;
        let pa = sample_at_arc(a, la - back, period);
        let pb = sample_at_arc(b, lb - back, period);
        let dt = {
            let d = (pa.2 - pb.2).rem_euclid(period);
            d.min(period - d)
        };
        let d = ((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2) + dt * dt).sqrt();
        worst = worst.max(d);
    }
    worst
}

fn sample_at_arc(c: &GeodesicCurve, target: f64, period: f64) -> (f64, f64, f64) {
    let mut prev = &c.samples[0];
    for s in &c.samples {
        if s.t >= target {
            let span = s.t - prev.t;
            if span <= 0.0 {
                return (s.x, s.y, s.theta);
            }
            let u = (target - prev.t) / span;
            // positions interpolate linearly; θ through the short way with
            // the curve's own period
            let mut dth = (s.theta - prev.theta).rem_euclid(period);
            if dth > 0.5 * period {
                dth -= period;
            }
            return (
                prev.x + u * (s.x - prev.x),
                prev.y + u * (s.y - prev.y),
                prev.theta + u * dth,
            );
        }
        prev = s;
    }
    let last = c.samples.last().unwrap();
    (last.x, last.y, last.theta)
}

/// One row of the stratum-presence table.
#[derive(Debug, Clone)]
pub struct StageRow {
    pub radius: f64,
    pub m2_present: bool,
    /// Largest multiplicity estimate among the probed sphere points.
    pub max_multiplicity: usize,
    /// Number of θ = 0 sphere nodes with nontrivial position whose flipped
    /// lift is strictly preferred (the global-stratum indicator).
    pub m3_proxy_count: usize,
}

/// Knobs for [`stage_report`].
#[derive(Debug, Clone)]
pub struct StageOptions {
    /// Sphere extraction band; defaults to 1.5 × the largest grid spacing.
    pub band: Option<f64>,
    /// Antipodal equality tolerance; defaults to 2 × the largest spacing.
    pub m2_tol: Option<f64>,
    /// Sphere points probed for multiplicity per radius.
    pub probe_points: usize,
    /// Perturbed backtracks per probe.
    pub n_perturb: usize,
    /// Cluster tolerance as a fraction of the radius.
    pub cluster_tol_factor: f64,
}

impl Default for StageOptions {
    fn default() -> Self {
        Self {
            band: None,
            m2_tol: None,
            probe_points: 6,
            n_perturb: 10,
            cluster_tol_factor: 0.35,
        }
    }
}

/// Builds the per-radius stratum-presence table from a full-group solve
/// (single seed at the group identity, uniform cost): whether the
/// quotient-induced stratum is present at that radius, the largest
/// multiplicity found among probed sphere points, and the size of the
/// θ = 0 flip-preferred set.
pub fn stage_report(
    w_se2: &ScalarField3,
    xi: f64,
    eps: f64,
    radii: &[f64],
    opts: &StageOptions,
) -> Result<Vec<StageRow>> {
    let spec2 = *w_se2.spec();
    if spec2.is_projective() {
        return Err(Error::IncompatibleGrids(
            "the stage report needs a full 2π-periodic solve".into(),
        ));
    }
    let h = spec2.max_spacing();
    let band = opts.band.unwrap_or(1.5 * h);
    let m2_tol = opts.m2_tol.unwrap_or(2.0 * h);

    let w_pt = w_se2.fold_to_projective()?;
    let spec = *w_pt.spec();
    let uniform_cost =
        crate::fields::ScalarField3::constant(spec, crate::fields::FieldKind::Cost, 1.0)?;
    let metric = MetricParams::new(xi, eps, &uniform_cost)?;
    let field = DescentField::new(&w_pt, metric)?;

    let m2 = maxwell_m2(w_se2, m2_tol)?;
    let half = spec2.ntheta / 2;

    let mut rows = Vec::with_capacity(radii.len());
    for &radius in radii {
        let m2_present = m2.points.iter().any(|p| (p.radius - radius).abs() <= band);

        // multiplicity probes on a spread of sphere points
        let sphere = extract_sphere(&w_pt, radius, band);
        let mut max_mult = 0usize;
        if !sphere.points.is_empty() {
            let stride = (sphere.points.len() / opts.probe_points.max(1)).max(1);
            for pt in sphere.points.iter().step_by(stride).take(opts.probe_points) {
                match multiplicity_probe_on(
                    &field,
                    (pt.0, pt.1, pt.2),
                    opts.n_perturb,
                    opts.cluster_tol_factor * radius,
                ) {
                    Ok(m) => max_mult = max_mult.max(m),
                    Err(Error::ProbeInconclusive { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }

        // θ = 0 nodes on the sphere where the flipped lift strictly wins
        let mut m3_proxy_count = 0usize;
        let min_pos = 2.0 * spec.hx().max(spec.hy());
        for iy in 0..spec.ny {
            for ix in 0..spec.nx {
                let direct = w_se2.at(ix, iy, 0);
                let flipped = w_se2.at(ix, iy, half);
                let w_here = w_pt.at(ix, iy, 0);
                if !w_here.is_finite() || (w_here - radius).abs() > band {
                    continue;
                }
                let pos = (spec.x_at(ix).powi(2) + spec.y_at(iy).powi(2)).sqrt();
                if pos <= min_pos {
                    continue;
                }
                if flipped.is_finite() && direct.is_finite() && flipped < direct - 0.5 * m2_tol {
                    m3_proxy_count += 1;
                }
            }
        }

        rows.push(StageRow {
            radius,
            m2_present,
            max_multiplicity: max_mult,
            m3_proxy_count,
        });
    }
    Ok(rows)
}

/// The five-clause symmetry union lifting a full-group membership predicate
/// to the projective bundle: q is reachable when (x, y, θ), (x, y, θ+π),
/// (−x, y, −θ) or (−x, y, −θ+π) satisfies the predicate, or when x = y = 0.
pub fn reachable_union<F>(pred: F, q: &ProjectivePoint) -> bool
where
    F: Fn(&GroupElement) -> bool,
{
    if q.x == 0.0 && q.y == 0.0 {
        return true;
    }
    let theta = q.theta();
    let lifts = [
        GroupElement::new(q.x, q.y, theta),
        GroupElement::new(q.x, q.y, theta + PI),
        GroupElement::new(-q.x, q.y, -theta),
        GroupElement::new(-q.x, q.y, -theta + PI),
    ];
    lifts.iter().any(pred)
}

/// Default membership predicate for the cuspless reachable set, built from
/// a full-group distance map: the minimizer to the lifted endpoint is
/// tracked and accepted when its spatial control keeps one strict sign.
///
/// This tests minimizers only, so it under-approximates reachability by
/// arbitrary cuspless geodesics.
pub fn minimizer_cuspless_predicate<'a>(
    w_se2: &'a ScalarField3,
    metric: MetricParams<'a>,
) -> Result<impl Fn(&GroupElement) -> bool + 'a> {
    let field = DescentField::new(w_se2, metric)?;
    Ok(move |g: &GroupElement| {
        if g.x == 0.0 && g.y == 0.0 {
            return false;
        }
        let curve = match backtrack_on(&field, (g.x, g.y, g.theta()), &BacktrackOptions::default())
        {
            Ok(c) => c,
            Err(_) => return false,
        };
        if curve.samples.len() < 3 {
            return false;
        }
        // the backtracked curve runs endpoint → seed, so a strictly
        // positive forward control along the geodesic shows up as u¹ < 0
        let mut sorted: Vec<f64> = curve.samples.iter().map(|s| s.u1.abs()).collect();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        let band = 0.05 * median;
        median > 1e-9 && curve.samples.iter().all(|s| s.u1 < band)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eikonal::{solve, EikonalProblem, SolveMode, SolveOptions};
    use crate::fields::{FieldKind, GridSpec};

    fn uniform_se2_solve(n: usize, half: f64, ntheta: usize) -> ScalarField3 {
        let spec = GridSpec::centered(n, half, ntheta, 2.0 * PI).unwrap();
        let cost = ScalarField3::constant(spec, FieldKind::Cost, 1.0).unwrap();
        let prob =
            EikonalProblem::new(&cost, 1.0, 0.1, &[(0.0, 0.0, 0.0)], SolveMode::Se2).unwrap();
        let (w, _) = solve(&prob, &SolveOptions::default()).unwrap();
        w
    }

    #[test]
    fn sphere_extraction_bounds() {
        let w = uniform_se2_solve(21, 2.0, 16);
        let h = w.spec().max_spacing();
        // a tiny radius captures only the seed neighborhood
        let small = extract_sphere(&w, 0.0, 0.5 * h);
        assert!(!small.points.is_empty());
        for p in &small.points {
            assert!(p.3 <= 0.5 * h);
        }
        // far beyond the reachable domain the sphere is empty
        let empty = extract_sphere(&w, 1e3, h);
        assert!(empty.points.is_empty());
        // the distance dominates the straight-line spatial lower bound
        let sphere = extract_sphere(&w, 1.2, 1.5 * h);
        assert!(!sphere.points.is_empty());
        for p in sphere.points.iter().take(200) {
            let lower = (p.0 * p.0 + p.1 * p.1).sqrt();
            assert!(p.3 >= lower - 1e-9, "W {} under spatial bound {lower}", p.3);
        }
    }

    #[test]
    fn m2_detects_pure_rotation_tie() {
        // (0, 0, π/2) ties with its antipode (0, 0, 3π/2) by symmetry
        let w = uniform_se2_solve(17, 1.5, 32);
        let h = w.spec().max_spacing();
        let m2 = maxwell_m2(&w, 2.0 * h).unwrap();
        let hit = m2
            .points
            .iter()
            .find(|p| p.x.abs() < 1e-9 && p.y.abs() < 1e-9 && (p.theta - PI / 2.0).abs() < 1e-9);
        match hit {
            Some(p) => assert!((p.radius - PI / 2.0).abs() <= 2.0 * h, "radius {}", p.radius),
            None => panic!("no tie at (0, 0, π/2); {} points", m2.points.len()),
        }
    }

    #[test]
    fn m2_needs_full_group_grid() {
        let spec = GridSpec::centered(9, 1.0, 8, PI).unwrap();
        let w = ScalarField3::constant(spec, FieldKind::Value, 1.0).unwrap();
        assert!(matches!(
            maxwell_m2(&w, 0.1),
            Err(Error::IncompatibleGrids(_))
        ));
    }

    #[test]
    fn m2_reflection_symmetry() {
        // the detected node set maps onto itself under (x, y, θ) → (x, −y, −θ)
        let w = uniform_se2_solve(17, 1.5, 16);
        let h = w.spec().max_spacing();
        let m2 = maxwell_m2(&w, 2.0 * h).unwrap();
        let key = |x: f64, y: f64, t: f64| {
            (
                (x * 1e6).round() as i64,
                (y * 1e6).round() as i64,
                (t.rem_euclid(PI) * 1e6).round() as i64,
            )
        };
        let set: std::collections::HashSet<_> =
            m2.points.iter().map(|p| key(p.x, p.y, p.theta)).collect();
        for p in &m2.points {
            let reflected = key(p.x, -p.y, (-p.theta).rem_euclid(PI));
            assert!(
                set.contains(&reflected),
                "mirror of ({}, {}, {}) missing",
                p.x,
                p.y,
                p.theta
            );
        }
    }

    #[test]
    fn multiplicity_is_one_at_generic_points() {
        // a close, orientation-aligned target below the first Maxwell
        // radius has a unique near-straight minimizer
        let w_se2 = uniform_se2_solve(21, 2.0, 32);
        let w = w_se2.fold_to_projective().unwrap();
        let cost = ScalarField3::constant(*w.spec(), FieldKind::Cost, 1.0).unwrap();
        let metric = MetricParams::new(1.0, 0.1, &cost).unwrap();
        let m = multiplicity_probe(&w, &metric, (1.4, 0.1, 0.05), 8, 0.6).unwrap();
        assert_eq!(m, 1);
    }

    #[test]
    fn multiplicity_never_exceeds_probe_count() {
        let w_se2 = uniform_se2_solve(17, 1.5, 16);
        let w = w_se2.fold_to_projective().unwrap();
        let cost = ScalarField3::constant(*w.spec(), FieldKind::Cost, 1.0).unwrap();
        let metric = MetricParams::new(1.0, 0.1, &cost).unwrap();
        let m = multiplicity_probe(&w, &metric, (0.9, 0.5, 0.8), 5, 1e-6).unwrap();
        assert!(m <= 5);
    }

    #[test]
    fn reachable_union_clauses() {
        // the origin clause holds for any θ and any predicate
        let never = |_: &GroupElement| false;
        assert!(reachable_union(never, &ProjectivePoint::new(0.0, 0.0, 1.0)));
        assert!(!reachable_union(never, &ProjectivePoint::new(1.0, 0.0, 1.0)));

        // a half-space stub is reached through the mirrored clause
        let half_space = |g: &GroupElement| g.x > 0.0;
        assert!(reachable_union(
            half_space,
            &ProjectivePoint::new(-1.0, 0.0, 0.0)
        ));

        // monotone: enlarging the predicate never turns true into false
        let bigger = |g: &GroupElement| g.x > 0.0 || g.y > 0.5;
        for &(x, y, t) in &[(0.4, -0.2, 0.3), (-0.7, 0.8, 1.2), (0.0, -1.0, 2.0)] {
            let q = ProjectivePoint::new(x, y, t);
            if reachable_union(half_space, &q) {
                assert!(reachable_union(bigger, &q));
            }
        }
    }
}
