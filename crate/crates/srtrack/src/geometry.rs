//! SE(2) group operations, the projective quotient, the left-invariant frame,
//! and the (ε-relaxed) sub-Riemannian metric tensor.
//!
//! Angles are kept normalized at all times: group elements carry θ ∈ [0, 2π),
//! projective points carry θ ∈ [0, π). Tangent vectors are stored as
//! coefficients in the left-invariant frame {A₁, A₂, A₃} with
//! A₁ = cos θ ∂x + sin θ ∂y (forward), A₂ = ∂θ (angular), and
//! A₃ = −sin θ ∂x + cos θ ∂y (lateral).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::ScalarField3;

/// Angles within this distance of the period wrap to 0, so equality tests on
/// normalized angles are stable.
pub const ANGLE_EPS: f64 = 1e-12;

/// Normalizes an angle into [0, period), wrapping values within
/// [`ANGLE_EPS`] of the period back to 0.
pub fn normalize_angle(theta: f64, period: f64) -> f64 {
    let mut t = theta.rem_euclid(period);
    if period - t < ANGLE_EPS {
        t = 0.0;
    }
    t
}

/// An element (x, y, θ) of the roto-translation group, θ ∈ [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    pub x: f64,
    pub y: f64,
    theta: f64,
}

impl GroupElement {
    /// The group identity e = (0, 0, 0).
    pub const IDENTITY: GroupElement = GroupElement {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta, 2.0 * PI),
        }
    }

    /// Orientation angle, always in [0, 2π).
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Group product g ⊙ h: the translation of `h` is rotated by the
    /// transpose rotation before being added, and angles add.
    pub fn product(&self, h: &GroupElement) -> GroupElement {
        let (st, ct) = self.theta.sin_cos();
        GroupElement::new(
            h.x * ct + h.y * st + self.x,
            -h.x * st + h.y * ct + self.y,
            self.theta + h.theta,
        )
    }

    /// The group inverse, satisfying g ⊙ g⁻¹ = g⁻¹ ⊙ g = e.
    pub fn inverse(&self) -> GroupElement {
        let (st, ct) = self.theta.sin_cos();
        GroupElement::new(
            -self.x * ct + self.y * st,
            -self.x * st - self.y * ct,
            -self.theta,
        )
    }

    /// g ⊙ (0, 0, π): same position, orientation advanced by π.
    pub fn antipode(&self) -> GroupElement {
        self.product(&GroupElement::new(0.0, 0.0, PI))
    }

    /// Quotient map to the projective line bundle (θ mod π).
    pub fn project(&self) -> ProjectivePoint {
        ProjectivePoint::new(self.x, self.y, self.theta)
    }

    /// Left-invariant frame at this element, as Cartesian (∂x, ∂y, ∂θ)
    /// direction triples (A₁, A₂, A₃).
    pub fn frame(&self) -> [[f64; 3]; 3] {
        frame_at(self.theta)
    }
}

/// An element (x, y, θ) of the projective line bundle, θ ∈ [0, π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectivePoint {
    pub x: f64,
    pub y: f64,
    theta: f64,
}

impl ProjectivePoint {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta, PI),
        }
    }

    /// Orientation angle, always in [0, π).
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// The lift with θ taken as-is in [0, π).
    pub fn lift(&self) -> GroupElement {
        GroupElement::new(self.x, self.y, self.theta)
    }

    /// The antipodal lift with θ + π.
    pub fn lift_flipped(&self) -> GroupElement {
        GroupElement::new(self.x, self.y, self.theta + PI)
    }
}

/// Left-invariant frame at orientation θ: A₁ = (cos θ, sin θ, 0),
/// A₂ = (0, 0, 1), A₃ = (−sin θ, cos θ, 0) in Cartesian (∂x, ∂y, ∂θ)
/// components.
pub fn frame_at(theta: f64) -> [[f64; 3]; 3] {
    let (st, ct) = theta.sin_cos();
    [[ct, st, 0.0], [0.0, 0.0, 1.0], [-st, ct, 0.0]]
}

/// A tangent vector stored as coefficients in the left-invariant frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent {
    /// Forward (spatial) coefficient along A₁.
    pub a1: f64,
    /// Angular coefficient along A₂.
    pub a2: f64,
    /// Lateral coefficient along A₃ (zero inside the distribution Δ).
    pub a3: f64,
}

impl Tangent {
    pub const ZERO: Tangent = Tangent {
        a1: 0.0,
        a2: 0.0,
        a3: 0.0,
    };

    pub fn new(a1: f64, a2: f64, a3: f64) -> Self {
        Self { a1, a2, a3 }
    }

    /// Cartesian components (ẋ, ẏ, θ̇) at base orientation θ.
    pub fn to_cartesian(&self, theta: f64) -> (f64, f64, f64) {
        let (st, ct) = theta.sin_cos();
        (
            self.a1 * ct - self.a3 * st,
            self.a1 * st + self.a3 * ct,
            self.a2,
        )
    }

    /// Frame coefficients of the Cartesian velocity (ẋ, ẏ, θ̇) at base
    /// orientation θ.
    pub fn from_cartesian(theta: f64, xdot: f64, ydot: f64, thetadot: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        Self {
            a1: xdot * ct + ydot * st,
            a2: thetadot,
            a3: -xdot * st + ydot * ct,
        }
    }
}

/// Parameters of the (ε-relaxed) sub-Riemannian metric: spatial anisotropy
/// ξ > 0, relaxation ε ≥ 0 (0 means strictly sub-Riemannian), and the
/// positive cost field C.
#[derive(Debug, Clone, Copy)]
pub struct MetricParams<'a> {
    xi: f64,
    eps: f64,
    cost: &'a ScalarField3,
}

impl<'a> MetricParams<'a> {
    pub fn new(xi: f64, eps: f64, cost: &'a ScalarField3) -> Result<Self> {
        if !(xi > 0.0) {
            return Err(Error::InvalidArgument(format!("xi must be > 0, got {xi}")));
        }
        if !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps must be >= 0, got {eps}"
            )));
        }
        if cost.kind() != crate::fields::FieldKind::Cost {
            return Err(Error::InvalidArgument(
                "metric cost field must have kind = cost".into(),
            ));
        }
        Ok(Self { xi, eps, cost })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cost(&self) -> &'a ScalarField3 {
        self.cost
    }

    /// Cost sample at a point (θ wraps with the field's period).
    pub fn cost_at(&self, x: f64, y: f64, theta: f64) -> Result<f64> {
        self.cost.sample(x, y, theta)
    }

    /// Squared metric length of a tangent vector at base point q:
    /// C²(q) (ξ² a1² + a2²) plus the lateral penalty (ξ²/ε²) a3² when ε > 0.
    ///
    /// With ε = 0 the vector must lie in the distribution (a3 = 0).
    pub fn eval(&self, q: &GroupElement, v: &Tangent) -> Result<f64> {
        let c = self.cost_at(q.x, q.y, q.theta())?;
        let c2 = c * c;
        let planar = self.xi * self.xi * v.a1 * v.a1 + v.a2 * v.a2;
        if self.eps == 0.0 {
            if v.a3 != 0.0 {
                return Err(Error::OutsideDistribution { a3: v.a3 });
            }
            Ok(c2 * planar)
        } else {
            let lateral = (self.xi * self.xi) / (self.eps * self.eps) * v.a3 * v.a3;
            Ok(c2 * (planar + lateral))
        }
    }

    /// Intrinsic (ascent) gradient from frame derivatives
    /// dW = (A₁W, A₂W, A₃W): the inverse metric applied to dW. The lateral
    /// coefficient is ε² A₃W / (ξ² C²), hence 0 in the strict case ε = 0.
    pub fn sr_gradient(&self, q: &GroupElement, dw: (f64, f64, f64)) -> Result<Tangent> {
        let c = self.cost_at(q.x, q.y, q.theta())?;
        let c2 = c * c;
        let xi2 = self.xi * self.xi;
        Ok(Tangent {
            a1: dw.0 / (xi2 * c2),
            a2: dw.1 / c2,
            a3: self.eps * self.eps * dw.2 / (xi2 * c2),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FieldKind, GridSpec, ScalarField3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_element(rng: &mut ChaCha8Rng) -> GroupElement {
        GroupElement::new(
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-10.0..10.0),
        )
    }

    fn assert_close(a: f64, b: f64, tol: f64, msg: &str) {
        assert!((a - b).abs() <= tol, "{msg}: {a} vs {b}");
    }

    fn assert_elements_close(a: &GroupElement, b: &GroupElement, tol: f64, msg: &str) {
        assert_close(a.x, b.x, tol, msg);
        assert_close(a.y, b.y, tol, msg);
        // compare angles on the circle
        let d = (a.theta() - b.theta()).rem_euclid(2.0 * PI);
        let d = d.min(2.0 * PI - d);
        assert!(d <= tol, "{msg}: theta {} vs {}", a.theta(), b.theta());
    }

    fn unit_cost() -> ScalarField3 {
        let spec = GridSpec::new(3, 3, 4, -10.0, 10.0, -10.0, 10.0, 2.0 * PI).unwrap();
        ScalarField3::constant(spec, FieldKind::Cost, 1.0).unwrap()
    }

    #[test]
    fn product_with_identity() {
        let g = GroupElement::new(3.0, -2.0, 1.2);
        let e = GroupElement::IDENTITY;
        assert_eq!(g.product(&e), g);
        assert_eq!(e.product(&g), g);
    }

    #[test]
    fn product_quarter_turn() {
        // (0, 0, π/2) ⊙ (1, 0, 0) = (0, −1, π/2), evaluated by hand from the
        // transpose-rotation product convention.
        let g = GroupElement::new(0.0, 0.0, PI / 2.0);
        let h = GroupElement::new(1.0, 0.0, 0.0);
        let gh = g.product(&h);
        assert_close(gh.x, 0.0, 1e-15, "x");
        assert_close(gh.y, -1.0, 1e-15, "y");
        assert_close(gh.theta(), PI / 2.0, 1e-15, "theta");
    }

    #[test]
    fn product_associative_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (g, h, k) = (
                random_element(&mut rng),
                random_element(&mut rng),
                random_element(&mut rng),
            );
            let a = g.product(&h).product(&k);
            let b = g.product(&h.product(&k));
            assert_elements_close(&a, &b, 1e-12, "associativity");
        }
    }

    #[test]
    fn inverse_of_identity_and_rotation() {
        let e = GroupElement::IDENTITY;
        assert_eq!(e.inverse(), e);
        let r = GroupElement::new(0.0, 0.0, 1.0);
        let ri = r.inverse();
        assert_close(ri.x, 0.0, 1e-15, "x");
        assert_close(ri.y, 0.0, 1e-15, "y");
        assert_close(ri.theta(), 2.0 * PI - 1.0, 1e-12, "theta");
    }

    #[test]
    fn inverse_on_random_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let g = random_element(&mut rng);
            let gi = g.inverse();
            assert_elements_close(&g.product(&gi), &GroupElement::IDENTITY, 1e-12, "g g^-1");
            assert_elements_close(&gi.product(&g), &GroupElement::IDENTITY, 1e-12, "g^-1 g");
        }
    }

    #[test]
    fn antipode_basics() {
        let a = GroupElement::IDENTITY.antipode();
        assert_eq!(a, GroupElement::new(0.0, 0.0, PI));

        // involution up to θ-normalization
        let g = GroupElement::new(1.0, 2.0, 0.3);
        assert_elements_close(&g.antipode().antipode(), &g, 1e-12, "antipode^2");

        // the translation part of (0,0,π) is zero, so position is unchanged
        let h = GroupElement::new(1.0, 0.0, 0.0).antipode();
        assert_close(h.x, 1.0, 1e-15, "x");
        assert_close(h.y, 0.0, 1e-15, "y");
        assert_close(h.theta(), PI, 1e-15, "theta");
    }

    #[test]
    fn projection_folds_theta() {
        let p = GroupElement::new(1.0, 1.0, PI + 0.2).project();
        assert_close(p.theta(), 0.2, 1e-12, "theta mod pi");
        let q = GroupElement::new(0.0, 0.0, PI).project();
        assert_close(q.theta(), 0.0, 1e-15, "pi folds to 0");
    }

    #[test]
    fn projection_is_antipode_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let g = random_element(&mut rng);
            let p = g.project();
            let q = g.antipode().project();
            assert_close(p.x, q.x, 1e-12, "x");
            assert_close(p.y, q.y, 1e-12, "y");
            let d = (p.theta() - q.theta()).rem_euclid(PI);
            let d = d.min(PI - d);
            assert!(d <= 1e-12, "projective theta {} vs {}", p.theta(), q.theta());
        }
    }

    #[test]
    fn frame_components() {
        let f0 = frame_at(0.0);
        assert_eq!(f0[0], [1.0, 0.0, 0.0]);
        assert_eq!(f0[1], [0.0, 0.0, 1.0]);
        assert_eq!(f0[2], [0.0, 1.0, 0.0]);

        let f90 = frame_at(PI / 2.0);
        assert_close(f90[0][0], 0.0, 1e-15, "A1 x");
        assert_close(f90[0][1], 1.0, 1e-15, "A1 y");
        assert_close(f90[2][0], -1.0, 1e-15, "A3 x");
        assert_close(f90[2][1], 0.0, 1e-15, "A3 y");
    }

    #[test]
    fn frame_orthonormal_at_random_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let t: f64 = rng.gen_range(0.0..2.0 * PI);
            let f = frame_at(t);
            let dot = f[0][0] * f[2][0] + f[0][1] * f[2][1];
            assert!(dot.abs() < 1e-15, "A1 . A3 = {dot}");
            for row in f {
                let n = (row[0] * row[0] + row[1] * row[1] + row[2] * row[2]).sqrt();
                assert_close(n, 1.0, 1e-15, "unit frame vector");
            }
        }
    }

    #[test]
    fn tangent_cartesian_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let theta = rng.gen_range(0.0..2.0 * PI);
            let v = Tangent::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            let (xd, yd, td) = v.to_cartesian(theta);
            let w = Tangent::from_cartesian(theta, xd, yd, td);
            assert_close(v.a1, w.a1, 1e-12, "a1");
            assert_close(v.a2, w.a2, 1e-12, "a2");
            assert_close(v.a3, w.a3, 1e-12, "a3");
        }
    }

    #[test]
    fn metric_eval_zero_and_unit() {
        let cost = unit_cost();
        let m = MetricParams::new(1.0, 0.1, &cost).unwrap();
        let q = GroupElement::IDENTITY;
        assert_eq!(m.eval(&q, &Tangent::ZERO).unwrap(), 0.0);
        assert_close(
            m.eval(&q, &Tangent::new(1.0, 0.0, 0.0)).unwrap(),
            1.0,
            1e-15,
            "unit horizontal",
        );
    }

    #[test]
    fn metric_eval_direct_formula() {
        // C ≡ 2, ξ = 0.5, v = (2, 3, 0) → 4 · (0.25·4 + 9) = 40
        let spec = GridSpec::new(3, 3, 4, -10.0, 10.0, -10.0, 10.0, 2.0 * PI).unwrap();
        let cost = ScalarField3::constant(spec, FieldKind::Cost, 2.0).unwrap();
        let m = MetricParams::new(0.5, 0.0, &cost).unwrap();
        let v = Tangent::new(2.0, 3.0, 0.0);
        assert_close(
            m.eval(&GroupElement::IDENTITY, &v).unwrap(),
            40.0,
            1e-12,
            "G eval",
        );
    }

    #[test]
    fn metric_eval_rejects_lateral_in_strict_mode() {
        let cost = unit_cost();
        let m = MetricParams::new(1.0, 0.0, &cost).unwrap();
        let v = Tangent::new(0.0, 0.0, 1.0);
        match m.eval(&GroupElement::IDENTITY, &v) {
            Err(Error::OutsideDistribution { a3 }) => assert_eq!(a3, 1.0),
            other => panic!("expected OutsideDistribution, got {other:?}"),
        }
    }

    #[test]
    fn gradient_zero_and_projection() {
        let cost = unit_cost();
        let m = MetricParams::new(1.0, 0.0, &cost).unwrap();
        let q = GroupElement::IDENTITY;
        let z = m.sr_gradient(&q, (0.0, 0.0, 0.0)).unwrap();
        assert_eq!(z, Tangent::ZERO);
        let g = m.sr_gradient(&q, (1.0, 1.0, 5.0)).unwrap();
        assert_eq!(g, Tangent::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn gradient_norm_identity_on_random_inputs() {
        // G(G⁻¹dW, G⁻¹dW) = (A₁W)²/(ξ²C²) + (A₂W)²/C² + ε²(A₃W)²/(ξ²C²)
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let c: f64 = rng.gen_range(0.2..3.0);
            let xi: f64 = rng.gen_range(0.1..2.0);
            let eps: f64 = if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(0.01..0.5)
            };
            let spec = GridSpec::new(3, 3, 4, -10.0, 10.0, -10.0, 10.0, 2.0 * PI).unwrap();
            let cost = ScalarField3::constant(spec, FieldKind::Cost, c).unwrap();
            let m = MetricParams::new(xi, eps, &cost).unwrap();
            let q = GroupElement::IDENTITY;
            let dw = (
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let grad = m.sr_gradient(&q, dw).unwrap();
            let got = m.eval(&q, &grad).unwrap();
            let c2 = c * c;
            let xi2 = xi * xi;
            let expected =
                dw.0 * dw.0 / (xi2 * c2) + dw.1 * dw.1 / c2 + eps * eps * dw.2 * dw.2 / (xi2 * c2);
            assert_close(got, expected, 1e-12 * (1.0 + expected.abs()), "norm identity");
        }
    }

    #[test]
    fn angle_normalization_wraps_near_period() {
        assert_eq!(normalize_angle(2.0 * PI - 1e-13, 2.0 * PI), 0.0);
        assert_eq!(normalize_angle(-1e-13, 2.0 * PI), 0.0);
        assert_close(normalize_angle(3.0 * PI, 2.0 * PI), PI, 1e-15, "3pi");
    }
}
