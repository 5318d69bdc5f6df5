//! Complete and incomplete elliptic integrals, Jacobi elliptic functions,
//! and the two-equation system for the critical sphere radius.
//!
//! All evaluations use the arithmetic–geometric mean and the descending
//! Landen transformation, which give uniform accuracy over the whole modulus
//! range without series tuning. The modulus convention is k (not the
//! parameter m = k²).

use std::f64::consts::PI;

use crate::error::{Error, Result};

const AGM_EPS: f64 = 1e-17;
const MAX_AGM_ITER: usize = 40;

/// Arithmetic–geometric mean chain for modulus k: sequences aₙ and
/// cₙ = (aₙ₋₁ − bₙ₋₁)/2 starting from a₀ = 1, b₀ = √(1−k²), c₀ = k.
fn agm_chain(k: f64) -> (Vec<f64>, Vec<f64>) {
    let mut a = 1.0f64;
    let mut b = (1.0 - k * k).sqrt();
    let mut c = k;
    let mut aa = vec![a];
    let mut cc = vec![c];
    for _ in 0..MAX_AGM_ITER {
        if c.abs() <= AGM_EPS * a {
            break;
        }
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        c = 0.5 * (a - b);
        a = an;
        b = bn;
        aa.push(a);
        cc.push(c);
    }
    (aa, cc)
}

/// Complete elliptic integral of the first kind K(k), modulus convention.
pub fn ellip_k(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!("K(k) requires 0 <= k < 1, got {k}")));
    }
    let (aa, _) = agm_chain(k);
    Ok(PI / (2.0 * aa[aa.len() - 1]))
}

/// Complete elliptic integral of the second kind E(k); E(1) = 1.
pub fn ellip_e(k: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::Domain(format!("E(k) requires 0 <= k <= 1, got {k}")));
    }
    if k == 1.0 {
        return Ok(1.0);
    }
    let (aa, cc) = agm_chain(k);
    let mut sum = 0.5 * cc[0] * cc[0];
    let mut pow2 = 1.0;
    for c in cc.iter().skip(1) {
        sum += pow2 * c * c;
        pow2 *= 2.0;
    }
    let big_k = PI / (2.0 * aa[aa.len() - 1]);
    Ok(big_k * (1.0 - sum))
}

/// Simultaneous Jacobi elliptic values at argument u and modulus k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiValues {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
    /// Jacobi amplitude am(u, k), continuous and increasing in u.
    pub am: f64,
}

/// Descending-Landen amplitude chain: returns am(u, k) together with the
/// intermediate angles φₙ and the AGM c-sequence (used for the incomplete
/// integral of the second kind).
fn amplitude_chain(u: f64, k: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let (aa, cc) = agm_chain(k);
    let n = aa.len() - 1;
    let mut phis = vec![0.0; n + 1];
    phis[n] = (1u64 << n) as f64 * aa[n] * u;
    for i in (1..=n).rev() {
        let s = (cc[i] / aa[i] * phis[i].sin()).clamp(-1.0, 1.0);
        phis[i - 1] = 0.5 * (phis[i] + s.asin());
    }
    (phis[0], phis, cc)
}

/// Jacobi elliptic functions sn, cn, dn and the amplitude am for 0 ≤ k < 1.
///
/// dn is recovered from the identity dn² = 1 − k² sn², which is exact for
/// real arguments where dn ≥ √(1−k²) > 0.
pub fn jacobi(u: f64, k: f64) -> Result<JacobiValues> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!(
            "jacobi(u, k) requires 0 <= k < 1, got {k}"
        )));
    }
    let (am, _, _) = amplitude_chain(u, k);
    let sn = am.sin();
    let cn = am.cos();
    let dn = (1.0 - k * k * sn * sn).sqrt();
    Ok(JacobiValues { sn, cn, dn, am })
}

/// Incomplete elliptic integral of the second kind in Jacobi form,
/// E(u, k) = E(am(u, k), k), evaluated along the Landen chain:
/// E = u·(1 − Σ 2ⁿ⁻¹cₙ²) + Σₙ≥₁ cₙ sin φₙ.
pub fn ellip_e_incomplete(u: f64, k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!(
            "E(u, k) requires 0 <= k < 1, got {k}"
        )));
    }
    let (_, phis, cc) = amplitude_chain(u, k);
    let mut s = 0.5 * cc[0] * cc[0];
    let mut pow2 = 1.0;
    let mut corr = 0.0;
    for i in 1..cc.len() {
        s += pow2 * cc[i] * cc[i];
        pow2 *= 2.0;
        corr += cc[i] * phis[i].sin();
    }
    Ok(u * (1.0 - s) + corr)
}

/// First positive root of cn(p,k)·(E(p,k) − p) − dn(p,k)·sn(p,k) = 0.
///
/// The defining function vanishes at p = 0 and is negative just above it;
/// the root is bracketed by scanning in steps of K(k)/64 up to 4K(k) and
/// then bisected to 1e−12.
pub fn p1(k: f64) -> Result<f64> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::Domain(format!("p1(k) requires 0 < k < 1, got {k}")));
    }
    let big_k = ellip_k(k)?;
    let f = |p: f64| -> f64 {
        let jv = jacobi(p, k).expect("modulus validated");
        let e = ellip_e_incomplete(p, k).expect("modulus validated");
        jv.cn * (e - p) - jv.dn * jv.sn
    };
    let step = big_k / 64.0;
    let mut p_lo = step;
    let mut f_lo = f(p_lo);
    let mut p = p_lo + step;
    while p <= 4.0 * big_k + 0.5 * step {
        let f_hi = f(p);
        if f_lo == 0.0 {
            return Ok(p_lo);
        }
        if f_lo.signum() != f_hi.signum() {
            let mut lo = p_lo;
            let mut hi = p;
            let mut flo = f_lo;
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 {
                    return Ok(mid);
                }
                if flo.signum() != fm.signum() {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        p_lo = p;
        f_lo = f_hi;
        p += step;
    }
    Err(Error::RootNotBracketed(format!(
        "no sign change of the p1 defining function in (0, 4K] for k = {k}"
    )))
}

/// Solution of the two-equation critical-radius system.
#[derive(Debug, Clone, Copy)]
pub struct RtildeSolution {
    pub k1: f64,
    pub k2: f64,
    pub p1_of_k2: f64,
    /// Critical radius (in units of sub-Riemannian length); equals 2·K(k1).
    pub rtilde: f64,
    /// Residual of the first equation, K(k1) − k2·p1(k2).
    pub residual1: f64,
    /// Residual of the second equation.
    pub residual2: f64,
}

/// Inverts K(k1) = t by bisection; K is strictly increasing on [0, 1).
fn invert_k(t: f64) -> Result<f64> {
    if t < PI / 2.0 {
        return Err(Error::Domain(format!(
            "K(k) >= pi/2 for all k, cannot invert at {t}"
        )));
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0 - 1e-15;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ellip_k(mid)? < t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Residual of the second equation at trial k2, with k1 eliminated through
/// the first equation. `None` when k2·p1(k2) is below the range of K.
fn system_residual(k2: f64) -> Result<Option<f64>> {
    let p = p1(k2)?;
    let t = k2 * p;
    if t <= PI / 2.0 + 1e-9 {
        return Ok(None);
    }
    let k1 = invert_k(t)?;
    let lhs = (ellip_k(k1)? - ellip_e(k1)?) / (k1 * (1.0 - k2 * k2).sqrt());
    let jv = jacobi(p, k2)?;
    let rhs = (p - ellip_e_incomplete(p, k2)?) / jv.dn;
    Ok(Some(lhs - rhs))
}

/// Solves the critical-radius system: the equation pair
/// R̃/2 = K(k1) = k2·p1(k2) and
/// (K(k1) − E(k1)) / (k1·√(1−k2²)) = (p1(k2) − E(p1(k2), k2)) / dn(p1(k2), k2)
/// by a bracketed scan in k2 with bisection, giving R̃ ≈ 1.11545·π.
pub fn solve_rtilde() -> Result<RtildeSolution> {
    solve_rtilde_with_scan(97)
}

/// Same as [`solve_rtilde`] with an explicit number of scan points; the
/// result is independent of the granularity once a bracket is found.
pub fn solve_rtilde_with_scan(scan_points: usize) -> Result<RtildeSolution> {
    let mut table = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    for i in 1..=scan_points {
        let k2 = i as f64 / (scan_points + 1) as f64;
        let r = match system_residual(k2) {
            Ok(Some(r)) => r,
            Ok(None) => continue,
            Err(_) => continue,
        };
        table.push((k2, r));
        if let Some((k_prev, r_prev)) = prev {
            if r_prev.signum() != r.signum() {
                bracket = Some((k_prev, k2, r_prev));
                break;
            }
        }
        prev = Some((k2, r));
    }
    let (mut lo, mut hi, mut f_lo) = bracket.ok_or(Error::BracketingFailed { table })?;
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        let fm = match system_residual(mid)? {
            Some(r) => r,
            None => {
                // the undefined region lies below the bracket; tighten from the left
                lo = mid;
                continue;
            }
        };
        if f_lo.signum() != fm.signum() {
            hi = mid;
        } else {
            lo = mid;
            f_lo = fm;
        }
    }
    let k2 = 0.5 * (lo + hi);
    let p = p1(k2)?;
    let k1 = invert_k(k2 * p)?;
    let rtilde = 2.0 * ellip_k(k1)?;
    let residual1 = ellip_k(k1)? - k2 * p;
    let residual2 = system_residual(k2)?.unwrap_or(f64::NAN);
    Ok(RtildeSolution {
        k1,
        k2,
        p1_of_k2: p,
        rtilde,
        residual1,
        residual2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Reference values computed with 40-digit arbitrary-precision arithmetic.
    const K_08: f64 = 1.9953027776647293877;
    const E_08: f64 = 1.2763499431699064233;
    const K_05: f64 = 1.6857503548125960429;
    const E_05: f64 = 1.4674622093394271555;
    const SN_13_06: f64 = 0.93415941025948358774;
    const CN_13_06: f64 = 0.35685598807313550455;
    const DN_13_06: f64 = 0.82815737069745106424;
    const AM_13_06: f64 = 1.2058962114431399428;
    const EINC_09_07: f64 = 0.80433611373219517075;
    const EINC_17_085: f64 = 1.1096802595457772537;
    const P1_03: f64 = 3.0706086739522962562;
    const P1_06: f64 = 2.8913543954494987919;
    const P1_08: f64 = 2.8365183289723317678;
    const P1_09: f64 = 2.9415299158573609142;
    const RT_K1: f64 = 0.6017983080502665929;
    const RT_K2: f64 = 0.6068285952349742310;
    const RT_OVER_PI: f64 = 1.1154547311185974901;

    #[test]
    fn complete_integrals_at_zero() {
        assert!((ellip_k(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((ellip_e(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn e_at_one_is_one() {
        assert_eq!(ellip_e(1.0).unwrap(), 1.0);
    }

    #[test]
    fn k_rejects_unit_modulus() {
        assert!(matches!(ellip_k(1.0), Err(Error::Domain(_))));
        assert!(matches!(ellip_k(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn complete_integrals_reference_values() {
        assert!((ellip_k(0.8).unwrap() - K_08).abs() < 1e-12);
        assert!((ellip_e(0.8).unwrap() - E_08).abs() < 1e-12);
        assert!((ellip_k(0.5).unwrap() - K_05).abs() < 1e-12);
        assert!((ellip_e(0.5).unwrap() - E_05).abs() < 1e-12);
    }

    #[test]
    fn k_is_increasing() {
        let mut prev = ellip_k(0.0).unwrap();
        for i in 1..20 {
            let k = i as f64 / 20.0;
            let cur = ellip_k(k).unwrap();
            assert!(cur > prev, "K not increasing at k = {k}");
            prev = cur;
        }
    }

    #[test]
    fn jacobi_trigonometric_degeneration() {
        for &u in &[0.0, 0.3, 1.0, 2.5, -1.2] {
            let jv = jacobi(u, 0.0).unwrap();
            assert!((jv.sn - u.sin()).abs() < 1e-14);
            assert!((jv.cn - u.cos()).abs() < 1e-14);
            assert!((jv.dn - 1.0).abs() < 1e-14);
            assert!((jv.am - u).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobi_quarter_period() {
        for &k in &[0.2, 0.5, 0.8, 0.95] {
            let kk = ellip_k(k).unwrap();
            let jv = jacobi(kk, k).unwrap();
            assert!((jv.sn - 1.0).abs() < 1e-10, "sn(K) at k={k}: {}", jv.sn);
            assert!(jv.cn.abs() < 1e-10, "cn(K) at k={k}: {}", jv.cn);
            assert!(
                (jv.dn - (1.0 - k * k).sqrt()).abs() < 1e-10,
                "dn(K) at k={k}"
            );
            assert!((jv.am - PI / 2.0).abs() < 1e-10, "am(K) at k={k}");
        }
    }

    #[test]
    fn jacobi_reference_point() {
        let jv = jacobi(1.3, 0.6).unwrap();
        assert!((jv.sn - SN_13_06).abs() < 1e-12);
        assert!((jv.cn - CN_13_06).abs() < 1e-12);
        assert!((jv.dn - DN_13_06).abs() < 1e-12);
        assert!((jv.am - AM_13_06).abs() < 1e-12);
    }

    #[test]
    fn jacobi_identities_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let u: f64 = rng.gen_range(-6.0..6.0);
            let k: f64 = rng.gen_range(0.0..0.99);
            let jv = jacobi(u, k).unwrap();
            let id1 = jv.sn * jv.sn + jv.cn * jv.cn - 1.0;
            let id2 = jv.dn * jv.dn + k * k * jv.sn * jv.sn - 1.0;
            assert!(id1.abs() < 1e-12, "sn²+cn² at u={u}, k={k}");
            assert!(id2.abs() < 1e-12, "dn²+k²sn² at u={u}, k={k}");
        }
    }

    #[test]
    fn incomplete_e_basics() {
        for &k in &[0.1, 0.5, 0.9] {
            assert_eq!(ellip_e_incomplete(0.0, k).unwrap(), 0.0);
        }
        // consistency with the complete integral at u = K(k)
        let k = 0.5;
        let kk = ellip_k(k).unwrap();
        assert!((ellip_e_incomplete(kk, k).unwrap() - ellip_e(k).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn incomplete_e_reference_points() {
        assert!((ellip_e_incomplete(0.9, 0.7).unwrap() - EINC_09_07).abs() < 1e-12);
        assert!((ellip_e_incomplete(1.7, 0.85).unwrap() - EINC_17_085).abs() < 1e-12);
    }

    #[test]
    fn incomplete_e_nondecreasing_in_u() {
        for &k in &[0.2, 0.6, 0.9] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=40 {
                let u = i as f64 * 0.15;
                let e = ellip_e_incomplete(u, k).unwrap();
                assert!(e >= prev - 1e-14, "E(u,{k}) decreased at u={u}");
                prev = e;
            }
        }
    }

    #[test]
    fn p1_satisfies_defining_equation() {
        for &k in &[0.3, 0.6, 0.9] {
            let p = p1(k).unwrap();
            let jv = jacobi(p, k).unwrap();
            let e = ellip_e_incomplete(p, k).unwrap();
            let f = jv.cn * (e - p) - jv.dn * jv.sn;
            assert!(f.abs() <= 1e-10, "f(p1({k})) = {f}");
        }
    }

    #[test]
    fn p1_reference_values() {
        assert!((p1(0.3).unwrap() - P1_03).abs() < 1e-9);
        assert!((p1(0.6).unwrap() - P1_06).abs() < 1e-9);
        assert!((p1(0.8).unwrap() - P1_08).abs() < 1e-9);
        assert!((p1(0.9).unwrap() - P1_09).abs() < 1e-9);
    }

    #[test]
    fn p1_between_k_and_2k() {
        let k = 0.8;
        let kk = ellip_k(k).unwrap();
        let p = p1(k).unwrap();
        assert!(p > kk && p < 2.0 * kk, "p1({k}) = {p} not in (K, 2K)");
    }

    #[test]
    fn p1_is_continuous() {
        let a = p1(0.5).unwrap();
        let b = p1(0.5 + 1e-6).unwrap();
        assert!((a - b).abs() <= 1e-3, "p1 jump: {a} vs {b}");
    }

    #[test]
    fn critical_radius_solution() {
        let sol = solve_rtilde().unwrap();
        assert!(
            (sol.rtilde / PI - RT_OVER_PI).abs() < 1e-9,
            "Rtilde/pi = {}",
            sol.rtilde / PI
        );
        assert!((sol.k1 - RT_K1).abs() < 1e-9, "k1 = {}", sol.k1);
        assert!((sol.k2 - RT_K2).abs() < 1e-9, "k2 = {}", sol.k2);
        assert!((sol.p1_of_k2 - 2.8873922687651514).abs() < 1e-9);
        assert!(sol.residual1.abs() <= 1e-10, "res1 = {}", sol.residual1);
        assert!(sol.residual2.abs() <= 1e-10, "res2 = {}", sol.residual2);
    }

    #[test]
    fn critical_radius_scan_independent() {
        let a = solve_rtilde_with_scan(97).unwrap();
        let b = solve_rtilde_with_scan(193).unwrap();
        assert!((a.rtilde - b.rtilde).abs() < 1e-9);
        assert!((a.k2 - b.k2).abs() < 1e-9);
    }
}
