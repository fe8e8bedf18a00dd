//! Integer moment ladders for exponential functionals.
//!
//! For a negative subordinator `H` with exponent `phi` (so `phi(s) < 0` for
//! `s > 0`) the exponential functional satisfies the recursion
//! `E[I_H^m] = m E[I_H^{m-1}] / (-phi(m))`, hence
//! `E[I_H^m] = Gamma(m+1) / prod_{k=1}^m (-phi(k))`.
//!
//! For the spectrally positive auxiliary process `Y` the negative moments
//! follow the dual ladder
//! `E[I_Y^{-m}] = E[-Y_1] prod_{k=1}^{m-1} psi_plus(-k) / Gamma(m)`.

use crate::error::{Error, Result};
use crate::levy::{LadderExponent, LadderPair, LevyModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Table of `(order, value)` rows with a kind tag, serializable to CSV and
/// JSON sidecars.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentTable {
    pub kind: String,
    pub family: String,
    pub rows: Vec<(u32, f64)>,
}

impl MomentTable {
    pub fn value(&self, order: u32) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == order).map(|r| r.1)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("order,value\n");
        for (m, v) in &self.rows {
            s.push_str(&format!("{m},{}\n", crate::render_f64(*v)));
        }
        s
    }

    /// Moment sequences of positive random variables are log-convex
    /// (Lyapunov); returns the worst signed violation of
    /// `v_{m-1} v_{m+1} >= v_m^2` in relative terms (<= 0 when clean).
    pub fn worst_log_convexity_violation(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for w in self.rows.windows(3) {
            let (a, b, c) = (w[0].1, w[1].1, w[2].1);
            if a > 0.0 && b > 0.0 && c > 0.0 {
                worst = worst.max((b.ln() * 2.0 - a.ln() - c.ln()) / b.ln().abs().max(1.0));
            }
        }
        worst
    }
}

/// `E[I_H^m]` for `m = 0..=m_max` where `H` is the negative of the
/// subordinator with exponent `desc.phi`.
pub fn moments_h(desc: &LadderExponent, m_max: u32, family: &str) -> Result<MomentTable> {
    let mut rows = Vec::with_capacity(m_max as usize + 1);
    rows.push((0, 1.0));
    // log-space product against overflow at large m
    let mut log_val = 0.0f64;
    for m in 1..=m_max {
        let neg_phi = -desc.phi_real(m as f64);
        if !(neg_phi > 0.0) {
            return Err(Error::MomentPrecondition(format!(
                "-phi({m}) = {neg_phi} must be positive for the moment ladder"
            )));
        }
        log_val += (m as f64).ln() - neg_phi.ln();
        rows.push((m, log_val.exp()));
    }
    Ok(MomentTable {
        kind: "moments_h".into(),
        family: family.into(),
        rows,
    })
}

/// `E[I_Y^{-m}]` for `m = 1..=m_max` from the ascending ladder data.
pub fn neg_moments_y(pair: &LadderPair, m_max: u32, family: &str) -> Result<MomentTable> {
    if m_max < 1 {
        return Err(Error::InvalidParameter("m_max must be >= 1".into()));
    }
    let k_plus = pair.k_plus();
    if !(k_plus > 0.0) {
        return Err(Error::MomentPrecondition(
            "neg_moments_y requires a killed ascending ladder (k_plus > 0)".into(),
        ));
    }
    let mut rows = Vec::with_capacity(m_max as usize);
    let mut log_val = k_plus.ln();
    rows.push((1, k_plus));
    for m in 2..=m_max {
        let k = (m - 1) as f64;
        let psi = pair.psi_plus_neg(k);
        if !(psi > 0.0) {
            return Err(Error::MomentPrecondition(format!(
                "psi_plus(-{k}) = {psi} must be positive"
            )));
        }
        // E[I^{-m}] = E[I^{-(m-1)}] psi_plus(-(m-1)) / (m-1)
        log_val += psi.ln() - k.ln();
        rows.push((m, log_val.exp()));
    }
    Ok(MomentTable {
        kind: "neg_moments_y".into(),
        family: family.into(),
        rows,
    })
}

/// `E[1/I_xi] = -E[xi_1] = k_plus * lim_{s->0} -phi_minus(s)/s`, evaluated
/// with a Richardson-extrapolated difference quotient at `h = 1e-6`.
pub fn neg_first_moment(model: &LevyModel) -> f64 {
    let phi = |s: f64| model.pair.descending.phi_real(s);
    let h = 1e-6;
    let d1 = (phi(h) - phi(-h)) / (2.0 * h);
    let d2 = (phi(h / 2.0) - phi(-h / 2.0)) / h;
    let deriv = (4.0 * d2 - d1) / 3.0;
    model.pair.k_plus() * (-deriv)
}

/// Residuals `|M(z+1) + z/Psi(z) M(z)|` of the Mellin functional equation
/// on a grid inside the strip of finiteness.
pub fn mellin_recursion_residual<M>(mellin: &M, model: &LevyModel, zs: &[f64]) -> Result<Vec<f64>>
where
    M: Fn(f64) -> Result<f64>,
{
    let mut out = Vec::with_capacity(zs.len());
    for &z in zs {
        if z <= 0.0 {
            return Err(Error::StripViolation(format!(
                "recursion grid point z = {z} outside (0, theta*)"
            )));
        }
        let psi = model.psi_real(z);
        if psi == 0.0 {
            return Err(Error::StripViolation(format!("Psi({z}) = 0 on the grid")));
        }
        let r = mellin(z + 1.0)? + z / psi * mellin(z)?;
        out.push(r.abs());
    }
    Ok(out)
}

/// Monte Carlo estimate of the Mellin transform `E[I^{z-1}]` from a sample
/// pool, with a bootstrap standard error (`n_boot` resamples, deterministic
/// in `seed`).
pub fn mc_mellin(pool: &[f64], z: f64, n_boot: u32, seed: u64) -> Result<(f64, f64)> {
    if pool.is_empty() {
        return Err(Error::InvalidParameter("empty sample pool".into()));
    }
    let n = pool.len();
    let powered: Vec<f64> = pool.iter().map(|&x| x.powf(z - 1.0)).collect();
    if powered.iter().any(|v| !v.is_finite()) {
        return Err(Error::MomentPrecondition(format!(
            "x^(z-1) overflowed in the pool at z = {z}"
        )));
    }
    let mean = powered.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut boots = Vec::with_capacity(n_boot as usize);
    for _ in 0..n_boot {
        let mut s = 0.0;
        for _ in 0..n {
            s += powered[rng.gen_range(0..n)];
        }
        boots.push(s / n as f64);
    }
    let bm = boots.iter().sum::<f64>() / boots.len() as f64;
    let var = boots.iter().map(|b| (b - bm) * (b - bm)).sum::<f64>() / (boots.len() - 1) as f64;
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{
        eqdpa_descending, FamilyParams, LevyModel, StableLadderVariant,
    };
    use crate::special::{gamma, log_gamma};
    use proptest::prelude::*;

    fn g(x: f64) -> f64 {
        gamma(x).unwrap()
    }

    #[test]
    fn moments_h_eqdpa_is_gamma_alpha_m() {
        // E[I^m] = Gamma(alpha m + 1)
        for &alpha in &[0.5, 0.25] {
            let d = eqdpa_descending(alpha);
            let t = moments_h(&d, 12, "eqdpa").unwrap();
            for m in 0..=12u32 {
                let expect = g(alpha * m as f64 + 1.0);
                let got = t.value(m).unwrap();
                assert!(
                    (got - expect).abs() < 1e-11 * expect,
                    "alpha={alpha} m={m}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn moments_h_brownian_unit_drift() {
        // descending pure drift: -phi(k) = k, E[I^m] = Gamma(m+1)/m! = 1
        let m = LevyModel::new(FamilyParams::BrownianDrift { gamma: 1.0 }).unwrap();
        let t = moments_h(&m.pair.descending, 8, "bm").unwrap();
        for m in 0..=8u32 {
            assert!((t.value(m).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_h_stable_ladder_closed_form() {
        // E[I^m] = Gamma(m+2) Gamma(alpha+1) / (alpha^m Gamma(alpha(m+1)+1)),
        // the moment sequence of the size-biased inverse-alpha power of a
        // positive stable variable scaled by 1/alpha
        let alpha = 0.5;
        let d = crate::levy::stable_descending(alpha);
        let t = moments_h(&d, 10, "stable").unwrap();
        for m in 0..=10u32 {
            let mf = m as f64;
            let expect =
                g(mf + 2.0) * g(alpha + 1.0) / (alpha.powf(mf) * g(alpha * (mf + 1.0) + 1.0));
            let got = t.value(m).unwrap();
            assert!(
                (got - expect).abs() < 1e-11 * expect,
                "m={m}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn moments_h_rejects_unkilled_ascending_style_exponent() {
        // phi with a zero at k=2 must be rejected
        let d = LadderExponent {
            drift_delta: 0.0,
            kill: 0.0,
            jumps: crate::levy::LadderJumps::None,
            phi: std::sync::Arc::new(|z| z - 2.0),
            class_p: true,
        };
        // -phi(k) = k - 2: zero/negative at k >= 2
        assert!(moments_h(&d, 5, "bad").is_err());
    }

    #[test]
    fn neg_moments_y_brownian_is_gamma_law() {
        // psi_plus(-s) = s^2 + gamma s -> E[I_Y^{-m}] = Gamma(m+gamma)/Gamma(gamma)
        let gam = 1.7;
        let m = LevyModel::new(FamilyParams::BrownianDrift { gamma: gam }).unwrap();
        let t = neg_moments_y(&m.pair, 10, "bm").unwrap();
        for mm in 1..=10u32 {
            let expect = g(mm as f64 + gam) / g(gam);
            let got = t.value(mm).unwrap();
            assert!(
                (got - expect).abs() < 1e-11 * expect,
                "m={mm}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn neg_moments_y_exp_jumps_reference() {
        // delta=k=c=lambda=1: E[I_Y^{-m}] = C Gamma(m+t1) Gamma(m+t2) / Gamma(m+1),
        // C = Gamma(2)/(Gamma(t1+1) Gamma(t2+1))
        let p = FamilyParams::ExpPositiveJumps {
            delta_plus: 1.0,
            k_plus: 1.0,
            c_minus: 1.0,
            lambda: 1.0,
        };
        let (t1, t2) = crate::levy::find_theta_roots(&p).unwrap();
        let m = LevyModel::new(p).unwrap();
        let t = neg_moments_y(&m.pair, 12, "exp_jumps").unwrap();
        let c = g(2.0) / (g(t1 + 1.0) * g(t2 + 1.0));
        for mm in 1..=12u32 {
            let mf = mm as f64;
            let expect = c * g(mf + t1) * g(mf + t2) / g(mf + 1.0);
            let got = t.value(mm).unwrap();
            assert!(
                (got - expect).abs() < 1e-10 * expect,
                "m={mm}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn neg_moments_y_gamma_ratio_variant() {
        // E[I_Y^{-m}] = Gamma(a'm + 1 - a') / Gamma(1 - a'), the moments of
        // G_{1-a'}^{-a'} at negative order... precisely E[(G_{1-a'}^{a'})^m]
        let ap = 0.25;
        let m = LevyModel::new(FamilyParams::StableLadder {
            alpha: 0.5,
            variant: StableLadderVariant::GammaRatio { alpha_prime: ap },
        })
        .unwrap();
        let t = neg_moments_y(&m.pair, 10, "gamma_ratio").unwrap();
        for mm in 1..=10u32 {
            let expect = g(ap * mm as f64 + 1.0 - ap) / g(1.0 - ap);
            let got = t.value(mm).unwrap();
            assert!(
                (got - expect).abs() < 1e-11 * expect,
                "m={mm}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn neg_first_moment_matches_mean() {
        for model in [
            LevyModel::new(FamilyParams::BrownianDrift { gamma: 1.3 }).unwrap(),
            LevyModel::new(FamilyParams::SpectrallyNegative {
                alpha: 0.5,
                gamma: 1.0,
            })
            .unwrap(),
            LevyModel::new(FamilyParams::StableLadder {
                alpha: 0.5,
                variant: StableLadderVariant::GammaRatio { alpha_prime: 0.25 },
            })
            .unwrap(),
        ] {
            let v = neg_first_moment(&model);
            assert!(
                (v + model.mean).abs() < 1e-7 * model.mean.abs(),
                "{:?}: {v} vs {}",
                model.family,
                -model.mean
            );
        }
    }

    #[test]
    fn mellin_recursion_zero_for_brownian() {
        // M(z) = Gamma(gamma + 1 - z)/Gamma(gamma) solves the recursion
        let gam = 1.0;
        let model = LevyModel::new(FamilyParams::BrownianDrift { gamma: gam }).unwrap();
        let mellin =
            |z: f64| Ok((log_gamma(gam + 1.0 - z).unwrap() - log_gamma(gam).unwrap()).exp());
        let zs: Vec<f64> = (1..=9).map(|i| 0.1 * i as f64).collect();
        let res = mellin_recursion_residual(&mellin, &model, &zs).unwrap();
        for (z, r) in zs.iter().zip(&res) {
            assert!(*r < 1e-12, "z={z}: residual {r}");
        }
    }

    #[test]
    fn mellin_recursion_flags_wrong_candidate() {
        let model = LevyModel::new(FamilyParams::BrownianDrift { gamma: 1.0 }).unwrap();
        let mellin = |z: f64| Ok((log_gamma(2.5 - z).unwrap() - log_gamma(1.5).unwrap()).exp());
        let res = mellin_recursion_residual(&mellin, &model, &[0.5]).unwrap();
        assert!(res[0] > 1e-2);
    }

    #[test]
    fn mellin_recursion_rejects_bad_grid() {
        let model = LevyModel::new(FamilyParams::BrownianDrift { gamma: 1.0 }).unwrap();
        let mellin = |_z: f64| Ok(1.0);
        assert!(mellin_recursion_residual(&mellin, &model, &[-0.5]).is_err());
        // Psi(gamma) = 0
        assert!(mellin_recursion_residual(&mellin, &model, &[1.0]).is_err());
    }

    #[test]
    fn mc_mellin_deterministic_and_sane() {
        let pool: Vec<f64> = (1..=2000).map(|i| 0.5 + (i as f64) / 1000.0).collect();
        let (m1, se1) = mc_mellin(&pool, 2.0, 200, 42).unwrap();
        let (m2, se2) = mc_mellin(&pool, 2.0, 200, 42).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(se1, se2);
        let exact = pool.iter().sum::<f64>() / pool.len() as f64;
        assert_eq!(m1, exact);
        assert!(se1 > 0.0 && se1 < 0.05);
    }

    #[test]
    fn log_convexity_diagnostic() {
        let t = moments_h(&eqdpa_descending(0.5), 15, "eqdpa").unwrap();
        assert!(t.worst_log_convexity_violation() <= 1e-12);
        let bad = MomentTable {
            kind: "x".into(),
            family: "x".into(),
            rows: vec![(0, 1.0), (1, 10.0), (2, 11.0)],
        };
        assert!(bad.worst_log_convexity_violation() > 0.0);
    }

    #[test]
    fn csv_roundtrip_format() {
        let t = MomentTable {
            kind: "m".into(),
            family: "f".into(),
            rows: vec![(0, 1.0), (1, 0.5)],
        };
        let csv = t.to_csv();
        assert!(csv.starts_with("order,value\n0,"));
        assert_eq!(csv.lines().count(), 3);
    }

    proptest! {
        // ladder recursion invariant: E[I^m] * (-phi(m)) = m * E[I^{m-1}]
        #[test]
        fn moments_h_recursion_invariant(alpha in 0.1f64..0.9) {
            let d = eqdpa_descending(alpha);
            let t = moments_h(&d, 10, "eqdpa").unwrap();
            for m in 1..=10u32 {
                let lhs = t.value(m).unwrap() * (-d.phi_real(m as f64));
                let rhs = m as f64 * t.value(m - 1).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-10 * rhs.abs());
            }
        }
    }
}
