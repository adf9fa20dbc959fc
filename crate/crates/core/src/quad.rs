//! Adaptive quadrature on finite and semi-infinite intervals.
//!
//! The workhorse is a 15-point Gauss-Kronrod rule driven by interval
//! bisection. Endpoint power singularities are absorbed by substitution
//! rather than by brute refinement; see [`integrate_power_weighted`].

use crate::error::Error;
use crate::Result;

/// Kronrod abscissae for the 15-point rule (positive half, descending).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

/// Gauss weights embedded in the 15-point rule.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Kronrod weights for the 15-point rule.
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// One 15-point Gauss-Kronrod panel on `[a, b]`. Returns the Kronrod
/// estimate and an error estimate from the Gauss/Kronrod difference.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let f_center = f(center);
    let mut kronrod = f_center * WGK[7];
    let mut gauss = f_center * WG[3];
    let mut res_abs = kronrod.abs();

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let sum = f1 + f2;
        kronrod += WGK[j] * sum;
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }

    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    // Standard QUADPACK rescaling so the estimate is not wildly optimistic
    // on nonsmooth integrands.
    let scale = res_abs * half.abs();
    let err = if scale > 0.0 && err > 0.0 {
        (err.min(scale)).max(err.powf(1.5) / scale.sqrt().max(f64::MIN_POSITIVE))
    } else {
        err
    };
    (value, err)
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Bisects the worst panel until the summed error estimate satisfies
/// `err <= abs_tol + rel_tol * |integral|` or the panel budget runs out.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (sign, lo, hi) = if a < b { (1.0, a, b) } else { (-1.0, b, a) };

    struct Panel {
        a: f64,
        b: f64,
        value: f64,
        err: f64,
    }

    let (v0, e0) = gk15(f, lo, hi);
    if !v0.is_finite() {
        return Err(Error::Quadrature {
            endpoint: format!("[{lo:.3e}, {hi:.3e}]"),
            reason: "non-finite integrand sample".into(),
        });
    }
    let mut panels = vec![Panel {
        a: lo,
        b: hi,
        value: v0,
        err: e0,
    }];

    const MAX_PANELS: usize = 4000;
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        if err <= abs_tol + rel_tol * total.abs() {
            return Ok(sign * total);
        }
        if panels.len() >= MAX_PANELS {
            // Accept if we are merely a little short of the target;
            // otherwise report failure at the worst panel.
            if err <= 1e3 * (abs_tol + rel_tol * total.abs()) {
                return Ok(sign * total);
            }
            let worst = panels
                .iter()
                .max_by(|p, q| p.err.total_cmp(&q.err))
                .expect("nonempty");
            return Err(Error::Quadrature {
                endpoint: format!("[{:.3e}, {:.3e}]", worst.a, worst.b),
                reason: format!("error estimate {err:.3e} above tolerance after {MAX_PANELS} panels"),
            });
        }
        let worst_idx = panels
            .iter()
            .enumerate()
            .max_by(|(_, p), (_, q)| p.err.total_cmp(&q.err))
            .map(|(i, _)| i)
            .expect("nonempty");
        let Panel { a: pa, b: pb, .. } = panels.swap_remove(worst_idx);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            return Err(Error::Quadrature {
                endpoint: format!("[{pa:.3e}, {pb:.3e}]"),
                reason: "panel collapsed to machine width without converging".into(),
            });
        }
        for (qa, qb) in [(pa, mid), (mid, pb)] {
            let (v, e) = gk15(f, qa, qb);
            if !v.is_finite() {
                return Err(Error::Quadrature {
                    endpoint: format!("[{qa:.3e}, {qb:.3e}]"),
                    reason: "non-finite integrand sample".into(),
                });
            }
            panels.push(Panel {
                a: qa,
                b: qb,
                value: v,
                err: e,
            });
        }
    }
}

/// Integral of `f` over `[a, +infinity)` via the rational substitution
/// `x = a + t/(1-t)`, `t in [0, 1)`.
pub fn adaptive_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, rel_tol: f64) -> Result<f64> {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - t;
        let x = a + t / one_minus;
        let jac = 1.0 / (one_minus * one_minus);
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    adaptive(&g, 0.0, 1.0, rel_tol, 0.0)
}

/// Integral of `w(z) * g(z)` over `[0, cut]` where `w(z) = z^(mu-1)` and
/// `g` is smooth. The substitution `z = u^(1/mu)` removes the endpoint
/// singularity exactly:
/// `int_0^c z^(mu-1) g(z) dz = (1/mu) int_0^(c^mu) g(u^(1/mu)) du`.
pub fn integrate_power_weighted<G: Fn(f64) -> f64>(
    g: &G,
    mu: f64,
    cut: f64,
    rel_tol: f64,
) -> Result<f64> {
    assert!(mu > 0.0 && cut > 0.0);
    let inv_mu = 1.0 / mu;
    let transformed = |u: f64| {
        if u <= 0.0 {
            // u^(1/mu) -> 0; g is assumed bounded at 0 after weighting.
            return g(0.0);
        }
        g(u.powf(inv_mu))
    };
    Ok(inv_mu * adaptive(&transformed, 0.0, cut.powf(mu), rel_tol, 0.0)?)
}
