//! Grids, quadrature weights, the cumulative rate integral and the tail
//! scalars that the solver and the asymptotic checks share.

use std::sync::Arc;

use crate::coefficients::CoefficientSet;
use crate::error::Error;
use crate::quad;
use crate::Result;

/// Geometric grid on `(0, L]` with trapezoid quadrature weights.
///
/// Nodes are uniform in `log x`, which resolves the power behavior near
/// zero and the exponential tail with the same point budget. The weights
/// are the trapezoid weights of the graded grid, so they telescope:
/// their sum is exactly `L - x1`.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    ratio: f64,
}

impl Mesh {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn x1(&self) -> f64 {
        self.nodes[0]
    }

    pub fn truncation(&self) -> f64 {
        *self.nodes.last().expect("nonempty mesh")
    }

    pub fn grading_ratio(&self) -> f64 {
        self.ratio
    }

    /// Index of the last node `<= x` (clamped to the ends).
    pub fn index_at(&self, x: f64) -> usize {
        if x <= self.nodes[0] {
            return 0;
        }
        self.nodes.partition_point(|&v| v <= x).saturating_sub(1)
    }

    /// Quadrature of nodal values against the mesh weights.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Weighted inner product `sum_i w_i u_i v_i`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        assert_eq!(u.len(), self.len());
        assert_eq!(v.len(), self.len());
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// Trapezoid weights for integrating over the subrange `[nodes[i0], L]`,
    /// as needed by kernel rows anchored at an interior node.
    pub fn tail_weight(&self, i0: usize, j: usize) -> f64 {
        debug_assert!(j >= i0);
        let n = self.len();
        if i0 + 1 >= n {
            return 0.0;
        }
        if j == i0 {
            0.5 * (self.nodes[i0 + 1] - self.nodes[i0])
        } else if j + 1 == n {
            0.5 * (self.nodes[n - 1] - self.nodes[n - 2])
        } else {
            0.5 * (self.nodes[j + 1] - self.nodes[j - 1])
        }
    }
}

/// Build a geometric mesh of `n` nodes from `x1` to `l`.
pub fn build_mesh(l: f64, n: usize, x1: f64) -> Result<Mesh> {
    if !(x1 > 0.0) {
        return Err(Error::Mesh(format!("first node x1 = {x1} must be positive")));
    }
    if !(x1 < l) {
        return Err(Error::Mesh(format!("need x1 < L, got x1 = {x1}, L = {l}")));
    }
    if n < 2 {
        return Err(Error::Mesh(format!("mesh needs at least two nodes, got {n}")));
    }
    let ratio = (l / x1).powf(1.0 / (n - 1) as f64);
    let mut nodes: Vec<f64> = (0..n).map(|i| x1 * ratio.powi(i as i32)).collect();
    // Pin the last node to L exactly so the truncation size is not subject
    // to powi rounding.
    nodes[n - 1] = l;
    let mut weights = vec![0.0; n];
    weights[0] = 0.5 * (nodes[1] - nodes[0]);
    weights[n - 1] = 0.5 * (nodes[n - 1] - nodes[n - 2]);
    for i in 1..n - 1 {
        weights[i] = 0.5 * (nodes[i + 1] - nodes[i - 1]);
    }
    Ok(Mesh {
        nodes,
        weights,
        ratio,
    })
}

/// Nodal values of a function on a mesh.
///
/// When `prefactored` is set the stored values are `f(x) * exp(+Lambda(x))`
/// instead of `f(x)`, which keeps tail-weighted quantities finite where the
/// bare profile underflows.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    pub prefactored: bool,
}

impl GridFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.len(), "value count must match node count");
        Self {
            mesh,
            values,
            prefactored: false,
        }
    }

    pub fn prefactored(mesh: Arc<Mesh>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.len());
        Self {
            mesh,
            values,
            prefactored: true,
        }
    }

    pub fn integral(&self) -> f64 {
        self.mesh.integrate(&self.values)
    }

    /// Linear interpolation in `log x` between nodes (clamped outside).
    pub fn interp(&self, x: f64) -> f64 {
        let nodes = self.mesh.nodes();
        if x <= nodes[0] {
            return self.values[0];
        }
        if x >= *nodes.last().unwrap() {
            return *self.values.last().unwrap();
        }
        let i = self.mesh.index_at(x);
        let (x0, x1) = (nodes[i], nodes[i + 1]);
        let t = (x / x0).ln() / (x1 / x0).ln();
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }
}

/// Cumulative rate integral `Lambda(x) = int_1^x (lambda + B(y)) / tau(y) dy`
/// split into its `B/tau` part and its `1/tau` part, so updating the
/// eigenvalue during iterations only rescales the second part.
#[derive(Debug, Clone)]
pub struct RateIntegralParts {
    mesh: Arc<Mesh>,
    b_part: Vec<f64>,
    inv_part: Vec<f64>,
    /// Set when the declared exponents make `Lambda(x) -> -infinity` as
    /// `x -> 0`; values at nodes stay finite because `x1 > 0`.
    pub diverges_at_zero: bool,
}

impl RateIntegralParts {
    /// Integrate both parts on every mesh segment, anchored at `x = 1`.
    pub fn compute(c: &CoefficientSet, mesh: &Arc<Mesh>) -> Result<Self> {
        let rel_tol = 1e-12;
        let nodes = mesh.nodes();
        let n = nodes.len();

        let b_over_tau = |y: f64| c.total_frag_rate(y) / c.tau(y);
        let inv_tau = |y: f64| 1.0 / c.tau(y);

        // Prefix integrals from the first node.
        let mut b_prefix = vec![0.0; n];
        let mut inv_prefix = vec![0.0; n];
        for i in 1..n {
            let (a, b) = (nodes[i - 1], nodes[i]);
            b_prefix[i] = b_prefix[i - 1] + quad::adaptive(&b_over_tau, a, b, rel_tol, 0.0)?;
            inv_prefix[i] = inv_prefix[i - 1] + quad::adaptive(&inv_tau, a, b, rel_tol, 0.0)?;
        }

        // Anchor: integral from 1 to the first node (negative when x1 < 1).
        let b_anchor = quad::adaptive(&b_over_tau, 1.0, nodes[0], rel_tol, 0.0)?;
        let inv_anchor = quad::adaptive(&inv_tau, 1.0, nodes[0], rel_tol, 0.0)?;

        let b_part: Vec<f64> = b_prefix.iter().map(|v| v + b_anchor).collect();
        let inv_part: Vec<f64> = inv_prefix.iter().map(|v| v + inv_anchor).collect();

        let e = c.exponents();
        let diverges_at_zero = e.gamma0 - e.alpha0 <= -1.0 || e.alpha0 >= 1.0;

        Ok(Self {
            mesh: Arc::clone(mesh),
            b_part,
            inv_part,
            diverges_at_zero,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// `Lambda(x_i)` for a given eigenvalue.
    pub fn at_node(&self, lambda: f64, i: usize) -> f64 {
        self.b_part[i] + lambda * self.inv_part[i]
    }

    pub fn values(&self, lambda: f64) -> Vec<f64> {
        self.b_part
            .iter()
            .zip(&self.inv_part)
            .map(|(b, inv)| b + lambda * inv)
            .collect()
    }

    /// `Lambda(x)` off the nodes: nearest-node anchor plus an adaptive
    /// correction over the remaining subinterval.
    pub fn eval(&self, c: &CoefficientSet, lambda: f64, x: f64) -> Result<f64> {
        let nodes = self.mesh.nodes();
        let i = self.mesh.index_at(x.clamp(nodes[0], *nodes.last().unwrap()));
        let anchor = self.at_node(lambda, i);
        let f = |y: f64| (lambda + c.total_frag_rate(y)) / c.tau(y);
        Ok(anchor + quad::adaptive(&f, nodes[i], x, 1e-12, 0.0)?)
    }
}

/// Compute `Lambda` at every node for a fixed eigenvalue.
pub fn compute_rate_integral(
    c: &CoefficientSet,
    lambda: f64,
    mesh: &Arc<Mesh>,
) -> Result<(GridFunction, bool)> {
    if lambda < 0.0 {
        return Err(Error::Domain(format!("lambda = {lambda} must be nonnegative")));
    }
    let parts = RateIntegralParts::compute(c, mesh)?;
    let values = parts.values(lambda);
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite())
    {
        return Err(Error::Quadrature {
            endpoint: format!("x = {:.6e}", mesh.nodes()[i]),
            reason: format!("rate integral is not finite at an interior node ({v})"),
        });
    }
    let diverges = parts.diverges_at_zero;
    Ok((GridFunction::new(Arc::clone(mesh), values), diverges))
}

/// Which branch of the tail-exponent table applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum XiCase {
    GammaPositiveNuZero,
    GammaZeroNuZero,
    NuPositive,
    GammaNegativeAboveThreshold,
    /// The table does not define `xi` here; reported, never extrapolated.
    Undefined,
}

/// Tail scalars of the profile estimates.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TailScalars {
    /// Limit of `x^(alpha - gamma_plus) (B(x) + lambda) / tau(x)`.
    pub zeta: f64,
    /// Power-law correction exponent in the tail of the stationary
    /// profile; `None` when the defining table leaves it undefined.
    pub xi: Option<f64>,
    pub gamma_plus: f64,
    pub case: XiCase,
}

const NU_EPS: f64 = 1e-12;

/// Evaluate the tail scalars from the declared exponents and the
/// eigenvalue. The eigenvalue only enters when `gamma <= 0`.
pub fn compute_scalars(c: &CoefficientSet, lambda: f64) -> Result<TailScalars> {
    let e = c.exponents();
    let gamma = e.gamma;
    let gamma_plus = gamma.max(0.0);
    let tau_inf = c.growth.tau_inf;
    let b_inf = c.total_rate.b_inf;

    let zeta = if gamma > 0.0 {
        b_inf / tau_inf
    } else if gamma == 0.0 {
        (lambda + b_inf) / tau_inf
    } else {
        lambda / tau_inf
    };
    if gamma <= 0.0 && !(lambda > 0.0) {
        return Err(Error::Domain(
            "tail scalars with gamma <= 0 need the eigenvalue (lambda > 0)".into(),
        ));
    }

    let (xi, case) = if gamma >= 0.0 {
        if e.nu.abs() <= NU_EPS {
            if gamma > 0.0 {
                (Some(e.p1), XiCase::GammaPositiveNuZero)
            } else {
                (Some(e.p1 * b_inf / (lambda + b_inf)), XiCase::GammaZeroNuZero)
            }
        } else if e.nu > 0.0 {
            (Some(0.0), XiCase::NuPositive)
        } else {
            (None, XiCase::Undefined)
        }
    } else {
        // The moments argument needs nu > -1 + (gamma + 1 - alpha) /
        // (gamma_plus + 1 - alpha); with gamma < 0 the denominator is
        // 1 - alpha, matching the defining table.
        let threshold = -1.0 + (gamma + 1.0 - e.alpha) / (gamma_plus + 1.0 - e.alpha);
        if e.nu > threshold {
            (Some(0.0), XiCase::GammaNegativeAboveThreshold)
        } else {
            (None, XiCase::Undefined)
        }
    };

    Ok(TailScalars {
        zeta,
        xi,
        gamma_plus,
        case,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{FragmentMeasure, GrowthRate, TotalFragRate};

    fn coeffs(b_gamma: (f64, f64), tau_alpha: (f64, f64)) -> CoefficientSet {
        CoefficientSet::new(
            GrowthRate::pure_power(tau_alpha.0, tau_alpha.1),
            TotalFragRate::pure_power(b_gamma.0, b_gamma.1),
            FragmentMeasure::uniform(),
        )
    }

    #[test]
    fn two_point_mesh() {
        let m = build_mesh(1.0, 2, 0.5).unwrap();
        assert_eq!(m.nodes(), &[0.5, 1.0]);
    }

    #[test]
    fn geometric_ratio_matches_formula() {
        let m = build_mesh(100.0, 257, 1e-4).unwrap();
        assert_eq!(m.len(), 257);
        let expected = 1e6f64.powf(1.0 / 256.0);
        assert!((m.grading_ratio() - expected).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let m = build_mesh(10.0, 513, 1e-3).unwrap();
        let total: f64 = m.weights().iter().sum();
        assert!((total - (10.0 - 1e-3)).abs() < 1e-10, "sum = {total}");
    }

    #[test]
    fn mesh_rejects_bad_input() {
        assert!(build_mesh(1.0, 8, 0.0).is_err());
        assert!(build_mesh(1.0, 1, 0.5).is_err());
        assert!(build_mesh(0.5, 8, 1.0).is_err());
    }

    #[test]
    fn rate_integral_constant_coefficients() {
        // B = tau = 1, lambda = 1: Lambda(x) = 2(x - 1).
        let c = coeffs((1.0, 0.0), (1.0, 0.0));
        let mesh = Arc::new(build_mesh(10.0, 129, 0.1).unwrap());
        let (lam, diverges) = compute_rate_integral(&c, 1.0, &mesh).unwrap();
        assert!(!diverges);
        for (i, &x) in mesh.nodes().iter().enumerate() {
            let expected = 2.0 * (x - 1.0);
            assert!(
                (lam.values[i] - expected).abs() < 1e-10,
                "x = {x}: {} vs {expected}",
                lam.values[i]
            );
        }
    }

    #[test]
    fn rate_integral_linear_coefficients() {
        // B(y) = y, tau(y) = y, lambda = 1: Lambda(x) = ln x + x - 1.
        let c = coeffs((1.0, 1.0), (1.0, 1.0));
        let mesh = Arc::new(build_mesh(20.0, 257, 1e-3).unwrap());
        let (lam, _) = compute_rate_integral(&c, 1.0, &mesh).unwrap();
        for (i, &x) in mesh.nodes().iter().enumerate() {
            let expected = x.ln() + x - 1.0;
            assert!(
                (lam.values[i] - expected).abs() < 1e-9,
                "x = {x}: {} vs {expected}",
                lam.values[i]
            );
        }
    }

    #[test]
    fn rate_integral_quadratic_b() {
        // B(y) = y^2, tau(y) = y, lambda = 1: Lambda(x) = ln x + (x^2-1)/2,
        // checked against the closed form at x = 2.
        let c = coeffs((1.0, 2.0), (1.0, 1.0));
        let mesh = Arc::new(build_mesh(2.0, 65, 0.5).unwrap());
        let (lam, _) = compute_rate_integral(&c, 1.0, &mesh).unwrap();
        let expected = 2.0f64.ln() + 1.5;
        let got = *lam.values.last().unwrap();
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }

    #[test]
    fn rate_integral_is_strictly_increasing() {
        let c = coeffs((1.0, 1.0), (1.0, 1.0));
        let mesh = Arc::new(build_mesh(50.0, 200, 1e-2).unwrap());
        let (lam, _) = compute_rate_integral(&c, 0.7, &mesh).unwrap();
        assert!(lam.values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rate_integral_refinement_stability() {
        let c = coeffs((1.0, 1.0), (1.0, 0.5));
        let coarse = Arc::new(build_mesh(10.0, 65, 1e-2).unwrap());
        let fine = Arc::new(build_mesh(10.0, 129, 1e-2).unwrap());
        let (a, _) = compute_rate_integral(&c, 1.0, &coarse).unwrap();
        let (b, _) = compute_rate_integral(&c, 1.0, &fine).unwrap();
        // Shared nodes are every other fine node.
        for i in 0..coarse.len() {
            let diff = (a.values[i] - b.values[2 * i]).abs();
            assert!(diff < 1e-9, "node {i}: diff = {diff}");
        }
    }

    #[test]
    fn divergence_flag_from_declared_exponents() {
        // alpha0 = 1 with lambda > 0 makes Lambda -> -inf at 0.
        let c = coeffs((1.0, 1.0), (1.0, 1.0));
        let mesh = Arc::new(build_mesh(5.0, 64, 1e-2).unwrap());
        let (_, diverges) = compute_rate_integral(&c, 1.0, &mesh).unwrap();
        assert!(diverges);

        let c = coeffs((1.0, 1.0), (1.0, 0.0));
        let (_, diverges) = compute_rate_integral(&c, 1.0, &mesh).unwrap();
        assert!(!diverges);
    }

    #[test]
    fn scalars_three_cases() {
        // gamma = 1: zeta = B_inf / tau_inf, xi = p1.
        let c = coeffs((1.0, 1.0), (1.0, 1.0));
        let s = compute_scalars(&c, 1.0).unwrap();
        assert_eq!(s.zeta, 1.0);
        assert_eq!(s.xi, Some(2.0));
        assert_eq!(s.case, XiCase::GammaPositiveNuZero);

        // gamma = 0 with lambda = 1: zeta = 2, xi = 2 * 1 / (1 + 1) = 1.
        let c = coeffs((1.0, 0.0), (1.0, 0.0));
        let s = compute_scalars(&c, 1.0).unwrap();
        assert_eq!(s.zeta, 2.0);
        assert_eq!(s.xi, Some(1.0));
        assert_eq!(s.case, XiCase::GammaZeroNuZero);

        // nu > 0 with gamma >= 0: xi = 0.
        let c = CoefficientSet::new(
            GrowthRate::pure_power(1.0, 0.0),
            TotalFragRate::pure_power(1.0, 1.0),
            FragmentMeasure::power(1.0, 1.0).unwrap(),
        );
        let s = compute_scalars(&c, 1.0).unwrap();
        assert_eq!(s.xi, Some(0.0));
        assert_eq!(s.case, XiCase::NuPositive);
    }

    #[test]
    fn scalars_relation_for_nonnegative_gamma() {
        // xi * zeta = p1 * B_inf / tau_inf whenever gamma >= 0.
        for (b, g, t, a) in [(1.0, 1.0, 1.0, 1.0), (2.0, 0.5, 3.0, 0.7), (1.0, 0.0, 1.0, 0.0)] {
            let c = coeffs((b, g), (t, a));
            let s = compute_scalars(&c, 0.9).unwrap();
            let lhs = s.xi.unwrap() * s.zeta;
            let rhs = c.fragments.p1 * c.total_rate.b_inf / c.growth.tau_inf;
            assert!((lhs - rhs).abs() < 1e-12, "gamma = {g}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn scalars_gamma_negative() {
        // gamma = -1/2, alpha = 0, nu = 0: threshold = -1 + (1/2)/1 = -1/2,
        // nu = 0 > -1/2 so xi = 0.
        let c = coeffs((1.0, -0.5), (1.0, 0.0));
        let s = compute_scalars(&c, 0.8).unwrap();
        assert_eq!(s.xi, Some(0.0));
        assert_eq!(s.case, XiCase::GammaNegativeAboveThreshold);
        assert!((s.zeta - 0.8).abs() < 1e-15);

        // nu below the threshold: undefined, reported not extrapolated.
        let c = CoefficientSet::new(
            GrowthRate::pure_power(1.0, 0.0),
            TotalFragRate::pure_power(1.0, -0.5),
            FragmentMeasure::power(1.0, -0.75).unwrap(),
        );
        let s = compute_scalars(&c, 0.8).unwrap();
        assert_eq!(s.xi, None);
        assert_eq!(s.case, XiCase::Undefined);
    }

    #[test]
    fn grid_function_interpolation() {
        let mesh = Arc::new(build_mesh(10.0, 33, 0.1).unwrap());
        let values: Vec<f64> = mesh.nodes().iter().map(|x| x.ln()).collect();
        let f = GridFunction::new(Arc::clone(&mesh), values);
        // ln is linear in log x, so interpolation is exact.
        assert!((f.interp(0.37) - 0.37f64.ln()).abs() < 1e-12);
    }
}
