//! Optimization-problem data: input/output costs (via gradients), the box
//! feasible set, the gradient map Φ, and the step-size bound.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::densemat::{spectral_norm, Matrix, MatrixError, Result};
use crate::mathx::abs;

/// Gradient oracle over flat slices.
pub type GradFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Cost data: gradients of the input cost `f` and output cost `g` plus the
/// declared strong-convexity/Lipschitz constants they satisfy.
pub struct CostModel {
    pub grad_f: GradFn,
    pub grad_g: GradFn,
    pub mu_f: f64,
    pub ell_f: f64,
    pub ell_g: f64,
}

impl CostModel {
    pub fn new(grad_f: GradFn, grad_g: GradFn, mu_f: f64, ell_f: f64, ell_g: f64) -> Result<Self> {
        if !(mu_f > 0.0) || !(ell_f > 0.0) || !(ell_g >= 0.0) || ell_f < mu_f {
            return Err(MatrixError::ParameterError(String::from(
                "need 0 < mu_f <= ell_f and ell_g >= 0",
            )));
        }
        Ok(Self { grad_f, grad_g, mu_f, ell_f, ell_g })
    }

    /// Quadratic input cost `f(u) = ½‖u‖²` with a zero output cost.
    pub fn pure_quadratic() -> Self {
        Self {
            grad_f: Box::new(|u| u.to_vec()),
            grad_g: Box::new(|y| y.iter().map(|_| 0.0).collect()),
            mu_f: 1.0,
            ell_f: 1.0,
            ell_g: 0.0,
        }
    }
}

impl core::fmt::Debug for CostModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CostModel")
            .field("mu_f", &self.mu_f)
            .field("ell_f", &self.ell_f)
            .field("ell_g", &self.ell_g)
            .finish_non_exhaustive()
    }
}

/// Axis-aligned box feasible set.
#[derive(Debug, Clone)]
pub struct BoxSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(MatrixError::DimensionMismatch("box bound lengths differ".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u || !l.is_finite() || !u.is_finite()) {
            return Err(MatrixError::ParameterError("need lower <= upper, finite".into()));
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric box `[-r, r]^m`.
    pub fn symmetric(r: f64, m: usize) -> Result<Self> {
        Self::new(alloc::vec![-r; m], alloc::vec![r; m])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&l, &h))| x >= l - tol && x <= h + tol)
    }
}

/// Soft band penalty `g(y) = ½·weight·max{0, y_low−y, y−y_high}²` applied to
/// each output component; its derivative is the soft threshold.
#[derive(Debug, Clone)]
pub struct SoftBandPenalty {
    pub y_low: f64,
    pub y_high: f64,
    pub weight: f64,
}

impl SoftBandPenalty {
    pub fn new(y_low: f64, y_high: f64, weight: f64) -> Result<Self> {
        if y_low > y_high || !(weight > 0.0) {
            return Err(MatrixError::ParameterError(
                "need y_low <= y_high and weight > 0".into(),
            ));
        }
        Ok(Self { y_low, y_high, weight })
    }

    /// Unweighted penalty value at `y`.
    pub fn value(&self, y: f64) -> f64 {
        let s = soft_threshold(self, y);
        0.5 * self.weight * s * s
    }

    /// Gradient of the weighted penalty: `weight · S(y)`.
    pub fn gradient(&self, y: f64) -> f64 {
        self.weight * soft_threshold(self, y)
    }
}

/// Euclidean projection onto the box: componentwise clamp.
pub fn project_box(s: &BoxSet, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != s.dim() {
        return Err(MatrixError::DimensionMismatch("project_box input length".into()));
    }
    Ok(u.iter()
        .zip(s.lower.iter().zip(&s.upper))
        .map(|(&x, (&l, &h))| x.max(l).min(h))
        .collect())
}

/// Soft threshold `S(y)`: distance to the band, signed.
pub fn soft_threshold(p: &SoftBandPenalty, y: f64) -> f64 {
    if y < p.y_low {
        y - p.y_low
    } else if y > p.y_high {
        y - p.y_high
    } else {
        0.0
    }
}

/// Gradient map `Φ(u, y) = ∇f(u) + Π_uᵀ∇g(y_eff)`.
pub fn phi(c: &CostModel, pi_u: &Matrix, u: &[f64], y_eff: &[f64]) -> Result<Vec<f64>> {
    if pi_u.cols() != u.len() || pi_u.rows() != y_eff.len() {
        return Err(MatrixError::DimensionMismatch("phi input lengths".into()));
    }
    let gf = (c.grad_f)(u);
    let gg = (c.grad_g)(y_eff);
    if gf.len() != u.len() || gg.len() != y_eff.len() {
        return Err(MatrixError::DimensionMismatch("gradient output lengths".into()));
    }
    let pit_gg = pi_u.matvec_t(&gg)?;
    Ok(gf.iter().zip(&pit_gg).map(|(&a, &b)| a + b).collect())
}

/// Upper step-size bound `2μ_f / (ℓ_f + ℓ_g‖Π_u‖₂²)²`.
pub fn eta_max(c: &CostModel, pi_u: &Matrix) -> Result<f64> {
    let norm = spectral_norm(pi_u)?;
    let big_l = c.ell_f + c.ell_g * norm * norm;
    Ok(2.0 * c.mu_f / (big_l * big_l))
}

/// Lipschitz constant of Φ in `u` for fixed steady-state coupling:
/// `L = ℓ_f + ℓ_g‖Π_u‖₂²`.
pub fn phi_lipschitz(c: &CostModel, pi_u: &Matrix) -> Result<f64> {
    let norm = spectral_norm(pi_u)?;
    Ok(c.ell_f + c.ell_g * norm * norm)
}

/// Spot-checks declared constants against random samples: returns the max of
/// (empirical Lipschitz ratio of ∇f over ℓ_f) and (of ∇g over ℓ_g) — both
/// should be ≤ 1 + tolerance for honest inputs.
pub fn spot_check_constants(
    c: &CostModel,
    samples: &[(Vec<f64>, Vec<f64>)],
    out_samples: &[(Vec<f64>, Vec<f64>)],
) -> f64 {
    let mut worst: f64 = 0.0;
    for (u, v) in samples {
        let du: f64 = crate::mathx::norm2(
            &u.iter().zip(v).map(|(a, b)| a - b).collect::<Vec<_>>(),
        );
        if du == 0.0 {
            continue;
        }
        let gu = (c.grad_f)(u);
        let gv = (c.grad_f)(v);
        let dg = crate::mathx::norm2(
            &gu.iter().zip(&gv).map(|(a, b)| a - b).collect::<Vec<_>>(),
        );
        worst = worst.max(dg / (c.ell_f * du));
    }
    for (y, z) in out_samples {
        let dy: f64 = crate::mathx::norm2(
            &y.iter().zip(z).map(|(a, b)| a - b).collect::<Vec<_>>(),
        );
        if dy == 0.0 || c.ell_g == 0.0 {
            continue;
        }
        let gy = (c.grad_g)(y);
        let gz = (c.grad_g)(z);
        let dg = crate::mathx::norm2(
            &gy.iter().zip(&gz).map(|(a, b)| a - b).collect::<Vec<_>>(),
        );
        worst = worst.max(dg / (c.ell_g * dy));
    }
    worst
}

/// Componentwise distance of `y` to the band (0 inside).
pub fn band_distance(p: &SoftBandPenalty, y: f64) -> f64 {
    abs(soft_threshold(p, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn band() -> SoftBandPenalty {
        SoftBandPenalty::new(-0.01, 0.01, 1e5).unwrap()
    }

    #[test]
    fn project_box_clamps() {
        let s = BoxSet::symmetric(20.0, 2).unwrap();
        assert_eq!(project_box(&s, &[25.0, -30.0]).unwrap(), alloc::vec![20.0, -20.0]);
        assert_eq!(project_box(&s, &[1.0, -2.0]).unwrap(), alloc::vec![1.0, -2.0]);
        assert_eq!(project_box(&s, &[20.0, -20.0]).unwrap(), alloc::vec![20.0, -20.0]);
    }

    #[test]
    fn project_box_nonexpansive() {
        let s = BoxSet::new(alloc::vec![-1.0, 0.0], alloc::vec![2.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10_000 {
            let u = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let v = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let pu = project_box(&s, &u).unwrap();
            let pv = project_box(&s, &v).unwrap();
            let dp = crate::mathx::norm2(&[pu[0] - pv[0], pu[1] - pv[1]]);
            let d = crate::mathx::norm2(&[u[0] - v[0], u[1] - v[1]]);
            assert!(dp <= d + 1e-15);
        }
    }

    #[test]
    fn soft_threshold_branches() {
        let p = band();
        assert_eq!(soft_threshold(&p, 0.0), 0.0);
        assert!((soft_threshold(&p, 0.02) - 0.01).abs() < 1e-15);
        assert!((soft_threshold(&p, -0.015) + 0.005).abs() < 1e-15);
    }

    #[test]
    fn soft_threshold_one_lipschitz_monotone() {
        let p = band();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..1000 {
            let a = rng.gen_range(-0.1..0.1);
            let b = rng.gen_range(-0.1..0.1);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let sl = soft_threshold(&p, lo);
            let sh = soft_threshold(&p, hi);
            assert!(sh >= sl);
            assert!((sh - sl).abs() <= (hi - lo) + 1e-15);
        }
    }

    fn bench_costs() -> CostModel {
        let p = band();
        CostModel::new(
            Box::new(|u| u.to_vec()),
            Box::new(move |y| y.iter().map(|&yi| p.gradient(yi)).collect()),
            1.0,
            1.0,
            1e5,
        )
        .unwrap()
    }

    #[test]
    fn phi_reduces_to_grad_f_when_g_zero() {
        let c = CostModel::pure_quadratic();
        let pi_u = Matrix::from_rows(&[&[0.05, 0.05]]).unwrap();
        let u = [0.3, -0.4];
        let out = phi(&c, &pi_u, &u, &[0.0]).unwrap();
        assert_eq!(out, alloc::vec![0.3, -0.4]);
    }

    #[test]
    fn phi_in_band_equals_u() {
        let c = bench_costs();
        let pi_u = Matrix::from_rows(&[&[0.05, 0.05]]).unwrap();
        let out = phi(&c, &pi_u, &[0.3, -0.4], &[0.005]).unwrap();
        assert_eq!(out, alloc::vec![0.3, -0.4]);
    }

    #[test]
    fn phi_out_of_band_adds_penalty_gradient() {
        // y = 0.02 exceeds band by 0.01; gradient 1e5*0.01 = 1e3 mapped
        // through pi_u^T = [0.05; 0.05] gives 50 per component.
        let c = bench_costs();
        let pi_u = Matrix::from_rows(&[&[0.05, 0.05]]).unwrap();
        let out = phi(&c, &pi_u, &[0.0, 0.0], &[0.02]).unwrap();
        assert!((out[0] - 50.0).abs() < 1e-9);
        assert!((out[1] - 50.0).abs() < 1e-9);
    }

    #[test]
    fn eta_max_values() {
        let pure = CostModel::pure_quadratic();
        assert!((eta_max(&pure, &Matrix::identity(1)).unwrap() - 2.0).abs() < 1e-12);
        let c = CostModel::new(
            Box::new(|u| u.to_vec()),
            Box::new(|y| y.to_vec()),
            1.0,
            1.0,
            1.0,
        )
        .unwrap();
        assert!((eta_max(&c, &Matrix::identity(1)).unwrap() - 0.5).abs() < 1e-12);
        // benchmark: ‖Π_u‖² = 0.005, L = 1 + 1e5·0.005 = 501
        let pi_u = Matrix::from_rows(&[&[0.05, 0.05]]).unwrap();
        let got = eta_max(&bench_costs(), &pi_u).unwrap();
        assert!((got - 2.0 / (501.0 * 501.0)).abs() < 1e-12);
    }

    #[test]
    fn phi_lipschitz_and_strong_monotonicity_on_benchmark() {
        let c = bench_costs();
        let pi_u = Matrix::from_rows(&[&[0.05, 0.05]]).unwrap();
        let big_l = phi_lipschitz(&c, &pi_u).unwrap();
        assert!((big_l - 501.0).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let u = [rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)];
            let v = [rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)];
            // y_eff tied to u through the steady-state map, as in the
            // contraction argument
            let yu = [0.05 * (u[0] + u[1])];
            let yv = [0.05 * (v[0] + v[1])];
            let pu = phi(&c, &pi_u, &u, &yu).unwrap();
            let pv = phi(&c, &pi_u, &v, &yv).unwrap();
            let d = [u[0] - v[0], u[1] - v[1]];
            let dp = [pu[0] - pv[0], pu[1] - pv[1]];
            let nd = crate::mathx::norm2(&d);
            if nd == 0.0 {
                continue;
            }
            // Lipschitz
            assert!(crate::mathx::norm2(&dp) <= big_l * nd + 1e-9);
            // strong monotonicity with modulus mu_f
            let inner = dp[0] * d[0] + dp[1] * d[1];
            assert!(inner >= c.mu_f * nd * nd - 1e-9);
        }
    }

    #[test]
    fn spot_check_declared_constants() {
        let c = bench_costs();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let samples: Vec<_> = (0..200)
            .map(|_| {
                (
                    alloc::vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                    alloc::vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                )
            })
            .collect();
        let out_samples: Vec<_> = (0..200)
            .map(|_| (alloc::vec![rng.gen_range(-0.1..0.1)], alloc::vec![rng.gen_range(-0.1..0.1)]))
            .collect();
        assert!(spot_check_constants(&c, &samples, &out_samples) <= 1.0 + 1e-6);
    }
}
