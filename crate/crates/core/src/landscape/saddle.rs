use super::Landscape;
use crate::error::{check_dim, Error, Result};

/// `f(theta) = 1/2 (theta - c)^T H (theta - c)` with `H` given by its
/// eigen-decomposition. The saddle point `c` has zero gradient and at
/// least one negative curvature direction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSaddle {
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
    center: Vec<f64>,
    hessian: Vec<f64>,
    unstable: usize,
}

impl QuadraticSaddle {
    /// `eigenvectors[i]` pairs with `eigenvalues[i]`; the set must be
    /// orthonormal.
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: Vec<Vec<f64>>) -> Result<Self> {
        let d = eigenvalues.len();
        if d == 0 {
            return Err(Error::Config("saddle needs at least one eigenvalue".into()));
        }
        check_dim(d, eigenvectors.len())?;
        for v in &eigenvectors {
            check_dim(d, v.len())?;
        }
        if eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(Error::Config("eigenvalues must be finite".into()));
        }
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = eigenvectors[i]
                    .iter()
                    .zip(&eigenvectors[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-10 {
                    return Err(Error::Config(format!(
                        "eigenvectors are not orthonormal (<v{i}, v{j}> = {dot})"
                    )));
                }
            }
        }
        // first index of the most negative eigenvalue
        let unstable = eigenvalues
            .iter()
            .enumerate()
            .fold(0, |best, (i, &l)| if l < eigenvalues[best] { i } else { best });
        if eigenvalues[unstable] >= 0.0 {
            return Err(Error::Config(
                "not a strict saddle: no negative eigenvalue".into(),
            ));
        }
        let mut hessian = vec![0.0; d * d];
        for (l, v) in eigenvalues.iter().zip(&eigenvectors) {
            for r in 0..d {
                for c in 0..d {
                    hessian[r * d + c] += l * v[r] * v[c];
                }
            }
        }
        let saddle = Self {
            eigenvalues,
            eigenvectors,
            center: vec![0.0; d],
            hessian,
            unstable,
        };
        if saddle.is_degenerate() {
            log::warn!(
                "smallest eigenvalue {} is repeated; using eigenvector {} as the unstable direction",
                saddle.eigenvalues[unstable],
                unstable
            );
        }
        Ok(saddle)
    }

    /// Axis-aligned saddle with the standard basis as eigenvectors.
    pub fn diagonal(eigenvalues: Vec<f64>) -> Result<Self> {
        let d = eigenvalues.len();
        let basis = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(eigenvalues, basis)
    }

    /// 2-D saddle whose eigenbasis is the standard basis rotated by `angle`.
    pub fn rotated_2d(lambda0: f64, lambda1: f64, angle: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        Self::new(vec![lambda0, lambda1], vec![vec![c, s], vec![-s, c]])
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Result<Self> {
        check_dim(self.dim(), center.len())?;
        self.center = center;
        Ok(self)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[Vec<f64>] {
        &self.eigenvectors
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// `gamma = -lambda_min > 0`.
    pub fn gamma(&self) -> f64 {
        -self.eigenvalues[self.unstable]
    }

    /// Smoothness constant: the largest absolute eigenvalue.
    pub fn smoothness(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()))
    }

    pub fn unstable_direction(&self) -> &[f64] {
        &self.eigenvectors[self.unstable]
    }

    /// True when the most negative eigenvalue is repeated, in which case
    /// the unstable direction is not unique.
    pub fn is_degenerate(&self) -> bool {
        let min = self.eigenvalues[self.unstable];
        self.eigenvalues.iter().filter(|&&l| l == min).count() > 1
    }

    pub fn hessian_times(&self, u: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|r| (0..d).map(|c| self.hessian[r * d + c] * u[c]).sum())
            .collect()
    }

    /// Displacement from the saddle projected on the unstable direction.
    pub fn project_unstable(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        Ok(theta
            .iter()
            .zip(&self.center)
            .zip(self.unstable_direction())
            .map(|((t, c), v)| (t - c) * v)
            .sum())
    }
}

impl Landscape for QuadraticSaddle {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn eval(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.dim(), theta.len())?;
        let u: Vec<f64> = theta.iter().zip(&self.center).map(|(t, c)| t - c).collect();
        let grad = self.hessian_times(&u);
        let value = 0.5 * u.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>();
        Ok((value, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{fd_gradient, max_relative_error};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stationary_at_center() {
        let s = QuadraticSaddle::diagonal(vec![1.0, -1.0]).unwrap();
        assert_eq!(s.eval(&[0.0, 0.0]).unwrap(), (0.0, vec![0.0, 0.0]));
    }

    #[test]
    fn value_along_unstable_direction() {
        let s = QuadraticSaddle::rotated_2d(1.0, -1.0, 0.3).unwrap();
        let v = s.unstable_direction().to_vec();
        let (f, g) = s.eval(&v).unwrap();
        assert_relative_eq!(f, -0.5, max_relative = 1e-14);
        assert_relative_eq!(g[0], -v[0], max_relative = 1e-14);
        assert_relative_eq!(g[1], -v[1], max_relative = 1e-14);
        assert_eq!(s.gamma(), 1.0);
        assert_eq!(s.smoothness(), 1.0);
    }

    #[test]
    fn projection_examples() {
        let s = QuadraticSaddle::rotated_2d(2.0, -0.5, 1.1).unwrap();
        assert_eq!(s.project_unstable(&[0.0, 0.0]).unwrap(), 0.0);
        let v = s.unstable_direction();
        let p = s.project_unstable(&[0.001 * v[0], 0.001 * v[1]]).unwrap();
        assert_relative_eq!(p, 0.001, max_relative = 1e-12);
        let w = &s.eigenvectors()[0];
        assert!(s.project_unstable(&[3.0 * w[0], 3.0 * w[1]]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn rejects_non_saddles() {
        assert!(QuadraticSaddle::diagonal(vec![1.0, 2.0]).is_err());
        assert!(QuadraticSaddle::new(vec![1.0, -1.0], vec![vec![1.0, 0.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn degenerate_picks_first() {
        let s = QuadraticSaddle::diagonal(vec![1.0, -2.0, -2.0]).unwrap();
        assert!(s.is_degenerate());
        assert_eq!(s.unstable_direction(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn fd_matches_and_smoothness_bound_holds() {
        let s = QuadraticSaddle::rotated_2d(3.0, -1.5, 0.7)
            .unwrap()
            .with_center(vec![0.2, -0.1])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let ga = s.eval(&a).unwrap().1;
            let fd = fd_gradient(&s, &a, 1e-5).unwrap();
            assert!(max_relative_error(&ga, &fd) <= 1e-7);

            let gb = s.eval(&b).unwrap().1;
            let dg = ((ga[0] - gb[0]).powi(2) + (ga[1] - gb[1]).powi(2)).sqrt();
            let dx = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            assert!(dg <= s.smoothness() * dx * (1.0 + 1e-12));
        }
    }

    #[test]
    fn projection_is_linear() {
        let s = QuadraticSaddle::rotated_2d(1.0, -1.0, 0.4).unwrap();
        let a = [0.3, -0.7];
        let b = [1.1, 0.25];
        let combo = [2.0 * a[0] - 3.0 * b[0], 2.0 * a[1] - 3.0 * b[1]];
        let lhs = s.project_unstable(&combo).unwrap();
        let rhs = 2.0 * s.project_unstable(&a).unwrap() - 3.0 * s.project_unstable(&b).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }
}
