//! Central finite-difference oracle for analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Result, Tensor, TensorError};

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Step for `(f(x + eps) - f(x - eps)) / (2 eps)`.
    pub eps: f64,
    /// Maximum accepted relative error.
    pub tol: f64,
    /// Coordinates sampled per tensor; smaller tensors are checked fully.
    pub coords_per_tensor: usize,
    /// Lower bound on the relative-error denominator, so that gradients that
    /// are zero up to rounding compare absolutely.
    pub denom_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            tol: 1e-4,
            coords_per_tensor: 32,
            denom_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Position of the tensor in the parameter list.
    pub index: usize,
    pub coords_checked: usize,
    pub max_rel_error: f64,
    /// Coordinate with the worst error and its (analytic, numeric) values.
    pub worst: Option<(usize, f64, f64)>,
    pub passed: bool,
}

/// Compare analytic gradients returned by `f` against central differences.
///
/// `f` maps the parameter list to `(loss, gradients)`, one gradient per
/// parameter with matching shape. Parameters are perturbed in place and
/// restored before returning.
pub fn finite_difference_check<F>(
    params: &mut [Tensor],
    mut f: F,
    cfg: &GradCheckConfig,
) -> Result<Vec<GradCheckReport>>
where
    F: FnMut(&[Tensor]) -> Result<(f64, Vec<Tensor>)>,
{
    let (base, analytic) = f(params)?;
    if !base.is_finite() {
        return Err(TensorError::Numerical(format!("loss is {base}")));
    }
    if analytic.len() != params.len() {
        return Err(TensorError::Shape {
            op: "finite_difference_check",
            lhs: vec![params.len()],
            rhs: vec![analytic.len()],
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut reports = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        if analytic[pi].shape() != params[pi].shape() {
            return Err(TensorError::Shape {
                op: "finite_difference_check",
                lhs: params[pi].shape().to_vec(),
                rhs: analytic[pi].shape().to_vec(),
            });
        }
        let n = params[pi].numel();
        let coords: Vec<usize> = if n <= cfg.coords_per_tensor {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, cfg.coords_per_tensor).into_vec();
            c.sort_unstable();
            c
        };
        let mut max_rel = 0.0f64;
        let mut worst = None;
        for &c in &coords {
            let orig = params[pi].data()[c];
            params[pi].data_mut()[c] = orig + cfg.eps;
            let plus = f(params)?.0;
            params[pi].data_mut()[c] = orig - cfg.eps;
            let minus = f(params)?.0;
            params[pi].data_mut()[c] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(TensorError::Numerical(format!(
                    "non-finite loss while perturbing tensor {pi} coordinate {c}"
                )));
            }
            let numeric = (plus - minus) / (2.0 * cfg.eps);
            let exact = analytic[pi].data()[c];
            if !exact.is_finite() {
                return Err(TensorError::Numerical(format!(
                    "non-finite analytic gradient in tensor {pi} coordinate {c}"
                )));
            }
            let denom = exact.abs().max(numeric.abs()).max(cfg.denom_floor);
            let rel = (exact - numeric).abs() / denom;
            if rel > max_rel || worst.is_none() {
                max_rel = max_rel.max(rel);
                worst = Some((c, exact, numeric));
            }
        }
        reports.push(GradCheckReport {
            index: pi,
            coords_checked: coords.len(),
            max_rel_error: max_rel,
            worst,
            passed: max_rel < cfg.tol,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(ps: &[Tensor]) -> Result<(f64, Vec<Tensor>)> {
        let x = &ps[0];
        let value = x.data().iter().map(|v| v * v).sum();
        let grad = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| 2.0 * v).collect())?;
        Ok((value, vec![grad]))
    }

    #[test]
    fn quadratic_gradient_is_two() {
        let mut ps = vec![Tensor::full(&[5], 1.0)];
        let (_, g) = quadratic(&ps).unwrap();
        assert!(g[0].data().iter().all(|&v| v == 2.0));
        let r = finite_difference_check(&mut ps, quadratic, &GradCheckConfig::default()).unwrap();
        assert!(r[0].passed);
        let (_, exact, numeric) = r[0].worst.unwrap();
        assert!((exact - numeric).abs() < 1e-9);
        // parameters are restored
        assert!(ps[0].data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn constant_function_has_zero_gradients() {
        let mut ps = vec![Tensor::full(&[3], 0.3)];
        let r = finite_difference_check(
            &mut ps,
            |p| Ok((4.0, vec![Tensor::zeros(p[0].shape())])),
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert_eq!(r[0].max_rel_error, 0.0);
        assert_eq!(r[0].worst.unwrap().2, 0.0);
    }

    #[test]
    fn wrong_gradient_fails() {
        let mut ps = vec![Tensor::full(&[2], 1.0)];
        let r = finite_difference_check(
            &mut ps,
            |p| {
                let (v, _) = quadratic(p)?;
                Ok((v, vec![Tensor::full(&[2], 2.1)]))
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(!r[0].passed);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let mut ps = vec![Tensor::full(&[1], 1.0)];
        let r = finite_difference_check(
            &mut ps,
            |p| Ok((f64::NAN, vec![Tensor::zeros(p[0].shape())])),
            &GradCheckConfig::default(),
        );
        assert!(matches!(r, Err(TensorError::Numerical(_))));
    }

    #[test]
    fn samples_large_tensors() {
        let mut ps = vec![Tensor::full(&[100], 0.5)];
        let r = finite_difference_check(&mut ps, quadratic, &GradCheckConfig::default()).unwrap();
        assert_eq!(r[0].coords_checked, 32);
    }
}
