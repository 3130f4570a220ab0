//! Reaction-diffusion models `u_t = D Δu + f(u)` with diagonal, positive `D`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pointwise reaction kinetics `f: R^n -> R^n` together with its Jacobian.
pub trait Kinetics: Send + Sync + fmt::Debug {
    fn n_components(&self) -> usize;

    /// Writes `f(state)` into `out`.
    fn rate(&self, state: &[f64], out: &mut [f64]);

    /// Writes the Jacobian `f_u(state)` into `out`, row-major `n × n`.
    fn jacobian(&self, state: &[f64], out: &mut [f64]);
}

/// A reaction-diffusion model. Immutable after construction.
#[derive(Clone)]
pub struct ReactionModel {
    name: String,
    diffusion: Vec<f64>,
    kinetics: Arc<dyn Kinetics>,
}

impl fmt::Debug for ReactionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReactionModel")
            .field("name", &self.name)
            .field("diffusion", &self.diffusion)
            .finish()
    }
}

impl ReactionModel {
    pub fn new(
        name: impl Into<String>,
        diffusion: Vec<f64>,
        kinetics: Arc<dyn Kinetics>,
    ) -> Result<Self> {
        if diffusion.len() != kinetics.n_components() {
            return Err(Error::DimensionMismatch {
                expected: kinetics.n_components(),
                found: diffusion.len(),
            });
        }
        if let Some(d) = diffusion.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "diffusion coefficient {d} must be positive: the weighted theory needs D = diag(d_j) > 0"
            )));
        }
        Ok(Self {
            name: name.into(),
            diffusion,
            kinetics,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_components(&self) -> usize {
        self.diffusion.len()
    }

    /// Diagonal of the diffusion matrix.
    pub fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }

    pub fn rate(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(state)?;
        let mut out = vec![0.0; self.n_components()];
        self.kinetics.rate(state, &mut out);
        Ok(out)
    }

    /// Analytic Jacobian, row-major.
    pub fn jacobian(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(state)?;
        let n = self.n_components();
        let mut out = vec![0.0; n * n];
        self.kinetics.jacobian(state, &mut out);
        Ok(out)
    }

    /// Unchecked variant for inner loops; `state` and `out` must have the
    /// model dimension.
    #[inline]
    pub fn rate_into(&self, state: &[f64], out: &mut [f64]) {
        self.kinetics.rate(state, out);
    }

    #[inline]
    pub fn jacobian_into(&self, state: &[f64], out: &mut [f64]) {
        self.kinetics.jacobian(state, out);
    }

    fn check_dim(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.n_components() {
            return Err(Error::DimensionMismatch {
                expected: self.n_components(),
                found: state.len(),
            });
        }
        Ok(())
    }
}

/// Parameters of the Barkley model
///
/// ```text
/// u_t = Δu + (1/eps) u (1 - u) (u - (v + b)/a)
/// v_t = delta Δv + u - v
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarkleyParams {
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub delta: f64,
}

impl Default for BarkleyParams {
    fn default() -> Self {
        Self {
            a: 0.7,
            b: 0.01,
            eps: 0.02,
            delta: 0.2,
        }
    }
}

impl BarkleyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) {
            return Err(Error::InvalidParameter(format!("Barkley a = {} must be > 0", self.a)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("Barkley eps = {} must be > 0", self.eps)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Barkley delta = {} must be > 0: the weighted theory needs positive diffusion in every component",
                self.delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Barkley(BarkleyParams);

impl Kinetics for Barkley {
    fn n_components(&self) -> usize {
        2
    }

    fn rate(&self, s: &[f64], out: &mut [f64]) {
        let p = &self.0;
        let (u, v) = (s[0], s[1]);
        let threshold = (v + p.b) / p.a;
        out[0] = u * (1.0 - u) * (u - threshold) / p.eps;
        out[1] = u - v;
    }

    fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        let p = &self.0;
        let (u, v) = (s[0], s[1]);
        let threshold = (v + p.b) / p.a;
        out[0] = ((1.0 - 2.0 * u) * (u - threshold) + u * (1.0 - u)) / p.eps;
        out[1] = -u * (1.0 - u) / (p.a * p.eps);
        out[2] = 1.0;
        out[3] = -1.0;
    }
}

pub fn barkley_model(params: BarkleyParams) -> Result<ReactionModel> {
    params.validate()?;
    ReactionModel::new("barkley", vec![1.0, params.delta], Arc::new(Barkley(params)))
}

/// Linear kinetics `f(u) = M u`. Reduces every operator in the crate to
/// constant coefficients, which makes closed-form oracles available.
#[derive(Debug, Clone)]
pub struct LinearKinetics {
    n: usize,
    matrix: Vec<f64>,
}

impl LinearKinetics {
    /// `matrix` is row-major `n × n`.
    pub fn new(n: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: matrix.len(),
            });
        }
        Ok(Self { n, matrix })
    }
}

impl Kinetics for LinearKinetics {
    fn n_components(&self) -> usize {
        self.n
    }

    fn rate(&self, s: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = (0..self.n).map(|j| self.matrix[i * self.n + j] * s[j]).sum();
        }
    }

    fn jacobian(&self, _s: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.matrix);
    }
}

pub fn linear_model(diffusion: Vec<f64>, matrix: Vec<f64>) -> Result<ReactionModel> {
    let n = diffusion.len();
    ReactionModel::new("linear", diffusion, Arc::new(LinearKinetics::new(n, matrix)?))
}

/// Model selection as it appears in run configs: `{"name": ..., "params": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            name: "barkley".into(),
            params: serde_json::to_value(BarkleyParams::default()).expect("plain struct"),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearParams {
    diffusion: Vec<f64>,
    matrix: Vec<f64>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<ReactionModel> {
        match self.name.as_str() {
            "barkley" => {
                let params = if self.params.is_null() {
                    BarkleyParams::default()
                } else {
                    serde_json::from_value(self.params.clone())
                        .map_err(|e| Error::Config(format!("barkley params: {e}")))?
                };
                barkley_model(params)
            }
            "linear" => {
                let p: LinearParams = serde_json::from_value(self.params.clone())
                    .map_err(|e| Error::Config(format!("linear params: {e}")))?;
                linear_model(p.diffusion, p.matrix)
            }
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn fd_jacobian(model: &ReactionModel, state: &[f64], step: f64) -> Vec<f64> {
        let n = model.n_components();
        let mut jac = vec![0.0; n * n];
        for j in 0..n {
            let mut plus = state.to_vec();
            let mut minus = state.to_vec();
            plus[j] += step;
            minus[j] -= step;
            let fp = model.rate(&plus).unwrap();
            let fm = model.rate(&minus).unwrap();
            for i in 0..n {
                jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        jac
    }

    #[test]
    fn barkley_rate_vanishes_at_rest_and_excited_states() {
        let m = barkley_model(BarkleyParams::default()).unwrap();
        assert_eq!(m.rate(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(m.rate(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn barkley_rate_closed_form() {
        let m = barkley_model(BarkleyParams::default()).unwrap();
        let f = m.rate(&[0.5, 0.2]).unwrap();
        assert_relative_eq!(f[0], 2.5, epsilon = 1e-12);
        assert_relative_eq!(f[1], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn barkley_jacobian_entries() {
        let m = barkley_model(BarkleyParams::default()).unwrap();
        let j = m.jacobian(&[0.0, 0.4]).unwrap();
        assert_eq!(j[2], 1.0);
        assert_eq!(j[3], -1.0);
        let j = m.jacobian(&[0.5, 0.2]).unwrap();
        assert_relative_eq!(j[1], -0.25 / (0.02 * 0.7), epsilon = 1e-10);
        assert_relative_eq!(j[1], -17.857142857142858, epsilon = 1e-10);
    }

    #[test]
    fn rejects_nonpositive_delta() {
        let err = barkley_model(BarkleyParams { delta: 0.0, ..Default::default() }).unwrap_err();
        assert!(err.to_string().contains("positive diffusion"));
        assert!(barkley_model(BarkleyParams { delta: -1.0, ..Default::default() }).is_err());
        assert!(barkley_model(BarkleyParams { eps: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn jacobian_dimension_mismatch() {
        let m = barkley_model(BarkleyParams::default()).unwrap();
        assert!(matches!(
            m.jacobian(&[0.1]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let models = vec![
            barkley_model(BarkleyParams::default()).unwrap(),
            barkley_model(BarkleyParams { a: 0.6, b: 0.05, eps: 0.05, delta: 1.0 }).unwrap(),
            linear_model(vec![1.0, 2.0], vec![0.5, -1.0, 2.0, 0.25]).unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for model in &models {
            for _ in 0..100 {
                let state: Vec<f64> =
                    (0..model.n_components()).map(|_| rng.random_range(-1.0..2.0)).collect();
                let exact = model.jacobian(&state).unwrap();
                let fd = fd_jacobian(model, &state, 1e-6);
                let scale = exact.iter().fold(1.0f64, |a, x| a.max(x.abs()));
                for (e, f) in exact.iter().zip(&fd) {
                    assert!((e - f).abs() <= 1e-6 * scale, "{e} vs {f}");
                }
            }
        }
    }

    #[test]
    fn model_spec_round_trip() {
        let spec = ModelSpec::default();
        let m = spec.build().unwrap();
        assert_eq!(m.name(), "barkley");
        assert_eq!(m.diffusion(), &[1.0, 0.2]);
        let bad = ModelSpec { name: "nope".into(), params: serde_json::Value::Null };
        assert!(bad.build().is_err());
        let bad = ModelSpec {
            name: "barkley".into(),
            params: serde_json::json!({"a": 0.7, "b": 0.01, "eps": 0.02, "delta": 0.2, "x": 1}),
        };
        assert!(bad.build().is_err());
    }
}
