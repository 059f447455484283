//! Declarative experiment configuration: flat `key=value` text with `#`
//! comments, round-trippable through [`ExperimentConfig::serialize`].

use crate::inversion::{OptimControls, PenaltySupport};
use crate::{EitError, Result};

/// All knobs of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Benchmark truth: 1, 2 or 3.
    pub example: u8,
    /// Relative noise level.
    pub epsilon: f64,
    /// Tikhonov regularization weight.
    pub alpha: f64,
    /// Bulk-marking parameter.
    pub theta: f64,
    /// Initial mesh resolution (boundary vertices per side; multiple of 8).
    pub n_per_side: usize,
    /// Refinement stops before exceeding this vertex count.
    pub dof_budget: usize,
    pub max_levels: usize,
    pub seed: u64,
    /// Penalize/optimize only inside the sub-domain.
    pub penalty_omega_prime: bool,
    /// Admissible box `[lambda, 1/lambda]`.
    pub lambda: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Vertex target of the independent data-generation mesh.
    pub data_dof_target: usize,
}

impl ExperimentConfig {
    /// Benchmark defaults for a given example id.
    pub fn example_default(example: u8) -> Result<Self> {
        let (alpha, omega_prime) = match example {
            1 | 2 => (2.5e-4, false),
            3 => (3.2e-3, true),
            other => {
                return Err(EitError::Config(format!(
                    "unknown example {other}, expected 1, 2 or 3"
                )))
            }
        };
        Ok(Self {
            example,
            epsilon: 1e-3,
            alpha,
            theta: 0.7,
            n_per_side: 8,
            dof_budget: 20_000,
            max_levels: 15,
            seed: 0,
            penalty_omega_prime: omega_prime,
            lambda: 0.1,
            grad_tol: 1e-8,
            max_iters: 500,
            data_dof_target: 120_000,
        })
    }

    pub fn support(&self) -> PenaltySupport {
        if self.penalty_omega_prime {
            PenaltySupport::omega_prime()
        } else {
            PenaltySupport::WholeDomain
        }
    }

    pub fn controls(&self) -> OptimControls {
        OptimControls {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            ..OptimControls::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(EitError::Config(msg));
        if !(1..=3).contains(&self.example) {
            return fail(format!("example = {} not in 1..=3", self.example));
        }
        if !(self.epsilon >= 0.0) {
            return fail(format!("epsilon = {} must be non-negative", self.epsilon));
        }
        if !(self.alpha > 0.0) {
            return fail(format!("alpha = {} must be positive", self.alpha));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return fail(format!("theta = {} not in (0, 1]", self.theta));
        }
        if self.n_per_side == 0 || self.n_per_side % 8 != 0 {
            return fail(format!(
                "n_per_side = {} must be a positive multiple of 8",
                self.n_per_side
            ));
        }
        if self.max_levels == 0 {
            return fail("max_levels must be positive".into());
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return fail(format!("lambda = {} not in (0, 1)", self.lambda));
        }
        if !(self.grad_tol > 0.0) {
            return fail(format!("grad_tol = {} must be positive", self.grad_tol));
        }
        if self.max_iters == 0 {
            return fail("max_iters must be positive".into());
        }
        if self.dof_budget < 2 || self.data_dof_target < 2 {
            return fail("dof_budget and data_dof_target must exceed 1".into());
        }
        Ok(())
    }

    /// Parses flat `key=value` text. Every key is optional; unset keys take
    /// the example's defaults, so a config needs at least `example`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(EitError::Config(format!(
                    "line {}: expected key=value, got {raw:?}",
                    lineno + 1
                )));
            };
            pairs.push((k.trim().to_string(), v.trim().to_string(), lineno + 1));
        }
        let example = pairs
            .iter()
            .find(|(k, _, _)| k == "example")
            .map(|(_, v, n)| {
                v.parse::<u8>()
                    .map_err(|_| EitError::Config(format!("line {n}: bad example {v:?}")))
            })
            .transpose()?
            .ok_or_else(|| EitError::Config("missing required key: example".into()))?;
        let mut cfg = Self::example_default(example)?;
        for (k, v, n) in pairs {
            let bad = || EitError::Config(format!("line {n}: bad value {v:?} for key {k}"));
            match k.as_str() {
                "example" => {}
                "epsilon" => cfg.epsilon = v.parse().map_err(|_| bad())?,
                "alpha" => cfg.alpha = v.parse().map_err(|_| bad())?,
                "theta" => cfg.theta = v.parse().map_err(|_| bad())?,
                "n_per_side" => cfg.n_per_side = v.parse().map_err(|_| bad())?,
                "dof_budget" => cfg.dof_budget = v.parse().map_err(|_| bad())?,
                "max_levels" => cfg.max_levels = v.parse().map_err(|_| bad())?,
                "seed" => cfg.seed = v.parse().map_err(|_| bad())?,
                "penalty_support" => {
                    cfg.penalty_omega_prime = match v.as_str() {
                        "whole" => false,
                        "omega_prime" => true,
                        _ => return Err(bad()),
                    }
                }
                "lambda" => cfg.lambda = v.parse().map_err(|_| bad())?,
                "grad_tol" => cfg.grad_tol = v.parse().map_err(|_| bad())?,
                "max_iters" => cfg.max_iters = v.parse().map_err(|_| bad())?,
                "data_dof_target" => cfg.data_dof_target = v.parse().map_err(|_| bad())?,
                other => {
                    return Err(EitError::Config(format!("line {n}: unknown key {other:?}")))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Full `key=value` listing; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let support = if self.penalty_omega_prime {
            "omega_prime"
        } else {
            "whole"
        };
        format!(
            "example={}\nepsilon={}\nalpha={}\ntheta={}\nn_per_side={}\n\
             dof_budget={}\nmax_levels={}\nseed={}\npenalty_support={}\n\
             lambda={}\ngrad_tol={}\nmax_iters={}\ndata_dof_target={}\n",
            self.example,
            self.epsilon,
            self.alpha,
            self.theta,
            self.n_per_side,
            self.dof_budget,
            self.max_levels,
            self.seed,
            support,
            self.lambda,
            self.grad_tol,
            self.max_iters,
            self.data_dof_target,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_encode_benchmark_values() {
        let c1 = ExperimentConfig::example_default(1).unwrap();
        assert_eq!(c1.alpha, 2.5e-4);
        assert_eq!(c1.theta, 0.7);
        assert!(!c1.penalty_omega_prime);
        let c3 = ExperimentConfig::example_default(3).unwrap();
        assert_eq!(c3.alpha, 3.2e-3);
        assert!(c3.penalty_omega_prime);
        assert!(ExperimentConfig::example_default(0).is_err());
    }

    #[test]
    fn parse_handles_comments_defaults_and_overrides() {
        let text = "# benchmark run\nexample = 2  # two inclusions\n\nepsilon=1e-2\nseed=7\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.example, 2);
        assert_eq!(c.epsilon, 1e-2);
        assert_eq!(c.seed, 7);
        assert_eq!(c.alpha, 2.5e-4); // default preserved
    }

    #[test]
    fn round_trip_is_identity() {
        for ex in 1..=3u8 {
            let mut c = ExperimentConfig::example_default(ex).unwrap();
            c.epsilon = 1e-2;
            c.seed = 123;
            c.dof_budget = 5000;
            let back = ExperimentConfig::parse(&c.serialize()).unwrap();
            assert_eq!(c, back);
        }
    }

    #[test]
    fn parse_rejects_malformed_input() {
        assert!(ExperimentConfig::parse("").is_err()); // missing example
        assert!(ExperimentConfig::parse("example=1\nbogus_key=3\n").is_err());
        assert!(ExperimentConfig::parse("example=1\nalpha=potato\n").is_err());
        assert!(ExperimentConfig::parse("example=1\nno equals sign\n").is_err());
        assert!(ExperimentConfig::parse("example=1\ntheta=1.5\n").is_err());
        assert!(ExperimentConfig::parse("example=1\nn_per_side=9\n").is_err());
        assert!(ExperimentConfig::parse("example=1\npenalty_support=sphere\n").is_err());
    }
}
