//! Run configuration: a flat key=value schema shared by the library tests
//! and the command line driver.
//!
//! The format is one `key = value` pair per line, `#` comments allowed.
//! `canonical_string` renders a config with sorted keys and normalized
//! number formatting, so hashing the string yields a key that is stable
//! under reordering and whitespace.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEPTH_GUARD: u32 = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum QuadratureMode {
    Deterministic,
    /// Seeded Monte Carlo mode grids, for convergence studies only.
    MonteCarlo { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// UV cutoff radius; scale j lives at kappa * 2^-j.
    pub kappa: f64,
    /// Coupling constants to sweep (one flow per entry where relevant).
    pub e: Vec<f64>,
    /// Radius of the momentum ball sampled by sweeps.
    pub p_max: f64,
    /// Number of radial grid points in [0, p_max].
    pub n_points: usize,
    /// Deepest scale index.
    pub j_max: u32,
    /// Radial quadrature cells per annulus.
    pub n_radial: usize,
    /// Angular nodes per annulus (even; antipodal closure is enforced).
    pub n_angular: usize,
    /// Total photon number cap of every Fock basis.
    pub n_max_total: usize,
    /// Per-mode occupation cap.
    pub n_max_per_mode: usize,
    /// 4 for the production representation, 2 for the block check.
    pub spinor_dim: usize,
    /// Ground-cluster resolution, relative to the spectral norm of H.
    pub cluster_tol: f64,
    /// Central-difference step for gradient cross-checks (the Hessian
    /// cross-check uses 10x this step).
    pub fd_step: f64,
    /// Deepest scale at which finite-difference gradients are recorded in
    /// flows; beyond it only the analytic values are kept (cost guard).
    pub fd_depth: u32,
    pub output_dir: String,
    pub cache_dir: String,
    pub worker_count: usize,
    pub quadrature_mode: QuadratureMode,
    /// Allows j_max beyond the dimension-explosion guard.
    pub depth_guard_override: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kappa: 1.0,
            e: vec![0.05],
            p_max: 1.0,
            n_points: 3,
            j_max: 4,
            n_radial: 1,
            n_angular: 2,
            n_max_total: 3,
            n_max_per_mode: 3,
            spinor_dim: 4,
            cluster_tol: 1e-8,
            fd_step: 1e-4,
            fd_depth: 2,
            output_dir: "out".to_string(),
            cache_dir: "cache".to_string(),
            worker_count: 1,
            quadrature_mode: QuadratureMode::Deterministic,
            depth_guard_override: false,
        }
    }
}

impl RunConfig {
    /// Parse the flat key=value format. Unknown keys are rejected so typos
    /// cannot silently fall back to defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("key '{what}': cannot parse '{value}'"));
        match key {
            "kappa" => self.kappa = value.parse().map_err(|_| bad(key))?,
            "e" => {
                let mut list = Vec::new();
                for part in value.split(',') {
                    list.push(part.trim().parse::<f64>().map_err(|_| bad(key))?);
                }
                self.e = list;
            }
            "p_max" => self.p_max = value.parse().map_err(|_| bad(key))?,
            "n_points" => self.n_points = value.parse().map_err(|_| bad(key))?,
            "j_max" => self.j_max = value.parse().map_err(|_| bad(key))?,
            "n_radial" => self.n_radial = value.parse().map_err(|_| bad(key))?,
            "n_angular" => self.n_angular = value.parse().map_err(|_| bad(key))?,
            "n_max_total" => self.n_max_total = value.parse().map_err(|_| bad(key))?,
            "n_max_per_mode" => self.n_max_per_mode = value.parse().map_err(|_| bad(key))?,
            "spinor_dim" => self.spinor_dim = value.parse().map_err(|_| bad(key))?,
            "cluster_tol" => self.cluster_tol = value.parse().map_err(|_| bad(key))?,
            "fd_step" => self.fd_step = value.parse().map_err(|_| bad(key))?,
            "fd_depth" => self.fd_depth = value.parse().map_err(|_| bad(key))?,
            "output_dir" => self.output_dir = value.to_string(),
            "cache_dir" => self.cache_dir = value.to_string(),
            "worker_count" => self.worker_count = value.parse().map_err(|_| bad(key))?,
            "quadrature_mode" => {
                self.quadrature_mode = match value {
                    "deterministic" => QuadratureMode::Deterministic,
                    other => {
                        if let Some(seed) = other.strip_prefix("monte-carlo:") {
                            QuadratureMode::MonteCarlo {
                                seed: seed.parse().map_err(|_| bad(key))?,
                            }
                        } else {
                            return Err(bad(key));
                        }
                    }
                }
            }
            "depth_guard_override" => {
                self.depth_guard_override = value.parse().map_err(|_| bad(key))?
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.kappa > 0.0) {
            return fail(format!("kappa must be positive, got {}", self.kappa));
        }
        if self.e.is_empty() || self.e.iter().any(|e| *e < 0.0 || !e.is_finite()) {
            return fail("e must be a nonempty list of nonnegative couplings".into());
        }
        if !(self.p_max > 0.0) {
            return fail("p_max must be positive".into());
        }
        if self.n_points == 0 {
            return fail("n_points must be at least 1".into());
        }
        if self.j_max > DEPTH_GUARD && !self.depth_guard_override {
            return Err(Error::DepthGuard {
                requested: self.j_max,
                guard: DEPTH_GUARD,
            });
        }
        if self.n_radial == 0 || self.n_angular == 0 {
            return fail("n_radial and n_angular must be at least 1".into());
        }
        if self.n_angular % 2 != 0 {
            return fail(format!(
                "n_angular must be even so modes close under k -> -k, got {}",
                self.n_angular
            ));
        }
        if self.n_max_per_mode > self.n_max_total {
            return fail("n_max_per_mode cannot exceed n_max_total".into());
        }
        if self.spinor_dim != 2 && self.spinor_dim != 4 {
            return fail(format!("spinor_dim must be 2 or 4, got {}", self.spinor_dim));
        }
        if !(self.cluster_tol > 0.0) || !(self.fd_step > 0.0) {
            return fail("cluster_tol and fd_step must be positive".into());
        }
        if self.worker_count == 0 {
            return fail("worker_count must be at least 1".into());
        }
        Ok(())
    }

    /// Sorted-key normalized rendering; the hash of this string is the
    /// cache/run key.
    pub fn canonical_string(&self) -> String {
        let qm = match &self.quadrature_mode {
            QuadratureMode::Deterministic => "deterministic".to_string(),
            QuadratureMode::MonteCarlo { seed } => format!("monte-carlo:{seed}"),
        };
        let e_list = self
            .e
            .iter()
            .map(|x| format!("{x:e}"))
            .collect::<Vec<_>>()
            .join(",");
        // Keys in lexicographic order, one per line.
        let pairs: Vec<(&str, String)> = vec![
            ("cache_dir", self.cache_dir.clone()),
            ("cluster_tol", format!("{:e}", self.cluster_tol)),
            ("depth_guard_override", self.depth_guard_override.to_string()),
            ("e", e_list),
            ("fd_depth", self.fd_depth.to_string()),
            ("fd_step", format!("{:e}", self.fd_step)),
            ("j_max", self.j_max.to_string()),
            ("kappa", format!("{:e}", self.kappa)),
            ("n_angular", self.n_angular.to_string()),
            ("n_max_per_mode", self.n_max_per_mode.to_string()),
            ("n_max_total", self.n_max_total.to_string()),
            ("n_points", self.n_points.to_string()),
            ("n_radial", self.n_radial.to_string()),
            ("output_dir", self.output_dir.clone()),
            ("p_max", format!("{:e}", self.p_max)),
            ("quadrature_mode", qm),
            ("spinor_dim", self.spinor_dim.to_string()),
            ("worker_count", self.worker_count.to_string()),
        ];
        let mut s = String::new();
        for (k, v) in pairs {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_roundtrip_and_overrides() {
        let text = "
            # experiment
            kappa = 1.0
            e = 0.02, 0.05
            j_max = 3
            quadrature_mode = monte-carlo:42
        ";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.e, vec![0.02, 0.05]);
        assert_eq!(cfg.j_max, 3);
        assert_eq!(cfg.quadrature_mode, QuadratureMode::MonteCarlo { seed: 42 });

        let mut cfg2 = cfg.clone();
        cfg2.set("n_angular", "6").unwrap();
        assert_eq!(cfg2.n_angular, 6);
        assert!(cfg2.set("nonsense", "1").is_err());
    }

    #[test]
    fn canonical_string_is_order_independent() {
        let a = RunConfig::from_text("kappa = 0.5\nj_max = 2").unwrap();
        let b = RunConfig::from_text("j_max = 2\nkappa = 0.5").unwrap();
        assert_eq!(a.canonical_string(), b.canonical_string());
        let c = RunConfig::from_text("j_max = 3\nkappa = 0.5").unwrap();
        assert_ne!(a.canonical_string(), c.canonical_string());
    }

    #[test]
    fn guards_reject_bad_configs() {
        assert!(RunConfig::from_text("kappa = -1").is_err());
        assert!(RunConfig::from_text("n_angular = 3").is_err());
        assert!(RunConfig::from_text("j_max = 13").is_err());
        let deep = RunConfig::from_text("j_max = 13\ndepth_guard_override = true");
        assert!(deep.is_ok());
        assert!(RunConfig::from_text("spinor_dim = 3").is_err());
        assert!(RunConfig::from_text("n_max_per_mode = 4").is_err());
    }
}
