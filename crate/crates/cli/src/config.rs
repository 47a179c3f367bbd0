//! key=value configuration file: overrides for the fit settings and the
//! curve grids. Command-line flags override the file; defaults follow the
//! standard grid (a from 0.2 to 20 by 0.2).

use std::path::Path;

use anyhow::{bail, Context, Result};
use edugamma::fitter::FitConfig;

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_step: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub obj_tol: f64,
    pub threads: Option<usize>,
    pub curves_x_max: f64,
    pub curves_points: usize,
    pub lorenz_points: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        CliConfig {
            grid_min: fit.grid_min,
            grid_max: fit.grid_max,
            grid_step: fit.grid_step,
            max_iter: fit.max_iter,
            grad_tol: fit.grad_tol,
            obj_tol: fit.obj_tol,
            threads: None,
            curves_x_max: 25.0,
            curves_points: 401,
            lorenz_points: 1001,
        }
    }
}

impl CliConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config = CliConfig::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key=value, got '{line}'", path.display(), idx + 1);
            };
            let key = key.trim();
            let value = value.trim();
            let parse_f64 = || -> Result<f64> {
                value.parse().with_context(|| {
                    format!("{}:{}: '{key}' needs a number, got '{value}'", path.display(), idx + 1)
                })
            };
            let parse_usize = || -> Result<usize> {
                value.parse().with_context(|| {
                    format!("{}:{}: '{key}' needs an integer, got '{value}'", path.display(), idx + 1)
                })
            };
            match key {
                "grid_min" => config.grid_min = parse_f64()?,
                "grid_max" => config.grid_max = parse_f64()?,
                "grid_step" => config.grid_step = parse_f64()?,
                "max_iter" => config.max_iter = parse_usize()?,
                "grad_tol" => config.grad_tol = parse_f64()?,
                "obj_tol" => config.obj_tol = parse_f64()?,
                "threads" => {
                    let n = parse_usize()?;
                    if n == 0 {
                        bail!("{}:{}: threads must be at least 1", path.display(), idx + 1);
                    }
                    config.threads = Some(n);
                }
                "curves_x_max" => config.curves_x_max = parse_f64()?,
                "curves_points" => config.curves_points = parse_usize()?,
                "lorenz_points" => config.lorenz_points = parse_usize()?,
                other => bail!("{}:{}: unknown key '{other}'", path.display(), idx + 1),
            }
        }
        config.validate(path)?;
        Ok(config)
    }

    fn validate(&self, path: &Path) -> Result<()> {
        if !(self.grid_min > 0.0 && self.grid_max >= self.grid_min && self.grid_step > 0.0) {
            bail!(
                "{}: grid must satisfy 0 < grid_min <= grid_max with grid_step > 0",
                path.display()
            );
        }
        if self.max_iter == 0 {
            bail!("{}: max_iter must be at least 1", path.display());
        }
        Ok(())
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            grid_min: self.grid_min,
            grid_max: self.grid_max,
            grid_step: self.grid_step,
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
            obj_tol: self.obj_tol,
        }
    }
}
