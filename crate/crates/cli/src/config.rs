//! Run configuration files.

use std::path::{Path, PathBuf};

use levi_hull::attach::{SolveOptions, DEFAULT_MAX_ITER};
use levi_hull::export::{ExportFormat, DEFAULT_EXPORT_ANGLES};
use levi_hull::indices::{DEFAULT_DET_THRESHOLD, DEFAULT_FRAME_NODES, DEFAULT_T_STEP};
use levi_hull::locus::DEFAULT_S_GRID;
use levi_hull::perturbation::{DEFAULT_NEWTON_TOL, DEFAULT_TUBE_RADIUS, FORMAT_VERSION};
use serde::{Deserialize, Serialize};

use crate::error::InputError;

pub const ORDER_RANGE: (usize, usize) = (8, 512);

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_s_grid() -> usize {
    DEFAULT_S_GRID
}

fn default_tube_radius() -> f64 {
    DEFAULT_TUBE_RADIUS
}

fn default_newton_tol() -> f64 {
    DEFAULT_NEWTON_TOL
}

fn default_frame_nodes() -> usize {
    DEFAULT_FRAME_NODES
}

fn default_t_step() -> f64 {
    DEFAULT_T_STEP
}

fn default_det_threshold() -> f64 {
    DEFAULT_DET_THRESHOLD
}

fn default_export_angles() -> usize {
    DEFAULT_EXPORT_ANGLES
}

fn default_formats() -> Vec<ExportFormat> {
    vec![ExportFormat::Json]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<ExportFormat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format: String,
    pub dimension: usize,
    pub order: usize,
    pub resolution: f64,
    pub t_max: f64,
    pub solver_tol: f64,
    pub locus_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_s_grid")]
    pub s_grid: usize,
    /// Worker threads; `0` uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_tube_radius")]
    pub tube_radius: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_frame_nodes")]
    pub frame_nodes: usize,
    #[serde(default = "default_t_step")]
    pub t_step: f64,
    #[serde(default = "default_det_threshold")]
    pub det_threshold: f64,
    #[serde(default = "default_export_angles")]
    pub export_angles: usize,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, InputError> {
        let config: Self = toml::from_str(text).map_err(|e| InputError(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, InputError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), InputError> {
        let fail = |msg: String| Err(InputError(format!("config: {msg}")));
        if self.format != FORMAT_VERSION {
            return fail(format!("format {:?} is not {FORMAT_VERSION:?}", self.format));
        }
        if self.dimension < 2 {
            return fail(format!("dimension {} must be at least 2", self.dimension));
        }
        if !(ORDER_RANGE.0..=ORDER_RANGE.1).contains(&self.order) {
            return fail(format!(
                "order {} outside [{}, {}]",
                self.order, ORDER_RANGE.0, ORDER_RANGE.1
            ));
        }
        if !(self.t_max > 0.0 && self.t_max < 1.0) {
            return fail(format!("t_max {} must lie in (0, 1)", self.t_max));
        }
        if !(self.resolution > 0.0) {
            return fail(format!("resolution {} must be positive", self.resolution));
        }
        for (name, v) in [
            ("solver_tol", self.solver_tol),
            ("locus_tol", self.locus_tol),
            ("newton_tol", self.newton_tol),
            ("t_step", self.t_step),
            ("det_threshold", self.det_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} {v} must be positive"));
            }
        }
        if !(self.tube_radius > 0.0 && self.tube_radius < 1.0) {
            return fail(format!("tube_radius {} must lie in (0, 1)", self.tube_radius));
        }
        if self.s_grid < 3 {
            return fail(format!("s_grid {} must be at least 3", self.s_grid));
        }
        if self.frame_nodes < 2 * self.order + 1 {
            return fail(format!(
                "frame_nodes {} cannot resolve order {}",
                self.frame_nodes, self.order
            ));
        }
        if self.export_angles < 3 {
            return fail(format!("export_angles {} must be at least 3", self.export_angles));
        }
        Ok(())
    }

    pub fn solve_options(&self) -> SolveOptions {
        let mut opts = SolveOptions::new(self.order)
            .with_tol(self.solver_tol)
            .with_t_max(self.t_max);
        opts.max_iter = self.max_iter;
        opts
    }

    /// Canonical text used for fingerprints.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
format = "levi-hull/1"
dimension = 3
order = 32
resolution = 0.1
t_max = 0.9
solver_tol = 1e-10
locus_tol = 1e-10

[output]
dir = "out"
formats = ["json", "vtk"]
"#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.s_grid, 256);
        assert_eq!(c.workers, 0);
        assert_eq!(c.output.formats, vec![ExportFormat::Json, ExportFormat::Vtk]);
        assert_eq!(RunConfig::from_toml_str(&c.canonical()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to) in [
            ("order = 32", "order = 4"),
            ("order = 32", "order = 1024"),
            ("t_max = 0.9", "t_max = 1.0"),
            ("solver_tol = 1e-10", "solver_tol = 0.0"),
            ("dimension = 3", "dimension = 1"),
            ("levi-hull/1", "levi-hull/2"),
            ("resolution = 0.1", "resolution = 0.1\nbogus = 1"),
        ] {
            let text = SAMPLE.replace(from, to);
            assert!(RunConfig::from_toml_str(&text).is_err(), "{to}");
        }
    }
}
