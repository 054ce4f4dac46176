//! Run configuration files (TOML).
//!
//! ```toml
//! model = "qp_demo.model.toml"
//! output = "out/qp_demo"
//! threads = 0
//! seed = 0
//!
//! [hull]
//! n_trunc = 32
//!
//! [foliation]
//! points = 101
//!
//! [verify]
//! betas = 21
//! max_window = 15
//! ```
//!
//! Relative paths resolve against the directory of the config file. Every
//! section and key is optional except `model`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foliation::{default_a4_targets, uniform_grid};
use crate::groundstate::{MinimizeOptions, VerifyOptions};
use crate::hull::solver::{EpsilonSchedule, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads; 0 lets the pool pick.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub hull: HullSection,
    #[serde(default)]
    pub foliation: FoliationSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub report: ReportSection,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HullSection {
    pub n_trunc: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub divisor_floor: f64,
    /// First continuation amplitude; the target amplitude when absent.
    pub epsilon_start: Option<f64>,
    /// Smallest continuation step before giving up, relative to the target.
    pub min_step_fraction: f64,
    pub dense_below: usize,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    pub verify_refinement: usize,
}

impl Default for HullSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        HullSection {
            n_trunc: o.n_trunc,
            tol: o.tol,
            max_iter: o.max_iter,
            divisor_floor: o.divisor_floor,
            epsilon_start: None,
            min_step_fraction: 1.0 / 1024.0,
            dense_below: o.dense_below,
            gmres_restart: o.gmres_restart,
            gmres_max_iter: o.gmres_max_iter,
            verify_refinement: o.verify_refinement,
        }
    }
}

impl HullSection {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            n_trunc: self.n_trunc,
            tol: self.tol,
            max_iter: self.max_iter,
            divisor_floor: self.divisor_floor,
            dense_below: self.dense_below,
            gmres_restart: self.gmres_restart,
            gmres_max_iter: self.gmres_max_iter,
            verify_refinement: self.verify_refinement,
        }
    }

    pub fn schedule(&self, target: f64) -> EpsilonSchedule {
        EpsilonSchedule {
            initial: self.epsilon_start.unwrap_or(target),
            target,
            min_step: target.abs() * self.min_step_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FoliationSection {
    /// Explicit β grid; overrides `points`, `range` and `tail`.
    pub grid: Option<Vec<f64>>,
    pub points: usize,
    pub range: [f64; 2],
    /// Extra members at `±tail` witnessing divergence.
    pub tail: f64,
    /// Half-width of the site block the axioms are checked on.
    pub radius: i64,
    pub equilibrium_tol: Option<f64>,
    pub a4_targets: Vec<f64>,
}

impl Default for FoliationSection {
    fn default() -> Self {
        FoliationSection {
            grid: None,
            points: 101,
            range: [-2.0, 2.0],
            tail: 1e3,
            radius: 50,
            equilibrium_tol: None,
            a4_targets: default_a4_targets(),
        }
    }
}

impl FoliationSection {
    pub fn beta_grid(&self) -> Vec<f64> {
        if let Some(g) = &self.grid {
            return g.clone();
        }
        let mut g = Vec::with_capacity(self.points + 2);
        if self.tail > 0.0 {
            g.push(-self.tail);
        }
        g.extend(uniform_grid(self.range[0], self.range[1], self.points));
        if self.tail > 0.0 {
            g.push(self.tail);
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Hull file of a quasi-periodic family; defaults to `hull.toml` in
    /// the output directory.
    pub hull: Option<PathBuf>,
    /// Explicit β values; overrides `betas` and `beta_range`.
    pub beta_values: Option<Vec<f64>>,
    pub betas: usize,
    pub beta_range: [f64; 2],
    pub max_window: usize,
    pub gamma_tol: f64,
    pub stationarity_tol: f64,
    pub random_probes: usize,
    pub max_iter: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            hull: None,
            beta_values: None,
            betas: 21,
            beta_range: [-1.0, 1.0],
            max_window: 15,
            gamma_tol: 1e-8,
            stationarity_tol: 1e-8,
            random_probes: 8,
            max_iter: MinimizeOptions::default().max_iter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    /// Any of `csv`, `json`.
    pub formats: Vec<String>,
    /// Samples of the hull along its one-dimensional section.
    pub section_points: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            formats: vec!["csv".into(), "json".into()],
            section_points: 256,
        }
    }
}

impl ReportSection {
    pub fn csv(&self) -> bool {
        self.formats.iter().any(|f| f == "csv")
    }

    pub fn json(&self) -> bool {
        self.formats.iter().any(|f| f == "json")
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: None,
            output: default_output(),
            threads: 0,
            seed: 0,
            hull: HullSection::default(),
            foliation: FoliationSection::default(),
            verify: VerifySection::default(),
            report: ReportSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    /// Loads a config and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        let mut c = Self::from_toml(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let Some(m) = c.model.as_mut() {
            fix(m);
        }
        fix(&mut c.output);
        if let Some(h) = c.verify.hull.as_mut() {
            fix(h);
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Contract(m.into()));
        let positive = [
            ("hull.tol", self.hull.tol),
            ("hull.min_step_fraction", self.hull.min_step_fraction),
            ("verify.gamma_tol", self.verify.gamma_tol),
            ("verify.stationarity_tol", self.verify.stationarity_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if self.foliation.equilibrium_tol.is_some_and(|t| !(t > 0.0)) {
            return bad("foliation.equilibrium_tol must be positive");
        }
        if !(self.hull.divisor_floor >= 0.0) {
            return bad("hull.divisor_floor must be nonnegative");
        }
        if self.verify.max_window == 0 {
            return bad("verify.max_window must be at least 1");
        }
        if self.hull.n_trunc == 0 {
            return bad("hull.n_trunc must be at least 1");
        }
        for (name, g) in [("foliation grid", self.foliation.beta_grid()), ("verify betas", self.verify_betas())] {
            if g.is_empty() || g.windows(2).any(|w| !(w[0] < w[1])) || g.iter().any(|b| !b.is_finite()) {
                return bad(&format!("{name} must be nonempty and strictly increasing"));
            }
        }
        for f in &self.report.formats {
            if f != "csv" && f != "json" {
                return bad(&format!("unknown report format `{f}`"));
            }
        }
        Ok(())
    }

    pub fn verify_betas(&self) -> Vec<f64> {
        match &self.verify.beta_values {
            Some(v) => v.clone(),
            None => uniform_grid(self.verify.beta_range[0], self.verify.beta_range[1], self.verify.betas),
        }
    }

    pub fn verify_options(&self, sign_tol: f64, edge_threshold: f64) -> VerifyOptions {
        VerifyOptions {
            betas: self.verify_betas(),
            foliation_grid: self.foliation.beta_grid(),
            max_window: self.verify.max_window,
            gamma_tol: self.verify.gamma_tol,
            stationarity_tol: self.verify.stationarity_tol,
            equilibrium_tol: self.foliation.equilibrium_tol,
            sign_tol,
            edge_threshold,
            a4_targets: self.foliation.a4_targets.clone(),
            random_probes: self.verify.random_probes,
            seed: self.seed,
            foliation_radius: self.foliation.radius,
            minimize: MinimizeOptions {
                max_iter: self.verify.max_iter,
                stationarity_tol: self.verify.stationarity_tol,
                ..MinimizeOptions::default()
            },
        }
    }

    pub fn hull_path(&self) -> PathBuf {
        self.verify.hull.clone().unwrap_or_else(|| self.output.join("hull.toml"))
    }
}
