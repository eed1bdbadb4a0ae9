//! Run configuration: one JSON document covering the nonlinearity, the
//! truncation, the potential, the grid, the solver, the sweep and the output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EpsProblem, NewtonOptions, DEFAULT_MARGIN};
use crate::minmax::ConeOptions;
use crate::nonlinearity::{Composite, NonlinearitySpec, TruncationParams};
use crate::potential::{
    classify_critical_point, select_radius_r1, CriticalPointClass, PotentialSpec, RadiusOptions,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    /// Slope of `f~`; `0.9 (1 - 2/mu) alpha1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    pub radii: [f64; 5],
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            a: None,
            radii: [0.2, 0.5, 0.6, 0.7, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    #[serde(flatten)]
    pub spec: PotentialSpec,
    /// Candidates for `R1`, scanned in order; empty checks `radii[1]` only.
    #[serde(default)]
    pub radius_candidates: Vec<f64>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            spec: PotentialSpec::gaussian_saddle_skewed(0.3, 0.1),
            radius_candidates: vec![0.5, 0.45, 0.55],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    /// Box half-width is `R4 / eps + L_margin`.
    #[serde(rename = "L_margin")]
    pub l_margin: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 256,
            l_margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = NewtonOptions::default();
        Self {
            tol: o.tol,
            max_iter: o.max_iter,
            linear_tol: o.linear_tol,
            linear_max_iter: o.linear_max_iter,
        }
    }
}

impl SolverConfig {
    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            linear_tol: self.linear_tol,
            linear_max_iter: self.linear_max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub eps_list: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps_list: vec![0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    /// Raw field dumps with sidecars.
    Bin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            formats: vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Bin],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub nonlinearity: NonlinearitySpec,
    pub truncation: TruncationConfig,
    pub potential: PotentialConfig,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    pub cone: ConeOptions,
    /// Points of the degree scan along the cone.
    pub degree_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nonlinearity: NonlinearitySpec::pure_power(3.0),
            truncation: TruncationConfig::default(),
            potential: PotentialConfig::default(),
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
            cone: ConeOptions::default(),
            degree_points: 5,
        }
    }
}

/// A validated configuration with every derived quantity filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub potential: PotentialSpec,
    pub composite: Composite,
    pub critical_point: CriticalPointClass,
    /// `R1` after the candidate scan.
    pub radius_r1: f64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut c: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
        c.potential.spec.rebuild();
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serialises")
    }

    /// `radius_candidates`, or the configured `R1` alone.
    pub fn r1_candidates(&self) -> Vec<f64> {
        if self.potential.radius_candidates.is_empty() {
            vec![self.truncation.radii[1]]
        } else {
            self.potential.radius_candidates.clone()
        }
    }

    /// Checks that do not need the potential analysis.
    pub fn validate_basic(&self) -> Result<()> {
        let dim = self.potential.spec.dim;
        self.nonlinearity.validate(dim)?;
        self.potential.spec.validate()?;
        let g = &self.grid;
        if g.n < 16 || !g.n.is_multiple_of(2) {
            return Err(Error::Config(format!("grid.n must be even and >= 16, got {}", g.n)));
        }
        if !(g.l_margin >= 0.0 && g.l_margin.is_finite()) {
            return Err(Error::Config(format!("grid.L_margin must be >= 0, got {}", g.l_margin)));
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.linear_tol > 0.0) || s.max_iter == 0 || s.linear_max_iter == 0 {
            return Err(Error::Config("solver tolerances and iteration caps must be positive".into()));
        }
        if let Some(e) = self.sweep.eps_list.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::Config(format!("sweep eps {e} outside (0, 1]")));
        }
        if self.cone.t_points < 3 || self.cone.xi_points < 2 || self.cone.degree_circle_points < 8 {
            return Err(Error::Config("cone sampling too coarse".into()));
        }
        if self.degree_points == 0 {
            return Err(Error::Config("degree_points must be positive".into()));
        }
        Ok(())
    }

    /// Full validation: `R1` selection, the slope bound, radii ordering and
    /// the classification of the critical point at the origin.
    pub fn resolve(&self) -> Result<Resolved> {
        self.validate_basic()?;
        let mut potential = self.potential.spec.clone();
        potential.rebuild();
        let mut radii = self.truncation.radii;
        radii[1] = select_radius_r1(&potential, &self.r1_candidates(), &RadiusOptions::default())?;
        let mu = self.nonlinearity.mu;
        let a = self
            .truncation
            .a
            .unwrap_or_else(|| TruncationParams::default_slope(mu, potential.alpha1));
        let params = TruncationParams {
            a,
            radii,
            alpha1: potential.alpha1,
        };
        params.validate(mu)?;
        let composite = Composite::new(self.nonlinearity.clone(), params)?;
        let critical_point = classify_critical_point(&potential, 1e-10)
            .map_err(|e| Error::Config(format!("critical point at the origin: {e}")))?;
        Ok(Resolved {
            config: self.clone(),
            potential,
            composite,
            critical_point,
            radius_r1: radii[1],
        })
    }
}

impl Resolved {
    pub fn problem(&self, eps: f64) -> Result<EpsProblem> {
        EpsProblem::new(
            eps,
            self.composite.clone(),
            self.potential.clone(),
            self.critical_point.e_basis.clone(),
            self.config.grid.n,
            self.config.grid.l_margin,
        )
    }
}
