//! TOML run configuration.
//!
//! ```toml
//! [problem]
//! f1 = "-4"
//! f2 = "0"
//! psi1 = "0.25"
//! psi2 = "0.25"
//! g1 = "0"
//! g2 = "0"
//! domain = [-1.0, 1.0, -1.0, 1.0]
//! nx = 65
//! ny = 65
//!
//! [solver]
//! method = "minimal"
//! eps_schedule = [0.5, 0.25, 0.125]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use switchreg::obstacle::EllipticConfig;
use switchreg::regularity::RegularityConfig;
use switchreg::switching::{check_schedule, dyadic_schedule, PenaltyFunction, ProblemData, ProblemSpec, SolverConfig};
use switchreg::{Expression, GridSpec};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub f1: String,
    pub f2: String,
    pub psi1: String,
    pub psi2: String,
    pub g1: String,
    pub g2: String,
    /// `[xmin, xmax, ymin, ymax]`
    #[serde(default = "default_domain")]
    pub domain: [f64; 4],
    #[serde(default = "default_n")]
    pub nx: usize,
    #[serde(default = "default_n")]
    pub ny: usize,
}

fn default_domain() -> [f64; 4] {
    [-1.0, 1.0, -1.0, 1.0]
}

fn default_n() -> usize {
    65
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Penalized,
    Minimal,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub method: SolveMethod,
    pub eps_schedule: Vec<f64>,
    pub tol: f64,
    pub ctol: f64,
    pub omega: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_newton: usize,
    pub max_halvings: usize,
    pub eta: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            method: SolveMethod::Minimal,
            eps_schedule: dyadic_schedule(10),
            tol: s.tol,
            ctol: s.elliptic.ctol,
            omega: None,
            max_iter: None,
            max_newton: s.max_newton,
            max_halvings: s.max_halvings,
            eta: s.penalty.eta,
        }
    }
}

impl SolverSection {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_newton: self.max_newton,
            max_halvings: self.max_halvings,
            penalty: PenaltyFunction { eta: self.eta },
            elliptic: EllipticConfig {
                tol: self.tol,
                ctol: self.ctol,
                max_iter: self.max_iter,
                omega: self.omega,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularitySection {
    /// Probe points `[x, y]`.
    pub probes: Vec<[f64; 2]>,
    pub radii: Option<Vec<f64>>,
    pub min_radius_factor: f64,
    pub exponent_margin: f64,
    pub s_r_squared: f64,
    pub log_r_squared: f64,
    pub a_tol: Option<f64>,
    pub bmo_constant: f64,
}

impl Default for RegularitySection {
    fn default() -> Self {
        let r = RegularityConfig::default();
        Self {
            probes: vec![[0.0, 0.0], [0.5, 0.5]],
            radii: None,
            min_radius_factor: r.min_radius_factor,
            exponent_margin: r.exponent_margin,
            s_r_squared: r.s_r_squared,
            log_r_squared: r.log_r_squared,
            a_tol: None,
            bmo_constant: r.bmo_constant,
        }
    }
}

impl RegularitySection {
    pub fn regularity_config(&self) -> RegularityConfig {
        RegularityConfig {
            radii: self.radii.clone(),
            min_radius_factor: self.min_radius_factor,
            exponent_margin: self.exponent_margin,
            s_r_squared: self.s_r_squared,
            log_r_squared: self.log_r_squared,
            a_tol: self.a_tol,
            bmo_constant: self.bmo_constant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Any of `"csv"`, `"json"`.
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

impl OutputSection {
    pub fn csv(&self) -> bool {
        self.formats.iter().any(|f| f == "csv")
    }
    pub fn json(&self) -> bool {
        self.formats.iter().any(|f| f == "json")
    }
}

/// Data of the non-uniqueness family used by the `nonminimal` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonminimalSection {
    pub psi: String,
    pub m: f64,
    pub g1: String,
    /// One nonnegative perturbation per constructed pair.
    pub q: Vec<String>,
}

impl Default for NonminimalSection {
    fn default() -> Self {
        Self {
            psi: "0.25*(x^2+y^2)".into(),
            m: 1.0,
            g1: "0".into(),
            q: vec!["0".into(), "1".into()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<ProblemSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub regularity: RegularitySection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub nonminimal: NonminimalSection,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks only; the loop and compatibility conditions are
    /// checked when a command builds the problem.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = &self.problem {
            for (name, text) in [
                ("problem.f1", &p.f1),
                ("problem.f2", &p.f2),
                ("problem.psi1", &p.psi1),
                ("problem.psi2", &p.psi2),
                ("problem.g1", &p.g1),
                ("problem.g2", &p.g2),
            ] {
                Expression::parse(text).map_err(|e| invalid(name, e))?;
            }
            self.grid().map_err(|e| invalid("problem.domain", e))?;
        }
        let s = &self.solver;
        check_schedule(&s.eps_schedule).map_err(|e| match e {
            switchreg::Error::Precondition(m) => invalid("solver.eps_schedule", m),
            other => invalid("solver.eps_schedule", other),
        })?;
        s.solver_config().validate().map_err(|e| invalid("solver", e))?;
        let r = &self.regularity;
        if let Some(radii) = &r.radii {
            if radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|&v| !(v > 0.0)) {
                return Err(invalid("regularity.radii", "must be positive and strictly decreasing"));
            }
        }
        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                return Err(invalid("output.formats", format!("unknown format {f:?}")));
            }
        }
        let n = &self.nonminimal;
        for (name, text) in [("nonminimal.psi", &n.psi), ("nonminimal.g1", &n.g1)] {
            Expression::parse(text).map_err(|e| invalid(name, e))?;
        }
        for q in &n.q {
            Expression::parse(q).map_err(|e| invalid("nonminimal.q", e))?;
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<&ProblemSection, CliError> {
        self.problem
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [problem] section".into()))
    }

    /// The problem grid, or `[-1, 1]²` with 65 nodes per axis when there is
    /// no problem section.
    pub fn grid(&self) -> Result<GridSpec, switchreg::Error> {
        match &self.problem {
            Some(p) => {
                let [x0, x1, y0, y1] = p.domain;
                GridSpec::new(x0, x1, y0, y1, p.nx, p.ny)
            }
            None => GridSpec::square(1.0, default_n()),
        }
    }

    /// Replaces the node counts of the problem section (`--n`).
    pub fn override_n(&mut self, n: usize) {
        if let Some(p) = &mut self.problem {
            p.nx = n;
            p.ny = n;
        }
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, CliError> {
        let p = self.problem()?;
        let grid = self.grid().map_err(|e| invalid("problem", e))?;
        let texts = ProblemData {
            f1: p.f1.as_str(),
            f2: p.f2.as_str(),
            psi1: p.psi1.as_str(),
            psi2: p.psi2.as_str(),
            g1: p.g1.as_str(),
            g2: p.g2.as_str(),
        };
        ProblemSpec::parse(texts, grid).map_err(|e| CliError::Config(format!("problem: {e}")))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZERO: &str = r#"
[problem]
f1 = "0"
f2 = "0"
psi1 = "0"
psi2 = "0"
g1 = "0"
g2 = "0"
"#;

    #[test]
    fn defaults_are_filled() {
        let cfg = RunConfig::parse(ZERO).unwrap();
        let p = cfg.problem.as_ref().unwrap();
        assert_eq!(p.domain, [-1.0, 1.0, -1.0, 1.0]);
        assert_eq!((p.nx, p.ny), (65, 65));
        assert_eq!(cfg.solver.method, SolveMethod::Minimal);
        assert_eq!(cfg.solver.eps_schedule.len(), 10);
        assert_eq!(cfg.output.dir, PathBuf::from("out"));
    }

    #[test]
    fn loop_violation_passes_load() {
        let text = ZERO.replace("psi1 = \"0\"", "psi1 = \"-1\"");
        assert!(RunConfig::parse(&text).is_ok());
    }

    #[test]
    fn increasing_schedule_is_rejected() {
        let text = format!("{ZERO}\n[solver]\neps_schedule = [0.1, 1.0]\n");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("schedule not decreasing"), "{err}");
        assert!(err.contains("solver.eps_schedule"), "{err}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = format!("{ZERO}\n[solver]\nmethod = \n");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 11"), "{err}");
    }

    #[test]
    fn bad_expression_names_field() {
        let text = ZERO.replace("g2 = \"0\"", "g2 = \"min(x,\"");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("problem.g2"), "{err}");
    }

    #[test]
    fn unknown_method_is_rejected() {
        let text = format!("{ZERO}\n[solver]\nmethod = \"newton\"\n");
        assert!(RunConfig::parse(&text).is_err());
    }
}
