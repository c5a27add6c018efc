use std::path::{Path, PathBuf};

use maslov_core::flow::{turing_matrix, Boundary, Grid, Potential, Problem, Tolerances};
use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        matrix: Vec<Vec<f64>>,
    },
    /// Piecewise-linear between nodes.
    Sampled {
        xs: Vec<f64>,
        values: Vec<Vec<Vec<f64>>>,
    },
    TuringExample,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySpec {
    Dirichlet,
    Neumann,
    Robin(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx_per_unit: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nlambda: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qr_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_nx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_nlambda: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TolSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_cross: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub double_root: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_dir: Option<PathBuf>,
}

/// Either an explicit list or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Range(RangeSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl RangeSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || CliError::Config(format!("expected START:STOP:STEP, got '{s}'"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
        Ok(RangeSpec { start: num(parts[0])?, stop: num(parts[1])?, step: num(parts[2])? })
    }

    pub fn expand(&self) -> Result<Vec<f64>, CliError> {
        let RangeSpec { start, stop, step } = *self;
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(CliError::Config(format!("invalid range {start}:{stop}:{step}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(CliError::Config(format!("range {start}:{stop}:{step} has too many values")));
        }
        // Multiply rather than accumulate so values are reproducible.
        Ok((0..count).map(|k| start + k as f64 * step).collect())
    }
}

impl Values {
    pub fn expand(&self) -> Result<Vec<f64>, CliError> {
        match self {
            Values::List(v) if v.is_empty() => Err(CliError::Config("empty value list".into())),
            Values::List(v) => Ok(v.clone()),
            Values::Range(r) => r.expand(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Lambdas at which per-x psi traces are written.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Values>,
    /// Rows per psi trace before refinement.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_samples: Option<usize>,
    /// Second diffusion coefficient values (Turing sweeps).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<Values>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<Values>,
}

fn dirichlet() -> BoundarySpec {
    BoundarySpec::Dirichlet
}

fn dirichlet_name() -> String {
    "dirichlet".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub length: f64,
    pub diffusion: Vec<f64>,
    pub potential: PotentialSpec,
    #[serde(default = "dirichlet")]
    pub bc0: BoundarySpec,
    #[serde(default = "dirichlet_name")]
    pub bc1: String,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: TolSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(default = "yes")]
    pub scan_interior: bool,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!("{what} must be a nonempty square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl PotentialSpec {
    pub fn to_potential(&self) -> Result<Potential, CliError> {
        Ok(match self {
            PotentialSpec::Constant { matrix: m } => Potential::Constant(matrix(m, "potential matrix")?),
            PotentialSpec::Sampled { xs, values } => Potential::Sampled {
                xs: xs.clone(),
                values: values.iter().map(|m| matrix(m, "sampled potential value")).collect::<Result<_, _>>()?,
            },
            PotentialSpec::TuringExample => Potential::TuringExample,
        })
    }

    /// The constant 2x2 reaction matrix, when there is one.
    pub fn matrix2(&self) -> Option<Matrix2<f64>> {
        match self {
            PotentialSpec::TuringExample => Some(turing_matrix()),
            PotentialSpec::Constant { matrix: m } if m.len() == 2 && m.iter().all(|r| r.len() == 2) => {
                Some(Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]))
            }
            _ => None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let toml_ext = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let cfg: Config = if toml_ext {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.bc1 != "dirichlet" {
            return Err(CliError::Config(format!("bc1 must be \"dirichlet\", got \"{}\"", self.bc1)));
        }
        if let Some(l) = self.lambda_max {
            if !(l > 0.0) || !l.is_finite() {
                return Err(CliError::Config(format!("lambda_max must be positive, got {l}")));
            }
        }
        if self.sweep.x_samples.is_some_and(|n| n < 2) {
            return Err(CliError::Config("sweep.x_samples must be at least 2".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        let g = &self.grid;
        let d = Grid::default();
        Grid {
            nx_per_unit: g.nx_per_unit.unwrap_or(d.nx_per_unit),
            nlambda: g.nlambda.unwrap_or(d.nlambda),
            qr_every: g.qr_every.unwrap_or(d.qr_every),
            refine_depth: g.refine_depth.unwrap_or(d.refine_depth),
            scan_nx: g.scan_nx.unwrap_or(d.scan_nx),
            scan_nlambda: g.scan_nlambda.unwrap_or(d.scan_nlambda),
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        let t = &self.tolerances;
        let d = Tolerances::default();
        Tolerances {
            eps_cross: t.eps_cross.unwrap_or(d.eps_cross),
            root: t.root.unwrap_or(d.root),
            merge: t.merge.unwrap_or(d.merge),
            double_root: t.double_root.unwrap_or(d.double_root),
        }
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let g = self.grid();
        if g.nx_per_unit == 0 || g.nlambda < 2 || g.qr_every == 0 || g.scan_nx < 2 || g.scan_nlambda < 2 {
            return Err(CliError::Config("grid sizes must be positive (nlambda, scan sizes at least 2)".into()));
        }
        let t = self.tolerances();
        if [t.eps_cross, t.root, t.merge, t.double_root].iter().any(|v| !(*v > 0.0)) {
            return Err(CliError::Config("tolerances must be positive".into()));
        }
        let bc0 = match &self.bc0 {
            BoundarySpec::Dirichlet => Boundary::Dirichlet,
            BoundarySpec::Neumann => Boundary::Neumann,
            BoundarySpec::Robin(m) => Boundary::Robin(matrix(m, "Robin matrix")?),
        };
        let p = Problem::new(self.length, self.diffusion.clone(), self.potential.to_potential()?, bc0)?;
        Ok(p.with_grid(g).with_tolerances(t))
    }

    /// Applies command-line overrides.
    pub fn override_with(&mut self, lambda_max: Option<f64>, nx: Option<usize>, tol_cross: Option<f64>) {
        if lambda_max.is_some() {
            self.lambda_max = lambda_max;
        }
        if nx.is_some() {
            self.grid.nx_per_unit = nx;
        }
        if tol_cross.is_some() {
            self.tolerances.eps_cross = tol_cross;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Config, CliError> {
        let c: Config = serde_json::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(
            r#"{"length": 2, "diffusion": [1, 1], "potential": {"type": "constant", "matrix": [[9, 0], [0, 1]]}}"#,
        )
        .unwrap();
        assert_eq!(c.bc0, BoundarySpec::Dirichlet);
        assert!(c.scan_interior);
        assert_eq!(c.grid(), Grid::default());
        assert_eq!(c.problem().unwrap().n(), 2);
    }

    #[test]
    fn unknown_keys_and_bad_bc1_rejected() {
        let base = r#""length": 2, "diffusion": [1], "potential": {"type": "turing-example"}"#;
        assert!(parse(&format!("{{{base}, \"colour\": 1}}")).is_err());
        assert!(parse(&format!("{{{base}, \"bc1\": \"neumann\"}}")).is_err());
        assert!(parse(&format!("{{{base}, \"grid\": {{\"nx\": 3}}}}")).is_err());
        assert!(parse(&format!("{{{base}, \"bc1\": \"dirichlet\"}}")).is_ok());
    }

    #[test]
    fn toml_maps_to_same_schema() {
        let t = "length = 2.0\ndiffusion = [1.0, 1.0]\nbc0 = { robin = [[1.0, 0.0], [0.0, 2.0]] }\n\
                 [potential]\ntype = \"constant\"\nmatrix = [[9.0, 0.0], [0.0, 1.0]]\n";
        let c: Config = toml::from_str(t).unwrap();
        assert_eq!(c.bc0, BoundarySpec::Robin(vec![vec![1.0, 0.0], vec![0.0, 2.0]]));
        assert!(matches!(c.problem().unwrap().bc0, Boundary::Robin(_)));
    }

    #[test]
    fn ranges_expand_inclusively() {
        let r = RangeSpec::parse("5:20:0.5").unwrap().expand().unwrap();
        assert_eq!(r.len(), 31);
        assert_eq!(r[30], 20.0);
        assert!(RangeSpec::parse("1:0:1").unwrap().expand().is_err());
        assert!(RangeSpec::parse("1:2").is_err());
    }

    #[test]
    fn non_square_potential_is_config_error() {
        let c =
            parse(r#"{"length": 2, "diffusion": [1, 1], "potential": {"type": "constant", "matrix": [[9, 0], [0]]}}"#)
                .unwrap();
        assert!(matches!(c.problem(), Err(CliError::Config(_))));
    }
}
