//! JSON experiment configs and their validation into library objects.

use std::path::Path;

use heis_area::calculus::DefiningFunction;
use heis_area::graph::{SurfaceModel, WBox};
use heis_area::group::Point;
use heis_area::measure::{Budget, NegativeControl, Schedule};
use heis_area::metric::{ball_convexity_probe, calibrate_constant, validate_distance, HomogeneousDistance};
use heis_area::split::{HorizontalSubgroup, Split, VerticalSubgroup};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dimension `n` of `H^n`.
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub distance: DistanceSpec,
    #[serde(default)]
    pub surface: Option<SurfaceSpec>,
    /// Vertical planes for `spherical-factor`.
    #[serde(default)]
    pub subgroups: Option<SubgroupSpec>,
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub budget: BudgetOverrides,
    /// Number of random triples for `projection-lemma`.
    #[serde(default = "twenty")]
    pub triples: usize,
    #[serde(default)]
    pub negative_control: Option<ControlSpec>,
    /// Output directory, overridden by `--out`.
    #[serde(default)]
    pub output: Option<String>,
}

fn one() -> usize {
    1
}

fn twenty() -> usize {
    20
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistanceSpec {
    Koranyi {
        #[serde(default = "sixteen")]
        c: f64,
        #[serde(default)]
        convex_ball: Option<bool>,
    },
    /// `eps` defaults to the calibrated constant.
    Dinf {
        #[serde(default)]
        eps: Option<f64>,
        #[serde(default)]
        convex_ball: Option<bool>,
    },
}

fn sixteen() -> f64 {
    16.0
}

impl Default for DistanceSpec {
    fn default() -> Self {
        DistanceSpec::Koranyi { c: 16.0, convex_ball: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub f: Vec<String>,
    #[serde(default)]
    pub level: Option<Vec<f64>>,
    /// `"coordinate"` or a list of orthonormal horizontal vectors of length `2n`.
    #[serde(rename = "V", default)]
    pub v: Option<SubgroupBasis>,
    /// Horizontal generators of `W`; defaults to the orthogonal complement of `V`.
    #[serde(rename = "W", default)]
    pub w: Option<Vec<Vec<f64>>>,
    #[serde(rename = "U")]
    pub u: BoxSpec,
    /// Sample points as `W`-coordinates.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SubgroupBasis {
    Named(String),
    Vectors(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub center: Vec<f64>,
    pub half: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SubgroupSpec {
    /// `{"random": count, "k": codimension}`: vertical planes orthogonal to
    /// random horizontal subgroups.
    Random {
        random: usize,
        #[serde(default = "one")]
        k: usize,
    },
    /// Explicit lists of horizontal generators.
    Explicit(Vec<Vec<Vec<f64>>>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub t0: f64,
    pub gamma: f64,
    pub rungs: usize,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetOverrides {
    pub section_samples: Option<usize>,
    pub final_samples: Option<usize>,
    pub candidates: Option<usize>,
    pub refine_top: Option<usize>,
    pub nm_evals: Option<usize>,
    pub pool_samples: Option<usize>,
    pub ball_samples: Option<usize>,
    pub starts: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    /// Orthonormal basis of a plane of `R^{2n+1}` replacing the tangent
    /// plane in the spherical-factor column.
    pub wrong_plane: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum BudgetPreset {
    Low,
    Default,
    High,
}

impl BudgetPreset {
    pub fn budget(self) -> Budget {
        match self {
            BudgetPreset::Low => Budget::low(),
            BudgetPreset::Default => Budget::default(),
            BudgetPreset::High => Budget::high(),
        }
    }

    /// Relative tolerance for Monte Carlo comparisons; the low preset widens
    /// it and the wider value is reported alongside the verdict.
    pub fn mc_tolerance(self) -> f64 {
        match self {
            BudgetPreset::Low => 0.10,
            _ => 0.05,
        }
    }
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
}

fn field<T>(path: &str, r: heis_area::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(format!("{path}: {e}")))
}

/// A surface with its validated sample points.
pub struct Surface {
    pub label: String,
    pub model: SurfaceModel,
    pub points: Vec<Point>,
}

impl ExperimentConfig {
    pub fn budget(&self, preset: BudgetPreset) -> Budget {
        let mut b = preset.budget();
        let o = &self.budget;
        let set = |slot: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut b.section_samples, o.section_samples);
        set(&mut b.final_samples, o.final_samples);
        set(&mut b.candidates, o.candidates);
        set(&mut b.refine_top, o.refine_top);
        set(&mut b.nm_evals, o.nm_evals);
        set(&mut b.pool_samples, o.pool_samples);
        set(&mut b.ball_samples, o.ball_samples);
        set(&mut b.starts, o.starts);
        b
    }

    pub fn schedule(&self) -> Result<Schedule, CliError> {
        let Some(s) = &self.schedule else { return Ok(Schedule::default()) };
        if !(s.t0 > 0.0 && s.gamma > 0.0 && s.gamma < 1.0 && s.rungs > 0) {
            return Err(CliError::Config("schedule: need t0 > 0, 0 < gamma < 1, rungs >= 1".into()));
        }
        Ok(Schedule { t0: s.t0, gamma: s.gamma, rungs: s.rungs })
    }

    pub fn distance(&self) -> Result<HomogeneousDistance, CliError> {
        let n = self.check_n()?;
        let (d, convex) = match &self.distance {
            DistanceSpec::Koranyi { c, convex_ball } => (field("distance.c", HomogeneousDistance::koranyi(*c))?, *convex_ball),
            DistanceSpec::Dinf { eps, convex_ball } => {
                let eps = match eps {
                    Some(e) => *e,
                    None => field("distance", calibrate_constant("dinf", n, 0))?.parameter,
                };
                (field("distance.eps", HomogeneousDistance::dinf(eps))?, *convex_ball)
            }
        };
        let report = validate_distance(&d, n, 10_000, 0);
        if !report.passed {
            return Err(CliError::Config(format!(
                "distance: fails validation (triangle violation {:.2e}, homogeneity error {:.2e})",
                report.max_triangle_violation, report.max_homogeneity_error
            )));
        }
        let convex = match convex {
            Some(c) => c,
            None => field("distance", ball_convexity_probe(&d, n, 20_000, 0))?,
        };
        Ok(d.with_convex_ball(convex))
    }

    fn check_n(&self) -> Result<usize, CliError> {
        if self.n == 0 || self.n > 4 {
            return Err(CliError::Config(format!("n: expected 1..=4, got {}", self.n)));
        }
        Ok(self.n)
    }

    pub fn surface(&self) -> Result<Surface, CliError> {
        let n = self.check_n()?;
        let sc = self.surface.as_ref().ok_or_else(|| CliError::Config("surface: missing".into()))?;
        let f = field("surface.f", DefiningFunction::from_exprs(n, &sc.f))?;
        let k = f.k();
        let level = sc.level.clone().unwrap_or_else(|| vec![0.0; k]);
        if level.len() != k {
            return Err(CliError::Config(format!("surface.level: expected {k} values, got {}", level.len())));
        }
        let (v, coordinate) = match &sc.v {
            None => (field("surface.V", HorizontalSubgroup::coordinate(n, k))?, true),
            Some(SubgroupBasis::Named(s)) if s == "coordinate" => {
                (field("surface.V", HorizontalSubgroup::coordinate(n, k))?, true)
            }
            Some(SubgroupBasis::Named(s)) => {
                return Err(CliError::Config(format!("surface.V: expected \"coordinate\" or a list of vectors, got \"{s}\"")))
            }
            Some(SubgroupBasis::Vectors(b)) => (field("surface.V", HorizontalSubgroup::new(n, b.clone()))?, false),
        };
        let w = match &sc.w {
            None if coordinate => field("surface.W", VerticalSubgroup::coordinate(n, k))?,
            None => field("surface.W", VerticalSubgroup::orthogonal_to(&v))?,
            Some(b) => field("surface.W", VerticalSubgroup::new(n, b.clone()))?,
        };
        let split = field("surface", Split::new(w, v))?;
        let wdim = split.w().dim();
        let drop_v = |c: &[f64], name: &str| -> Result<Vec<f64>, CliError> {
            if c.len() == wdim {
                Ok(c.to_vec())
            } else if coordinate && c.len() == 2 * n + 1 {
                // ambient coordinates: W = span{e_{k+1}, .., e_{2n+1}}
                Ok(c[k..].to_vec())
            } else {
                Err(CliError::Config(format!("{name}: expected {wdim} W-coordinates, got {}", c.len())))
            }
        };
        let center = drop_v(&sc.u.center, "surface.U.center")?;
        let half = drop_v(&sc.u.half, "surface.U.half")?;
        let domain = field("surface.U", WBox::new(center, half))?;
        let model = field("surface", SurfaceModel::new(f, split, level, domain))?;
        let coords = sc.points.clone().unwrap_or_else(|| vec![model.domain().center().to_vec()]);
        let mut points = Vec::with_capacity(coords.len());
        for (i, c) in coords.iter().enumerate() {
            let name = format!("surface.points[{i}]");
            let c = drop_v(c, &name)?;
            let wp = field(&name, model.split().w().point(&c))?;
            points.push(field(&name, model.graph_map(&wp))?);
        }
        Ok(Surface { label: sc.f.join("; "), model, points })
    }

    pub fn control(&self) -> Option<NegativeControl> {
        self.negative_control.as_ref().map(|c| NegativeControl::WrongPlane(c.wrong_plane.clone()))
    }
}
