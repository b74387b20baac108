//! Scenario files: parsing, validation and model construction.
//!
//! The format is TOML; see `docs/scenario.md` for the full schema.

use std::ops::Range;
use std::path::Path;

use cdg_core::checkers::Property;
use cdg_core::generate::{normalize_rows, random_irreducible_weights, random_metzler};
use cdg_core::graph::{DensityVector, DynamicGraph};
use cdg_core::models::{
    add_epsilon, square_from_rows, CompositeModel, LaplacianModel, LinearModel, Model, ModelClass,
    RatioConsensusModel, VectorField, WeightSchedule,
};
use cdg_core::ray::DINI_CLASSES;
use cdg_core::sim::IntegratorConfig;
use rand::Rng;
use serde::Deserialize;
use toml::Spanned;

use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    graph: Option<Spanned<RawGraph>>,
    model: Spanned<RawModel>,
    initial: Spanned<RawInitial>,
    integrator: Option<Spanned<RawIntegrator>>,
    analyses: Option<Spanned<RawAnalyses>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    vertices: usize,
    edges: Vec<[usize; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: Spanned<String>,
    a: Option<Spanned<Vec<Vec<f64>>>>,
    b: Option<Spanned<Vec<f64>>>,
    weights: Option<Spanned<Vec<Vec<f64>>>>,
    schedule: Option<Vec<Spanned<RawScheduleEntry>>>,
    adjacency: Option<Spanned<Vec<Vec<f64>>>>,
    m: Option<Spanned<usize>>,
    random: Option<Spanned<RawRandomModel>>,
    epsilon: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheduleEntry {
    t: f64,
    weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRandomModel {
    m: usize,
    #[serde(default = "default_density")]
    density: f64,
    #[serde(default)]
    breakpoints: Vec<f64>,
    row_sum: Option<f64>,
}

fn default_density() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    state: Option<Spanned<Vec<f64>>>,
    vertices: Option<Spanned<Vec<f64>>>,
    random: Option<Spanned<RawRandomInitial>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRandomInitial {
    kind: String,
    #[serde(default = "default_min")]
    min: f64,
    #[serde(default = "default_max")]
    max: f64,
}

fn default_min() -> f64 {
    1e-2
}

fn default_max() -> f64 {
    1e2
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    step: Option<f64>,
    t0: Option<f64>,
    t_end: Option<f64>,
    sample_every: Option<usize>,
    refine: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalyses {
    #[serde(default)]
    positivity: bool,
    #[serde(default, rename = "box")]
    box_: Option<Spanned<bool>>,
    #[serde(default)]
    lyapunov: bool,
    #[serde(default)]
    dini: Option<Spanned<bool>>,
    consensus: Option<Spanned<f64>>,
    equilibrium: Option<Spanned<f64>>,
    epsilon_study: Option<Spanned<Vec<f64>>>,
    compare_difference: Option<Spanned<bool>>,
    checks: Option<Spanned<RawChecks>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChecks {
    properties: Spanned<Vec<String>>,
    samples: Option<u64>,
    seed: Option<u64>,
    tol: Option<f64>,
}

/// How the model is obtained; random models are drawn per run.
#[derive(Debug, Clone)]
pub enum ModelSource {
    Fixed(Model),
    RandomRatio {
        m: usize,
        density: f64,
        breakpoints: Vec<f64>,
        row_sum: Option<f64>,
    },
    RandomLinear {
        m: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RandomKind {
    Cone,
    Orthant,
}

#[derive(Debug, Clone)]
pub enum InitialSource {
    Fixed(Vec<f64>),
    Random {
        kind: RandomKind,
        min: f64,
        max: f64,
        /// Fixed vertex block for composite models.
        vertices: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Default)]
pub struct ChecksSpec {
    pub properties: Vec<Property>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Analyses {
    pub positivity: bool,
    pub box_confinement: bool,
    pub lyapunov: bool,
    pub dini: bool,
    pub consensus: Option<f64>,
    /// Tolerance for agreement with `−A⁻¹b` (linear models).
    pub equilibrium: Option<f64>,
    pub epsilon_study: Option<Vec<f64>>,
    pub compare_difference: bool,
    pub checks: Option<ChecksSpec>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: String,
    pub model: ModelSource,
    pub epsilon: Option<f64>,
    pub graph: Option<DynamicGraph>,
    pub initial: InitialSource,
    pub integrator: IntegratorConfig,
    pub analyses: Analyses,
    /// Vertex count for composite models (the first block of the state).
    pub vertex_count: usize,
}

/// Maps byte offsets to 1-based line numbers.
struct Lines<'a> {
    origin: &'a str,
    text: &'a str,
}

impl Lines<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        self.text[..span.start.min(self.text.len())]
            .bytes()
            .filter(|&b| b == b'\n')
            .count()
            + 1
    }

    fn err<T>(&self, span: Range<usize>, msg: impl std::fmt::Display) -> Result<T, CliError> {
        Err(CliError::Usage(format!(
            "{}:{}: {msg}",
            self.origin,
            self.line(span)
        )))
    }
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates scenario text; `origin` prefixes error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let raw: RawScenario = toml::from_str(text)
            .map_err(|e| CliError::Usage(format!("{origin}: {}", e.to_string().trim_end())))?;
        let lines = Lines { origin, text };
        build(raw, &lines)
    }

    pub fn is_randomizable(&self) -> bool {
        matches!(self.initial, InitialSource::Random { .. })
    }

    /// Draws the model and initial state for one run.
    pub fn instantiate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Model, Vec<f64>), CliError> {
        let model = match &self.model {
            ModelSource::Fixed(m) => m.clone(),
            ModelSource::RandomRatio {
                m,
                density,
                breakpoints,
                row_sum,
            } => {
                let mut draw = || {
                    let mut w = random_irreducible_weights(rng, *m, *density);
                    if let Some(s) = row_sum {
                        normalize_rows(&mut w, *s);
                    }
                    w
                };
                let entries = if breakpoints.is_empty() {
                    vec![(0.0, draw())]
                } else {
                    breakpoints.iter().map(|&t| (t, draw())).collect()
                };
                let schedule = WeightSchedule::new(entries)?;
                RatioConsensusModel::new(schedule).into()
            }
            ModelSource::RandomLinear { m } => random_metzler(rng, *m).into(),
        };
        let model = match self.epsilon {
            Some(eps) => add_epsilon(model, eps)?,
            None => model,
        };
        let state = match &self.initial {
            InitialSource::Fixed(s) => s.clone(),
            InitialSource::Random {
                kind,
                min,
                max,
                vertices,
            } => {
                let mut state = vertices.clone().unwrap_or_default();
                let (lo, hi) = (min.log10(), max.log10());
                let n = model.dimension() - state.len();
                for _ in 0..n {
                    let zero = *kind == RandomKind::Orthant && rng.gen::<f64>() < 0.2;
                    state.push(if zero {
                        0.0
                    } else {
                        10f64.powf(rng.gen_range(lo..=hi))
                    });
                }
                state
            }
        };
        if state.len() != model.dimension() {
            return Err(CliError::Usage(format!(
                "initial state has {} components, model {} expects {}",
                state.len(),
                model.label(),
                model.dimension()
            )));
        }
        Ok((model, state))
    }
}

fn matrix(lines: &Lines, m: &Spanned<Vec<Vec<f64>>>, what: &str) -> Result<cdg_core::DMatrix<f64>, CliError> {
    match square_from_rows(m.get_ref()) {
        Ok(w) => Ok(w),
        Err(e) => lines.err(m.span(), format!("model.{what}: {e}")),
    }
}

fn build(raw: RawScenario, lines: &Lines) -> Result<Scenario, CliError> {
    let model_span = raw.model.span();
    let rm = raw.model.into_inner();
    let kind = rm.kind.get_ref().clone();

    let graph = match &raw.graph {
        None => None,
        Some(g) => {
            let span = g.span();
            let g = g.get_ref();
            let pairs: Vec<(usize, usize)> = g.edges.iter().map(|e| (e[0], e[1])).collect();
            let w = DensityVector::new(vec![1.0; pairs.len()]).expect("unit weights");
            match DynamicGraph::from_pairs(g.vertices, &pairs, w) {
                Ok(g) => Some(g),
                Err(e) => return lines.err(span, format!("graph: {e}")),
            }
        }
    };

    let fixed = |m: Model| ModelSource::Fixed(m);
    let core = |span: Range<usize>, r: cdg_core::Result<Model>| -> Result<Model, CliError> {
        r.or_else(|e| lines.err(span, format!("model: {e}")))
    };
    let uniform_ratio = |m: &Spanned<usize>| -> Result<ModelSource, CliError> {
        if *m.get_ref() == 0 {
            return lines.err(m.span(), "model.m must be at least 1");
        }
        Ok(fixed(RatioConsensusModel::uniform(*m.get_ref()).into()))
    };

    let (source, vertex_count) = match kind.as_str() {
        "linear" if rm.random.is_some() => {
            let r = rm.random.as_ref().expect("checked");
            if r.get_ref().m == 0 {
                return lines.err(r.span(), "model.random needs m ≥ 1");
            }
            (ModelSource::RandomLinear { m: r.get_ref().m }, 0)
        }
        "linear" => {
            let (Some(a), Some(b)) = (&rm.a, &rm.b) else {
                return lines.err(model_span, "linear model needs both `a` and `b`");
            };
            let am = matrix(lines, a, "a")?;
            let m = core(b.span(), LinearModel::new(am, b.get_ref().clone()).map(Model::from))?;
            (fixed(m), 0)
        }
        "ratio" => {
            let source = if let Some(w) = &rm.weights {
                let wm = matrix(lines, w, "weights")?;
                fixed(core(w.span(), RatioConsensusModel::constant(wm).map(Model::from))?)
            } else if let Some(entries) = &rm.schedule {
                let mut parsed = Vec::new();
                for e in entries {
                    match square_from_rows(&e.get_ref().weights) {
                        Ok(w) => parsed.push((e.get_ref().t, w)),
                        Err(err) => return lines.err(e.span(), format!("model.schedule: {err}")),
                    }
                }
                let span = entries.first().map_or(model_span.clone(), |e| e.span());
                let schedule = WeightSchedule::new(parsed).or_else(|e| lines.err(span, format!("model.schedule: {e}")))?;
                fixed(RatioConsensusModel::new(schedule).into())
            } else if let Some(r) = &rm.random {
                let spec = r.get_ref().clone();
                if spec.m == 0 || !(0.0..=1.0).contains(&spec.density) {
                    return lines.err(r.span(), "model.random needs m ≥ 1 and density in [0, 1]");
                }
                if spec.breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                    return lines.err(r.span(), "model.random.breakpoints must be strictly increasing");
                }
                if spec.row_sum.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
                    return lines.err(r.span(), "model.random.row_sum must be positive");
                }
                ModelSource::RandomRatio {
                    m: spec.m,
                    density: spec.density,
                    breakpoints: spec.breakpoints,
                    row_sum: spec.row_sum,
                }
            } else if let Some(m) = &rm.m {
                uniform_ratio(m)?
            } else {
                return lines.err(
                    model_span,
                    "ratio model needs one of `weights`, `schedule`, `random` or `m`",
                );
            };
            (source, 0)
        }
        "laplacian" => {
            let m = if let Some(adj) = &rm.adjacency {
                let w = matrix(lines, adj, "adjacency")?;
                core(adj.span(), LaplacianModel::new(w).map(Model::from))?
            } else if let Some(m) = &rm.m {
                LaplacianModel::uniform(*m.get_ref()).into()
            } else {
                return lines.err(model_span, "laplacian model needs `adjacency` or `m`");
            };
            (fixed(m), 0)
        }
        "composite" => {
            let Some(g) = &graph else {
                return lines.err(model_span, "composite model needs a [graph] section");
            };
            let edge_model = match &rm.weights {
                Some(w) => {
                    let wm = matrix(lines, w, "weights")?;
                    match RatioConsensusModel::constant(wm) {
                        Ok(r) => r,
                        Err(e) => return lines.err(w.span(), format!("model.weights: {e}")),
                    }
                }
                None => RatioConsensusModel::uniform(g.edge_count()),
            };
            let m = core(
                model_span.clone(),
                CompositeModel::from_graph(g, edge_model).map(Model::from),
            )?;
            (fixed(m), g.vertex_count())
        }
        other => {
            return lines.err(
                rm.kind.span(),
                format!("unknown model kind '{other}' (expected linear, ratio, laplacian or composite)"),
            )
        }
    };

    let epsilon = match &rm.epsilon {
        None => None,
        Some(e) if *e.get_ref() > 0.0 && e.get_ref().is_finite() => {
            if kind == "composite" {
                return lines.err(e.span(), "model.epsilon is not supported for composite models");
            }
            Some(*e.get_ref())
        }
        Some(e) => return lines.err(e.span(), "model.epsilon must be positive"),
    };

    // A probe instance fixes the dimension and claimed classes for validation.
    let probe = match &source {
        ModelSource::Fixed(m) => m.clone(),
        ModelSource::RandomRatio { m, .. } => RatioConsensusModel::uniform(*m).into(),
        ModelSource::RandomLinear { m } => {
            // Claims only GS and N, which every Metzler draw with b ≥ 0 also claims.
            let a = cdg_core::DMatrix::from_fn(*m, *m, |i, j| if i == j { -1.0 } else { 0.0 });
            LinearModel::metzler(a, vec![0.0; *m]).expect("diagonal probe").into()
        }
    };
    let probe = match epsilon {
        Some(eps) => add_epsilon(probe, eps).expect("validated epsilon"),
        None => probe,
    };
    let dim = probe.dimension();

    if let (Some(g), Some(gs)) = (&graph, &raw.graph) {
        if kind != "composite" && g.edge_count() != dim {
            return lines.err(
                gs.span(),
                format!("graph has {} edges but the model has dimension {dim}", g.edge_count()),
            );
        }
    }

    let initial_span = raw.initial.span();
    let ri = raw.initial.into_inner();
    let initial = match (&ri.state, &ri.random) {
        (Some(_), Some(r)) => return lines.err(r.span(), "initial: give either `state` or `random`, not both"),
        (None, None) => return lines.err(initial_span, "initial: needs `state` or `random`"),
        (Some(s), None) => {
            let mut state = ri.vertices.as_ref().map(|v| v.get_ref().clone()).unwrap_or_default();
            if kind == "composite" && state.len() != vertex_count {
                return lines.err(
                    initial_span,
                    format!("initial.vertices must have {vertex_count} components"),
                );
            }
            state.extend_from_slice(s.get_ref());
            if state.len() != dim {
                return lines.err(
                    s.span(),
                    format!("initial state has {} components, expected {dim}", state.len()),
                );
            }
            if let Some(i) = state.iter().position(|v| !v.is_finite()) {
                return lines.err(s.span(), format!("initial state component {i} is not finite"));
            }
            InitialSource::Fixed(state)
        }
        (None, Some(r)) => {
            let spec = r.get_ref();
            let kind_r = match spec.kind.as_str() {
                "cone" => RandomKind::Cone,
                "orthant" => RandomKind::Orthant,
                other => return lines.err(r.span(), format!("initial.random.kind '{other}' (expected cone or orthant)")),
            };
            if !(spec.min > 0.0 && spec.max >= spec.min && spec.max.is_finite()) {
                return lines.err(r.span(), "initial.random needs 0 < min ≤ max");
            }
            let vertices = ri.vertices.as_ref().map(|v| v.get_ref().clone());
            if kind == "composite" && vertices.as_ref().map(Vec::len) != Some(vertex_count) {
                return lines.err(
                    initial_span,
                    format!("initial.vertices must have {vertex_count} components"),
                );
            }
            InitialSource::Random {
                kind: kind_r,
                min: spec.min,
                max: spec.max,
                vertices,
            }
        }
    };

    let integrator = match &raw.integrator {
        None => IntegratorConfig::default(),
        Some(ri) => {
            let d = IntegratorConfig::default();
            let r = ri.get_ref();
            let cfg = IntegratorConfig {
                step: r.step.unwrap_or(d.step),
                t0: r.t0.unwrap_or(d.t0),
                t_end: r.t_end.unwrap_or(d.t_end),
                sample_every: r.sample_every.unwrap_or(d.sample_every),
                refine: r.refine.unwrap_or(d.refine),
            };
            if let Err(e) = cfg.validate() {
                return lines.err(ri.span(), format!("integrator: {e}"));
            }
            cfg
        }
    };

    let analyses = match raw.analyses {
        None => Analyses::default(),
        Some(a) => validate_analyses(a.into_inner(), &probe, lines)?,
    };

    Ok(Scenario {
        name: raw.name,
        kind,
        model: source,
        epsilon,
        graph,
        initial,
        integrator,
        analyses,
        vertex_count,
    })
}

fn class_list(classes: &[ModelClass]) -> String {
    let names: Vec<&str> = classes.iter().map(|c| c.code()).collect();
    format!("{{{}}}", names.join(","))
}

fn validate_analyses(
    ra: RawAnalyses,
    probe: &Model,
    lines: &Lines,
) -> Result<Analyses, CliError> {
    let requires = |flag: &Option<Spanned<bool>>, name: &str, classes: &[ModelClass]| -> Result<bool, CliError> {
        match flag {
            Some(f) if *f.get_ref() => {
                if classes.iter().all(|c| probe.claims(*c)) {
                    Ok(true)
                } else {
                    lines.err(f.span(), format!("{name} requires classes {}", class_list(classes)))
                }
            }
            _ => Ok(false),
        }
    };
    let dini = requires(&ra.dini, "dini", &DINI_CLASSES)?;
    let box_confinement = requires(&ra.box_, "box", &[ModelClass::MaxMinContraction])?;

    let consensus = match &ra.consensus {
        Some(c) if !(*c.get_ref() > 0.0) => return lines.err(c.span(), "analyses.consensus must be positive"),
        c => c.as_ref().map(|c| *c.get_ref()),
    };
    let equilibrium = match &ra.equilibrium {
        Some(e) if !matches!(probe, Model::Linear(_)) => {
            return lines.err(e.span(), "equilibrium requires an unshifted linear model")
        }
        Some(e) if !(*e.get_ref() > 0.0) => return lines.err(e.span(), "analyses.equilibrium must be positive"),
        e => e.as_ref().map(|e| *e.get_ref()),
    };
    let epsilon_study = match &ra.epsilon_study {
        Some(list) => {
            if !probe.claims(ModelClass::ClassN) {
                return lines.err(list.span(), format!("epsilon_study requires classes {}", class_list(&[ModelClass::ClassN])));
            }
            if list.get_ref().iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
                return lines.err(list.span(), "epsilon_study values must be nonnegative");
            }
            Some(list.get_ref().clone())
        }
        None => None,
    };
    let compare_difference = match &ra.compare_difference {
        Some(c) if *c.get_ref() => {
            if !matches!(probe, Model::Ratio(_)) {
                return lines.err(c.span(), "compare_difference requires an unshifted ratio model");
            }
            true
        }
        _ => false,
    };
    let checks = match &ra.checks {
        None => None,
        Some(c) => {
            let rc = c.get_ref();
            let mut properties = Vec::new();
            for name in rc.properties.get_ref() {
                match name.parse::<Property>() {
                    Ok(p) => properties.push(p),
                    Err(e) => return lines.err(rc.properties.span(), format!("analyses.checks: {e}")),
                }
            }
            Some(ChecksSpec {
                properties,
                samples: rc.samples,
                seed: rc.seed,
                tol: rc.tol,
            })
        }
    };
    Ok(Analyses {
        positivity: ra.positivity,
        box_confinement,
        lyapunov: ra.lyapunov,
        dini,
        consensus,
        equilibrium,
        epsilon_study,
        compare_difference,
        checks,
    })
}
