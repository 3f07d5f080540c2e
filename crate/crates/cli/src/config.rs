//! Experiment files: nested TOML sections mapped onto [`RunConfig`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use vortex_shape::descent::{Algorithm, RunConfig};
use vortex_shape::functionals::ObjectiveParams;
use vortex_shape::mesh::ChannelGeometry;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    name: String,
    objective: ObjectiveSection,
    descent: DescentSection,
    #[serde(default)]
    multipliers: MultiplierSection,
    #[serde(default)]
    flow: FlowSection,
    #[serde(default)]
    mesh: MeshSection,
    geometry: Option<ChannelGeometry>,
    #[serde(default)]
    output: OutputSection,
    /// Named reference polylines (CSV) to measure the final shape against.
    #[serde(default)]
    compare: BTreeMap<String, PathBuf>,
    sweep: Option<SweepSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveSection {
    gamma1: f64,
    gamma2: f64,
    alpha: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescentSection {
    algorithm: Algorithm,
    beta: Option<f64>,
    gamma_smooth: Option<f64>,
    epsilon: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    max_halvings: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultiplierSection {
    ell0: Option<f64>,
    b0: Option<f64>,
    tau: Option<f64>,
    b_max: Option<f64>,
    target_volume: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowSection {
    nu: Option<f64>,
    inflow_amplitude: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshSection {
    h_min: Option<f64>,
    h_max: Option<f64>,
    seed: Option<u64>,
    smoothing_iterations: Option<usize>,
    adapt_initial: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    vtk_every: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    /// Shorthand for the numbered mixed configurations.
    #[serde(default)]
    mixed: Vec<u32>,
    #[serde(default)]
    entries: Vec<SweepEntry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub label: String,
    pub alpha: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// A parsed experiment with every default filled in.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub run: RunConfig,
    pub out: PathBuf,
    pub sweep: Vec<SweepEntry>,
    pub compare: Vec<(String, PathBuf)>,
    /// Write a VTK snapshot every this many iterations; 0 keeps only the first and last.
    pub vtk_every: usize,
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

impl ExperimentSpec {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses `text`; relative `compare` paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let file: ExperimentFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let d = &file.descent;
        let mut run = match d.algorithm {
            Algorithm::AugmentedLagrangian => RunConfig::curl_al(),
            Algorithm::DivergenceFree => RunConfig::curl_df(),
        };
        run.gamma1 = file.objective.gamma1;
        run.gamma2 = file.objective.gamma2;
        run.alpha = file.objective.alpha;
        set(&mut run.beta, d.beta);
        set(&mut run.gamma_smooth, d.gamma_smooth);
        run.epsilon = d.epsilon;
        set(&mut run.tol, d.tol);
        set(&mut run.max_iter, d.max_iter);
        set(&mut run.max_halvings, d.max_halvings);
        let m = &file.multipliers;
        set(&mut run.ell0, m.ell0);
        set(&mut run.b0, m.b0);
        set(&mut run.tau_mult, m.tau);
        set(&mut run.b_max, m.b_max);
        run.target_volume = m.target_volume;
        set(&mut run.nu, file.flow.nu);
        set(&mut run.inflow_amplitude, file.flow.inflow_amplitude);
        let mesh = &file.mesh;
        set(&mut run.h_min, mesh.h_min);
        set(&mut run.h_max, mesh.h_max);
        set(&mut run.meshing.seed, mesh.seed);
        set(&mut run.meshing.smoothing_iterations, mesh.smoothing_iterations);
        set(&mut run.adapt_initial_mesh, mesh.adapt_initial);
        if let Some(g) = file.geometry {
            run.geometry = g;
        }
        set(&mut run.max_iter, overrides.max_iter);
        set(&mut run.tol, overrides.tol);
        set(&mut run.meshing.seed, overrides.seed);
        run.validate().map_err(|e| CliError::Config(e.to_string()))?;

        let mut sweep = Vec::new();
        if let Some(s) = file.sweep {
            for k in s.mixed {
                let p = ObjectiveParams::mixed(k).map_err(|e| CliError::Config(format!("sweep: {e}")))?;
                sweep.push(SweepEntry {
                    label: format!("mixed_{k:02}"),
                    alpha: p.alpha,
                    gamma1: p.gamma1,
                    gamma2: p.gamma2,
                });
            }
            sweep.extend(s.entries);
            for e in &sweep {
                let mut c = run.clone();
                (c.alpha, c.gamma1, c.gamma2) = (e.alpha, e.gamma1, e.gamma2);
                c.validate().map_err(|err| CliError::Config(format!("sweep entry {}: {err}", e.label)))?;
            }
            let mut labels: Vec<&str> = sweep.iter().map(|e| e.label.as_str()).collect();
            labels.sort_unstable();
            if labels.windows(2).any(|w| w[0] == w[1]) {
                return Err(CliError::Config("sweep labels must be unique".into()));
            }
        }
        let out = overrides.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&file.name));
        let compare = file.compare.into_iter().map(|(k, p)| (k, base.join(p))).collect();
        Ok(ExperimentSpec {
            name: file.name,
            run,
            out,
            sweep,
            compare,
            vtk_every: file.output.vtk_every.unwrap_or(0),
        })
    }

    /// The run configuration of one sweep entry.
    pub fn entry_config(&self, e: &SweepEntry) -> RunConfig {
        let mut c = self.run.clone();
        (c.alpha, c.gamma1, c.gamma2) = (e.alpha, e.gamma1, e.gamma2);
        c
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
