//! Single optimization runs and their artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use vortex_shape::descent::{optimize_with, OptimizationResult, RunConfig, StopReason};
use vortex_shape::flow::{solve_adjoint, solve_state_with, write_vtk};
use vortex_shape::mesh::{hausdorff_distance, Mesh};
use vortex_shape::Execution;

use crate::export::{self, Series};
use crate::CliError;

/// What a finished run reports back to a sweep.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub objective_change: f64,
    pub volume_change: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub distances: Vec<(String, f64)>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn snapshot(dir: &Path, name: &str, mesh: &Mesh, config: &RunConfig, exec: Execution) -> Result<(), CliError> {
    let state = solve_state_with(mesh, config.nu, None, &config.profile(), exec)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let adjoint = solve_adjoint(&state, config.gamma1, config.gamma2).map_err(|e| CliError::Solver(e.to_string()))?;
    let path = dir.join(name);
    let mut out = create(&path)?;
    write_vtk(&mut out, &state, Some(&adjoint)).map_err(io(&path))?;
    out.flush().map_err(io(&path))
}

fn fail(dir: &Path, err: CliError) -> CliError {
    let _ = fs::write(dir.join("ERROR"), format!("{err}\n"));
    err
}

/// Runs one optimization and writes every artifact into `dir`.
///
/// A solver failure leaves the artifacts written so far plus an `ERROR` file.
pub fn run(
    name: &str,
    config: &RunConfig,
    dir: &Path,
    compare: &[(String, PathBuf)],
    vtk_every: usize,
    exec: Execution,
) -> Result<RunOutcome, CliError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let _ = fs::remove_file(dir.join("ERROR"));
    let references = compare
        .iter()
        .map(|(label, path)| {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let poly =
                export::read_polyline(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Ok((label.clone(), poly))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let resolved = toml::to_string(config).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(dir.join("resolved.toml"), format!("# {name}\n{resolved}")).map_err(io(dir))?;

    let history_path = dir.join("history.csv");
    let mut history = create(&history_path)?;
    writeln!(history, "{}", export::HISTORY_HEADER).map_err(io(&history_path))?;
    let mut pending: Option<CliError> = None;
    let result = optimize_with(config, exec, |rec, mesh| {
        if pending.is_some() {
            return;
        }
        let step = export::history_row(&mut history, rec)
            .and_then(|_| history.flush())
            .map_err(io(&history_path));
        let step = step.and_then(|_| {
            if rec.accepted && (rec.iteration == 0 || (vtk_every > 0 && rec.iteration % vtk_every == 0)) {
                snapshot(dir, &format!("state_{:04}.vtk", rec.iteration), mesh, config, exec)
            } else {
                Ok(())
            }
        });
        pending = step.err();
    });
    drop(history);
    let result = result.map_err(|e| fail(dir, CliError::Solver(e.to_string())))?;
    if let Some(err) = pending {
        return Err(fail(dir, err));
    }
    write_artifacts(name, &result, dir, &references, vtk_every, config, exec).map_err(|e| fail(dir, e))?;
    let outcome = RunOutcome {
        dir: dir.to_path_buf(),
        initial_objective: result.initial().breakdown.objective,
        final_objective: result.last().breakdown.objective,
        objective_change: result.objective_change_percent(),
        volume_change: result.volume_change_percent(),
        iterations: result.last().iteration,
        stop: result.stop.clone(),
        distances: distances(&result, &references)?,
    };
    if let StopReason::Aborted(msg) = &result.stop {
        return Err(fail(dir, CliError::Solver(msg.clone())));
    }
    Ok(outcome)
}

fn distances(result: &OptimizationResult, references: &[(String, Vec<[f64; 2]>)]) -> Result<Vec<(String, f64)>, CliError> {
    let last = result.polylines.last().expect("initial polyline is always recorded");
    let mut out = vec![(
        "initial".to_string(),
        hausdorff_distance(&result.polylines[0], last).map_err(|e| CliError::Solver(e.to_string()))?,
    )];
    for (label, poly) in references {
        let d = hausdorff_distance(poly, last).map_err(|e| CliError::Solver(e.to_string()))?;
        out.push((label.clone(), d));
    }
    Ok(out)
}

fn write_artifacts(
    name: &str,
    result: &OptimizationResult,
    dir: &Path,
    references: &[(String, Vec<[f64; 2]>)],
    vtk_every: usize,
    config: &RunConfig,
    exec: Execution,
) -> Result<(), CliError> {
    let accepted: Vec<usize> = result.records.iter().filter(|r| r.accepted).map(|r| r.iteration).collect();
    let keyed: Vec<(usize, &[[f64; 2]])> =
        accepted.iter().zip(&result.polylines).map(|(&k, p)| (k, p.as_slice())).collect();
    let path = dir.join("polylines.csv");
    let mut out = create(&path)?;
    export::write_polylines(&mut out, &keyed).and_then(|_| out.flush()).map_err(io(&path))?;
    for (file, poly) in [
        ("polyline_initial.csv", &result.polylines[0]),
        ("polyline_final.csv", result.polylines.last().unwrap()),
    ] {
        let path = dir.join(file);
        let mut out = create(&path)?;
        export::write_polyline(&mut out, poly).and_then(|_| out.flush()).map_err(io(&path))?;
    }

    let records: Vec<_> = result.records.iter().filter(|r| r.accepted).collect();
    let svg = export::trend_svg(
        &format!("{name}: normalized trends"),
        &[
            Series {
                name: "objective",
                color: "#1f77b4",
                values: records.iter().map(|r| r.breakdown.objective).collect(),
            },
            Series {
                name: "volume",
                color: "#d62728",
                values: records.iter().map(|r| r.breakdown.volume).collect(),
            },
        ],
    );
    fs::write(dir.join("trends.svg"), svg).map_err(io(dir))?;

    let last = result.last().iteration;
    if last > 0 && !(vtk_every > 0 && last % vtk_every == 0) {
        snapshot(dir, &format!("state_{last:04}.vtk"), &result.final_mesh, config, exec)?;
    }

    let mut s = String::new();
    let initial = result.initial().breakdown;
    let fin = result.last().breakdown;
    s.push_str(&format!("name = {name:?}\n"));
    s.push_str(&format!("algorithm = {:?}\n", config.algorithm.label()));
    s.push_str(&format!("iterations = {last}\n"));
    s.push_str(&format!("stop = {:?}\n", format!("{:?}", result.stop)));
    s.push_str(&format!("initial_objective = {}\n", initial.objective));
    s.push_str(&format!("final_objective = {}\n", fin.objective));
    s.push_str(&format!("objective_change_percent = {}\n", result.objective_change_percent()));
    s.push_str(&format!("initial_volume = {}\n", initial.volume));
    s.push_str(&format!("final_volume = {}\n", fin.volume));
    s.push_str(&format!("volume_change_percent = {}\n", result.volume_change_percent()));
    s.push_str(&format!("mesh_seed = {}\n", config.meshing.seed));
    for (label, d) in distances(result, references)? {
        s.push_str(&format!("hausdorff_{label} = {d}\n"));
    }
    fs::write(dir.join("summary.toml"), s).map_err(io(dir))
}
