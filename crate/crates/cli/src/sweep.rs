//! Parameter sweeps: one run directory per entry plus a trend table.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use vortex_shape::Execution;

use crate::config::ExperimentSpec;
use crate::run::{run, RunOutcome};
use crate::CliError;

/// Runs every sweep entry on up to `jobs` threads, each run sequential inside.
pub fn sweep(spec: &ExperimentSpec, jobs: usize) -> Result<(), CliError> {
    if spec.sweep.is_empty() {
        return Err(CliError::Config("no [sweep] entries".into()));
    }
    std::fs::create_dir_all(&spec.out).map_err(|e| CliError::Io(format!("{}: {e}", spec.out.display())))?;
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunOutcome, CliError>>>> = spec.sweep.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, spec.sweep.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(entry) = spec.sweep.get(i) else { break };
                let config = spec.entry_config(entry);
                let dir = spec.out.join(&entry.label);
                let label = format!("{}/{}", spec.name, entry.label);
                let outcome = run(&label, &config, &dir, &spec.compare, spec.vtk_every, Execution::Sequential);
                match &outcome {
                    Ok(o) => eprintln!("{label}: objective {:+.3}%, volume {:+.3}%", o.objective_change, o.volume_change),
                    Err(e) => eprintln!("{label}: {e}"),
                }
                *slots[i].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut table = String::from("entry,alpha [-],gamma1 [-],gamma2 [-],initial_objective [-],final_objective [-],objective_change [%],volume_change [%],iterations");
    for (label, _) in &spec.compare {
        let _ = write!(table, ",hausdorff_{label} [length]");
    }
    table.push('\n');
    let mut first_error = None;
    for (entry, slot) in spec.sweep.iter().zip(slots) {
        match slot.into_inner().unwrap().expect("every entry is visited") {
            Ok(o) => {
                let _ = write!(
                    table,
                    "{},{},{},{},{},{},{},{},{}",
                    entry.label,
                    entry.alpha,
                    entry.gamma1,
                    entry.gamma2,
                    o.initial_objective,
                    o.final_objective,
                    o.objective_change,
                    o.volume_change,
                    o.iterations
                );
                for (_, d) in o.distances.iter().skip(1) {
                    let _ = write!(table, ",{d}");
                }
                table.push('\n');
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    let path = spec.out.join("hausdorff_trend.csv");
    std::fs::write(&path, table).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
