use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::report::ComparisonReport;
use super::svg::{line_chart, Series, PALETTE};
use crate::model::StateId;
use crate::solver::SolverError;

/// Output files written by [`emit_report`], in write order.
#[derive(Debug, Clone, Default)]
pub struct FileManifest {
    pub files: Vec<PathBuf>,
}

/// I/O failure during report emission.
#[derive(Debug, Error)]
pub enum EmitError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn write_file(path: &Path, contents: &str, manifest: &mut FileManifest) -> Result<(), EmitError> {
    fs::write(path, contents).map_err(|source| EmitError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    manifest.files.push(path.to_path_buf());
    Ok(())
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect()
}

/// Writes one tidy flow CSV per scenario, one delta CSV per non-baseline
/// scenario, and (optionally) per-block line charts of the distribution and
/// control trajectories. Output bytes are a pure function of the report:
/// floats are printed with Rust's shortest round-trip formatting and no
/// timestamps or environment data enter the files.
pub fn emit_report(
    report: &ComparisonReport,
    out_dir: impl AsRef<Path>,
    plots: bool,
) -> Result<FileManifest, EmitError> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|source| EmitError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut manifest = FileManifest::default();

    for run in &report.runs {
        let path = out_dir.join(format!("flows_{}.csv", slug(&run.scenario.name)));
        write_file(&path, &flow_csv(run), &mut manifest)?;
    }

    let base = &report.runs[report.baseline];
    for (i, run) in report.runs.iter().enumerate() {
        if i == report.baseline {
            continue;
        }
        let path = out_dir.join(format!(
            "delta_{}_vs_{}.csv",
            slug(&base.scenario.name),
            slug(&run.scenario.name)
        ));
        write_file(&path, &delta_csv(base, run)?, &mut manifest)?;
    }

    if plots {
        for run in &report.runs {
            for block in 0..run.scenario.n_blocks() {
                let name = slug(&run.scenario.name);
                let bname = slug(&run.scenario.block_names[block]);
                let p_path = out_dir.join(format!("plot_{name}_{bname}_p.svg"));
                write_file(&p_path, &block_chart(run, block, Field::P), &mut manifest)?;
                let phi_path = out_dir.join(format!("plot_{name}_{bname}_phi.svg"));
                write_file(&phi_path, &block_chart(run, block, Field::Phi), &mut manifest)?;
            }
        }
    }
    Ok(manifest)
}

/// Tidy flow schema: `t,block,state,p,u,phi,z_k,z_i`, one row per
/// (node, block, state), LF line endings.
pub(crate) fn flow_csv(run: &super::ScenarioRun) -> String {
    let flows = &run.result.flows;
    let grid = &run.scenario.grid;
    let nb = flows.n_blocks();
    let mut out = String::from("t,block,state,p,u,phi,z_k,z_i\n");
    for node in 0..flows.n_nodes() {
        let t = grid.node_time(node);
        for block in 0..nb {
            let idx = node * nb + block;
            let name = &run.scenario.block_names[block];
            for e in StateId::ALL {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    t,
                    name,
                    e.label(),
                    flows.p[idx][e.index()],
                    flows.u[idx][e.index()],
                    flows.phi[idx][e.index()],
                    flows.z_k[idx],
                    flows.z_i[idx],
                );
            }
        }
    }
    out
}

/// Pairwise delta schema: `t,block,state,metric,value_a,value_b,delta`
/// with metric in `{p, u, phi}` and `delta = value_b - value_a`.
fn delta_csv(a: &super::ScenarioRun, b: &super::ScenarioRun) -> Result<String, EmitError> {
    let fa = &a.result.flows;
    let fb = &b.result.flows;
    if !fa.same_shape(fb) || a.scenario.grid != b.scenario.grid {
        return Err(EmitError::Solver(SolverError::ShapeMismatch(format!(
            "deltas need identical grids: {} vs {}",
            a.scenario.name, b.scenario.name
        ))));
    }
    let nb = fa.n_blocks();
    let mut out = String::from("t,block,state,metric,value_a,value_b,delta\n");
    for node in 0..fa.n_nodes() {
        let t = a.scenario.grid.node_time(node);
        for block in 0..nb {
            let idx = node * nb + block;
            let name = &a.scenario.block_names[block];
            for e in StateId::ALL {
                for (metric, va, vb) in [
                    ("p", fa.p[idx][e.index()], fb.p[idx][e.index()]),
                    ("u", fa.u[idx][e.index()], fb.u[idx][e.index()]),
                    ("phi", fa.phi[idx][e.index()], fb.phi[idx][e.index()]),
                ] {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        t,
                        name,
                        e.label(),
                        metric,
                        va,
                        vb,
                        vb - va,
                    );
                }
            }
        }
    }
    Ok(out)
}

enum Field {
    P,
    Phi,
}

fn block_chart(run: &super::ScenarioRun, block: usize, field: Field) -> String {
    let flows = &run.result.flows;
    let grid = &run.scenario.grid;
    let nb = flows.n_blocks();
    let series_for = |e: StateId| -> Vec<(f64, f64)> {
        (0..flows.n_nodes())
            .map(|node| {
                let idx = node * nb + block;
                let v = match field {
                    Field::P => flows.p[idx][e.index()],
                    Field::Phi => flows.phi[idx][e.index()],
                };
                (grid.node_time(node), v)
            })
            .collect()
    };
    let data: Vec<(StateId, Vec<(f64, f64)>)> =
        StateId::ALL.iter().map(|e| (*e, series_for(*e))).collect();
    let series: Vec<Series> = data
        .iter()
        .enumerate()
        .map(|(i, (e, pts))| Series {
            label: e.label(),
            color: PALETTE[i],
            points: pts,
        })
        .collect();
    let (what, y_label) = match field {
        Field::P => ("state distribution", "probability"),
        Field::Phi => ("communication rates", "rate"),
    };
    let title = format!(
        "{} — {} — {}",
        run.scenario.name, run.scenario.block_names[block], what
    );
    line_chart(&title, "t", y_label, &series)
}
