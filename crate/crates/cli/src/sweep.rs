//! Independent runs over one parameter axis, written to `run_NNN/`
//! subdirectories and merged into combined CSVs keyed by the swept value.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use toml::{Table, Value};

use crate::config::{from_table, set_number, ConfigErrors, ExperimentConfig, SweepConfig};
use crate::run::{files_value, run_experiment, RunError, RunOptions, RunOutput, MANIFEST};
use crate::table::{Cell, CsvTable};

#[derive(Debug)]
pub struct SweepRun {
    pub value: f64,
    pub dir: String,
    pub result: Result<RunOutput, RunError>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub param: String,
    pub runs: Vec<SweepRun>,
    pub combined: Vec<CsvTable>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.result.is_err()).count()
    }
}

/// Configurations for every value; all validation errors are reported together.
pub fn expand(doc: &Table, sweep: &SweepConfig) -> Result<Vec<ExperimentConfig>, ConfigErrors> {
    let mut base = doc.clone();
    base.remove("sweep");
    let mut errors = Vec::new();
    let mut out = Vec::new();
    for &v in &sweep.values {
        let mut d = base.clone();
        if let Err(e) = set_number(&mut d, &sweep.param, v) {
            errors.push(format!("sweep.param: {e}"));
            break;
        }
        match from_table(&d) {
            Ok(c) => out.push(c),
            Err(ConfigErrors(es)) => errors.extend(es.into_iter().map(|e| format!("{} = {v}: {e}", sweep.param))),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(ConfigErrors(errors))
    }
}

fn run_dir(k: usize) -> String {
    format!("run_{k:03}")
}

pub fn run_sweep(
    base: &ExperimentConfig,
    doc: &Table,
    sweep: &SweepConfig,
    dir: &Path,
    workers: usize,
    opts: RunOptions,
) -> Result<SweepReport, RunError> {
    let start = Instant::now();
    let configs = expand(doc, sweep)?;
    fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
    let _ = fs::remove_file(dir.join(MANIFEST));

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RunOutput, RunError>>>> = Mutex::new((0..configs.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..workers.clamp(1, configs.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= configs.len() {
                    break;
                }
                let r = run_experiment(&configs[k], &dir.join(run_dir(k)), opts);
                slots.lock().expect("sweep slots")[k] = Some(r);
            });
        }
    });
    let runs: Vec<SweepRun> = slots
        .into_inner()
        .expect("sweep slots")
        .into_iter()
        .enumerate()
        .map(|(k, r)| SweepRun { value: sweep.values[k], dir: run_dir(k), result: r.expect("every run finished") })
        .collect();

    let mut combined: Vec<CsvTable> = Vec::new();
    for run in &runs {
        let Ok(out) = &run.result else { continue };
        for t in out.tables.iter().chain(std::iter::once(&out.summary)) {
            let keyed = t.keyed(&sweep.param, run.value);
            match combined.iter_mut().find(|c| c.name == t.name) {
                Some(c) => append(c, keyed),
                None => combined.push(keyed),
            }
        }
    }

    let mut files = Vec::new();
    for t in &combined {
        let path = dir.join(&t.name);
        t.write(dir).map_err(|source| RunError::Io { path: path.clone(), source })?;
        files.push((t.name.clone(), t.columns.clone(), t.rows.len()));
    }
    for run in &runs {
        if let Ok(out) = &run.result {
            for t in out.tables.iter().chain(std::iter::once(&out.summary)) {
                files.push((format!("{}/{}", run.dir, t.name), t.columns.clone(), t.rows.len()));
            }
            files.push((format!("{}/{}", run.dir, MANIFEST), Vec::new(), 0));
        }
    }

    let mut m = Table::new();
    let mut cfg = base.to_table();
    cfg.insert("sweep".into(), Value::Table(sweep_table(sweep)));
    m.insert("config".into(), Value::Table(cfg));
    let run_list = runs
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut t = Table::new();
            t.insert("index".into(), Value::Integer(k as i64));
            t.insert("value".into(), Value::Float(r.value));
            t.insert("dir".into(), Value::String(r.dir.clone()));
            match &r.result {
                Ok(_) => {
                    t.insert("status".into(), Value::String("ok".into()));
                }
                Err(e) => {
                    t.insert("status".into(), Value::String("failed".into()));
                    t.insert("error".into(), Value::String(e.to_string()));
                }
            }
            Value::Table(t)
        })
        .collect();
    m.insert("runs".into(), Value::Array(run_list));
    m.insert("files".into(), Value::Array(files_value(&files)));
    let mut timings = Table::new();
    timings.insert("total".into(), Value::Float(start.elapsed().as_secs_f64()));
    m.insert("timings".into(), Value::Table(timings));
    let path = dir.join(MANIFEST);
    fs::write(&path, toml::to_string(&m).expect("manifest serializes")).map_err(|source| RunError::Io { path: PathBuf::from(&path), source })?;

    Ok(SweepReport { param: sweep.param.clone(), runs, combined })
}

fn sweep_table(s: &SweepConfig) -> Table {
    let mut t = Table::new();
    t.insert("param".into(), Value::String(s.param.clone()));
    t.insert("values".into(), Value::Array(s.values.iter().map(|v| Value::Float(*v)).collect()));
    t
}

/// Append rows, widening to the union of both column sets; missing cells stay empty.
fn append(into: &mut CsvTable, more: CsvTable) {
    for c in &more.columns {
        if !into.columns.contains(c) {
            into.columns.push(c.clone());
            for r in into.rows.iter_mut() {
                r.push(Cell::Text(String::new()));
            }
        }
    }
    for row in more.rows {
        let mut full = vec![Cell::Text(String::new()); into.columns.len()];
        for (c, v) in more.columns.iter().zip(row) {
            let k = into.columns.iter().position(|x| x == c).expect("column merged");
            full[k] = v;
        }
        into.rows.push(full);
    }
}
