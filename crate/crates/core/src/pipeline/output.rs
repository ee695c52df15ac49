//! Run directories: report, manifest, VTK, marginal CSVs and the SSA cache.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::{RunOutput, SsaStage, StageTimings};
use crate::analysis::marginal2d;
use crate::mesh::export::{write_hanging_table, write_vtk};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub files: Vec<String>,
    pub timings: Option<StageTimings>,
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

pub fn read_json<S: DeserializeOwned>(path: &Path) -> Result<S> {
    let r = std::io::BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

/// Collects file names written into one run directory.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Path for `name`, recorded in the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let p = self.file(name);
        write_json(&p, value)
    }

    pub fn finish(mut self, command: &str, timings: Option<StageTimings>) -> Result<PathBuf> {
        let path = self.file("manifest.json");
        let m = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            files: self.files.clone(),
            timings,
        };
        write_json(&path, &m)?;
        Ok(path)
    }
}

/// Report, config echo and the outputs enabled in `output`.
pub fn write_run<T: Real>(dir: &mut RunDir, out: &RunOutput<T>) -> Result<()> {
    let cfg = &out.report.config;
    dir.json("report.json", &out.report)?;
    fs::write(dir.file("config.toml"), cfg.to_toml_string())?;
    let p = &out.density;
    if cfg.output.vtk {
        let w = BufWriter::new(File::create(dir.file("density.vtk"))?);
        write_vtk(&p.mesh, &[("density", &p.vertex_values)], w)?;
    }
    if cfg.output.marginals {
        for drop in (0..3).rev() {
            let m = marginal2d(p, drop)?;
            let name = format!("marginal_x{}x{}.csv", m.axes[0] + 1, m.axes[1] + 1);
            m.write_csv(BufWriter::new(File::create(dir.file(&name))?))?;
        }
    }
    if cfg.output.hanging_table {
        write_hanging_table(&p.mesh, BufWriter::new(File::create(dir.file("hanging_nodes.csv"))?))?;
    }
    if cfg.output.samples_csv {
        out.samples.write_csv(BufWriter::new(File::create(dir.file("samples.csv"))?))?;
    }
    Ok(())
}

/// SSA stage plus the config keys that determine it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SsaCache<T> {
    pub config: RunConfig,
    pub stage: SsaStage<T>,
}

pub fn save_ssa<T: Real>(path: &Path, cfg: &RunConfig, stage: &SsaStage<T>) -> Result<()> {
    write_json(
        path,
        &SsaCache {
            config: cfg.clone(),
            stage: stage.clone(),
        },
    )
}

/// Loads cached samples, refusing them if they came from a different
/// network, start set, sampling plan or seed.
pub fn load_ssa<T: Real>(path: &Path, cfg: &RunConfig) -> Result<SsaStage<T>> {
    let cache: SsaCache<T> = read_json(path)?;
    if !cache.config.same_ssa(cfg) {
        return Err(Error::Config(format!(
            "cached samples in {} were produced by a different SSA configuration",
            path.display()
        )));
    }
    Ok(cache.stage)
}
