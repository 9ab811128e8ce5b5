//! CSV, JSON and Matrix Market emitters plus the checksummed manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use riga_core::costmodel::RunReport;
use riga_core::verify::ErrorRecord;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{io_err, CliError};
use crate::run::{FailureKind, FlopRow, PointFailure, PointResult, SpectrumRow};

pub const MANIFEST: &str = "manifest.json";
pub const FLOPS_SWEEP: &str = "flops_sweep.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointEntry {
    pub p: usize,
    pub level: u32,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<PointFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub library: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub config_sha256: String,
    pub seed: u64,
    pub created_unix: u64,
    /// Some sweep point failed; its outputs are missing.
    pub partial: bool,
    pub points: Vec<PointEntry>,
    pub files: Vec<FileEntry>,
}

/// Emitted artifacts of one experiment.
#[derive(Debug, Clone)]
pub struct OutputBundle {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub files: Vec<FileEntry>,
    pub failures: Vec<PointFailure>,
}

impl OutputBundle {
    pub fn partial(&self) -> bool {
        !self.failures.is_empty()
    }

    /// 0 on success, 3 when a solve failed (count mismatch or other).
    pub fn exit_code(&self) -> i32 {
        if self.partial() {
            3
        } else {
            0
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

pub fn point_stem(p: usize, level: u32) -> String {
    format!("p{p}_l{level}")
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>, csv::Error>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    fill(&mut w)?;
    Ok(w.into_inner().expect("flushing to memory"))
}

/// One row per eigenpair; eigenvalues with 17 significant digits.
pub fn spectrum_csv(rows: &[SpectrumRow]) -> Result<Vec<u8>, csv::Error> {
    csv_bytes(&["index", "lambda", "residual", "slice_id"], |w| {
        for r in rows {
            w.write_record([
                r.index.to_string(),
                format!("{:.16e}", r.lambda),
                format!("{:e}", r.residual),
                r.slice.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Error table; `EFL`/`EFE` are blank for modes without a function comparison.
pub fn error_csv(rows: &[ErrorRecord]) -> Result<Vec<u8>, csv::Error> {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    csv_bytes(&["mode", "i_over_N", "EV", "EFL", "EFE", "diagonal_flag"], |w| {
        for r in rows {
            w.write_record([
                r.mode.to_string(),
                format!("{:e}", r.i_over_n),
                format!("{:e}", r.ev),
                opt(r.efl),
                opt(r.efe),
                u8::from(r.diagonal).to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn flops_csv(rows: &[FlopRow]) -> Result<Vec<u8>, csv::Error> {
    let header = [
        "d",
        "ne",
        "p",
        "level",
        "blocksize",
        "N",
        "nnz_M",
        "fill_nnz",
        "factor_flops",
        "fb_flops",
        "matvec_flops",
        "model_factor_flops",
        "model_fb_flops",
    ];
    csv_bytes(&header, |w| {
        for r in rows {
            w.write_record([
                r.d.to_string(),
                r.ne.to_string(),
                r.p.to_string(),
                r.level.to_string(),
                r.blocksize.to_string(),
                r.n.to_string(),
                r.nnz_m.to_string(),
                r.fill_nnz.to_string(),
                r.factor_flops.to_string(),
                r.fb_flops.to_string(),
                r.matvec_flops.to_string(),
                format!("{:e}", r.model_factor_flops),
                format!("{:e}", r.model_fb_flops),
            ])?;
        }
        Ok(())
    })
}

pub fn report_json(report: &RunReport) -> Result<Vec<u8>, serde_json::Error> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<FileEntry>,
}

impl Writer<'_> {
    fn put(&mut self, name: String, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(&name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.files.push(FileEntry {
            path: name,
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn put_csv(&mut self, name: String, bytes: Result<Vec<u8>, csv::Error>) -> Result<(), CliError> {
        let bytes = bytes.map_err(|source| CliError::Csv {
            path: self.dir.join(&name),
            source,
        })?;
        self.put(name, &bytes)
    }
}

/// Write every artifact of `results` and then the manifest listing them.
pub fn write_bundle(config: &ExperimentConfig, results: &[PointResult]) -> Result<OutputBundle, CliError> {
    let dir = config.out.as_path();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut w = Writer {
        dir,
        files: Vec::new(),
    };
    let flop_rows: Vec<FlopRow> = results.iter().map(|r| r.flops.clone()).collect();
    w.put_csv(FLOPS_SWEEP.into(), flops_csv(&flop_rows))?;

    let mut points = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        let stem = point_stem(r.p, r.level);
        if let Some((k, m)) = &r.matrices {
            w.put(format!("K_{stem}.mtx"), k)?;
            w.put(format!("M_{stem}.mtx"), m)?;
        }
        let (status, failure) = match &r.solve {
            None => ("symbolic_only", None),
            Some(Ok(solved)) => {
                w.put_csv(format!("spectrum_{stem}.csv"), spectrum_csv(&solved.spectrum))?;
                w.put_csv(format!("errors_{stem}.csv"), error_csv(&solved.errors))?;
                w.put(format!("report_{stem}.json"), &report_json(&solved.report)?)?;
                ("ok", None)
            }
            Some(Err(f)) => {
                failures.push(f.clone());
                let status = match f.kind {
                    FailureKind::CountMismatch => "count_mismatch",
                    FailureKind::Solver => "solver_error",
                };
                (status, Some(f.clone()))
            }
        };
        points.push(PointEntry {
            p: r.p,
            level: r.level,
            seed: r.seed,
            n: r.flops.n,
            status,
            failure,
        });
    }

    let manifest = Manifest {
        library: "riga-core",
        version: riga_core::VERSION,
        config: config.clone(),
        config_sha256: sha256_hex(&serde_json::to_vec(config)?),
        seed: config.seed,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        partial: !failures.is_empty(),
        points,
        files: w.files.clone(),
    };
    let path = dir.join(MANIFEST);
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(OutputBundle {
        dir: dir.to_path_buf(),
        manifest: path,
        files: w.files,
        failures,
    })
}
