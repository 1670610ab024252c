//! System directories: `system.json` next to `phi.csv`, `psi_c.csv`, `psi.csv`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldMeta, SampledField};
use crate::lattice::{special_vectors, CanonicalForm, IntMat2};
use crate::lawton::FilterDocument;
use crate::scaling::SynthesisParams;
use crate::verify::VerificationReport;
use crate::wavelet::{SystemMeta, WaveletSystem};

pub const SYSTEM_FILE: &str = "system.json";
pub const REPORT_FILE: &str = "report.json";
pub const FIELD_NAMES: [&str; 3] = ["phi", "psi_c", "psi"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldIndex {
    pub phi: FieldMeta,
    pub psi_c: FieldMeta,
    pub psi: FieldMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    #[serde(rename = "A0")]
    pub a0: IntMat2,
    #[serde(rename = "S")]
    pub s: IntMat2,
    pub canonical: CanonicalForm,
    pub filter: FilterDocument,
    pub params: SynthesisParams,
    pub meta: SystemMeta,
    pub fields: FieldIndex,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<VerificationReport>,
}

impl SystemDocument {
    pub fn from_system(sys: &WaveletSystem, report: Option<VerificationReport>) -> Self {
        Self {
            a0: sys.a0,
            s: sys.s,
            canonical: sys.canonical,
            filter: sys.h.to_document(sys.canonical.matrix()),
            params: sys.params.clone(),
            meta: sys.meta.clone(),
            fields: FieldIndex {
                phi: sys.phi.meta(),
                psi_c: sys.psi_c.meta(),
                psi: sys.psi.meta(),
            },
            report,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let r = BufReader::new(open(path)?);
    serde_json::from_reader(r).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_field(path: &Path, f: &SampledField) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    f.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<SampledField> {
    SampledField::read_csv(BufReader::new(open(path)?))
}

/// `File::open` with the path in the error message.
fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn field_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.csv"))
}

/// Writes `system.json` and the three field files; `report.json` too when given.
pub fn save_system(
    dir: &Path,
    sys: &WaveletSystem,
    report: Option<&VerificationReport>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, f) in FIELD_NAMES.iter().zip([&sys.phi, &sys.psi_c, &sys.psi]) {
        write_field(&field_path(dir, name), f)?;
    }
    write_json(
        &dir.join(SYSTEM_FILE),
        &SystemDocument::from_system(sys, report.cloned()),
    )?;
    if let Some(r) = report {
        write_json(&dir.join(REPORT_FILE), r)?;
    }
    Ok(())
}

/// Reads a system directory back. The stored matrices and fields must agree
/// with each other.
pub fn load_system(dir: &Path) -> Result<WaveletSystem> {
    let doc: SystemDocument = read_json(&dir.join(SYSTEM_FILE))?;
    let h = doc.filter.to_filter()?;
    let canon = doc.canonical.matrix();
    if doc.filter.matrix != canon {
        return Err(Error::Parse(format!(
            "filter matrix {} differs from canonical {canon}",
            doc.filter.matrix
        )));
    }
    if doc.s.mul(&doc.a0) != canon.mul(&doc.s) || !doc.s.is_unimodular() {
        return Err(Error::Parse(format!(
            "S = {} does not conjugate A0 = {} to {canon}",
            doc.s, doc.a0
        )));
    }
    let load = |name: &str, meta: &FieldMeta| -> Result<SampledField> {
        let f = read_field(&field_path(dir, name))?;
        if f.meta() != *meta {
            return Err(Error::Parse(format!(
                "{name}.csv header does not match {SYSTEM_FILE}"
            )));
        }
        Ok(f)
    };
    let phi = load("phi", &doc.fields.phi)?;
    let psi_c = load("psi_c", &doc.fields.psi_c)?;
    let psi = load("psi", &doc.fields.psi)?;
    Ok(WaveletSystem {
        a0: doc.a0,
        s: doc.s,
        canonical: doc.canonical,
        lattice: special_vectors(&doc.canonical),
        h,
        phi,
        psi_c,
        psi,
        params: doc.params,
        meta: doc.meta,
    })
}

/// Export format: `NAME.json` with the grid metadata and `NAME.values.csv`
/// holding one `re,im` row per sample in row-major order.
pub fn export_field(dir: &Path, name: &str, f: &SampledField) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let meta_path = dir.join(format!("{name}.json"));
    let values_path = dir.join(format!("{name}.values.csv"));
    write_json(&meta_path, &f.meta())?;
    let mut w = BufWriter::new(create(&values_path)?);
    f.write_values_csv(&mut w)?;
    w.flush()?;
    Ok((meta_path, values_path))
}

pub fn import_field(meta_path: &Path, values_path: &Path) -> Result<SampledField> {
    let meta: FieldMeta = read_json(meta_path)?;
    SampledField::from_meta_and_values(&meta, BufReader::new(open(values_path)?))
}
