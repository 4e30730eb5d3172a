//! Dataset manifest and the download/normalize step behind `fetch-data`.

use crate::data::{load_csv, validate_spec, ColumnSpec, DataError, RawTable};
use serde::{Deserialize, Serialize};
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

pub const DATA_DIR_ENV: &str = "METATREE_DATA_DIR";

const BUILTIN: &str = include_str!("../datasets.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "dataset")]
    pub datasets: Vec<DatasetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub url: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default)]
    pub has_header: bool,
    /// Lines starting with this character are ignored.
    #[serde(default)]
    pub comment: Option<String>,
    /// Members to descend through when the source is a zip archive.
    #[serde(default)]
    pub archive_path: Vec<String>,
    #[serde(default)]
    pub expected_rows: Option<usize>,
    pub columns: Vec<ColumnSpec>,
}

fn default_delimiter() -> String {
    ",".into()
}

impl Manifest {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled manifest parses")
    }

    pub fn parse(text: &str) -> Result<Self, DataError> {
        let m: Self = toml::from_str(text).map_err(|e| DataError::Spec(e.to_string()))?;
        for d in &m.datasets {
            validate_spec(&d.columns).map_err(|e| DataError::Spec(format!("{}: {e}", d.name)))?;
            if d.delimiter.len() != 1 {
                return Err(DataError::Spec(format!("{}: delimiter must be one byte", d.name)));
            }
        }
        Ok(m)
    }

    pub fn from_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn get(&self, name: &str) -> Option<&DatasetEntry> {
        self.datasets.iter().find(|d| d.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.datasets.iter().map(|d| d.name.as_str()).collect()
    }
}

/// `$METATREE_DATA_DIR`, falling back to `./data`.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"))
}

pub fn dataset_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.csv"))
}

impl DatasetEntry {
    pub fn load(&self, dir: &Path) -> Result<RawTable, DataError> {
        load_csv(&dataset_path(dir, &self.name), &self.columns)
    }

    pub fn is_fetched(&self, dir: &Path) -> bool {
        dataset_path(dir, &self.name).is_file()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchReport {
    pub name: String,
    pub path: PathBuf,
    pub rows: usize,
}

fn download(url: &str) -> Result<Vec<u8>, DataError> {
    let response = ureq::get(url).call().map_err(|e| DataError::Invalid(format!("GET {url}: {e}")))?;
    let mut buf = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut buf)
        .map_err(|source| DataError::Io { path: url.into(), source })?;
    Ok(buf)
}

fn gunzip_if_needed(bytes: Vec<u8>) -> Result<Vec<u8>, DataError> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::MultiGzDecoder::new(&bytes[..])
            .read_to_end(&mut out)
            .map_err(|source| DataError::Io { path: "<gzip stream>".into(), source })?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

fn unzip_member(bytes: Vec<u8>, member: &str) -> Result<Vec<u8>, DataError> {
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| DataError::Invalid(format!("zip: {e}")))?;
    let mut file = archive
        .by_name(member)
        .map_err(|e| DataError::Invalid(format!("zip member {member:?}: {e}")))?;
    let mut out = Vec::new();
    file.read_to_end(&mut out).map_err(|source| DataError::Io { path: member.into(), source })?;
    Ok(out)
}

/// Normalizes raw bytes: positional mapping onto the spec columns, output as
/// comma-separated text with the spec names as header.
pub fn normalize(entry: &DatasetEntry, bytes: &[u8]) -> Result<(Vec<u8>, usize), DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(entry.delimiter.as_bytes()[0])
        .has_headers(entry.has_header)
        .comment(entry.comment.as_ref().and_then(|c| c.bytes().next()))
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(entry.columns.iter().map(|c| c.name.as_str()))?;
    let mut rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != entry.columns.len() {
            return Err(DataError::Width { row: i + 1, expected: entry.columns.len(), got: record.len() });
        }
        wtr.write_record(&record)?;
        rows += 1;
    }
    let out = wtr.into_inner().map_err(|e| DataError::Invalid(e.to_string()))?;
    Ok((out, rows))
}

/// Fetches `entry` from its URL, or from `source` when given, and writes the
/// normalized CSV into `dir`.
pub fn fetch(entry: &DatasetEntry, dir: &Path, source: Option<&Path>) -> Result<FetchReport, DataError> {
    let mut bytes = match source {
        Some(p) => std::fs::read(p).map_err(|e| DataError::Io { path: p.into(), source: e })?,
        None => {
            log::info!("downloading {} from {}", entry.name, entry.url);
            download(&entry.url)?
        }
    };
    if bytes.starts_with(b"PK\x03\x04") {
        for member in &entry.archive_path {
            bytes = unzip_member(bytes, member)?;
        }
    }
    let bytes = gunzip_if_needed(bytes)?;
    let (normalized, rows) = normalize(entry, &bytes)?;
    if let Some(expected) = entry.expected_rows {
        if expected != rows {
            log::warn!("{}: expected {expected} rows, found {rows}", entry.name);
        }
    }
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io { path: dir.into(), source })?;
    let path = dataset_path(dir, &entry.name);
    std::fs::write(&path, normalized).map_err(|source| DataError::Io { path: path.clone(), source })?;
    Ok(FetchReport { name: entry.name.clone(), path, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnKind;

    #[test]
    fn builtin_manifest_matches_dataset_table() {
        let m = Manifest::builtin();
        // (name, continuous, discrete) before encoding
        for (name, p, q) in [("abalone", 7, 1), ("cps", 3, 7), ("diabetes", 9, 1), ("liver", 5, 0), ("ozone", 8, 0), ("student", 13, 17)] {
            let d = m.get(name).unwrap();
            let count = |k| d.columns.iter().filter(|c| c.kind == k).count();
            assert_eq!(count(ColumnKind::Continuous) + count(ColumnKind::Ordinal), p, "{name}");
            assert_eq!(count(ColumnKind::Nominal), q, "{name}");
        }
    }

    #[test]
    fn normalize_keel_style_source() {
        let m = Manifest::builtin();
        let liver = m.get("liver").unwrap();
        let raw = b"@relation bupa\n@data\n85, 92, 45, 27, 31, 0.0, 1\n85, 64, 59, 32, 23, 0.0, 2\n";
        let (out, rows) = normalize(liver, raw).unwrap();
        assert_eq!(rows, 2);
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("mcv,alkphos,sgpt,sgot,gammagt,drinks,selector\n85,92,45,27,31,0.0,1\n"));
    }
}
