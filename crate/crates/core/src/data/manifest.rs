//! Labelled image manifests: `path,label[,split]` CSV files.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::label::Label;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!(
                "unknown split '{other}' (expected train, validation or test)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Path as written in the manifest.
    pub image_path: PathBuf,
    pub label: Label,
    pub split: Option<Split>,
}

/// How [`load_manifest`] treats missing files and duplicate paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strictness {
    /// Missing or duplicate paths are errors.
    Strict,
    /// Missing or duplicate paths are recorded as warnings.
    Lenient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub samples: Vec<Sample>,
    /// Tallies indexed by [`Label::index`].
    pub class_counts: [usize; Label::NUM_CLASSES],
    /// Seed of the split assignment, once assigned.
    pub seed: Option<u64>,
    /// Directory relative image paths resolve against.
    pub base_dir: PathBuf,
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    pub fn new(samples: Vec<Sample>, base_dir: impl Into<PathBuf>) -> Self {
        let mut class_counts = [0; Label::NUM_CLASSES];
        for s in &samples {
            class_counts[s.label.index()] += 1;
        }
        Self {
            samples,
            class_counts,
            seed: None,
            base_dir: base_dir.into(),
            warnings: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn resolve(&self, sample: &Sample) -> PathBuf {
        self.base_dir.join(&sample.image_path)
    }

    pub fn has_splits(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.split.is_some())
    }

    /// Manifest-order indices of the samples in `split`.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.samples.len())
            .filter(|&i| self.samples[i].split == Some(split))
            .collect()
    }

    pub fn count(&self, split: Split, label: Label) -> usize {
        self.samples
            .iter()
            .filter(|s| s.split == Some(split) && s.label == label)
            .count()
    }

    /// Write as CSV; a `split` column is included when any sample has one.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let with_split = self.samples.iter().any(|s| s.split.is_some());
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let csv_err = |e: csv::Error| Error::Manifest(e.to_string());
        if with_split {
            w.write_record(["path", "label", "split"]).map_err(csv_err)?;
        } else {
            w.write_record(["path", "label"]).map_err(csv_err)?;
        }
        for s in &self.samples {
            let path = s.image_path.to_string_lossy();
            let code = s.label.code().to_string();
            if with_split {
                let split = s.split.map_or("", Split::as_str);
                w.write_record([path.as_ref(), &code, split]).map_err(csv_err)?;
            } else {
                w.write_record([path.as_ref(), &code]).map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Parse manifest CSV text. Relative paths resolve against `base_dir`.
pub fn parse_manifest<R: Read>(reader: R, base_dir: &Path, strictness: Strictness) -> Result<DatasetManifest> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Manifest(e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let has_split = match cols[..] {
        ["path", "label"] => false,
        ["path", "label", "split"] => true,
        _ => {
            return Err(Error::Manifest(format!(
                "header must be `path,label` or `path,label,split`, got `{}`",
                cols.join(",")
            )))
        }
    };

    let mut samples = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in rdr.records().enumerate() {
        // row numbers count the header as row 1
        let row = i + 2;
        let record = record.map_err(|e| Error::Manifest(format!("row {row}: {e}")))?;
        let path = PathBuf::from(record.get(0).unwrap_or_default());
        let raw_label = record.get(1).unwrap_or_default();
        let label = raw_label
            .parse::<u8>()
            .ok()
            .and_then(Label::from_code)
            .ok_or_else(|| Error::UnknownLabel {
                row,
                value: raw_label.to_string(),
            })?;
        let split = if has_split {
            match record.get(2).unwrap_or_default() {
                "" => None,
                v => Some(v.parse().map_err(|_| Error::UnknownSplit {
                    row,
                    value: v.to_string(),
                })?),
            }
        } else {
            None
        };
        if !seen.insert(path.clone()) {
            match strictness {
                Strictness::Strict => return Err(Error::DuplicatePath { row, path }),
                Strictness::Lenient => warnings.push(format!("row {row}: duplicate path {}", path.display())),
            }
        }
        if !base_dir.join(&path).is_file() {
            match strictness {
                Strictness::Strict => return Err(Error::MissingFile { row, path }),
                Strictness::Lenient => warnings.push(format!("row {row}: missing file {}", path.display())),
            }
        }
        samples.push(Sample {
            image_path: path,
            label,
            split,
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let mut manifest = DatasetManifest::new(samples, base_dir);
    manifest.warnings = warnings;
    Ok(manifest)
}

pub fn load_manifest(path: &Path, strictness: Strictness) -> Result<DatasetManifest> {
    let file = std::fs::File::open(path)?;
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    parse_manifest(file, &base, strictness)
}
