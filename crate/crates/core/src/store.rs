//! Text persistence for meta-bases and cluster models. Both formats are
//! line-oriented UTF-8 with LF endings and space-separated fields, written
//! canonically so equal inputs produce byte-identical files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::cluster::{ClusterModel, Merge};
use crate::orientation::CoreBits;
use crate::rfpcode::{ClassLabel, MetaBase, RidgeFlowPattern, RFP_LEN};

pub const META_HEADER: &str = "RFPMETA 1";
pub const CLUSTERS_HEADER: &str = "RFPCLUSTERS 1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown record id {id:?} referenced by the cluster file")]
    Reference { id: String },
}

fn parse_err(line: usize, msg: impl Into<String>) -> StoreError {
    StoreError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Serializes a meta-base: header line, then one record per line as
/// `<image_id> <class|?> <alpha> <beta> <delta> <c1> … <c32>`.
pub fn metabase_to_string(meta: &MetaBase) -> String {
    let mut out = String::from(META_HEADER);
    out.push('\n');
    for r in &meta.records {
        let class = r.class_label.map_or("?", |c| c.name());
        write!(out, "{} {} {} {} {}", r.image_id, class, r.alpha, r.beta, r.delta).unwrap();
        for &c in &r.codes {
            write!(out, " {c}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn metabase_from_str(text: &str) -> Result<MetaBase, StoreError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == META_HEADER => {}
        Some((_, other)) => {
            return Err(parse_err(1, format!("bad header {other:?}, expected {META_HEADER:?}")))
        }
        None => return Err(parse_err(1, "empty file")),
    }
    let mut meta = MetaBase::default();
    let mut seen = BTreeSet::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() {
            return Err(parse_err(lineno, "empty record line"));
        }
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() != 5 + RFP_LEN {
            return Err(parse_err(
                lineno,
                format!("expected {} fields, found {}", 5 + RFP_LEN, fields.len()),
            ));
        }
        let image_id = fields[0].to_string();
        if !seen.insert(image_id.clone()) {
            return Err(parse_err(lineno, format!("duplicate image id {image_id:?}")));
        }
        let class_label = match fields[1] {
            "?" => None,
            name => Some(
                name.parse::<ClassLabel>()
                    .map_err(|e| parse_err(lineno, e))?,
            ),
        };
        let alpha: u32 = fields[2]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad alpha {:?}", fields[2])))?;
        let beta: u32 = fields[3]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad beta {:?}", fields[3])))?;
        let delta: CoreBits = fields[4].parse().map_err(|e| parse_err(lineno, e))?;
        let mut codes = Vec::with_capacity(RFP_LEN);
        for f in &fields[5..] {
            let code: u8 = f
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad code {f:?}")))?;
            if code > 7 {
                return Err(parse_err(lineno, format!("code {code} out of range 0..=7")));
            }
            codes.push(code);
        }
        let mut record = RidgeFlowPattern::new(image_id, codes);
        record.class_label = class_label;
        record.alpha = alpha;
        record.beta = beta;
        record.delta = delta;
        meta.records.push(record);
    }
    Ok(meta)
}

pub fn save_metabase(meta: &MetaBase, path: impl AsRef<Path>) -> Result<(), StoreError> {
    write_atomic(path.as_ref(), metabase_to_string(meta).as_bytes())
}

pub fn load_metabase(path: impl AsRef<Path>) -> Result<MetaBase, StoreError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    metabase_from_str(&text)
}

/// Serializes a cluster model: header, `C <id> <members…>` per cluster,
/// `O <record>` per outlier, `M <left> <right> <new> <goodness>` per merge
/// with the goodness fixed to nine decimals.
pub fn clusters_to_string(model: &ClusterModel) -> String {
    let mut out = String::from(CLUSTERS_HEADER);
    out.push('\n');
    for (i, members) in model.clusters.iter().enumerate() {
        write!(out, "C {}", i + 1).unwrap();
        for m in members {
            write!(out, " {m}").unwrap();
        }
        out.push('\n');
    }
    for o in &model.outliers {
        writeln!(out, "O {o}").unwrap();
    }
    for m in &model.dendrogram {
        writeln!(out, "M {} {} {} {:.9}", m.left, m.right, m.merged, m.goodness).unwrap();
    }
    out
}

pub fn clusters_from_str(text: &str) -> Result<ClusterModel, StoreError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CLUSTERS_HEADER => {}
        Some((_, other)) => {
            return Err(parse_err(
                1,
                format!("bad header {other:?}, expected {CLUSTERS_HEADER:?}"),
            ))
        }
        None => return Err(parse_err(1, "empty file")),
    }
    let mut model = ClusterModel::default();
    for (i, line) in lines {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(' ').collect();
        match fields.first() {
            Some(&"C") => {
                if fields.len() < 3 {
                    return Err(parse_err(lineno, "cluster line needs an id and members"));
                }
                let id: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad cluster id {:?}", fields[1])))?;
                if id != model.clusters.len() + 1 {
                    return Err(parse_err(
                        lineno,
                        format!("cluster ids must be consecutive; expected {}", model.clusters.len() + 1),
                    ));
                }
                model
                    .clusters
                    .push(fields[2..].iter().map(|s| s.to_string()).collect());
            }
            Some(&"O") => {
                if fields.len() != 2 {
                    return Err(parse_err(lineno, "outlier line needs one record id"));
                }
                model.outliers.push(fields[1].to_string());
            }
            Some(&"M") => {
                if fields.len() != 5 {
                    return Err(parse_err(lineno, "merge line needs 4 fields"));
                }
                let goodness: f64 = fields[4]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad goodness {:?}", fields[4])))?;
                model.dendrogram.push(Merge {
                    left: fields[1].to_string(),
                    right: fields[2].to_string(),
                    merged: fields[3].to_string(),
                    goodness,
                });
            }
            _ => {
                return Err(parse_err(
                    lineno,
                    format!("unknown line tag {:?}", fields.first().unwrap_or(&"")),
                ))
            }
        }
    }
    Ok(model)
}

pub fn save_clusters(model: &ClusterModel, path: impl AsRef<Path>) -> Result<(), StoreError> {
    write_atomic(path.as_ref(), clusters_to_string(model).as_bytes())
}

pub fn load_clusters(path: impl AsRef<Path>) -> Result<ClusterModel, StoreError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    clusters_from_str(&text)
}

/// Checks that every id the model references exists in the meta-base.
pub fn validate_model_against(model: &ClusterModel, meta: &MetaBase) -> Result<(), StoreError> {
    let known: BTreeSet<&str> = meta.records.iter().map(|r| r.image_id.as_str()).collect();
    for id in model
        .clusters
        .iter()
        .flatten()
        .chain(model.outliers.iter())
    {
        if !known.contains(id.as_str()) {
            return Err(StoreError::Reference { id: id.clone() });
        }
    }
    Ok(())
}

/// Atomic file write: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let io_err = |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp_path = std::path::PathBuf::from(tmp);
    if let Some(dir) = dir {
        if !dir.exists() {
            return Err(io_err(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "parent directory does not exist",
            )));
        }
    }
    fs::write(&tmp_path, bytes).map_err(io_err)?;
    fs::rename(&tmp_path, path).map_err(io_err)
}
