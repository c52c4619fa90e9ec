//! Parameter checkpoints: a little-endian binary body (`EVOC`, version,
//! length, floats) plus a `key=value` text sidecar at `<path>.meta`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EVOC";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: Vec<f32>,
    pub algorithm: String,
    pub iteration: u64,
    pub score: f32,
    /// Additional sidecar entries, such as the task and policy the
    /// parameters belong to.
    pub extra: BTreeMap<String, String>,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn encode(params: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], file: &str) -> Result<Vec<f32>> {
    let err = |field: &'static str, detail: String| Error::Format { file: file.to_string(), field, detail };
    if bytes.len() < HEADER_LEN {
        return Err(err("header", format!("{} bytes is shorter than the {HEADER_LEN}-byte header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(err("magic", format!("expected \"EVOC\", found {:?}", &bytes[..4])));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(err("version", format!("expected {VERSION}, found {version}")));
    }
    let d = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    if d.checked_mul(4) != Some(body.len() as u64) {
        return Err(err("length", format!("header declares {d} floats but body has {} bytes", body.len())));
    }
    Ok(body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut meta = format!("algo={}\niteration={}\nscore={}\n", ckpt.algorithm, ckpt.iteration, ckpt.score);
    for (k, v) in &ckpt.extra {
        meta.push_str(&format!("{k}={v}\n"));
    }
    write_atomic(path, &encode(&ckpt.params))?;
    write_atomic(&meta_path(path), meta.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let params = decode(&bytes, &path.display().to_string())?;
    let mpath = meta_path(path);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let file = mpath.display().to_string();
    let err = |field: &'static str, detail: String| Error::Format { file: file.clone(), field, detail };
    let mut entries = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| err("line", format!("line {} has no '='", n + 1)))?;
        entries.insert(k.to_string(), v.to_string());
    }
    let mut take = |key: &'static str| entries.remove(key).ok_or_else(|| err(key, "missing".into()));
    let algorithm = take("algo")?;
    let iteration = take("iteration")?;
    let score = take("score")?;
    Ok(Checkpoint {
        params,
        algorithm,
        iteration: iteration.parse().map_err(|_| err("iteration", format!("not an integer: {iteration}")))?,
        score: score.parse().map_err(|_| err("score", format!("not a number: {score}")))?,
        extra: entries,
    })
}
