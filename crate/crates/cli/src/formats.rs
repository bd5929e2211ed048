use std::path::Path;

use pdx_itr_core::treatment_tree::Dendrogram;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    payload: T,
}

/// Pretty JSON wrapped as `{format, version, payload}`.
pub fn to_versioned_json<T: Serialize>(format: &str, payload: &T) -> CliResult<String> {
    let env = Envelope {
        format: format.to_string(),
        version: FORMAT_VERSION,
        payload,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// The `format` tag of an artifact, without decoding its payload.
pub fn artifact_format(path: &Path, text: &str) -> CliResult<String> {
    #[derive(Deserialize)]
    struct Head {
        format: String,
        version: u32,
    }
    let head: Head = serde_json::from_str(text).map_err(|e| CliError::input(path, e.line() as u64, e.to_string()))?;
    if head.version != FORMAT_VERSION {
        return Err(CliError::input(
            path,
            1,
            format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                head.version
            ),
        ));
    }
    Ok(head.format)
}

pub fn from_versioned_json<T: DeserializeOwned>(path: &Path, format: &str, text: &str) -> CliResult<T> {
    let found = artifact_format(path, text)?;
    if found != format {
        return Err(CliError::input(
            path,
            1,
            format!("expected a `{format}` artifact, found `{found}`"),
        ));
    }
    let env: Envelope<T> =
        serde_json::from_str(text).map_err(|e| CliError::input(path, e.line() as u64, e.to_string()))?;
    Ok(env.payload)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_artifact<T: DeserializeOwned>(path: &Path, format: &str) -> CliResult<T> {
    from_versioned_json(path, format, &read_text(path)?)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    std::io::Write::write_all(&mut tmp, bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_artifact<T: Serialize>(path: &Path, format: &str, payload: &T) -> CliResult<()> {
    write_atomic(path, to_versioned_json(format, payload)?.as_bytes())
}

/// Tab-separated merge list. Leaves are numbered `0..n`; merge `k` creates
/// node `n + k`.
pub fn dendrogram_text(d: &Dendrogram) -> String {
    let mut out = String::new();
    out.push_str(&format!("# c1\t{}\n", d.c1));
    let null: Vec<&str> = d.null_group.iter().map(|&t| d.treatments[t].id.as_str()).collect();
    out.push_str(&format!("# null_group\t{}\n", null.join(",")));
    out.push_str("kind\tnode\ttreatment_or_left\tright\theight\tsize\n");
    for (i, &t) in d.leaves.iter().enumerate() {
        out.push_str(&format!("leaf\t{i}\t{}\t\t0\t1\n", d.treatments[t].id));
    }
    let n = d.leaves.len();
    for (k, m) in d.merges.iter().enumerate() {
        out.push_str(&format!(
            "merge\t{}\t{}\t{}\t{}\t{}\n",
            n + k,
            m.left,
            m.right,
            m.height,
            m.size
        ));
    }
    out
}
