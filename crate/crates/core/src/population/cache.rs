//! Append-only completion cache. One JSON object per line; a torn final
//! line from an interrupted run is ignored on read.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::Gene;
use crate::rng::hash_str;

#[derive(Serialize, Deserialize)]
struct Entry {
    gene: String,
    ctx: String,
    draw: u64,
    text: String,
}

type Key = (String, u64, u64);

fn key(gene: &Gene, draw: u64) -> Key {
    (gene.id.clone(), hash_str(&gene.context), draw)
}

#[derive(Debug, Default)]
pub struct CompletionCache {
    entries: HashMap<Key, String>,
}

impl CompletionCache {
    /// Reads `path`, returning an empty cache when the file does not exist.
    pub fn read(path: &Path) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Self::default()),
            Err(e) => return Err(Error::io(path, e)),
        };
        let mut entries = HashMap::new();
        let lines: Vec<&str> = text.split('\n').collect();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Entry>(line) {
                Ok(e) => {
                    let ctx = u64::from_str_radix(&e.ctx, 16)
                        .map_err(|_| Error::parse(path, i + 1, "bad context hash"))?;
                    entries.insert((e.gene, ctx, e.draw), e.text);
                }
                // last line without a terminating newline: interrupted write
                Err(_) if i + 1 == lines.len() => {
                    log::warn!("{}: ignoring torn final cache line", path.display());
                }
                Err(e) => return Err(Error::parse(path, i + 1, e.to_string())),
            }
        }
        Ok(CompletionCache { entries })
    }

    pub fn get(&self, gene: &Gene, draw: u64) -> Option<&str> {
        self.entries.get(&key(gene, draw)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Single writer appending entries as probes complete.
pub struct CacheWriter {
    path: PathBuf,
    out: Mutex<BufWriter<File>>,
}

impl CacheWriter {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        // Drop a torn line left by an interrupted run before appending.
        if let Ok(bytes) = std::fs::read(path) {
            if bytes.last().is_some_and(|&c| c != b'\n') {
                let keep = bytes.iter().rposition(|&c| c == b'\n').map_or(0, |p| p + 1);
                let f = OpenOptions::new()
                    .write(true)
                    .open(path)
                    .map_err(|e| Error::io(path, e))?;
                f.set_len(keep as u64).map_err(|e| Error::io(path, e))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(CacheWriter {
            path: path.to_path_buf(),
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn append(&self, gene: &Gene, draw: u64, text: &str) -> Result<()> {
        let entry = Entry {
            gene: gene.id.clone(),
            ctx: format!("{:016x}", hash_str(&gene.context)),
            draw,
            text: text.to_string(),
        };
        let line = serde_json::to_string(&entry).expect("cache entry serializes");
        let mut out = self.out.lock().expect("cache writer poisoned");
        writeln!(out, "{line}")
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torn_tail_is_ignored_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let g = Gene {
            id: "g".into(),
            context: "ctx".into(),
            source: "s".into(),
            cut_index: 3,
        };
        {
            let w = CacheWriter::open(&path).unwrap();
            w.append(&g, 0, "abcd").unwrap();
            w.append(&g, 1, "efgh").unwrap();
        }
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(b"{\"gene\":\"g\",\"ct");
        std::fs::write(&path, bytes).unwrap();
        let c = CompletionCache::read(&path).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get(&g, 1), Some("efgh"));

        CacheWriter::open(&path)
            .unwrap()
            .append(&g, 2, "ijkl")
            .unwrap();
        let c = CompletionCache::read(&path).unwrap();
        assert_eq!(c.get(&g, 2), Some("ijkl"));
    }

    #[test]
    fn context_change_misses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let g = Gene {
            id: "g".into(),
            context: "ctx".into(),
            source: "s".into(),
            cut_index: 3,
        };
        CacheWriter::open(&path)
            .unwrap()
            .append(&g, 0, "abcd")
            .unwrap();
        let wrapped = Gene {
            context: "User:ctx".into(),
            ..g.clone()
        };
        let c = CompletionCache::read(&path).unwrap();
        assert!(c.get(&wrapped, 0).is_none());
        assert!(c.get(&g, 0).is_some());
    }
}
