//! Append-only, line-oriented record files used by the score and split caches.
//!
//! The first line of a file is a format header. A file whose header does not
//! match is ignored (and replaced on the next write). Unparseable record lines,
//! e.g. a torn final line after a crash, are skipped by the caller.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::warn;
use sha2::{Digest, Sha256};

pub(crate) fn digest(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

#[derive(Debug)]
pub(crate) struct AppendLog {
    path: Option<PathBuf>,
    header: &'static str,
    writer: Mutex<Option<BufWriter<File>>>,
}

impl AppendLog {
    pub(crate) fn disabled(header: &'static str) -> Self {
        Self {
            path: None,
            header,
            writer: Mutex::new(None),
        }
    }

    /// Open (or create) `path`, returning the log and its existing record lines.
    /// I/O failures leave the log disabled with a warning.
    pub(crate) fn open(path: &Path, header: &'static str) -> (Self, Vec<String>) {
        match Self::try_open(path, header) {
            Ok(ok) => ok,
            Err(e) => {
                warn!(
                    "cache file {} unusable, continuing without persistence: {e}",
                    path.display()
                );
                (Self::disabled(header), Vec::new())
            }
        }
    }

    fn try_open(path: &Path, header: &'static str) -> std::io::Result<(Self, Vec<String>)> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut records = Vec::new();
        let mut header_ok = false;
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            let mut lines = reader.lines();
            match lines.next() {
                Some(Ok(first)) if first == header => {
                    header_ok = true;
                    for line in lines {
                        match line {
                            Ok(l) => records.push(l),
                            Err(e) => {
                                warn!("stopped reading {} at unreadable line: {e}", path.display());
                                break;
                            }
                        }
                    }
                }
                Some(Ok(first)) => warn!(
                    "cache file {} has header {first:?}, expected {header:?}; starting fresh",
                    path.display()
                ),
                _ => {}
            }
        }
        let file = if header_ok {
            OpenOptions::new().append(true).open(path)?
        } else {
            let mut f = File::create(path)?;
            writeln!(f, "{header}")?;
            f
        };
        let log = Self {
            path: Some(path.to_owned()),
            header,
            writer: Mutex::new(Some(BufWriter::new(file))),
        };
        Ok((log, records))
    }

    pub(crate) fn append<I: IntoIterator<Item = String>>(&self, lines: I) {
        let mut guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let Some(writer) = guard.as_mut() else { return };
        let result = (|| {
            for line in lines {
                writer.write_all(line.as_bytes())?;
                writer.write_all(b"\n")?;
            }
            writer.flush()
        })();
        if let Err(e) = result {
            warn!("cache append failed, disabling persistence: {e}");
            *guard = None;
        }
    }

    /// Truncate the file back to just its header.
    pub(crate) fn reset(&self) {
        let mut guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let Some(path) = &self.path else { return };
        let result = (|| {
            let mut f = File::create(path)?;
            writeln!(f, "{}", self.header)?;
            Ok::<_, std::io::Error>(f)
        })();
        match result {
            Ok(f) => *guard = Some(BufWriter::new(f)),
            Err(e) => {
                warn!("cache reset failed: {e}");
                *guard = None;
            }
        }
    }

    pub(crate) fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }
}
