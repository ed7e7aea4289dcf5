//! On-disk copy of the I_a memo cache, one text file per edge weight.

use crate::error::{CliError, CliResult};
use dimer_sg::kernel_exact::{ia_cache_entries, ia_cache_insert, WeightParams};
use std::fmt::Write;
use std::path::PathBuf;

pub const CACHE_ENV: &str = "DIMER_SG_CACHE_DIR";

pub struct IaCache {
    dir: Option<PathBuf>,
}

impl IaCache {
    pub fn from_env() -> Self {
        Self {
            dir: std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
        }
    }

    fn file(&self, p: &WeightParams) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(format!("ia-{:016x}.txt", p.a().to_bits())))
    }

    /// Seeds the in-memory cache from disk. A missing file is not an error.
    pub fn load(&self, p: &WeightParams) -> CliResult<()> {
        let Some(path) = self.file(p) else { return Ok(()) };
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let bad = || CliError::usage(format!("{}:{}: malformed cache line", path.display(), n + 1));
            let mut it = line.split_whitespace();
            let k: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let l: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let v: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            entries.push((k, l, v));
        }
        ia_cache_insert(&entries, p);
        Ok(())
    }

    /// Writes every cached value for this weight.
    pub fn save(&self, p: &WeightParams) -> CliResult<()> {
        let Some(path) = self.file(p) else { return Ok(()) };
        let entries = ia_cache_entries(p);
        if entries.is_empty() {
            return Ok(());
        }
        if let Some(dir) = &self.dir {
            std::fs::create_dir_all(dir)?;
        }
        let mut text = format!("# I_a cache, a = {:e}\n", p.a());
        for (k, l, v) in entries {
            // `{:e}` prints the shortest digits that round-trip
            writeln!(text, "{k} {l} {v:e}").expect("writing to a String");
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }
}
