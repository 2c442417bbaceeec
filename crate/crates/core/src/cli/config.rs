//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Accepted keys with a one-line description, in manifest order.
pub const KEYS: &[(&str, &str)] = &[
    ("L", "half-width of the square domain [-L, L]^2 (real)"),
    ("h", "grid spacing; accepts `1/64` (real)"),
    ("f", "obstacle source: `const:<value>` or a mafb-grid path"),
    ("v0", "boundary data: `radial-exact`, `quadratic:<c>` or a mafb-grid path"),
    ("tol", "solver residual tolerance (real)"),
    ("max_sweeps", "per-level sweep cap (integer)"),
    ("n", "dimension of the half-space experiments (integer)"),
    ("b", "weight exponent of x_n^b (real)"),
    ("seed", "seed of randomized suites (integer)"),
    ("cases", "size of the random decomposition suite (integer)"),
    ("points", "sample points of the manufactured-solution test (integer)"),
];

/// Resolved parameters: defaults, then the config file, then flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    /// Directory that relative paths in the file are resolved against.
    base: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig {
            values: BTreeMap::new(),
            base: base.to_path_buf(),
        };
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", ln + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if v.is_empty() {
                return Err(Error::Parse(format!("line {}: empty value for `{k}`", ln + 1)));
            }
            if cfg.values.contains_key(k) {
                return Err(Error::Parse(format!("line {}: duplicate key `{k}`", ln + 1)));
            }
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::Parse(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn real(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key).map(|v| parse_real(v).map_err(|e| Error::Parse(format!("`{key}`: {e}")))).transpose()
    }

    pub fn integer(&self, key: &str) -> Result<Option<u64>> {
        self.raw(key)
            .map(|v| v.parse::<u64>().map_err(|_| Error::Parse(format!("`{key}`: `{v}` is not a non-negative integer"))))
            .transpose()
    }

    /// `value` as a path, relative ones taken from the config directory.
    pub fn path(&self, value: &str) -> PathBuf {
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// `key = value` lines in [`KEYS`] order.
    pub fn echo(&self) -> String {
        KEYS.iter()
            .filter_map(|(k, _)| self.values.get(*k).map(|v| format!("{k} = {v}\n")))
            .collect()
    }
}

/// A real number, or a quotient `p/q` of two.
pub fn parse_real(text: &str) -> std::result::Result<f64, String> {
    let value = match text.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("`{text}` is not a number"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("`{text}` is not a number"))?;
            p / q
        }
        None => text.trim().parse().map_err(|_| format!("`{text}` is not a number"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{text}` is not finite"))
    }
}

/// Text of the key schema, printed with usage errors.
pub fn schema() -> String {
    let mut s = String::from("config keys (flat `key = value`, `#` starts a comment):\n");
    for (k, d) in KEYS {
        s.push_str(&format!("  {k:<11} {d}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_fractions() {
        let c = RunConfig::parse("# radial\nL = 2\nh = 1/64  # fine\nf = const:1\n", Path::new("/cfg")).unwrap();
        assert_eq!(c.real("h").unwrap(), Some(1.0 / 64.0));
        assert_eq!(c.raw("f"), Some("const:1"));
        assert_eq!(c.path("v.grid"), PathBuf::from("/cfg/v.grid"));
        assert_eq!(c.echo(), "L = 2\nh = 1/64\nf = const:1\n");
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        let base = Path::new(".");
        assert_eq!(RunConfig::parse("depth = 3\n", base).unwrap_err().token(), "parse");
        assert!(RunConfig::parse("L = 1\nL = 2\n", base).is_err());
        assert!(RunConfig::parse("L 2\n", base).is_err());
        assert!(RunConfig::parse("h = 1/0\n", base).unwrap().real("h").is_err());
    }
}
