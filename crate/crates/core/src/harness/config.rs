use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// `key = value` lines; `#` starts a comment. Later keys override earlier ones.
pub fn parse_config(text: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::parse(origin, n + 1, format!("expected key=value, got {line:?}")));
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::parse(origin, n + 1, "empty key"));
        }
        out.insert(k.replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_normalizes_keys() {
        let c = parse_config("# grid\nmax_bins = 32\nseed=7 # trailing\n\n", Path::new("c.conf")).unwrap();
        assert_eq!(c["max-bins"], "32");
        assert_eq!(c["seed"], "7");
    }

    #[test]
    fn malformed_line_names_position() {
        let e = parse_config("a=1\nbogus\n", Path::new("c.conf")).unwrap_err();
        assert_eq!(e.to_string(), "c.conf:2: expected key=value, got \"bogus\"");
    }
}
