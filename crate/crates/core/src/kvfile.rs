//! Flat `key = value` files with `#` comments.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type KeyValues = BTreeMap<String, String>;

pub fn parse(text: &str) -> Result<KeyValues> {
    let mut out = KeyValues::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key '{key}'",
                i + 1
            )));
        }
    }
    Ok(out)
}

pub fn get_parsed<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<Option<T>> {
    kv.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
        })
        .transpose()
}

pub fn require<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<T> {
    get_parsed(kv, key)?.ok_or_else(|| Error::Config(format!("missing key '{key}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let kv = parse("# header\na = 1\n\n b=two # trailing\n").unwrap();
        assert_eq!(kv["a"], "1");
        assert_eq!(kv["b"], "two");
        assert_eq!(require::<i32>(&kv, "a").unwrap(), 1);
        assert!(require::<i32>(&kv, "b").is_err());
        assert!(require::<i32>(&kv, "c").is_err());
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse("novalue\n").is_err());
        assert!(parse("a = 1\na = 2\n").is_err());
        assert!(parse(" = 1\n").is_err());
    }
}
