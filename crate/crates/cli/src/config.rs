//! Flat key-value configuration with dotted sections:
//!
//! ```text
//! # comment
//! model.beta = 5.0
//! forcing.f.coeffs = 1:1.0,3:0.25
//! ```
//!
//! Every run echoes the fully resolved configuration (defaults included)
//! next to its outputs for reproducibility.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Keys actually consulted, with the value used (defaults included).
    resolved: std::sync::Mutex<BTreeMap<String, String>>,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {} is not `key = value`: {raw:?}", lineno + 1);
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self {
            values,
            resolved: Default::default(),
        })
    }

    fn note(&self, key: &str, value: &str) {
        self.resolved
            .lock()
            .unwrap()
            .insert(key.to_string(), value.to_string());
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        let v = match self.values.get(key) {
            Some(s) if !s.is_empty() => s
                .parse::<f64>()
                .with_context(|| format!("config key {key}: bad number {s:?}"))?,
            _ => default,
        };
        self.note(key, &format!("{v}"));
        Ok(v)
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.values.get(key) {
            Some(s) if !s.is_empty() => {
                let v = s
                    .parse::<f64>()
                    .with_context(|| format!("config key {key}: bad number {s:?}"))?;
                self.note(key, &format!("{v}"));
                Ok(Some(v))
            }
            _ => {
                self.note(key, "");
                Ok(None)
            }
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        let v = match self.values.get(key) {
            Some(s) if !s.is_empty() => s
                .parse::<usize>()
                .with_context(|| format!("config key {key}: bad integer {s:?}"))?,
            _ => default,
        };
        self.note(key, &format!("{v}"));
        Ok(v)
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        let v = self
            .values
            .get(key)
            .map(|s| s.as_str())
            .filter(|s| !s.is_empty())
            .unwrap_or(default)
            .to_string();
        self.note(key, &v);
        v
    }

    /// Comma-separated list of numbers.
    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v = match self.values.get(key) {
            Some(s) if !s.is_empty() => s
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .with_context(|| format!("config key {key}: bad number {x:?}"))
                })
                .collect::<Result<Vec<_>>>()?,
            _ => default.to_vec(),
        };
        self.note(
            key,
            &v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        );
        Ok(v)
    }

    /// `mode:amplitude` pairs, comma separated (empty list when unset).
    pub fn mode_list(&self, key: &str) -> Result<Vec<(usize, f64)>> {
        let v = match self.values.get(key) {
            Some(s) if !s.is_empty() => s
                .split(',')
                .map(|pair| -> Result<(usize, f64)> {
                    let Some((m, a)) = pair.split_once(':') else {
                        bail!("config key {key}: expected mode:amplitude, got {pair:?}");
                    };
                    Ok((
                        m.trim().parse::<usize>().context("bad mode index")?,
                        a.trim().parse::<f64>().context("bad amplitude")?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?,
            _ => Vec::new(),
        };
        self.note(
            key,
            &v.iter()
                .map(|(m, a)| format!("{m}:{a}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        Ok(v)
    }

    /// All keys consulted so far, rendered as a config file.
    pub fn resolved_echo(&self) -> String {
        let mut out = String::from("# resolved configuration (defaults included)\n");
        let resolved = self.resolved.lock().unwrap();
        for (k, v) in resolved.iter() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        // keys present in the file but never consulted
        let unused: Vec<_> = self
            .values
            .keys()
            .filter(|k| !resolved.contains_key(*k))
            .collect();
        if !unused.is_empty() {
            out.push_str("# unused keys:\n");
            for k in unused {
                out.push_str(&format!("# {k} = {}\n", self.values[k]));
            }
        }
        out
    }
}
