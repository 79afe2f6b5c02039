//! Static word-vector tables in the plain text format:
//! a `count dim` header, then one token followed by `dim` floats per line.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::raster::sha256_hex;

#[derive(Debug, Error)]
pub enum WordVectorError {
    #[error("cannot read word vectors: {0}")]
    Io(#[from] std::io::Error),
    #[error("word vector table line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("word vector checksum mismatch: expected {expected}, found {found}")]
    Checksum { expected: String, found: String },
}

#[derive(Debug, Clone)]
pub struct WordVectors {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    sha256: String,
}

impl WordVectors {
    pub fn parse(text: &str) -> Result<Self, WordVectorError> {
        let fmt_err = |line: usize, message: String| WordVectorError::Format { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| fmt_err(1, "empty file".into()))?;
        let mut head = header.split_whitespace();
        let count: usize = head
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| fmt_err(1, "header must be `count dim`".into()))?;
        let dim: usize = head
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| fmt_err(1, "header must be `count dim`".into()))?;
        if dim == 0 {
            return Err(fmt_err(1, "dimension must be positive".into()));
        }
        let mut vectors = HashMap::with_capacity(count);
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap().to_lowercase();
            let values: Vec<f64> = parts
                .map(|v| v.parse::<f64>().map_err(|e| fmt_err(i + 1, format!("{v:?}: {e}"))))
                .collect::<Result<_, _>>()?;
            if values.len() != dim {
                return Err(fmt_err(i + 1, format!("expected {dim} values, got {}", values.len())));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(fmt_err(i + 1, "non-finite value".into()));
            }
            vectors.insert(token, values);
        }
        if vectors.len() != count {
            return Err(fmt_err(1, format!("header says {count} rows, found {}", vectors.len())));
        }
        Ok(WordVectors {
            dim,
            vectors,
            sha256: sha256_hex(text.as_bytes()),
        })
    }

    /// Loads a table, optionally pinning its SHA-256.
    pub fn load(path: &Path, expected_sha256: Option<&str>) -> Result<Self, WordVectorError> {
        let bytes = std::fs::read(path)?;
        let found = sha256_hex(&bytes);
        if let Some(expected) = expected_sha256 {
            if !expected.eq_ignore_ascii_case(&found) {
                return Err(WordVectorError::Checksum {
                    expected: expected.to_string(),
                    found,
                });
            }
        }
        WordVectors::parse(&String::from_utf8_lossy(&bytes))
    }

    pub fn from_pairs<I, S>(dim: usize, pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let vectors: HashMap<String, Vec<f64>> = pairs
            .into_iter()
            .map(|(k, v)| {
                assert_eq!(v.len(), dim);
                (k.into(), v)
            })
            .collect();
        WordVectors {
            dim,
            vectors,
            sha256: String::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn sha256(&self) -> &str {
        &self.sha256
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}
