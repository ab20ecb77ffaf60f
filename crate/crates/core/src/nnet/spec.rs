use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden widths plus an optional leading spiral module, written like
/// `"S-32-64"` (spiral, then 32 and 64 units) or `"128"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_widths: Vec<usize>,
    pub use_spiral: bool,
}

impl NetworkSpec {
    pub fn new(layer_widths: Vec<usize>, use_spiral: bool) -> Result<Self> {
        if layer_widths.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(Self {
            layer_widths,
            use_spiral,
        })
    }

    /// The same widths with the spiral toggled.
    pub fn with_spiral(&self, use_spiral: bool) -> Self {
        Self {
            layer_widths: self.layer_widths.clone(),
            use_spiral,
        }
    }
}

impl FromStr for NetworkSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Config("empty network spec".into()));
        }
        let mut parts = s.split('-').peekable();
        let use_spiral = matches!(parts.peek(), Some(&"S") | Some(&"s"));
        if use_spiral {
            parts.next();
        }
        let widths = parts
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad layer width {p:?} in spec {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(widths, use_spiral)
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.layer_widths.iter().map(|w| w.to_string()).collect();
        if self.use_spiral {
            parts.insert(0, "S".into());
        }
        f.write_str(&parts.join("-"))
    }
}
