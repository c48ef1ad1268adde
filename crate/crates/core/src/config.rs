use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resource limits shared by every pipeline. A breach is always an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    /// Maximum number of elements a breadth-first enumeration may reach.
    pub enumeration: usize,
    /// Maximum number of stored monomials in a truncated series.
    pub terms: usize,
    /// Deepest verbal level or search depth any routine may try.
    pub depth: usize,
    /// Largest `|F/gamma_{d-1}|` for which level `d` is materialized.
    pub cosets: usize,
    /// Largest truncation degree tried when searching for Magnus witnesses.
    pub truncation: usize,
    /// Maximum number of letters in any single explicit relator word.
    pub word_length: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            enumeration: 1_000_000,
            terms: 1_000_000,
            depth: 8,
            cosets: 10_000,
            truncation: 24,
            word_length: 1_000_000,
        }
    }
}

impl Caps {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("enumeration", self.enumeration),
            ("terms", self.terms),
            ("depth", self.depth),
            ("cosets", self.cosets),
            ("truncation", self.truncation),
            ("word_length", self.word_length),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("cap {name} must be positive")));
            }
        }
        Ok(())
    }
}
