use std::collections::BTreeMap;
use std::fmt;

/// A non-fatal problem noticed while extracting one unit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Warning {
    pub unit: String,
    pub line: Option<u32>,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.unit, line, self.message),
            None => write!(f, "{}: {}", self.unit, self.message),
        }
    }
}

/// Warnings plus a tally of constructs the extractors chose not to model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub skipped: BTreeMap<&'static str, usize>,
    pub warnings: Vec<Warning>,
}

impl Diagnostics {
    pub fn skip(&mut self, construct: &'static str) {
        *self.skipped.entry(construct).or_default() += 1;
    }

    pub fn warn(&mut self, unit: &str, line: Option<u32>, message: impl Into<String>) {
        self.warnings.push(Warning {
            unit: unit.to_string(),
            line,
            message: message.into(),
        });
    }

    pub fn skipped_total(&self) -> usize {
        self.skipped.values().sum()
    }

    pub fn merge(&mut self, other: Diagnostics) {
        for (k, v) in other.skipped {
            *self.skipped.entry(k).or_default() += v;
        }
        self.warnings.extend(other.warnings);
    }
}
