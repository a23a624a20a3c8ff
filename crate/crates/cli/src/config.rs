//! Run settings and the `key = value` config file.

use std::path::{Path, PathBuf};

use ffilint_core::lint::{LintConfig, RuleSet};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    pub py_ext: Vec<String>,
    /// C++ source extensions. Binding units must use one of these.
    pub cpp_ext: Vec<String>,
    pub header_ext: Vec<String>,
    pub rules: RuleSet,
    pub strict: bool,
    pub out: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        let lint = LintConfig::default();
        Settings {
            py_ext: vec!["py".to_string()],
            cpp_ext: lint.source_exts,
            header_ext: lint.header_exts,
            rules: lint.rules,
            strict: false,
            out: None,
        }
    }
}

/// Splits `cpp,.cc, cxx` into bare extensions.
pub fn ext_list(value: &str) -> Result<Vec<String>, CliError> {
    let exts: Vec<String> = value
        .split(',')
        .map(|e| e.trim().trim_start_matches('.').to_string())
        .filter(|e| !e.is_empty())
        .collect();
    if exts.is_empty() {
        return Err(CliError::Config(format!("empty extension list `{value}`")));
    }
    Ok(exts)
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(CliError::Config(format!(
            "{key}: expected true or false, got `{value}`"
        ))),
    }
}

impl Settings {
    pub fn lint_config(&self) -> LintConfig {
        LintConfig {
            rules: self.rules,
            source_exts: self.cpp_ext.clone(),
            header_exts: self.header_ext.clone(),
        }
    }

    /// Applies one config file on top of the current settings.
    pub fn apply_config(&mut self, text: &str, origin: &Path) -> Result<(), CliError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at =
                |msg: String| CliError::Config(format!("{}:{}: {msg}", origin.display(), idx + 1));
            let Some((key, value)) = line.split_once('=') else {
                return Err(at(format!("expected `key = value`, got `{line}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            let wrap = |e: CliError| at(e.to_string());
            match key {
                "py_ext" => self.py_ext = ext_list(value).map_err(wrap)?,
                "cpp_ext" => self.cpp_ext = ext_list(value).map_err(wrap)?,
                "header_ext" => self.header_ext = ext_list(value).map_err(wrap)?,
                "rules" => self.rules = RuleSet::parse(value).map_err(at)?,
                "strict" => self.strict = parse_bool(key, value).map_err(wrap)?,
                "out" => self.out = Some(PathBuf::from(value)),
                _ => return Err(at(format!("unknown key `{key}`"))),
            }
        }
        Ok(())
    }

    pub fn load_config(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_config(&text, path)
    }
}
