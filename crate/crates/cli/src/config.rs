//! Run configuration: `key = value` file lines overridden by flags.

use std::collections::BTreeMap;

use clap::ValueEnum;

use zdiv_core::{FieldSpec, GroupSpec, Scalar};

use crate::GlobalArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub group: GroupSpec,
    pub field: FieldSpec,
    /// Replaces the coefficients read from `a` when set.
    pub alphas: Option<(Scalar, Scalar)>,
    pub seed: u64,
    pub workers: usize,
    pub output: OutputFormat,
}

const KEYS: [&str; 6] = ["group", "field", "alphas", "seed", "workers", "output"];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("config line {}: expected `key = value`", lineno + 1));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(format!("config line {}: unknown key `{key}`", lineno + 1));
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(format!("config line {}: duplicate key `{key}`", lineno + 1));
        }
    }
    Ok(out)
}

pub fn parse_alpha_pair(field: FieldSpec, text: &str) -> Result<(Scalar, Scalar), String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [x, y] = parts[..] else {
        return Err(format!("alphas: expected `alpha1,alpha2`, got `{text}`"));
    };
    let p = |s: &str| Scalar::parse(s, field).map_err(|e| format!("alphas: {e}"));
    Ok((p(x)?, p(y)?))
}

impl RunConfig {
    pub fn resolve(args: &GlobalArgs) -> Result<RunConfig, String> {
        let mut values = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("config {}: {e}", path.display()))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        let flags = [
            ("group", args.group.clone()),
            ("field", args.field.clone()),
            ("alphas", args.alphas.clone()),
            ("seed", args.seed.map(|s| s.to_string())),
            ("workers", args.workers.map(|w| w.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        let get = |k: &str| values.get(k).map(String::as_str);
        let group: GroupSpec = get("group")
            .unwrap_or("free:2")
            .parse()
            .map_err(|e| format!("group: {e}"))?;
        let field: FieldSpec = get("field").unwrap_or("Q").parse().map_err(|e| format!("field: {e}"))?;
        let alphas = get("alphas").map(|t| parse_alpha_pair(field, t)).transpose()?;
        let seed = get("seed")
            .map(|s| s.parse::<u64>().map_err(|e| format!("seed: {e}")))
            .transpose()?
            .unwrap_or(0);
        let workers = get("workers")
            .map(|s| s.parse::<usize>().map_err(|e| format!("workers: {e}")))
            .transpose()?
            .unwrap_or(1);
        if workers == 0 {
            return Err("workers: must be at least 1".into());
        }
        let output = match args.output {
            Some(o) => o,
            None => match get("output") {
                None => OutputFormat::Json,
                Some(t) => OutputFormat::from_str(t, true).map_err(|e| format!("output: {e}"))?,
            },
        };
        Ok(RunConfig { group, field, alphas, seed, workers, output })
    }
}
