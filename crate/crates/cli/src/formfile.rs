//! Form-file loading: TOML on disk, registry names otherwise.

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use tanform::special::builtin;
use tanform::TangentForm;

/// On-disk schema of a tangent form.
///
/// ```toml
/// version = 1          # optional, must be 1 when present
/// name = "example1"    # optional label
/// dimension = 2
/// omega0 = "0"
/// omega = ["-x2", "x1"]
/// omegabar = ["y2", "-y1"]
/// ```
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormFile {
    version: Option<u32>,
    name: Option<String>,
    dimension: usize,
    omega0: String,
    omega: Vec<String>,
    omegabar: Vec<String>,
}

fn load_file(path: &str) -> Result<TangentForm> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    let file: FormFile = toml::from_str(&text).with_context(|| format!("parsing {path}"))?;
    if let Some(v) = file.version {
        if v != 1 {
            bail!("{path}: unsupported form-file version {v} (expected 1)");
        }
    }
    if file.omega.len() != file.dimension || file.omegabar.len() != file.dimension {
        bail!(
            "{path}: component arrays must have length dimension = {} \
             (omega has {}, omegabar has {})",
            file.dimension,
            file.omega.len(),
            file.omegabar.len()
        );
    }
    let omega: Vec<&str> = file.omega.iter().map(String::as_str).collect();
    let omegabar: Vec<&str> = file.omegabar.iter().map(String::as_str).collect();
    TangentForm::from_strings(
        file.dimension,
        &file.omega0,
        &omega,
        &omegabar,
        file.name.as_deref(),
    )
    .map_err(|e| anyhow!("{path}: {e}"))
}

/// Resolve a form argument: paths (anything with a separator or a `.toml`
/// suffix) load from disk; everything else resolves through the builtin
/// registry, optionally with a `name:key=value,...` parameter suffix.
pub fn load(spec: &str) -> Result<TangentForm> {
    let looks_like_path = spec.contains('/') || spec.contains('\\') || spec.ends_with(".toml");
    if looks_like_path {
        load_file(spec)
    } else {
        builtin(spec).map_err(anyhow::Error::from)
    }
}
