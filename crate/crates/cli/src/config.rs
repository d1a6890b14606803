//! Config layering (flags > file > defaults) and the small text syntaxes
//! accepted on the command line.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use jointrecon::acquisition::MaskSpec;

use crate::error::{CliError, CliResult};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::from(e).context(path.display()))?;
    serde_json::from_str(&text).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::from(e).context(path.display()))
}

/// `defaults` with every top-level key of the JSON object in `file`
/// replaced. Unknown keys are rejected by the target type.
pub fn layered<T: Serialize + DeserializeOwned>(defaults: &T, file: Option<&Path>) -> CliResult<T> {
    let Some(path) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(defaults)?)?);
    };
    let mut base = serde_json::to_value(defaults)?;
    let over: Value = read_json(path)?;
    let (Value::Object(base_map), Value::Object(over_map)) = (&mut base, over) else {
        return Err(CliError::validation(format!("{}: expected a JSON object", path.display())));
    };
    base_map.extend(over_map);
    serde_json::from_value(base).map_err(|e| CliError::from(e).context(path.display()))
}

/// `HxW`, e.g. `128x96`.
pub fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected HxW, got `{s}`"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in `{s}`"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in `{s}`"))?;
    if h == 0 || w == 0 {
        return Err(format!("empty shape `{s}`"));
    }
    Ok((h, w))
}

/// `cartesian:R[:ACS]`, `cartesian-swapped:R[:ACS]`, `gaussian:R[:SEED]`,
/// `gaussian2d:R[:SEED]`, `radial:SPOKES`, or a JSON object.
pub fn parse_mask(s: &str) -> Result<MaskSpec, String> {
    if s.trim_start().starts_with('{') {
        return serde_json::from_str(s).map_err(|e| format!("bad mask JSON: {e}"));
    }
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<Option<f64>, String> {
        parts.get(i).map(|p| p.parse::<f64>().map_err(|_| format!("bad number `{p}` in mask `{s}`"))).transpose()
    };
    let int = |v: f64| -> Result<usize, String> {
        if v.fract() == 0.0 && v >= 1.0 {
            Ok(v as usize)
        } else {
            Err(format!("expected a positive integer in mask `{s}`"))
        }
    };
    let first = num(1)?.ok_or_else(|| format!("mask `{s}` needs a parameter, e.g. cartesian:4"))?;
    if parts.len() > 3 {
        return Err(format!("too many fields in mask `{s}`"));
    }
    let spec = match parts[0] {
        "cartesian" => MaskSpec::Cartesian { acceleration: int(first)?, acs_fraction: num(2)?.unwrap_or(0.08) },
        "cartesian-swapped" => MaskSpec::CartesianSwapped { acceleration: int(first)?, acs_fraction: num(2)?.unwrap_or(0.08) },
        "gaussian" | "gaussian2d" => MaskSpec::Gaussian {
            acceleration: first,
            seed: num(2)?.map(int).transpose()?.unwrap_or(0) as u64,
            two_d: parts[0] == "gaussian2d",
        },
        "radial" if parts.len() == 2 => MaskSpec::Radial { spokes: int(first)? },
        other => return Err(format!("unknown mask `{other}` (cartesian, cartesian-swapped, gaussian, gaussian2d, radial)")),
    };
    Ok(spec)
}
