use std::path::Path;

use gmint::{Error, Preset};

/// Accepts inline JSON, a path to a JSON file, or `name[:key=value,...]`.
pub fn parse(arg: &str) -> Result<Preset, Error> {
    let arg = arg.trim();
    if arg.starts_with('{') {
        return Preset::from_json(arg);
    }
    if arg.ends_with(".json") || Path::new(arg).is_file() {
        let text = std::fs::read_to_string(arg)
            .map_err(|e| Error::Argument(format!("cannot read process file {arg}: {e}")))?;
        return Preset::from_json(&text);
    }
    let (name, params) = arg.split_once(':').unwrap_or((arg, ""));
    let mut obj = serde_json::Map::new();
    for pair in params.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("process parameter '{pair}' must be key=value")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| Error::Argument(format!("process parameter '{pair}': {e}")))?;
        obj.insert(key.trim().to_string(), serde_json::json!(value));
    }
    let json = serde_json::json!({ "preset": name.trim(), "params": obj });
    Preset::from_json(&json.to_string())
}
