use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use crate::args::Global;
use crate::failure::Failure;

pub const TOOL: &str = "curefit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Run description embedded in every primary output.
pub fn provenance(command: &str, seed: u64, global: &Global, args: &impl Serialize) -> Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "seed": seed,
        "global": serde_json::to_value(global).expect("config serializes"),
        "args": serde_json::to_value(args).expect("config serializes"),
    })
}

/// First line of a CSV output: `# ` followed by the provenance JSON.
pub fn csv_preamble(prov: &Value) -> String {
    format!("# {}\n", serde_json::to_string(prov).expect("json"))
}

pub fn csv_line<S: AsRef<str>>(fields: &[S]) -> String {
    let mut s = fields
        .iter()
        .map(|f| {
            let f = f.as_ref();
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(",");
    s.push('\n');
    s
}

pub fn path(global: &Global, name: &str) -> PathBuf {
    global.out.join(name)
}

pub fn write(global: &Global, name: &str, contents: &str) -> Result<(), Failure> {
    std::fs::write(path(global, name), contents).map_err(Failure::io)
}

pub fn write_json(global: &Global, name: &str, value: &Value) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(value).expect("json");
    s.push('\n');
    write(global, name, &s)
}

/// Timing and thread count go to a side file so primary outputs stay
/// reproducible.
pub fn write_meta(global: &Global, command: &str, wall_clock_secs: f64) -> Result<(), Failure> {
    write_json(
        global,
        &format!("{command}.meta.json"),
        &json!({
            "command": command,
            "version": VERSION,
            "workers": rayon::current_num_threads(),
            "wall_clock_secs": wall_clock_secs,
        }),
    )
}
