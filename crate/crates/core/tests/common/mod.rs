#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use serde_json::Value;

pub const BASE: &str = "https://uvboot.invalid/schema/";

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Validator for one of the shipped schemas, with the shared definitions
/// registered so relative `$ref`s resolve offline.
pub fn validator(name: &str) -> jsonschema::Validator {
    let dir = manifest_dir().join("docs").join("schema");
    let mut options = jsonschema::options().with_base_uri(format!("{BASE}{name}"));
    for shared in ["common.schema.json", "config.schema.json"] {
        let resource = jsonschema::Resource::from_contents(read_json(&dir.join(shared))).unwrap();
        options = options.with_resource(format!("{BASE}{shared}"), resource);
    }
    options.build(&read_json(&dir.join(name))).unwrap()
}

pub fn assert_valid(name: &str, instance: &Value) {
    let v = validator(name);
    let errors: Vec<String> = v.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{instance:#}");
}

pub fn uvboot(args: &[&str], dir: &Path) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_uvboot"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

pub fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}
