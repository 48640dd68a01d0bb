use std::fs;
use std::path::Path;

use anyhow::anyhow;
use serde::de::DeserializeOwned;
use serde::Serialize;

use firobf::Error;

/// Exit status for inputs, flags and file access.
pub const USAGE: u8 = 2;
/// Exit status for an infeasible design or a failed attack.
pub const FAILED: u8 = 1;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type Outcome<T = ()> = Result<T, Failure>;

pub fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: USAGE, error: error.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidSpec(_)
            | Error::TooFewKeyBits { .. }
            | Error::TooManyWrongKeys { .. }
            | Error::Parse(_)
            | Error::Json(_) => USAGE,
            _ => FAILED,
        };
        Failure { code, error: e.into() }
    }
}

/// Parameters of the invocation, copied into every artifact it writes.
#[derive(Debug, Serialize)]
pub struct RunInfo<'a, P: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub params: &'a P,
}

pub fn run_info<'a, P: Serialize>(command: &'static str, params: &'a P) -> RunInfo<'a, P> {
    RunInfo { tool: "firobf", version: env!("CARGO_PKG_VERSION"), command, params }
}

#[derive(Serialize)]
struct Artifact<'a, R: Serialize, T: Serialize> {
    run: &'a R,
    #[serde(flatten)]
    body: &'a T,
}

pub fn read_text(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| usage(anyhow!("cannot read {}: {e}", path.display())))
}

/// Reads a JSON artifact; a `run` member, if present, is ignored.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| usage(anyhow!("{}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| usage(anyhow!("cannot create {}: {e}", dir.display())))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Outcome {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| usage(anyhow!("cannot write {}: {e}", path.display())))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifacts serialize");
    s.push('\n');
    s
}

/// Writes `body` with the run parameters merged in under `run`.
pub fn write_artifact<R: Serialize, T: Serialize>(dir: &Path, name: &str, run: &R, body: &T) -> Outcome {
    write_text(dir, name, &to_json(&Artifact { run, body }))
}
