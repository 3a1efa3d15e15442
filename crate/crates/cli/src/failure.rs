use std::fmt::Display;
use std::path::Path;

/// Exit status 1: bad or missing input. Exit status 2: input was fine but
/// processing or writing failed.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Processing(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Processing(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Processing(m) => m,
        }
    }
}

pub type Outcome<T> = Result<T, Failure>;

pub trait Classify<T> {
    fn invalid(self, context: impl Display) -> Outcome<T>;
    fn failed(self, context: impl Display) -> Outcome<T>;
}

impl<T, E: Display> Classify<T> for Result<T, E> {
    fn invalid(self, context: impl Display) -> Outcome<T> {
        self.map_err(|e| Failure::Validation(format!("{context}: {e}")))
    }

    fn failed(self, context: impl Display) -> Outcome<T> {
        self.map_err(|e| Failure::Processing(format!("{context}: {e}")))
    }
}

pub fn read_input(path: &Path, what: &str) -> Outcome<Vec<u8>> {
    std::fs::read(path).invalid(format_args!("cannot read {what} {}", path.display()))
}

pub fn read_text(path: &Path, what: &str) -> Outcome<String> {
    std::fs::read_to_string(path).invalid(format_args!("cannot read {what} {}", path.display()))
}

pub fn write_output(path: &Path, bytes: &[u8]) -> Outcome<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).failed(format_args!("cannot create {}", dir.display()))?;
    }
    std::fs::write(path, bytes).failed(format_args!("cannot write {}", path.display()))
}
