use thiserror::Error;

use schottkydim::degeneration::DegenerationError;
use schottkydim::dimension::DimensionError;
use schottkydim::kernels::KernelError;
use schottkydim::schottky::SchottkyError;
use schottkydim::tree::TreeError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    /// A failure inside the library, tagged with the module it came from.
    #[error("{module}: {msg}")]
    Numeric { module: &'static str, msg: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric { .. } => 3,
            CliError::Io(_) => 1,
        }
    }

    fn numeric(module: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Numeric { module, msg: e.to_string() }
    }

    pub fn schottky(e: SchottkyError) -> Self {
        Self::numeric("freegroup_schottky", e)
    }
}

impl From<DimensionError> for CliError {
    fn from(e: DimensionError) -> Self {
        Self::numeric("dimension", e)
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        Self::numeric("tree_actions", e)
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        Self::numeric("hyperbolic_kernels", e)
    }
}

impl From<DegenerationError> for CliError {
    fn from(e: DegenerationError) -> Self {
        Self::numeric("degeneration", e)
    }
}
