use core::fmt;

/// Errors raised by the perception kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidInput(&'static str),
    /// Two images or maps that must share dimensions do not.
    SizeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// The image is too small for the requested operation.
    ImageTooSmall {
        width: usize,
        height: usize,
        needed: usize,
    },
    /// Not enough well-spread samples to fit a model.
    DegenerateConfiguration(&'static str),
    /// The computation produced values that cannot be trusted.
    NumericalDegeneracy(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::SizeMismatch { expected, got } => write!(
                f,
                "size mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::ImageTooSmall {
                width,
                height,
                needed,
            } => write!(
                f,
                "image {width}x{height} too small, need at least {needed} px per side"
            ),
            Error::DegenerateConfiguration(msg) => write!(f, "degenerate configuration: {msg}"),
            Error::NumericalDegeneracy(msg) => write!(f, "numerical degeneracy: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
