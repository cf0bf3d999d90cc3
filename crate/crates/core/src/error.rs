use core::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Error {
    /// Shot-noise or electrical-noise calibration cannot be performed.
    Calibration(&'static str),
    /// A requested encoding is not realizable by the modulator.
    Encoding(&'static str),
    /// Packet or frame structure violated.
    Framing(&'static str),
    /// Carrier or delta recovery failed for a symbol or packet.
    Recovery(&'static str),
    /// Parameter estimation is ill-posed on the given data.
    Estimation(&'static str),
    /// A closed-form expression left its numerical domain.
    NumericalDomain(&'static str),
    /// A file-backed entropy source ran out of words.
    OutOfEntropy,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Calibration(s) => write!(f, "calibration error: {s}"),
            Error::Encoding(s) => write!(f, "encoding error: {s}"),
            Error::Framing(s) => write!(f, "framing error: {s}"),
            Error::Recovery(s) => write!(f, "recovery error: {s}"),
            Error::Estimation(s) => write!(f, "estimation error: {s}"),
            Error::NumericalDomain(s) => write!(f, "numerical domain error: {s}"),
            Error::OutOfEntropy => write!(f, "entropy source exhausted"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
