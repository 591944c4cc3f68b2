pub mod error;
pub mod io;
pub mod measures;
pub mod monotone;
pub mod onedim;
pub mod oracle;
pub mod proper;
mod quad;
pub mod regvar;
pub mod transport;

pub use error::{Error, Result};
