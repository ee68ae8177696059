//! Secrecy capacity, rate regions and toy codes for wiretap channels whose
//! state follows a Markov chain and reaches the transmitter with a delay.

pub mod capacity;
pub mod channels;
pub mod codec;
pub mod error;
pub mod infotheory;
pub mod markov;
pub mod region;
pub mod simulate;
pub mod streams;

pub use error::{Error, Result};
