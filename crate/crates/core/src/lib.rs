//! Joint design of unimodular MIMO radar waveforms and multi-IRS phase shifts
//! that maximize the Fisher information (minimize the Cramér-Rao bound) of
//! the target direction of arrival.

pub mod error;
pub mod fisher;
pub mod linalg;
pub mod scene;
pub mod uber;
pub mod uqp;

pub use error::{Error, Result};
pub use fisher::{PhaseOperators, PhaseProfile, Waveform};
pub use linalg::{CMatrix, CVector, UnitVector};
pub use scene::{ChannelSet, IrsConfig, Point, Reflectivities, SceneConfig};
pub use uber::{UberConfig, UberInit, UberResult};
pub use uqp::{UqpProblem, UqpResult};
