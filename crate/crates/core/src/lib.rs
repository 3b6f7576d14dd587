//! Gradecast-based Byzantine consensus, approximate agreement and
//! sequential multi-consensus, run as per-node state machines on a
//! deterministic lockstep network simulator.

pub mod adversary;
pub mod approx;
pub mod checks;
pub mod consensus;
pub mod driver;
pub mod gradecast;
pub mod model;
pub mod multi;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod simnet;
pub mod sweep;

pub use model::{
    count_value, mode_lowest, Confidence, ModelError, MultiSet, NodeId, SystemParams, Value,
    ValueKind,
};
pub use simnet::{run_simulation, Envelope, Phase, SimConfig, SimError, Trace};
