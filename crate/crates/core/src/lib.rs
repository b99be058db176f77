//! Loss, noise and key-rate models for quantum key distribution over
//! multicore-fiber passive optical networks.
//!
//! * [`physics`]: link budget, Raman and crosstalk noise.
//! * [`qkd`]: decoy-state BB84 gains, bounds, key rate and QBER budget.
//! * [`topology`]: network model and per-ONU quantum paths.
//! * [`cwas`]: core and wavelength assignment.
//! * [`wtdm`]: receiver sharing and splitter planning.
//! * [`scenario`]: configuration, calibration, figure runners and sweeps.

// Validation is written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cwas;
pub mod error;
pub mod model;
pub mod physics;
pub mod qkd;
pub mod scenario;
pub mod topology;
pub mod units;
pub mod wtdm;

pub use cwas::{assign, validate_plan, AssignmentPlan, Demands, LaunchPowers};
pub use error::{Error, Result};
pub use model::{LinkReport, SystemModel};
pub use physics::{ClassicalChannel, FiberSegment, OpticalPath, PhysicsParams, RamanProfile, SpectralFilter};
pub use qkd::{ChannelBudget, DecoyEstimate, DetectorParams, ProtocolParams, QberBudget};
pub use topology::{quantum_path, subscriber_capacity, Topology};
pub use wtdm::{plan_schedule, SchedulePlan, SplitterLossTable};
