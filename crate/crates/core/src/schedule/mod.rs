//! GNSS schedule data model, reservation cubes, uplink codec and the
//! feasibility checker.

mod codec;
mod cube;
mod feasibility;
mod interval;
mod model;
mod timing;

pub use codec::{decode_assignment, encode_assignment, pack_words, unpack_words, BitLayout};
pub use cube::{ChannelPlan, Conflict, RxCube, RxKey, Status, TxCube, TxKey};
pub use feasibility::{check_feasibility, CheckInput, FeasibilityReport, Rule, Violation};
pub use interval::{union_length, Interval};
pub use model::{Assignment, GnssSchedule, Kind, Tuple};
pub use timing::TimingParams;
