//! Continuous ant-colony search over a stacked 4D space that evolves
//! both the topology and the weights of recurrent neural networks,
//! with an optional backpropagation local-search mode and an
//! asynchronous manager/worker execution layer.

pub mod agents;
pub mod clustering;
pub mod colony;
pub mod data;
pub mod distributed;
pub mod error;
pub mod graph;
pub mod rnn;
pub mod search_space;

pub use colony::{BehaviorAuditRow, Colony, IterationRecord, Mode, Population, RunConfig};
pub use data::{Dataset, SplitSpec, SynthKind, TimeSeries};
pub use error::{Error, Result};
pub use graph::{NodeRole, NodeType, RnnEdge, RnnGenome, RnnNode};
pub use rnn::{FitnessReport, RnnInstance, WORST_FITNESS};
pub use search_space::{Position, SearchSpace, SpaceConfig};
