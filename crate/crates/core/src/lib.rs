//! Author name disambiguation by reconstructing the collaboration network
//! bottom-up: stable collaborator pairs seed a network of author vertices,
//! a probabilistic model scores same-name vertex pairs, and a greedy merge
//! pass joins vertices that belong to the same person.

pub mod clock;
pub mod corpus;
pub mod eval;
pub mod gcn;
pub mod incremental;
pub mod model;
pub mod network;
pub mod pipeline;
pub mod scn;
pub mod similarity;
pub mod synth;

pub use corpus::{CorpusIndex, NameId, PaperIdx, PaperRecord};
pub use network::{CollabNetwork, VertexId};
