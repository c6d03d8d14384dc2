//! Three-party decision tree training on replicated secret shares.
//!
//! Split criteria are evaluated on a large ring while everything else stays
//! on a small one; [`convert`] moves shares between the two. Attribute
//! orderings are computed once as shared permutations and refreshed layer
//! by layer with radix-sort steps, so the group-wise protocols of
//! [`groupwise`] can train a whole layer at a time.

pub mod convert;
pub mod error;
pub mod groupwise;
pub mod model;
pub mod oracle;
pub mod ring;
pub mod rss;
pub mod session;
pub mod sort;
pub mod train;
pub mod transport;

pub use error::{Error, Result};
pub use model::{SharedTree, TreeModel};
pub use oracle::PlainDataset;
pub use ring::{RingConfig, RingElement};
pub use rss::ShareVec;
pub use session::{run_session, Party, SessionConfig, SessionOutput};
pub use transport::{CommMeter, Phase, SessionMeter};
