//! Multi-client command service: sessions, the line-delimited JSON
//! protocol, a TCP front end and the corpus batch runner.

mod batch;
pub mod protocol;
mod session;
mod tcp;

pub use batch::{run_batch, run_batch_file, BatchLine, BatchReport, Expected};
pub use protocol::{Envelope, Kind, Outcome, Stage, StageError};
pub use session::{Control, HistoryEntry, Hub, Outbox, PendingMenu, Session, SessionError};
pub use tcp::{serve, Client, ClientSender, Listening};
