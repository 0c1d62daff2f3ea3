//! The agent/simulator boundary: framed JSON over TCP and the same payloads
//! over WebSocket.
//!
//! `docs/protocol.md` has the method reference and byte-level examples.

mod client;
mod frame;
mod message;
mod payload;
mod server;

pub use client::{Client, ClientError, ServerVersion};
pub use frame::{decode_frames, encode_frame, FrameDecoder, FrameError, MAX_FRAME};
pub use message::{code, ErrorBody, Event, Message, Outcome, Request, Response, MIN_CLIENT_VERSION, PROTOCOL_VERSION};
pub use payload::{image_json, query_json, Payload, TaskSummary, Telemetry};
pub use server::{
    spawn, LoggedRequest, ServerHandle, ServerOptions, SimSpeed, Transport, DEFAULT_TCP_ADDR, DEFAULT_TELEMETRY_HZ,
    DEFAULT_WS_ADDR, MAX_TELEMETRY_HZ,
};
