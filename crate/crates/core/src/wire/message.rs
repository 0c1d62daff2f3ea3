//! Request, response and event payloads carried in frames.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;
pub const MIN_CLIENT_VERSION: u32 = 1;

/// Error codes carried in `error.code`.
pub mod code {
    pub const PARSE: i64 = 1;
    pub const VALIDATION: i64 = 2;
    pub const UNKNOWN_METHOD: i64 = 3;
    pub const UNKNOWN_TASK: i64 = 4;
    pub const NOT_AIRBORNE: i64 = 5;
    pub const INTERNAL: i64 = 6;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub method: String,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("error {code}: {message}")]
pub struct ErrorBody {
    pub code: i64,
    pub message: String,
}

impl ErrorBody {
    pub fn new(code: i64, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Result(Value),
    Error(ErrorBody),
}

impl Response {
    pub fn ok(id: impl Into<String>, result: Value) -> Self {
        Self {
            id: id.into(),
            outcome: Outcome::Result(result),
        }
    }

    pub fn err(id: impl Into<String>, error: ErrorBody) -> Self {
        Self {
            id: id.into(),
            outcome: Outcome::Error(error),
        }
    }

    pub fn into_result(self) -> Result<Value, ErrorBody> {
        match self.outcome {
            Outcome::Result(v) => Ok(v),
            Outcome::Error(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub channel: String,
    pub payload: Value,
}

/// Any payload that can appear on the wire.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Request(Request),
    Response(Response),
    Event(Event),
}

impl Message {
    /// Classifies a decoded JSON value by its keys.
    pub fn from_value(v: Value) -> Result<Message, String> {
        let obj = v.as_object().ok_or("message is not a JSON object")?;
        let parsed = if obj.contains_key("method") {
            serde_json::from_value(v).map(Message::Request)
        } else if obj.contains_key("channel") {
            serde_json::from_value(v).map(Message::Event)
        } else if obj.contains_key("result") || obj.contains_key("error") {
            serde_json::from_value(v).map(Message::Response)
        } else {
            return Err("message is neither a request, a response nor an event".into());
        };
        parsed.map_err(|e| e.to_string())
    }

    pub fn to_value(&self) -> Value {
        match self {
            Message::Request(r) => serde_json::to_value(r),
            Message::Response(r) => serde_json::to_value(r),
            Message::Event(e) => serde_json::to_value(e),
        }
        .expect("wire types serialize")
    }
}
