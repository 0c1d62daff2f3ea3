//! Length-prefixed framing: a 4-byte big-endian payload length followed by
//! that many bytes of UTF-8 JSON.

use serde_json::Value;

/// Largest accepted payload, 16 MiB.
pub const MAX_FRAME: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame of {len} bytes exceeds the {MAX_FRAME}-byte limit")]
    FrameTooLarge { len: usize },
    #[error("malformed JSON payload: {0}")]
    MalformedJson(String),
}

/// Encodes one JSON value as a frame.
pub fn encode_frame(payload: &Value) -> Result<Vec<u8>, FrameError> {
    let body = serde_json::to_vec(payload).expect("JSON values always serialize");
    if body.len() > MAX_FRAME {
        return Err(FrameError::FrameTooLarge { len: body.len() });
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Decodes every complete frame at the front of `bytes`; returns the
/// messages and the number of bytes consumed. A trailing partial frame is
/// left for the next call.
pub fn decode_frames(bytes: &[u8]) -> Result<(Vec<Value>, usize), FrameError> {
    let mut out = Vec::new();
    let mut at = 0;
    while bytes.len() - at >= 4 {
        let len = u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
        if len > MAX_FRAME {
            return Err(FrameError::FrameTooLarge { len });
        }
        if bytes.len() - at - 4 < len {
            break;
        }
        let body = &bytes[at + 4..at + 4 + len];
        let value = serde_json::from_slice(body).map_err(|e| FrameError::MalformedJson(e.to_string()))?;
        out.push(value);
        at += 4 + len;
    }
    Ok((out, at))
}

/// Incremental decoder holding bytes across reads.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `bytes` and returns every frame completed so far.
    pub fn push(&mut self, bytes: &[u8]) -> Result<Vec<Value>, FrameError> {
        self.buf.extend_from_slice(bytes);
        let (values, used) = decode_frames(&self.buf)?;
        self.buf.drain(..used);
        Ok(values)
    }

    /// Bytes of an incomplete frame still buffered.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }
}
