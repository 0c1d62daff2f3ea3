//! Blocking client for the framed TCP endpoint.

use super::frame::{encode_frame, FrameDecoder, FrameError};
use super::message::{ErrorBody, Event, Message, Request, Response};
use super::payload::Payload;
use serde_json::{json, Value};
use std::collections::{HashMap, VecDeque};
use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("cannot connect to {addr}: {source}")]
    Connect {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("connection error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("connection closed by server")]
    Closed,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("{}", .0.message)]
    Remote(ErrorBody),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServerVersion {
    pub server_version: u32,
    pub min_client_version: u32,
}

pub struct Client {
    stream: TcpStream,
    decoder: FrameDecoder,
    responses: HashMap<String, Response>,
    events: VecDeque<Event>,
    next_id: u64,
}

impl Client {
    pub fn connect(addr: &str, timeout: Duration) -> Result<Self, ClientError> {
        let connect_err = |source| ClientError::Connect {
            addr: addr.to_string(),
            source,
        };
        let mut last = None;
        for sa in addr.to_socket_addrs().map_err(connect_err)? {
            match TcpStream::connect_timeout(&sa, timeout) {
                Ok(stream) => {
                    stream.set_nodelay(true)?;
                    return Ok(Self {
                        stream,
                        decoder: FrameDecoder::new(),
                        responses: HashMap::new(),
                        events: VecDeque::new(),
                        next_id: 1,
                    });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(connect_err(last.unwrap_or_else(|| std::io::Error::other("address resolved to nothing"))))
    }

    /// Sends a request without waiting; returns its id.
    pub fn send(&mut self, method: &str, params: Value) -> Result<String, ClientError> {
        let id = self.next_id.to_string();
        self.next_id += 1;
        let req = Request {
            id: id.clone(),
            method: method.to_string(),
            params,
        };
        self.stream.write_all(&encode_frame(&Message::Request(req).to_value())?)?;
        Ok(id)
    }

    fn read_more(&mut self) -> Result<(), ClientError> {
        let mut buf = [0u8; 64 * 1024];
        let n = self.stream.read(&mut buf)?;
        if n == 0 {
            return Err(ClientError::Closed);
        }
        for v in self.decoder.push(&buf[..n])? {
            match Message::from_value(v).map_err(ClientError::Protocol)? {
                Message::Response(r) => {
                    self.responses.insert(r.id.clone(), r);
                }
                Message::Event(e) => self.events.push_back(e),
                Message::Request(_) => return Err(ClientError::Protocol("server sent a request".into())),
            }
        }
        Ok(())
    }

    /// Blocks until the response to `id` arrives. Other responses and events
    /// that arrive meanwhile are kept.
    pub fn wait(&mut self, id: &str) -> Result<Response, ClientError> {
        loop {
            if let Some(r) = self.responses.remove(id) {
                return Ok(r);
            }
            self.read_more()?;
        }
    }

    /// Blocks until any response is available and returns it.
    pub fn next_response(&mut self) -> Result<Response, ClientError> {
        loop {
            if let Some(id) = self.responses.keys().next().cloned() {
                return Ok(self.responses.remove(&id).expect("key present"));
            }
            self.read_more()?;
        }
    }

    pub fn call(&mut self, method: &str, params: Value) -> Result<Value, ClientError> {
        let id = self.send(method, params)?;
        self.wait(&id)?.into_result().map_err(ClientError::Remote)
    }

    /// Blocks until an event arrives.
    pub fn next_event(&mut self) -> Result<Event, ClientError> {
        loop {
            if let Some(e) = self.events.pop_front() {
                return Ok(e);
            }
            self.read_more()?;
        }
    }

    pub fn ping(&mut self) -> Result<ServerVersion, ClientError> {
        let v = self.call("ping", json!({}))?;
        let field = |k: &str| {
            v[k].as_u64()
                .map(|x| x as u32)
                .ok_or_else(|| ClientError::Protocol(format!("ping reply lacks `{k}`")))
        };
        Ok(ServerVersion {
            server_version: field("server_version")?,
            min_client_version: field("min_client_version")?,
        })
    }

    /// Submits a program and, for a task, waits for it to finish. Returns the
    /// terminal status (`None` for a synchronous answer) and query payloads.
    pub fn execute(&mut self, program: &str) -> Result<(Option<String>, Vec<Payload>), ClientError> {
        let submitted = self.call("command.submit", json!({ "program": program }))?;
        let decode = |v: &Value| Payload::from_json(v).map_err(ClientError::Protocol);
        if let Some(task_id) = submitted["task_id"].as_str() {
            let done = self.call("task.join", json!({ "task_id": task_id }))?;
            let status = done["status"].as_str().unwrap_or("").to_string();
            let payloads = done["results"]
                .as_array()
                .map(|a| a.iter().map(decode).collect::<Result<Vec<_>, _>>())
                .transpose()?
                .unwrap_or_default();
            return Ok((Some(status), payloads));
        }
        match submitted.get("result") {
            Some(v) => Ok((None, vec![decode(v)?])),
            None => Ok((None, Vec::new())),
        }
    }
}
