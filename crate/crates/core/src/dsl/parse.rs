//! Recursive-descent parser for AeroCmd text.

use super::ast::{wrap_degrees, Command, ImageType, Program};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub message: String,
}

impl ParseError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        Self {
            position,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: {}", self.position, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    Comma,
    Dot,
    Eq,
    Sep,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Sep => "statement separator".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' => i += 1,
            b'\n' | b';' => {
                out.push((Tok::Sep, i));
                i += 1;
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            b'=' => {
                out.push((Tok::Eq, i));
                i += 1;
            }
            b'.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                out.push((Tok::Dot, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' | b'-' | b'+' => {
                let start = i;
                if c == b'-' || c == b'+' {
                    i += 1;
                }
                let digits_start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'-' || bytes[j] == b'+') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                if digits_start == i {
                    return Err(ParseError::new(start, format!("expected a number after `{text}`")));
                }
                let value: f64 = text
                    .parse()
                    .map_err(|_| ParseError::new(start, format!("malformed number `{text}`")))?;
                if !value.is_finite() {
                    return Err(ParseError::new(start, format!("number `{text}` is out of range")));
                }
                out.push((Tok::Number(value), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::new(i, format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Number,
    CameraId,
    ImageType,
}

struct Param {
    names: &'static [&'static str],
    kind: Kind,
}

const fn num(names: &'static [&'static str]) -> Param {
    Param {
        names,
        kind: Kind::Number,
    }
}

struct Signature {
    method: &'static str,
    params: &'static [Param],
}

const SIGNATURES: &[Signature] = &[
    Signature { method: "takeoffAsync", params: &[] },
    Signature { method: "landAsync", params: &[] },
    Signature { method: "hoverAsync", params: &[] },
    Signature {
        method: "moveByVelocityAsync",
        params: &[num(&["vx"]), num(&["vy"]), num(&["vz"]), num(&["duration"])],
    },
    Signature {
        method: "moveToPositionAsync",
        params: &[num(&["x"]), num(&["y"]), num(&["z"]), num(&["velocity", "speed"])],
    },
    Signature {
        method: "rotateToYawAsync",
        params: &[num(&["yaw"])],
    },
    Signature { method: "getGpsData", params: &[] },
    Signature { method: "getMultirotorState", params: &[] },
    Signature {
        method: "simGetImage",
        params: &[
            Param {
                names: &["camera_name", "camera"],
                kind: Kind::CameraId,
            },
            Param {
                names: &["image_type"],
                kind: Kind::ImageType,
            },
        ],
    },
    Signature { method: "reset", params: &[] },
];

#[derive(Debug, Clone)]
enum Value {
    Number(f64),
    Path(String),
}

struct Arg {
    keyword: Option<(String, usize)>,
    value: Value,
    pos: usize,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<usize, ParseError> {
        if *self.peek() == want {
            Ok(self.bump().1)
        } else {
            Err(ParseError::new(
                self.pos(),
                format!("expected {}, found {}", want.describe(), self.peek().describe()),
            ))
        }
    }

    fn skip_separators(&mut self) {
        while *self.peek() == Tok::Sep {
            self.bump();
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut statements = Vec::new();
        self.skip_separators();
        while *self.peek() != Tok::End {
            statements.push(self.statement()?);
            match self.peek() {
                Tok::Sep => self.skip_separators(),
                Tok::End => {}
                other => {
                    return Err(ParseError::new(
                        self.pos(),
                        format!("expected end of statement, found {}", other.describe()),
                    ))
                }
            }
        }
        Program::new(statements).map_err(|_| ParseError::new(0, "empty program"))
    }

    /// `ident ('.' ident)*`, returned as segments with their offsets.
    fn path(&mut self) -> Result<Vec<(String, usize)>, ParseError> {
        let mut segments = Vec::new();
        loop {
            match self.bump() {
                (Tok::Ident(name), p) => segments.push((name, p)),
                (other, p) => {
                    return Err(ParseError::new(
                        p,
                        format!("expected identifier, found {}", other.describe()),
                    ))
                }
            }
            if *self.peek() == Tok::Dot {
                self.bump();
            } else {
                return Ok(segments);
            }
        }
    }

    fn statement(&mut self) -> Result<Command, ParseError> {
        let start = self.pos();
        let path = self.path()?;
        if path.len() == 1 && path[0].0 == "print" && *self.peek() == Tok::LParen {
            self.bump();
            let inner_pos = self.pos();
            let inner_path = self.path()?;
            let command = self.call(inner_path)?;
            self.expect(Tok::RParen)?;
            if !command.is_query() {
                return Err(ParseError::new(
                    inner_pos,
                    format!("print(...) may only wrap a query, not `{}`", command.api_name()),
                ));
            }
            return Ok(command);
        }
        if path.len() > 2 {
            return Err(ParseError::new(start, "receiver must be a single identifier"));
        }
        self.call(path)
    }

    fn call(&mut self, path: Vec<(String, usize)>) -> Result<Command, ParseError> {
        if path.len() > 2 {
            return Err(ParseError::new(path[0].1, "receiver must be a single identifier"));
        }
        let (method, method_pos) = path.last().cloned().expect("path is non-empty");
        let sig = SIGNATURES
            .iter()
            .find(|s| s.method == method)
            .ok_or_else(|| ParseError::new(method_pos, format!("unknown method `{method}`")))?;
        let open = self.expect(Tok::LParen)?;
        let args = self.args()?;
        let close = self.expect(Tok::RParen)?;
        let values = bind(sig, args, open, close)?;
        build(sig, values, method_pos)
    }

    fn args(&mut self) -> Result<Vec<Arg>, ParseError> {
        let mut args = Vec::new();
        while !matches!(self.peek(), Tok::RParen | Tok::End) {
            let pos = self.pos();
            let keyword = match (&self.toks[self.at].0, self.toks.get(self.at + 1).map(|t| &t.0)) {
                (Tok::Ident(name), Some(Tok::Eq)) => {
                    let name = name.clone();
                    self.bump();
                    self.bump();
                    Some((name, pos))
                }
                _ => None,
            };
            let value_pos = self.pos();
            let value = match self.peek().clone() {
                Tok::Number(n) => {
                    self.bump();
                    Value::Number(n)
                }
                Tok::Ident(_) => {
                    let segments = self.path()?;
                    let joined: Vec<&str> = segments.iter().map(|(s, _)| s.as_str()).collect();
                    Value::Path(joined.join("."))
                }
                other => {
                    return Err(ParseError::new(
                        value_pos,
                        format!("expected an argument, found {}", other.describe()),
                    ))
                }
            };
            args.push(Arg {
                keyword,
                value,
                pos: value_pos,
            });
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        Ok(args)
    }
}

fn bind(
    sig: &Signature,
    args: Vec<Arg>,
    open: usize,
    close: usize,
) -> Result<Vec<(Value, usize)>, ParseError> {
    let mut slots: Vec<Option<(Value, usize)>> = vec![None; sig.params.len()];
    let mut seen_keyword = false;
    for (i, arg) in args.into_iter().enumerate() {
        match arg.keyword {
            None => {
                if seen_keyword {
                    return Err(ParseError::new(
                        arg.pos,
                        "positional argument follows keyword argument",
                    ));
                }
                if i >= sig.params.len() {
                    return Err(ParseError::new(
                        arg.pos,
                        format!(
                            "`{}` takes {} argument(s), got more",
                            sig.method,
                            sig.params.len()
                        ),
                    ));
                }
                slots[i] = Some((arg.value, arg.pos));
            }
            Some((name, name_pos)) => {
                seen_keyword = true;
                let idx = sig
                    .params
                    .iter()
                    .position(|p| p.names.contains(&name.as_str()))
                    .ok_or_else(|| {
                        ParseError::new(
                            name_pos,
                            format!("`{}` has no parameter named `{name}`", sig.method),
                        )
                    })?;
                if slots[idx].is_some() {
                    return Err(ParseError::new(
                        name_pos,
                        format!("parameter `{name}` given more than once"),
                    ));
                }
                slots[idx] = Some((arg.value, arg.pos));
            }
        }
    }
    slots
        .into_iter()
        .zip(sig.params)
        .map(|(slot, param)| {
            slot.ok_or_else(|| {
                ParseError::new(
                    close.max(open),
                    format!("`{}` is missing argument `{}`", sig.method, param.names[0]),
                )
            })
        })
        .collect()
}

fn number(value: &Value, pos: usize) -> Result<f64, ParseError> {
    match value {
        // -0 and 0 are the same argument.
        Value::Number(n) => Ok(if *n == 0.0 { 0.0 } else { *n }),
        Value::Path(p) => Err(ParseError::new(pos, format!("expected a number, found `{p}`"))),
    }
}

fn build(sig: &Signature, values: Vec<(Value, usize)>, method_pos: usize) -> Result<Command, ParseError> {
    let mut nums = Vec::with_capacity(values.len());
    let mut camera = 0u32;
    let mut image_type = ImageType::Scene;
    for ((value, pos), param) in values.iter().zip(sig.params) {
        match param.kind {
            Kind::Number => nums.push((number(value, *pos)?, *pos)),
            Kind::CameraId => {
                let n = number(value, *pos)?;
                if n < 0.0 || n.fract() != 0.0 || n > f64::from(u32::MAX) {
                    return Err(ParseError::new(*pos, "camera id must be a non-negative integer"));
                }
                camera = n as u32;
            }
            Kind::ImageType => {
                image_type = match value {
                    Value::Path(p) => p.parse().map_err(|e: super::ast::UnknownImageType| {
                        ParseError::new(*pos, e.to_string())
                    })?,
                    Value::Number(_) => {
                        return Err(ParseError::new(*pos, "image type must be scene or depth"))
                    }
                };
            }
        }
    }
    let positive = |(v, pos): (f64, usize), what: &str| {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(ParseError::new(pos, format!("{what} must be positive")))
        }
    };
    let command = match sig.method {
        "takeoffAsync" => Command::Takeoff,
        "landAsync" => Command::Land,
        "hoverAsync" => Command::Hover,
        "moveByVelocityAsync" => Command::MoveByVelocity {
            vx: nums[0].0,
            vy: nums[1].0,
            vz: nums[2].0,
            duration: positive(nums[3], "duration")?,
        },
        "moveToPositionAsync" => Command::MoveToPosition {
            x: nums[0].0,
            y: nums[1].0,
            z: nums[2].0,
            speed: positive(nums[3], "speed")?,
        },
        "rotateToYawAsync" => {
            let yaw = nums[0].0;
            Command::RotateToYaw {
                yaw: if (-180.0..=180.0).contains(&yaw) {
                    yaw
                } else {
                    wrap_degrees(yaw)
                },
            }
        }
        "getGpsData" => Command::GetGpsData,
        "getMultirotorState" => Command::GetState,
        "simGetImage" => Command::GetImage { camera, image_type },
        "reset" => Command::Reset,
        other => return Err(ParseError::new(method_pos, format!("unknown method `{other}`"))),
    };
    Ok(command)
}

/// Parses AeroCmd text into a [`Program`].
///
/// Statements are separated by newlines or `;`. A receiver prefix such as
/// `AirSim_client.` and a `print(...)` wrapper around queries are accepted
/// and dropped; they are display conventions only.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::new(0, "empty program"));
    }
    let toks = lex(text)?;
    Parser { toks, at: 0 }.program()
}
