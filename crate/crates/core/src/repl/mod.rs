//! The operator console: prompt, translate, show, confirm, execute, print.

mod format;

pub use format::{display_program, format_gps, format_state, py_float};

use crate::nl::{TranslateError, Translator};
use crate::wire::{Client, ClientError, Payload, ServerVersion};
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::time::Duration;

pub const CONNECTED: &str = "Connected!";
pub const SEPARATOR: &str = "-----";
pub const PROMPT_COMMAND: &str = "Please enter the control command: ";
pub const SHOW_COMMAND: &str = "The command to be executed is:";
pub const PROMPT_CONFIRM: &str = "Press 'y' to execute, press 'n' to cancel:";
pub const COMPLETED: &str = "Completed!";
pub const CANCELLED: &str = "Cancelled.";
pub const DEFAULT_DISPLAY_PREFIX: &str = "AirSim_client.";

pub const CLIENT_VERSION: u32 = 1;
/// Oldest server this console talks to.
pub const MIN_SERVER_VERSION: u32 = 1;

pub fn banner(server: ServerVersion) -> String {
    format!(
        "Client Ver:{CLIENT_VERSION} (Min Req: {MIN_SERVER_VERSION}), Server Ver:{} (Min Req: {})",
        server.server_version, server.min_client_version
    )
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub endpoint: String,
    pub auto_confirm: bool,
    /// Shown before each call; never sent.
    pub display_prefix: String,
    pub image_output_dir: PathBuf,
    pub connect_timeout: Duration,
    /// Write typed lines to the terminal output too (for piped input).
    pub echo_input: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            endpoint: crate::wire::DEFAULT_TCP_ADDR.into(),
            auto_confirm: false,
            display_prefix: DEFAULT_DISPLAY_PREFIX.into(),
            image_output_dir: PathBuf::from("."),
            connect_timeout: Duration::from_secs(5),
            echo_input: false,
        }
    }
}

/// Exit status of a session.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONNECTION: i32 = 1;

struct Console<'a> {
    out: &'a mut dyn Write,
    transcript: Option<&'a mut dyn Write>,
    echo_input: bool,
}

impl Console<'_> {
    fn write(&mut self, s: &str) {
        let _ = self.out.write_all(s.as_bytes());
        let _ = self.out.flush();
        if let Some(t) = self.transcript.as_mut() {
            let _ = t.write_all(s.as_bytes());
        }
    }

    fn line(&mut self, s: &str) {
        self.write(s);
        self.write("\n");
    }

    /// Reads one line; `None` at end of input. The line is echoed into the
    /// transcript (and the terminal when echoing).
    fn read(&mut self, input: &mut dyn BufRead) -> Option<String> {
        let mut buf = String::new();
        match input.read_line(&mut buf) {
            Ok(0) | Err(_) => None,
            Ok(_) => {
                let text = buf.trim_end_matches(['\n', '\r']).to_string();
                if self.echo_input {
                    let _ = writeln!(self.out, "{text}");
                }
                if let Some(t) = self.transcript.as_mut() {
                    let _ = writeln!(t, "{text}");
                }
                Some(text)
            }
        }
    }
}

/// Runs the console until end of input or `quit`. Returns [`EXIT_OK`], or
/// [`EXIT_CONNECTION`] when the server cannot be reached or goes away.
pub fn run_session<'a>(
    cfg: &SessionConfig,
    translator: &Translator,
    input: &mut dyn BufRead,
    out: &'a mut dyn Write,
    transcript: Option<&'a mut dyn Write>,
) -> i32 {
    let mut con = Console {
        out,
        transcript,
        echo_input: cfg.echo_input,
    };
    let mut client = match Client::connect(&cfg.endpoint, cfg.connect_timeout) {
        Ok(c) => c,
        Err(e) => {
            con.line(&format!("Error: {e}"));
            return EXIT_CONNECTION;
        }
    };
    let version = match client.ping() {
        Ok(v) => v,
        Err(e) => {
            con.line(&format!("Error: {e}"));
            return EXIT_CONNECTION;
        }
    };
    con.line(CONNECTED);
    con.line(&banner(version));
    if version.min_client_version > CLIENT_VERSION || version.server_version < MIN_SERVER_VERSION {
        con.line("Error: client and server versions are incompatible");
        return EXIT_CONNECTION;
    }
    con.line(SEPARATOR);
    let mut images = 0usize;
    loop {
        con.write(PROMPT_COMMAND);
        let Some(utterance) = con.read(input) else {
            return EXIT_OK;
        };
        let utterance = utterance.trim();
        if utterance.is_empty() {
            continue;
        }
        if matches!(utterance, "quit" | "exit") {
            return EXIT_OK;
        }
        let candidate = match translator.translate(utterance) {
            Ok(mut c) => c.remove(0),
            Err(TranslateError::NoConfidentCandidate { best_score, nearest }) => {
                let related: Vec<_> = nearest.into_iter().filter(|n| n.score > 0.0).collect();
                if related.is_empty() {
                    con.line(&format!("No confident translation (best score {best_score:.3})."));
                } else {
                    con.line(&format!("No confident translation (best score {best_score:.3}). Closest known commands:"));
                }
                for n in related {
                    con.line(&format!("  {} ({:.3})", n.nl_pattern, n.score));
                }
                con.line(SEPARATOR);
                continue;
            }
            Err(e) => {
                con.line(&format!("Error: {e}"));
                con.line(SEPARATOR);
                continue;
            }
        };
        con.line(SHOW_COMMAND);
        con.line(&display_program(&candidate.program, &cfg.display_prefix));
        if !cfg.auto_confirm {
            con.write(PROMPT_CONFIRM);
            let Some(answer) = con.read(input) else {
                return EXIT_OK;
            };
            if !answer.trim().eq_ignore_ascii_case("y") {
                con.line(CANCELLED);
                con.line(SEPARATOR);
                continue;
            }
        }
        match client.execute(&candidate.rendered) {
            Ok((status, payloads)) => {
                for p in payloads {
                    match p {
                        Payload::Gps(g) => con.line(&format_gps(&g)),
                        Payload::State(s) => con.line(&format_state(&s)),
                        Payload::Image { png, .. } => {
                            images += 1;
                            let path = cfg.image_output_dir.join(format!("image_{images:04}.png"));
                            match std::fs::write(&path, png) {
                                Ok(()) => con.line(&format!("Image saved to {}", path.display())),
                                Err(e) => con.line(&format!("Error: cannot write {}: {e}", path.display())),
                            }
                        }
                    }
                }
                match status.as_deref() {
                    None | Some("completed") => con.line(COMPLETED),
                    Some(other) => con.line(&format!("Task ended: {other}")),
                }
            }
            Err(ClientError::Remote(e)) => con.line(&format!("Error: {}", e.message)),
            Err(e) => {
                con.line(&format!("Error: connection lost: {e}"));
                return EXIT_CONNECTION;
            }
        }
        con.line(SEPARATOR);
    }
}
