//! HTTP bridge to an external reasoning service, and a worker-thread wrapper
//! for running any source off the fast loop.

use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::Value;

use super::wire::{decode_response, encode_request};
use super::{DecisionInput, Directive, GoalSpec, Modulator};
use crate::error::{Error, Result};
use crate::world::{Detection, RobotState};

/// POSTs the request document to `url` and decodes the reply.
pub struct ExternalModulator {
    url: String,
    agent: ureq::Agent,
}

impl ExternalModulator {
    pub fn new(url: impl Into<String>, timeout_s: f64) -> Self {
        let agent =
            ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs_f64(timeout_s))).build().into();
        ExternalModulator { url: url.into(), agent }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

fn transport(e: ureq::Error) -> Error {
    match e {
        ureq::Error::Timeout(t) => Error::Timeout(t.to_string()),
        other => Error::Transport(other.to_string()),
    }
}

impl Modulator for ExternalModulator {
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Directive> {
        let request = encode_request(input);
        let mut response = self.agent.post(&self.url).send_json(&request).map_err(transport)?;
        let doc: Value = response.body_mut().read_json().map_err(transport)?;
        let mut directive = decode_response(&doc)?;
        directive.issued_at = input.sim_time;
        Ok(directive)
    }
}

/// Owned copy of a [`DecisionInput`] that can cross threads.
#[derive(Debug, Clone)]
pub struct OwnedInput {
    pub instruction: String,
    pub detections: Vec<Detection>,
    pub robot: RobotState,
    pub sim_time: f64,
    pub history: Vec<Directive>,
    pub task_goal: Option<GoalSpec>,
}

impl OwnedInput {
    pub fn from_input(input: &DecisionInput<'_>) -> Self {
        OwnedInput {
            instruction: input.instruction.to_string(),
            detections: input.detections.to_vec(),
            robot: *input.robot,
            sim_time: input.sim_time,
            history: input.history.to_vec(),
            task_goal: input.task_goal.cloned(),
        }
    }

    pub fn as_input(&self) -> DecisionInput<'_> {
        DecisionInput {
            instruction: &self.instruction,
            detections: &self.detections,
            robot: &self.robot,
            sim_time: self.sim_time,
            history: &self.history,
            task_goal: self.task_goal.as_ref(),
        }
    }
}

/// Runs a source on a worker thread; at most one decision is in flight.
pub struct ThreadedModulator {
    requests: Option<Sender<OwnedInput>>,
    replies: Receiver<Result<Directive>>,
    worker: Option<JoinHandle<()>>,
    in_flight: bool,
}

impl ThreadedModulator {
    pub fn spawn(mut inner: Box<dyn Modulator>) -> Self {
        let (req_tx, req_rx) = mpsc::channel::<OwnedInput>();
        let (rep_tx, rep_rx) = mpsc::channel();
        let worker = std::thread::spawn(move || {
            for input in req_rx {
                if rep_tx.send(inner.decide(&input.as_input())).is_err() {
                    break;
                }
            }
        });
        ThreadedModulator { requests: Some(req_tx), replies: rep_rx, worker: Some(worker), in_flight: false }
    }

    pub fn busy(&self) -> bool {
        self.in_flight
    }

    /// Starts a decision unless one is already running; returns whether it did.
    pub fn submit(&mut self, input: &DecisionInput<'_>) -> bool {
        if self.in_flight {
            return false;
        }
        let Some(tx) = &self.requests else { return false };
        self.in_flight = tx.send(OwnedInput::from_input(input)).is_ok();
        self.in_flight
    }

    /// The finished decision, if one has arrived since the last call.
    pub fn poll(&mut self) -> Option<Result<Directive>> {
        match self.replies.try_recv() {
            Ok(r) => {
                self.in_flight = false;
                Some(r)
            }
            Err(TryRecvError::Empty) => None,
            Err(TryRecvError::Disconnected) => {
                self.in_flight = false;
                None
            }
        }
    }

    /// Blocks until the in-flight decision finishes.
    pub fn wait(&mut self) -> Option<Result<Directive>> {
        if !self.in_flight {
            return None;
        }
        self.in_flight = false;
        self.replies.recv().ok()
    }
}

impl Drop for ThreadedModulator {
    fn drop(&mut self) {
        self.requests.take();
        if let Some(h) = self.worker.take() {
            // a worker stuck on a slow request is left to finish on its own
            if h.is_finished() {
                let _ = h.join();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::modulator::wire::encode_response;
    use crate::modulator::{Mode, ScriptedModulator};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn robot() -> RobotState {
        RobotState { pose: Pose::new(0.0, 0.0, 0.0), v: 0.0, omega: 0.0, radius: 0.3 }
    }

    /// One-shot HTTP server replying with `body`; returns the URL and the
    /// handle yielding the received request body.
    fn serve_once(body: String) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/decide", listener.local_addr().unwrap());
        let h = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut req = vec![0u8; len];
            reader.read_exact(&mut req).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                body.len(),
                body
            )
            .unwrap();
            String::from_utf8(req).unwrap()
        });
        (url, h)
    }

    #[test]
    fn external_round_trip_over_http() {
        let mut reply = Directive::new(Mode::Goal);
        reply.param_updates.insert("sfm_goal_weight".into(), 1.0);
        reply.goal = Some(GoalSpec::Region { region_id: "desk".into() });
        let (url, server) = serve_once(encode_response(&reply).to_string());
        let r = robot();
        let input = DecisionInput {
            instruction: "Navigate to the desk",
            detections: &[],
            robot: &r,
            sim_time: 4.5,
            history: &[],
            task_goal: None,
        };
        let got = ExternalModulator::new(url, 5.0).decide(&input).unwrap();
        let sent: Value = serde_json::from_str(&server.join().unwrap()).unwrap();
        assert_eq!(sent["instruction"], "Navigate to the desk");
        assert_eq!(got.issued_at, 4.5);
        assert_eq!(Directive { issued_at: 0.0, ..got }, reply);
    }

    #[test]
    fn unreachable_endpoint_is_a_transport_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        drop(listener);
        let r = robot();
        let input =
            DecisionInput { instruction: "", detections: &[], robot: &r, sim_time: 0.0, history: &[], task_goal: None };
        let err = ExternalModulator::new(url, 1.0).decide(&input).unwrap_err();
        assert!(matches!(err, Error::Transport(_) | Error::Timeout(_)), "{err}");
    }

    #[test]
    fn threaded_wrapper_matches_inline() {
        let r = robot();
        let input = DecisionInput {
            instruction: "Sing",
            detections: &[],
            robot: &r,
            sim_time: 1.0,
            history: &[],
            task_goal: None,
        };
        let inline = ScriptedModulator::bundled().decide(&input).unwrap();
        let mut t = ThreadedModulator::spawn(Box::new(ScriptedModulator::bundled()));
        assert!(t.submit(&input));
        assert!(!t.submit(&input));
        let got = t.wait().unwrap().unwrap();
        assert_eq!(got, inline);
        assert!(!t.busy());
    }
}
