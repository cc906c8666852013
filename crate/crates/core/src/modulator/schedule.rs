//! Latency-delayed, last-writer-wins hand-off of directives to the fast loop.

use super::Directive;

/// Slack absorbing floating-point drift in accumulated sim time.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct Scheduler {
    latency: f64,
    pending: Option<Directive>,
    superseded: usize,
}

impl Scheduler {
    pub fn new(injected_latency: f64) -> Self {
        assert!(injected_latency >= 0.0);
        Scheduler { latency: injected_latency, pending: None, superseded: 0 }
    }

    pub fn latency(&self) -> f64 {
        self.latency
    }

    /// Queues `directive`, replacing any not-yet-applied one.
    pub fn submit(&mut self, directive: Directive) {
        if self.pending.replace(directive).is_some() {
            self.superseded += 1;
        }
    }

    /// Releases the pending directive once `now ≥ issued_at + latency`.
    pub fn poll(&mut self, now: f64) -> Option<Directive> {
        let due = self.pending.as_ref()?.issued_at + self.latency;
        if now + TIME_EPS >= due {
            self.pending.take()
        } else {
            None
        }
    }

    pub fn pending(&self) -> Option<&Directive> {
        self.pending.as_ref()
    }

    /// Directives dropped because a newer one arrived first.
    pub fn superseded(&self) -> usize {
        self.superseded
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulator::Mode;

    fn issued(mode: Mode, at: f64) -> Directive {
        Directive { issued_at: at, ..Directive::new(mode) }
    }

    /// Applies on the first tick of a `dt` clock at or after the due time.
    fn applied_tick(latency: f64, issue: f64, dt: f64) -> f64 {
        let mut s = Scheduler::new(latency);
        s.submit(issued(Mode::Goal, issue));
        let mut k = 0u32;
        loop {
            let t = k as f64 * dt;
            if s.poll(t).is_some() {
                return t;
            }
            k += 1;
        }
    }

    #[test]
    fn zero_latency_applies_at_issue_tick() {
        assert_eq!(applied_tick(0.0, 1.0, 0.05), 1.0);
    }

    #[test]
    fn latency_honesty() {
        for &(lat, issue) in &[(7.094, 0.0), (7.094, 10.0), (2.0, 3.05), (0.33, 0.1)] {
            let t = applied_tick(lat, issue, 0.05);
            assert!(t - issue >= lat - TIME_EPS, "{lat} {issue} {t}");
            assert!(t - issue < lat + 0.05);
        }
        assert!((applied_tick(7.094, 0.0, 0.05) - 7.1).abs() < 1e-9);
    }

    #[test]
    fn last_writer_wins() {
        let mut s = Scheduler::new(5.0);
        s.submit(issued(Mode::Follow, 0.0));
        s.submit(issued(Mode::Goal, 1.0));
        assert!(s.poll(5.5).is_none());
        let d = s.poll(6.0).unwrap();
        assert_eq!(d.mode, Mode::Goal);
        assert_eq!(s.superseded(), 1);
        assert!(s.poll(100.0).is_none());
    }
}
