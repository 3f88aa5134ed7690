//! Run reports: `key: value` text lines followed by a JSON block between
//! `BEGIN REPORT JSON` and `END REPORT JSON`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use snnhe_core::layers::LayerStats;
use snnhe_core::network::NetworkSpec;
use snnhe_core::planner::{EventKind, RunLog};

pub const JSON_BEGIN: &str = "BEGIN REPORT JSON";
pub const JSON_END: &str = "END REPORT JSON";

/// One (layer, timestep) cell of the first input's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub layer: usize,
    pub kind: String,
    pub t: usize,
    pub level_in: usize,
    pub level_out: usize,
    pub seconds: f64,
}

/// One use of the secret-key holding authority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub layer: usize,
    pub t: usize,
    pub op: String,
    pub reason: Option<String>,
    pub target: Option<String>,
    pub ciphertexts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerOps {
    pub layer: usize,
    pub kind: String,
    pub rotations: usize,
    pub plain_mults: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Plaintext predictions equal to the label, over labelled inputs.
    pub plaintext_accuracy: Option<f64>,
    /// Decrypted predictions equal to the label, over labelled inputs.
    pub encrypted_accuracy: Option<f64>,
    /// Decrypted predictions equal to the plaintext predictions.
    pub agreement: Option<f64>,
    pub labelled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub network: String,
    pub profile: String,
    pub backend: String,
    pub mode: String,
    pub timesteps: usize,
    pub inputs: usize,
    pub predictions: Vec<usize>,
    pub labels: Vec<Option<usize>>,
    pub plaintext_predictions: Option<Vec<usize>>,
    /// Decrypted class sums per input.
    pub scores: Vec<Vec<f64>>,
    pub agreement: Option<Agreement>,
    /// Level ledger and timings of the first input.
    pub cells: Vec<CellReport>,
    /// Authority events of the first input.
    pub events: Vec<EventReport>,
    /// The first input's refresh points equal the static schedule.
    pub schedule_matches_plan: bool,
    pub refreshes_per_input: usize,
    pub compares_per_input: usize,
    pub layer_ops: Vec<LayerOps>,
    pub peak_ciphertext_bytes: usize,
    pub key_bytes: usize,
    pub peak_memory_bytes: usize,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn log_sections(net: &NetworkSpec, log: &RunLog) -> (Vec<CellReport>, Vec<EventReport>) {
        let kind = |i: usize| net.layers.get(i).map_or("?", |l| l.kind()).to_string();
        let cells = log
            .ledger
            .iter()
            .map(|e| CellReport {
                layer: e.layer,
                kind: kind(e.layer),
                t: e.t,
                level_in: e.level_in,
                level_out: e.level_out,
                seconds: e.seconds,
            })
            .collect();
        let events = log
            .events
            .iter()
            .map(|e| {
                let (reason, target, ciphertexts) = match e.kind {
                    EventKind::Refresh { reason, target, ciphertexts } => {
                        (Some(reason.name().to_string()), Some(target.name().to_string()), ciphertexts)
                    }
                    EventKind::Compare { ciphertexts } => (None, None, ciphertexts),
                };
                EventReport { layer: e.layer, t: e.t, op: e.audit_op().into(), reason, target, ciphertexts }
            })
            .collect();
        (cells, events)
    }

    pub fn layer_ops(net: &NetworkSpec, stats: &[LayerStats]) -> Vec<LayerOps> {
        net.layers
            .iter()
            .zip(stats)
            .enumerate()
            .map(|(i, (l, s))| LayerOps { layer: i, kind: l.kind().into(), rotations: s.rotations(), plain_mults: s.plain_mults })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Extracts the JSON block from rendered report text.
    pub fn from_text(text: &str) -> Option<RunReport> {
        let start = text.find(JSON_BEGIN)? + JSON_BEGIN.len();
        let end = text.find(JSON_END)?;
        serde_json::from_str(text.get(start..end)?).ok()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "network: {}", self.network);
        let _ = writeln!(s, "profile: {}", self.profile);
        let _ = writeln!(s, "backend: {}", self.backend);
        let _ = writeln!(s, "mode: {}", self.mode);
        let _ = writeln!(s, "timesteps: {}", self.timesteps);
        let _ = writeln!(s, "inputs: {}", self.inputs);
        for (i, p) in self.predictions.iter().enumerate() {
            let label = self.labels.get(i).copied().flatten().map_or("-".into(), |l| l.to_string());
            let plain = self
                .plaintext_predictions
                .as_ref()
                .map_or("-".into(), |v| v[i].to_string());
            let _ = writeln!(s, "prediction {i}: {p} (label {label}, plaintext {plain})");
        }
        if let Some(a) = &self.agreement {
            let _ = writeln!(s, "plaintext accuracy: {}", pct(a.plaintext_accuracy));
            let _ = writeln!(s, "encrypted accuracy: {}", pct(a.encrypted_accuracy));
            let _ = writeln!(s, "agreement: {}", pct(a.agreement));
        }
        for c in &self.cells {
            let _ = writeln!(
                s,
                "cell layer={} ({}) t={} level {} -> {} time {:.3}s",
                c.layer, c.kind, c.t, c.level_in, c.level_out, c.seconds
            );
        }
        for e in &self.events {
            let _ = writeln!(
                s,
                "event layer={} t={} op={} reason={} target={} ciphertexts={}",
                e.layer,
                e.t,
                e.op,
                e.reason.as_deref().unwrap_or("-"),
                e.target.as_deref().unwrap_or("-"),
                e.ciphertexts
            );
        }
        for o in &self.layer_ops {
            let _ = writeln!(s, "ops layer={} ({}) rotations={} plain-mults={}", o.layer, o.kind, o.rotations, o.plain_mults);
        }
        let _ = writeln!(s, "refreshes per input: {}", self.refreshes_per_input);
        let _ = writeln!(s, "compares per input: {}", self.compares_per_input);
        let _ = writeln!(s, "schedule matches plan: {}", self.schedule_matches_plan);
        let _ = writeln!(s, "peak memory: {} bytes ({} ciphertext + {} key)", self.peak_memory_bytes, self.peak_ciphertext_bytes, self.key_bytes);
        let _ = writeln!(s, "wall time: {:.3}s", self.wall_seconds);
        let _ = writeln!(s, "{JSON_BEGIN}");
        let _ = writeln!(s, "{}", self.to_json());
        let _ = writeln!(s, "{JSON_END}");
        s
    }
}

/// Fraction of `pairs` that agree, `None` when empty.
pub fn rate(pairs: impl Iterator<Item = (usize, usize)>) -> Option<f64> {
    let (mut hit, mut n) = (0usize, 0usize);
    for (a, b) in pairs {
        n += 1;
        hit += usize::from(a == b);
    }
    (n > 0).then(|| hit as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> RunReport {
        RunReport {
            command: "evaluate".into(),
            network: "n".into(),
            profile: "test".into(),
            backend: "sim".into(),
            mode: "switch".into(),
            timesteps: 2,
            inputs: 2,
            predictions: vec![1, 0],
            labels: vec![Some(1), None],
            plaintext_predictions: Some(vec![1, 1]),
            scores: vec![vec![0.0, 1.5], vec![2.0, 1.0]],
            agreement: Some(Agreement { plaintext_accuracy: Some(1.0), encrypted_accuracy: Some(1.0), agreement: Some(0.5), labelled: 1 }),
            cells: vec![CellReport { layer: 0, kind: "conv".into(), t: 1, level_in: 9, level_out: 8, seconds: 0.25 }],
            events: vec![EventReport { layer: 0, t: 2, op: "TEST-MODE-SWITCH".into(), reason: None, target: None, ciphertexts: 1 }],
            schedule_matches_plan: true,
            refreshes_per_input: 0,
            compares_per_input: 2,
            layer_ops: vec![],
            peak_ciphertext_bytes: 10,
            key_bytes: 5,
            peak_memory_bytes: 15,
            wall_seconds: 1.0,
        }
    }

    #[test]
    fn json_block_roundtrips_through_text() {
        let r = report();
        let text = r.render();
        assert!(text.contains("agreement: 50.00%"));
        assert!(text.contains("op=TEST-MODE-SWITCH"));
        assert!(text.contains("prediction 1: 0 (label -, plaintext 1)"));
        assert_eq!(RunReport::from_text(&text), Some(r));
    }

    #[test]
    fn rates() {
        assert_eq!(rate([(1, 1), (2, 3)].into_iter()), Some(0.5));
        assert_eq!(rate(std::iter::empty()), None);
    }
}
