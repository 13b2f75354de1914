//! Reproducible artifact plumbing: every table opens with a comment block
//! carrying the code version, the exact configuration and its hash, the seed,
//! and the truncation boxes, so a table can be regenerated byte for byte.

use std::fmt::Write as _;
use std::sync::Arc;

use serde_json::json;
use sha2::{Digest, Sha256};

use fraclab::domain::GridDomain;
use fraclab::params::{
    SLACK_COMPARISON, SLACK_EQUIVALENCE, TOL_CAP, TOL_EIG, TOL_GEOM, TOL_K, TOL_QUAD,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything the header block records about one run.
pub struct RunMeta {
    pub command: &'static str,
    pub config_json: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    /// Extra header lines: truncation boxes, quadrature windows, norms.
    pub notes: Vec<(&'static str, String)>,
}

impl RunMeta {
    pub fn new(
        command: &'static str,
        config_json: String,
        raw_config: &[u8],
        seed: u64,
        threads: usize,
    ) -> Self {
        RunMeta {
            command,
            config_json,
            config_sha256: sha256_hex(raw_config),
            seed,
            threads,
            notes: Vec::new(),
        }
    }

    /// Records the truncation box of a domain in play.
    pub fn note_domain(&mut self, label: &str, d: &Arc<GridDomain>) {
        let (lo, hi) = (d.lo(), d.hi());
        let mut line = format!("{label}: dim={} h={:e} nodes=[{}..{}]", d.dim(), d.h(), lo[0], hi[0]);
        if d.dim() == 2 {
            let _ = write!(line, "x[{}..{}]", lo[1], hi[1]);
        }
        let _ = write!(line, " active={}", d.active_count());
        self.notes.push(("truncation", line));
    }

    pub fn note(&mut self, key: &'static str, line: String) {
        self.notes.push((key, line));
    }

    /// Comment block placed before the CSV column header.
    pub fn csv_header(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# fraclab {VERSION}");
        let _ = writeln!(out, "# command: {}", self.command);
        let _ = writeln!(out, "# seed: {}", self.seed);
        let _ = writeln!(out, "# threads: {}", thread_label(self.threads));
        let _ = writeln!(out, "# config-sha256: {}", self.config_sha256);
        let _ = writeln!(out, "# config: {}", self.config_json);
        let _ = writeln!(
            out,
            "# tolerances: tol_k={TOL_K:e} tol_eig={TOL_EIG:e} tol_cap={TOL_CAP:e} \
             tol_quad={TOL_QUAD:e} tol_geom={TOL_GEOM:e} slack_comparison={SLACK_COMPARISON:e} \
             slack_equivalence={SLACK_EQUIVALENCE:e}"
        );
        for (key, line) in &self.notes {
            let _ = writeln!(out, "# {key}: {line}");
        }
        out
    }

    /// The same record as a JSON object, for JSON-emitting commands.
    pub fn json_value(&self) -> serde_json::Value {
        let config: serde_json::Value =
            serde_json::from_str(&self.config_json).unwrap_or(serde_json::Value::Null);
        json!({
            "version": VERSION,
            "command": self.command,
            "seed": self.seed,
            "threads": thread_label(self.threads),
            "config_sha256": self.config_sha256,
            "config": config,
            "tolerances": {
                "tol_k": TOL_K,
                "tol_eig": TOL_EIG,
                "tol_cap": TOL_CAP,
                "tol_quad": TOL_QUAD,
                "tol_geom": TOL_GEOM,
                "slack_comparison": SLACK_COMPARISON,
                "slack_equivalence": SLACK_EQUIVALENCE,
            },
            "notes": self.notes.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>(),
        })
    }
}

fn thread_label(threads: usize) -> String {
    if threads == 0 {
        "default".into()
    } else {
        threads.to_string()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Fixed-width scientific notation; the one float format every table uses,
/// so reruns are byte-comparable.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}
