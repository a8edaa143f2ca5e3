//! Versioned solution snapshots with an integrity digest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridSpec};
use crate::model::SpinorPair;
use crate::solver::IterationState;

use super::write::atomic_write;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format_version: u32,
    pub grid: GridSpec,
    pub a: f64,
    pub k: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// SHA-256 over the little-endian bit patterns of every numeric field.
    pub checksum: String,
}

impl Snapshot {
    pub fn new(grid: GridSpec, a: f64, k: f64, pair: &SpinorPair) -> Self {
        let mut s = Self {
            format_version: SNAPSHOT_VERSION,
            grid,
            a,
            k,
            u: pair.u.clone(),
            v: pair.v.clone(),
            checksum: String::new(),
        };
        s.checksum = s.digest();
        s
    }

    pub fn from_state(state: &IterationState, grid: &Grid) -> Self {
        Self::new(grid.spec(), state.a, state.k, &state.pair)
    }

    fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.format_version.to_le_bytes());
        h.update(self.grid.theta_min.to_le_bytes());
        h.update(self.grid.theta_max.to_le_bytes());
        h.update((self.grid.n_nodes as u64).to_le_bytes());
        h.update(self.a.to_le_bytes());
        h.update(self.k.to_le_bytes());
        for x in self.u.iter().chain(&self.v) {
            h.update(x.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn pair(&self) -> SpinorPair {
        SpinorPair {
            u: self.u.clone(),
            v: self.v.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and verifies a snapshot. Unknown versions are refused before
    /// anything else is read.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::CorruptSnapshot(format!("unreadable: {e}")))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptSnapshot("missing format_version".into()))?;
        if version != SNAPSHOT_VERSION as u64 {
            return Err(Error::UnsupportedVersion {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                supported: SNAPSHOT_VERSION,
            });
        }
        let snap: Snapshot = serde_json::from_value(value)
            .map_err(|e| Error::CorruptSnapshot(format!("bad layout: {e}")))?;
        let n = snap.grid.n_nodes;
        if snap.u.len() != n || snap.v.len() != n {
            return Err(Error::CorruptSnapshot(format!(
                "expected {n} samples, found u: {}, v: {}",
                snap.u.len(),
                snap.v.len()
            )));
        }
        if snap.digest() != snap.checksum {
            return Err(Error::CorruptSnapshot("checksum mismatch".into()));
        }
        Ok(snap)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(n: usize) -> Snapshot {
        let u: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin() / 3.0).collect();
        let v: Vec<f64> = (0..n).map(|i| -(i as f64).sqrt() * 1e-7).collect();
        Snapshot::new(
            GridSpec::new(-1.0, 1.0, n),
            -2.312407413265335,
            1.0000000021702558,
            &SpinorPair { u, v },
        )
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        let s = sample(40);
        s.save(&p).unwrap();
        let back = Snapshot::load(&p).unwrap();
        assert_eq!(back, s);
        for (a, b) in back.u.iter().zip(&s.u) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let text = sample(40).to_json().unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(
            Snapshot::from_json(cut),
            Err(Error::CorruptSnapshot(_))
        ));
    }

    #[test]
    fn tampered_value_fails_the_checksum() {
        let mut s = sample(20);
        s.u[3] += 1e-12;
        let text = s.to_json().unwrap();
        assert!(matches!(
            Snapshot::from_json(&text),
            Err(Error::CorruptSnapshot(_))
        ));
    }

    #[test]
    fn other_versions_are_refused() {
        let mut s = sample(20);
        s.format_version = 0;
        let text = s.to_json().unwrap();
        assert!(matches!(
            Snapshot::from_json(&text),
            Err(Error::UnsupportedVersion {
                found: 0,
                supported: 1
            })
        ));
    }

    #[test]
    fn wrong_length_is_corrupt() {
        let mut s = sample(20);
        s.u.pop();
        s.checksum = s.digest();
        let text = s.to_json().unwrap();
        assert!(matches!(
            Snapshot::from_json(&text),
            Err(Error::CorruptSnapshot(_))
        ));
    }

    proptest! {
        #[test]
        fn any_finite_values_round_trip(vals in prop::collection::vec(-1e300f64..1e300, 16..64), a in -10f64..10.0) {
            let n = vals.len();
            let pair = SpinorPair { u: vals.clone(), v: vals.iter().map(|x| x * 1e-300).collect() };
            let s = Snapshot::new(GridSpec::new(-3.0, 2.0, n), a, 1.5, &pair);
            let back = Snapshot::from_json(&s.to_json().unwrap()).unwrap();
            prop_assert!(back.u.iter().zip(&s.u).all(|(x, y)| x.to_bits() == y.to_bits()));
            prop_assert!(back.v.iter().zip(&s.v).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
