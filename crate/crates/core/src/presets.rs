//! Published parameter sets bundled as TOML data files.

use serde::Deserialize;
use std::f64::consts::PI;

use crate::error::{PstError, Result};

const CHAIN_ROWS: &str = include_str!("../data/chain_rows.toml");
const INVERSE_DISTANCE: &str = include_str!("../data/inverse_distance.toml");
const OCCUPATION_TRACES: &str = include_str!("../data/occupation_traces.toml");

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ChainRow {
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "J12")]
    pub j12: f64,
    #[serde(rename = "J23")]
    pub j23: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ChainTable {
    pub tau: f64,
    pub spectrum_over_pi: Vec<f64>,
    pub rows: Vec<ChainRow>,
}

impl ChainTable {
    /// Prescribed block energies in absolute units.
    pub fn spectrum(&self) -> Vec<f64> {
        self.spectrum_over_pi.iter().map(|x| x * PI / self.tau).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TransferPair {
    pub initial: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct InverseDistanceSet {
    pub tau: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub r1: f64,
    pub r2: f64,
    pub pairs: Vec<TransferPair>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TraceCase {
    pub initial: String,
    pub target: String,
    pub initial_occupation: Vec<f64>,
    pub final_occupation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct OccupationTraces {
    pub row: usize,
    pub tau: f64,
    pub points: usize,
    pub a: TraceCase,
    pub b: TraceCase,
}

fn parse<T: for<'de> Deserialize<'de>>(name: &str, text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| PstError::Spec(format!("preset {name}: {e}")))
}

pub fn chain_table() -> Result<ChainTable> {
    parse("chain_rows", CHAIN_ROWS)
}

pub fn inverse_distance_set() -> Result<InverseDistanceSet> {
    parse("inverse_distance", INVERSE_DISTANCE)
}

pub fn occupation_traces() -> Result<OccupationTraces> {
    parse("occupation_traces", OCCUPATION_TRACES)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        let t = chain_table().unwrap();
        assert_eq!(t.rows.len(), 5);
        assert_eq!(t.rows[0].j23, 3.84084);
        assert_eq!(t.spectrum().len(), 10);
        let s = inverse_distance_set().unwrap();
        assert_eq!(s.eps2, -28.0330);
        assert_eq!(s.pairs.len(), 2);
        let f = occupation_traces().unwrap();
        assert_eq!(f.b.initial, "1,mu;4,nu");
    }
}
