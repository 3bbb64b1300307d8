//! One-shot summary of a graph map, as printed by `fbcube analyze`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::map::{GraphMap, TrainTrackVerdict};
use crate::perron::{perron_eigen, verify_expansion, ExpansionCheck, TransitionMatrix, DEFAULT_TOL};

pub const EXPANSION_POWERS: usize = 8;
pub const EXPANSION_TOL: f64 = 1e-8;

/// Fields are serialized in declaration order. Everything after
/// `validation` is absent when the map is invalid, and the Perron data is
/// absent when the map is reducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub valid: bool,
    pub validation: Vec<String>,
    pub edges: Vec<String>,
    pub train_track: Option<TrainTrackVerdict>,
    pub irreducible: Option<bool>,
    pub expanding_edges: Option<Vec<bool>>,
    pub transition_matrix: Option<Vec<Vec<u64>>>,
    pub eigenvalue: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub expansion: Option<ExpansionCheck>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::Domain(e.to_string()))
    }
}

pub fn analyze(map: &GraphMap) -> Result<AnalysisReport> {
    let g = map.graph();
    let validation = map.validate();
    let mut report = AnalysisReport {
        valid: validation.is_empty(),
        validation,
        edges: g.edges().map(|e| g.edge_name(e).to_string()).collect(),
        train_track: None,
        irreducible: None,
        expanding_edges: None,
        transition_matrix: None,
        eigenvalue: None,
        weights: None,
        expansion: None,
    };
    if !report.valid {
        return Ok(report);
    }
    report.train_track = Some(map.is_train_track()?);
    let irreducible = map.is_irreducible()?;
    report.irreducible = Some(irreducible);
    report.expanding_edges = Some(map.expanding_edges()?);
    let m = TransitionMatrix::of(map);
    report.transition_matrix = Some(m.rows.clone());
    if irreducible {
        let pd = perron_eigen(&m, DEFAULT_TOL)?;
        report.eigenvalue = Some(pd.eigenvalue);
        report.weights = Some(pd.weights.as_slice().to_vec());
        report.expansion = Some(verify_expansion(map, &pd, EXPANSION_POWERS, EXPANSION_TOL)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::format;

    #[test]
    fn golden() {
        let r = analyze(&examples::golden()).unwrap();
        assert!(r.valid);
        assert!(r.train_track.as_ref().unwrap().is_train_track);
        assert_eq!(r.irreducible, Some(true));
        assert_eq!(r.expanding_edges, Some(vec![true, true]));
        assert_eq!(r.transition_matrix, Some(vec![vec![0, 1], vec![1, 1]]));
        assert!((r.eigenvalue.unwrap() - 1.618_033_988_7).abs() < 1e-9);
        assert!(r.expansion.unwrap().within_tol);
    }

    #[test]
    fn json_round_trip_and_order() {
        for m in [examples::golden(), examples::tribonacci(), examples::golden_with_bridge()] {
            let r = analyze(&m).unwrap();
            let text = r.to_json();
            assert_eq!(AnalysisReport::from_json(&text).unwrap(), r);
            assert_eq!(analyze(&m).unwrap().to_json(), text);
            let keys = ["\"valid\"", "\"validation\"", "\"edges\"", "\"train_track\"", "\"expansion\""];
            let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
            assert!(pos.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn invalid_map() {
        let text = "vertices: v w\nedges:\n a: v w\n b: w w\nmap:\n v -> v\n w -> w\n a -> b\n b -> b\n";
        let r = analyze(&format::parse_unchecked(text).unwrap()).unwrap();
        assert!(!r.valid);
        assert!(!r.validation.is_empty());
        assert!(r.train_track.is_none());
    }
}
