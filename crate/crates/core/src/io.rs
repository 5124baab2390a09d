//! JSON model formats and result serialization.

use std::collections::{BTreeMap, HashMap};

use serde::Deserialize;
use serde_json::{json, Value};

use crate::engine::{CertifiedInterval, CriticalActivityReport, Normalization};
use crate::error::{invalid, Result};
use crate::graph::{ActivityMap, FiniteGraph};
use crate::periodic::{CrossEdge, PeriodicGraph};
use crate::reductions::{SingleSitePotential, TransitionSystem};

/// Vertex and symbol names may be written as strings or integers.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Label {
    Text(String),
    Int(i64),
}

impl Label {
    fn name(&self) -> String {
        match self {
            Label::Text(s) => s.clone(),
            Label::Int(i) => i.to_string(),
        }
    }
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).or_else(|e| invalid(format!("malformed JSON: {e}")))
}

fn index_labels(labels: &[Label], what: &str) -> Result<(Vec<String>, HashMap<String, usize>)> {
    let names: Vec<String> = labels.iter().map(Label::name).collect();
    let mut index = HashMap::new();
    for (i, s) in names.iter().enumerate() {
        if index.insert(s.clone(), i).is_some() {
            return invalid(format!("duplicate {what} label {s:?}"));
        }
    }
    Ok((names, index))
}

fn lookup(index: &HashMap<String, usize>, l: &Label, what: &str) -> Result<usize> {
    index
        .get(&l.name())
        .copied()
        .ok_or_else(|| crate::Error::InvalidInput(format!("unknown {what} {:?}", l.name())))
}

fn activities(
    names: &[String],
    index: &HashMap<String, usize>,
    lambda: &BTreeMap<String, f64>,
    default: f64,
) -> Result<Vec<f64>> {
    let mut values = vec![default; names.len()];
    for (k, &v) in lambda {
        let i = *index
            .get(k)
            .ok_or_else(|| crate::Error::InvalidInput(format!("activity for unknown vertex {k:?}")))?;
        values[i] = v;
    }
    Ok(values)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FiniteFile {
    vertices: Vec<Label>,
    #[serde(default)]
    edges: Vec<[Label; 2]>,
    #[serde(default)]
    lambda: BTreeMap<String, f64>,
}

/// `{"vertices": [...], "edges": [[a, b], ...], "lambda": {a: 1.0}}`; missing
/// activities default to 1.
pub fn parse_finite_graph(text: &str) -> Result<(FiniteGraph, ActivityMap)> {
    let f: FiniteFile = parse(text)?;
    let (names, index) = index_labels(&f.vertices, "vertex")?;
    let edges = f
        .edges
        .iter()
        .map(|[a, b]| Ok((lookup(&index, a, "vertex")?, lookup(&index, b, "vertex")?)))
        .collect::<Result<Vec<_>>>()?;
    let lambda = ActivityMap::new(activities(&names, &index, &f.lambda, 1.0)?)?;
    let g = FiniteGraph::from_edges(names.len(), &edges)?.with_labels(names)?;
    Ok((g, lambda))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupSpec {
    #[serde(rename = "type")]
    kind: String,
    d: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CrossSpec {
    from: Label,
    offset: Vec<i32>,
    to: Label,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PeriodicFile {
    group: GroupSpec,
    domain: Vec<Label>,
    #[serde(default)]
    internal_edges: Vec<[Label; 2]>,
    #[serde(default)]
    cross_edges: Vec<CrossSpec>,
    #[serde(default)]
    lambda: BTreeMap<String, f64>,
}

pub fn parse_periodic_graph(text: &str) -> Result<PeriodicGraph> {
    let f: PeriodicFile = parse(text)?;
    if f.group.kind != "Zd" {
        return invalid(format!("unsupported group type {:?}; only \"Zd\"", f.group.kind));
    }
    let (names, index) = index_labels(&f.domain, "domain")?;
    let internal = f
        .internal_edges
        .iter()
        .map(|[a, b]| Ok((lookup(&index, a, "domain vertex")?, lookup(&index, b, "domain vertex")?)))
        .collect::<Result<Vec<_>>>()?;
    let cross = f
        .cross_edges
        .iter()
        .map(|c| {
            Ok(CrossEdge {
                from: lookup(&index, &c.from, "domain vertex")?,
                offset: c.offset.clone(),
                to: lookup(&index, &c.to, "domain vertex")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda = activities(&names, &index, &f.lambda, 1.0)?;
    PeriodicGraph::new(f.group.d, names, &internal, &cross, lambda)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SftFile {
    alphabet: Vec<Label>,
    d: usize,
    matrices: BTreeMap<String, Vec<Vec<u8>>>,
    #[serde(default)]
    phi: BTreeMap<String, f64>,
}

fn transpose(m: &[Vec<u8>]) -> Vec<Vec<u8>> {
    (0..m.len())
        .map(|j| m.iter().map(|row| row.get(j).copied().unwrap_or(0)).collect())
        .collect()
}

/// `{"alphabet": [...], "d": 1, "matrices": {"e1": [[..]]}, "phi": {...}}`.
/// A matrix for a negative generator (`"-e1"`) may be given; it must be the
/// transpose of the positive one.
pub fn parse_transition_system(text: &str) -> Result<(TransitionSystem, SingleSitePotential)> {
    let f: SftFile = parse(text)?;
    let (names, index) = index_labels(&f.alphabet, "symbol")?;
    let mut matrices = Vec::with_capacity(f.d);
    for k in 1..=f.d {
        let m = f
            .matrices
            .get(&format!("e{k}"))
            .ok_or_else(|| crate::Error::InvalidInput(format!("missing matrix \"e{k}\"")))?;
        if let Some(neg) = f.matrices.get(&format!("-e{k}")) {
            if *neg != transpose(m) {
                return invalid(format!("matrix \"-e{k}\" is not the transpose of \"e{k}\""));
            }
        }
        matrices.push(m.clone());
    }
    for key in f.matrices.keys() {
        let k: Option<usize> = key.trim_start_matches('-').strip_prefix('e').and_then(|s| s.parse().ok());
        if !k.is_some_and(|k| (1..=f.d).contains(&k)) {
            return invalid(format!("unexpected matrix key {key:?}"));
        }
    }
    let phi = activities(&names, &index, &f.phi, 0.0)?;
    Ok((TransitionSystem::new(names, f.d, matrices)?, SingleSitePotential(phi)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    matrix: Vec<Vec<u8>>,
    safe: usize,
}

/// `{"matrix": [[1,1],[1,0]], "safe": 0}`.
pub fn parse_safe_matrix(text: &str) -> Result<(Vec<Vec<u8>>, usize)> {
    let f: MatrixFile = parse(text)?;
    Ok((f.matrix, f.safe))
}

/// Infinite values are written as the string "inf".
pub fn real(x: f64) -> Value {
    if x.is_infinite() {
        json!(if x > 0.0 { "inf" } else { "-inf" })
    } else if x.fract() == 0.0 && x.abs() < 9.0e15 {
        json!(x as i64)
    } else {
        json!(x)
    }
}

pub fn normalization_name(n: Normalization) -> &'static str {
    match n {
        Normalization::PerVertex => "per_vertex",
        Normalization::PerGroupElement => "per_group_element",
    }
}

pub fn interval_json(
    iv: &CertifiedInterval,
    epsilon: f64,
    normalization: Option<Normalization>,
    regime: Option<&CriticalActivityReport>,
    certified: bool,
) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("lower".into(), json!(iv.lower));
    out.insert("upper".into(), json!(iv.upper));
    out.insert("estimate".into(), json!(iv.estimate));
    out.insert("width".into(), json!(iv.width()));
    out.insert("epsilon".into(), json!(epsilon));
    out.insert("certified".into(), json!(certified));
    if let Some(n) = normalization {
        out.insert("normalization".into(), json!(normalization_name(n)));
    }
    out.insert("depth_used".into(), json!(iv.depth_used));
    if let Some(r) = regime {
        out.insert("regime".into(), serde_json::to_value(r.regime).expect("enum"));
    }
    out.insert("factors".into(), serde_json::to_value(&iv.factors).expect("factors"));
    Value::Object(out)
}

pub fn regime_json(r: &CriticalActivityReport) -> Value {
    json!({
        "max_degree": r.max_degree,
        "lambda_c_of_degree": real(r.lambda_c_of_degree),
        "lambda_plus": r.lambda_plus,
        "regime": r.regime,
        "mu_hat": r.mu_hat,
        "lambda_c_of_mu": r.lambda_c_of_mu.map(real),
        "saw_depth": r.saw_depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_graph_round_trip() {
        let (g, lam) = parse_finite_graph(
            r#"{"vertices":["a","b","c","d"],"edges":[["a","b"],["b","c"],["c","d"],["d","a"]],"lambda":{"a":2.0}}"#,
        )
        .unwrap();
        assert_eq!(g.edge_count(), 4);
        assert_eq!(lam.values(), &[2.0, 1.0, 1.0, 1.0]);
        assert_eq!(g.labels().unwrap()[3], "d");
        assert!(parse_finite_graph(r#"{"vertices":["a"],"edges":[["a","z"]]}"#).is_err());
        assert!(parse_finite_graph(r#"{"vertices":["a","a"]}"#).is_err());
        assert!(parse_finite_graph("{").is_err());
    }

    #[test]
    fn periodic_graph_parsing() {
        let pg = parse_periodic_graph(
            r#"{"group":{"type":"Zd","d":2},"domain":["v"],"cross_edges":[{"from":"v","offset":[1,0],"to":"v"},{"from":"v","offset":[0,1],"to":"v"}]}"#,
        )
        .unwrap();
        assert_eq!(pg.max_degree(), 4);
        assert!(parse_periodic_graph(r#"{"group":{"type":"Heisenberg","d":3},"domain":["v"]}"#).is_err());
    }

    #[test]
    fn sft_parsing_checks_transpose() {
        let ok = r#"{"alphabet":["0","1"],"d":1,"matrices":{"e1":[[1,1],[1,0]],"-e1":[[1,1],[1,0]]},"phi":{"1":0.5}}"#;
        let (ts, phi) = parse_transition_system(ok).unwrap();
        assert_eq!(ts.alphabet().len(), 2);
        assert_eq!(phi.0, vec![0.0, 0.5]);
        let bad = r#"{"alphabet":["0","1"],"d":1,"matrices":{"e1":[[1,1],[0,0]],"-e1":[[1,1],[0,0]]}}"#;
        assert!(parse_transition_system(bad).is_err());
        let missing = r#"{"alphabet":["0"],"d":2,"matrices":{"e1":[[1]]}}"#;
        assert!(parse_transition_system(missing).is_err());
    }

    #[test]
    fn reals_are_integral_when_possible() {
        assert_eq!(real(7.0).to_string(), "7");
        assert_eq!(real(f64::INFINITY), json!("inf"));
        assert_eq!(real(0.5).to_string(), "0.5");
    }
}
