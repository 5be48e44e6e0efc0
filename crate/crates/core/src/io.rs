//! Text formats: model JSON, matrix CSV, edge lists and sweep tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hamiltonian, SimpleGraph, SubgraphTerm, SymmetricMatrix};
use crate::twoblock::{CurvePoint, SweepRow};

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    n: usize,
    #[serde(default)]
    alpha: f64,
    #[serde(default)]
    terms: Vec<TermDoc>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TermDoc {
    edges: Vec<[usize; 2]>,
    beta: f64,
}

/// Parses `{"n": N, "alpha": a, "terms": [{"edges": [[0,1], ...], "beta": b}]}`.
///
/// Pattern vertices are `0..=max index`. Errors name the line and column for
/// syntax problems and the offending field otherwise.
pub fn parse_model(text: &str) -> Result<Hamiltonian> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| {
        Error::Parse(format!(
            "model JSON line {} column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    let mut terms = Vec::with_capacity(doc.terms.len());
    for (k, t) in doc.terms.iter().enumerate() {
        let edges: Vec<(usize, usize)> = t.edges.iter().map(|&[a, b]| (a, b)).collect();
        let pattern = SimpleGraph::from_edges(&edges)
            .map_err(|e| Error::Parse(format!("terms[{k}].edges: {e}")))?;
        let term = SubgraphTerm::new(pattern, t.beta)
            .map_err(|e| Error::Parse(format!("terms[{k}]: {e}")))?;
        terms.push(term);
    }
    Hamiltonian::new(doc.n, doc.alpha, terms).map_err(|e| Error::Parse(format!("model: {e}")))
}

pub fn model_to_json(model: &Hamiltonian) -> String {
    let doc = ModelDoc {
        n: model.n_vertices(),
        alpha: model.alpha(),
        terms: model
            .terms()
            .iter()
            .map(|t| TermDoc {
                edges: t.pattern().edges().iter().map(|&(a, b)| [a, b]).collect(),
                beta: t.weight(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("model serializes")
}

/// Reads `N` rows of `N` comma-separated values.
pub fn parse_matrix_csv(text: &str) -> Result<SymmetricMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("matrix CSV row {}: {e}", r + 1)))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|e| {
                    Error::Parse(format!("matrix CSV row {} column {}: {e}", r + 1, c + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    SymmetricMatrix::from_rows(rows)
}

pub fn matrix_to_csv(x: &SymmetricMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in x.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

/// One `i j` pair per line, `i < j`.
pub fn edge_list(g: &SimpleGraph) -> String {
    g.edges()
        .iter()
        .map(|(a, b)| format!("{a} {b}\n"))
        .collect()
}

/// Parses an edge list on `n` vertices; blank lines and `#` comments are skipped.
pub fn parse_edge_list(text: &str, n: usize) -> Result<SimpleGraph> {
    let mut edges = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse = |s: Option<&str>| {
            s.and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| Error::Parse(format!("edge list line {}: expected `i j`", k + 1)))
        };
        let mut it = line.split_whitespace();
        let (a, b) = (parse(it.next())?, parse(it.next())?);
        if it.next().is_some() {
            return Err(Error::Parse(format!(
                "edge list line {}: expected `i j`",
                k + 1
            )));
        }
        edges.push((a, b));
    }
    SimpleGraph::new(n, &edges)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["beta", "x", "y", "trivial", "residual"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.beta.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.trivial.to_string(),
            r.residual.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

/// Curve samples as `x,g,h`; `g` is empty outside its domain.
pub fn curves_csv(points: &[CurvePoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "g", "h"]).expect("in-memory write");
    for p in points {
        w.write_record([
            p.x.to_string(),
            p.g.map(|v| v.to_string()).unwrap_or_default(),
            p.h.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PatternKind;

    #[test]
    fn model_round_trip() {
        let text =
            r#"{"n": 50, "alpha": -0.3, "terms": [{"edges": [[0,1],[1,2],[0,2]], "beta": 0.1}]}"#;
        let m = parse_model(text).unwrap();
        assert_eq!(m.n_vertices(), 50);
        assert_eq!(m.alpha(), -0.3);
        assert_eq!(m.terms()[0].kind(), PatternKind::Triangle);
        let back = parse_model(&model_to_json(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn model_errors_locate_problem() {
        let e = parse_model("{\"n\": 5,\n \"alpha\": oops}")
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 2"), "{e}");
        let e = parse_model(r#"{"n": 5, "terms": [{"edges": [[0,0]], "beta": 1}]}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("terms[0]"), "{e}");
        assert!(parse_model(r#"{"n": 5, "gamma": 1}"#).is_err());
    }

    #[test]
    fn empty_model_defaults() {
        let m = parse_model(r#"{"n": 4}"#).unwrap();
        assert_eq!(m.alpha(), 0.0);
        assert!(m.terms().is_empty());
    }

    #[test]
    fn matrix_round_trip() {
        let x = SymmetricMatrix::from_fn(4, |i, j| (i + j) as f64 / 10.0);
        let back = parse_matrix_csv(&matrix_to_csv(&x)).unwrap();
        assert_eq!(back, x);
        assert!(parse_matrix_csv("0,1\n0,0\n").is_err());
        let e = parse_matrix_csv("0,x\nx,0\n").unwrap_err().to_string();
        assert!(e.contains("row 1 column 2"), "{e}");
    }

    #[test]
    fn edge_list_round_trip() {
        let g = SimpleGraph::new(5, &[(0, 3), (1, 2), (2, 4)]).unwrap();
        let text = edge_list(&g);
        assert_eq!(text, "0 3\n1 2\n2 4\n");
        assert_eq!(parse_edge_list(&text, 5).unwrap(), g);
        assert!(parse_edge_list("0 1 2\n", 5).is_err());
    }
}
