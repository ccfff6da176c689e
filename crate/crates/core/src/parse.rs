//! Graph text format.
//!
//! One statement per line, `#` starts a comment:
//!
//! ```text
//! node x1 x2 x3        # optional pre-declaration
//! x1 -> x2
//! x1 <-> x3
//! latent u1            # latent DAGs only
//! ```

use crate::error::{Error, Result};
use crate::graph::{Cadmg, LatentDag};

#[derive(Clone, Debug)]
pub enum ParsedGraph {
    Admg(Cadmg),
    Latent(LatentDag),
}

impl ParsedGraph {
    pub fn as_admg(&self) -> Result<&Cadmg> {
        match self {
            ParsedGraph::Admg(g) => Ok(g),
            ParsedGraph::Latent(_) => Err(Error::Structural(
                "this command needs an ADMG; project the latent DAG first".into(),
            )),
        }
    }

    pub fn as_latent(&self) -> Result<&LatentDag> {
        match self {
            ParsedGraph::Latent(d) => Ok(d),
            ParsedGraph::Admg(_) => Err(Error::Structural(
                "this command needs a latent DAG (`latent` declarations)".into(),
            )),
        }
    }
}

/// Parses the text format; the presence of any `latent` statement selects a
/// latent DAG, which must then have no bidirected edges.
pub fn parse_graph(text: &str) -> Result<ParsedGraph> {
    let mut nodes: Vec<String> = Vec::new();
    let mut latent: Vec<String> = Vec::new();
    let mut directed: Vec<(String, String)> = Vec::new();
    let mut bidirected: Vec<(String, String)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| Error::Parse { line: line_no, msg };
        match toks.as_slice() {
            ["node", rest @ ..] if !rest.is_empty() => {
                nodes.extend(rest.iter().map(|s| s.to_string()));
            }
            ["latent", rest @ ..] if !rest.is_empty() => {
                latent.extend(rest.iter().map(|s| s.to_string()));
            }
            [a, "->", b] => directed.push((a.to_string(), b.to_string())),
            [a, "<->", b] => bidirected.push((a.to_string(), b.to_string())),
            _ => {
                return Err(err(format!(
                    "expected `node …`, `latent …`, `a -> b`, or `a <-> b`, got `{line}`"
                )))
            }
        }
    }
    nodes.extend(latent.iter().cloned());
    for (a, b) in directed.iter().chain(bidirected.iter()) {
        nodes.push(a.clone());
        nodes.push(b.clone());
    }
    nodes.sort();
    nodes.dedup();
    let node_refs: Vec<&str> = nodes.iter().map(|s| s.as_str()).collect();
    let dir: Vec<(&str, &str)> = directed.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let bi: Vec<(&str, &str)> = bidirected.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    if latent.is_empty() {
        Ok(ParsedGraph::Admg(Cadmg::admg(&node_refs, &dir, &bi)?))
    } else {
        if !bi.is_empty() {
            return Err(Error::Structural(
                "latent DAGs use only directed edges; model confounding by latent vertices".into(),
            ));
        }
        let lat_refs: Vec<&str> = latent.iter().map(|s| s.as_str()).collect();
        Ok(ParsedGraph::Latent(LatentDag::new(&node_refs, &lat_refs, &dir)?))
    }
}

/// Latent DAG serialization (ADMGs use [`Cadmg::to_text`]).
pub fn latent_to_text(d: &LatentDag) -> String {
    let mut out = d.as_admg().to_text();
    if !d.latent().is_empty() {
        let names: Vec<&str> = d.latent().iter().map(|v| d.labels().label(v)).collect();
        out.push_str(&format!("latent {}\n", names.join(" ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_admg_with_comments() {
        let g = parse_graph("# demo\nnode a b c\na -> b # edge\nb <-> c\n").unwrap();
        let g = g.as_admg().unwrap();
        assert_eq!(g.vertices().len(), 3);
        assert_eq!(g.directed_edges().len(), 1);
        assert_eq!(g.bidirected_edges().len(), 1);
    }

    #[test]
    fn parses_latent_dag() {
        let d = parse_graph("u -> a\nu -> b\nlatent u\n").unwrap();
        let d = d.as_latent().unwrap();
        assert_eq!(d.latent().len(), 1);
        assert_eq!(d.observed().len(), 2);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_graph("a -> b\nbogus line\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn rejects_bidirected_in_latent_dag() {
        assert!(parse_graph("latent u\nu -> a\na <-> b\n").is_err());
    }

    #[test]
    fn isolated_nodes_survive_roundtrip() {
        let g = parse_graph("node a b loner\na -> b\n").unwrap();
        let g = g.as_admg().unwrap();
        let text = g.to_text();
        let again = parse_graph(&text).unwrap();
        assert_eq!(again.as_admg().unwrap(), g);
    }
}
