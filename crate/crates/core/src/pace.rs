//! PACE 2017 `.gr` and `.td` text formats. Vertices are 1-indexed on disk;
//! vertex `i` is `Var(i - 1)`.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::formula::Var;
use crate::graph::Graph;
use crate::treedecomp::{BagId, TreeDecomp};

fn pace_err(line: usize, message: impl Into<String>) -> Error {
    Error::Pace { line, message: message.into() }
}

/// Meaningful lines with their 1-based numbers; `c` comments and blank lines
/// are skipped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.first() {
            None | Some(&"c") => None,
            _ => Some((i + 1, toks)),
        }
    })
}

fn parse_num(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| pace_err(line, format!("expected a number, found `{tok}`")))
}

fn vertex(tok: &str, line: usize, n: usize) -> Result<Var> {
    let i = parse_num(tok, line)?;
    if i == 0 || i > n {
        return Err(pace_err(line, format!("vertex {i} outside 1..={n}")));
    }
    Ok(Var(i as u32 - 1))
}

/// Number of vertices needed to name every vertex of `g` by index.
pub fn vertex_count(g: &Graph) -> usize {
    g.vertices().last().map_or(0, |v| v.index() + 1)
}

pub fn write_gr(g: &Graph) -> String {
    let mut out = String::new();
    let n = vertex_count(g);
    writeln!(out, "p tw {} {}", n, g.num_edges()).unwrap();
    for (u, v) in g.edges() {
        writeln!(out, "{} {}", u.index() + 1, v.index() + 1).unwrap();
    }
    out
}

/// Reads a `.gr` file. Every vertex `1..=n` is present in the result.
pub fn read_gr(text: &str) -> Result<Graph> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| pace_err(0, "empty input"))?;
    if header.len() != 4 || header[0] != "p" || header[1] != "tw" {
        return Err(pace_err(hl, "expected header `p tw <n> <m>`"));
    }
    let n = parse_num(header[2], hl)?;
    let m = parse_num(header[3], hl)?;
    let mut g = Graph::with_vertices((0..n as u32).map(Var));
    let mut seen = 0;
    for (ln, toks) in lines {
        if toks.len() != 2 {
            return Err(pace_err(ln, "expected an edge `u v`"));
        }
        g.add_edge(vertex(toks[0], ln, n)?, vertex(toks[1], ln, n)?);
        seen += 1;
    }
    if seen != m {
        return Err(pace_err(hl, format!("header declares {m} edges, found {seen}")));
    }
    Ok(g)
}

/// Writes `t` with bags numbered in breadth-first order, so the root is
/// bag 1. `n` is the vertex count for the header.
pub fn write_td(t: &TreeDecomp, n: usize) -> String {
    let order = t.bfs();
    let mut id = vec![0; t.len()];
    for (i, &b) in order.iter().enumerate() {
        id[b] = i + 1;
    }
    let max_bag = t.bags().iter().map(BTreeSet::len).max().unwrap_or(0);
    let mut out = String::new();
    writeln!(out, "s td {} {} {}", t.len(), max_bag, n).unwrap();
    for &b in &order {
        write!(out, "b {}", id[b]).unwrap();
        for v in t.bag(b) {
            write!(out, " {}", v.index() + 1).unwrap();
        }
        out.push('\n');
    }
    for &b in &order {
        if let Some(p) = t.parent(b) {
            writeln!(out, "{} {}", id[p], id[b]).unwrap();
        }
    }
    out
}

/// Reads a `.td` file rooted at bag 1.
pub fn read_td(text: &str) -> Result<TreeDecomp> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| pace_err(0, "empty input"))?;
    if header.len() != 5 || header[0] != "s" || header[1] != "td" {
        return Err(pace_err(hl, "expected header `s td <bags> <max bag size> <n>`"));
    }
    let nb = parse_num(header[2], hl)?;
    let declared = parse_num(header[3], hl)?;
    let n = parse_num(header[4], hl)?;
    if nb == 0 {
        return Err(pace_err(hl, "a decomposition needs at least one bag"));
    }
    let mut bags: Vec<Option<BTreeSet<Var>>> = vec![None; nb];
    let mut edges: Vec<(BagId, BagId)> = Vec::new();
    for (ln, toks) in lines {
        if toks[0] == "b" {
            if toks.len() < 2 {
                return Err(pace_err(ln, "bag line needs an id"));
            }
            let id = parse_num(toks[1], ln)?;
            if id == 0 || id > nb {
                return Err(pace_err(ln, format!("bag id {id} outside 1..={nb}")));
            }
            if bags[id - 1].is_some() {
                return Err(pace_err(ln, format!("bag {id} defined twice")));
            }
            let vs = toks[2..].iter().map(|t| vertex(t, ln, n)).collect::<Result<_>>()?;
            bags[id - 1] = Some(vs);
        } else {
            if toks.len() != 2 {
                return Err(pace_err(ln, "expected a tree edge `i j`"));
            }
            let a = parse_num(toks[0], ln)?;
            let b = parse_num(toks[1], ln)?;
            if a == 0 || a > nb || b == 0 || b > nb {
                return Err(pace_err(ln, "tree edge names an unknown bag"));
            }
            edges.push((a - 1, b - 1));
        }
    }
    let bags: Vec<BTreeSet<Var>> = bags
        .into_iter()
        .enumerate()
        .map(|(i, b)| b.ok_or_else(|| pace_err(hl, format!("bag {} is never defined", i + 1))))
        .collect::<Result<_>>()?;
    let actual = bags.iter().map(BTreeSet::len).max().unwrap_or(0);
    if actual != declared {
        return Err(Error::DeclaredWidthMismatch { declared, actual });
    }
    TreeDecomp::from_edges(bags, &edges, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE_TD: &str = "c running example\ns td 6 3 8\nb 1 2 4 5\nb 2 2 3 4\nb 3 2 5 8\nb 4 4 5 6\nb 5 1 2 3\nb 6 6 7\n1 2\n1 3\n1 4\n2 5\n4 6\n";

    #[test]
    fn reference_round_trip() {
        let t = read_td(REFERENCE_TD).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t.width(), 2);
        let text = write_td(&t, 8);
        assert!(text.starts_with("s td 6 3 8\n"));
        assert_eq!(text.lines().filter(|l| l.starts_with("b ")).count(), 6);
        assert_eq!(read_td(&text).unwrap(), t);
    }

    #[test]
    fn errors() {
        assert!(matches!(read_td(""), Err(Error::Pace { .. })));
        assert!(matches!(read_gr(""), Err(Error::Pace { .. })));
        let wrong = REFERENCE_TD.replace("s td 6 3 8", "s td 6 4 8");
        assert_eq!(read_td(&wrong), Err(Error::DeclaredWidthMismatch { declared: 4, actual: 3 }));
        let bad = REFERENCE_TD.replace("b 6 6 7", "b 6 6 x");
        assert_eq!(read_td(&bad).unwrap_err(), pace_err(8, "expected a number, found `x`"));
    }

    #[test]
    fn gr_round_trip() {
        let g = read_gr("p tw 4 3\n1 2\n2 3\nc note\n3 4\n").unwrap();
        assert_eq!(g.num_edges(), 3);
        assert_eq!(read_gr(&write_gr(&g)).unwrap(), g);
    }
}
