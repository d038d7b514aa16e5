//! Deterministic CSV/JSON writers. Floats are printed with Rust's shortest
//! round-trip formatting so artifacts are byte-stable golden files.

use std::fmt::Write as _;
use std::path::Path;

use lineage_core::sampling::Scheme;
use lineage_core::simulator::Tree;
use lineage_core::{GenFun64, Record64};

use crate::error::Result;

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// `scheme,replicate,survived,J,weight,S,times,sizes,ks` with semicolon-joined
/// variable-length fields.
pub fn lineage_csv<'a>(records: impl Iterator<Item = (u64, &'a Record64)>) -> String {
    let mut out = String::from("scheme,replicate,survived,J,weight,S,times,sizes,ks\n");
    for (replicate, r) in records {
        let marker = match (r.scheme, r.marker) {
            (Scheme::UniformMarker, Some(s)) => s.to_string(),
            _ => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.scheme.name(),
            replicate,
            r.survived,
            r.j(),
            r.weight,
            marker,
            join_f64(&r.times),
            join_usize(&r.sizes),
            join_usize(&r.left_extinct),
        );
    }
    out
}

/// `t,s,F,dFds` over all grid nodes, times outermost.
pub fn genfun_csv(table: &GenFun64) -> String {
    let mut out = String::from("t,s,F,dFds\n");
    for (i, &t) in table.t_grid().iter().enumerate() {
        for (j, &s) in table.s_grid().iter().enumerate() {
            let _ = writeln!(
                out,
                "{t},{s},{},{}",
                table.values()[i][j],
                table.deriv_values()[i][j]
            );
        }
    }
    out
}

/// `id,parent,birth,death,n_children` for one simulated genealogy.
pub fn tree_csv(tree: &Tree<f64>) -> String {
    let mut out = String::from("id,parent,birth,death,n_children\n");
    for (id, n) in tree.nodes().iter().enumerate() {
        let parent = n.parent.map(|p| p.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{id},{parent},{},{},{}",
            n.birth,
            n.death,
            n.children.len()
        );
    }
    out
}
