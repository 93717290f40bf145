//! Markdown root-cause report over a pruned graph.
//!
//! Nodes are labelled `name (denotation)`. With the shipped DataCo schema,
//! `X11` is Order Item Discount Rate and `X12` Order Item Product Price; some
//! write-ups of the dataset attach `X11` to the product price instead.

use std::collections::BTreeSet;

use crate::data::DataNotes;
use crate::graph::CausalGraph;
use crate::strength::StrengthMatrix;

use super::emit::node_label;

/// Everything the report needs besides the graph itself.
#[derive(Debug, Clone, Default)]
pub struct ReportContext<'a> {
    pub target: Option<&'a str>,
    /// Longest indirect path listed, in edges.
    pub max_path_length: usize,
    pub strengths: Option<&'a StrengthMatrix>,
    pub notes: Option<&'a DataNotes>,
    pub prune_threshold: f64,
    pub pruned_edges: usize,
    pub repaired: bool,
}

fn fmt_strength(s: Option<f64>) -> String {
    s.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

/// Edge weight used for ranking; missing strengths rank last.
fn weight(g: &CausalGraph, i: usize, j: usize) -> f64 {
    g.strength(i, j).unwrap_or(f64::NEG_INFINITY)
}

/// Simple directed paths of 2..=max_len edges ending at `target`.
pub fn indirect_paths(g: &CausalGraph, target: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack = vec![target];
    fn walk(g: &CausalGraph, stack: &mut Vec<usize>, max_len: usize, out: &mut Vec<Vec<usize>>) {
        let head = *stack.last().expect("non-empty");
        let parents = g.adjacency.parents(head).expect("in range");
        for p in parents {
            if stack.contains(&p) {
                continue;
            }
            stack.push(p);
            if stack.len() >= 3 {
                out.push(stack.iter().rev().copied().collect());
            }
            if stack.len() <= max_len {
                walk(g, stack, max_len, out);
            }
            stack.pop();
        }
    }
    walk(g, &mut stack, max_len, &mut out);
    out
}

/// Weakly connected components with at least one edge, each as sorted nodes.
fn components(g: &CausalGraph) -> Vec<Vec<usize>> {
    let d = g.adjacency.d();
    let mut label: Vec<usize> = (0..d).collect();
    fn root(label: &mut [usize], mut x: usize) -> usize {
        while label[x] != x {
            label[x] = label[label[x]];
            x = label[x];
        }
        x
    }
    for (i, j) in g.adjacency.edges() {
        let (a, b) = (root(&mut label, i), root(&mut label, j));
        if a != b {
            label[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for x in 0..d {
        let r = root(&mut label, x);
        groups.entry(r).or_default().push(x);
    }
    groups.into_values().filter(|c| c.len() > 1).collect()
}

pub fn emit_report(g: &CausalGraph, ctx: &ReportContext<'_>) -> String {
    let vars = &g.variables;
    let name = |i: usize| node_label(&vars[i]);
    let target = ctx.target.and_then(|t| vars.index_of(t));
    let mut out = String::new();
    match ctx.target {
        Some(t) => out.push_str(&format!("# Causal risk report: {t}\n\n")),
        None => out.push_str("# Causal structure report\n\n"),
    }
    out.push_str(&format!(
        "{} variables, {} edges after pruning at log strength {}.\n\n",
        vars.len(),
        g.adjacency.edge_count(),
        ctx.prune_threshold
    ));

    out.push_str("## Direct causes\n\n");
    match (ctx.target, target) {
        (None, _) => out.push_str("No target variable was configured.\n\n"),
        (Some(t), None) => out.push_str(&format!("Target `{t}` is not in the graph.\n\n")),
        (Some(t), Some(ti)) => {
            let mut causes = g.adjacency.parents(ti).expect("in range");
            causes.sort_by(|&a, &b| weight(g, b, ti).total_cmp(&weight(g, a, ti)).then(a.cmp(&b)));
            if causes.is_empty() {
                out.push_str(&format!("No direct causes of `{t}` were found.\n\n"));
            } else {
                out.push_str("| Rank | Cause | Strength |\n|---:|---|---:|\n");
                for (rank, &c) in causes.iter().enumerate() {
                    out.push_str(&format!("| {} | {} | {} |\n", rank + 1, name(c), fmt_strength(g.strength(c, ti))));
                }
                out.push('\n');
            }
        }
    }

    out.push_str(&format!("## Indirect paths (up to {} edges)\n\n", ctx.max_path_length));
    if let Some(ti) = target {
        let mut paths: Vec<(f64, Vec<usize>)> = indirect_paths(g, ti, ctx.max_path_length)
            .into_iter()
            .map(|p| {
                let min = p.windows(2).map(|w| weight(g, w[0], w[1])).fold(f64::INFINITY, f64::min);
                (min, p)
            })
            .collect();
        paths.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        if paths.is_empty() {
            out.push_str("No indirect paths were found.\n\n");
        } else {
            out.push_str("| Path | Weakest link |\n|---|---:|\n");
            for (min, p) in &paths {
                let text: Vec<String> = p.iter().map(|&i| name(i)).collect();
                let min = if min.is_finite() { Some(*min) } else { None };
                out.push_str(&format!("| {} | {} |\n", text.join(" → "), fmt_strength(min)));
            }
            out.push('\n');
        }
    } else {
        out.push_str("Not applicable without a target.\n\n");
    }

    out.push_str("## Other relationships\n\n");
    let others: Vec<Vec<usize>> = components(g)
        .into_iter()
        .filter(|c| target.map_or(true, |t| !c.contains(&t)))
        .collect();
    if others.is_empty() {
        out.push_str("Every remaining edge is connected to the target.\n\n");
    } else {
        for (k, comp) in others.iter().enumerate() {
            let members: BTreeSet<usize> = comp.iter().copied().collect();
            let mut edges: Vec<(usize, usize)> = g
                .adjacency
                .edges()
                .filter(|(i, j)| members.contains(i) && members.contains(j))
                .collect();
            edges.sort_by(|a, b| weight(g, b.0, b.1).total_cmp(&weight(g, a.0, a.1)).then(a.cmp(b)));
            out.push_str(&format!("### Group {}\n\n", k + 1));
            for (i, j) in edges {
                out.push_str(&format!("- {} → {} ({})\n", name(i), name(j), fmt_strength(g.strength(i, j))));
            }
            out.push('\n');
        }
    }

    out.push_str("## Data quality\n\n");
    let mut notes = Vec::new();
    if let Some(n) = ctx.notes {
        notes.push(format!("Rows dropped for missing values: {}.", n.dropped_rows));
        if !n.dropped_columns.is_empty() {
            notes.push(format!("Columns removed before search: {}.", n.dropped_columns.join(", ")));
        }
        if !n.constant_columns.is_empty() {
            notes.push(format!("Constant columns: {}.", n.constant_columns.join(", ")));
        }
    }
    notes.push(format!("Edges removed by strength pruning: {}.", ctx.pruned_edges));
    if let Some(s) = ctx.strengths {
        let tied: Vec<String> = s
            .entropies
            .iter()
            .enumerate()
            .filter(|(_, e)| e.tie_corrections > 0)
            .map(|(i, e)| format!("{} ({} of {})", name(i), e.tie_corrections, e.n.saturating_sub(1)))
            .collect();
        if !tied.is_empty() {
            notes.push(format!(
                "Tied values floored in the entropy estimate (ties of spacings): {}.",
                tied.join(", ")
            ));
        }
        let degenerate: Vec<String> = s
            .iter()
            .filter(|(_, e)| e.degenerate)
            .map(|(&(i, j), _)| format!("{} → {}", name(i), name(j)))
            .collect();
        if !degenerate.is_empty() {
            notes.push(format!(
                "Strengths at the cap (entropies indistinguishable): {}.",
                degenerate.join(", ")
            ));
        }
    }
    if ctx.repaired {
        notes.push("The search never sampled an acyclic graph; the result was repaired by deleting its least likely edges.".into());
    }
    for n in notes {
        out.push_str(&format!("- {n}\n"));
    }
    out
}
