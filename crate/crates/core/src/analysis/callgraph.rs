//! Call graph with recorded call sites.

use crate::lang::{Location, Program, StmtKind};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSites {
    pub caller: String,
    pub callee: String,
    pub sites: Vec<Location>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallGraph {
    /// Functions in source order.
    pub nodes: Vec<String>,
    /// Edges in order of first call (callers in source order).
    pub edges: Vec<(String, String)>,
    pub call_sites: Vec<CallSites>,
}

pub fn build_call_graph(prog: &Program) -> CallGraph {
    let nodes: Vec<String> = prog.functions.iter().map(|f| f.name.clone()).collect();
    let mut edges = Vec::new();
    let mut call_sites: Vec<CallSites> = Vec::new();
    for f in &prog.functions {
        let mut sites: Vec<(String, Location)> = Vec::new();
        f.walk(&mut |s| {
            if let StmtKind::Call { callee, .. } = &s.kind {
                sites.push((callee.clone(), s.loc.clone()));
            }
        });
        sites.sort_by_key(|(_, l)| (l.file_line(), l.index()));
        for (callee, loc) in sites {
            match call_sites.iter_mut().find(|c| c.caller == f.name && c.callee == callee) {
                Some(c) => c.sites.push(loc),
                None => {
                    edges.push((f.name.clone(), callee.clone()));
                    call_sites.push(CallSites { caller: f.name.clone(), callee, sites: vec![loc] });
                }
            }
        }
    }
    CallGraph { nodes, edges, call_sites }
}

impl CallGraph {
    pub fn callees(&self, f: &str) -> Vec<&str> {
        self.edges.iter().filter(|(a, _)| a == f).map(|(_, b)| b.as_str()).collect()
    }

    pub fn callers(&self, f: &str) -> Vec<&str> {
        self.edges.iter().filter(|(_, b)| b == f).map(|(a, _)| a.as_str()).collect()
    }

    pub fn sites(&self, caller: &str, callee: &str) -> &[Location] {
        self.call_sites
            .iter()
            .find(|c| c.caller == caller && c.callee == callee)
            .map_or(&[], |c| c.sites.as_slice())
    }

    /// Functions nobody calls.
    pub fn roots(&self) -> Vec<&str> {
        self.nodes.iter().filter(|n| self.callers(n).is_empty()).map(String::as_str).collect()
    }

    /// Reverse-topological rank: 0 for leaves, otherwise one more than the
    /// highest-ranked callee. Ancestors always rank strictly higher.
    pub fn ranks(&self) -> HashMap<String, usize> {
        let mut pending: HashMap<&str, usize> = self.nodes.iter().map(|n| (n.as_str(), self.callees(n).len())).collect();
        let mut rank: HashMap<String, usize> = HashMap::new();
        let mut ready: VecDeque<&str> = self.nodes.iter().map(String::as_str).filter(|n| pending[n] == 0).collect();
        while let Some(n) = ready.pop_front() {
            let r = self.callees(n).iter().map(|c| rank[*c] + 1).max().unwrap_or(0);
            rank.insert(n.to_string(), r);
            for c in self.callers(n) {
                let p = pending.get_mut(c).expect("caller is a node");
                *p -= 1;
                if *p == 0 {
                    ready.push_back(c);
                }
            }
        }
        rank
    }

    pub fn rank(&self, f: &str) -> usize {
        self.ranks().get(f).copied().unwrap_or(0)
    }

    /// A nonempty call chain leads from `a` to `d`.
    pub fn ancestor(&self, a: &str, d: &str) -> bool {
        let mut seen = BTreeSet::new();
        let mut todo: Vec<&str> = self.callees(a);
        while let Some(n) = todo.pop() {
            if n == d {
                return true;
            }
            if seen.insert(n) {
                todo.extend(self.callees(n));
            }
        }
        false
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph calls {\n");
        for n in &self.nodes {
            s.push_str(&format!("  \"{n}\";\n"));
        }
        for c in &self.call_sites {
            let label: Vec<String> = c.sites.iter().map(|l| l.to_string()).collect();
            s.push_str(&format!("  \"{}\" -> \"{}\" [label=\"{}\"];\n", c.caller, c.callee, label.join(", ")));
        }
        s.push_str("}\n");
        s
    }

    /// Adjacency as a map, for callers that want it.
    pub fn adjacency(&self) -> BTreeMap<String, Vec<String>> {
        self.nodes.iter().map(|n| (n.clone(), self.callees(n).into_iter().map(String::from).collect())).collect()
    }
}
