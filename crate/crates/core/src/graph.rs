//! The directed influence graph of one opinion snapshot.
//!
//! An edge `i -> j` means agent `j` lies inside agent `i`'s confidence
//! interval, i.e. `j` influences `i`. Every vertex carries a self-loop. All
//! edges have unit weight.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opinion::{AgentId, Mindedness, Population, SortedProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceGraph {
    t: usize,
    ids: Vec<AgentId>,
    opinions: Vec<f64>,
    epsilons: Vec<f64>,
    /// Out-neighbor vertex indices per vertex, ascending.
    out: Vec<Vec<usize>>,
}

/// Total distance from a vertex to its out-neighbors on either side.
///
/// `sum_left` adds `x_i - x_k` over out-neighbors `k` with `x_k < x_i`;
/// `sum_right` adds `x_k - x_i` over those with `x_k > x_i`. Both are
/// non-negative; the self-loop and equal-opinion neighbors contribute nothing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PullDecomposition {
    pub sum_left: f64,
    pub sum_right: f64,
}

impl PullDecomposition {
    /// Positive when the vertex is drawn rightwards.
    pub fn net(&self) -> f64 {
        self.sum_right - self.sum_left
    }

    pub fn is_rightward(&self) -> bool {
        self.sum_left < self.sum_right
    }

    pub fn is_leftward(&self) -> bool {
        self.sum_left > self.sum_right
    }
}

/// Builds the graph of `pop`'s current profile, stamped with step 0.
pub fn build_graph(pop: &Population) -> InfluenceGraph {
    InfluenceGraph::build(pop, 0)
}

impl InfluenceGraph {
    pub fn build(pop: &Population, t: usize) -> Self {
        let ids = pop.agents().iter().map(|a| a.id).collect();
        Self::from_profile(t, ids, pop.opinions(), pop.epsilons())
    }

    fn from_profile(t: usize, ids: Vec<AgentId>, opinions: Vec<f64>, epsilons: Vec<f64>) -> Self {
        let sorted = SortedProfile::new(&opinions);
        let out = opinions
            .iter()
            .zip(&epsilons)
            .map(|(&x, &eps)| {
                let mut nbrs: Vec<usize> = sorted.order[sorted.window(x, eps)].to_vec();
                nbrs.sort_unstable();
                nbrs
            })
            .collect();
        InfluenceGraph {
            t,
            ids,
            opinions,
            epsilons,
            out,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn timestamp(&self) -> usize {
        self.t
    }

    pub fn ids(&self) -> &[AgentId] {
        &self.ids
    }

    pub fn opinions(&self) -> &[f64] {
        &self.opinions
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn mindedness(&self, i: usize) -> Mindedness {
        Mindedness::classify(self.epsilons[i]).expect("validated epsilon")
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.n() {
            Ok(())
        } else {
            Err(Error::Index {
                index: i,
                len: self.n(),
            })
        }
    }

    /// Vertices `i` points to (self included), ascending.
    pub fn out_neighbors(&self, i: usize) -> Result<&[usize]> {
        self.check(i)?;
        Ok(&self.out[i])
    }

    pub fn out_degree(&self, i: usize) -> Result<usize> {
        Ok(self.out_neighbors(i)?.len())
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.out.get(i).is_some_and(|o| o.binary_search(&j).is_ok())
    }

    /// In-degree of every vertex, self-loops included.
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n()];
        for o in &self.out {
            for &j in o {
                deg[j] += 1;
            }
        }
        deg
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn pull(&self, i: usize) -> Result<PullDecomposition> {
        self.check(i)?;
        let xi = self.opinions[i];
        let mut p = PullDecomposition::default();
        for &k in &self.out[i] {
            let xk = self.opinions[k];
            if xk < xi {
                p.sum_left += xi - xk;
            } else if xk > xi {
                p.sum_right += xk - xi;
            }
        }
        Ok(p)
    }

    /// Maximal strongly connected components. Each component is sorted and
    /// components are ordered by their smallest vertex.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let mut sccs = tarjan(&self.out);
        for c in &mut sccs {
            c.sort_unstable();
        }
        sccs.sort_unstable_by_key(|c| c[0]);
        sccs
    }

    /// Vertices whose only out-edge is the self-loop but which at least one
    /// other vertex points to.
    pub fn pendant_in_vertices(&self) -> Vec<usize> {
        let indeg = self.in_degrees();
        (0..self.n())
            .filter(|&i| self.out[i].len() == 1 && indeg[i] > 1)
            .collect()
    }

    /// Vertices with no edge to or from any other vertex.
    pub fn isolated_vertices(&self) -> Vec<usize> {
        let indeg = self.in_degrees();
        (0..self.n())
            .filter(|&i| self.out[i].len() == 1 && indeg[i] == 1)
            .collect()
    }

    /// Graphviz rendering. Self-loops are left out.
    pub fn to_dot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph influence_t{} {{", self.t);
        for i in 0..self.n() {
            let _ = writeln!(
                s,
                "  {} [label=\"{}|{}|{}\"];",
                self.ids[i],
                self.ids[i],
                self.opinions[i],
                self.mindedness(i)
            );
        }
        for (i, o) in self.out.iter().enumerate() {
            for &j in o.iter().filter(|&&j| j != i) {
                let _ = writeln!(s, "  {} -> {};", self.ids[i], self.ids[j]);
            }
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphJson::from(self)).expect("graph JSON is always serialisable")
    }

    /// Parses the JSON produced by [`InfluenceGraph::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphJson = serde_json::from_str(text)?;
        doc.try_into()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    n: usize,
    t: usize,
    vertices: Vec<VertexJson>,
    edges: Vec<[AgentId; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexJson {
    id: AgentId,
    opinion: f64,
    epsilon: f64,
}

impl From<&InfluenceGraph> for GraphJson {
    fn from(g: &InfluenceGraph) -> Self {
        let vertices = (0..g.n())
            .map(|i| VertexJson {
                id: g.ids[i],
                opinion: g.opinions[i],
                epsilon: g.epsilons[i],
            })
            .collect();
        let edges = g
            .out
            .iter()
            .enumerate()
            .flat_map(|(i, o)| o.iter().map(move |&j| [g.ids[i], g.ids[j]]))
            .collect();
        GraphJson {
            n: g.n(),
            t: g.t,
            vertices,
            edges,
        }
    }
}

impl TryFrom<GraphJson> for InfluenceGraph {
    type Error = Error;

    fn try_from(doc: GraphJson) -> Result<Self> {
        if doc.n != doc.vertices.len() {
            return Err(Error::validation(format!(
                "graph declares n = {} but lists {} vertices",
                doc.n,
                doc.vertices.len()
            )));
        }
        let index: std::collections::HashMap<AgentId, usize> = doc
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id, i))
            .collect();
        if index.len() != doc.n {
            return Err(Error::validation("duplicate vertex id in graph"));
        }
        for v in &doc.vertices {
            if !(0.0..=1.0).contains(&v.opinion) || !(0.0..=1.0).contains(&v.epsilon) {
                return Err(Error::validation(format!(
                    "vertex {} has invalid state",
                    v.id
                )));
            }
        }
        let mut out = vec![Vec::new(); doc.n];
        for [a, b] in doc.edges {
            let (i, j) = match (index.get(&a), index.get(&b)) {
                (Some(&i), Some(&j)) => (i, j),
                _ => {
                    return Err(Error::validation(format!(
                        "edge [{a}, {b}] names unknown vertex"
                    )))
                }
            };
            out[i].push(j);
        }
        for o in &mut out {
            o.sort_unstable();
            o.dedup();
        }
        Ok(InfluenceGraph {
            t: doc.t,
            ids: doc.vertices.iter().map(|v| v.id).collect(),
            opinions: doc.vertices.iter().map(|v| v.opinion).collect(),
            epsilons: doc.vertices.iter().map(|v| v.epsilon).collect(),
            out,
        })
    }
}

/// Interior out-degree `min(n, 2 floor(epsilon (n - 1)) + 1)` of an evenly
/// spaced homogeneous population.
pub fn regular_degree_check(n: usize, epsilon: f64) -> Result<usize> {
    if n < 2 {
        return Err(Error::validation(format!(
            "need at least 2 agents, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::validation(format!(
            "epsilon {epsilon} outside [0, 1]"
        )));
    }
    let reach = (epsilon * (n - 1) as f64).floor() as usize;
    Ok(n.min(2 * reach + 1))
}

/// Iterative Tarjan; components come out in reverse topological order.
fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut sccs = Vec::new();
    let mut next = 0;
    // (vertex, position in its adjacency list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("component root is on the stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                sccs.push(comp);
            }
        }
    }
    sccs
}
