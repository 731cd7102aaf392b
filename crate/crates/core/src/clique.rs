//! Maximum Clique QUBOs, deterministic clique minor-embedding into
//! Chimera, chain handling, and chain-break accounting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Assignment, ChimeraTopology, Domain, ProblemModel};
use crate::rng::stream_rng;
use crate::sampleset::{SampleRecord, SampleSet};

/// Penalty weight on non-edges; any value above the per-vertex reward of
/// 1 makes every minimum a clique.
pub const MAXCLIQUE_PENALTY: f64 = 2.0;

/// Chain strength used for clique experiments unless overridden.
pub const DEFAULT_CHAIN_STRENGTH: f64 = 2.0;

/// Simple undirected graph on vertices 0..n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        if u == v {
            return Err(Error::InvalidParameter {
                name: "edge",
                message: format!("self-loop at {u}"),
            });
        }
        let (a, b) = (u.min(v), u.max(v));
        if b >= self.n {
            return Err(Error::VariableOutOfRange {
                index: b,
                n: self.n,
            });
        }
        self.edges.insert((a, b));
        Ok(())
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn toggle_edge(&mut self, u: usize, v: usize) {
        let key = (u.min(v), u.max(v));
        if !self.edges.remove(&key) {
            self.edges.insert(key);
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Erdos-Renyi graph with the given edge probability.
    pub fn random(n: usize, density: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&density) {
            return Err(Error::BadFraction { fraction: density });
        }
        let mut rng = stream_rng(seed, 0);
        let mut g = Graph::new(n);
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen_bool(density) {
                    g.edges.insert((u, v));
                }
            }
        }
        Ok(g)
    }

    /// Random graph whose density is itself drawn uniformly from
    /// [0.2, 0.8].
    pub fn random_auto_density(n: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 1);
        let density = rng.gen_range(0.2..=0.8);
        Self::random(n, density, seed).expect("density in range")
    }

    /// Edge-list text: one `u v` per line, `#` comments.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# vertices {}", self.n);
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = 0usize;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                // `# vertices N` pins the vertex count for isolated tails
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() == 2 && fields[0] == "vertices" {
                    if let Ok(count) = fields[1].parse::<usize>() {
                        n = n.max(count);
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "expected `u v`".into(),
                });
            }
            let u = fields[0].parse::<usize>().map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            let v = fields[1].parse::<usize>().map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            n = n.max(u.max(v) + 1);
            edges.push((u, v));
        }
        let mut g = Graph::new(n);
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }
}

/// Maximum Clique QUBO: minimize `-sum_v x_v + P sum_{(u,v) not in E} x_u x_v`
/// with penalty P = 2, so minima select exactly the maximum cliques.
pub fn maxclique_qubo(graph: &Graph) -> ProblemModel {
    let mut model = ProblemModel::new(Domain::Binary, graph.n());
    for v in 0..graph.n() {
        model.set_linear(v, -1.0).expect("fresh key");
    }
    for u in 0..graph.n() {
        for v in (u + 1)..graph.n() {
            if !graph.has_edge(u, v) {
                model
                    .set_quadratic(u, v, MAXCLIQUE_PENALTY)
                    .expect("fresh key");
            }
        }
    }
    model
}

/// Minor embedding: each logical variable is represented by an ordered
/// chain of physical qubits whose consecutive members are coupled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    chains: BTreeMap<usize, Vec<usize>>,
}

impl Embedding {
    pub fn new(chains: BTreeMap<usize, Vec<usize>>, topology: &ChimeraTopology) -> Result<Self> {
        let embedding = Embedding { chains };
        embedding.check(topology)?;
        Ok(embedding)
    }

    fn check(&self, topology: &ChimeraTopology) -> Result<()> {
        let mut used = BTreeSet::new();
        for (&logical, chain) in &self.chains {
            if chain.is_empty() {
                return Err(Error::DisconnectedChain { logical });
            }
            for &q in chain {
                if !topology.is_live(q) {
                    return Err(Error::DeadNodeCollision { id: q });
                }
                if !used.insert(q) {
                    return Err(Error::OverlappingChains { id: q });
                }
            }
            for pair in chain.windows(2) {
                if !topology.has_edge(pair[0], pair[1]) {
                    return Err(Error::DisconnectedChain { logical });
                }
            }
        }
        Ok(())
    }

    pub fn chains(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.chains
    }

    pub fn chain(&self, logical: usize) -> Option<&[usize]> {
        self.chains.get(&logical).map(|c| c.as_slice())
    }

    pub fn n_logical(&self) -> usize {
        self.chains.len()
    }

    /// Total number of intra-chain couplers.
    pub fn chain_edge_count(&self) -> usize {
        self.chains.values().map(|c| c.len() - 1).sum()
    }

    /// Text form: one `L: q1 q2 ... qk` line per logical variable.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (&logical, chain) in &self.chains {
            let qubits: Vec<String> = chain.iter().map(|q| q.to_string()).collect();
            let _ = writeln!(out, "{logical}: {}", qubits.join(" "));
        }
        out
    }

    pub fn from_text(text: &str, topology: &ChimeraTopology) -> Result<Self> {
        let mut chains = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (head, tail) = line.split_once(':').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: "expected `L: q1 q2 ...`".into(),
            })?;
            let logical = head.trim().parse::<usize>().map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            let chain = tail
                .split_whitespace()
                .map(|q| {
                    q.parse::<usize>().map_err(|e| Error::Parse {
                        line: idx + 1,
                        message: e.to_string(),
                    })
                })
                .collect::<Result<Vec<usize>>>()?;
            chains.insert(logical, chain);
        }
        Embedding::new(chains, topology)
    }
}

/// Deterministic clique embedding of `n_logical` variables into a square
/// Chimera C(m,m,4): logical variable `4a + j` occupies the shore-0
/// qubits of column `a` in rows 0..=a and the shore-1 qubits of row `a`
/// in columns a..m, all at offset `j`. Every chain has length m+1 and
/// every pair of chains shares at least one coupler.
pub fn clique_embedding(n_logical: usize, topology: &ChimeraTopology) -> Result<Embedding> {
    let m = topology.m();
    if topology.n_cells() != m || topology.k() != 4 {
        return Err(Error::InvalidParameter {
            name: "topology",
            message: format!(
                "clique embedding needs a square C(m,m,4), got C({},{},{})",
                m,
                topology.n_cells(),
                topology.k()
            ),
        });
    }
    let capacity = 4 * m;
    if n_logical == 0 || n_logical > capacity {
        return Err(Error::CapacityExceeded {
            requested: n_logical,
            capacity,
        });
    }
    let mut chains = BTreeMap::new();
    for logical in 0..n_logical {
        let block = logical / 4;
        let offset = logical % 4;
        let mut chain = Vec::with_capacity(m + 1);
        for row in 0..=block {
            chain.push(topology.node_id(row, block, 0, offset));
        }
        for col in block..m {
            chain.push(topology.node_id(block, col, 1, offset));
        }
        for &q in &chain {
            if !topology.is_live(q) {
                return Err(Error::DeadNodeCollision { id: q });
            }
        }
        chains.insert(logical, chain);
    }
    Embedding::new(chains, topology)
}

/// A physical spin model produced by [`embed`], together with the offset
/// that maps unbroken-chain physical energies back to logical energies:
/// `logical_energy = physical_energy + offset`.
#[derive(Debug, Clone)]
pub struct EmbeddedModel {
    pub model: ProblemModel,
    pub offset: f64,
    pub chain_strength: f64,
}

/// Embeds a logical model onto physical qubits: linear terms split evenly
/// across chain members, each logical coupler placed on the
/// lexicographically smallest available physical edge, and ferromagnetic
/// intra-chain couplers of magnitude `chain_strength` added.
pub fn embed(
    logical: &ProblemModel,
    embedding: &Embedding,
    chain_strength: f64,
    topology: &Arc<ChimeraTopology>,
) -> Result<EmbeddedModel> {
    if !(chain_strength > 0.0) || !chain_strength.is_finite() {
        return Err(Error::InvalidParameter {
            name: "chain_strength",
            message: format!("{chain_strength} must be > 0"),
        });
    }
    for i in 0..logical.n() {
        if embedding.chain(i).is_none() {
            return Err(Error::InvalidParameter {
                name: "embedding",
                message: format!("no chain for logical variable {i}"),
            });
        }
    }
    let (spin_logical, domain_offset) = match logical.domain() {
        Domain::Spin => (logical.clone(), 0.0),
        Domain::Binary => logical.to_ising()?,
    };
    let mut physical = ProblemModel::over_topology(Domain::Spin, topology.clone());
    for (&i, &h) in spin_logical.linear() {
        let chain = embedding.chain(i).expect("checked above");
        let share = h / chain.len() as f64;
        for &q in chain {
            physical.set_linear(q, share)?;
        }
    }
    for (&(i, j), &w) in spin_logical.quadratic() {
        let chain_i = embedding.chain(i).expect("checked above");
        let chain_j = embedding.chain(j).expect("checked above");
        let mut best: Option<(usize, usize)> = None;
        for &p in chain_i {
            for &q in chain_j {
                if topology.has_edge(p, q) {
                    let key = (p.min(q), p.max(q));
                    if best.is_none_or(|b| key < b) {
                        best = Some(key);
                    }
                }
            }
        }
        let (p, q) = best.ok_or(Error::MissingPhysicalEdge { u: i, v: j })?;
        physical.set_quadratic(p, q, w)?;
    }
    for chain in embedding.chains().values() {
        for pair in chain.windows(2) {
            let (p, q) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            physical.set_quadratic(p, q, -chain_strength)?;
        }
    }
    // unbroken chains contribute -chain_strength per intra-chain coupler
    let offset = domain_offset + chain_strength * embedding.chain_edge_count() as f64;
    Ok(EmbeddedModel {
        model: physical,
        offset,
        chain_strength,
    })
}

fn majority(chain: &[usize], values: &[i8]) -> Option<i8> {
    let up = chain.iter().filter(|&&q| values[q] > 0).count();
    let down = chain.len() - up;
    match up.cmp(&down) {
        std::cmp::Ordering::Greater => Some(1),
        std::cmp::Ordering::Less => Some(-1),
        std::cmp::Ordering::Equal => None,
    }
}

/// Collapses physical readouts to logical ones by majority vote. Exact
/// ties go to whichever value yields the lower logical energy (resolved
/// per chain in ascending order, remaining ties starting low), then to
/// the low value. Energies are recomputed against the logical model.
pub fn unembed(
    samples: &SampleSet,
    logical: &ProblemModel,
    embedding: &Embedding,
) -> Result<SampleSet> {
    let low: i8 = match logical.domain() {
        Domain::Spin => -1,
        Domain::Binary => 0,
    };
    let mut records = Vec::with_capacity(samples.records().len());
    for record in samples.records() {
        let physical = record.assignment.values();
        let mut values = vec![low; logical.n()];
        let mut ties = Vec::new();
        for (&i, chain) in embedding.chains() {
            if i >= logical.n() {
                continue;
            }
            match majority(chain, physical) {
                Some(v) => values[i] = if v > 0 { 1 } else { low },
                None => {
                    ties.push(i);
                    values[i] = low;
                }
            }
        }
        for &i in &ties {
            let mut high = values.clone();
            high[i] = 1;
            let low_energy =
                logical.energy(&Assignment::new(logical.domain(), values.clone())?)?;
            let high_energy = logical.energy(&Assignment::new(logical.domain(), high.clone())?)?;
            if high_energy < low_energy {
                values = high;
            }
        }
        let assignment = Assignment::new(logical.domain(), values)?;
        let energy = logical.energy(&assignment)?;
        records.push(SampleRecord {
            assignment,
            energy,
            count: record.count,
        });
    }
    Ok(SampleSet::from_records(records, samples.seed()))
}

/// Broken-chain statistics of a physical sample set. A chain is unbroken
/// iff all its qubits agree.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainBreaks {
    /// Fraction of broken chains in each record (aligned with
    /// `samples.records()`).
    pub per_record: Vec<f64>,
    /// Read-weighted mean fraction of broken chains.
    pub broken: f64,
    /// Complement, for plotting the unbroken proportion.
    pub unbroken: f64,
}

pub fn chain_break_fraction(samples: &SampleSet, embedding: &Embedding) -> Result<ChainBreaks> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let n_chains = embedding.n_logical();
    let mut per_record = Vec::with_capacity(samples.records().len());
    let mut weighted = 0.0;
    for record in samples.records() {
        let values = record.assignment.values();
        let broken = embedding
            .chains()
            .values()
            .filter(|chain| majority_is_split(chain, values))
            .count();
        let fraction = broken as f64 / n_chains as f64;
        per_record.push(fraction);
        weighted += fraction * record.count as f64;
    }
    let broken = weighted / samples.reads() as f64;
    Ok(ChainBreaks {
        per_record,
        broken,
        unbroken: 1.0 - broken,
    })
}

fn majority_is_split(chain: &[usize], values: &[i8]) -> bool {
    let first = values[chain[0]];
    chain.iter().any(|&q| values[q] != first)
}
