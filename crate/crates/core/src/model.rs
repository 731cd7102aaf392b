//! Ising/QUBO problem models over an optional Chimera topology.
//!
//! A model is a sparse set of linear coefficients `a_i` and quadratic
//! coefficients `a_ij` (keys ordered `i < j`) over `n` variables. Its
//! energy for an assignment is `sum a_i q_i + sum a_ij q_i q_j`, with
//! `q_i` in {-1,+1} (spin) or {0,1} (binary). The two formulations are
//! interchangeable through a linear change of variables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{open_uniform, stream_rng, Fnv1a};

/// Variable domain of a problem model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    /// Variables take values in {-1, +1}.
    Spin,
    /// Variables take values in {0, 1}.
    Binary,
}

impl Domain {
    fn admits(self, value: i8) -> bool {
        match self {
            Domain::Spin => value == -1 || value == 1,
            Domain::Binary => value == 0 || value == 1,
        }
    }
}

/// A complete assignment of values to the variables of a model.
///
/// Ordering is lexicographic on the value vector (-1 < +1, 0 < 1), which
/// is the tie-break order used everywhere ties must be deterministic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment {
    domain: Domain,
    values: Vec<i8>,
}

impl Assignment {
    pub fn new(domain: Domain, values: Vec<i8>) -> Result<Self> {
        for (index, &v) in values.iter().enumerate() {
            if !domain.admits(v) {
                return Err(Error::InvalidParameter {
                    name: "assignment",
                    message: format!("value {v} at position {index} invalid for {domain:?}"),
                });
            }
        }
        Ok(Assignment { domain, values })
    }

    /// All variables at the lexicographically smallest value (-1 or 0).
    pub fn lowest(domain: Domain, n: usize) -> Self {
        let fill = match domain {
            Domain::Spin => -1,
            Domain::Binary => 0,
        };
        Assignment {
            domain,
            values: vec![fill; n],
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// 0/1 text form; spins map -1 -> '0', +1 -> '1'.
    pub fn to_bit_string(&self) -> String {
        self.values
            .iter()
            .map(|&v| if v > 0 { '1' } else { '0' })
            .collect()
    }

    pub fn from_bit_string(domain: Domain, bits: &str) -> Result<Self> {
        let low = match domain {
            Domain::Spin => -1,
            Domain::Binary => 0,
        };
        let values = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(low),
                '1' => Ok(1),
                other => Err(Error::InvalidParameter {
                    name: "bitstring",
                    message: format!("unexpected character {other:?}"),
                }),
            })
            .collect::<Result<Vec<i8>>>()?;
        Ok(Assignment { domain, values })
    }

    /// Spin view of the assignment: x -> 2x - 1 for binary, identity for
    /// spin.
    pub fn to_spin(&self) -> Assignment {
        match self.domain {
            Domain::Spin => self.clone(),
            Domain::Binary => Assignment {
                domain: Domain::Spin,
                values: self.values.iter().map(|&x| 2 * x - 1).collect(),
            },
        }
    }

    /// Binary view of the assignment: sigma -> (sigma + 1)/2 for spin.
    pub fn to_binary(&self) -> Assignment {
        match self.domain {
            Domain::Binary => self.clone(),
            Domain::Spin => Assignment {
                domain: Domain::Binary,
                values: self.values.iter().map(|&s| (s + 1) / 2).collect(),
            },
        }
    }
}

/// Chimera hardware topology: an `m` x `n_cells` grid of K_{k,k} unit
/// cells. Within a cell the two shores are completely connected; shore-0
/// qubits couple to the vertically adjacent cell, shore-1 qubits to the
/// horizontally adjacent cell. Dead node ids are masked out together with
/// their incident couplers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChimeraTopology {
    m: usize,
    n_cells: usize,
    k: usize,
    dead: BTreeSet<usize>,
    edges: Vec<(usize, usize)>,
}

impl ChimeraTopology {
    pub fn new(m: usize, n_cells: usize, k: usize, dead: BTreeSet<usize>) -> Result<Self> {
        if m < 1 || n_cells < 1 || k < 1 {
            return Err(Error::InvalidParameter {
                name: "chimera",
                message: format!("all of m={m}, n_cells={n_cells}, k={k} must be >= 1"),
            });
        }
        let id_space = m * n_cells * 2 * k;
        if let Some(&id) = dead.iter().find(|&&id| id >= id_space) {
            return Err(Error::DeadNodeOutOfRange { id, max: id_space });
        }
        let mut topo = ChimeraTopology {
            m,
            n_cells,
            k,
            dead,
            edges: Vec::new(),
        };
        topo.edges = topo.build_edges();
        Ok(topo)
    }

    /// Linear node id of (row, col, shore, offset).
    pub fn node_id(&self, row: usize, col: usize, shore: usize, offset: usize) -> usize {
        ((row * self.n_cells + col) * 2 + shore) * self.k + offset
    }

    fn build_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for r in 0..self.m {
            for c in 0..self.n_cells {
                // intra-cell complete bipartite
                for a in 0..self.k {
                    for b in 0..self.k {
                        edges.push((self.node_id(r, c, 0, a), self.node_id(r, c, 1, b)));
                    }
                }
                // inter-cell couplers between corresponding shore qubits
                if r + 1 < self.m {
                    for a in 0..self.k {
                        edges.push((self.node_id(r, c, 0, a), self.node_id(r + 1, c, 0, a)));
                    }
                }
                if c + 1 < self.n_cells {
                    for a in 0..self.k {
                        edges.push((self.node_id(r, c, 1, a), self.node_id(r, c + 1, 1, a)));
                    }
                }
            }
        }
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(u, v)| (u.min(v), u.max(v)))
            .filter(|&(u, v)| !self.dead.contains(&u) && !self.dead.contains(&v))
            .collect();
        edges.sort_unstable();
        edges
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dead(&self) -> &BTreeSet<usize> {
        &self.dead
    }

    /// Size of the node id space (live + dead).
    pub fn id_space(&self) -> usize {
        self.m * self.n_cells * 2 * self.k
    }

    pub fn is_live(&self, id: usize) -> bool {
        id < self.id_space() && !self.dead.contains(&id)
    }

    pub fn live_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.id_space()).filter(move |id| !self.dead.contains(id))
    }

    pub fn live_node_count(&self) -> usize {
        self.id_space() - self.dead.len()
    }

    /// All live edges, sorted, with u < v.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).is_ok()
    }
}

/// Sparse Ising or QUBO model.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemModel {
    domain: Domain,
    n: usize,
    linear: BTreeMap<usize, f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    topology: Option<Arc<ChimeraTopology>>,
}

impl ProblemModel {
    pub fn new(domain: Domain, n: usize) -> Self {
        ProblemModel {
            domain,
            n,
            linear: BTreeMap::new(),
            quadratic: BTreeMap::new(),
            topology: None,
        }
    }

    /// Empty model whose variables are the id space of `topology`;
    /// quadratic keys are restricted to topology edges.
    pub fn over_topology(domain: Domain, topology: Arc<ChimeraTopology>) -> Self {
        ProblemModel {
            domain,
            n: topology.id_space(),
            linear: BTreeMap::new(),
            quadratic: BTreeMap::new(),
            topology: Some(topology),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn linear(&self) -> &BTreeMap<usize, f64> {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn topology(&self) -> Option<&Arc<ChimeraTopology>> {
        self.topology.as_ref()
    }

    pub fn coefficient_count(&self) -> usize {
        self.linear.len() + self.quadratic.len()
    }

    /// Sets linear coefficient `a_i`. Duplicate keys are rejected.
    pub fn set_linear(&mut self, i: usize, value: f64) -> Result<()> {
        if i >= self.n {
            return Err(Error::VariableOutOfRange { index: i, n: self.n });
        }
        if !value.is_finite() {
            return Err(Error::NonFiniteCoefficient {
                key: format!("a_{i}"),
            });
        }
        if self.linear.contains_key(&i) {
            return Err(Error::DuplicateCoefficient {
                key: format!("a_{i}"),
            });
        }
        self.linear.insert(i, value);
        Ok(())
    }

    /// Sets quadratic coefficient `a_ij` with `i < j`; must be a topology
    /// edge when the model has one. Duplicate keys are rejected.
    pub fn set_quadratic(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if i >= j {
            return Err(Error::BadQuadraticKey { i, j });
        }
        if j >= self.n {
            return Err(Error::VariableOutOfRange { index: j, n: self.n });
        }
        if !value.is_finite() {
            return Err(Error::NonFiniteCoefficient {
                key: format!("a_{i}{j}"),
            });
        }
        if let Some(topo) = &self.topology {
            if !topo.has_edge(i, j) {
                return Err(Error::OffTopology { i, j });
            }
        }
        if self.quadratic.contains_key(&(i, j)) {
            return Err(Error::DuplicateCoefficient {
                key: format!("a_{i}{j}"),
            });
        }
        self.quadratic.insert((i, j), value);
        Ok(())
    }

    fn check_assignment(&self, a: &Assignment) -> Result<()> {
        if a.domain() != self.domain {
            return Err(Error::DomainMismatch {
                expected: self.domain,
                found: a.domain(),
            });
        }
        if a.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: a.len(),
            });
        }
        Ok(())
    }

    /// Energy `sum a_i q_i + sum_{i<j} a_ij q_i q_j`.
    pub fn energy(&self, a: &Assignment) -> Result<f64> {
        self.check_assignment(a)?;
        let v = a.values();
        let mut e = 0.0;
        for (&i, &w) in &self.linear {
            e += w * v[i] as f64;
        }
        for (&(i, j), &w) in &self.quadratic {
            e += w * (v[i] as f64) * (v[j] as f64);
        }
        Ok(e)
    }

    /// All coefficients multiplied by `x`.
    ///
    /// `x` must be finite so the coefficient invariant is preserved.
    pub fn rescale(&self, x: f64) -> ProblemModel {
        assert!(x.is_finite(), "rescale factor must be finite");
        let mut out = self.clone();
        for w in out.linear.values_mut() {
            *w *= x;
        }
        for w in out.quadratic.values_mut() {
            *w *= x;
        }
        out
    }

    /// QUBO -> Ising via `x_i = (sigma_i + 1)/2`.
    ///
    /// Returns `(ising, offset)` with
    /// `energy(self, x) = energy(ising, sigma) + offset` for every x.
    pub fn to_ising(&self) -> Result<(ProblemModel, f64)> {
        if self.domain != Domain::Binary {
            return Err(Error::DomainMismatch {
                expected: Domain::Binary,
                found: self.domain,
            });
        }
        let mut h: BTreeMap<usize, f64> = BTreeMap::new();
        let mut offset = 0.0;
        for (&i, &a) in &self.linear {
            *h.entry(i).or_insert(0.0) += a / 2.0;
            offset += a / 2.0;
        }
        let mut out = ProblemModel {
            domain: Domain::Spin,
            n: self.n,
            linear: BTreeMap::new(),
            quadratic: BTreeMap::new(),
            topology: self.topology.clone(),
        };
        for (&(i, j), &a) in &self.quadratic {
            out.quadratic.insert((i, j), a / 4.0);
            *h.entry(i).or_insert(0.0) += a / 4.0;
            *h.entry(j).or_insert(0.0) += a / 4.0;
            offset += a / 4.0;
        }
        out.linear = h.into_iter().filter(|&(_, w)| w != 0.0).collect();
        Ok((out, offset))
    }

    /// Ising -> QUBO via `sigma_i = 2 x_i - 1`.
    ///
    /// Returns `(qubo, offset)` with
    /// `energy(self, sigma) = energy(qubo, x) + offset` for every sigma.
    pub fn to_qubo(&self) -> Result<(ProblemModel, f64)> {
        if self.domain != Domain::Spin {
            return Err(Error::DomainMismatch {
                expected: Domain::Spin,
                found: self.domain,
            });
        }
        let mut a: BTreeMap<usize, f64> = BTreeMap::new();
        let mut offset = 0.0;
        for (&i, &h) in &self.linear {
            *a.entry(i).or_insert(0.0) += 2.0 * h;
            offset -= h;
        }
        let mut out = ProblemModel {
            domain: Domain::Binary,
            n: self.n,
            linear: BTreeMap::new(),
            quadratic: BTreeMap::new(),
            topology: self.topology.clone(),
        };
        for (&(i, j), &jw) in &self.quadratic {
            out.quadratic.insert((i, j), 4.0 * jw);
            *a.entry(i).or_insert(0.0) -= 2.0 * jw;
            *a.entry(j).or_insert(0.0) -= 2.0 * jw;
            offset += jw;
        }
        out.linear = a.into_iter().filter(|&(_, w)| w != 0.0).collect();
        Ok((out, offset))
    }

    /// Random model over a topology: one linear coefficient per live node
    /// drawn uniformly from the open interval `linear_range`, one
    /// quadratic coefficient per live edge from `quad_range`.
    pub fn random(
        topology: Arc<ChimeraTopology>,
        domain: Domain,
        linear_range: (f64, f64),
        quad_range: (f64, f64),
        seed: u64,
    ) -> Result<ProblemModel> {
        check_interval(linear_range)?;
        check_interval(quad_range)?;
        if topology.live_node_count() == 0 {
            return Err(Error::EmptyTopology);
        }
        let mut rng = stream_rng(seed, 0);
        let mut model = ProblemModel::over_topology(domain, topology.clone());
        for i in topology.live_nodes() {
            let v = open_uniform(&mut rng, linear_range.0, linear_range.1);
            model.set_linear(i, v)?;
        }
        for &(i, j) in topology.edges() {
            let v = open_uniform(&mut rng, quad_range.0, quad_range.1);
            model.set_quadratic(i, j, v)?;
        }
        Ok(model)
    }

    /// Exact ground state by exhaustive enumeration; ties broken toward
    /// the lexicographically smallest assignment. Limited to n <= 24.
    pub fn brute_force_ground(&self) -> Result<(Assignment, f64)> {
        const MAX_N: usize = 24;
        if self.n > MAX_N {
            return Err(Error::TooManyVariables {
                op: "brute_force_ground",
                n: self.n,
                max: MAX_N,
            });
        }
        let low: i8 = match self.domain {
            Domain::Spin => -1,
            Domain::Binary => 0,
        };
        let n = self.n;
        let mut best: Option<(Assignment, f64)> = None;
        let mut values = vec![low; n];
        for mask in 0u64..(1u64 << n) {
            for (i, v) in values.iter_mut().enumerate() {
                // variable 0 is the most significant bit: enumeration
                // order is lexicographic, so the first minimum wins ties
                *v = if (mask >> (n - 1 - i)) & 1 == 1 { 1 } else { low };
            }
            let a = Assignment {
                domain: self.domain,
                values: values.clone(),
            };
            let e = self.energy(&a)?;
            match &best {
                Some((_, be)) if e >= *be => {}
                _ => best = Some((a, e)),
            }
        }
        Ok(best.expect("at least one assignment enumerated"))
    }

    /// Stable 64-bit fingerprint of the canonical sparse representation.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write(&[match self.domain {
            Domain::Spin => 1u8,
            Domain::Binary => 2u8,
        }]);
        h.write_u64(self.n as u64);
        for (&i, &w) in &self.linear {
            h.write_u64(i as u64);
            h.write_f64(w);
        }
        for (&(i, j), &w) in &self.quadratic {
            h.write_u64(i as u64);
            h.write_u64(j as u64);
            h.write_f64(w);
        }
        h.finish()
    }

    /// Serializes to the model text format:
    /// line 1 `<ising|qubo> <n>`, then `i i value` for linear and
    /// `i j value` (i < j) for quadratic coefficients. Values carry 17
    /// significant digits so the round trip is bit-exact.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let tag = match self.domain {
            Domain::Spin => "ising",
            Domain::Binary => "qubo",
        };
        let _ = writeln!(out, "{tag} {}", self.n);
        for (&i, &w) in &self.linear {
            let _ = writeln!(out, "{i} {i} {w:.16e}");
        }
        for (&(i, j), &w) in &self.quadratic {
            let _ = writeln!(out, "{i} {j} {w:.16e}");
        }
        out
    }

    /// Parses the model text format. `#` starts a comment line.
    pub fn from_text(text: &str) -> Result<ProblemModel> {
        let mut model: Option<ProblemModel> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match &mut model {
                None => {
                    if fields.len() != 2 {
                        return Err(Error::Parse {
                            line: line_no,
                            message: "expected header `<ising|qubo> <n>`".into(),
                        });
                    }
                    let domain = match fields[0] {
                        "ising" => Domain::Spin,
                        "qubo" => Domain::Binary,
                        other => {
                            return Err(Error::Parse {
                                line: line_no,
                                message: format!("unknown domain {other:?}"),
                            })
                        }
                    };
                    let n = fields[1].parse::<usize>().map_err(|e| Error::Parse {
                        line: line_no,
                        message: format!("bad variable count: {e}"),
                    })?;
                    model = Some(ProblemModel::new(domain, n));
                }
                Some(m) => {
                    if fields.len() != 3 {
                        return Err(Error::Parse {
                            line: line_no,
                            message: "expected `i j value`".into(),
                        });
                    }
                    let i = parse_field::<usize>(fields[0], line_no)?;
                    let j = parse_field::<usize>(fields[1], line_no)?;
                    let value = parse_field::<f64>(fields[2], line_no)?;
                    let result = if i == j {
                        m.set_linear(i, value)
                    } else {
                        m.set_quadratic(i, j, value)
                    };
                    result.map_err(|e| Error::Parse {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                }
            }
        }
        model.ok_or(Error::Parse {
            line: 0,
            message: "empty model file".into(),
        })
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &std::path::Path) -> Result<ProblemModel> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| Error::Parse {
        line,
        message: format!("{e}"),
    })
}

fn check_interval((lo, hi): (f64, f64)) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::BadInterval { lo, hi });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, prop_assert_eq, proptest};
    use rand::Rng;

    fn spin(values: &[i8]) -> Assignment {
        Assignment::new(Domain::Spin, values.to_vec()).unwrap()
    }

    fn binary(values: &[i8]) -> Assignment {
        Assignment::new(Domain::Binary, values.to_vec()).unwrap()
    }

    /// Independent summation oracle, coded directly from the energy
    /// definition without going through ProblemModel internals.
    fn energy_oracle(
        n: usize,
        linear: &[(usize, f64)],
        quadratic: &[(usize, usize, f64)],
        values: &[i8],
    ) -> f64 {
        assert_eq!(values.len(), n);
        let mut total = 0.0;
        for &(i, w) in linear {
            total += w * values[i] as f64;
        }
        for &(i, j, w) in quadratic {
            total += w * values[i] as f64 * values[j] as f64;
        }
        total
    }

    fn random_model(domain: Domain, n: usize, seed: u64) -> ProblemModel {
        let mut rng = stream_rng(seed, 9);
        let mut m = ProblemModel::new(domain, n);
        for i in 0..n {
            m.set_linear(i, open_uniform(&mut rng, -2.0, 2.0)).unwrap();
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(0.5) {
                    m.set_quadratic(i, j, open_uniform(&mut rng, -1.0, 1.0))
                        .unwrap();
                }
            }
        }
        m
    }

    fn random_assignment(domain: Domain, n: usize, rng: &mut impl Rng) -> Assignment {
        let low = match domain {
            Domain::Spin => -1,
            Domain::Binary => 0,
        };
        let values = (0..n)
            .map(|_| if rng.gen_bool(0.5) { 1 } else { low })
            .collect();
        Assignment::new(domain, values).unwrap()
    }

    #[test]
    fn energy_zero_model() {
        let m = ProblemModel::new(Domain::Spin, 3);
        assert_eq!(m.energy(&spin(&[1, -1, 1])).unwrap(), 0.0);
    }

    #[test]
    fn energy_single_coupler() {
        let mut m = ProblemModel::new(Domain::Spin, 2);
        m.set_quadratic(0, 1, 1.0).unwrap();
        assert_eq!(m.energy(&spin(&[1, 1])).unwrap(), 1.0);
        assert_eq!(m.energy(&spin(&[1, -1])).unwrap(), -1.0);
    }

    #[test]
    fn energy_matches_summation_oracle() {
        let m = random_model(Domain::Spin, 12, 11);
        let linear: Vec<(usize, f64)> = m.linear().iter().map(|(&i, &w)| (i, w)).collect();
        let quad: Vec<(usize, usize, f64)> = m
            .quadratic()
            .iter()
            .map(|(&(i, j), &w)| (i, j, w))
            .collect();
        let mut rng = stream_rng(12, 0);
        for _ in 0..100 {
            let a = random_assignment(Domain::Spin, 12, &mut rng);
            let expect = energy_oracle(12, &linear, &quad, a.values());
            let got = m.energy(&a).unwrap();
            assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn energy_rejects_mismatches() {
        let m = ProblemModel::new(Domain::Spin, 2);
        assert!(matches!(
            m.energy(&binary(&[0, 1])),
            Err(Error::DomainMismatch { .. })
        ));
        assert!(matches!(
            m.energy(&spin(&[1])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_keys_rejected() {
        let mut m = ProblemModel::new(Domain::Spin, 3);
        m.set_linear(0, 1.0).unwrap();
        assert!(matches!(
            m.set_linear(0, 2.0),
            Err(Error::DuplicateCoefficient { .. })
        ));
        m.set_quadratic(0, 1, 1.0).unwrap();
        assert!(matches!(
            m.set_quadratic(0, 1, 2.0),
            Err(Error::DuplicateCoefficient { .. })
        ));
        assert!(matches!(
            m.set_quadratic(1, 1, 2.0),
            Err(Error::BadQuadraticKey { .. })
        ));
    }

    #[test]
    fn to_ising_zero_qubo() {
        let q = ProblemModel::new(Domain::Binary, 3);
        let (ising, offset) = q.to_ising().unwrap();
        assert_eq!(offset, 0.0);
        assert!(ising.linear().is_empty() && ising.quadratic().is_empty());
    }

    #[test]
    fn to_ising_single_variable() {
        let mut q = ProblemModel::new(Domain::Binary, 1);
        q.set_linear(0, 1.0).unwrap();
        let (ising, offset) = q.to_ising().unwrap();
        for x in [0i8, 1] {
            let qa = binary(&[x]);
            let sa = qa.to_spin();
            let lhs = q.energy(&qa).unwrap();
            let rhs = ising.energy(&sa).unwrap() + offset;
            assert!((lhs - rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn conversions_preserve_energy_exhaustively() {
        for n in [1usize, 2, 5, 8] {
            let q = random_model(Domain::Binary, n, 100 + n as u64);
            let (ising, off_qi) = q.to_ising().unwrap();
            let (q2, off_iq) = ising.to_qubo().unwrap();
            for mask in 0u64..(1 << n) {
                let bits: Vec<i8> = (0..n).map(|i| ((mask >> i) & 1) as i8).collect();
                let x = binary(&bits);
                let s = x.to_spin();
                let eq = q.energy(&x).unwrap();
                let ei = ising.energy(&s).unwrap();
                let eq2 = q2.energy(&x).unwrap();
                assert!((eq - (ei + off_qi)).abs() <= 1e-12 * eq.abs().max(1.0));
                assert!((ei - (eq2 + off_iq)).abs() <= 1e-12 * ei.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rescale_scales_energy() {
        let m = random_model(Domain::Spin, 6, 5);
        let scaled = m.rescale(0.8);
        let mut rng = stream_rng(5, 1);
        for _ in 0..50 {
            let a = random_assignment(Domain::Spin, 6, &mut rng);
            let e = m.energy(&a).unwrap();
            let es = scaled.energy(&a).unwrap();
            assert!((es - 0.8 * e).abs() <= 1e-12 * e.abs().max(1.0));
        }
        assert_eq!(m.rescale(1.0), m);
        let zeroed = m.rescale(0.0);
        assert!(zeroed.linear().values().all(|&w| w == 0.0));
        assert!(zeroed.quadratic().values().all(|&w| w == 0.0));
    }

    #[test]
    fn chimera_counts() {
        let c114 = ChimeraTopology::new(1, 1, 4, BTreeSet::new()).unwrap();
        assert_eq!(c114.live_node_count(), 8);
        assert_eq!(c114.edge_count(), 16);

        let c224 = ChimeraTopology::new(2, 2, 4, BTreeSet::new()).unwrap();
        assert_eq!(c224.live_node_count(), 32);
        assert_eq!(c224.edge_count(), 80);
    }

    #[test]
    fn chimera_count_formula_small_grid() {
        for m in 1..=4 {
            for n in 1..=4 {
                for k in [2usize, 4] {
                    let topo = ChimeraTopology::new(m, n, k, BTreeSet::new()).unwrap();
                    assert_eq!(topo.live_node_count(), m * n * 2 * k);
                    let expect = m * n * k * k + (m - 1) * n * k + m * (n - 1) * k;
                    assert_eq!(topo.edge_count(), expect, "C({m},{n},{k})");
                }
            }
        }
    }

    #[test]
    fn chimera_dead_nodes_match_hardware_scale() {
        let dead: BTreeSet<usize> = (0..16).map(|i| i * 127).collect();
        let topo = ChimeraTopology::new(16, 16, 4, dead).unwrap();
        assert_eq!(topo.live_node_count(), 2032);
        for &(u, v) in topo.edges() {
            assert!(topo.is_live(u) && topo.is_live(v));
        }
    }

    #[test]
    fn chimera_rejects_bad_dead_ids() {
        let dead: BTreeSet<usize> = [8].into_iter().collect();
        assert!(matches!(
            ChimeraTopology::new(1, 1, 4, dead),
            Err(Error::DeadNodeOutOfRange { .. })
        ));
    }

    #[test]
    fn random_instance_is_reproducible_and_in_range() {
        let topo = Arc::new(ChimeraTopology::new(2, 2, 4, BTreeSet::new()).unwrap());
        let a =
            ProblemModel::random(topo.clone(), Domain::Spin, (-2.0, 2.0), (-1.0, 1.0), 7).unwrap();
        let b =
            ProblemModel::random(topo.clone(), Domain::Spin, (-2.0, 2.0), (-1.0, 1.0), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.linear().len(), topo.live_node_count());
        assert_eq!(a.quadratic().len(), topo.edge_count());
        for &w in a.linear().values() {
            assert!(w > -2.0 && w < 2.0);
        }
        for (&(i, j), &w) in a.quadratic() {
            assert!(w > -1.0 && w < 1.0);
            assert!(topo.has_edge(i, j));
        }
        let c =
            ProblemModel::random(topo.clone(), Domain::Spin, (-2.0, 2.0), (-1.0, 1.0), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_instance_draw_bounds_bulk() {
        // many draws all strictly inside the open interval
        let topo = Arc::new(ChimeraTopology::new(4, 4, 4, BTreeSet::new()).unwrap());
        let mut seen = 0usize;
        for seed in 0..25 {
            let m = ProblemModel::random(topo.clone(), Domain::Spin, (-2.0, 2.0), (-1.0, 1.0), seed)
                .unwrap();
            for &w in m.linear().values() {
                assert!(w > -2.0 && w < 2.0);
                seen += 1;
            }
            for &w in m.quadratic().values() {
                assert!(w > -1.0 && w < 1.0);
                seen += 1;
            }
        }
        assert!(seen >= 10_000);
    }

    #[test]
    fn brute_force_small_cases() {
        let mut m = ProblemModel::new(Domain::Spin, 2);
        m.set_quadratic(0, 1, 1.0).unwrap();
        let (a, e) = m.brute_force_ground().unwrap();
        assert_eq!(e, -1.0);
        // (-1,+1) precedes (+1,-1) lexicographically
        assert_eq!(a.values(), &[-1, 1]);

        let zero = ProblemModel::new(Domain::Spin, 3);
        let (a, e) = zero.brute_force_ground().unwrap();
        assert_eq!(e, 0.0);
        assert_eq!(a.values(), &[-1, -1, -1]);
    }

    #[test]
    fn brute_force_bounds_random_sampling() {
        let m = random_model(Domain::Spin, 12, 21);
        let (_, ground) = m.brute_force_ground().unwrap();
        let mut rng = stream_rng(21, 2);
        for _ in 0..1000 {
            let a = random_assignment(Domain::Spin, 12, &mut rng);
            assert!(m.energy(&a).unwrap() >= ground - 1e-12);
        }
    }

    #[test]
    fn brute_force_rejects_large_models() {
        let m = ProblemModel::new(Domain::Spin, 25);
        assert!(matches!(
            m.brute_force_ground(),
            Err(Error::TooManyVariables { .. })
        ));
    }

    #[test]
    fn text_format_round_trip_and_comments() {
        let m = random_model(Domain::Binary, 7, 33);
        let text = m.to_text();
        let parsed = ProblemModel::from_text(&text).unwrap();
        assert_eq!(parsed.domain(), m.domain());
        assert_eq!(parsed.n(), m.n());
        assert_eq!(parsed.linear(), m.linear());
        assert_eq!(parsed.quadratic(), m.quadratic());

        let with_comment = format!("# generated\n{text}");
        assert!(ProblemModel::from_text(&with_comment).is_ok());
    }

    proptest! {
        #[test]
        fn prop_conversion_offset_is_constant(seed in 0u64..500, n in 1usize..7) {
            let q = random_model(Domain::Binary, n, seed);
            let (ising, offset) = q.to_ising().unwrap();
            for mask in 0u64..(1 << n) {
                let bits: Vec<i8> = (0..n).map(|i| ((mask >> i) & 1) as i8).collect();
                let x = Assignment::new(Domain::Binary, bits).unwrap();
                let s = x.to_spin();
                let eq = q.energy(&x).unwrap();
                let ei = ising.energy(&s).unwrap();
                prop_assert!((eq - ei - offset).abs() <= 1e-12 * eq.abs().max(1.0));
            }
        }

        #[test]
        fn prop_text_round_trip_bit_exact(seed in 0u64..200) {
            let m = random_model(Domain::Spin, 6, seed);
            let parsed = ProblemModel::from_text(&m.to_text()).unwrap();
            for (k, v) in m.linear() {
                prop_assert_eq!(parsed.linear()[k].to_bits(), v.to_bits());
            }
            for (k, v) in m.quadratic() {
                prop_assert_eq!(parsed.quadratic()[k].to_bits(), v.to_bits());
            }
        }
    }
}
