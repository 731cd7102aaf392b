//! Genetic search for problem instances whose best-energy gap between a
//! short and a long anneal is maximal, plus the Maximum-Clique variant
//! that evolves graph edge sets instead of raw coefficients.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::clique::{clique_embedding, embed, maxclique_qubo, Embedding, Graph};
use crate::error::{Error, Result};
use crate::model::{ChimeraTopology, Domain, ProblemModel};
use crate::rng::{derive_seed, open_uniform, stream_rng, Fnv1a};
use crate::sampler::{run_backend, SamplerConfig};
use crate::schedule::{AnnealSchedule, EnergyCurves};

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    /// Population size N.
    pub population: usize,
    /// Proportion of fittest individuals selected for crossover.
    pub p_cross: f64,
    /// Per-coefficient (or per-edge) mutation probability.
    pub p_mut: f64,
    /// Number of generations R.
    pub generations: usize,
    pub linear_range: (f64, f64),
    pub quad_range: (f64, f64),
    /// Anneals per fitness evaluation.
    pub reads: u64,
    pub t_short_us: f64,
    pub t_long_us: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 100,
            p_cross: 0.1,
            p_mut: 0.001,
            generations: 200,
            linear_range: (-2.0, 2.0),
            quad_range: (-1.0, 1.0),
            reads: 1000,
            t_short_us: 1.0,
            t_long_us: 1000.0,
        }
    }
}

impl GaConfig {
    /// Defaults for the Maximum Clique variant: the genome has far fewer
    /// parameters, so the mutation rate is raised to 0.01.
    pub fn maxclique_default() -> Self {
        GaConfig {
            p_mut: 0.01,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidParameter {
                name: "population",
                message: format!("{} must be >= 2", self.population),
            });
        }
        if !(self.p_cross > 0.0 && self.p_cross <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "p_cross",
                message: format!("{} outside (0, 1]", self.p_cross),
            });
        }
        if !(0.0..=1.0).contains(&self.p_mut) {
            return Err(Error::InvalidParameter {
                name: "p_mut",
                message: format!("{} outside [0, 1]", self.p_mut),
            });
        }
        if !(self.t_short_us < self.t_long_us) {
            return Err(Error::InvalidParameter {
                name: "t_short_us",
                message: format!("{} must be < t_long_us {}", self.t_short_us, self.t_long_us),
            });
        }
        if self.reads == 0 {
            return Err(Error::ZeroReads);
        }
        let product = self.population as f64 * self.p_cross;
        if product < 2.0 {
            return Err(Error::CrossoverPoolTooSmall { product });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    /// Size of the population these statistics summarize.
    pub population: usize,
    pub max_fitness: f64,
    pub mean_fitness: f64,
}

/// History CSV with header `generation,max_fitness,mean_fitness`.
pub fn history_to_csv(history: &[GenerationStats]) -> String {
    let mut out = String::from("generation,max_fitness,mean_fitness\n");
    for row in history {
        out.push_str(&format!(
            "{},{},{}\n",
            row.generation, row.max_fitness, row.mean_fitness
        ));
    }
    out
}

/// Fitness: |best-1%(t_short) - best-1%(t_long)| over `reads` anneals of
/// the standard schedule each. Sampling seeds derive from the model
/// fingerprint, so identical individuals always score identically.
pub fn fitness(
    model: &ProblemModel,
    sampler_cfg: &SamplerConfig,
    ga_cfg: &GaConfig,
    curves: &EnergyCurves,
) -> Result<f64> {
    let base = derive_seed(sampler_cfg.seed, model.fingerprint());
    let short = run_backend(
        model,
        &AnnealSchedule::standard(ga_cfg.t_short_us)?,
        curves,
        ga_cfg.reads,
        &sampler_cfg.with_seed(derive_seed(base, 1)),
    )?;
    let long = run_backend(
        model,
        &AnnealSchedule::standard(ga_cfg.t_long_us)?,
        curves,
        ga_cfg.reads,
        &sampler_cfg.with_seed(derive_seed(base, 2)),
    )?;
    Ok((short.best_fraction_mean(0.01)? - long.best_fraction_mean(0.01)?).abs())
}

fn check_same_keys(a: &ProblemModel, b: &ProblemModel) -> Result<()> {
    let same = a.domain() == b.domain()
        && a.n() == b.n()
        && a.linear().len() == b.linear().len()
        && a.quadratic().len() == b.quadratic().len()
        && a.linear().keys().eq(b.linear().keys())
        && a.quadratic().keys().eq(b.quadratic().keys());
    if same {
        Ok(())
    } else {
        Err(Error::KeySetMismatch)
    }
}

/// Child model taking each coefficient from either parent with
/// probability 0.5.
pub fn crossover(a: &ProblemModel, b: &ProblemModel, seed: u64) -> Result<ProblemModel> {
    check_same_keys(a, b)?;
    let mut rng = stream_rng(seed, 0);
    let mut child = match a.topology() {
        Some(topo) => ProblemModel::over_topology(a.domain(), topo.clone()),
        None => ProblemModel::new(a.domain(), a.n()),
    };
    for ((&i, &wa), &wb) in a.linear().iter().zip(b.linear().values()) {
        child.set_linear(i, if rng.gen_bool(0.5) { wa } else { wb })?;
    }
    for ((&(i, j), &wa), &wb) in a.quadratic().iter().zip(b.quadratic().values()) {
        child.set_quadratic(i, j, if rng.gen_bool(0.5) { wa } else { wb })?;
    }
    Ok(child)
}

/// Each coefficient independently overwritten with probability `p_mut` by
/// a fresh draw from its range.
pub fn mutate(
    model: &ProblemModel,
    p_mut: f64,
    linear_range: (f64, f64),
    quad_range: (f64, f64),
    seed: u64,
) -> Result<ProblemModel> {
    if !(0.0..=1.0).contains(&p_mut) {
        return Err(Error::InvalidParameter {
            name: "p_mut",
            message: format!("{p_mut} outside [0, 1]"),
        });
    }
    let mut rng = stream_rng(seed, 0);
    let mut out = match model.topology() {
        Some(topo) => ProblemModel::over_topology(model.domain(), topo.clone()),
        None => ProblemModel::new(model.domain(), model.n()),
    };
    for (&i, &w) in model.linear() {
        let value = if rng.gen_bool(p_mut) {
            open_uniform(&mut rng, linear_range.0, linear_range.1)
        } else {
            w
        };
        out.set_linear(i, value)?;
    }
    for (&(i, j), &w) in model.quadratic() {
        let value = if rng.gen_bool(p_mut) {
            open_uniform(&mut rng, quad_range.0, quad_range.1)
        } else {
            w
        };
        out.set_quadratic(i, j, value)?;
    }
    Ok(out)
}

/// Indices of the individuals whose fitness reaches the p_cross cutoff;
/// ties at the cutoff are all included.
fn select_pool(fitnesses: &[f64], p_cross: f64) -> Vec<usize> {
    let k = ((p_cross * fitnesses.len() as f64).ceil() as usize)
        .clamp(1, fitnesses.len());
    let mut sorted: Vec<f64> = fitnesses.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let cutoff = sorted[k - 1];
    (0..fitnesses.len())
        .filter(|&i| fitnesses[i] >= cutoff)
        .collect()
}

fn stats_of(generation: usize, fitnesses: &[f64]) -> GenerationStats {
    let max_fitness = fitnesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean_fitness = fitnesses.iter().sum::<f64>() / fitnesses.len() as f64;
    GenerationStats {
        generation,
        population: fitnesses.len(),
        max_fitness,
        mean_fitness,
    }
}

/// Evaluates fitness for a population in parallel with a cross-generation
/// cache keyed by genome fingerprint.
fn evaluate<G: Sync>(
    population: &[G],
    fingerprint: impl Fn(&G) -> u64 + Sync,
    eval: impl Fn(&G) -> Result<f64> + Sync,
    cache: &mut HashMap<u64, f64>,
) -> Result<Vec<f64>> {
    let prints: Vec<u64> = population.iter().map(&fingerprint).collect();
    let mut missing: Vec<(u64, &G)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (fp, genome) in prints.iter().zip(population) {
        if !cache.contains_key(fp) && seen.insert(*fp) {
            missing.push((*fp, genome));
        }
    }
    let computed: Vec<(u64, Result<f64>)> = missing
        .into_par_iter()
        .map(|(fp, genome)| (fp, eval(genome)))
        .collect();
    for (fp, result) in computed {
        cache.insert(fp, result?);
    }
    Ok(prints.iter().map(|fp| cache[fp]).collect())
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub best: ProblemModel,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    /// The final population the best member was drawn from.
    pub final_population: Vec<ProblemModel>,
}

/// The full genetic loop: random init over the topology, then R rounds of
/// fitness evaluation, top-p_cross selection, N crossovers from the pool
/// (parents drawn with replacement and allowed to coincide), and
/// per-coefficient mutation. No elitism: the offspring replace the
/// population wholesale. Returns the fittest member of the final
/// population and the per-generation fitness history.
pub fn evolve(
    topology: &Arc<ChimeraTopology>,
    domain: Domain,
    ga_cfg: &GaConfig,
    sampler_cfg: &SamplerConfig,
    curves: &EnergyCurves,
    seed: u64,
) -> Result<EvolveOutcome> {
    ga_cfg.validate()?;
    let mut rng = stream_rng(seed, 0);
    let mut population: Vec<ProblemModel> = (0..ga_cfg.population)
        .map(|_| {
            ProblemModel::random(
                topology.clone(),
                domain,
                ga_cfg.linear_range,
                ga_cfg.quad_range,
                rng.gen(),
            )
        })
        .collect::<Result<_>>()?;

    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut history = Vec::with_capacity(ga_cfg.generations + 1);
    let eval = |m: &ProblemModel| fitness(m, sampler_cfg, ga_cfg, curves);

    for generation in 0..ga_cfg.generations {
        let fitnesses = evaluate(&population, ProblemModel::fingerprint, eval, &mut cache)?;
        history.push(stats_of(generation, &fitnesses));
        let pool = select_pool(&fitnesses, ga_cfg.p_cross);
        let mut next = Vec::with_capacity(ga_cfg.population);
        for _ in 0..ga_cfg.population {
            let p1 = &population[pool[rng.gen_range(0..pool.len())]];
            let p2 = &population[pool[rng.gen_range(0..pool.len())]];
            let child = crossover(p1, p2, rng.gen())?;
            next.push(mutate(
                &child,
                ga_cfg.p_mut,
                ga_cfg.linear_range,
                ga_cfg.quad_range,
                rng.gen(),
            )?);
        }
        population = next;
    }

    let fitnesses = evaluate(&population, ProblemModel::fingerprint, eval, &mut cache)?;
    history.push(stats_of(ga_cfg.generations, &fitnesses));
    let best_index = fitnesses
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("non-empty population");
    Ok(EvolveOutcome {
        best: population[best_index].clone(),
        best_fitness: fitnesses[best_index],
        history,
        final_population: population,
    })
}

fn graph_fingerprint(graph: &Graph) -> u64 {
    let mut h = Fnv1a::new();
    h.write_u64(graph.n() as u64);
    for (u, v) in graph.edges() {
        h.write_u64(u as u64);
        h.write_u64(v as u64);
    }
    h.finish()
}

/// Child graph taking each potential edge from either parent with
/// probability 0.5.
pub fn crossover_graphs(a: &Graph, b: &Graph, seed: u64) -> Result<Graph> {
    if a.n() != b.n() {
        return Err(Error::KeySetMismatch);
    }
    let mut rng = stream_rng(seed, 0);
    let mut child = Graph::new(a.n());
    for u in 0..a.n() {
        for v in (u + 1)..a.n() {
            let from = if rng.gen_bool(0.5) { a } else { b };
            if from.has_edge(u, v) {
                child.add_edge(u, v)?;
            }
        }
    }
    Ok(child)
}

/// Toggles each potential edge independently with probability `p_mut`.
pub fn mutate_graph(graph: &Graph, p_mut: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p_mut) {
        return Err(Error::InvalidParameter {
            name: "p_mut",
            message: format!("{p_mut} outside [0, 1]"),
        });
    }
    let mut rng = stream_rng(seed, 0);
    let mut out = graph.clone();
    for u in 0..graph.n() {
        for v in (u + 1)..graph.n() {
            if rng.gen_bool(p_mut) {
                out.toggle_edge(u, v);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MaxCliqueOutcome {
    pub graph: Graph,
    pub qubo: ProblemModel,
    pub embedding: Embedding,
    pub topology: Arc<ChimeraTopology>,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
}

/// Maximum-Clique variant: the genome is the edge set of a graph on
/// `vertex_count` vertices, so every individual stays a well-formed
/// Maximum Clique QUBO. Initial graphs draw their density uniformly from
/// [0.2, 0.8]; fitness is evaluated on the QUBO embedded into the
/// smallest square Chimera that fits, with chain strength
/// [`crate::clique::DEFAULT_CHAIN_STRENGTH`].
pub fn evolve_maxclique(
    vertex_count: usize,
    ga_cfg: &GaConfig,
    sampler_cfg: &SamplerConfig,
    curves: &EnergyCurves,
    seed: u64,
) -> Result<MaxCliqueOutcome> {
    ga_cfg.validate()?;
    if vertex_count == 0 {
        return Err(Error::InvalidParameter {
            name: "vertex_count",
            message: "must be >= 1".into(),
        });
    }
    let m = vertex_count.div_ceil(4);
    let topology = Arc::new(ChimeraTopology::new(m, m, 4, Default::default())?);
    let embedding = clique_embedding(vertex_count, &topology)?;
    let chain_strength = crate::clique::DEFAULT_CHAIN_STRENGTH;

    let mut rng = stream_rng(seed, 1);
    let mut population: Vec<Graph> = (0..ga_cfg.population)
        .map(|_| Graph::random_auto_density(vertex_count, rng.gen()))
        .collect();

    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut history = Vec::with_capacity(ga_cfg.generations + 1);
    let eval = |g: &Graph| -> Result<f64> {
        let embedded = embed(&maxclique_qubo(g), &embedding, chain_strength, &topology)?;
        fitness(&embedded.model, sampler_cfg, ga_cfg, curves)
    };

    for generation in 0..ga_cfg.generations {
        let fitnesses = evaluate(&population, graph_fingerprint, eval, &mut cache)?;
        history.push(stats_of(generation, &fitnesses));
        let pool = select_pool(&fitnesses, ga_cfg.p_cross);
        let mut next = Vec::with_capacity(ga_cfg.population);
        for _ in 0..ga_cfg.population {
            let p1 = &population[pool[rng.gen_range(0..pool.len())]];
            let p2 = &population[pool[rng.gen_range(0..pool.len())]];
            let child = crossover_graphs(p1, p2, rng.gen())?;
            next.push(mutate_graph(&child, ga_cfg.p_mut, rng.gen())?);
        }
        population = next;
    }

    let fitnesses = evaluate(&population, graph_fingerprint, eval, &mut cache)?;
    history.push(stats_of(ga_cfg.generations, &fitnesses));
    let best_index = fitnesses
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("non-empty population");
    let graph = population[best_index].clone();
    let qubo = maxclique_qubo(&graph);
    Ok(MaxCliqueOutcome {
        graph,
        qubo,
        embedding,
        topology,
        best_fitness: fitnesses[best_index],
        history,
    })
}
