use std::path::{Path, PathBuf};
use std::sync::Arc;

use quench_core::clique::Embedding;
use quench_core::evolver::{evolve, evolve_maxclique, history_to_csv, GaConfig};
use quench_core::freezeout::{
    classify_frozen, default_x_grid, fit_polyline_with, freezeout_point, scan_x_with, BetaFit,
    PolylineFit, DEFAULT_R2_MIN, DEFAULT_SLOPE_THRESHOLD_DEG,
};
use quench_core::model::{ChimeraTopology, Domain, ProblemModel};
use quench_core::sampler::{Backend, SamplerConfig};
use quench_core::schedule::{AnnealSchedule, EnergyCurves};
use quench_core::slicer::{
    parse_best_bitstrings_csv, parse_trace_csv, per_qubit_qfp_bits, qfp_histogram, run_slicing,
    ScheduleKind, SliceParams,
};
use quench_core::model::Assignment;

use crate::config::{FileConfig, IdList, RangeSpec, TopologySpec};
use crate::svg::{histogram, Chart, Series, VLine};
use crate::{
    CliError, FreezeoutArgs, GaArgs, GenArgs, QfpArgs, QubitQfpArgs, SliceArgs,
};

const DEFAULT_TOPOLOGY: TopologySpec = TopologySpec {
    m: 16,
    n_cells: 16,
    k: 4,
};

fn parse_domain(name: &str) -> Result<Domain, CliError> {
    match name {
        "ising" | "spin" => Ok(Domain::Spin),
        "qubo" | "binary" => Ok(Domain::Binary),
        other => Err(CliError::Validation(format!(
            "unknown domain {other:?} (expected ising|qubo)"
        ))),
    }
}

fn parse_backend(name: &str) -> Result<Backend, CliError> {
    name.parse::<Backend>().map_err(CliError::from)
}

fn load_curves(path: Option<&Path>) -> Result<EnergyCurves, CliError> {
    match path {
        None => Ok(EnergyCurves::builtin_default()),
        Some(p) => EnergyCurves::read_file(p).map_err(CliError::from),
    }
}

fn build_topology(spec: TopologySpec, dead: &IdList) -> Result<Arc<ChimeraTopology>, CliError> {
    Ok(Arc::new(ChimeraTopology::new(
        spec.m,
        spec.n_cells,
        spec.k,
        dead.0.iter().copied().collect(),
    )?))
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_model(path: &Path) -> Result<ProblemModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    ProblemModel::from_text(&text).map_err(CliError::from)
}

struct SamplerFlags {
    backend: Option<String>,
    sweeps_per_us: Option<u32>,
    temperature: Option<f64>,
    seed: Option<u64>,
}

fn sampler_config(cfg: &FileConfig, flags: SamplerFlags) -> Result<SamplerConfig, CliError> {
    let defaults = SamplerConfig::default();
    let backend_name = cfg.resolve(flags.backend, "backend", "svmc".to_string())?;
    let sampler = SamplerConfig {
        backend: parse_backend(&backend_name)?,
        sweeps_per_us: cfg.resolve(flags.sweeps_per_us, "sweeps_per_us", defaults.sweeps_per_us)?,
        temperature_k: cfg.resolve(flags.temperature, "temperature", defaults.temperature_k)?,
        seed: cfg.resolve(flags.seed, "seed", 0)?,
    };
    sampler.validate()?;
    Ok(sampler)
}

pub fn gen(args: GenArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let topology = cfg.resolve(args.topology, "topology", DEFAULT_TOPOLOGY)?;
    let dead = cfg.resolve(args.dead, "dead", IdList::default())?;
    let domain = parse_domain(&cfg.resolve(args.domain, "domain", "ising".to_string())?)?;
    let RangeSpec(llo, lhi) =
        cfg.resolve(args.linear_range, "linear_range", RangeSpec(-2.0, 2.0))?;
    let RangeSpec(qlo, qhi) = cfg.resolve(args.quad_range, "quad_range", RangeSpec(-1.0, 1.0))?;
    let seed = cfg.resolve(args.seed, "seed", 0)?;

    let topo = build_topology(topology, &dead)?;
    let model = ProblemModel::random(topo, domain, (llo, lhi), (qlo, qhi), seed)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_file(&args.out, &model.to_text())
}

pub fn ga(args: GaArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let maxclique = args.maxclique || cfg.resolve(None, "maxclique", false)?;
    let base = if maxclique {
        GaConfig::maxclique_default()
    } else {
        GaConfig::default()
    };
    let RangeSpec(llo, lhi) = cfg.resolve(
        args.linear_range,
        "linear_range",
        RangeSpec(base.linear_range.0, base.linear_range.1),
    )?;
    let RangeSpec(qlo, qhi) = cfg.resolve(
        args.quad_range,
        "quad_range",
        RangeSpec(base.quad_range.0, base.quad_range.1),
    )?;
    let ga_cfg = GaConfig {
        population: cfg.resolve(args.population, "population", base.population)?,
        p_cross: cfg.resolve(args.p_cross, "p_cross", base.p_cross)?,
        p_mut: cfg.resolve(args.p_mut, "p_mut", base.p_mut)?,
        generations: cfg.resolve(args.generations, "generations", base.generations)?,
        linear_range: (llo, lhi),
        quad_range: (qlo, qhi),
        reads: cfg.resolve(args.reads, "reads", base.reads)?,
        t_short_us: cfg.resolve(args.t_short, "t_short", base.t_short_us)?,
        t_long_us: cfg.resolve(args.t_long, "t_long", base.t_long_us)?,
    };
    let sampler = sampler_config(
        &cfg,
        SamplerFlags {
            backend: args.backend,
            sweeps_per_us: args.sweeps_per_us,
            temperature: args.temperature,
            seed: args.seed,
        },
    )?;
    let curves = load_curves(args.curves.as_deref())?;
    ensure_dir(&args.out)?;

    if maxclique {
        let vertices = cfg.resolve(args.vertices, "vertices", 64)?;
        let outcome = evolve_maxclique(vertices, &ga_cfg, &sampler, &curves, sampler.seed)?;
        write_file(&args.out.join("history.csv"), &history_to_csv(&outcome.history))?;
        write_file(&args.out.join("best_graph.txt"), &outcome.graph.to_text())?;
        write_file(&args.out.join("best_model.txt"), &outcome.qubo.to_text())?;
        write_file(
            &args.out.join("embedding.txt"),
            &outcome.embedding.to_text(),
        )?;
        println!("best fitness {}", outcome.best_fitness);
    } else {
        let topology = cfg.resolve(args.topology, "topology", DEFAULT_TOPOLOGY)?;
        let domain = parse_domain(&cfg.resolve(args.domain, "domain", "ising".to_string())?)?;
        let topo = build_topology(topology, &IdList::default())?;
        let outcome = evolve(&topo, domain, &ga_cfg, &sampler, &curves, sampler.seed)?;
        write_file(&args.out.join("history.csv"), &history_to_csv(&outcome.history))?;
        write_file(&args.out.join("best_model.txt"), &outcome.best.to_text())?;
        println!("best fitness {}", outcome.best_fitness);
    }
    Ok(())
}

pub fn slice(args: SliceArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let model = read_model(&args.model)?;
    let active_us = cfg.resolve(args.total_time, "total_time", 1000.0)?;
    let n_slices = cfg.resolve(args.slices, "slices", 1000)?;
    let reads = cfg.resolve(args.reads, "reads", 1000)?;
    let best_fraction = cfg.resolve(args.best_fraction, "best_fraction", 0.01)?;
    let pause_start = cfg.resolve_opt(args.pause_start, "pause_start")?;
    let pause_len = cfg.resolve_opt(args.pause_len, "pause_len")?;
    let kind = match (pause_start, pause_len) {
        (None, None) => ScheduleKind::Plain,
        (Some(start), Some(len)) => ScheduleKind::Paused {
            pause_start_us: start,
            pause_len_us: len,
        },
        _ => {
            return Err(CliError::Validation(
                "--pause-start and --pause-len must be given together".into(),
            ))
        }
    };
    let embedding_path = cfg.resolve_opt(args.embedding.map(display_path), "embedding")?;
    let embedding = match embedding_path {
        None => None,
        Some(path) => {
            let spec = cfg
                .resolve_opt(args.embedding_topology, "embedding_topology")?
                .ok_or_else(|| {
                    CliError::Validation(
                        "--embedding requires --embedding-topology MxNxK".into(),
                    )
                })?;
            let topo = build_topology(spec, &IdList::default())?;
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Runtime(format!("cannot read {path}: {e}")))?;
            Some(Embedding::from_text(&text, &topo)?)
        }
    };
    let sampler = sampler_config(
        &cfg,
        SamplerFlags {
            backend: args.backend,
            sweeps_per_us: args.sweeps_per_us,
            temperature: args.temperature,
            seed: args.seed,
        },
    )?;
    let curves = load_curves(args.curves.as_deref())?;
    ensure_dir(&args.out)?;

    let params = SliceParams {
        active_us,
        n_slices,
        reads,
        kind,
        best_fraction,
    };
    let trace = run_slicing(&model, &params, &sampler, &curves, embedding.as_ref())?;

    write_file(&args.out.join("trace.csv"), &trace.to_csv())?;
    write_file(&args.out.join("trace_bits.csv"), &trace.best_bitstrings_csv())?;

    let shade = match kind {
        ScheduleKind::Paused {
            pause_start_us,
            pause_len_us,
        } => Some((pause_start_us, pause_start_us + pause_len_us)),
        ScheduleKind::Plain => None,
    };
    let energy_chart = Chart {
        title: "Energy per slice",
        x_label: "slice time (us)",
        y_label: "energy",
        series: vec![
            Series {
                label: "mean",
                color: "#1565c0",
                points: trace
                    .slice_times
                    .iter()
                    .zip(&trace.mean_energy)
                    .map(|(&t, &e)| (t, e))
                    .collect(),
            },
            Series {
                label: "best 1%",
                color: "#c62828",
                points: trace
                    .slice_times
                    .iter()
                    .zip(&trace.best_mean)
                    .map(|(&t, &e)| (t, e))
                    .collect(),
            },
        ],
        shade,
        vlines: vec![],
    };
    write_file(&args.out.join("energy.svg"), &energy_chart.render())?;

    let hamming_chart = Chart {
        title: "Hamming distance between adjacent slices",
        x_label: "slice time (us)",
        y_label: "mean Hamming distance",
        series: vec![Series {
            label: "best-set Hamming",
            color: "#2e7d32",
            points: trace
                .slice_times
                .iter()
                .skip(1)
                .zip(&trace.hamming)
                .map(|(&t, &h)| (t, h))
                .collect(),
        }],
        shade,
        vlines: vec![],
    };
    write_file(&args.out.join("hamming.svg"), &hamming_chart.render())?;

    if let Some(chain) = &trace.chain_unbroken {
        let chain_chart = Chart {
            title: "Proportion of unbroken chains",
            x_label: "slice time (us)",
            y_label: "unbroken proportion",
            series: vec![Series {
                label: "unbroken",
                color: "#6a1b9a",
                points: trace
                    .slice_times
                    .iter()
                    .zip(chain)
                    .map(|(&t, &u)| (t, u))
                    .collect(),
            }],
            shade,
            vlines: vec![],
        };
        write_file(&args.out.join("chain.svg"), &chain_chart.render())?;
    }
    Ok(())
}

fn display_path(p: PathBuf) -> String {
    p.display().to_string()
}

pub fn freezeout(args: FreezeoutArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let model = read_model(&args.model)?;
    let reads = cfg.resolve(args.reads, "reads", 1000)?;
    let total_time = cfg.resolve(args.total_time, "total_time", 1000.0)?;
    let grid = cfg
        .resolve_opt(args.grid, "grid")?
        .map(|g| g.0)
        .unwrap_or_else(default_x_grid);
    let bins = cfg.resolve_opt(args.bins, "bins")?;
    let r2_min = cfg.resolve(args.r2_min, "r2_min", DEFAULT_R2_MIN)?;
    let sampler = sampler_config(
        &cfg,
        SamplerFlags {
            backend: args.backend,
            sweeps_per_us: args.sweeps_per_us,
            temperature: args.temperature,
            seed: args.seed,
        },
    )?;
    let curves = load_curves(args.curves.as_deref())?;
    ensure_dir(&args.out)?;

    let schedule = AnnealSchedule::standard(total_time)?;
    let outcome = scan_x_with(&model, &schedule, &curves, reads, &sampler, &grid, bins, r2_min)?;

    let mut fits_csv = format!("{},chosen\n", BetaFit::csv_header());
    for fit in &outcome.fits {
        let chosen = outcome.chosen.as_ref().is_some_and(|c| c.x == fit.x);
        fits_csv.push_str(&format!("{},{}\n", fit.to_csv_row(), chosen));
    }
    write_file(&args.out.join("beta_fits.csv"), &fits_csv)?;

    let mut summary = String::from("status,x,beta_eff,r2,n_pairs,s_star,curves\n");
    match &outcome.chosen {
        None => summary.push_str(&format!("no-valid-fit,,,,,,{}\n", curves.label())),
        Some(fit) => {
            let (status, s_star) = match freezeout_point(fit.beta_eff, &curves) {
                Ok(s) => ("ok".to_string(), s.to_string()),
                Err(_) => ("no-freezeout-in-range".to_string(), String::new()),
            };
            summary.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                status,
                fit.x,
                fit.beta_eff,
                fit.r2,
                fit.n_pairs,
                s_star,
                curves.label()
            ));
        }
    }
    write_file(&args.out.join("summary.csv"), &summary)?;
    match &outcome.chosen {
        Some(fit) => println!("beta_eff {} at x {}", fit.beta_eff, fit.x),
        None => println!("no valid fit on the grid"),
    }
    Ok(())
}

pub fn qfp(args: QfpArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let threshold = cfg.resolve(args.threshold, "threshold", DEFAULT_SLOPE_THRESHOLD_DEG)?;
    let max_segments = cfg.resolve(args.max_segments, "max_segments", 5)?;
    let use_mean = args.use_mean || cfg.resolve(None, "use_mean", false)?;
    let text = std::fs::read_to_string(&args.trace)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", args.trace.display())))?;
    let rows = parse_trace_csv(&text)?;
    if rows.is_empty() {
        return Err(CliError::Validation("trace CSV has no rows".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.t_us).collect();
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| if use_mean { r.mean_energy } else { r.best_mean })
        .collect();
    ensure_dir(&args.out)?;

    let mut fit = fit_polyline_with(&xs, &ys, max_segments)?;
    let (frozen, qfp) = classify_frozen(&fit, threshold);
    fit.frozen = frozen;
    fit.qfp = qfp;

    let fit_csv = format!("{}\n{}\n", PolylineFit::csv_header(), fit.to_csv_row());
    write_file(&args.out.join("qfp_fit.csv"), &fit_csv)?;

    let mut vlines = Vec::new();
    if let Some(q) = fit.qfp {
        vlines.push(VLine {
            x: q,
            color: "#2e7d32",
            label: "QFP",
        });
    }
    let chart = Chart {
        title: "Polyline fit of the slicing trace",
        x_label: "slice time (us)",
        y_label: if use_mean { "mean energy" } else { "best 1% energy" },
        series: vec![
            Series {
                label: "trace",
                color: "#1565c0",
                points: xs.iter().zip(&ys).map(|(&x, &y)| (x, y)).collect(),
            },
            Series {
                label: "fit",
                color: "#ef6c00",
                points: fit.vertices_denormalized(),
            },
        ],
        shade: None,
        vlines,
    };
    write_file(&args.out.join("qfp.svg"), &chart.render())?;
    println!(
        "frozen {} (threshold {} deg), phases {:?} deg, qfp {:?}",
        fit.frozen, threshold, fit.slopes_deg, fit.qfp
    );
    Ok(())
}

pub fn qubit_qfp(args: QubitQfpArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let text = std::fs::read_to_string(&args.bits)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", args.bits.display())))?;
    let bits = parse_best_bitstrings_csv(&text)?;
    if bits.is_empty() {
        return Err(CliError::Validation("bitstring CSV has no rows".into()));
    }
    let n_slices = bits.len();
    let assignments: Vec<Assignment> = bits
        .iter()
        .map(|b| Assignment::from_bit_string(Domain::Binary, b))
        .collect::<Result<_, _>>()?;
    let bins = cfg.resolve(args.bins, "bins", n_slices.min(50))?;
    ensure_dir(&args.out)?;

    let qfps = per_qubit_qfp_bits(&assignments);
    let mut qfp_csv = String::from("qubit,qfp_slice\n");
    for (qubit, &q) in qfps.iter().enumerate() {
        qfp_csv.push_str(&format!("{qubit},{q}\n"));
    }
    write_file(&args.out.join("qubit_qfp.csv"), &qfp_csv)?;

    let counts = qfp_histogram(&qfps, n_slices, bins)?;
    let mut hist_csv = String::from("bin_start_slice,bin_end_slice,count\n");
    let mut bars = Vec::with_capacity(bins);
    for (b, &count) in counts.iter().enumerate() {
        let start = b * n_slices / bins + 1;
        let end = ((b + 1) * n_slices / bins).max(start);
        hist_csv.push_str(&format!("{start},{end},{count}\n"));
        bars.push((start.to_string(), count));
    }
    write_file(&args.out.join("qfp_histogram.csv"), &hist_csv)?;
    write_file(
        &args.out.join("qfp_histogram.svg"),
        &histogram("Frozen-out qubits per slice bin", "slice", &bars),
    )?;
    println!(
        "{} qubits, {} slices, earliest freeze at slice {}",
        qfps.len(),
        n_slices,
        qfps.iter().min().copied().unwrap_or(0)
    );
    Ok(())
}
