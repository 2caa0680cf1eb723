use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use scclab::continuum::run_continuum;
use scclab::degree_law::{check_criticality, compute_params, difference_lattice, CriticalParams, JointDegreeLaw, LawSpec};
use scclab::exploration::run_edfs;
use scclab::graph::{pair_configuration, sample_conditioned_degrees, sample_simple, Digraph};
use scclab::harness::{
    continuum_largest_lengths, emit_report, median_by_n, run_experiment, ExperimentConfig, GraphModel, HorizonRule,
};
use scclab::limit::llt::{difference_variance, llt_check};
use scclab::limit::measure::{
    gamma_lower_bound, phi_nm_estimate, prefix_is_admissible, size_biased_means, MeasureChange, DEFAULT_EPSILON,
};
use scclab::mdm::{rank_and_pad, RankBy};
use scclab::metric::{canonical_code, code_hex, SizeCap};
use scclab::stats::ks_statistic;
use scclab::staged::{run_staged, stream_discovery_degrees, StreamMode, StreamSource};

const SEED_HELP: &str = "\
Seeds: every command takes one 64-bit base seed. Sub-streams are derived by
folding labels into it with SplitMix64 (degrees, pairing, exploration,
forest, marks, candidates, heads, path, Cox marks, ...), so each stage of a
run has its own reproducible generator. Experiment run i at size n uses the
base seed folded with (run, n, i).

Laws: `poisson:L` or `poisson:L-,L+` (product Poisson), `geometric:p-,p+`,
`table:in/out/prob;in/out/prob;...`, or a JSON law spec such as
'{\"kind\":\"table\",\"entries\":[[1,1,0.5],[2,2,0.5]]}'.";

#[derive(Parser)]
#[command(name = "scclab", version, about = "Strongly connected components of critical directed random graphs", after_help = SEED_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Iidz,
}

#[derive(Subcommand)]
enum Command {
    /// Criticality parameters and limit coefficients of a law (JSON).
    Params {
        #[arg(long)]
        law: String,
    },
    /// Sample a configuration-model graph in the `n m` / `tail head` format.
    SampleGraph {
        #[arg(long)]
        law: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reject graphs with loops or multiple edges.
        #[arg(long)]
        simple: bool,
        #[arg(long, default_value_t = 1_000_000)]
        max_attempts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the edge-based DFS and print the per-step trace as CSV.
    Explore {
        /// Graph file; if absent a graph is sampled from --law and --n.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        law: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Graph-free staged sampler; one JSON line per marked component.
    Staged {
        #[arg(long)]
        law: String,
        #[arg(long)]
        n: usize,
        /// Step budget: a number or a rule such as `5*n^(2/3)`.
        #[arg(long, default_value = "5*n^(2/3)")]
        horizon: String,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continuum limit sampler; one JSON line per ranked SCC.
    Continuum {
        /// Take the parameters from a law instead of the flags below.
        #[arg(long)]
        law: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_plus: f64,
        /// sigma_-+ + nu_-.
        #[arg(long, default_value_t = 1.0)]
        sp_nu: f64,
        #[arg(long = "T", default_value_t = 10.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pad with unit loops to at least this many entries.
        #[arg(long, default_value_t = 0)]
        prefix: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact law of the degree difference sum against the local limit (CSV).
    LltCheck {
        #[arg(long)]
        law: String,
        #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
        n_list: Vec<usize>,
        /// Points within this many standard deviations of the mean.
        #[arg(long, default_value_t = 2.0)]
        width: f64,
        #[arg(long, default_value_t = 1 << 22)]
        window: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure-change weight of a degree prefix such as `1/0,1/2,2/1` (JSON).
    MeasureChange {
        #[arg(long)]
        law: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        prefix: String,
        /// Monte Carlo draws; 0 skips the estimate.
        #[arg(long, default_value_t = 10_000)]
        mc_budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the exact evaluation (large n or unbounded support).
        #[arg(long)]
        no_exact: bool,
    },
    /// Run an experiment config (TOML or JSON) and write its reports.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// KS distances of rescaled largest SCC lengths: against the continuum
    /// (config continuum block) and, with --er, against directed G(n, 1/n).
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        er: bool,
    },
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a] => {
            let a: f64 = a.trim().parse()?;
            Ok((a, a))
        }
        [a, b] => Ok((a.trim().parse()?, b.trim().parse()?)),
        _ => bail!("expected one or two numbers, got `{s}`"),
    }
}

fn parse_law(s: &str) -> Result<JointDegreeLaw> {
    let s = s.trim();
    let spec: LawSpec = if s.starts_with('{') {
        serde_json::from_str(s).context("law JSON")?
    } else {
        let (kind, rest) = s.split_once(':').with_context(|| format!("law `{s}` has no `kind:` prefix"))?;
        match kind {
            "poisson" => {
                let (a, b) = parse_pair(rest)?;
                LawSpec::PoissonProduct {
                    lambda_minus: a,
                    lambda_plus: b,
                    truncation: None,
                }
            }
            "geometric" => {
                let (a, b) = parse_pair(rest)?;
                LawSpec::GeometricProduct {
                    p_minus: a,
                    p_plus: b,
                    truncation: None,
                }
            }
            "table" => {
                let entries = rest
                    .split(';')
                    .filter(|e| !e.trim().is_empty())
                    .map(|e| {
                        let f: Vec<&str> = e.trim().split('/').collect();
                        if f.len() != 3 {
                            bail!("table entry `{e}` is not in/out/prob");
                        }
                        Ok((f[0].parse()?, f[1].parse()?, f[2].parse()?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                LawSpec::Table { entries }
            }
            other => bail!("unknown law kind `{other}`"),
        }
    };
    Ok(spec.build()?)
}

fn parse_prefix(s: &str) -> Result<Vec<(u32, u32)>> {
    s.split(',')
        .filter(|e| !e.trim().is_empty())
        .map(|e| {
            let (a, b) = e
                .trim()
                .split_once('/')
                .with_context(|| format!("prefix entry `{e}` is not in/out"))?;
            Ok((a.parse()?, b.parse()?))
        })
        .collect()
}

fn parse_horizon(s: &str, n: usize) -> Result<usize> {
    match s.trim().parse::<usize>() {
        Ok(h) => Ok(h),
        Err(_) => Ok(HorizonRule::parse(s)?.steps(n)),
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn kernel_code(m: &scclab::mdm::Mdm) -> String {
    canonical_code(m, SizeCap::default())
        .map(|c| code_hex(&c))
        .unwrap_or_else(|_| scclab::harness::OVER_CAP_CODE.to_string())
}

fn read_graph(path: &Path) -> Result<Digraph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Digraph::from_text(&text)?)
}

fn params_json(p: &CriticalParams) -> serde_json::Value {
    serde_json::to_value(p).expect("parameters serialise")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Params { law } => {
            let law = parse_law(&law)?;
            let p = compute_params(&law)?;
            let (period, _) = difference_lattice(&law)?;
            let out = json!({
                "params": params_json(&p),
                "critical": check_criticality(&law, 1e-9),
                "has_continuum_limit": p.has_continuum_limit(),
                "difference_period": period,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::SampleGraph {
            law,
            n,
            seed,
            simple,
            max_attempts,
            out,
        } => {
            let law = parse_law(&law)?;
            let g = if simple {
                sample_simple(&law, n, seed, max_attempts)?
            } else {
                let seq = sample_conditioned_degrees(&law, n, seed, max_attempts)?;
                pair_configuration(&seq, seed)?
            };
            output(&out)?.write_all(g.to_text().as_bytes())?;
        }
        Command::Explore {
            graph,
            law,
            n,
            seed,
            out,
        } => {
            let g = match (graph, law, n) {
                (Some(p), _, _) => read_graph(&p)?,
                (None, Some(law), Some(n)) => {
                    let seq = sample_conditioned_degrees(&parse_law(&law)?, n, seed, 1_000_000)?;
                    pair_configuration(&seq, seed)?
                }
                _ => bail!("give either --graph or both --law and --n"),
            };
            let x = run_edfs(&g, seed);
            output(&out)?.write_all(x.trace_csv().as_bytes())?;
        }
        Command::Staged {
            law,
            n,
            horizon,
            mode,
            seed,
            out,
        } => {
            let law = parse_law(&law)?;
            let horizon = parse_horizon(&horizon, n)?;
            let seq;
            let (mut stream, total_in) = match mode {
                Mode::Exact => {
                    seq = sample_conditioned_degrees(&law, n, seed, 1_000_000)?;
                    (
                        stream_discovery_degrees(StreamSource::Sequence(&seq), StreamMode::ExactReorder, seed)?,
                        seq.total,
                    )
                }
                Mode::Iidz => (
                    stream_discovery_degrees(StreamSource::Law(&law), StreamMode::IidZ, seed)?,
                    (n as f64 * law.mean_in()).round() as u64,
                ),
            };
            let run = run_staged(&mut stream, total_in, horizon, seed)?;
            let mut w = output(&out)?;
            for c in &run.components {
                let line = json!({
                    "l": c.l,
                    "sigma": c.sigma,
                    "truncated": c.truncated,
                    "tails": c.tails,
                    "heads": c.heads,
                    "scc_lengths": c.sccs.iter().map(|s| s.length).collect::<Vec<_>>(),
                    "kernel_codes": c.sccs.iter().map(|s| kernel_code(&s.kernel)).collect::<Vec<_>>(),
                });
                writeln!(w, "{line}")?;
            }
        }
        Command::Continuum {
            law,
            mu,
            sigma_plus,
            sp_nu,
            horizon,
            dt,
            seed,
            prefix,
            out,
        } => {
            let params = match law {
                Some(l) => compute_params(&parse_law(&l)?)?,
                None => CriticalParams::from_base(mu, sp_nu, 0.0, sigma_plus, 0.0),
            };
            if !params.has_continuum_limit() {
                bail!("sigma_plus must be positive for the continuum limit");
            }
            let run = run_continuum(&params, horizon, dt, seed)?;
            let ranked = rank_and_pad(run.sccs(true), RankBy::Length, prefix);
            let mut w = output(&out)?;
            for (i, s) in ranked.iter().enumerate() {
                let line = json!({
                    "rank": i + 1,
                    "length": s.length,
                    "size": s.size,
                    "kernel_code": kernel_code(&s.kernel),
                    "kernel": s.kernel.to_json(),
                });
                writeln!(w, "{line}")?;
            }
        }
        Command::LltCheck {
            law,
            n_list,
            width,
            window,
            out,
        } => {
            let law = parse_law(&law)?;
            let sd = difference_variance(&law).sqrt();
            let mean = law.mean_in() - law.mean_out();
            let mut w = output(&out)?;
            writeln!(w, "n,y,exact,predicted,rel_error")?;
            for n in n_list {
                let centre = (n as f64 * mean).round() as i64;
                let half = (width * sd * (n as f64).sqrt()).floor() as i64;
                let ys: Vec<i64> = (centre - half..=centre + half).collect();
                for r in llt_check(&law, n, &ys, window)? {
                    writeln!(w, "{},{},{:e},{:e},{:e}", r.n, r.y, r.exact, r.predicted, r.rel_error)?;
                }
            }
        }
        Command::MeasureChange {
            law,
            n,
            prefix,
            mc_budget,
            seed,
            no_exact,
        } => {
            let law = parse_law(&law)?;
            let prefix = parse_prefix(&prefix)?;
            let exact = if no_exact {
                None
            } else {
                Some(MeasureChange::new(&law, n, prefix.len())?.phi(&prefix)?)
            };
            let estimate = if mc_budget > 0 {
                Some(phi_nm_estimate(&law, &prefix, n, mc_budget, seed)?)
            } else {
                None
            };
            let admissible = prefix_is_admissible(&prefix, size_biased_means(&law), DEFAULT_EPSILON);
            let gamma = if admissible {
                Some(gamma_lower_bound(&law, &prefix, n, DEFAULT_EPSILON)?)
            } else {
                None
            };
            let out = json!({
                "n": n,
                "prefix": prefix,
                "exact": exact,
                "estimate": estimate,
                "admissible": admissible,
                "gamma": gamma,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Experiment { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let records = run_experiment(&cfg)?;
            emit_report(&records, &cfg.outputs)?;
            let medians = median_by_n(&records, &cfg.n_list, |r| r.largest_length() as f64 / (r.n as f64).cbrt());
            for (n, m) in medians {
                println!("{}", json!({"n": n, "median_rescaled_largest": m}));
            }
        }
        Command::Compare { config, er } => {
            let cfg = ExperimentConfig::load(&config)?;
            let records = run_experiment(&cfg)?;
            let rescaled = |n: usize, recs: &[scclab::harness::RunRecord]| -> Vec<f64> {
                recs.iter()
                    .filter(|r| r.n == n)
                    .map(|r| r.largest_length() as f64 / (n as f64).cbrt())
                    .collect()
            };
            let continuum = match cfg.continuum {
                Some(_) => Some(continuum_largest_lengths(&cfg)?),
                None => None,
            };
            let er_records = if er {
                let mut c = cfg.clone();
                c.model = GraphModel::ErdosRenyi;
                Some(run_experiment(&c)?)
            } else {
                None
            };
            if continuum.is_none() && er_records.is_none() {
                bail!("nothing to compare: add a continuum block or pass --er");
            }
            for &n in &cfg.n_list {
                let disc = rescaled(n, &records);
                let ks_continuum = continuum.as_ref().map(|c| ks_statistic(&disc, c)).transpose()?;
                let ks_er = er_records
                    .as_ref()
                    .map(|e| ks_statistic(&disc, &rescaled(n, e)))
                    .transpose()?;
                println!("{}", json!({"n": n, "ks_continuum": ks_continuum, "ks_er": ks_er}));
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run(Cli::parse())
}
