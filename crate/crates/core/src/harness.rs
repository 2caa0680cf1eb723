//! Experiment orchestration: repeated graph runs, comparisons and reports.

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::run_continuum;
use crate::degree_law::{compute_params, LawSpec};
use crate::error::{Error, Result};
use crate::exploration::{run_edfs, Exploration};
use crate::graph::{pair_configuration, sample_conditioned_degrees, Digraph};
use crate::mdm::kernel;
use crate::metric::{canonical_code, code_hex, SizeCap};
use crate::rng::{derive_rng, derive_seed, tag};
use crate::scc::{component_mdm, digraph_sccs};

/// Kernel code recorded when a kernel exceeds the canonical-labelling cap.
pub const OVER_CAP_CODE: &str = "over-cap";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GraphModel {
    /// Conditioned degrees, then a uniform pairing.
    #[default]
    Configuration,
    /// Directed Erdős–Rényi with edge probability `c / n`.
    ErdosRenyi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumBlock {
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub runs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub jsonl: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

fn default_attempts() -> usize {
    1_000_000
}

fn default_er_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub law: LawSpec,
    pub n_list: Vec<usize>,
    pub runs_per_n: usize,
    /// `"c*n^(a/b)"`: only trees finished within this many exploration steps
    /// contribute. Absent means the whole graph.
    #[serde(default)]
    pub horizon_rule: Option<String>,
    #[serde(default)]
    pub model: GraphModel,
    /// Edge probability is `er_scale / n` for the Erdős–Rényi model.
    #[serde(default = "default_er_scale")]
    pub er_scale: f64,
    #[serde(default)]
    pub continuum: Option<ContinuumBlock>,
    pub seed: u64,
    /// BFS sources for the diameter bound; `0` or absent skips it.
    #[serde(default)]
    pub diameter_sources: Option<usize>,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
    #[serde(default)]
    pub outputs: OutputPaths,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads TOML or JSON depending on the file extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::Config("n_list must hold positive sizes".into()));
        }
        if self.runs_per_n == 0 {
            return Err(Error::Config("runs_per_n must be at least 1".into()));
        }
        if let Some(rule) = &self.horizon_rule {
            HorizonRule::parse(rule)?;
        }
        if let Some(c) = &self.continuum {
            if !(c.horizon > 0.0 && c.dt > 0.0) || c.runs == Some(0) {
                return Err(Error::Config("continuum block needs positive horizon, dt and runs".into()));
            }
        }
        if self.model == GraphModel::ErdosRenyi && !(self.er_scale >= 0.0) {
            return Err(Error::Config("er_scale must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `c * n^e` with `c > 0` and `e >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonRule {
    pub c: f64,
    pub exponent: f64,
}

impl HorizonRule {
    /// Parses `"c*n^(a/b)"`, `"c*n^x"`, `"n^x"` or a bare constant.
    pub fn parse(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Config(format!("cannot parse horizon rule {s:?}"));
        let (c, rest) = match s.split_once('*') {
            Some((c, r)) => (c.parse::<f64>().map_err(|_| bad())?, r.to_string()),
            None if s.starts_with('n') => (1.0, s.clone()),
            None => return Ok(HorizonRule { c: s.parse().map_err(|_| bad())?, exponent: 0.0 }),
        };
        let exponent = if rest == "n" {
            1.0
        } else {
            let e = rest.strip_prefix("n^").ok_or_else(bad)?;
            let e = e.trim_start_matches('(').trim_end_matches(')');
            match e.split_once('/') {
                Some((a, b)) => {
                    let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                    if b == 0.0 {
                        return Err(bad());
                    }
                    a / b
                }
                None => e.parse().map_err(|_| bad())?,
            }
        };
        if !(c > 0.0) || !(exponent >= 0.0) {
            return Err(bad());
        }
        Ok(HorizonRule { c, exponent })
    }

    pub fn steps(&self, n: usize) -> usize {
        (self.c * (n as f64).powf(self.exponent) + 1e-9).floor() as usize
    }
}

/// Summary of one sampled graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub run: usize,
    pub seed: u64,
    /// Edge counts of the nontrivial components, nonincreasing.
    pub scc_lengths: Vec<u64>,
    /// Vertex counts of the nontrivial components, nonincreasing.
    pub scc_sizes: Vec<u64>,
    /// Hex canonical codes of the kernels, in the order of `scc_lengths`.
    pub kernel_codes: Vec<String>,
    /// Whether each kernel (same order) is a loop or 3-regular.
    pub kernel_loop_or_cubic: Vec<bool>,
    /// Nontrivial components left out because their tree outlived the horizon.
    pub truncated_components: usize,
    pub diameter_lb: Option<u64>,
    pub wall_time_ms: f64,
}

impl RunRecord {
    pub fn largest_length(&self) -> u64 {
        self.scc_lengths.first().copied().unwrap_or(0)
    }
}

/// Each ordered pair `(u, v)`, `u != v`, is an edge with probability `p`.
pub fn directed_er_sample(n: usize, p: f64, seed: u64) -> Result<Digraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange {
            value: p,
            context: "edge probability".into(),
        });
    }
    let mut edges = Vec::new();
    if n >= 2 && p > 0.0 {
        let total = n as u64 * (n as u64 - 1);
        let mut rng = derive_rng(seed, &[tag::ER]);
        let push = |idx: u64, edges: &mut Vec<(u32, u32)>| {
            let u = idx / (n as u64 - 1);
            let w = idx % (n as u64 - 1);
            let v = if w >= u { w + 1 } else { w };
            edges.push((u as u32, v as u32));
        };
        if p == 1.0 {
            for idx in 0..total {
                push(idx, &mut edges);
            }
        } else {
            // skip over failures
            let geo = Geometric::new(p).map_err(|e| Error::Precondition(e.to_string()))?;
            let mut idx = geo.sample(&mut rng);
            while idx < total {
                push(idx, &mut edges);
                idx = idx.saturating_add(1).saturating_add(geo.sample(&mut rng));
            }
        }
    }
    Ok(Digraph::from_edges(n, edges))
}

/// Largest BFS distance from a set of sources to the vertices they reach.
///
/// Sources are a uniform sample of `sources` distinct vertices (all vertices
/// when `sources >= n`, which gives the exact directed diameter).
pub fn diameter_lower_bound(g: &Digraph, sources: usize, seed: u64) -> u64 {
    if g.n == 0 {
        return 0;
    }
    let adj = g.out_adjacency();
    let list: Vec<usize> = if sources >= g.n {
        (0..g.n).collect()
    } else {
        let mut rng = derive_rng(seed, &[tag::DIAMETER]);
        sample_indices(&mut rng, g.n, sources.max(1)).into_vec()
    };
    let mut stamp = vec![u32::MAX; g.n];
    let mut dist = vec![0u64; g.n];
    let mut queue = VecDeque::new();
    let mut best = 0u64;
    for (round, &s) in list.iter().enumerate() {
        let round = round as u32;
        stamp[s] = round;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            best = best.max(dist[v]);
            for &e in adj.of(v) {
                let w = g.edges[e as usize].1 as usize;
                if stamp[w] != round {
                    stamp[w] = round;
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
    }
    best
}

/// Exclusive end (in forest node indices) of the tree containing each node.
fn tree_ends(x: &Exploration) -> Vec<usize> {
    let f = &x.forest;
    let mut end_of_tree = vec![f.len(); f.len()];
    let roots = f.roots();
    for (i, &r) in roots.iter().enumerate() {
        let end = roots.get(i + 1).map(|&s| s as usize).unwrap_or(f.len());
        end_of_tree[f.tree_of[r as usize] as usize] = end;
    }
    (0..f.len()).map(|i| end_of_tree[f.tree_of[i] as usize]).collect()
}

/// Components of `g`, kernels and diameter, keeping components whose
/// exploration tree ends within `horizon` steps when a horizon is given.
pub fn summarize_graph(
    g: &Digraph,
    n: usize,
    run: usize,
    seed: u64,
    horizon: Option<usize>,
    diameter_sources: Option<usize>,
) -> RunRecord {
    let start = Instant::now();
    let (_, comps) = digraph_sccs(g);
    let ends = horizon.map(|_| {
        let x = run_edfs(g, derive_seed(seed, &[tag::EXPLORE]));
        let ends = tree_ends(&x);
        (x, ends)
    });
    let mut kept: Vec<(u64, u64, String, bool)> = Vec::new();
    let mut truncated = 0;
    for c in comps.iter().filter(|c| c.is_nontrivial()) {
        if let (Some(h), Some((x, ends))) = (horizon, &ends) {
            let node = x.node_of_vertex[c.vertices[0] as usize] as usize;
            if ends[node] > h {
                truncated += 1;
                continue;
            }
        }
        let k = kernel(&component_mdm(g, c));
        let code = canonical_code(&k, SizeCap::default())
            .map(|c| code_hex(&c))
            .unwrap_or_else(|_| OVER_CAP_CODE.to_string());
        let shape = k.is_loop() || k.is_three_regular();
        kept.push((c.edges.len() as u64, c.vertices.len() as u64, code, shape));
    }
    kept.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    let mut sizes: Vec<u64> = kept.iter().map(|k| k.1).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let diameter_lb = diameter_sources
        .filter(|&s| s > 0)
        .map(|s| diameter_lower_bound(g, s, seed));
    RunRecord {
        n,
        run,
        seed,
        scc_lengths: kept.iter().map(|k| k.0).collect(),
        scc_sizes: sizes,
        kernel_codes: kept.iter().map(|k| k.2.clone()).collect(),
        kernel_loop_or_cubic: kept.iter().map(|k| k.3).collect(),
        truncated_components: truncated,
        diameter_lb,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Seed of run `run` at size `n`.
pub fn run_seed(base: u64, n: usize, run: usize) -> u64 {
    derive_seed(base, &[tag::RUN, n as u64, run as u64])
}

fn one_run(cfg: &ExperimentConfig, law: &crate::degree_law::JointDegreeLaw, n: usize, run: usize) -> Result<RunRecord> {
    let start = Instant::now();
    let seed = run_seed(cfg.seed, n, run);
    let g = match cfg.model {
        GraphModel::Configuration => {
            let seq = sample_conditioned_degrees(law, n, seed, cfg.max_attempts)?;
            pair_configuration(&seq, seed)?
        }
        GraphModel::ErdosRenyi => directed_er_sample(n, (cfg.er_scale / n as f64).min(1.0), seed)?,
    };
    let horizon = match &cfg.horizon_rule {
        Some(r) => Some(HorizonRule::parse(r)?.steps(n)),
        None => None,
    };
    let mut rec = summarize_graph(&g, n, run, seed, horizon, cfg.diameter_sources);
    rec.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(rec)
}

/// All runs of a configuration, in `(n, run)` order whatever the scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let law = cfg.law.build()?;
    let jobs: Vec<(usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..cfg.runs_per_n).map(move |r| (n, r)))
        .collect();
    jobs.par_iter()
        .map(|&(n, run)| {
            one_run(cfg, &law, n, run).map_err(|e| Error::Inconsistent(format!("run (n = {n}, index {run}): {e}")))
        })
        .collect()
}

/// Largest limit-object lengths for `runs` independent continuum draws.
pub fn continuum_largest_lengths(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let block = cfg
        .continuum
        .as_ref()
        .ok_or_else(|| Error::Config("no continuum block".into()))?;
    let params = compute_params(&cfg.law.build()?)?;
    let runs = block.runs.unwrap_or(cfg.runs_per_n);
    (0..runs)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.seed, &[tag::PATH, r as u64]);
            run_continuum(&params, block.horizon, block.dt, seed).map(|x| x.largest_length(false))
        })
        .collect()
}

/// One CSV row per ranked component: `n,seed,rank,length,size,kernel_code`.
pub fn write_csv<W: Write>(records: &[RunRecord], mut w: W) -> Result<()> {
    writeln!(w, "n,seed,rank,length,size,kernel_code")?;
    for r in records {
        for (i, len) in r.scc_lengths.iter().enumerate() {
            writeln!(w, "{},{},{},{},{},{}", r.n, r.seed, i + 1, len, r.scc_sizes[i], r.kernel_codes[i])?;
        }
    }
    Ok(())
}

/// Rescaled plot data: `n,seed,rank,length_rescaled,size_rescaled`.
pub fn write_plot_data<W: Write>(records: &[RunRecord], mut w: W) -> Result<()> {
    writeln!(w, "n,seed,rank,length_rescaled,size_rescaled")?;
    for r in records {
        let s = (r.n as f64).cbrt();
        for (i, len) in r.scc_lengths.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{:e},{:e}",
                r.n,
                r.seed,
                i + 1,
                *len as f64 / s,
                r.scc_sizes[i] as f64 / s
            )?;
        }
    }
    Ok(())
}

pub fn write_jsonl<W: Write>(records: &[RunRecord], mut w: W) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<RunRecord>> {
    r.lines()
        .filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
        .map(|l| serde_json::from_str(&l?).map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

/// Writes the configured outputs. Nothing is written for absent paths.
pub fn emit_report(records: &[RunRecord], outputs: &OutputPaths) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptySample);
    }
    let open = |p: &PathBuf| std::fs::File::create(p).map(std::io::BufWriter::new);
    if let Some(p) = &outputs.csv {
        write_csv(records, open(p)?)?;
    }
    if let Some(p) = &outputs.jsonl {
        write_jsonl(records, open(p)?)?;
    }
    if let Some(p) = &outputs.plot {
        write_plot_data(records, open(p)?)?;
    }
    Ok(())
}

/// Median over runs of `f(record)`, grouped by `n` in `n_list` order.
pub fn median_by_n(records: &[RunRecord], n_list: &[usize], f: impl Fn(&RunRecord) -> f64) -> Vec<(usize, f64)> {
    n_list
        .iter()
        .map(|&n| {
            let xs: Vec<f64> = records.iter().filter(|r| r.n == n).map(&f).collect();
            (n, crate::numerics::median(&xs))
        })
        .collect()
}
