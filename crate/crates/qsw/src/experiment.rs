//! Experiment orchestration: alpha scans, figure data, reproducible CSV.
//!
//! Output contract:
//! * trace CSV, one per alpha: header `t,entropy,return_prob`, one row per
//!   grid sample including `t = 0`;
//! * summary CSV: header
//!   `alpha,d_info,intercept,r_squared,window_lo,window_hi,n_points,status`,
//!   one row per alpha, errors recorded in `status` without aborting the
//!   scan;
//! * a `*_metadata.toml` file echoing the configuration, the resolved
//!   initial node, the crate version and the wall time.
//!
//! Floats are written with 17 significant digits, so re-running a fixed
//! configuration reproduces CSV bodies byte for byte. Alphas run in
//! parallel on a worker pool; results are gathered in alpha order, so
//! parallel and serial execution write identical files.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::QswParams;
use crate::error::{QswError, Result};
use crate::network::{make_chain, make_sierpinski, Convention, Network, Topology};
use crate::observables::{
    entropy_trace, return_probability, von_neumann_entropy, EntropyKind, EntropyTrace,
};
use crate::propagator::{propagate, TimeGrid, Trajectory};
use crate::scaling::{
    auto_window, fit_information_dimension, AutoWindowParams, FitResult, FitWindow,
};

/// Alpha grid used by the figure commands and as the scan default.
pub const DEFAULT_ALPHA_GRID: [f64; 7] = [0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Fixed fit windows matching the reported scaling regions.
pub const CHAIN_FIXED_WINDOW: (f64, f64) = (10.0, 100.0);
pub const GASKET_FIXED_WINDOW: (f64, f64) = (1.0, 10.0);

/// Network selector in a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologySpec {
    Chain,
    Sierpinski,
    Dimer,
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologySpec::Chain => write!(f, "chain"),
            TopologySpec::Sierpinski => write!(f, "sierpinski"),
            TopologySpec::Dimer => write!(f, "dimer"),
        }
    }
}

/// Initial node: symbolic or explicit index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialNode {
    Named(NamedStart),
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedStart {
    Center,
    Corner,
}

/// Window selection mode for the information-dimension fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Auto,
    Fixed,
}

/// Full configuration of a scan; every field has a default and maps to a
/// CLI flag of the same name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    /// Chain length (chain topology only).
    pub size: usize,
    /// Gasket generation (sierpinski topology only).
    pub generation: u32,
    pub convention: Convention,
    pub alphas: Vec<f64>,
    /// Defaults to `center` for the chain and dimer, `corner` for the gasket.
    pub initial_node: Option<InitialNode>,
    pub t_min: f64,
    pub t_max: f64,
    pub points_per_decade: u32,
    pub rtol: f64,
    pub atol: f64,
    pub dephasing_rate: f64,
    pub fit_mode: FitMode,
    /// Required when `fit_mode = fixed`.
    pub fit_window: Option<(f64, f64)>,
    pub min_decades: f64,
    pub saturation_margin: f64,
    pub transient: f64,
    pub output_dir: PathBuf,
    /// Reserved; the pipeline is deterministic and draws no random numbers.
    pub seed: Option<u64>,
    /// Worker threads for the alpha scan; default: rayon's choice.
    pub threads: Option<usize>,
    /// Also write the network edge list into the output directory.
    pub export_edges: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: TopologySpec::Chain,
            size: 100,
            generation: 5,
            convention: Convention::Laplacian,
            alphas: DEFAULT_ALPHA_GRID.to_vec(),
            initial_node: None,
            t_min: 1e-2,
            t_max: 1e3,
            points_per_decade: 20,
            rtol: crate::propagator::DEFAULT_RTOL,
            atol: crate::propagator::DEFAULT_ATOL,
            dephasing_rate: crate::dynamics::DEFAULT_DEPHASING_RATE,
            fit_mode: FitMode::Auto,
            fit_window: None,
            min_decades: 0.7,
            saturation_margin: 0.9,
            transient: 1.0,
            output_dir: PathBuf::from("qsw_out"),
            seed: None,
            threads: None,
            export_edges: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| QswError::ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Build the configured network.
    pub fn build_network(&self) -> Result<Network> {
        match self.topology {
            TopologySpec::Chain => make_chain(self.size),
            TopologySpec::Sierpinski => make_sierpinski(self.generation),
            TopologySpec::Dimer => Ok(Network::dimer()),
        }
    }

    /// Resolve the initial node against a network.
    pub fn resolve_initial_node(&self, net: &Network) -> Result<usize> {
        let choice = self.initial_node.unwrap_or(match net.topology() {
            Topology::Sierpinski => InitialNode::Named(NamedStart::Corner),
            _ => InitialNode::Named(NamedStart::Center),
        });
        let idx = match choice {
            InitialNode::Named(NamedStart::Center) => net.n_nodes() / 2,
            InitialNode::Named(NamedStart::Corner) => match net.topology() {
                Topology::Sierpinski => net.corners()[0],
                _ => 0,
            },
            InitialNode::Index(i) => i,
        };
        if idx >= net.n_nodes() {
            return Err(QswError::ConfigError(format!(
                "initial node {idx} out of range for {} nodes",
                net.n_nodes()
            )));
        }
        Ok(idx)
    }

    pub fn auto_window_params(&self) -> AutoWindowParams {
        AutoWindowParams {
            min_decades: self.min_decades,
            saturation_margin: self.saturation_margin,
            transient: self.transient,
        }
    }

    /// Check everything detectable before any numerics run.
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(QswError::ConfigError("alpha list is empty".to_string()));
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a <= 1.0) {
                return Err(QswError::ConfigError(format!(
                    "alpha = {a} outside (0, 1]"
                )));
            }
        }
        for w in self.alphas.windows(2) {
            if w[1] <= w[0] {
                return Err(QswError::ConfigError(
                    "alpha list must be strictly increasing".to_string(),
                ));
            }
        }
        if self.fit_mode == FitMode::Fixed {
            match self.fit_window {
                None => {
                    return Err(QswError::ConfigError(
                        "fit_mode = fixed requires fit_window".to_string(),
                    ))
                }
                Some((lo, hi)) => {
                    FitWindow::new(lo, hi).map_err(|e| QswError::ConfigError(e.to_string()))?;
                }
            }
        }
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(QswError::ConfigError("threads must be >= 1".to_string()));
            }
        }
        TimeGrid::log_spaced(self.t_min, self.t_max, self.points_per_decade)
            .map_err(|e| QswError::ConfigError(e.to_string()))?;
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(QswError::ConfigError(format!(
                "tolerances must be positive (rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        if !(self.dephasing_rate >= 0.0) {
            return Err(QswError::ConfigError(format!(
                "dephasing_rate = {} must be nonnegative",
                self.dephasing_rate
            )));
        }
        let net = self
            .build_network()
            .map_err(|e| QswError::ConfigError(e.to_string()))?;
        self.resolve_initial_node(&net)?;
        Ok(())
    }
}

/// Outcome of one alpha within a scan.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub alpha: f64,
    pub fit: Option<FitResult>,
    /// `"ok"` or the error text.
    pub status: String,
}

impl ScanRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Everything a scan produced.
#[derive(Debug)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    pub trace_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub metadata_path: PathBuf,
    pub wall_time: Duration,
}

impl ScanReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(ScanRow::is_ok)
    }
}

/// 17-significant-digit float formatting shared by all CSV writers.
pub fn format_float(x: f64) -> String {
    format!("{:.16e}", x)
}

fn sanitize_status(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

/// Per-alpha products kept in memory before the serial write-out.
struct AlphaOutcome {
    alpha: f64,
    trace_csv: Option<String>,
    fit: std::result::Result<FitResult, String>,
}

/// Render one trace CSV body (including the `t = 0` row).
fn render_trace_csv(traj: &Trajectory) -> Result<String> {
    let rp = return_probability(traj)?;
    let mut out = String::from("t,entropy,return_prob\n");
    for ((&t, state), &(_, p)) in traj.times().iter().zip(traj.states()).zip(&rp) {
        let s = von_neumann_entropy(state)?;
        out.push_str(&format!(
            "{},{},{}\n",
            format_float(t),
            format_float(s),
            format_float(p)
        ));
    }
    Ok(out)
}

fn fit_one(
    trace: &EntropyTrace,
    mode: FitMode,
    fixed: Option<(f64, f64)>,
    auto_params: &AutoWindowParams,
) -> Result<FitResult> {
    let window = match mode {
        FitMode::Fixed => {
            let (lo, hi) = fixed.ok_or_else(|| {
                QswError::ConfigError("fit_mode = fixed requires fit_window".to_string())
            })?;
            FitWindow::new(lo, hi)?
        }
        FitMode::Auto => auto_window(trace, auto_params)?,
    };
    fit_information_dimension(trace, &window)
}

fn write_summary_csv(path: &Path, rows: &[ScanRow]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "alpha,d_info,intercept,r_squared,window_lo,window_hi,n_points,status"
    )?;
    for row in rows {
        match &row.fit {
            Some(f) => writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                format_float(row.alpha),
                format_float(f.d_info),
                format_float(f.intercept),
                format_float(f.r_squared),
                format_float(f.window.t_lo()),
                format_float(f.window.t_hi()),
                f.n_points,
                sanitize_status(&row.status)
            )?,
            None => writeln!(
                w,
                "{},,,,,,,{}",
                format_float(row.alpha),
                sanitize_status(&row.status)
            )?,
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    run: RunInfo<'a>,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct RunInfo<'a> {
    version: &'a str,
    command: &'a str,
    initial_node_index: usize,
    n_nodes: usize,
    wall_time_seconds: f64,
}

fn write_metadata(
    path: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    initial_node: usize,
    n_nodes: usize,
    wall: Duration,
) -> Result<()> {
    let meta = RunMetadata {
        run: RunInfo {
            version: env!("CARGO_PKG_VERSION"),
            command,
            initial_node_index: initial_node,
            n_nodes,
            wall_time_seconds: wall.as_secs_f64(),
        },
        config: cfg,
    };
    let text = toml::to_string(&meta).map_err(|e| QswError::ConfigError(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Trace file name for one alpha; the shortest-roundtrip float format keeps
/// names deterministic.
pub fn trace_file_name(prefix: &str, alpha: f64) -> String {
    format!("{prefix}trace_alpha_{alpha}.csv")
}

fn run_alphas_parallel(
    cfg: &ExperimentConfig,
    net: &Network,
    initial_node: usize,
    grid: &TimeGrid,
    modes: &[(FitMode, Option<(f64, f64)>)],
) -> Result<Vec<Vec<AlphaOutcome>>> {
    let auto_params = cfg.auto_window_params();
    let worker = |&alpha: &f64| -> Vec<AlphaOutcome> {
        let result = QswParams::new(
            alpha,
            cfg.dephasing_rate,
            crate::network::hamiltonian(net, cfg.convention),
            crate::network::golden_rule_rates(&crate::network::hamiltonian(net, cfg.convention)),
            initial_node,
        )
        .and_then(|p| propagate(&p, grid, cfg.rtol, cfg.atol));
        match result {
            Err(e) => {
                let msg = e.to_string();
                modes
                    .iter()
                    .map(|_| AlphaOutcome {
                        alpha,
                        trace_csv: None,
                        fit: Err(msg.clone()),
                    })
                    .collect()
            }
            Ok(traj) => {
                let csv = render_trace_csv(&traj);
                let trace = csv.as_ref().ok().map(|_| entropy_trace(&traj));
                modes
                    .iter()
                    .map(|&(mode, fixed)| {
                        let fit = match (&csv, &trace) {
                            (Ok(_), Some(Ok(tr))) => {
                                fit_one(tr, mode, fixed, &auto_params).map_err(|e| e.to_string())
                            }
                            (Err(e), _) => Err(e.to_string()),
                            (_, Some(Err(e))) => Err(e.to_string()),
                            (_, None) => unreachable!("trace follows csv success"),
                        };
                        AlphaOutcome {
                            alpha,
                            trace_csv: csv.as_ref().ok().cloned(),
                            fit,
                        }
                    })
                    .collect()
            }
        }
    };

    let run = || cfg.alphas.par_iter().map(worker).collect::<Vec<_>>();
    let per_alpha: Vec<Vec<AlphaOutcome>> = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| QswError::ConfigError(e.to_string()))?
            .install(run),
        None => run(),
    };
    // Transpose: per mode, in alpha order.
    let mut by_mode: Vec<Vec<AlphaOutcome>> = (0..modes.len()).map(|_| Vec::new()).collect();
    for alpha_outcomes in per_alpha {
        for (m, outcome) in alpha_outcomes.into_iter().enumerate() {
            by_mode[m].push(outcome);
        }
    }
    Ok(by_mode)
}

fn write_scan_outputs(
    out_dir: &Path,
    prefix: &str,
    outcomes: Vec<AlphaOutcome>,
    summary_name: &str,
) -> Result<(Vec<ScanRow>, Vec<PathBuf>, PathBuf)> {
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut trace_paths = Vec::new();
    for outcome in outcomes {
        if let Some(csv) = &outcome.trace_csv {
            let path = out_dir.join(trace_file_name(prefix, outcome.alpha));
            fs::write(&path, csv)?;
            trace_paths.push(path);
        }
        let (fit, status) = match outcome.fit {
            Ok(f) => (Some(f), "ok".to_string()),
            Err(e) => (None, e),
        };
        rows.push(ScanRow {
            alpha: outcome.alpha,
            fit,
            status,
        });
    }
    let summary_path = out_dir.join(summary_name);
    write_summary_csv(&summary_path, &rows)?;
    Ok((rows, trace_paths, summary_path))
}

/// Run the configured alpha scan: propagate, compute the entropy trace,
/// fit the information dimension, and persist trace CSVs, a summary CSV
/// and a metadata file. Per-alpha failures are recorded in the summary
/// status column; the scan itself keeps going.
pub fn run_scan(cfg: &ExperimentConfig) -> Result<ScanReport> {
    let start = Instant::now();
    cfg.validate()?;
    let net = cfg.build_network()?;
    let initial_node = cfg.resolve_initial_node(&net)?;
    let grid = TimeGrid::log_spaced(cfg.t_min, cfg.t_max, cfg.points_per_decade)?;
    fs::create_dir_all(&cfg.output_dir)?;

    if cfg.export_edges {
        let f = fs::File::create(cfg.output_dir.join("network_edges.txt"))?;
        net.write_edge_list(BufWriter::new(f))?;
    }

    let modes = [(cfg.fit_mode, cfg.fit_window)];
    let mut by_mode = run_alphas_parallel(cfg, &net, initial_node, &grid, &modes)?;
    let (rows, trace_paths, summary_path) =
        write_scan_outputs(&cfg.output_dir, "", by_mode.remove(0), "summary.csv")?;

    let wall = start.elapsed();
    let metadata_path = cfg.output_dir.join("run_metadata.toml");
    write_metadata(
        &metadata_path,
        "scan",
        cfg,
        initial_node,
        net.n_nodes(),
        wall,
    )?;
    Ok(ScanReport {
        rows,
        trace_paths,
        summary_path,
        metadata_path,
        wall_time: wall,
    })
}

/// Which figure-data set to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Chain entropy traces over the alpha grid.
    Fig1a,
    /// Gasket entropy traces over the alpha grid.
    Fig1b,
    /// Information-dimension curves for both networks, fitted with both the
    /// automatic window and the fixed reference windows.
    Fig2,
}

impl Figure {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fig1a" => Ok(Figure::Fig1a),
            "fig1b" => Ok(Figure::Fig1b),
            "fig2" => Ok(Figure::Fig2),
            other => Err(QswError::ConfigError(format!(
                "unknown figure '{other}' (expected fig1a, fig1b or fig2)"
            ))),
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Figure::Fig1a => write!(f, "fig1a"),
            Figure::Fig1b => write!(f, "fig1b"),
            Figure::Fig2 => write!(f, "fig2"),
        }
    }
}

fn figure_network_cfg(base: &ExperimentConfig, topology: TopologySpec) -> ExperimentConfig {
    ExperimentConfig {
        topology,
        size: 100,
        generation: 5,
        initial_node: None,
        fit_window: None,
        ..base.clone()
    }
}

/// Produce the data behind one figure. The network, its size and the fixed
/// reference windows are pinned by the figure definition; grid, tolerances,
/// alpha grid and window-search parameters come from `cfg`.
///
/// Returns the paths of all files written.
pub fn figure_data(which: Figure, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let mut written = Vec::new();
    fs::create_dir_all(&cfg.output_dir)?;

    let single_panel = |topology: TopologySpec, prefix: &str| -> Result<Vec<PathBuf>> {
        let panel_cfg = ExperimentConfig {
            fit_mode: FitMode::Auto,
            ..figure_network_cfg(cfg, topology)
        };
        panel_cfg.validate()?;
        let net = panel_cfg.build_network()?;
        let initial_node = panel_cfg.resolve_initial_node(&net)?;
        let grid = TimeGrid::log_spaced(cfg.t_min, cfg.t_max, cfg.points_per_decade)?;
        let modes = [(FitMode::Auto, None)];
        let mut by_mode = run_alphas_parallel(&panel_cfg, &net, initial_node, &grid, &modes)?;
        let (_, mut paths, summary) = write_scan_outputs(
            &cfg.output_dir,
            &format!("{prefix}_"),
            by_mode.remove(0),
            &format!("{prefix}_summary.csv"),
        )?;
        paths.push(summary);
        let meta = cfg.output_dir.join(format!("{prefix}_metadata.toml"));
        write_metadata(
            &meta,
            &format!("figure {prefix}"),
            &panel_cfg,
            initial_node,
            net.n_nodes(),
            start.elapsed(),
        )?;
        paths.push(meta);
        Ok(paths)
    };

    match which {
        Figure::Fig1a => written.extend(single_panel(TopologySpec::Chain, "fig1a")?),
        Figure::Fig1b => written.extend(single_panel(TopologySpec::Sierpinski, "fig1b")?),
        Figure::Fig2 => {
            for (topology, tag, fixed) in [
                (TopologySpec::Chain, "chain", CHAIN_FIXED_WINDOW),
                (TopologySpec::Sierpinski, "gasket", GASKET_FIXED_WINDOW),
            ] {
                let panel_cfg = figure_network_cfg(cfg, topology);
                panel_cfg.validate()?;
                let net = panel_cfg.build_network()?;
                let initial_node = panel_cfg.resolve_initial_node(&net)?;
                let grid = TimeGrid::log_spaced(cfg.t_min, cfg.t_max, cfg.points_per_decade)?;
                let modes = [(FitMode::Auto, None), (FitMode::Fixed, Some(fixed))];
                let by_mode =
                    run_alphas_parallel(&panel_cfg, &net, initial_node, &grid, &modes)?;
                for (mode_outcomes, mode_tag) in by_mode.into_iter().zip(["auto", "fixed"]) {
                    let rows: Vec<ScanRow> = mode_outcomes
                        .into_iter()
                        .map(|o| {
                            let (fit, status) = match o.fit {
                                Ok(f) => (Some(f), "ok".to_string()),
                                Err(e) => (None, e),
                            };
                            ScanRow {
                                alpha: o.alpha,
                                fit,
                                status,
                            }
                        })
                        .collect();
                    let path = cfg
                        .output_dir
                        .join(format!("fig2_{tag}_{mode_tag}.csv"));
                    write_summary_csv(&path, &rows)?;
                    written.push(path);
                }
                let meta = cfg.output_dir.join(format!("fig2_{tag}_metadata.toml"));
                write_metadata(
                    &meta,
                    &format!("figure fig2 ({tag})"),
                    &panel_cfg,
                    initial_node,
                    net.n_nodes(),
                    start.elapsed(),
                )?;
                written.push(meta);
            }
        }
    }
    Ok(written)
}

/// Parse a trace CSV produced by this crate back into
/// `(times, entropy, return_prob)`.
pub fn read_trace_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("t,entropy,return_prob") => {}
        other => {
            return Err(QswError::ConfigError(format!(
                "unexpected trace CSV header {:?} in {}",
                other,
                path.display()
            )))
        }
    }
    let mut t = Vec::new();
    let mut s = Vec::new();
    let mut rp = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(QswError::ConfigError(format!(
                "trace CSV row {} has {} fields, expected 3",
                k + 2,
                fields.len()
            )));
        }
        let parse = |f: &str| -> Result<f64> {
            f.parse::<f64>()
                .map_err(|e| QswError::ConfigError(format!("bad float '{f}': {e}")))
        };
        t.push(parse(fields[0])?);
        s.push(parse(fields[1])?);
        rp.push(parse(fields[2])?);
    }
    Ok((t, s, rp))
}

/// Re-fit an existing trace CSV.
///
/// `n_nodes` is needed for the saturation ceiling in auto mode; pass the
/// node count of the network the trace came from. `alpha` only labels the
/// result.
pub fn fit_trace_csv(
    path: &Path,
    window: Option<(f64, f64)>,
    n_nodes: Option<usize>,
    alpha: f64,
    auto_params: &AutoWindowParams,
) -> Result<FitResult> {
    let (times, values, _) = read_trace_csv(path)?;
    let positive: Vec<(f64, f64)> = times
        .iter()
        .zip(&values)
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &v)| (t, v))
        .collect();
    let trace = EntropyTrace {
        times: positive.iter().map(|p| p.0).collect(),
        values: positive.iter().map(|p| p.1).collect(),
        kind: EntropyKind::VonNeumann,
        alpha,
        network_tag: path.display().to_string(),
        n_nodes: n_nodes.unwrap_or(0),
    };
    match window {
        Some((lo, hi)) => fit_information_dimension(&trace, &FitWindow::new(lo, hi)?),
        None => {
            if n_nodes.is_none() {
                return Err(QswError::ConfigError(
                    "auto-window refit needs the node count (--n-nodes)".to_string(),
                ));
            }
            let w = auto_window(&trace, auto_params)?;
            fit_information_dimension(&trace, &w)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_cfg(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            topology: TopologySpec::Dimer,
            alphas: vec![0.5, 1.0],
            t_min: 1e-2,
            t_max: 10.0,
            points_per_decade: 10,
            fit_mode: FitMode::Fixed,
            fit_window: Some((0.1, 10.0)),
            output_dir: dir.to_path_buf(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_validation_catches_bad_alphas_and_windows() {
        let dir = tempdir().unwrap();
        let mut cfg = tiny_cfg(dir.path());
        cfg.alphas = vec![];
        assert!(cfg.validate().is_err());
        cfg.alphas = vec![0.5, 0.5];
        assert!(cfg.validate().is_err());
        cfg.alphas = vec![0.5, 0.2];
        assert!(cfg.validate().is_err());
        cfg.alphas = vec![0.0];
        assert!(cfg.validate().is_err());
        cfg.alphas = vec![1.5];
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_cfg(dir.path());
        cfg.fit_window = None;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_cfg(dir.path());
        cfg.threads = Some(0);
        assert!(cfg.validate().is_err());
        assert!(tiny_cfg(dir.path()).validate().is_ok());
    }

    #[test]
    fn config_toml_round_trip_and_symbolic_nodes() {
        let text = r#"
topology = "sierpinski"
generation = 3
alphas = [0.1, 1.0]
initial_node = "corner"
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.topology, TopologySpec::Sierpinski);
        assert_eq!(cfg.generation, 3);
        let net = cfg.build_network().unwrap();
        assert_eq!(cfg.resolve_initial_node(&net).unwrap(), net.corners()[0]);

        let text = r#"
topology = "chain"
size = 9
initial_node = 4
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let net = cfg.build_network().unwrap();
        assert_eq!(cfg.resolve_initial_node(&net).unwrap(), 4);

        let text = "topology = \"chain\"\nsize = 8\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let net = cfg.build_network().unwrap();
        assert_eq!(cfg.resolve_initial_node(&net).unwrap(), 4);

        assert!(ExperimentConfig::from_toml("nonsense_field = 3\n").is_err());
    }

    #[test]
    fn scan_writes_all_outputs_with_pinned_schema() {
        let dir = tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        let report = run_scan(&cfg).unwrap();
        assert!(report.all_ok());
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.trace_paths.len(), 2);

        let summary = fs::read_to_string(&report.summary_path).unwrap();
        let mut lines = summary.lines();
        assert_eq!(
            lines.next().unwrap(),
            "alpha,d_info,intercept,r_squared,window_lo,window_hi,n_points,status"
        );
        assert_eq!(lines.count(), 2);

        let (t, s, rp) = read_trace_csv(&report.trace_paths[0]).unwrap();
        assert_eq!(t[0], 0.0);
        assert_eq!(s[0], 0.0);
        assert_eq!(rp[0], 1.0);
        assert_eq!(t.len(), s.len());
        assert!(report.metadata_path.exists());
        let meta = fs::read_to_string(&report.metadata_path).unwrap();
        assert!(meta.contains("initial_node_index"));
        assert!(meta.contains("laplacian"));
    }

    #[test]
    fn scan_records_per_alpha_fit_failures_without_aborting() {
        let dir = tempdir().unwrap();
        let mut cfg = tiny_cfg(dir.path());
        // Window with fewer than five samples: the fit must fail per alpha
        // while traces still get written.
        cfg.fit_window = Some((3.0, 10.0));
        cfg.points_per_decade = 5;
        let report = run_scan(&cfg).unwrap();
        assert!(!report.all_ok());
        assert_eq!(report.trace_paths.len(), 2);
        for row in &report.rows {
            assert!(row.fit.is_none());
            assert!(row.status.contains("samples inside"));
        }
    }

    #[test]
    fn reruns_are_byte_identical_and_thread_count_independent() {
        let dir1 = tempdir().unwrap();
        let dir2 = tempdir().unwrap();
        let dir3 = tempdir().unwrap();
        let mut cfg1 = tiny_cfg(dir1.path());
        cfg1.topology = TopologySpec::Chain;
        cfg1.size = 8;
        let mut cfg2 = cfg1.clone();
        cfg2.output_dir = dir2.path().to_path_buf();
        let mut cfg3 = cfg1.clone();
        cfg3.output_dir = dir3.path().to_path_buf();
        cfg1.threads = Some(1);
        cfg3.threads = Some(4);

        let r1 = run_scan(&cfg1).unwrap();
        let r2 = run_scan(&cfg2).unwrap();
        let r3 = run_scan(&cfg3).unwrap();
        for (a, b) in r1.trace_paths.iter().zip(&r2.trace_paths) {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }
        for (a, b) in r1.trace_paths.iter().zip(&r3.trace_paths) {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }
        assert_eq!(
            fs::read(&r1.summary_path).unwrap(),
            fs::read(&r3.summary_path).unwrap()
        );
    }

    #[test]
    fn fit_trace_csv_round_trip() {
        let dir = tempdir().unwrap();
        let mut cfg = tiny_cfg(dir.path());
        cfg.topology = TopologySpec::Chain;
        cfg.size = 8;
        cfg.alphas = vec![1.0];
        cfg.t_max = 100.0;
        cfg.fit_window = Some((1.0, 30.0));
        let report = run_scan(&cfg).unwrap();
        let stored = report.rows[0].fit.unwrap();
        let refit = fit_trace_csv(
            &report.trace_paths[0],
            Some((1.0, 30.0)),
            None,
            1.0,
            &AutoWindowParams::default(),
        )
        .unwrap();
        // The CSV stores 17 significant digits; the refit agrees to that
        // precision.
        assert!((stored.d_info - refit.d_info).abs() < 1e-12);
        assert_eq!(stored.n_points, refit.n_points);

        assert!(fit_trace_csv(
            &report.trace_paths[0],
            None,
            None,
            1.0,
            &AutoWindowParams::default()
        )
        .is_err());
    }

    #[test]
    fn edge_export_lands_in_output_dir() {
        let dir = tempdir().unwrap();
        let mut cfg = tiny_cfg(dir.path());
        cfg.export_edges = true;
        run_scan(&cfg).unwrap();
        let text = fs::read_to_string(dir.path().join("network_edges.txt")).unwrap();
        assert_eq!(text, "# nodes=2 topology=dimer\n0 1\n");
    }

    #[test]
    fn format_float_is_17_significant_digits() {
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
        assert_eq!(format_float(0.0), "0.0000000000000000e0");
        let x = 1.0 / 3.0;
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }
}
