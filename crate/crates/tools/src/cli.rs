//! The `amwc` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use amwc_core::graph::check_feasibility;
use amwc_core::metrics::{pq_exact, pq_surrogate};
use amwc_core::oracle::brute_force;
use amwc_core::solver::solve;
use amwc_core::train::{gen_task, LinearCostModel, TaskSpec};
use amwc_core::{Error, GroundTruth, Panoptic};

use crate::experiment::{run, RunConfig};
use crate::format::{
    parse_ground_truth, parse_instance, parse_solution, serialize_ground_truth, serialize_instance, serialize_model,
    serialize_solution, Solution,
};
use crate::gradcheck::{run_checks, GradcheckOptions};
use crate::render::render_pgm;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "amwc", version, about = "Asymmetric multiway cut solver and panoptic tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an instance file and write a solution file.
    Solve {
        instance: PathBuf,
        /// Solution path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exact enumeration instead of greedy contraction (small instances only).
        #[arg(long)]
        oracle: bool,
    },
    /// Print panoptic quality of a solution against ground truth.
    Eval { solution: PathBuf, ground_truth: PathBuf },
    /// Check solver, metric and gradient invariants on random instances.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 25)]
        max_nodes: usize,
        #[arg(long, default_value_t = 3)]
        max_classes: usize,
        #[arg(long, default_value_t = 7)]
        oracle_nodes: usize,
        #[arg(long, default_value_t = 3)]
        oracle_classes: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda_min: f64,
        #[arg(long, default_value_t = 50.0)]
        lambda_max: f64,
        /// Perturbation samples per backward pass.
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Flip the sign of ∂IoU in the analytic gradient (mutation test).
        #[arg(long)]
        inject_sign_flip: bool,
    },
    /// Pretrain, train and evaluate on synthetic tasks.
    Train {
        /// `key=value` configuration file.
        config: PathBuf,
        /// Output directory for log, models and effective configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lambda_min: Option<f64>,
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        dropout: Option<f64>,
    },
    /// Generate a synthetic grid instance and its ground truth.
    Gen {
        /// Writes `<out>.amwc` and `<out>.gt`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        height: usize,
        #[arg(long, default_value_t = 16)]
        width: usize,
        #[arg(long, default_value_t = 4)]
        instances: usize,
        #[arg(long, default_value_t = 0.6)]
        noise: f64,
    },
    /// Render a grid solution as a binary PGM image.
    Render {
        solution: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A failed command: exit code and message.
#[derive(Debug)]
struct Failure(i32, String);

type CmdResult = Result<(), Failure>;

fn input(msg: impl std::fmt::Display) -> Failure {
    Failure(EXIT_INPUT, msg.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn at(path: &Path) -> impl Fn(crate::format::ParseError) -> Failure + '_ {
    move |e| input(format!("{}: {e}", path.display()))
}

/// Exit code for a core error: bad inputs are usage errors, the rest are
/// broken invariants.
fn core(e: Error) -> Failure {
    let code = match e {
        Error::Graph(_)
        | Error::InvalidGroundTruth(_)
        | Error::OracleSizeLimit { .. }
        | Error::Shape(_)
        | Error::InvalidLambda(_)
        | Error::InvalidConfig(_)
        | Error::Placement { .. } => EXIT_INPUT,
        Error::NonFiniteLoss { .. } => EXIT_CHECK,
        Error::Infeasible(_) | Error::StaleEdge(..) => EXIT_INTERNAL,
    };
    Failure(code, e.to_string())
}

fn io(e: std::io::Error) -> Failure {
    Failure(EXIT_INPUT, e.to_string())
}

fn cmd_solve(instance: &Path, out_path: Option<&Path>, oracle: bool, out: &mut dyn Write) -> CmdResult {
    let inst = parse_instance(&read(instance)?).map_err(at(instance))?;
    let g = &inst.graph;
    let lab = if oracle { brute_force(g).map_err(core)? } else { solve(g) };
    check_feasibility(g, &lab).map_err(|e| Failure(EXIT_INTERNAL, format!("solver produced an infeasible labeling: {e}")))?;
    let text = serialize_solution(&Solution::from_labeling(&lab, inst.grid));
    match out_path {
        Some(p) => {
            write_file(p, text.as_bytes())?;
            writeln!(out, "segments={} objective={:?}", lab.num_segments(), lab.objective).map_err(io)
        }
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

fn cmd_eval(solution: &Path, gt_path: &Path, out: &mut dyn Write) -> CmdResult {
    let sol = parse_solution(&read(solution)?).map_err(at(solution))?;
    let gt: GroundTruth = parse_ground_truth(&read(gt_path)?).map_err(at(gt_path))?;
    if sol.num_nodes() != gt.num_nodes() {
        return Err(input(format!("solution has {} nodes, ground truth has {}", sol.num_nodes(), gt.num_nodes())));
    }
    if let Some(&k) = sol.segment_classes.iter().find(|&&k| k >= gt.num_classes()) {
        return Err(input(format!("solution class {} out of range for {} classes", k + 1, gt.num_classes())));
    }
    let pred = Panoptic { segments: &sol.segments, segment_classes: &sol.segment_classes };
    let report = pq_exact(pred, &gt).map_err(core)?;
    let (surrogate, _) = pq_surrogate(pred, &gt).map_err(core)?;
    for c in &report.classes {
        writeln!(out, "class={} pq={:.6} sq={:.6} tp={} fp={} fn={}", c.class + 1, c.pq, c.sq, c.tp, c.fp, c.fn_)
            .map_err(io)?;
    }
    writeln!(out, "PQ={:.6} PQbar={:.6}", report.pq, surrogate.value).map_err(io)
}

fn cmd_gradcheck(opts: &GradcheckOptions, out: &mut dyn Write) -> CmdResult {
    let results = run_checks(opts).map_err(core)?;
    for r in &results {
        writeln!(out, "{r}").map_err(io)?;
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.failure).collect();
    if failed.is_empty() {
        writeln!(out, "all checks passed").map_err(io)
    } else {
        Err(Failure(EXIT_CHECK, format!("failed: {}", failed.join(", "))))
    }
}

struct TrainOverrides {
    seed: Option<u64>,
    lambda_min: Option<f64>,
    lambda_max: Option<f64>,
    n: Option<usize>,
    dropout: Option<f64>,
}

fn cmd_train(config: &Path, out_dir: Option<&Path>, o: TrainOverrides, out: &mut dyn Write) -> CmdResult {
    let mut cfg = RunConfig::parse(&read(config)?).map_err(|e| input(format!("{}: {e}", config.display())))?;
    let t = &mut cfg.train;
    t.seed = o.seed.unwrap_or(t.seed);
    t.perturb.lambda_min = o.lambda_min.unwrap_or(t.perturb.lambda_min);
    t.perturb.lambda_max = o.lambda_max.unwrap_or(t.perturb.lambda_max);
    t.perturb.samples = o.n.unwrap_or(t.perturb.samples);
    t.dropout = o.dropout.unwrap_or(t.dropout);
    let result = run(&cfg).map_err(core)?;
    let log = result.log_text();
    out.write_all(log.as_bytes()).map_err(io)?;
    writeln!(out, "baseline_pq={:?} final_pq={:?}", result.baseline_pq, result.final_pq).map_err(io)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
        write_file(&dir.join("config.txt"), cfg.to_text().as_bytes())?;
        write_file(&dir.join("train.log"), log.as_bytes())?;
        write_file(&dir.join("model_initial.txt"), serialize_model(&result.initial_model).as_bytes())?;
        write_file(&dir.join("model_final.txt"), serialize_model(&result.final_model).as_bytes())?;
    }
    Ok(())
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn cmd_gen(prefix: &Path, seed: u64, spec: &TaskSpec, out: &mut dyn Write) -> CmdResult {
    let task = gen_task(seed, spec).map_err(core)?;
    let model = LinearCostModel::identity(spec.num_classes(), task.edge_dim, 1.0, 1.0);
    let g = model.costs(&task).map_err(core)?;
    let grid = Some((task.height, task.width));
    let (inst, gt) = (with_suffix(prefix, "amwc"), with_suffix(prefix, "gt"));
    write_file(&inst, serialize_instance(&g, grid).as_bytes())?;
    write_file(&gt, serialize_ground_truth(&task.ground_truth, grid).as_bytes())?;
    writeln!(out, "{}\n{}", inst.display(), gt.display()).map_err(io)
}

fn cmd_render(solution: &Path, out_path: &Path) -> CmdResult {
    let sol = parse_solution(&read(solution)?).map_err(at(solution))?;
    let img = render_pgm(&sol).ok_or_else(|| {
        input(format!("{}: rendering needs a `# grid <height> <width>` header matching the node count", solution.display()))
    })?;
    write_file(out_path, &img)
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> CmdResult {
    match cli.command {
        Command::Solve { instance, out: path, oracle } => cmd_solve(&instance, path.as_deref(), oracle, out),
        Command::Eval { solution, ground_truth } => cmd_eval(&solution, &ground_truth, out),
        Command::Gradcheck {
            seed,
            instances,
            max_nodes,
            max_classes,
            oracle_nodes,
            oracle_classes,
            lambda_min,
            lambda_max,
            n,
            inject_sign_flip,
        } => {
            let mut opts = GradcheckOptions {
                seed,
                instances,
                max_nodes,
                max_classes,
                oracle_nodes,
                oracle_classes,
                inject_sign_flip,
                ..GradcheckOptions::default()
            };
            opts.perturb.lambda_min = lambda_min;
            opts.perturb.lambda_max = lambda_max;
            opts.perturb.samples = n;
            cmd_gradcheck(&opts, out)
        }
        Command::Train { config, out: dir, seed, lambda_min, lambda_max, n, dropout } => {
            cmd_train(&config, dir.as_deref(), TrainOverrides { seed, lambda_min, lambda_max, n, dropout }, out)
        }
        Command::Gen { out: prefix, seed, height, width, instances, noise } => {
            let spec = TaskSpec { height, width, num_instances: instances, noise, ..TaskSpec::small(noise) };
            cmd_gen(&prefix, seed, &spec, out)
        }
        Command::Render { solution, out: path } => cmd_render(&solution, &path),
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return e.exit_code();
        }
    };
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}
