use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sarsim::export::{
    write_band_curve, write_csv_rows, write_json, write_mission_outputs, write_targets, RunSummary, ValidationSummary,
};
use sarsim::mission_sim::{monte_carlo_validate, run_mission};
use sarsim::scenario::{load_scenario, Scenario};
use sarsim::sensing::RecallTable;
use sarsim::tiling::{
    format_labels, load_label_dir, load_manifest, parse_detections, parse_labels, plan_tiles, recall_per_bin,
    remap_labels, CONFIDENCE_MIN, IOU_MIN, KEEP_FRACTION, MIN_OVERLAP, TILE_SIZE,
};
use sarsim::Error;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "sarsim", version, about = "Terrain-aware UAV search simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mission and write logs, the accomplishment curve and fields.
    Simulate(ScenarioArgs),
    /// Run a mission with Monte Carlo targets and check the predicted curve.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Synthetic targets per seed; defaults to the scenario's count.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        targets: Option<u64>,
        /// Number of consecutive seeds starting at the scenario seed.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
    },
    /// Split images into overlapping tiles and remap their labels.
    Tile {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of `<image-id>.txt` ground-truth labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = TILE_SIZE)]
        tile_size: u32,
        #[arg(long, default_value_t = MIN_OVERLAP)]
        min_overlap: u32,
        #[arg(long, default_value_t = KEEP_FRACTION)]
        keep: f64,
    },
    /// Recall per GSD bin, or print a recall table.
    Recall {
        #[arg(long, required_unless_present = "echo_table")]
        manifest: Option<PathBuf>,
        #[arg(long, required_unless_present = "echo_table")]
        gt: Option<PathBuf>,
        #[arg(long, required_unless_present = "echo_table")]
        pred: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = CONFIDENCE_MIN)]
        conf: f64,
        #[arg(long, default_value_t = IOU_MIN)]
        iou: f64,
        /// Print a recall table file (or the built-in one) in canonical form.
        #[arg(long, num_args = 0..=1, conflicts_with_all = ["manifest", "gt", "pred"])]
        echo_table: Option<Option<PathBuf>>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    scenario: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cell_size: Option<f64>,
    /// Scenario override `dotted.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Record wall-clock runtime in the summary.
    #[arg(long)]
    timing: bool,
}

/// Failure class: bad input (exit 2) or a failure while running (exit 1).
enum Failure {
    Input(Error),
    Runtime(Error),
}

type Outcome = Result<(), Failure>;

fn input<T>(r: sarsim::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Input)
}

fn runtime<T>(r: sarsim::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

fn load(args: &ScenarioArgs) -> Result<Scenario, Failure> {
    let mut overrides = Vec::new();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(cell) = args.cell_size {
        overrides.push(format!("grid.cell_size={cell}"));
    }
    overrides.extend(args.set.iter().cloned());
    input(load_scenario(&args.scenario, &overrides))
}

fn simulate(args: &ScenarioArgs) -> Outcome {
    let scenario = load(args)?;
    let start = Instant::now();
    let report = runtime(run_mission(&scenario.mission))?;
    let elapsed = start.elapsed().as_secs_f64();
    runtime(write_mission_outputs(&args.out, &report))?;
    let mut summary = RunSummary::new(&report, scenario.file.seed);
    summary.runtime_seconds = args.timing.then_some(elapsed);
    runtime(write_json(&args.out.join("summary.json"), &summary))?;
    println!(
        "{}: final eta {:.6}, {} constraint violations",
        report.id, summary.final_eta, summary.constraint_violations
    );
    Ok(())
}

fn validate(args: &ScenarioArgs, targets: Option<u64>, seeds: u64) -> Outcome {
    let scenario = load(args)?;
    let count = targets.map_or(scenario.file.monte_carlo.targets, |t| t as usize);
    if count == 0 {
        return Err(Failure::Input(Error::Scenario {
            path: "monte_carlo.targets".into(),
            msg: "target count must be at least 1".into(),
        }));
    }
    let first = scenario.file.seed;
    let seed_list: Vec<u64> = (0..seeds).map(|k| first.wrapping_add(k)).collect();
    let start = Instant::now();
    let mc = runtime(monte_carlo_validate(&scenario.mission, count, &seed_list))?;
    let elapsed = start.elapsed().as_secs_f64();
    runtime(write_mission_outputs(&args.out, &mc.mission))?;
    runtime(write_band_curve(&args.out.join("validation.csv"), &mc.seeds[0]))?;
    runtime(write_targets(&args.out.join("targets.csv"), &mc.seeds[0]))?;
    let validation = ValidationSummary::new(count, &mc.seeds);
    let mut summary = RunSummary::new(&mc.mission, first);
    summary.runtime_seconds = args.timing.then_some(elapsed);
    println!(
        "{}: final eta {:.6}, {} constraint violations, {} targets x {} seeds: {}",
        mc.mission.id,
        summary.final_eta,
        summary.constraint_violations,
        count,
        seed_list.len(),
        validation.verdict
    );
    summary.validation = Some(validation);
    runtime(write_json(&args.out.join("summary.json"), &summary))
}

#[derive(Serialize)]
struct TileEntry<'a> {
    image: &'a str,
    tile: String,
    row: u32,
    col: u32,
    x0: u32,
    y0: u32,
    size: u32,
    labels: usize,
}

fn tile(manifest: &Path, labels: Option<&Path>, out: &Path, tile_size: u32, min_overlap: u32, keep: f64) -> Outcome {
    if !(0.0..=1.0).contains(&keep) {
        return Err(Failure::Input(Error::Invalid(format!("--keep must be in [0, 1], got {keep}"))));
    }
    let metas = input(load_manifest(manifest))?;
    let gt = match labels {
        Some(dir) => input(load_label_dir(dir, &metas, parse_labels))?,
        None => BTreeMap::new(),
    };
    let mut plans = Vec::with_capacity(metas.len());
    for m in &metas {
        let grid = input(plan_tiles(m.width, m.height, tile_size, min_overlap))
            .map_err(|f| match f {
                Failure::Input(e) => Failure::Input(Error::Invalid(format!("image `{}`: {e}", m.id))),
                other => other,
            })?;
        plans.push(grid);
    }
    let label_dir = out.join("labels");
    runtime(fs::create_dir_all(&label_dir).map_err(|e| Error::Io { path: label_dir.clone(), source: e }))?;
    let mut entries = Vec::new();
    for (m, grid) in metas.iter().zip(&plans) {
        let image_labels = gt.get(&m.id).map_or(&[][..], Vec::as_slice);
        for t in &grid.tiles {
            let remapped = remap_labels(image_labels, m.width, m.height, t, keep);
            let name = t.name(&m.id);
            if labels.is_some() {
                let path = label_dir.join(format!("{name}.txt"));
                runtime(fs::write(&path, format_labels(&remapped)).map_err(|e| Error::Io { path, source: e }))?;
            }
            entries.push(TileEntry {
                image: &m.id,
                tile: name,
                row: t.row,
                col: t.col,
                x0: t.x0,
                y0: t.y0,
                size: t.size,
                labels: remapped.len(),
            });
        }
    }
    let count = entries.len();
    runtime(write_csv_rows(&out.join("tiles.csv"), entries))?;
    println!("{count} tiles from {} images", metas.len());
    Ok(())
}

fn recall(manifest: &Path, gt: &Path, pred: &Path, out: Option<&Path>, conf: f64, iou: f64) -> Outcome {
    let metas = input(load_manifest(manifest))?;
    let truth = input(load_label_dir(gt, &metas, parse_labels))?;
    let dets = input(load_label_dir(pred, &metas, parse_detections))?;
    let rows = input(recall_per_bin(&metas, &truth, &dets, &BTreeMap::new(), conf, iou))?;
    println!("gsd_low,gsd_high,recall,matched,support");
    for r in &rows {
        println!("{},{},{},{},{}", r.gsd_low, r.gsd_high, r.recall, r.matched, r.support);
    }
    if let Some(dir) = out {
        runtime(fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e }))?;
        runtime(write_csv_rows(&dir.join("recall.csv"), &rows))?;
    }
    Ok(())
}

fn echo_table(path: Option<&Path>) -> Outcome {
    let table = match path {
        Some(p) => input(RecallTable::load(p))?,
        None => RecallTable::builtin(),
    };
    print!("{}", table.to_text());
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Validate { scenario, targets, seeds } => validate(&scenario, targets, seeds),
        Command::Tile {
            manifest,
            labels,
            out,
            tile_size,
            min_overlap,
            keep,
        } => tile(&manifest, labels.as_deref(), &out, tile_size, min_overlap, keep),
        Command::Recall {
            echo_table: Some(path),
            ..
        } => echo_table(path.as_deref()),
        Command::Recall {
            manifest,
            gt,
            pred,
            out,
            conf,
            iou,
            ..
        } => {
            let (Some(manifest), Some(gt), Some(pred)) = (manifest, gt, pred) else {
                unreachable!("clap requires these without --echo-table")
            };
            recall(&manifest, &gt, &pred, out.as_deref(), conf, iou)
        }
    }
}

fn one_line(e: &Error) -> String {
    e.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(1)
        }
    }
}
