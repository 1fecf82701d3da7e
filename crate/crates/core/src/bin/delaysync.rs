use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use delaysync::capture::{CaptureHeader, CaptureReader, CaptureWriter};
use delaysync::export::{
    write_heatmap_png, write_ir_csv, write_summary, DelayRange, MatrixRow, MatrixWriter,
};
use delaysync::pipeline::{Pipeline, PipelineOptions, ResultBundle, SeriesFrame};
use delaysync::synth::{generate_capture, preset, ScenarioConfig};
use delaysync::{Error, Result, WindowKind};

const EXIT_INPUT: u8 = 2;
const EXIT_NO_SIGNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "delaysync", version, about = "Two-chain CSI channel sounding with delay calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the calibration pipeline over a capture.
    Sound(RunArgs),
    /// Write a synthetic capture from a scenario file or preset.
    Synth(SynthArgs),
    /// Print a capture's header and a per-frame summary.
    Inspect(InspectArgs),
    /// Run the pipeline and write CSV, matrix, summary and heatmap exports.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    capture: PathBuf,
    /// JSON pipeline options; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ref_chain: Option<usize>,
    #[arg(long)]
    target_chain: Option<usize>,
    #[arg(long)]
    dref_m: Option<f64>,
    #[arg(long)]
    kappa: Option<usize>,
    /// blackman or rect
    #[arg(long)]
    window: Option<WindowKind>,
    /// Moving-average window in frames (1 disables).
    #[arg(long)]
    ma: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    first_peak_threshold_db: Option<f64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: corridor or static.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Overrides the scenario's frame count.
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long, short)]
    out: PathBuf,
    /// Also write per-frame ground truth as JSON lines.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    capture: PathBuf,
    /// Number of frames to list.
    #[arg(long, default_value_t = 10)]
    frames: usize,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Lower edge of the exported delay range in ns.
    #[arg(long, default_value_t = -100.0, allow_hyphen_values = true)]
    min_delay_ns: f64,
    /// Upper edge of the exported delay range in ns.
    #[arg(long, default_value_t = 1000.0)]
    max_delay_ns: f64,
    /// Heatmap colour range below the maximum, dB.
    #[arg(long, default_value_t = 50.0)]
    dynamic_range_db: f64,
    #[arg(long)]
    no_png: bool,
}

impl RunArgs {
    fn options(&self) -> Result<PipelineOptions> {
        let mut o = match &self.config {
            Some(path) => serde_json::from_reader(File::open(path)?)?,
            None => PipelineOptions::default(),
        };
        if let Some(v) = self.ref_chain {
            o.ref_chain = v;
        }
        if let Some(v) = self.target_chain {
            o.target_chain = v;
        }
        if let Some(v) = self.dref_m {
            o.d_ref_m = Some(v);
        }
        if let Some(v) = self.kappa {
            o.kappa = v;
        }
        if let Some(v) = self.window {
            o.window = v;
        }
        if let Some(v) = self.ma {
            o.ma_window = Some(v);
        }
        if let Some(v) = self.first_peak_threshold_db {
            o.first_peak_threshold_db = Some(v);
        }
        Ok(o)
    }
}

/// Runs the pipeline over a capture, passing each output-series entry on.
fn run(args: &RunArgs, mut on_series: impl FnMut(&SeriesFrame) -> Result<()>) -> Result<ResultBundle> {
    let options = args.options()?;
    let reader = CaptureReader::open(&args.capture)?;
    let header = reader.header().clone();
    let mut pipeline = Pipeline::new(&header.layout, &header.params, options)?;
    pipeline.fit_flattening(reader)?;

    let mut reader = CaptureReader::open(&args.capture)?;
    for (index, frame) in reader.by_ref().enumerate() {
        for s in pipeline.process(index, frame?)?.ready {
            on_series(&s)?;
        }
    }
    let warnings = reader.warnings();
    if warnings > 0 {
        warn!("{warnings} truncated record(s) ignored");
    }
    let (mut bundle, tail) = pipeline.finish()?;
    for s in &tail {
        on_series(s)?;
    }
    bundle.counts.read_warnings = warnings;
    Ok(bundle)
}

fn print_summary(b: &ResultBundle) {
    let c = &b.counts;
    println!(
        "frames read {} calibrated {} no-signal {} swaps fixed {} pi-shifts fixed {}",
        c.frames_read, c.frames_calibrated, c.no_signal, c.swaps_fixed, c.pi_shifts_fixed
    );
    if let (Some(lo), Some(hi)) = (b.first_signal_cdf.first(), b.first_signal_cdf.last()) {
        println!(
            "first-signal delay before calibration: {:.1} .. {:.1} ns",
            lo.delay_s * 1e9,
            hi.delay_s * 1e9
        );
    }
    if let Some(db) = b.noise_floor.averaged_db {
        println!("noise floor {db:.1} dB");
    }
    for (i, t) in b.tracks.iter().enumerate() {
        let p = t.first();
        println!(
            "track {i}: frames {}..{} start {:.2} ns {:.1} dB",
            p.frame,
            t.last().frame,
            p.delay_s * 1e9,
            p.power_db
        );
    }
    if let Some(d) = b.max_path_distance_m {
        println!("max path distance {d:.1} m");
    }
}

fn sound(args: &RunArgs) -> Result<ResultBundle> {
    fs::create_dir_all(&args.out_dir)?;
    let mut matrix: Option<MatrixWriter<BufWriter<File>>> = None;
    let matrix_path = args.out_dir.join("ir_series.bin");
    let bundle = run(args, |s| {
        if matrix.is_none() {
            matrix = Some(MatrixWriter::create(&matrix_path, s.ir.len(), s.ir.delay_bin_s)?);
        }
        matrix
            .as_mut()
            .unwrap()
            .write_row(s.frame_index as u64, s.timestamp_ns, &s.ir)
    })?;
    if let Some(m) = matrix {
        m.finish()?;
    }
    write_summary(args.out_dir.join("summary.json"), &bundle)?;
    write_calibration_csv(&args.out_dir.join("calibration.csv"), &bundle)?;
    print_summary(&bundle);
    Ok(bundle)
}

fn write_calibration_csv(path: &Path, b: &ResultBundle) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "frame,tau_star_ns,theta_star_rad")?;
    for ((f, tau), theta) in b.frame_index.iter().zip(&b.tau_star_s).zip(&b.theta_star_rad) {
        writeln!(out, "{f},{:.4},{theta:.6}", tau * 1e9)?;
    }
    out.flush()?;
    Ok(())
}

fn report(args: &ReportArgs) -> Result<ResultBundle> {
    let dir = &args.run.out_dir;
    fs::create_dir_all(dir)?;
    let mut rows = Vec::new();
    let bundle = run(&args.run, |s| {
        rows.push(MatrixRow::from(s));
        Ok(())
    })?;
    if let Some(first) = rows.first() {
        let mut m = MatrixWriter::create(dir.join("ir_series.bin"), first.ir.len(), first.ir.delay_bin_s)?;
        for r in &rows {
            m.write_row(r.frame_index, r.timestamp_ns, &r.ir)?;
        }
        m.finish()?;
        let range = DelayRange {
            min_s: args.min_delay_ns * 1e-9,
            max_s: args.max_delay_ns * 1e-9,
        };
        let mut csv = BufWriter::new(File::create(dir.join("ir_series.csv"))?);
        write_ir_csv(&mut csv, &rows, range)?;
        csv.flush()?;
        if !args.no_png {
            write_heatmap_png(dir.join("heatmap.png"), &rows, range, args.dynamic_range_db)?;
        }
    }
    write_summary(dir.join("summary.json"), &bundle)?;
    write_calibration_csv(&dir.join("calibration.csv"), &bundle)?;
    print_summary(&bundle);
    Ok(bundle)
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut cfg: ScenarioConfig = match (&args.scenario, &args.preset) {
        (Some(path), _) => serde_json::from_reader(File::open(path)?)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => {
            return Err(Error::InvalidConfig("give --scenario or --preset".into()));
        }
    };
    if let Some(n) = args.frames {
        cfg.frame_count = n;
    }
    let mut header = CaptureHeader::new(cfg.layout.clone(), cfg.params.clone(), 2);
    header.metadata.insert("scenario".into(), cfg.name.clone().into());
    header.metadata.insert("seed".into(), args.seed.into());
    let mut writer = CaptureWriter::create(&args.out, header)?;
    let mut truth = match &args.truth {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    };
    for (frame, gt) in generate_capture(&cfg, args.seed)? {
        writer.write_frame(&frame)?;
        if let Some(t) = truth.as_mut() {
            serde_json::to_writer(&mut *t, &gt)?;
            t.write_all(b"\n")?;
        }
    }
    writer.finish()?;
    if let Some(mut t) = truth {
        t.flush()?;
    }
    info!("wrote {} frames of {:?}", cfg.frame_count, cfg.name);
    Ok(())
}

fn inspect(args: &InspectArgs) -> Result<()> {
    let mut reader = CaptureReader::open(&args.capture)?;
    println!("{}", serde_json::to_string_pretty(reader.header())?);
    let mut n = 0;
    let mut last_ts = None;
    for frame in reader.by_ref() {
        let frame = frame?;
        if n < args.frames {
            let chains: Vec<String> = frame
                .chains
                .iter()
                .map(|c| {
                    let rss = c.rss_dbm.map_or("-".to_string(), |r| format!("{r:.1}"));
                    format!("rss {rss} dBm power {:.2} dB", 10.0 * c.mean_power().log10())
                })
                .collect();
            println!("{n:6} t={} ns  {}", frame.timestamp_ns, chains.join(" | "));
        }
        last_ts = Some(frame.timestamp_ns);
        n += 1;
    }
    println!("{n} frames, last timestamp {:?} ns, {} warning(s)", last_ts, reader.warnings());
    Ok(())
}

fn no_signal_anywhere(b: &ResultBundle) -> bool {
    b.counts.frames_calibrated == 0
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sound(a) => sound(a).map(|b| no_signal_anywhere(&b)),
        Command::Report(a) => report(a).map(|b| no_signal_anywhere(&b)),
        Command::Synth(a) => synth(a).map(|_| false),
        Command::Inspect(a) => inspect(a).map(|_| false),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: no signal found in any frame");
            ExitCode::from(EXIT_NO_SIGNAL)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
