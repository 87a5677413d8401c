use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use swipecut_core::harness::{run_batch, run_session, write_records_csv, OracleMode};
use swipecut_core::{start_session, synthetic, Params, SegmentationMask, SessionState};

pub const DEFAULT_PORT: u16 = 8000;
pub const PORT_ENV: &str = "SWIPECUT_PORT";

#[derive(Debug, Parser)]
#[command(name = "swipecut", version, about = "Swipe-driven interactive figure-ground segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment one image, against a ground-truth oracle or interactively on the terminal.
    Segment(SegmentArgs),
    /// Run oracle sessions over every `<stem>.png` / `<stem>_gt.png` pair in a directory.
    Batch(BatchArgs),
    /// Start the local HTTP service.
    Serve(ServeArgs),
    /// Write the synthetic evaluation suite.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Seeds per round.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Minimum distance between seeds of one round, in pixels.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Stroke hit radius, in pixels.
    #[arg(long)]
    pub hit_radius: Option<f64>,
    /// Target superpixel count.
    #[arg(long)]
    pub superpixels: Option<usize>,
    #[arg(long)]
    pub theta_t: Option<f64>,
    #[arg(long)]
    pub theta_s: Option<f64>,
    /// Minimum superpixels per tree.
    #[arg(long)]
    pub min_tree: Option<usize>,
    /// Round budget.
    #[arg(long)]
    pub rounds: Option<usize>,
}

impl ParamArgs {
    pub fn params(&self) -> Result<Params> {
        let d = Params::default();
        let p = Params {
            n_superpixels: self.superpixels.unwrap_or(d.n_superpixels),
            theta_t: self.theta_t.unwrap_or(d.theta_t),
            min_tree_superpixels: self.min_tree.unwrap_or(d.min_tree_superpixels),
            theta_s: self.theta_s.unwrap_or(d.theta_s),
            theta_k: self.seeds.unwrap_or(d.theta_k),
            theta_d_px: self.radius.unwrap_or(d.theta_d_px),
            hit_radius_px: self.hit_radius.unwrap_or(d.hit_radius_px),
            rounds: self.rounds.unwrap_or(d.rounds),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    pub image: PathBuf,
    /// Ground-truth mask; answers every query automatically.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Oracle answers with the superpixel's majority label instead of the centroid pixel.
    #[arg(long)]
    pub majority: bool,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    pub dir: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub majority: bool,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Overridden by the SWIPECUT_PORT environment variable.
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    /// Seconds of inactivity before a session is dropped.
    #[arg(long, default_value_t = 1800)]
    pub idle_timeout: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub dir: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = synthetic::DEFAULT_WIDTH)]
    pub width: u32,
    #[arg(long, default_value_t = synthetic::DEFAULT_HEIGHT)]
    pub height: u32,
}

fn mode(majority: bool) -> OracleMode {
    if majority {
        OracleMode::Majority
    } else {
        OracleMode::Centroid
    }
}

/// The environment variable wins over the flag.
pub fn resolve_port(flag: u16, env: Option<&str>) -> Result<u16> {
    match env {
        Some(v) => v.trim().parse().with_context(|| format!("{PORT_ENV}={v:?} is not a port number")),
        None => Ok(flag),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string()
}

fn load_image(path: &Path) -> Result<image::RgbImage> {
    Ok(image::open(path).with_context(|| format!("cannot read image {}", path.display()))?.to_rgb8())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Segment(args) => {
            let stdin = std::io::stdin();
            segment(&args, stdin.lock(), std::io::stdout())
        }
        Command::Batch(args) => batch(&args, std::io::stdout()),
        Command::Serve(args) => {
            let port = resolve_port(args.port, std::env::var(PORT_ENV).ok().as_deref())?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::server::serve(port, Duration::from_secs(args.idle_timeout)))
        }
        Command::Synth(args) => {
            synthetic::write_suite(&args.dir, args.count, args.width, args.height)?;
            println!("wrote {} image pairs to {}", args.count, args.dir.display());
            Ok(())
        }
    }
}

/// Oracle run with `--gt`, terminal loop otherwise. Nothing is written unless all inputs load.
pub fn segment(args: &SegmentArgs, input: impl BufRead, mut out: impl Write) -> Result<()> {
    let params = args.params.params()?;
    let image = load_image(&args.image)?;
    let name = stem(&args.image);
    let mask_path = args.out_dir.join(format!("{name}_mask.png"));

    let Some(gt_path) = &args.gt else {
        let (mut state, _) = start_session(&image, params)?;
        interactive(&mut state, input, &mut out)?;
        let mask = state.current_mask().context("no labels were given")?;
        std::fs::create_dir_all(&args.out_dir)?;
        mask.save(&mask_path)?;
        writeln!(out, "mask written to {}", mask_path.display())?;
        return Ok(());
    };

    let gt = SegmentationMask::load(gt_path).with_context(|| format!("cannot read mask {}", gt_path.display()))?;
    let report = run_session(&name, &image, &gt, &params, mode(args.majority))?;
    std::fs::create_dir_all(&args.out_dir)?;
    let csv_path = args.out_dir.join(format!("{name}.csv"));
    write_records_csv(&csv_path, &report.records)?;
    if let Some(mask) = &report.mask {
        mask.save(&mask_path)?;
    }
    let last = report.records.last().map_or(0.0, |r| r.dice);
    writeln!(
        out,
        "{name}: {} rounds, final dice {last:.4}, upper bound {:.4}, preprocessing {:.0} ms",
        report.records.len(),
        report.upper_bound,
        report.preprocessing_ms
    )?;
    writeln!(out, "records written to {}", csv_path.display())?;
    Ok(())
}

/// Terminal fallback: prints each round's seeds and reads one `0`/`1` per seed.
/// `done` or end of input stops early.
pub fn interactive(state: &mut SessionState, mut input: impl BufRead, mut out: impl Write) -> Result<()> {
    while let Some(pending) = state.pending.clone() {
        writeln!(out, "round {}: {} seeds", state.round + 1, pending.len())?;
        for (i, s) in pending.seeds.iter().enumerate() {
            writeln!(out, "  {i}: ({:.0}, {:.0})", s.centroid[0], s.centroid[1])?;
        }
        let labels = loop {
            write!(out, "labels> ")?;
            out.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                return Ok(());
            }
            let line = line.trim();
            if line == "done" {
                return Ok(());
            }
            match parse_labels(line, pending.len()) {
                Ok(l) => break l,
                Err(e) => writeln!(out, "{e}")?,
            }
        };
        state.apply_labels(&labels)?;
    }
    writeln!(out, "round budget reached")?;
    Ok(())
}

/// `"10100"` to `[1, 0, 1, 0, 0]`; whitespace is ignored.
pub fn parse_labels(line: &str, expected: usize) -> Result<Vec<u8>> {
    let labels = line
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => bail!("unexpected {other:?}; type one 0 or 1 per seed"),
        })
        .collect::<Result<Vec<u8>>>()?;
    if labels.len() != expected {
        bail!("expected {expected} labels, got {}", labels.len());
    }
    Ok(labels)
}

pub fn batch(args: &BatchArgs, mut out: impl Write) -> Result<()> {
    let params = args.params.params()?;
    let summary = run_batch(&args.dir, &params, mode(args.majority))
        .with_context(|| format!("cannot read dataset {}", args.dir.display()))?;
    if summary.reports.is_empty() {
        bail!("no usable image pairs in {}", args.dir.display());
    }
    std::fs::create_dir_all(&args.out_dir)?;
    summary.write_records_csv(args.out_dir.join("records.csv"))?;
    summary.write_curve_csv(args.out_dir.join("curve.csv"))?;
    for (stem, reason) in &summary.skipped {
        writeln!(out, "skipped {stem}: {reason}")?;
    }
    let t = &summary.timing;
    writeln!(
        out,
        "{} images; round ms mean {:.3} p50 {:.3} p90 {:.3} p99 {:.3}; preprocessing ms p50 {:.0} max {:.0}",
        summary.reports.len(),
        t.round_ms_mean,
        t.round_ms_p50,
        t.round_ms_p90,
        t.round_ms_p99,
        t.preprocessing_ms_p50,
        t.preprocessing_ms_max
    )?;
    if let Some((round, m)) = summary.curve.last() {
        writeln!(out, "median dice after round {round}: {m:.4}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_parse() {
        assert_eq!(parse_labels("10 1", 3).unwrap(), vec![1, 0, 1]);
        assert!(parse_labels("102", 3).is_err());
        assert!(parse_labels("10", 3).is_err());
    }

    #[test]
    fn env_port_wins() {
        assert_eq!(resolve_port(8000, None).unwrap(), 8000);
        assert_eq!(resolve_port(8000, Some("9123")).unwrap(), 9123);
        assert!(resolve_port(8000, Some("http")).is_err());
    }

    #[test]
    fn flags_map_to_params() {
        let cli = Cli::parse_from([
            "swipecut", "segment", "a.png", "--seeds", "1", "--radius", "40", "--hit-radius", "10",
            "--superpixels", "300", "--theta-t", "1000", "--theta-s", "0.5", "--min-tree", "2", "--rounds", "7",
        ]);
        let Command::Segment(args) = cli.command else { panic!("wrong subcommand") };
        let p = args.params.params().unwrap();
        assert_eq!(
            p,
            Params {
                n_superpixels: 300,
                theta_t: 1000.0,
                min_tree_superpixels: 2,
                theta_s: 0.5,
                theta_k: 1,
                theta_d_px: 40.0,
                hit_radius_px: 10.0,
                rounds: 7,
            }
        );
        assert!(ParamArgs { seeds: Some(0), ..Default::default() }.params().is_err());
    }
}
