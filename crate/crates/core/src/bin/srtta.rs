use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use srtta::benchgen::DomainId;
use srtta::degrade::DegradationLabel;
use srtta::experiment::{self, ExperimentConfig, ExperimentMethod, FreezeSelection};

#[derive(Parser)]
#[command(name = "srtta", version, about = "Test-time adaptation for image super-resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated domain names.
    #[arg(long, value_delimiter = ',')]
    domains: Option<Vec<DomainId>>,
    /// Comma-separated methods: srtta, srtta-lifelong, tta-c, no-adapt.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<ExperimentMethod>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

impl Common {
    fn load(&self) -> srtta::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = &self.domains {
            cfg.domains = v.clone();
        }
        if let Some(v) = &self.methods {
            cfg.methods = v.clone();
        }
        if let Some(v) = self.alpha {
            cfg.adapt.alpha = v;
        }
        if let Some(v) = self.rho {
            cfg.adapt.rho = v;
        }
        if let Some(v) = self.steps {
            cfg.adapt.steps = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the SR model on clean bicubic pairs.
    Pretrain(Common),
    /// Train the degradation classifier.
    TrainClassifier(Common),
    /// Build the corrupted benchmark domains.
    Benchgen(Common),
    /// Adapt on one image and write the super-resolved PNG.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Degradation types, e.g. `noise` or `blur,jpeg` or `clean`; the
        /// classifier decides when omitted.
        #[arg(long)]
        label: Option<String>,
    },
    /// Run every configured method over every configured domain.
    Run(Common),
    /// Run the ablation grid: the cartesian product of the given axes,
    /// added to any grid in the config.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated consistency weights.
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        /// Comma-separated freeze ratios.
        #[arg(long, value_delimiter = ',')]
        rhos: Vec<f64>,
        /// Comma-separated step counts.
        #[arg(long = "step-counts", value_delimiter = ',')]
        step_counts: Vec<usize>,
        /// Comma-separated selections: fisher, random, stochastic.
        #[arg(long, value_delimiter = ',')]
        selections: Vec<FreezeSelection>,
    },
}

fn parse_label(s: &str) -> Result<DegradationLabel, String> {
    let mut l = DegradationLabel::CLEAN;
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part {
            "blur" => l.blur = true,
            "noise" => l.noise = true,
            "jpeg" => l.jpeg = true,
            "clean" => {}
            other => return Err(format!("unknown degradation type `{other}`")),
        }
    }
    Ok(l)
}

fn run(cli: Cli) -> srtta::Result<()> {
    match cli.command {
        Command::Pretrain(c) => {
            let r = experiment::pretrain(&c.load()?)?;
            println!("held-out PSNR {:.3} dB, bicubic {:.3} dB, gain {:.3} dB", r.val_psnr, r.val_psnr_bicubic, r.gain_db());
        }
        Command::TrainClassifier(c) => {
            let r = experiment::train_degradation_classifier(&c.load()?)?;
            println!("held-out accuracy blur {:.3} noise {:.3} jpeg {:.3}", r.val_accuracy[0], r.val_accuracy[1], r.val_accuracy[2]);
        }
        Command::Benchgen(c) => {
            for ds in experiment::benchgen(&c.load()?)? {
                println!("{}: {} images", ds.domain, ds.entries.len());
            }
        }
        Command::Adapt { common, input, output, label } => {
            let label = label.map(|s| parse_label(&s)).transpose().map_err(srtta::Error::Config)?;
            let (label, a) = experiment::adapt_file(&common.load()?, &input, &output, label)?;
            let last = a.losses.last().map(|l| format!("{:.5}", l.total)).unwrap_or_else(|| "-".into());
            println!("label {label}, {} steps, final loss {last}, wrote {}", a.losses.len(), output.display());
        }
        Command::Run(c) => {
            let out = experiment::run_experiment(&c.load()?)?;
            for cell in &out.summary.cells {
                let psnr = cell.psnr_db.map(|v| format!("{v:.3}")).unwrap_or_else(|| "error".into());
                println!("{:<18} {:<16} {psnr} dB", cell.domain, cell.method);
            }
        }
        Command::Ablate { common, alphas, rhos, step_counts, selections } => {
            let mut cfg = common.load()?;
            cfg.ablation.alpha.extend(alphas);
            cfg.ablation.rho.extend(rhos);
            cfg.ablation.steps.extend(step_counts);
            cfg.ablation.selection.extend(selections);
            for r in experiment::ablate(&cfg)? {
                let psnr = r.psnr_db.map(|v| format!("{v:.3}")).unwrap_or_else(|| "error".into());
                let drop = r.clean_drop_db.map(|v| format!(", clean drop {v:.3} dB")).unwrap_or_default();
                println!(
                    "alpha {} rho {} steps {} {} {} {}: {psnr} dB{drop}",
                    r.alpha,
                    r.rho,
                    r.steps,
                    r.selection.name(),
                    r.method,
                    r.domain
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
