use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rarelab::cgan::{self, GanModel};
use rarelab::pipeline::{self, ExperimentResult};
use rarelab::psychometrics::{self, FitOptions, ResponseMatrix};
use rarelab::surrogate::{self, ItemBank};
use rarelab::{distcheck, LabeledTable, Rng};
use serde_json::{json, Value};

mod config;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "rarelab",
    version,
    about = "Rare-event classification with GAN augmentation"
)]
struct Cli {
    /// Flat TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true, env = "RARELAB_SEED")]
    seed: Option<u64>,
    /// Print a JSON summary on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the surrogate dataset.
    SynthData {
        /// Output CSV [default: <output_dir>/surrogate.csv].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Simulate raw item responses and score them with Rasch models;
        /// the response files are written next to the dataset.
        #[arg(long)]
        from_items: bool,
    },
    /// Fit a Rasch (or partial-credit) model to a raw-response CSV.
    FitRasch {
        #[arg(long)]
        responses: PathBuf,
        /// Subtracted from every response, e.g. 1 for 1-based codes.
        #[arg(long, default_value_t = 0)]
        offset: u8,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = FitOptions::default().max_iter)]
        max_iter: usize,
        #[arg(long, default_value_t = FitOptions::default().tol)]
        tol: f64,
    },
    /// Stratified train/test split.
    Split {
        /// Labelled CSV [default: `dataset` from the config].
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Train the conditional GAN.
    TrainGan {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Sample a synthetic table from a trained GAN.
    Augment {
        #[arg(long)]
        model: PathBuf,
        /// Output CSV [default: <output_dir>/gan_data.csv].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Label-0 rows [default: 134 or the config].
        #[arg(long)]
        negatives: Option<usize>,
        /// Label-1 rows [default: 126 or the config].
        #[arg(long)]
        positives: Option<usize>,
    },
    /// Compare a synthetic table against a real one.
    Fidelity {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        #[arg(long, default_value_t = distcheck::DEFAULT_BINS)]
        bins: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the six-arm experiment.
    Experiment {
        /// Labelled CSV [default: `dataset` from the config].
        #[arg(long)]
        data: Option<PathBuf>,
        /// Use this synthetic table instead of training a GAN.
        #[arg(long)]
        gan_data: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print the score and confusion tables of a saved experiment.
    Report {
        #[arg(long)]
        result: PathBuf,
        /// Also write the text here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Bad invocation that clap could not catch.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<rarelab::Error>() {
            return if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_INPUT
            };
        }
    }
    EXIT_INPUT
}

struct Outcome {
    text: String,
    json: Value,
}

struct Ctx {
    config: RunConfig,
    seed: u64,
}

impl Ctx {
    fn out_dir(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        let dir = flag
            .or_else(|| self.config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    fn out_file(&self, flag: Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
        match flag {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)
                        .with_context(|| format!("creating {}", parent.display()))?;
                }
                Ok(p)
            }
            None => Ok(self.out_dir(None)?.join(default_name)),
        }
    }

    fn dataset(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        flag.or_else(|| self.config.dataset.clone()).ok_or_else(|| {
            UsageError("no dataset: pass --data or set `dataset` in the config".into()).into()
        })
    }
}

fn read_table(path: &Path) -> Result<LabeledTable> {
    LabeledTable::read_csv_path(path).with_context(|| format!("reading {}", path.display()))
}

fn write_table(table: &LabeledTable, path: &Path) -> Result<()> {
    table
        .write_csv_path(path)
        .with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn shown(path: &Path) -> String {
    path.display().to_string()
}

fn counts_line(table: &LabeledTable) -> String {
    let [n0, n1] = table.class_counts();
    format!("{} rows ({n0} label 0, {n1} label 1)", table.len())
}

fn synth_data(ctx: &Ctx, out: Option<PathBuf>, from_items: bool) -> Result<Outcome> {
    let spec = ctx.config.surrogate(ctx.seed);
    let path = ctx.out_file(out, "surrogate.csv")?;
    let mut written = vec![shown(&path)];
    let table = if from_items {
        let s = surrogate::generate_from_items(&spec, &ItemBank::default())?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for (name, responses) in [
            ("panic_responses.csv", &s.panic_responses),
            ("suicidal_responses.csv", &s.suicidal_responses),
        ] {
            let p = dir.join(name);
            let mut w = create(&p)?;
            responses.write_csv(&mut w, 0)?;
            w.flush()?;
            written.push(shown(&p));
        }
        s.table
    } else {
        surrogate::generate(&spec)?
    };
    write_table(&table, &path)?;
    let [n0, n1] = table.class_counts();
    Ok(Outcome {
        text: format!("wrote {}: {}", shown(&path), counts_line(&table)),
        json: json!({
            "command": "synth-data",
            "rows": table.len(),
            "label_counts": [n0, n1],
            "from_items": from_items,
            "outputs": written,
        }),
    })
}

fn fit_rasch(
    ctx: &Ctx,
    responses: PathBuf,
    offset: u8,
    out_dir: Option<PathBuf>,
    options: FitOptions,
) -> Result<Outcome> {
    let file =
        File::open(&responses).with_context(|| format!("opening {}", responses.display()))?;
    let data = ResponseMatrix::read_csv(file, offset)
        .with_context(|| format!("reading {}", responses.display()))?;
    let fit = psychometrics::fit_rasch(&data, &options)?;
    let alpha = if data.is_complete() && data.items() > 1 {
        psychometrics::cronbach_alpha(&data).ok()
    } else {
        None
    };
    let dir = ctx.out_dir(out_dir)?;
    let persons = dir.join("persons.csv");
    let items = dir.join("items.csv");
    let full = dir.join("rasch_fit.json");
    let mut w = create(&persons)?;
    fit.write_person_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&items)?;
    fit.write_item_csv(&mut w)?;
    w.flush()?;
    write_json(&fit, &full)?;

    let mut text = format!(
        "{:?} model, {} persons x {} items, {} after {} sweeps\n",
        fit.model,
        data.persons(),
        data.items(),
        if fit.converged {
            "converged"
        } else {
            "NOT converged"
        },
        fit.iterations
    );
    for (name, d) in fit.item_names.iter().zip(&fit.item_difficulties) {
        text.push_str(&format!("  {name:<12} {d:>8.3}\n"));
    }
    if let Some(a) = alpha {
        text.push_str(&format!("Cronbach's alpha {a:.3}\n"));
    }
    text.push_str(&format!(
        "wrote {}, {}, {}",
        shown(&persons),
        shown(&items),
        shown(&full)
    ));
    Ok(Outcome {
        text,
        json: json!({
            "command": "fit-rasch",
            "model": fit.model,
            "persons": data.persons(),
            "items": data.items(),
            "converged": fit.converged,
            "iterations": fit.iterations,
            "item_difficulties": fit.item_difficulties,
            "cronbach_alpha": alpha,
            "outputs": [shown(&persons), shown(&items), shown(&full)],
        }),
    })
}

fn split(ctx: &Ctx, data: Option<PathBuf>, out_dir: Option<PathBuf>) -> Result<Outcome> {
    let table = read_table(&ctx.dataset(data)?)?;
    let (train, test) = pipeline::stratified_split(&table, &ctx.config.split(), ctx.seed)?;
    let dir = ctx.out_dir(out_dir)?;
    let (train_path, test_path) = (dir.join("train.csv"), dir.join("test.csv"));
    write_table(&train, &train_path)?;
    write_table(&test, &test_path)?;
    Ok(Outcome {
        text: format!(
            "train {}: {}\ntest  {}: {}",
            shown(&train_path),
            counts_line(&train),
            shown(&test_path),
            counts_line(&test)
        ),
        json: json!({
            "command": "split",
            "train_counts": train.class_counts(),
            "test_counts": test.class_counts(),
            "outputs": [shown(&train_path), shown(&test_path)],
        }),
    })
}

fn save_gan(model: &GanModel, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let model_path = dir.join("gan_model.json");
    let loss_path = dir.join("gan_loss.csv");
    model
        .save(&model_path)
        .with_context(|| format!("writing {}", model_path.display()))?;
    let mut w = create(&loss_path)?;
    cgan::write_loss_csv(model, &mut w)?;
    w.flush()?;
    Ok((model_path, loss_path))
}

fn final_loss(model: &GanModel) -> Value {
    match model.loss_history.last() {
        Some(l) => json!({ "g_loss": l.g_loss, "d_loss": l.d_loss }),
        None => Value::Null,
    }
}

fn train_gan(ctx: &Ctx, train: PathBuf, out_dir: Option<PathBuf>) -> Result<Outcome> {
    let table = read_table(&train)?;
    let model = cgan::train_gan(&table, &ctx.config.gan(ctx.seed))?;
    let dir = ctx.out_dir(out_dir)?;
    let (model_path, loss_path) = save_gan(&model, &dir)?;
    let mut text = format!(
        "trained {} epochs on {}",
        model.epochs_trained(),
        counts_line(&table)
    );
    if let Some(l) = model.loss_history.last() {
        text.push_str(&format!(
            "\nfinal loss: generator {:.4}, discriminator {:.4}",
            l.g_loss, l.d_loss
        ));
    }
    text.push_str(&format!(
        "\nwrote {}, {}",
        shown(&model_path),
        shown(&loss_path)
    ));
    Ok(Outcome {
        text,
        json: json!({
            "command": "train-gan",
            "epochs": model.epochs_trained(),
            "final_loss": final_loss(&model),
            "outputs": [shown(&model_path), shown(&loss_path)],
        }),
    })
}

fn sample_rng(seed: u64) -> Rng {
    Rng::new(seed).derive("gan.sample")
}

fn augment(
    ctx: &Ctx,
    model: PathBuf,
    out: Option<PathBuf>,
    negatives: Option<usize>,
    positives: Option<usize>,
) -> Result<Outcome> {
    let gan = GanModel::load(&model).with_context(|| format!("loading {}", model.display()))?;
    let [d0, d1] = ctx.config.sample_counts();
    let counts = [negatives.unwrap_or(d0), positives.unwrap_or(d1)];
    let table = cgan::sample(&gan, counts, &mut sample_rng(ctx.seed))?;
    let path = ctx.out_file(out, "gan_data.csv")?;
    write_table(&table, &path)?;
    Ok(Outcome {
        text: format!("wrote {}: {}", shown(&path), counts_line(&table)),
        json: json!({
            "command": "augment",
            "rows": table.len(),
            "label_counts": table.class_counts(),
            "outputs": [shown(&path)],
        }),
    })
}

fn opt3(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

fn fidelity(
    ctx: &Ctx,
    real: PathBuf,
    synth: PathBuf,
    bins: usize,
    out_dir: Option<PathBuf>,
) -> Result<Outcome> {
    let report = distcheck::compare(&read_table(&real)?, &read_table(&synth)?, bins)?;
    let dir = ctx.out_dir(out_dir)?;
    let report_path = dir.join("fidelity.json");
    let hist_path = dir.join("fidelity_histograms.csv");
    write_json(&report, &report_path)?;
    let mut w = create(&hist_path)?;
    report.write_histogram_csv(&mut w)?;
    w.flush()?;

    let mut text = format!(
        "{} real rows vs {} synthetic rows\n",
        report.real_rows, report.synth_rows
    );
    for f in &report.features {
        match &f.overall {
            distcheck::Comparison::Continuous { real, synth, ks } => text.push_str(&format!(
                "  {:<10} mean {:>7} vs {:>7}  sd {:>6} vs {:>6}  KS {}\n",
                f.name,
                opt3(real.mean),
                opt3(synth.mean),
                opt3(real.sd),
                opt3(synth.sd),
                opt3(*ks)
            )),
            distcheck::Comparison::Binary {
                real_proportion,
                synth_proportion,
                gap,
                ..
            } => text.push_str(&format!(
                "  {:<10} share of 1s {:>6} vs {:>6}  gap {}\n",
                f.name,
                opt3(*real_proportion),
                opt3(*synth_proportion),
                opt3(*gap)
            )),
        }
    }
    text.push_str(&format!(
        "wrote {}, {}",
        shown(&report_path),
        shown(&hist_path)
    ));
    Ok(Outcome {
        text,
        json: json!({
            "command": "fidelity",
            "real_rows": report.real_rows,
            "synth_rows": report.synth_rows,
            "outputs": [shown(&report_path), shown(&hist_path)],
        }),
    })
}

fn experiment(
    ctx: &Ctx,
    data: Option<PathBuf>,
    gan_data: Option<PathBuf>,
    out_dir: Option<PathBuf>,
) -> Result<Outcome> {
    let real = read_table(&ctx.dataset(data)?)?;
    let config = ctx.config.experiment();
    let dir = ctx.out_dir(out_dir)?;
    let mut written = Vec::new();
    let result = match gan_data {
        Some(path) => pipeline::run_experiment(&real, &read_table(&path)?, &config, ctx.seed)?,
        None => {
            let out = pipeline::run_pipeline(
                &real,
                &ctx.config.gan(ctx.seed),
                ctx.config.sample_counts(),
                &config,
                ctx.seed,
            )?;
            let (model_path, loss_path) = save_gan(&out.gan, &dir)?;
            let table_path = dir.join("gan_data.csv");
            write_table(&out.gan_table, &table_path)?;
            written.extend([shown(&model_path), shown(&loss_path), shown(&table_path)]);
            out.result
        }
    };
    let result_path = dir.join("experiment.json");
    let text_path = dir.join("experiment.txt");
    write_json(&result, &result_path)?;
    let summary = result.to_text_summary()?;
    fs::write(&text_path, &summary).with_context(|| format!("writing {}", text_path.display()))?;
    written.extend([shown(&result_path), shown(&text_path)]);
    Ok(Outcome {
        text: format!("{summary}\nwrote {}", written.join(", ")),
        json: json!({
            "command": "experiment",
            "arms": result.arms.iter().map(|a| json!({
                "name": a.name,
                "hyperparams": a.hyperparams,
                "test_confusion": a.test_confusion,
            })).collect::<Vec<_>>(),
            "test_sets_identical": result.test_sets_identical(),
            "outputs": written,
        }),
    })
}

fn report(result: PathBuf, out: Option<PathBuf>) -> Result<Outcome> {
    let text =
        fs::read_to_string(&result).with_context(|| format!("reading {}", result.display()))?;
    let parsed: ExperimentResult = serde_json::from_str(&text)
        .map_err(rarelab::Error::from)
        .with_context(|| format!("parsing {}", result.display()))?;
    let summary = parsed.to_text_summary()?;
    if let Some(path) = &out {
        fs::write(path, &summary).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Outcome {
        json: json!({ "command": "report", "text": summary, "outputs": out.as_deref().map(shown) }),
        text: summary,
    })
}

fn run(cli: Cli) -> Result<Outcome> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let ctx = Ctx { config, seed };
    match cli.command {
        Command::SynthData { out, from_items } => synth_data(&ctx, out, from_items),
        Command::FitRasch {
            responses,
            offset,
            out_dir,
            max_iter,
            tol,
        } => fit_rasch(
            &ctx,
            responses,
            offset,
            out_dir,
            FitOptions { max_iter, tol },
        ),
        Command::Split { data, out_dir } => split(&ctx, data, out_dir),
        Command::TrainGan { train, out_dir } => train_gan(&ctx, train, out_dir),
        Command::Augment {
            model,
            out,
            negatives,
            positives,
        } => augment(&ctx, model, out, negatives, positives),
        Command::Fidelity {
            real,
            synth,
            bins,
            out_dir,
        } => fidelity(&ctx, real, synth, bins, out_dir),
        Command::Experiment {
            data,
            gan_data,
            out_dir,
        } => experiment(&ctx, data, gan_data, out_dir),
        Command::Report { result, out } => report(result, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(outcome) => {
            // A closed pipe (e.g. `| head`) is not a failure.
            let mut stdout = std::io::stdout().lock();
            let _ = if json {
                writeln!(stdout, "{}", outcome.json)
            } else {
                writeln!(stdout, "{}", outcome.text.trim_end())
            };
            ExitCode::SUCCESS
        }
        Err(err) => {
            let code = exit_code(&err);
            if json {
                let _ = writeln!(
                    std::io::stdout(),
                    "{}",
                    json!({ "error": format!("{err:#}"), "exit_code": code })
                );
            }
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
