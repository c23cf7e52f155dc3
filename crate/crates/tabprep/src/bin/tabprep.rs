use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use tabprep::bench::{csv_writer, run_bench, BenchSpec, EngineKind};
use tabprep::core::{InputEncoding, PipelineConfig, SpillMode};
use tabprep::engine::{run_columnwise_with_vocab, RunStats};
use tabprep::gen::{generate_file, GenSpec};
use tabprep::io::{convert_to_binary, create_output};
use tabprep::net::{self, ClientOptions, ServeOptions, SERVER_ENV};
use tabprep::verify::{compare_files, Verdict};
use tabprep::{run_rowwise_baseline, Dataset, Error, Result};

#[derive(Parser)]
#[command(name = "tabprep", version, about = "Two-pass preprocessing for Criteo-shaped tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic text dataset.
    GenData {
        #[arg(long)]
        rows: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        missing_prob: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Preprocess a dataset locally.
    Preprocess {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "columnwise")]
        engine: EngineKind,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Write the first-pass vocabularies to this sidecar file.
        #[arg(long)]
        vocab_out: Option<PathBuf>,
        /// Append run statistics as CSV to this file ("-" for stdout).
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Decode a text dataset into the binary record format.
    ToBinary {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the network preprocessing server.
    Serve {
        #[arg(long, env = SERVER_ENV, default_value = "127.0.0.1:7070")]
        listen: String,
        /// Seconds a session may wait on its client; 0 disables.
        #[arg(long, default_value_t = 60)]
        idle_timeout: u64,
        /// Exit after this many connections.
        #[arg(long)]
        max_connections: Option<usize>,
        /// Working-buffer budget per session in MiB.
        #[arg(long)]
        buffer_budget_mib: Option<usize>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Stream a dataset through a server and save the result.
    Send {
        input: PathBuf,
        #[arg(long, env = SERVER_ENV, default_value = "127.0.0.1:7070")]
        server: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = tabprep::core::wire::MAX_PAYLOAD)]
        frame_bytes: usize,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Time the engines over a sweep of settings and print CSV.
    Bench {
        /// Text dataset to use; generated from --rows/--seed otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        rows: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        missing_prob: f64,
        #[arg(long, value_delimiter = ',', default_values = ["columnwise", "rowwise"])]
        engine: Vec<EngineKind>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 8, 16])]
        threads: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values = ["utf8", "binary"])]
        encoding: Vec<InputEncoding>,
        #[arg(long, value_delimiter = ',', default_values_t = [5000, 1_000_000])]
        modulus: Vec<u32>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long)]
        channel_capacity: Option<usize>,
        #[arg(long)]
        spill: Option<SpillMode>,
        #[arg(long)]
        no_log: bool,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two output files byte for byte.
    Verify { a: PathBuf, b: PathBuf },
}

/// Pipeline settings: defaults, then the config file, then flags.
#[derive(Args)]
struct PipelineArgs {
    /// key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    modulus: Option<u32>,
    /// Row-wise worker threads.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    encoding: Option<InputEncoding>,
    #[arg(long)]
    channel_capacity: Option<usize>,
    #[arg(long)]
    spill: Option<SpillMode>,
    /// Decoder group width, 1 or 4.
    #[arg(long)]
    group_width: Option<usize>,
    /// Skip the logarithm on dense features.
    #[arg(long)]
    no_log: bool,
    /// Keep decoded rows in memory between passes.
    #[arg(long)]
    cache: bool,
}

impl PipelineArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_text(&std::fs::read_to_string(path)?)?;
        }
        if let Some(m) = self.modulus {
            cfg.modulus = m;
        }
        if let Some(t) = self.threads {
            cfg.rowwise_threads = t;
        }
        if let Some(e) = self.encoding {
            cfg.input_encoding = e;
        }
        if let Some(c) = self.channel_capacity {
            cfg.channel_capacity = c;
        }
        if let Some(s) = self.spill {
            cfg.intermediate_spill = s;
        }
        if let Some(w) = self.group_width {
            cfg.decode_group_width = w;
        }
        if self.no_log {
            cfg.apply_log = false;
        }
        if self.cache {
            cfg.cache_records = true;
        }
        Ok(cfg.validate()?)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        None => Box::new(io::stdout().lock()),
        Some(p) if p == Path::new("-") => Box::new(io::stdout().lock()),
        Some(p) => Box::new(File::create(p)?),
    })
}

fn write_stats(path: &Path, engine: EngineKind, stats: &RunStats) -> Result<()> {
    let fresh = path == Path::new("-") || !path.exists();
    let out: Box<dyn Write> = if path == Path::new("-") {
        Box::new(io::stdout().lock())
    } else {
        Box::new(File::options().create(true).append(true).open(path)?)
    };
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Io(io::Error::other(e));
    if fresh {
        let mut h = vec!["engine".to_string()];
        h.extend(RunStats::csv_header());
        w.write_record(&h).map_err(wrap)?;
    }
    let mut r = vec![engine.to_string()];
    r.extend(stats.csv_record());
    w.write_record(&r).map_err(wrap)?;
    w.flush()?;
    Ok(())
}

fn summary(stats: &RunStats) {
    eprintln!(
        "{} rows, pass 1 {:.3}s, pass 2 {:.3}s, {:.0} rows/s",
        stats.rows_processed, stats.pass1_seconds, stats.pass2_seconds, stats.rows_per_second
    );
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenData {
            rows,
            seed,
            missing_prob,
            out,
        } => {
            generate_file(&GenSpec::new(rows, seed).missing(missing_prob), &out)?;
        }
        Command::Preprocess {
            input,
            out,
            engine,
            pipeline,
            vocab_out,
            stats: stats_path,
        } => {
            let cfg = pipeline.resolve()?;
            let mut sink = create_output(&out)?;
            let stats = match engine {
                EngineKind::Columnwise => {
                    let src = Dataset::open(&input, cfg.input_encoding)?;
                    let (stats, vocab) = run_columnwise_with_vocab(&src, &cfg, &mut sink)?;
                    if let Some(p) = &vocab_out {
                        vocab.write_sidecar(p)?;
                    }
                    stats
                }
                EngineKind::Rowwise => {
                    if vocab_out.is_some() {
                        log::warn!("--vocab-out is only supported by the columnwise engine");
                    }
                    let src = Dataset::load(&input, cfg.input_encoding)?;
                    run_rowwise_baseline(&src, &cfg, &mut sink, cfg.rowwise_threads)?
                }
            };
            sink.finish()?;
            summary(&stats);
            if let Some(p) = &stats_path {
                write_stats(p, engine, &stats)?;
            }
        }
        Command::ToBinary { input, out } => {
            let rows = convert_to_binary(&input, &out)?;
            eprintln!("{rows} rows");
        }
        Command::Serve {
            listen,
            idle_timeout,
            max_connections,
            buffer_budget_mib,
            pipeline,
        } => {
            let cfg = pipeline.resolve()?;
            let opts = ServeOptions {
                idle_timeout: (idle_timeout > 0).then(|| Duration::from_secs(idle_timeout)),
                max_connections,
                buffer_budget: buffer_budget_mib.map(|m| m << 20),
            };
            let server = net::bind(&listen, &cfg, opts)?;
            eprintln!("listening on {}", server.local_addr()?);
            server.run()?;
        }
        Command::Send {
            input,
            server,
            out,
            frame_bytes,
            pipeline,
        } => {
            let cfg = pipeline.resolve()?;
            let opts = ClientOptions {
                frame_bytes,
                ..ClientOptions::default()
            };
            let report = net::client_send_with(&input, &server, &out, &cfg, &opts)?;
            summary(&report.stats);
        }
        Command::Bench {
            input,
            rows,
            seed,
            missing_prob,
            engine,
            threads,
            encoding,
            modulus,
            reps,
            channel_capacity,
            spill,
            no_log,
            out,
        } => {
            let mut base = PipelineConfig::default();
            if let Some(c) = channel_capacity {
                base.channel_capacity = c;
            }
            if let Some(s) = spill {
                base.intermediate_spill = s;
            }
            base.apply_log = !no_log;
            let spec = BenchSpec {
                engines: engine,
                threads,
                encodings: encoding,
                moduli: modulus,
                reps,
                base: base.validate()?,
            };
            let src = match input {
                Some(p) => Dataset::load(p, InputEncoding::Utf8)?,
                None => {
                    let text = tabprep::gen::generate_bytes(
                        &GenSpec::new(rows, seed).missing(missing_prob),
                    )?;
                    Dataset::from_bytes(InputEncoding::Utf8, text)
                }
            };
            let mut w = csv_writer(output(out.as_deref())?);
            let results = run_bench(&spec, &src, |row| {
                w.serialize(row)
                    .map_err(|e| Error::Io(io::Error::other(e)))?;
                Ok(w.flush()?)
            })?;
            let failed = results.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} of {} cells failed", results.len());
                return Ok(ExitCode::from(1));
            }
        }
        Command::Verify { a, b } => match compare_files(&a, &b)? {
            Verdict::Equal { bytes } => println!("equal ({bytes} bytes)"),
            Verdict::Differ(d) => {
                println!("{d}");
                return Ok(ExitCode::from(1));
            }
        },
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
