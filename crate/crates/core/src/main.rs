// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use minituple::bench::{run_benchmark, BenchConfig, BenchMode, BenchResult, SinkKind};
use minituple::skim::{self, run_skim, SkimConfig, Strategy};
use minituple::{CodecId, Compression, Reader, WriteMode, WriterOptions};

#[derive(Parser)]
#[command(name = "minituple", version, about = "Parallel columnar writer: benchmarks and skimming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weak-scaling write benchmark.
    Bench(BenchArgs),
    /// Skim partitioned inputs according to a JSON config.
    Skim(SkimArgs),
    /// Generate synthetic skim inputs and a matching config.
    GenSkim(GenArgs),
    /// Print the schema and cluster layout of a file.
    Inspect { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum SinkArg {
    Null,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Buffered,
    Unbuffered,
    SeparateFiles,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Parallel,
    SeparateMerge,
    Imt,
}

#[derive(Args)]
struct WriterArgs {
    #[arg(long, default_value = "zstd")]
    codec: String,
    /// Codec level; 0 selects the codec default.
    #[arg(long, default_value_t = 0)]
    level: i32,
    #[arg(long, default_value_t = 65536)]
    page_bytes: u32,
    #[arg(long, default_value_t = 50 * 1024 * 1024)]
    cluster_bytes: u64,
    #[arg(long)]
    preallocate: bool,
    #[arg(long)]
    decoupled_write: bool,
}

impl WriterArgs {
    fn options(&self, mode: WriteMode) -> Result<WriterOptions, minituple::Error> {
        let codec: CodecId = self.codec.parse()?;
        Ok(WriterOptions {
            target_page_bytes: self.page_bytes,
            target_cluster_bytes: self.cluster_bytes,
            compression: Compression { codec, level: self.level },
            preallocate: self.preallocate,
            decoupled_write: self.decoupled_write,
            mode,
            ..WriterOptions::default()
        })
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Entries per thread.
    #[arg(long, default_value_t = 1_000_000)]
    entries: u64,
    #[arg(long, value_enum, default_value = "null")]
    sink: SinkArg,
    /// Output file for `--sink file`.
    #[arg(long, default_value = "bench.mnt")]
    sink_path: PathBuf,
    #[arg(long, value_enum, default_value = "buffered")]
    mode: ModeArg,
    #[command(flatten)]
    writer: WriterArgs,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Results file; CSV if it ends in `.csv`, JSON otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SkimArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    files_per_partition: usize,
    #[arg(long, default_value_t = 100_000)]
    entries_per_file: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn bench(args: BenchArgs) -> CliResult {
    let (mode, write_mode) = match args.mode {
        ModeArg::Buffered => (BenchMode::Buffered, WriteMode::Buffered),
        ModeArg::Unbuffered => (BenchMode::Unbuffered, WriteMode::Unbuffered),
        ModeArg::SeparateFiles => (BenchMode::SeparateFiles, WriteMode::Buffered),
    };
    let config = BenchConfig {
        threads: args.threads,
        entries_per_thread: args.entries,
        sink: match args.sink {
            SinkArg::Null => SinkKind::Null,
            SinkArg::File => SinkKind::File(args.sink_path),
        },
        mode,
        options: args.writer.options(write_mode)?,
        repetitions: args.reps,
        seed: args.seed,
    };
    let result = run_benchmark(&config)?;
    let text = match &args.out {
        Some(p) if p.extension().is_some_and(|e| e == "csv") => format!("{}\n{}\n", BenchResult::CSV_HEADER, result.csv_row()),
        _ => serde_json::to_string_pretty(&result)? + "\n",
    };
    match args.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn skim_cmd(args: SkimArgs) -> CliResult {
    let mut config = SkimConfig::from_json_file(&args.config)?;
    if let Some(t) = args.threads {
        config.threads = t;
    }
    if let Some(s) = args.strategy {
        config.strategy = match s {
            StrategyArg::Parallel => Strategy::Parallel,
            StrategyArg::SeparateMerge => Strategy::SeparateMerge,
            StrategyArg::Imt => Strategy::Imt,
        };
    }
    if let Some(d) = args.out_dir {
        config.output_dir = d;
    }
    let report = run_skim(&config)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match args.report {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn gen_skim(args: GenArgs) -> CliResult {
    let inputs = skim::generate_inputs(
        &args.dir,
        &skim::AGC_PARTITIONS,
        args.files_per_partition,
        args.entries_per_file,
        args.seed,
        &WriterOptions::default(),
    )?;
    let config = SkimConfig {
        inputs: inputs
            .into_iter()
            .map(|mut i| {
                i.path = i.path.file_name().map(PathBuf::from).unwrap_or(i.path);
                i
            })
            .collect(),
        rules: skim::agc_rules(),
        threads: 1,
        writer: WriterOptions::default(),
        output_dir: PathBuf::from("out"),
        strategy: Strategy::Parallel,
        keep_intermediate: false,
    };
    fs::write(args.dir.join("skim.json"), serde_json::to_string_pretty(&config)? + "\n")?;
    println!("{}", args.dir.join("skim.json").display());
    Ok(())
}

fn inspect(path: PathBuf) -> CliResult {
    let r = Reader::open(&path)?;
    println!("schema: {}", r.schema().type_spec(0));
    println!("codec: {:?}", r.default_codec());
    println!("entries: {}  bytes: {}  uncompressed: {}", r.n_entries(), r.file_len(), r.uncompressed_bytes());
    for (k, c) in r.footer().clusters.iter().enumerate() {
        let pages: usize = c.columns.iter().map(|col| col.pages.len()).sum();
        println!("cluster {k}: entries [{}, {})  pages {pages}", c.first_entry, c.first_entry + c.n_entries);
    }
    Ok(())
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Bench(a) => bench(a),
        Command::Skim(a) => skim_cmd(a),
        Command::GenSkim(a) => gen_skim(a),
        Command::Inspect { path } => inspect(path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
