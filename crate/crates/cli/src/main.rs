//! Command-line front end: ingest delimited streams into sketch files,
//! query and merge them, generate synthetic streams, and grade sketches
//! against exact ground truth.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use heavy_sets::cardinality::hash64;
use heavy_sets::datagen::{
    gen_overlap, gen_zipf, read_all, read_delimited, DatagenError, Entry, OverlapSpec, ZipfSpec,
};
use heavy_sets::metrics::{evaluate, nae, ErrorReport, GroundTruth};
use heavy_sets::sketch::{SketchError, Variant};
use heavy_sets::HllSpaceSavingSets;

/// Streams beyond this many entries get a stderr warning; the generators
/// accept them but desk hardware will grind.
const ENTRY_WARN_THRESHOLD: u64 = 10_000_000;

#[derive(Parser)]
#[command(
    name = "heavy-sets",
    version,
    about = "Constant-memory sketches for the labels with the most distinct items"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sketch a delimited file and write the sketch to disk.
    Ingest(IngestArgs),
    /// Print the top labels of a sketch file.
    Query(QueryArgs),
    /// Merge sketch files left to right into one.
    ///
    /// With more than two inputs the result can depend on the order given,
    /// since every merge keeps only the largest counters.
    Merge(MergeArgs),
    /// Build ground truth and a sketch over the same stream and report
    /// error metrics.
    Eval(EvalArgs),
    /// Write a synthetic stream as two-column CSV.
    Gen(GenArgs),
    /// Measure insert throughput on a generated stream.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SketchArgs {
    /// Eviction strategy: sss (offsets), rsss (recycling), ssss (sampling).
    #[arg(long, default_value = "ssss", value_parser = parse_variant)]
    variant: Variant,
    /// Number of labels the sketch can hold.
    #[arg(long, default_value_t = 2000)]
    size: usize,
    /// Registers per cardinality counter (power of two in 16..=65536).
    #[arg(long, default_value_t = 1024)]
    registers: usize,
    /// Master seed; all hashing and generator randomness derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SketchArgs {
    fn build(&self) -> Result<HllSpaceSavingSets, CliError> {
        let (sample_seed, register_seed) = derive_seeds(self.seed);
        HllSpaceSavingSets::with_hll(
            self.variant,
            self.size,
            self.registers,
            sample_seed,
            register_seed,
        )
        .map_err(|e| CliError::Usage(e.to_string()))
    }
}

/// The sampling gate and the counters must hash independently, so two
/// sub-seeds are split off the master seed.
fn derive_seeds(master: u64) -> (u64, u64) {
    (
        hash64(b"sample", master).bits(),
        hash64(b"registers", master).bits(),
    )
}

#[derive(Args)]
struct FileInputArgs {
    /// Delimited input file.
    #[arg(long)]
    input: PathBuf,
    /// Field delimiter (single byte).
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    /// Zero-based column holding the label.
    #[arg(long, default_value_t = 0)]
    label_col: usize,
    /// Zero-based column holding the item.
    #[arg(long, default_value_t = 1)]
    item_col: usize,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: FileInputArgs,
    #[command(flatten)]
    sketch: SketchArgs,
    /// Output sketch file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// Sketch file to read.
    #[arg(long)]
    sketch: PathBuf,
    /// Number of labels to print.
    #[arg(long, default_value_t = 10)]
    topk: usize,
}

#[derive(Args)]
struct MergeArgs {
    /// Sketch files, merged left to right.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output sketch file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GeneratorArgs {
    /// Zipf stream: LABELS,EXPONENT,ENTRIES.
    #[arg(long, value_parser = parse_zipf, conflicts_with = "overlap")]
    zipf: Option<(u64, f64, u64)>,
    /// Overlap stream: UNIVERSE,COMMON,SMALL_SETS,SMALL_SIZE,HEAVY_SETS,HEAVY_SIZE.
    #[arg(long, value_parser = parse_overlap)]
    overlap: Option<(u64, u64, u64, u64, u64, u64)>,
}

impl GeneratorArgs {
    fn zipf_spec(&self, seed: u64) -> Option<ZipfSpec> {
        self.zipf.map(|(labels, exponent, entries)| ZipfSpec {
            labels,
            exponent,
            entries,
            seed,
        })
    }

    fn overlap_spec(&self, seed: u64) -> Option<OverlapSpec> {
        self.overlap.map(
            |(
                universe_size,
                common_size,
                small_sets,
                small_set_size,
                heavy_sets,
                heavy_set_size,
            )| {
                OverlapSpec {
                    universe_size,
                    common_size,
                    small_sets,
                    small_set_size,
                    heavy_sets,
                    heavy_set_size,
                    seed,
                }
            },
        )
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Delimited input file (alternative to a generator).
    #[arg(long, conflicts_with_all = ["zipf", "overlap"])]
    input: Option<PathBuf>,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    #[arg(long, default_value_t = 0)]
    label_col: usize,
    #[arg(long, default_value_t = 1)]
    item_col: usize,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[command(flatten)]
    sketch: SketchArgs,
    /// Top-k values to grade.
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 100, 1000])]
    ks: Vec<usize>,
    /// Also report the all-zero-estimator baseline per k.
    #[arg(long)]
    baseline: bool,
    /// Output form: table or lines.
    #[arg(long, default_value = "table", value_parser = ["table", "lines"])]
    format: String,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    what: GenCommand,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Zipf-distributed labels with fresh random items.
    Zipf {
        #[arg(long)]
        labels: u64,
        #[arg(long, default_value_t = 0.2)]
        exponent: f64,
        #[arg(long)]
        entries: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Overlapping sets drawn from a shared universe.
    Overlap {
        #[arg(long)]
        universe: u64,
        #[arg(long)]
        common: u64,
        #[arg(long)]
        small_sets: u64,
        #[arg(long)]
        small_size: u64,
        #[arg(long)]
        heavy_sets: u64,
        #[arg(long)]
        heavy_size: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[command(flatten)]
    sketch: SketchArgs,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::from_name(s)
        .ok_or_else(|| format!("unknown variant {s:?}; expected sss, rsss, or ssss"))
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s.as_bytes() {
        [b] => Ok(*b),
        _ => Err(format!("delimiter must be a single byte, got {s:?}")),
    }
}

fn parse_zipf(s: &str) -> Result<(u64, f64, u64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected LABELS,EXPONENT,ENTRIES".into());
    }
    let labels = parts[0].parse().map_err(|e| format!("labels: {e}"))?;
    let exponent = parts[1].parse().map_err(|e| format!("exponent: {e}"))?;
    let entries = parts[2].parse().map_err(|e| format!("entries: {e}"))?;
    Ok((labels, exponent, entries))
}

fn parse_overlap(s: &str) -> Result<(u64, u64, u64, u64, u64, u64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 6 {
        return Err("expected UNIVERSE,COMMON,SMALL_SETS,SMALL_SIZE,HEAVY_SETS,HEAVY_SIZE".into());
    }
    let mut nums = [0u64; 6];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|e| format!("{part:?}: {e}"))?;
    }
    Ok((nums[0], nums[1], nums[2], nums[3], nums[4], nums[5]))
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Incompatible(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Incompatible(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Data(msg) | CliError::Incompatible(msg) => {
                write!(f, "{msg}")
            }
        }
    }
}

impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> Self {
        match e {
            DatagenError::InvalidSpec(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap renders its own message, including help output
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("heavy-sets: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Query(args) => query(args),
        Command::Merge(args) => merge(args),
        Command::Eval(args) => eval(args),
        Command::Gen(args) => gen(args),
        Command::Bench(args) => bench(args),
    }
}

fn load_sketch(path: &Path) -> Result<HllSpaceSavingSets, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    HllSpaceSavingSets::from_bytes(&bytes)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn print_stats(sketch: &HllSpaceSavingSets) {
    let stats = sketch.stats();
    println!("inserts\t{}", stats.inserts);
    println!("gate_rejections\t{}", stats.gate_rejections);
    println!("min_scans\t{}", stats.min_scans);
    println!("evictions\t{}", stats.evictions);
}

fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let mut sketch = args.sketch.build()?;
    let mut reader = read_delimited(
        &args.input.input,
        args.input.delimiter,
        args.input.label_col,
        args.input.item_col,
    )?;
    let mut entries = 0u64;
    for entry in &mut reader {
        let entry = entry?;
        sketch.insert(&entry.label, &entry.item);
        entries += 1;
    }
    if entries == 0 && reader.lines_read() > 0 {
        return Err(DatagenError::NoValidLines.into());
    }
    let bytes = sketch.to_bytes();
    fs::write(&args.out, &bytes)?;
    println!("entries\t{entries}");
    println!("skipped\t{}", reader.skipped());
    print_stats(&sketch);
    println!("sketch_bytes\t{}", bytes.len());
    Ok(())
}

fn query(args: QueryArgs) -> Result<(), CliError> {
    let mut sketch = load_sketch(&args.sketch)?;
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    writeln!(out, "label\testimate")?;
    for (label, estimate) in sketch.top(args.topk) {
        writeln!(out, "{label}\t{estimate}")?;
    }
    Ok(())
}

fn merge(args: MergeArgs) -> Result<(), CliError> {
    let mut iter = args.inputs.iter();
    let first = iter.next().expect("clap enforces at least one input");
    let mut merged = load_sketch(first)?;
    for path in iter {
        let next = load_sketch(path)?;
        merged.merge(&next).map_err(|e| match e {
            SketchError::Incompatible => CliError::Incompatible(format!("{}: {e}", path.display())),
            other => CliError::Data(other.to_string()),
        })?;
    }
    let bytes = merged.to_bytes();
    fs::write(&args.out, &bytes)?;
    println!("merged\t{}", args.inputs.len());
    println!("labels\t{}", merged.len());
    println!("sketch_bytes\t{}", bytes.len());
    Ok(())
}

/// Streams come from a cached file or from a generator; generators are
/// re-instantiated for every pass so nothing is materialized.
enum StreamSource {
    File(Vec<Entry>),
    Zipf(ZipfSpec),
    Overlap(OverlapSpec),
}

impl StreamSource {
    fn for_each(&self, mut f: impl FnMut(&Entry)) -> Result<(), CliError> {
        match self {
            StreamSource::File(entries) => {
                for e in entries {
                    f(e);
                }
            }
            StreamSource::Zipf(spec) => {
                for e in gen_zipf(spec)? {
                    f(&e);
                }
            }
            StreamSource::Overlap(spec) => {
                for e in gen_overlap(spec)? {
                    f(&e);
                }
            }
        }
        Ok(())
    }

    fn declared_entries(&self) -> u64 {
        match self {
            StreamSource::File(entries) => entries.len() as u64,
            StreamSource::Zipf(spec) => spec.entries,
            StreamSource::Overlap(spec) => {
                spec.small_sets * spec.small_set_size + spec.heavy_sets * spec.heavy_set_size
            }
        }
    }
}

fn warn_if_large(source: &StreamSource) {
    let n = source.declared_entries();
    if n > ENTRY_WARN_THRESHOLD {
        eprintln!(
            "heavy-sets: warning: {n} entries is beyond the intended desk scale; \
             this run may take a long time"
        );
    }
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    let source = if let Some(input) = &args.input {
        let (entries, skipped) = read_all(input, args.delimiter, args.label_col, args.item_col)?;
        if skipped > 0 {
            eprintln!("heavy-sets: skipped {skipped} malformed lines");
        }
        StreamSource::File(entries)
    } else if let Some(spec) = args.generator.zipf_spec(args.sketch.seed) {
        StreamSource::Zipf(spec)
    } else if let Some(spec) = args.generator.overlap_spec(args.sketch.seed) {
        StreamSource::Overlap(spec)
    } else {
        return Err(CliError::Usage(
            "eval needs --input, --zipf, or --overlap".into(),
        ));
    };
    warn_if_large(&source);

    let mut gt = GroundTruth::new();
    source.for_each(|e| gt.insert(&e.label, &e.item))?;
    let mut sketch = args.sketch.build()?;
    source.for_each(|e| sketch.insert(&e.label, &e.item))?;

    let report: ErrorReport =
        evaluate(&mut sketch, &gt, &args.ks).map_err(|e| CliError::Data(e.to_string()))?;
    match args.format.as_str() {
        "lines" => print!("{}", report.to_kv_lines()),
        _ => print!("{}", report.to_table()),
    }
    if args.baseline {
        println!("k\tbaseline_nae_t");
        for &k in &args.ks {
            let zeros: Vec<_> = gt.topk(k).into_iter().map(|l| (l, 0.0)).collect();
            let value = nae(&zeros, &gt).map_err(|e| CliError::Data(e.to_string()))?;
            println!("{k}\t{value:.6}");
        }
    }
    Ok(())
}

fn gen(args: GenArgs) -> Result<(), CliError> {
    match args.what {
        GenCommand::Zipf {
            labels,
            exponent,
            entries,
            seed,
            out,
        } => {
            let spec = ZipfSpec {
                labels,
                exponent,
                entries,
                seed,
            };
            warn_if_large(&StreamSource::Zipf(spec.clone()));
            write_stream(&out, gen_zipf(&spec)?)
        }
        GenCommand::Overlap {
            universe,
            common,
            small_sets,
            small_size,
            heavy_sets,
            heavy_size,
            seed,
            out,
        } => {
            let spec = OverlapSpec {
                universe_size: universe,
                common_size: common,
                small_sets,
                small_set_size: small_size,
                heavy_sets,
                heavy_set_size: heavy_size,
                seed,
            };
            warn_if_large(&StreamSource::Overlap(spec.clone()));
            write_stream(&out, gen_overlap(&spec)?)
        }
    }
}

fn write_stream(path: &Path, entries: impl Iterator<Item = Entry>) -> Result<(), CliError> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    let mut count = 0u64;
    for e in entries {
        out.write_all(e.label.bytes())?;
        out.write_all(b",")?;
        out.write_all(&e.item)?;
        out.write_all(b"\n")?;
        count += 1;
    }
    out.flush()?;
    println!("entries\t{count}");
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let source = if let Some(spec) = args.generator.zipf_spec(args.sketch.seed) {
        StreamSource::Zipf(spec)
    } else if let Some(spec) = args.generator.overlap_spec(args.sketch.seed) {
        StreamSource::Overlap(spec)
    } else {
        return Err(CliError::Usage("bench needs --zipf or --overlap".into()));
    };
    warn_if_large(&source);
    let mut sketch = args.sketch.build()?;
    let mut entries = 0u64;
    let start = Instant::now();
    source.for_each(|e| {
        sketch.insert(&e.label, &e.item);
        entries += 1;
    })?;
    let elapsed = start.elapsed();
    let per_ms = if entries == 0 {
        0.0
    } else {
        entries as f64 / elapsed.as_secs_f64() / 1000.0
    };
    println!("entries\t{entries}");
    println!("elapsed_ms\t{:.3}", elapsed.as_secs_f64() * 1000.0);
    println!("entries_per_ms\t{per_ms:.1}");
    print_stats(&sketch);
    Ok(())
}
