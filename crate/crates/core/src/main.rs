use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nlhom::cli::{float, load_config, run};
use nlhom::dump::read_dump;
use nlhom::Error;

#[derive(Parser)]
#[command(name = "nlhom", version, about = "Nonlocal homogenization experiments on perforated domains")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `run.out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and check a config file without running it.
    Validate { config: PathBuf },
    /// Print the header and statistics of an NLH1 field dump.
    DumpField { path: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { config, out, threads } => {
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.out.clone());
            let report = nlhom::par::with_threads(threads, || run(&cfg, &dir))?;
            print!("{}", report.summary);
            println!("wrote {} files to {}", report.files.len(), report.dir.display());
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("ok: kind = {}, dim = {}, n = {}, p = {}", cfg.kind, cfg.dim(), cfg.n, cfg.p);
        }
        Command::DumpField { path } => {
            let dump = read_dump(&path)?;
            let s = dump.stats();
            println!("magic = NLH1");
            println!("dim = {}", dump.dims.len());
            println!("dims = {:?}", dump.dims);
            println!("origin = {:?}", dump.origin);
            println!("spacing = {}", float(dump.spacing));
            println!("nodes = {}", s.nodes);
            println!("masked = {}", s.masked);
            println!("min = {}", float(s.min));
            println!("max = {}", float(s.max));
            println!("mean = {}", float(s.mean));
        }
    }
    Ok(())
}
