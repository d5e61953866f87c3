use std::fs;
use std::path::PathBuf;

use clap::Args;
use ipsim_core::{perf_report, RunConfig};

use crate::failure::{CliResult, Failure, Kind};

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

pub fn report(args: ReportArgs) -> CliResult<()> {
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::reading(p, e))?,
        None => RunConfig::default(),
    };
    let config = |e: ipsim_core::Error| Failure::new(Kind::Config, e.to_string());
    cfg.timing.validate().map_err(config)?;
    let r = perf_report(&cfg.timing, &cfg.power, &cfg.area).map_err(config)?;
    let json = r.to_json();
    if let Some(out) = &args.out {
        fs::write(out, format!("{json}\n"))
            .map_err(|e| Failure::new(Kind::Io, format!("{}: {e}", out.display())))?;
    }
    if args.json {
        println!("{json}");
    } else {
        println!("{r}");
    }
    Ok(())
}
