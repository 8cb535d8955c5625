use std::num::NonZeroUsize;

use amlkit::bench::{run_timings, timings_csv};

use crate::args::BenchArgs;
use crate::config::CliConfig;
use crate::error::{usage, CliError};
use crate::models;

/// `AMLKIT_THREADS`, then the config, then the machine's parallelism.
fn threads(cfg: &CliConfig) -> Result<usize, CliError> {
    if let Ok(v) = std::env::var("AMLKIT_THREADS") {
        return v
            .trim()
            .parse::<NonZeroUsize>()
            .map(NonZeroUsize::get)
            .map_err(|_| usage(format!("AMLKIT_THREADS must be a positive integer, got `{v}`")));
    }
    if let Some(t) = cfg.threads {
        if t == 0 {
            return Err(usage("threads must be positive"));
        }
        return Ok(t);
    }
    Ok(std::thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1))
}

pub fn run(a: &BenchArgs, cfg: &CliConfig) -> Result<(), CliError> {
    let mut jobs = Vec::new();
    for name in &a.family {
        let family = models::parse_family(name.trim())?;
        for &s in &a.sizes {
            let size = usize::try_from(s).map_err(|_| usage(format!("size {s} is too large")))?;
            models::check_size(family, size)?;
            jobs.push((family, size));
        }
    }
    let rows = run_timings(&jobs, &cfg.bench(), threads(cfg)?)
        .into_iter()
        .zip(&jobs)
        .map(|(r, (f, s))| {
            r.map_err(|e| CliError::Other(anyhow::Error::new(e).context(format!("{} size {s} failed", f.name()))))
        })
        .collect::<Result<Vec<_>, _>>()?;
    crate::emit(a.out.as_deref(), &timings_csv(&rows))
}
