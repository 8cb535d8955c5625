use amlkit::bench::{BenchConfig, Family};
use amlkit::Model;

use crate::args::SizeArgs;
use crate::error::{usage, CliError};

/// Largest size accepted per family.
pub fn size_cap(family: Family) -> usize {
    match family {
        Family::Lqcp => 2000,
        Family::Clnlbeam => 5000,
        Family::QuadExample => 2000,
        Family::Fac => 50,
        Family::MinCostFlow | Family::L2Ball => 100_000,
        Family::Sqrt => 1,
    }
}

pub fn parse_family(name: &str) -> Result<Family, CliError> {
    Family::parse(name).map_err(|_| {
        let known: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
        usage(format!("unknown family `{name}` (expected one of {})", known.join(", ")))
    })
}

/// Positional target or `--family`, whichever was given.
pub fn target<'a>(positional: &'a Option<String>, flag: &'a Option<String>) -> Result<&'a str, CliError> {
    positional.as_deref().or(flag.as_deref()).ok_or_else(|| usage("no family given"))
}

fn narrow(v: u64, what: &str) -> Result<usize, CliError> {
    usize::try_from(v).map_err(|_| usage(format!("{what} is too large")))
}

/// Size for `family` from the flags, plus the config with `--m`/`--f` folded in.
pub fn resolve_size(family: Family, s: &SizeArgs, base: &BenchConfig) -> Result<(usize, BenchConfig), CliError> {
    if s.use_default && s.any() {
        return Err(usage("--default cannot be combined with size flags"));
    }
    let mut cfg = base.clone();
    if let Some(m) = s.m {
        cfg.lqcp.m = Some(narrow(m, "--m")?);
    }
    if let Some(f) = s.f {
        cfg.fac.f = Some(narrow(f, "--f")?);
    }
    let pick = |v: Option<u64>, default: usize, flag: &str| v.map(|v| narrow(v, flag)).unwrap_or(Ok(default));
    let size = match family {
        Family::MinCostFlow => pick(s.n, 5, "--n")?,
        Family::Lqcp => pick(s.n, 4, "--n")?,
        Family::Fac => pick(s.g, 1, "--g")?,
        Family::Clnlbeam => pick(s.n, 5, "--n")?,
        Family::QuadExample => pick(s.d, 3, "--d")?,
        Family::L2Ball => pick(s.n, 2, "--n")?,
        Family::Sqrt => 1,
    };
    check_size(family, size)?;
    Ok((size, cfg))
}

pub fn check_size(family: Family, size: usize) -> Result<(), CliError> {
    if size > size_cap(family) {
        return Err(usage(format!("{} size {size} exceeds the cap of {}", family.name(), size_cap(family))));
    }
    Ok(())
}

pub fn build(family: Family, size: usize, cfg: &BenchConfig) -> Result<Model, CliError> {
    cfg.build(family, size).map_err(|e| usage(format!("cannot build {}: {e}", family.name())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_per_family() {
        let cfg = BenchConfig::default();
        let none = SizeArgs::default();
        let size = |f| resolve_size(f, &none, &cfg).unwrap().0;
        assert_eq!(size(Family::MinCostFlow), 5);
        assert_eq!(size(Family::Lqcp), 4);
        assert_eq!(size(Family::Fac), 1);
        assert_eq!(size(Family::QuadExample), 3);
        assert_eq!(size(Family::L2Ball), 2);
    }

    #[test]
    fn flags_fold_into_config() {
        let s = SizeArgs { n: Some(6), m: Some(9), f: Some(3), ..Default::default() };
        let (n, cfg) = resolve_size(Family::Lqcp, &s, &BenchConfig::default()).unwrap();
        assert_eq!(n, 6);
        assert_eq!(cfg.lqcp_params(n).m, 9);
        assert_eq!(cfg.fac_params(1).f, 3);
    }

    #[test]
    fn caps_and_conflicts() {
        let cfg = BenchConfig::default();
        let big = SizeArgs { n: Some(5001), ..Default::default() };
        assert!(matches!(resolve_size(Family::Clnlbeam, &big, &cfg), Err(CliError::Usage(_))));
        let ok = SizeArgs { n: Some(5000), ..Default::default() };
        assert!(resolve_size(Family::Clnlbeam, &ok, &cfg).is_ok());
        let both = SizeArgs { n: Some(3), use_default: true, ..Default::default() };
        assert!(resolve_size(Family::MinCostFlow, &both, &cfg).is_err());
        assert!(parse_family("nope").is_err());
    }
}
