use std::path::Path;

use amlkit::bench::{BenchConfig, ClnlbeamOverrides, FacOverrides, LqcpOverrides, MinCostFlowData};
use serde::Deserialize;

use crate::error::CliError;

/// Contents of the `--config` TOML file. Every key is optional and unknown
/// keys are rejected.
///
/// ```toml
/// tol = 1e-7
/// seed = 3
/// threads = 2
/// max_iterations = 500
///
/// [lqcp]
/// m = 10
/// a = 0.01
///
/// [fac]
/// f = 3
///
/// [clnlbeam]
/// alpha = 350.0
///
/// [mincostflow]
/// n = 2
/// edges = [{ from = 1, to = 2, cost = 5.0, capacity = 1.0 }]
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    /// Harness threads; `AMLKIT_THREADS` takes precedence.
    pub threads: Option<usize>,
    /// Cutting-plane iteration cap; defaults to `10·n + 100`.
    pub max_iterations: Option<usize>,
    pub mincostflow: Option<MinCostFlowData>,
    pub lqcp: LqcpOverrides,
    pub fac: FacOverrides,
    pub clnlbeam: ClnlbeamOverrides,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(CliConfig::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn bench(&self) -> BenchConfig {
        BenchConfig {
            mincostflow: self.mincostflow.clone(),
            lqcp: self.lqcp.clone(),
            fac: self.fac.clone(),
            clnlbeam: self.clnlbeam.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let src = r#"
            tol = 1e-7
            seed = 3
            threads = 2
            max_iterations = 500
            [lqcp]
            m = 10
            a = 0.01
            [fac]
            f = 3
            [clnlbeam]
            alpha = 350.0
            [mincostflow]
            n = 2
            edges = [{ from = 1, to = 2, cost = 5.0, capacity = 1.0 }]
        "#;
        let c: CliConfig = toml::from_str(src).unwrap();
        assert_eq!(c.tol, Some(1e-7));
        assert_eq!(c.bench().lqcp_params(4).m, 10);
        assert_eq!(c.bench().fac_params(1).f, 3);
        assert_eq!(c.mincostflow.unwrap().edges.len(), 1);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<CliConfig>("tolerance = 1.0").is_err());
        assert!(toml::from_str::<CliConfig>("[lqcp]\nq = 1").is_err());
    }
}
