//! Build/extract/derivative timing over model families.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::linear::{build_fac, build_l2ball, build_lqcp, build_mincostflow, build_quadexample};
use super::nonlinear::{build_clnlbeam, build_sqrt_model};
use super::{BenchError, ClnlbeamParams, FacParams, LqcpParams, MinCostFlowData};
use crate::ad::NlpEvaluator;
use crate::model::Model;

pub const CSV_HEADER: &str = "family,size,build_ms,extract_ms,eval3_ms";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    MinCostFlow,
    Lqcp,
    Fac,
    Clnlbeam,
    QuadExample,
    L2Ball,
    Sqrt,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::MinCostFlow,
        Family::Lqcp,
        Family::Fac,
        Family::Clnlbeam,
        Family::QuadExample,
        Family::L2Ball,
        Family::Sqrt,
    ];

    pub fn parse(s: &str) -> Result<Family, BenchError> {
        Family::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| BenchError::UnknownFamily(s.to_string()))
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::MinCostFlow => "mincostflow",
            Family::Lqcp => "lqcp",
            Family::Fac => "fac",
            Family::Clnlbeam => "clnlbeam",
            Family::QuadExample => "quadexample",
            Family::L2Ball => "l2ball",
            Family::Sqrt => "sqrt",
        }
    }

    /// Whether the family has a nonlinear part and therefore no standard form.
    pub fn is_nonlinear(self) -> bool {
        matches!(self, Family::Clnlbeam | Family::Sqrt)
    }
}

/// Per-family overrides. Every key is optional; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Replaces the generated network for every `mincostflow` size.
    pub mincostflow: Option<MinCostFlowData>,
    pub lqcp: LqcpOverrides,
    pub fac: FacOverrides,
    pub clnlbeam: ClnlbeamOverrides,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LqcpOverrides {
    /// Time steps; defaults to the spatial size.
    pub m: Option<usize>,
    pub a: Option<f64>,
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub h2: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FacOverrides {
    /// Facility count; defaults to 2.
    pub f: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClnlbeamOverrides {
    pub alpha: Option<f64>,
}

impl BenchConfig {
    pub fn lqcp_params(&self, n: usize) -> LqcpParams {
        let o = &self.lqcp;
        let mut p = LqcpParams::new(o.m.unwrap_or(n), n);
        p.a = o.a.unwrap_or(p.a);
        p.dx = o.dx;
        p.dt = o.dt;
        p.h2 = o.h2;
        p
    }

    pub fn fac_params(&self, g: usize) -> FacParams {
        FacParams { g, f: self.fac.f.unwrap_or(2) }
    }

    pub fn clnlbeam_params(&self, n: usize) -> ClnlbeamParams {
        let mut p = ClnlbeamParams::new(n);
        p.alpha = self.clnlbeam.alpha.unwrap_or(p.alpha);
        p
    }

    pub fn mincostflow_data(&self, n: usize) -> MinCostFlowData {
        match &self.mincostflow {
            Some(d) => d.clone(),
            None if n <= 5 => MinCostFlowData::default(),
            None => MinCostFlowData::ladder(n),
        }
    }

    /// Builds one instance of `family` at `size`.
    pub fn build(&self, family: Family, size: usize) -> Result<Model<f64>, BenchError> {
        match family {
            Family::MinCostFlow => build_mincostflow(&self.mincostflow_data(size)),
            Family::Lqcp => build_lqcp(&self.lqcp_params(size)),
            Family::Fac => build_fac(&self.fac_params(size)),
            Family::Clnlbeam => build_clnlbeam(&self.clnlbeam_params(size)),
            Family::QuadExample => build_quadexample(size),
            Family::L2Ball => build_l2ball(size),
            Family::Sqrt => build_sqrt_model(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub family: Family,
    pub size: usize,
    pub build_ms: f64,
    /// Standard-form extraction, or evaluator setup for nonlinear families.
    pub extract_ms: f64,
    /// `None` when the model has cones, which the evaluator does not cover.
    pub eval3_ms: Option<f64>,
}

/// Midpoint of finite boxes; one unit inside half-bounded ones; 0.5 when free.
pub fn interior_point(model: &Model<f64>) -> Vec<f64> {
    model
        .lower()
        .iter()
        .zip(model.upper())
        .map(|(&lo, &hi)| match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo + 1.0,
            (false, true) => hi - 1.0,
            (false, false) => 0.5,
        })
        .collect()
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

pub fn time_family(family: Family, size: usize, cfg: &BenchConfig) -> Result<TimingRow, BenchError> {
    let t = Instant::now();
    let model = cfg.build(family, size)?;
    let build_ms = ms(t);

    let t = Instant::now();
    let has_cones = if family.is_nonlinear() {
        false
    } else {
        let sf = model.to_standard_form()?;
        !sf.cones.is_empty()
    };
    let ev = if has_cones { None } else { Some(NlpEvaluator::new(&model)?) };
    let extract_ms = ms(t);

    let eval3_ms = match ev {
        None => None,
        Some(ev) => {
            let x = interior_point(&model);
            let (n, mg, mh) = ev.dims();
            let lambda = vec![1.0; mg + mh];
            let mut ws = ev.workspace();
            let mut grad = vec![0.0; n];
            let mut jac = vec![0.0; ev.jacobian_sparsity().len()];
            let mut hess = vec![0.0; ev.hessian_sparsity().len()];
            let t = Instant::now();
            for _ in 0..3 {
                ev.eval_objective_gradient(&x, &mut ws, &mut grad)?;
                ev.eval_jacobian(&x, &mut ws, &mut jac)?;
                ev.eval_hessian_lagrangian(&x, 1.0, &lambda, &mut ws, &mut hess)?;
            }
            Some(ms(t))
        }
    };
    Ok(TimingRow { family, size, build_ms, extract_ms, eval3_ms })
}

/// Times every `(family, size)` job on up to `threads` worker threads, one
/// model per thread at a time. Results keep the job order.
pub fn run_timings(
    jobs: &[(Family, usize)],
    cfg: &BenchConfig,
    threads: usize,
) -> Vec<Result<TimingRow, BenchError>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<TimingRow, BenchError>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = threads.clamp(1, jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(family, size)) = jobs.get(k) else { break };
                let row = time_family(family, size, cfg);
                slots.lock().expect("timing slot lock")[k] = Some(row);
            });
        }
    });
    slots.into_inner().expect("timing slot lock").into_iter().map(|r| r.expect("every job ran")).collect()
}

pub fn timings_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let eval = r.eval3_ms.map(|v| format!("{v:.3}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{:.3},{:.3},{}", r.family.name(), r.size, r.build_ms, r.extract_ms, eval);
    }
    out
}
