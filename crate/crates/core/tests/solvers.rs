mod common;

use amlkit::bench::{build_fac, build_l2ball, build_mincostflow, build_sqrt_model, FacParams, MinCostFlowData};
use amlkit::solve::{lp_solve, solve, SolveStatus};
use common::{edge, fac_bruteforce, path_enumeration_flow};

#[test]
fn fig2_flow_matches_path_enumeration() {
    let data = MinCostFlowData::default();
    let (cost, flow) = path_enumeration_flow(&data);
    let r = lp_solve(&build_mincostflow::<f64>(&data).unwrap()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - cost).abs() <= 1e-9);
    assert!((cost - 4.0).abs() <= 1e-12);
    for (a, b) in r.x.iter().zip(&flow) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn single_edge_network() {
    let data = MinCostFlowData { n: 2, edges: vec![edge(1, 2, 5.0, 1.0)] };
    let r = lp_solve(&build_mincostflow::<f64>(&data).unwrap()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 5.0).abs() <= 1e-12);
}

#[test]
fn short_sink_capacity_is_infeasible() {
    let mut data = MinCostFlowData::default();
    for e in &mut data.edges {
        e.capacity = 0.2;
    }
    let r = lp_solve(&build_mincostflow::<f64>(&data).unwrap()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn ladder_network_solves() {
    let data = MinCostFlowData::ladder(30);
    let r = lp_solve(&build_mincostflow::<f64>(&data).unwrap()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    let model = build_mincostflow::<f64>(&data).unwrap();
    assert!(model.max_violation(&r.x) <= 1e-9);
}

#[test]
fn l2ball_two_dimensions() {
    let r = solve(&build_l2ball::<f64>(2).unwrap(), 1e-6).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 2f64.sqrt()).abs() <= 1e-5);
}

#[test]
fn fac_single_facility_is_square_center() {
    let r = solve(&build_fac::<f64>(&FacParams { g: 1, f: 1 }).unwrap(), 1e-7).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 0.5f64.sqrt()).abs() <= 1e-5);
    assert!((r.x[1] - 0.5).abs() <= 1e-5 && (r.x[2] - 0.5).abs() <= 1e-5);
}

#[test]
fn fac_two_facilities_matches_enumeration() {
    let oracle = fac_bruteforce(2, 2);
    let r = solve(&build_fac::<f64>(&FacParams { g: 2, f: 2 }).unwrap(), 1e-7).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - oracle).abs() <= 1e-6, "{} vs {oracle}", r.objective);
}

#[test]
fn enclosing_radius_oracle_sanity() {
    assert_eq!(common::enclosing_radius(&[[0.0, 0.0], [1.0, 0.0]]), 0.5);
    let square = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
    assert!((common::enclosing_radius(&square) - 0.5f64.sqrt()).abs() < 1e-15);
    assert!((fac_bruteforce(1, 1) - 0.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn user_function_model_reaches_sqrt_two() {
    let r = solve(&build_sqrt_model::<f64>().unwrap(), 1e-7).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 2f64.sqrt()).abs() <= 1e-5);
}
