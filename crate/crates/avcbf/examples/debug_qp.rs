//! Scratch reproduction of a solver stall (deleted before release).

use avcbf::cbf::assemble_qp;
use avcbf::dynamics::DEFAULT_SUBSTEPS;
use avcbf::numkit::qp_solve;
use avcbf::sim::{build_scenario, load_config};

fn main() {
    let path = std::env::args().nth(1).expect("usage: debug_qp <config.json>");
    let config = load_config(path.as_ref()).unwrap();
    let sc = build_scenario(&config).unwrap();
    let mut state = sc.initial_state();
    let targets = sc.default_aux_targets();
    for step in 0..600 {
        let rows = sc.rows(&state).unwrap();
        let cost = sc.cost(&state, &targets);
        let problem = assemble_qp(&rows, &cost);
        let sol = qp_solve(&problem, None).unwrap();
        let status = format!("{}", sol.status);
        if status != "optimal" || step >= 240 {
            println!(
                "step {} t={:.2} status={} iters={} kkt={:.3e}",
                step, state.t, status, sol.iterations, sol.kkt_residual
            );
            println!("  state x={:?} chains={:?}", state.x, state.chains);
            if status == "max_iterations" {
                println!("  H diag: {:?}",
                    (0..problem.hessian.nrows()).map(|i| problem.hessian[(i, i)]).collect::<Vec<f64>>());
                println!("  c={:?}", problem.linear_cost);
                println!("  G rows:");
                for r in 0..problem.ineq_matrix.nrows() {
                    let row: Vec<f64> = (0..problem.ineq_matrix.ncols())
                        .map(|j| problem.ineq_matrix[(r, j)])
                        .collect();
                    println!("    {:?} >= {:?}", row, problem.ineq_rhs[r]);
                }
                println!("  w={:?}", sol.w);
                break;
            }
            if status == "infeasible" {
                println!("  G rows:");
                for r in 0..problem.ineq_matrix.nrows() {
                    let row: Vec<f64> = (0..problem.ineq_matrix.ncols())
                        .map(|j| problem.ineq_matrix[(r, j)])
                        .collect();
                    println!("    {:?} >= {:?}", row, problem.ineq_rhs[r]);
                }
                if let Some(cert) = &sol.certificate {
                    println!("  farkas y={:?} gty={:e} hy={:e}", cert.y, cert.gt_y_norm, cert.h_dot_y);
                }
                println!("  phase1_violation={:e}", sol.phase1_violation);
                break;
            }
        }
        state = sc.advance(&state, &sol.w, DEFAULT_SUBSTEPS).unwrap();
    }
}
