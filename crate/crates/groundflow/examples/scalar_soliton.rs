//! Solves the scalar focusing cubic problem on the line and compares the
//! result against the closed-form soliton: at mass 4 the minimizer is
//! sqrt(2)/cosh(x) with energy -2/3 and multiplier 1, and the whole family
//! follows the scaling law lambda = a^2/16, energy = -a^3/96.

use groundflow::grid::{Boundary, Grid};
use groundflow::model::{Nonlinearity, Potential, PowerTerm, Problem};
use groundflow::solver::{solve_ground_state, FlowOptions};

fn cubic_problem(mass: f64) -> groundflow::Result<Problem> {
    let g = Nonlinearity::new(
        vec![PowerTerm {
            coefficient: 1.0,
            exponent: 4.0,
        }],
        vec![],
        vec![],
    )?;
    Problem::new(g, [Potential::zero(), Potential::zero()], [mass, 0.0])
}

fn main() -> groundflow::Result<()> {
    let grid = Grid::new(1, 20.0, 1024, Boundary::Periodic)?;
    let options = FlowOptions::default();

    let result = solve_ground_state(&cubic_problem(4.0)?, &grid, &options)?;
    let peak = result.fields[0].max_abs();
    println!("mass 4 soliton after {} iterations:", result.iterations);
    println!("  energy     {:+.12}  (exact -2/3)", result.energy.total);
    println!("  multiplier {:+.12}  (exact  1)", result.lambda[0]);
    println!("  peak       {:+.12}  (exact  sqrt 2 = {:.12})", peak, 2f64.sqrt());

    println!("\nscaling law across the family:");
    println!("  {:>4}  {:>18}  {:>18}  {:>10}", "mass", "energy", "-a^3/96", "rel err");
    for mass in [2.0, 4.0, 8.0] {
        let result = solve_ground_state(&cubic_problem(mass)?, &grid, &options)?;
        let exact = -mass.powi(3) / 96.0;
        let rel = (result.energy.total - exact).abs() / exact.abs();
        println!(
            "  {:>4}  {:>18.12}  {:>18.12}  {:>10.2e}",
            mass, result.energy.total, exact, rel
        );
    }
    Ok(())
}
