//! Minimizes a two-component system with an attractive well acting on the
//! first component only, then re-minimizes with the well removed. The well
//! strictly lowers the ground energy, and both multipliers come out
//! positive, which is what makes the states genuine bound states.

use groundflow::grid::{Boundary, Grid};
use groundflow::model::{CouplingTerm, Nonlinearity, Potential, PowerTerm, Problem};
use groundflow::solver::{solve_ground_state, FlowOptions};

fn main() -> groundflow::Result<()> {
    let grid = Grid::new(1, 20.0, 512, Boundary::Dirichlet)?;
    let power = |c: f64, e: f64| PowerTerm {
        coefficient: c,
        exponent: e,
    };
    let g = Nonlinearity::new(
        vec![power(1.0, 3.5)],
        vec![power(1.0, 3.5)],
        vec![CouplingTerm {
            coefficient: 1.0,
            exponents: (1.5, 1.6),
        }],
    )?;
    let trapped = Problem::new(
        g,
        [Potential::gaussian_well(1.0, 2.0)?, Potential::zero()],
        [2.0, 2.0],
    )?;
    let free = trapped.without_potentials();

    let options = FlowOptions::default();
    let with_well = solve_ground_state(&trapped, &grid, &options)?;
    let without = solve_ground_state(&free, &grid, &options)?;

    println!("trapped ground energy C = {:+.9}", with_well.energy.total);
    println!("free ground energy    E = {:+.9}", without.energy.total);
    println!("well gain           E-C = {:+.9}", without.energy.total - with_well.energy.total);
    println!();
    println!(
        "trapped multipliers ({:+.6}, {:+.6})",
        with_well.lambda[0], with_well.lambda[1]
    );
    println!(
        "free multipliers    ({:+.6}, {:+.6})",
        without.lambda[0], without.lambda[1]
    );

    assert!(with_well.energy.total < without.energy.total);
    assert!(without.energy.total < 0.0);
    Ok(())
}
