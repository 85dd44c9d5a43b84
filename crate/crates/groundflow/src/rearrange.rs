//! Discrete rearrangements of grid samples.
//!
//! A rearrangement permutes the values of a nonnegative field so that
//! super-level sets become centered intervals (1D) or approximate balls
//! (higher dimensions). Permutations preserve every `integral u^p`
//! exactly, so the interesting content is in what happens to the
//! coupling, potential and gradient terms; `check_rearrangement_inequalities`
//! measures those margins on concrete fields.

use crate::grid::{Boundary, Field, Grid};
use crate::model::{v_norm_sq, Problem};
use crate::report::VerificationReport;
use crate::{Error, Result};

/// Placement positions for a line of `m` cells, ordered center-out:
/// center first, then alternating right and left neighbors. Even-length
/// runs therefore lean one cell to the right of the box center.
fn placement_order_1d(m: usize) -> Vec<usize> {
    let center = m / 2;
    let mut order = Vec::with_capacity(m);
    order.push(center);
    for offset in 1..=m {
        if center + offset < m {
            order.push(center + offset);
        }
        if offset <= center {
            order.push(center - offset);
        }
        if order.len() == m {
            break;
        }
    }
    order
}

/// Placement positions for a full grid: cells sorted by distance from the
/// origin. In 1D this is exactly the center-out alternation; in higher
/// dimensions ties are broken lexicographically on the multi-index.
fn placement_order(grid: &Grid) -> Vec<usize> {
    if grid.dimension() == 1 {
        return placement_order_1d(grid.points_per_axis());
    }
    let mut cells: Vec<usize> = (0..grid.len()).collect();
    cells.sort_by(|&a, &b| {
        grid.radius_sq_of(a)
            .total_cmp(&grid.radius_sq_of(b))
            .then_with(|| grid.multi_index(a).cmp(&grid.multi_index(b)))
    });
    cells
}

fn require_nonnegative(u: &Field, what: &str) -> Result<()> {
    if u.values().iter().any(|&v| v < 0.0) {
        return Err(Error::Domain(format!(
            "{what} must be nonnegative; rearrangements act on |u|"
        )));
    }
    Ok(())
}

/// Symmetric-decreasing rearrangement: the equimeasurable field whose
/// values decrease with distance from the origin. The value multiset is
/// preserved exactly, so every `integral u^p` survives to the last bit
/// (up to summation order).
pub fn sym_dec_rearrange(u: &Field) -> Result<Field> {
    require_nonnegative(u, "rearrangement input")?;
    let grid = u.grid();
    let mut sorted = u.values().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut out = vec![0.0; sorted.len()];
    for (value, position) in sorted.into_iter().zip(placement_order(grid)) {
        out[position] = value;
    }
    Field::from_values(grid, out)
}

/// Coupled rearrangement of two nonnegative 1D fields: the field whose
/// super-level set at every threshold is the centered run whose length is
/// the sum of the two input level-set lengths. Equivalently, the merged
/// descending value multiset placed center-out. `integral w^p` therefore
/// equals `integral u^p + integral v^p` exactly for every p, provided the
/// combined positive support fits in the grid.
pub fn coupled_rearrange_1d(u: &Field, v: &Field) -> Result<Field> {
    let grid = u.grid();
    if grid.dimension() != 1 {
        return Err(Error::Domain(format!(
            "coupled rearrangement is one-dimensional; got a {}d grid",
            grid.dimension()
        )));
    }
    if grid.len() != v.grid().len()
        || grid.half_width() != v.grid().half_width()
        || grid.boundary() != v.grid().boundary()
    {
        return Err(Error::GridMismatch(
            "coupled rearrangement needs both fields on one grid".into(),
        ));
    }
    require_nonnegative(u, "first rearrangement input")?;
    require_nonnegative(v, "second rearrangement input")?;
    let m = grid.len();
    let positive = u.values().iter().chain(v.values()).filter(|&&x| x > 0.0).count();
    if positive > m {
        return Err(Error::Domain(format!(
            "coupled rearrangement would drop values: {positive} positive samples on a {m}-cell grid"
        )));
    }
    let mut merged: Vec<f64> = u.values().iter().chain(v.values()).copied().collect();
    merged.sort_by(|a, b| b.total_cmp(a));
    merged.truncate(m);
    let mut out = vec![0.0; m];
    for (value, position) in merged.into_iter().zip(placement_order_1d(m)) {
        out[position] = value;
    }
    Field::from_values(grid, out)
}

/// Forward-difference Dirichlet energy `sum |u(x+h e) - u(x)|^2 * cell / h^2`
/// over all axes, cyclic on periodic grids and with zero ghost cells on
/// Dirichlet grids. This is the quadratic form the discrete rearrangement
/// inequality controls; the spectral kinetic term does not obey an exact
/// discrete comparison.
pub fn diff_energy(u: &Field) -> f64 {
    let grid = u.grid();
    let m = grid.points_per_axis();
    let n = grid.dimension();
    let values = u.values();
    let weight = grid.cell_volume() / (grid.spacing() * grid.spacing());
    let mut total = 0.0;
    for flat in 0..values.len() {
        let idx = grid.multi_index(flat);
        for axis in 0..n {
            let stride = m.pow((n - 1 - axis) as u32);
            let i = idx[axis];
            match grid.boundary() {
                Boundary::Periodic => {
                    let next = if i + 1 < m { flat + stride } else { flat - (m - 1) * stride };
                    let d = values[next] - values[flat];
                    total += d * d;
                }
                Boundary::Dirichlet => {
                    if i + 1 < m {
                        let d = values[flat + stride] - values[flat];
                        total += d * d;
                    } else {
                        // ghost zero beyond the last cell
                        total += values[flat] * values[flat];
                    }
                    if i == 0 {
                        // ghost zero before the first cell
                        total += values[flat] * values[flat];
                    }
                }
            }
        }
    }
    weight * total
}

fn coupling_integral(u1: &Field, u2: &Field, problem: &Problem) -> Result<f64> {
    let mut acc = 0.0;
    for (&s, &t) in u1.values().iter().zip(u2.values()) {
        acc += problem.nonlinearity.value(s, t)?;
    }
    Ok(u1.grid().cell_volume() * acc)
}

/// Measures the three rearrangement margins on a concrete pair of
/// nonnegative fields:
///
/// * the interaction integral must not decrease,
/// * the attractive-potential norm must not decrease (exact when the
///   potential is radial and nonincreasing away from the origin),
/// * the difference-quotient gradient energy must not increase, up to a
///   grid tolerance (exact in 1D, O(h) in higher dimensions).
pub fn check_rearrangement_inequalities(
    u1: &Field,
    u2: &Field,
    problem: &Problem,
) -> Result<VerificationReport> {
    let star1 = sym_dec_rearrange(u1)?;
    let star2 = sym_dec_rearrange(u2)?;
    let mut report = VerificationReport::default();

    let g_before = coupling_integral(u1, u2, problem)?;
    let g_after = coupling_integral(&star1, &star2, problem)?;
    let g_tol = 1e-12 * (1.0 + g_after.abs());
    report.push(
        "rearrange_interaction_gain",
        g_after - g_before,
        0.0,
        g_tol,
        g_after - g_before >= -g_tol,
    );

    let mut v_margin = f64::INFINITY;
    let mut v_scale: f64 = 1.0;
    for (field, star, potential) in [
        (u1, &star1, &problem.potentials[0]),
        (u2, &star2, &problem.potentials[1]),
    ] {
        let before = v_norm_sq(field, potential)?;
        let after = v_norm_sq(star, potential)?;
        v_margin = v_margin.min(after - before);
        v_scale = v_scale.max(after.abs());
    }
    let v_tol = 1e-12 * v_scale;
    report.push("rearrange_potential_gain", v_margin, 0.0, v_tol, v_margin >= -v_tol);

    let grid = u1.grid();
    let mut k_margin = f64::INFINITY;
    let mut k_scale: f64 = 1.0;
    for (field, star) in [(u1, &star1), (u2, &star2)] {
        let before = diff_energy(field);
        let after = diff_energy(star);
        k_margin = k_margin.min(before - after);
        k_scale = k_scale.max(before);
    }
    let k_tol = if grid.dimension() == 1 { 1e-8 * k_scale } else { grid.spacing() * k_scale };
    report.push("rearrange_gradient_drop", k_margin, 0.0, k_tol, k_margin >= -k_tol);

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CouplingTerm, Nonlinearity, Potential, PowerTerm};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn line_grid(m: usize, l: f64) -> Grid {
        Grid::new(1, l, m, Boundary::Periodic).unwrap()
    }

    #[test]
    fn placement_alternates_starting_right_of_center() {
        assert_eq!(placement_order_1d(5), vec![2, 3, 1, 4, 0]);
        assert_eq!(placement_order_1d(8), vec![4, 5, 3, 6, 2, 7, 1, 0]);
    }

    #[test]
    fn sort_and_place_oracle() {
        // [5,0,1,3,0,2,4,0] sorted desc, placed center-out right-first
        let grid = line_grid(8, 4.0);
        let u = Field::from_values(&grid, vec![5.0, 0.0, 1.0, 3.0, 0.0, 2.0, 4.0, 0.0]).unwrap();
        let star = sym_dec_rearrange(&u).unwrap();
        assert_eq!(star.values(), &[0.0, 0.0, 1.0, 3.0, 5.0, 4.0, 2.0, 0.0]);
    }

    #[test]
    fn rearranged_field_is_a_fixed_point() {
        let grid = line_grid(8, 4.0);
        let u = Field::from_values(&grid, vec![0.0, 0.0, 1.0, 3.0, 5.0, 4.0, 2.0, 0.0]).unwrap();
        let star = sym_dec_rearrange(&u).unwrap();
        assert_eq!(star.values(), u.values());
    }

    #[test]
    fn negative_input_is_rejected() {
        let grid = line_grid(8, 4.0);
        let u = Field::from_values(&grid, vec![0.0, -0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(sym_dec_rearrange(&u), Err(Error::Domain(_))));
    }

    #[test]
    fn two_dimensional_rearrangement_decreases_with_radius() {
        let grid = Grid::new(2, 4.0, 16, Boundary::Periodic).unwrap();
        let u = Field::from_fn(&grid, |x| {
            ((x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(2)).sin().abs()
        });
        let star = sym_dec_rearrange(&u).unwrap();
        // equimeasurable
        let mut a = u.values().to_vec();
        let mut b = star.values().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        // nonincreasing along the distance ordering
        let order = placement_order(&grid);
        for pair in order.windows(2) {
            assert!(star.values()[pair[0]] >= star.values()[pair[1]]);
        }
        // difference energy drops within the O(h) allowance
        let before = diff_energy(&u);
        let after = diff_energy(&star);
        assert!(after <= before + grid.spacing() * before);
    }

    #[test]
    fn coupled_rearrangement_is_commutative_and_extends_sym_dec() {
        let grid = line_grid(16, 8.0);
        let u = Field::from_values(
            &grid,
            vec![0.0, 0.3, 0.0, 1.2, 0.0, 0.0, 2.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.9, 0.0, 0.0],
        )
        .unwrap();
        let v = Field::from_values(
            &grid,
            vec![0.0, 0.0, 0.7, 0.0, 0.0, 1.5, 0.0, 0.0, 0.1, 0.0, 0.0, 0.4, 0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let uv = coupled_rearrange_1d(&u, &v).unwrap();
        let vu = coupled_rearrange_1d(&v, &u).unwrap();
        assert_eq!(uv.values(), vu.values());
        let zero = Field::zeros(&grid);
        let alone = coupled_rearrange_1d(&u, &zero).unwrap();
        assert_eq!(alone.values(), sym_dec_rearrange(&u).unwrap().values());
    }

    #[test]
    fn coupled_indicator_bumps_concatenate() {
        // unit-height bumps of widths 3 and 2 merge into a centered run of 5
        let grid = line_grid(8, 4.0);
        let mut a = vec![0.0; 8];
        a[1..4].fill(1.0);
        let mut b = vec![0.0; 8];
        b[5..7].fill(1.0);
        let u = Field::from_values(&grid, a).unwrap();
        let v = Field::from_values(&grid, b).unwrap();
        let w = coupled_rearrange_1d(&u, &v).unwrap();
        assert_eq!(w.values(), &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn coupled_rearrangement_adds_power_integrals_exactly() {
        let grid = line_grid(64, 10.0);
        let u = Field::from_fn(&grid, |x| (-(x[0] - 2.0).powi(2)).exp());
        let v = Field::from_fn(&grid, |x| 0.6 * (-(x[0] + 3.0).powi(2) / 0.5).exp());
        // clear one cell in two so the merged positive support fits
        let u = Field::from_values(
            &grid,
            u.values().iter().enumerate().map(|(i, &x)| if i % 2 == 0 { x } else { 0.0 }).collect(),
        )
        .unwrap();
        let v = Field::from_values(
            &grid,
            v.values().iter().enumerate().map(|(i, &x)| if i % 2 == 1 { x } else { 0.0 }).collect(),
        )
        .unwrap();
        let w = coupled_rearrange_1d(&u, &v).unwrap();
        let power = |f: &Field, p: i32| -> f64 {
            f.values().iter().map(|x| x.powi(p)).sum::<f64>() * grid.cell_volume()
        };
        for p in [2, 3, 4] {
            assert_relative_eq!(power(&w, p), power(&u, p) + power(&v, p), max_relative = 1e-12);
        }
    }

    #[test]
    fn coupled_rearrangement_guards_dimensions_grids_and_capacity() {
        let plane = Grid::new(2, 4.0, 8, Boundary::Periodic).unwrap();
        let u2 = Field::zeros(&plane);
        assert!(matches!(coupled_rearrange_1d(&u2, &u2), Err(Error::Domain(_))));

        let grid = line_grid(8, 4.0);
        let other = line_grid(16, 4.0);
        let err = coupled_rearrange_1d(&Field::zeros(&grid), &Field::zeros(&other));
        assert!(matches!(err, Err(Error::GridMismatch(_))));

        let full = Field::from_values(&grid, vec![1.0; 8]).unwrap();
        assert!(matches!(coupled_rearrange_1d(&full, &full), Err(Error::Domain(_))));
    }

    #[test]
    fn inequality_report_passes_on_random_pair_with_well() {
        let grid = line_grid(128, 10.0);
        let nl = Nonlinearity::new(
            vec![PowerTerm { coefficient: 1.0, exponent: 3.0 }],
            vec![PowerTerm { coefficient: 0.5, exponent: 4.0 }],
            vec![CouplingTerm { coefficient: 1.0, exponents: (1.5, 1.5) }],
        )
        .unwrap();
        let problem = Problem::new(
            nl,
            [Potential::gaussian_well(1.0, 2.0).unwrap(), Potential::zero()],
            [1.0, 1.0],
        )
        .unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u1 = Field::from_values(&grid, (0..128).map(|_| rng.gen_range(0.0..1.0)).collect())
                .unwrap();
            let u2 = Field::from_values(&grid, (0..128).map(|_| rng.gen_range(0.0..1.0)).collect())
                .unwrap();
            let report = check_rearrangement_inequalities(&u1, &u2, &problem).unwrap();
            assert!(report.all_pass(), "{}", report.render());
        }
    }

    #[test]
    fn two_bump_field_strictly_drops_gradient_energy() {
        let grid = line_grid(256, 12.0);
        let u = Field::from_fn(&grid, |x| {
            (-(x[0] - 4.0).powi(2)).exp() + 0.8 * (-(x[0] + 4.0).powi(2) / 0.7).exp()
        });
        let star = sym_dec_rearrange(&u).unwrap();
        assert!(diff_energy(&star) < diff_energy(&u) - 1e-3);
    }

    #[test]
    fn coupling_two_minimizers_beats_their_energy_sum() {
        // free energy of the coupled rearrangement of two scalar ground
        // states undercuts the sum of their energies, the driver behind
        // strict mass sub-additivity
        use crate::energy;
        use crate::solver::{solve_ground_state, FlowOptions};
        let grid = Grid::new(1, 16.0, 512, Boundary::Periodic).unwrap();
        let nl = || {
            Nonlinearity::new(vec![PowerTerm { coefficient: 1.0, exponent: 4.0 }], vec![], vec![])
                .unwrap()
        };
        let masses = [2.0, 3.0];
        let mut parts = Vec::new();
        for a in masses {
            let problem =
                Problem::new(nl(), [Potential::zero(), Potential::zero()], [a, 0.0]).unwrap();
            let result = solve_ground_state(&problem, &grid, &FlowOptions::default()).unwrap();
            assert!(result.converged);
            parts.push(result);
        }
        // drop the far tails so the merged positive samples fit on the
        // grid; the trial only gets worse, which is the safe direction
        let keep_largest = |f: &Field, k: usize| {
            let mut order: Vec<usize> = (0..f.values().len()).collect();
            order.sort_by(|&a, &b| f.values()[b].total_cmp(&f.values()[a]));
            let mut out = vec![0.0; f.values().len()];
            for &i in &order[..k] {
                out[i] = f.values()[i];
            }
            Field::from_values(f.grid(), out).unwrap()
        };
        let phi = keep_largest(&parts[0].fields[0], 256);
        let psi = keep_largest(&parts[1].fields[0], 256);
        let glued = coupled_rearrange_1d(&phi, &psi).unwrap();
        let problem = Problem::new(
            nl(),
            [Potential::zero(), Potential::zero()],
            [masses[0] + masses[1], 0.0],
        )
        .unwrap();
        let zero = Field::zeros(&grid);
        let together = energy::breakdown(&glued, &zero, &problem).unwrap().total;
        let separate = parts[0].energy.total + parts[1].energy.total;
        assert!(
            together < separate,
            "coupled {together} vs separate {separate}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rearrangement_is_equimeasurable_and_idempotent(
            values in proptest::collection::vec(0.0f64..10.0, 16)
        ) {
            let grid = line_grid(16, 8.0);
            let u = Field::from_values(&grid, values).unwrap();
            let star = sym_dec_rearrange(&u).unwrap();
            let mut a = u.values().to_vec();
            let mut b = star.values().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
            let again = sym_dec_rearrange(&star).unwrap();
            prop_assert_eq!(again.values(), star.values());
            // 1D difference energy never increases, bit for bit
            prop_assert!(diff_energy(&star) <= diff_energy(&u) + 1e-12 * (1.0 + diff_energy(&u)));
        }
    }
}
