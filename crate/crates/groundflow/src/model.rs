//! Problem data: the coupled nonlinearity, trapping potentials, and the
//! admissibility checks that keep a run inside the regime where the
//! minimization problem is well posed.
//!
//! The nonlinearity density is
//!
//! ```text
//!   G(s, t) = sum_i mu_i/p_i |s|^{p_i} + sum_j nu_j/q_j |t|^{q_j}
//!           + sum_k beta_k |s|^{r1_k} |t|^{r2_k}
//! ```
//!
//! with every coefficient positive. Admissible exponents sit strictly
//! between 2 and `2 + 4/N` (each `p_i`, `q_j`, and each coupled sum
//! `r1_k + r2_k`), and coupled exponents exceed 1 individually. That range
//! keeps the energy bounded below on mass constraints of any size.

use crate::grid::{random_bumps, Field, Grid};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One pure power `coefficient/exponent * |s|^exponent`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coefficient: f64,
    pub exponent: f64,
}

/// One cross term `coefficient * |s|^{exponents.0} |t|^{exponents.1}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CouplingTerm {
    pub coefficient: f64,
    pub exponents: (f64, f64),
}

/// Finite-sum nonlinearity. Construction sorts each list so the smallest
/// exponent comes first; downstream tail analysis reads the leading entries.
#[derive(Clone, Debug)]
pub struct Nonlinearity {
    first: Vec<PowerTerm>,
    second: Vec<PowerTerm>,
    coupling: Vec<CouplingTerm>,
}

impl Nonlinearity {
    pub fn new(
        first: Vec<PowerTerm>,
        second: Vec<PowerTerm>,
        coupling: Vec<CouplingTerm>,
    ) -> Result<Nonlinearity> {
        if first.is_empty() && second.is_empty() && coupling.is_empty() {
            return Err(Error::Domain("nonlinearity needs at least one term".into()));
        }
        for (label, list) in [("first", &first), ("second", &second)] {
            for (i, term) in list.iter().enumerate() {
                if !(term.coefficient > 0.0 && term.coefficient.is_finite()) {
                    return Err(Error::Domain(format!(
                        "{label}[{i}].coefficient must be positive, got {}",
                        term.coefficient
                    )));
                }
                if !term.exponent.is_finite() {
                    return Err(Error::Domain(format!("{label}[{i}].exponent is not finite")));
                }
            }
        }
        for (k, term) in coupling.iter().enumerate() {
            if !(term.coefficient > 0.0 && term.coefficient.is_finite()) {
                return Err(Error::Domain(format!(
                    "coupling[{k}].coefficient must be positive, got {}",
                    term.coefficient
                )));
            }
            if !(term.exponents.0.is_finite() && term.exponents.1.is_finite()) {
                return Err(Error::Domain(format!("coupling[{k}].exponents are not finite")));
            }
        }
        let mut nl = Nonlinearity {
            first,
            second,
            coupling,
        };
        let by_exp = |a: &PowerTerm, b: &PowerTerm| a.exponent.partial_cmp(&b.exponent).unwrap();
        nl.first.sort_by(by_exp);
        nl.second.sort_by(by_exp);
        nl.coupling.sort_by(|a, b| {
            (a.exponents.0 + a.exponents.1)
                .partial_cmp(&(b.exponents.0 + b.exponents.1))
                .unwrap()
        });
        Ok(nl)
    }

    /// Single cubic-type power on component 1 (handy scalar baseline).
    pub fn scalar_power(coefficient: f64, exponent: f64) -> Nonlinearity {
        Nonlinearity::new(
            vec![PowerTerm {
                coefficient,
                exponent,
            }],
            Vec::new(),
            Vec::new(),
        )
        .expect("positive coefficient")
    }

    pub fn first_terms(&self) -> &[PowerTerm] {
        &self.first
    }

    pub fn second_terms(&self) -> &[PowerTerm] {
        &self.second
    }

    pub fn coupling_terms(&self) -> &[CouplingTerm] {
        &self.coupling
    }

    /// `G(s, t)` for nonnegative arguments; negative input is a caller bug
    /// surfaced as a domain error.
    pub fn value(&self, s: f64, t: f64) -> Result<f64> {
        if s < 0.0 || t < 0.0 {
            return Err(Error::Domain(format!(
                "nonlinearity arguments must be nonnegative, got ({s}, {t})"
            )));
        }
        Ok(self.value_even(s, t))
    }

    /// Even extension used by the energy: powers read |s|, |t|.
    pub(crate) fn value_even(&self, s: f64, t: f64) -> f64 {
        let s = s.abs();
        let t = t.abs();
        let mut g = 0.0;
        for term in &self.first {
            g += term.coefficient / term.exponent * s.powf(term.exponent);
        }
        for term in &self.second {
            g += term.coefficient / term.exponent * t.powf(term.exponent);
        }
        for term in &self.coupling {
            g += term.coefficient * s.powf(term.exponents.0) * t.powf(term.exponents.1);
        }
        g
    }

    /// Partial derivatives `(dG/ds, dG/dt)` at nonnegative arguments.
    pub fn partials(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        if s < 0.0 || t < 0.0 {
            return Err(Error::Domain(format!(
                "nonlinearity arguments must be nonnegative, got ({s}, {t})"
            )));
        }
        Ok(self.partials_signed(s, t))
    }

    /// Odd extension of the partials: `sign(s) |s|^{p-1}` per power, which
    /// keeps the chain rule valid for sign-changing perturbations and stays
    /// finite at the origin for exponents in (1, 2).
    pub(crate) fn partials_signed(&self, s: f64, t: f64) -> (f64, f64) {
        let sa = s.abs();
        let ta = t.abs();
        let mut ds = 0.0;
        let mut dt = 0.0;
        for term in &self.first {
            ds += term.coefficient * sa.powf(term.exponent - 1.0) * s.signum_or_zero();
        }
        for term in &self.second {
            dt += term.coefficient * ta.powf(term.exponent - 1.0) * t.signum_or_zero();
        }
        for term in &self.coupling {
            let (r1, r2) = term.exponents;
            ds += term.coefficient * r1 * sa.powf(r1 - 1.0) * s.signum_or_zero() * ta.powf(r2);
            dt += term.coefficient * r2 * sa.powf(r1) * ta.powf(r2 - 1.0) * t.signum_or_zero();
        }
        (ds, dt)
    }

    /// Effective squared tail frequencies for given multipliers. Coupling
    /// can force a component to decay slower than its own multiplier
    /// suggests: with leading coupled exponents `(r1, r2)`,
    ///
    /// ```text
    ///   f1 = min(l1, r2^2 / (2 - r1)_+^2 * l2)
    ///   f2 = min(l2, r1^2 / (2 - r2)_+^2 * l1)
    /// ```
    ///
    /// where a vanishing denominator means the ratio is +inf and the own
    /// multiplier wins. The true tail of component i behaves like
    /// `exp(-sqrt(f_i) |x|)`.
    pub fn effective_frequencies(&self, lambda1: f64, lambda2: f64) -> (f64, f64) {
        match self.coupling.first() {
            None => (lambda1, lambda2),
            Some(term) => {
                let (r1, r2) = term.exponents;
                let ratio = |num: f64, den: f64| {
                    let d = (2.0 - den).max(0.0);
                    if d == 0.0 {
                        f64::INFINITY
                    } else {
                        (num / d) * (num / d)
                    }
                };
                let f1 = lambda1.min(ratio(r2, r1) * lambda2);
                let f2 = lambda2.min(ratio(r1, r2) * lambda1);
                (f1, f2)
            }
        }
    }
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    /// Like `signum` but maps 0.0 to 0.0, so odd power extensions vanish at
    /// the origin instead of producing 0^negative artifacts.
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}

/// Trapping potential `V <= 0` together with its quadratic-form bound:
/// `integral (-V) u^2 <= sigma |grad u|^2 + tau |u|^2` for all fields.
/// `sigma < 1` keeps the kinetic term coercive.
#[derive(Clone, Debug)]
pub struct Potential {
    pub kind: PotentialKind,
    pub sigma: f64,
    pub tau: f64,
}

#[derive(Clone, Debug)]
pub enum PotentialKind {
    Zero,
    /// `-depth * exp(-|x|^2 / width^2)`
    GaussianWell { depth: f64, width: f64 },
    /// `-strength / max(|x|, h/2)^exponent`; the core is clipped at half a
    /// grid cell so the sampled values stay finite.
    PowerCoulomb { strength: f64, exponent: f64 },
    /// Arbitrary sampled well (values must be <= 0 on the target grid).
    Tabulated(Field),
}

impl Potential {
    pub fn zero() -> Potential {
        Potential {
            kind: PotentialKind::Zero,
            sigma: 0.0,
            tau: 0.0,
        }
    }

    /// Bounded wells satisfy the form bound with `sigma = 0`,
    /// `tau = sup(-V) = depth`.
    pub fn gaussian_well(depth: f64, width: f64) -> Result<Potential> {
        if !(depth > 0.0 && width > 0.0) {
            return Err(Error::Domain(format!(
                "gaussian well needs positive depth and width, got ({depth}, {width})"
            )));
        }
        Ok(Potential {
            kind: PotentialKind::GaussianWell { depth, width },
            sigma: 0.0,
            tau: depth,
        })
    }

    /// Power-law well. The caller provides the form-bound certificate
    /// `(sigma, tau)`; `validate_problem` probes it numerically. For
    /// `exponent = 2` the borderline case is only form-bounded in dimension
    /// >= 3 with `strength < (N-2)^2/4`, which is rejected elsewhere.
    pub fn power_coulomb(strength: f64, exponent: f64, sigma: f64, tau: f64) -> Result<Potential> {
        if !(strength > 0.0 && exponent > 0.0 && exponent <= 2.0) {
            return Err(Error::Domain(format!(
                "power well needs strength > 0 and exponent in (0, 2], got ({strength}, {exponent})"
            )));
        }
        if !(0.0..1.0).contains(&sigma) || tau < 0.0 {
            return Err(Error::Domain(format!(
                "form bound needs sigma in [0, 1) and tau >= 0, got ({sigma}, {tau})"
            )));
        }
        Ok(Potential {
            kind: PotentialKind::PowerCoulomb { strength, exponent },
            sigma,
            tau,
        })
    }

    pub fn tabulated(values: Field, sigma: f64, tau: f64) -> Result<Potential> {
        if values.values().iter().any(|&v| v > 0.0) {
            return Err(Error::Domain("tabulated potential must be nonpositive".into()));
        }
        if !(0.0..1.0).contains(&sigma) || tau < 0.0 {
            return Err(Error::Domain(format!(
                "form bound needs sigma in [0, 1) and tau >= 0, got ({sigma}, {tau})"
            )));
        }
        Ok(Potential {
            kind: PotentialKind::Tabulated(values),
            sigma,
            tau,
        })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    /// Pointwise value at radius-squared `r2`. `core_radius` clips the
    /// power-law singularity (pass half the grid spacing).
    pub fn eval_radial(&self, r2: f64, core_radius: f64) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::GaussianWell { depth, width } => {
                -depth * (-r2 / (width * width)).exp()
            }
            PotentialKind::PowerCoulomb { strength, exponent } => {
                let r = r2.sqrt().max(core_radius);
                -strength / r.powf(*exponent)
            }
            PotentialKind::Tabulated(_) => {
                unreachable!("tabulated potentials are sampled, not evaluated radially")
            }
        }
    }

    /// Samples `V` on a grid. Tabulated wells must already live on a grid
    /// with the same layout.
    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        match &self.kind {
            PotentialKind::Tabulated(f) => {
                if f.grid().same_layout(grid) {
                    Ok(f.clone())
                } else {
                    Err(Error::GridMismatch(
                        "tabulated potential sampled on a different grid".into(),
                    ))
                }
            }
            _ => {
                let core = 0.5 * grid.spacing();
                let mut out = Field::zeros(grid);
                for (flat, v) in out.values_mut().iter_mut().enumerate() {
                    *v = self.eval_radial(grid.radius_sq_of(flat), core);
                }
                Ok(out)
            }
        }
    }
}

/// `integral (-V) u^2`, the (nonnegative) potential part of the energy.
pub fn v_norm_sq(u: &Field, potential: &Potential) -> Result<f64> {
    if potential.is_zero() {
        return Ok(0.0);
    }
    let sampled = potential.sample(u.grid())?;
    let mut acc = 0.0;
    for (&v, &x) in sampled.values().iter().zip(u.values()) {
        acc += (-v) * x * x;
    }
    Ok(u.grid().cell_volume() * acc)
}

/// Full problem statement: what to minimize and under which mass
/// constraints.
#[derive(Clone, Debug)]
pub struct Problem {
    pub nonlinearity: Nonlinearity,
    pub potentials: [Potential; 2],
    pub masses: [f64; 2],
}

impl Problem {
    pub fn new(
        nonlinearity: Nonlinearity,
        potentials: [Potential; 2],
        masses: [f64; 2],
    ) -> Result<Problem> {
        if masses.iter().any(|&a| a < 0.0 || !a.is_finite()) {
            return Err(Error::Domain(format!(
                "masses must be nonnegative and finite, got {masses:?}"
            )));
        }
        Ok(Problem {
            nonlinearity,
            potentials,
            masses,
        })
    }

    /// Same data with both wells removed (the translation-invariant
    /// comparison problem).
    pub fn without_potentials(&self) -> Problem {
        Problem {
            nonlinearity: self.nonlinearity.clone(),
            potentials: [Potential::zero(), Potential::zero()],
            masses: self.masses,
        }
    }

    pub fn with_masses(&self, masses: [f64; 2]) -> Problem {
        Problem {
            nonlinearity: self.nonlinearity.clone(),
            potentials: self.potentials.clone(),
            masses,
        }
    }

    pub fn has_potentials(&self) -> bool {
        self.potentials.iter().any(|p| !p.is_zero())
    }
}

/// Outcome of [`validate_problem`]: per-aspect flags plus messages that
/// name the offending value and the admissible range.
#[derive(Clone, Debug, Default)]
pub struct AdmissibilityReport {
    pub range_ok: bool,
    pub ordering_ok: bool,
    pub high_dim_ok: bool,
    pub form_bound_ok: [bool; 2],
    pub radial_ok: bool,
    pub messages: Vec<String>,
}

impl AdmissibilityReport {
    pub fn all_ok(&self) -> bool {
        self.range_ok
            && self.ordering_ok
            && self.high_dim_ok
            && self.form_bound_ok.iter().all(|&b| b)
            && self.radial_ok
    }
}

/// Validates exponent ranges against the grid dimension, checks list
/// ordering, and probes each potential's declared form bound with randomized
/// smooth fields (the observed ratio must not exceed the certified sigma).
pub fn validate_problem(problem: &Problem, grid: &Grid) -> AdmissibilityReport {
    let n = grid.dimension();
    let critical = 2.0 + 4.0 / n as f64;
    let mut report = AdmissibilityReport {
        range_ok: true,
        ordering_ok: true,
        high_dim_ok: true,
        form_bound_ok: [true, true],
        radial_ok: true,
        messages: Vec::new(),
    };
    let nl = &problem.nonlinearity;
    for (label, list) in [("first", nl.first_terms()), ("second", nl.second_terms())] {
        for (i, term) in list.iter().enumerate() {
            if !(term.exponent > 2.0 && term.exponent < critical) {
                report.range_ok = false;
                report.messages.push(format!(
                    "{label}[{i}].exponent = {} outside the admissible range (2, 2 + 4/N) = (2, {critical}) at dimension {n}",
                    term.exponent
                ));
            }
        }
        if list.windows(2).any(|w| w[0].exponent > w[1].exponent) {
            report.ordering_ok = false;
            report
                .messages
                .push(format!("{label} power terms are not sorted by exponent"));
        }
    }
    for (k, term) in nl.coupling_terms().iter().enumerate() {
        let (r1, r2) = term.exponents;
        let total = r1 + r2;
        if !(r1 > 1.0 && r2 > 1.0) {
            report.range_ok = false;
            report.messages.push(format!(
                "coupling[{k}].exponents = ({r1}, {r2}) must each exceed 1"
            ));
        }
        if !(total > 2.0 && total < critical) {
            report.range_ok = false;
            report.messages.push(format!(
                "coupling[{k}] total exponent {total} outside the admissible range (2, 2 + 4/N) = (2, {critical}) at dimension {n}"
            ));
        }
    }
    if nl
        .coupling_terms()
        .windows(2)
        .any(|w| w[0].exponents.0 + w[0].exponents.1 > w[1].exponents.0 + w[1].exponents.1)
    {
        report.ordering_ok = false;
        report
            .messages
            .push("coupling terms are not sorted by total exponent".into());
    }
    // dimensions above 4 narrow the leading admissible powers; moot for the
    // grids this crate builds (N <= 3) but kept explicit
    if n >= 5 {
        let cap = 2.0 + 2.0 / (n as f64 - 2.0);
        for (label, list) in [("first", nl.first_terms()), ("second", nl.second_terms())] {
            if let Some(term) = list.first() {
                if term.exponent > cap {
                    report.high_dim_ok = false;
                    report.messages.push(format!(
                        "{label}[0].exponent = {} exceeds the high-dimension cap {cap}",
                        term.exponent
                    ));
                }
            }
        }
    }
    for (i, potential) in problem.potentials.iter().enumerate() {
        if let PotentialKind::PowerCoulomb { strength, exponent } = potential.kind {
            if exponent == 2.0 {
                let admissible = n >= 3 && strength < ((n as f64 - 2.0) / 2.0).powi(2);
                if !admissible {
                    report.form_bound_ok[i] = false;
                    report.messages.push(format!(
                        "potential{}: inverse-square well needs dimension >= 3 and strength < (N-2)^2/4",
                        i + 1
                    ));
                }
            }
        }
        match probe_form_bound(potential, grid, 200, 0x5eed + i as u64) {
            Ok(None) => {}
            Ok(Some(observed)) => {
                report.form_bound_ok[i] = false;
                report.messages.push(format!(
                    "potential{}: observed form ratio {observed:.6} exceeds declared sigma {}",
                    i + 1,
                    potential.sigma
                ));
            }
            Err(e) => {
                report.form_bound_ok[i] = false;
                report.messages.push(format!("potential{}: {e}", i + 1));
            }
        }
        if !potential_is_radially_attractive(potential, grid) {
            report.radial_ok = false;
            report.messages.push(format!(
                "potential{} is not radially nondecreasing; symmetry-based checks will be skipped",
                i + 1
            ));
        }
    }
    report
}

/// Returns `Some(observed_sigma)` when a random field violates the declared
/// bound, `None` when all trials pass.
fn probe_form_bound(
    potential: &Potential,
    grid: &Grid,
    trials: usize,
    seed: u64,
) -> Result<Option<f64>> {
    if potential.is_zero() {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..trials {
        let u = random_bumps(grid, &mut rng, 3);
        let kinetic = u.grad_norm_sq();
        if kinetic <= 1e-12 {
            continue;
        }
        let ratio = (v_norm_sq(&u, potential)? - potential.tau * u.mass()) / kinetic;
        worst = worst.max(ratio);
    }
    if worst > potential.sigma + 1e-9 {
        Ok(Some(worst))
    } else {
        Ok(None)
    }
}

fn potential_is_radially_attractive(potential: &Potential, grid: &Grid) -> bool {
    match &potential.kind {
        PotentialKind::Zero | PotentialKind::GaussianWell { .. } | PotentialKind::PowerCoulomb { .. } => {
            true
        }
        PotentialKind::Tabulated(f) => {
            if !f.grid().same_layout(grid) {
                return false;
            }
            // V must be (approximately) a nondecreasing function of radius
            let mut samples: Vec<(f64, f64)> = f
                .values()
                .iter()
                .enumerate()
                .map(|(flat, &v)| (grid.radius_sq_of(flat), v))
                .collect();
            samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut prev = f64::NEG_INFINITY;
            for &(_, v) in &samples {
                if v < prev - 1e-9 {
                    return false;
                }
                prev = prev.max(v);
            }
            true
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use approx::assert_relative_eq;

    fn cubic_pair() -> Nonlinearity {
        Nonlinearity::new(
            vec![PowerTerm {
                coefficient: 1.0,
                exponent: 4.0,
            }],
            vec![PowerTerm {
                coefficient: 1.0,
                exponent: 3.0,
            }],
            vec![CouplingTerm {
                coefficient: 2.0,
                exponents: (1.5, 1.6),
            }],
        )
        .unwrap()
    }

    #[test]
    fn value_and_partials_match_hand_computation() {
        let nl = cubic_pair();
        let (s, t) = (0.7f64, 1.3f64);
        let expect = 0.25 * s.powi(4) + (1.0 / 3.0) * t.powi(3)
            + 2.0 * s.powf(1.5) * t.powf(1.6);
        assert_relative_eq!(nl.value(s, t).unwrap(), expect, max_relative = 1e-14);
        let (ds, dt) = nl.partials(s, t).unwrap();
        let expect_ds = s.powi(3) + 2.0 * 1.5 * s.powf(0.5) * t.powf(1.6);
        let expect_dt = t.powi(2) + 2.0 * 1.6 * s.powf(1.5) * t.powf(0.6);
        assert_relative_eq!(ds, expect_ds, max_relative = 1e-14);
        assert_relative_eq!(dt, expect_dt, max_relative = 1e-14);
    }

    #[test]
    fn partials_agree_with_central_differences() {
        let nl = cubic_pair();
        let eps = 1e-6;
        for &(s, t) in &[(0.3, 0.9), (1.7, 0.2), (2.5, 2.5)] {
            let (ds, dt) = nl.partials(s, t).unwrap();
            let num_ds =
                (nl.value(s + eps, t).unwrap() - nl.value(s - eps, t).unwrap()) / (2.0 * eps);
            let num_dt =
                (nl.value(s, t + eps).unwrap() - nl.value(s, t - eps).unwrap()) / (2.0 * eps);
            assert_relative_eq!(ds, num_ds, max_relative = 1e-7);
            assert_relative_eq!(dt, num_dt, max_relative = 1e-7);
        }
    }

    #[test]
    fn partials_vanish_at_origin_and_reject_negative_input() {
        let nl = cubic_pair();
        assert_eq!(nl.partials(0.0, 0.0).unwrap(), (0.0, 0.0));
        assert!(nl.value(-0.1, 0.0).is_err());
        assert!(nl.partials(0.0, -2.0).is_err());
    }

    #[test]
    fn partial_in_first_slot_is_monotone_in_first_argument()  {
        let nl = cubic_pair();
        let t = 0.8;
        let mut prev = 0.0;
        for k in 1..50 {
            let s = k as f64 * 0.1;
            let (ds, _) = nl.partials(s, t).unwrap();
            assert!(ds >= prev, "dG/ds must be nondecreasing in s");
            prev = ds;
        }
    }

    #[test]
    fn terms_are_sorted_by_exponent() {
        let nl = Nonlinearity::new(
            vec![
                PowerTerm {
                    coefficient: 1.0,
                    exponent: 5.0,
                },
                PowerTerm {
                    coefficient: 1.0,
                    exponent: 3.0,
                },
            ],
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(nl.first_terms()[0].exponent, 3.0);
    }

    #[test]
    fn effective_frequencies_follow_the_min_formula() {
        let nl = Nonlinearity::new(
            vec![],
            vec![],
            vec![CouplingTerm {
                coefficient: 1.0,
                exponents: (1.2, 1.5),
            }],
        )
        .unwrap();
        // slow first component drags the second one: f2 = (1.2/0.5)^2 * 0.25
        let (f1, f2) = nl.effective_frequencies(0.25, 4.0);
        assert_relative_eq!(f2, 1.44, max_relative = 1e-12);
        // component 1 keeps its own rate: (1.5/0.8)^2 * 4 >> 0.25
        assert_relative_eq!(f1, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn effective_frequencies_saturate_for_steep_coupling() {
        let nl = Nonlinearity::new(
            vec![],
            vec![],
            vec![CouplingTerm {
                coefficient: 1.0,
                exponents: (1.5, 2.5),
            }],
        )
        .unwrap();
        // (2 - r2)_+ = 0, so the ratio is +inf and f2 = l2
        let (_, f2) = nl.effective_frequencies(0.3, 7.0);
        assert_eq!(f2, 7.0);
    }

    #[test]
    fn equal_multipliers_are_fixed_points() {
        let nl = cubic_pair();
        for lambda in [0.5, 1.0, 3.0] {
            let (f1, f2) = nl.effective_frequencies(lambda, lambda);
            assert_eq!((f1, f2), (lambda, lambda));
        }
    }

    #[test]
    fn effective_frequencies_swap_symmetry() {
        let nl = Nonlinearity::new(
            vec![],
            vec![],
            vec![CouplingTerm {
                coefficient: 1.0,
                exponents: (1.3, 1.7),
            }],
        )
        .unwrap();
        let swapped = Nonlinearity::new(
            vec![],
            vec![],
            vec![CouplingTerm {
                coefficient: 1.0,
                exponents: (1.7, 1.3),
            }],
        )
        .unwrap();
        for &(l1, l2) in &[(0.2, 1.0), (2.0, 0.7), (1.0, 1.0)] {
            let (f1, f2) = nl.effective_frequencies(l1, l2);
            let (g2, g1) = swapped.effective_frequencies(l2, l1);
            assert_eq!((f1, f2), (g1, g2));
        }
    }

    #[test]
    fn power_well_pointwise_values() {
        let p = Potential::power_coulomb(1.0, 1.0, 0.5, 10.0).unwrap();
        assert_relative_eq!(p.eval_radial(4.0, 0.01), -0.5, max_relative = 1e-14);
        // core clip: below h/2 the value saturates
        assert_relative_eq!(p.eval_radial(1e-12, 0.5), -2.0, max_relative = 1e-14);
    }

    #[test]
    fn gaussian_well_form_bound_certified() {
        let grid = Grid::new(1, 12.0, 256, Boundary::Periodic).unwrap();
        let nl = Nonlinearity::scalar_power(1.0, 4.0);
        let problem = Problem::new(
            nl,
            [Potential::gaussian_well(2.0, 1.5).unwrap(), Potential::zero()],
            [1.0, 0.0],
        )
        .unwrap();
        let report = validate_problem(&problem, &grid);
        assert!(report.all_ok(), "{:?}", report.messages);
    }

    #[test]
    fn understated_tau_is_caught() {
        let grid = Grid::new(1, 12.0, 256, Boundary::Periodic).unwrap();
        let mut bad = Potential::gaussian_well(2.0, 1.5).unwrap();
        bad.tau = 0.0; // claims the well costs nothing
        bad.sigma = 0.0;
        let problem = Problem::new(
            Nonlinearity::scalar_power(1.0, 4.0),
            [bad, Potential::zero()],
            [1.0, 0.0],
        )
        .unwrap();
        let report = validate_problem(&problem, &grid);
        assert!(!report.form_bound_ok[0]);
    }

    #[test]
    fn out_of_range_exponent_is_reported_with_range() {
        let grid = Grid::new(1, 12.0, 256, Boundary::Periodic).unwrap();
        let problem = Problem::new(
            Nonlinearity::scalar_power(1.0, 7.0),
            [Potential::zero(), Potential::zero()],
            [1.0, 0.0],
        )
        .unwrap();
        let report = validate_problem(&problem, &grid);
        assert!(!report.range_ok);
        assert!(report.messages.iter().any(|m| m.contains("(2, 6)")), "{:?}", report.messages);
    }

    #[test]
    fn mass_critical_exponent_is_rejected() {
        let grid = Grid::new(1, 12.0, 256, Boundary::Periodic).unwrap();
        let problem = Problem::new(
            Nonlinearity::scalar_power(1.0, 6.0),
            [Potential::zero(), Potential::zero()],
            [1.0, 0.0],
        )
        .unwrap();
        assert!(!validate_problem(&problem, &grid).range_ok);
    }

    #[test]
    fn coupled_exponents_below_one_are_rejected() {
        let grid = Grid::new(1, 12.0, 256, Boundary::Periodic).unwrap();
        let nl = Nonlinearity::new(
            vec![],
            vec![],
            vec![CouplingTerm {
                coefficient: 1.0,
                exponents: (0.9, 2.0),
            }],
        )
        .unwrap();
        let problem =
            Problem::new(nl, [Potential::zero(), Potential::zero()], [1.0, 1.0]).unwrap();
        assert!(!validate_problem(&problem, &grid).range_ok);
    }

    #[test]
    fn v_norm_sq_matches_closed_form() {
        let grid = Grid::new(1, 16.0, 512, Boundary::Periodic).unwrap();
        let u = Field::from_fn(&grid, |x| (-x[0] * x[0] / 2.0).exp());
        let well = Potential::gaussian_well(1.0, 1.0).unwrap();
        // integral exp(-x^2) * exp(-x^2) = sqrt(pi/2)
        assert_relative_eq!(
            v_norm_sq(&u, &well).unwrap(),
            (std::f64::consts::PI / 2.0).sqrt(),
            max_relative = 1e-10
        );
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        // a coupling can only slow a tail down, never steepen it, and the
        // effective rates are symmetric under swapping the components
        #[test]
        fn effective_frequencies_never_exceed_the_multipliers(
            l1 in 0.01f64..10.0,
            l2 in 0.01f64..10.0,
            r1 in 1.05f64..2.5,
            r2 in 1.05f64..2.5,
        ) {
            let nl = Nonlinearity::new(
                vec![PowerTerm { coefficient: 1.0, exponent: 3.0 }],
                vec![PowerTerm { coefficient: 1.0, exponent: 3.0 }],
                vec![CouplingTerm { coefficient: 0.5, exponents: (r1, r2) }],
            ).unwrap();
            let (f1, f2) = nl.effective_frequencies(l1, l2);
            proptest::prop_assert!(f1 > 0.0 && f1 <= l1);
            proptest::prop_assert!(f2 > 0.0 && f2 <= l2);

            let swapped = Nonlinearity::new(
                vec![PowerTerm { coefficient: 1.0, exponent: 3.0 }],
                vec![PowerTerm { coefficient: 1.0, exponent: 3.0 }],
                vec![CouplingTerm { coefficient: 0.5, exponents: (r2, r1) }],
            ).unwrap();
            let (g2, g1) = swapped.effective_frequencies(l2, l1);
            proptest::prop_assert_eq!(f1, g1);
            proptest::prop_assert_eq!(f2, g2);
        }
    }
}
