//! The in-crate simplex against an independent LP solver.

use firobf::error::Error;
use firobf::filter_design::{
    bound_program, build_frequency_grid, coefficient_bounds, design_filter, FilterSpec, DESIGN_DENSITY,
};
use firobf::lp::LinearProgram;
use minilp::{ComparisonOp, OptimizationDirection, Problem};

const AGREEMENT: f64 = 1e-6;

fn oracle(lp: &LinearProgram, objective: &[f64], direction: OptimizationDirection) -> Result<f64, minilp::Error> {
    let mut p = Problem::new(direction);
    let vars: Vec<_> = (0..lp.num_vars()).map(|j| p.add_var(objective[j], lp.bounds(j))).collect();
    for k in 0..lp.num_rows() {
        let terms: Vec<_> = vars.iter().copied().zip(lp.row(k).iter().copied()).collect();
        p.add_constraint(terms.as_slice(), ComparisonOp::Le, lp.rhs(k));
    }
    Ok(p.solve()?.objective())
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

#[test]
fn filter1_bounds_match_oracle() {
    let spec = &FilterSpec::benchmarks()[0];
    let grid = build_frequency_grid(spec, DESIGN_DENSITY);
    let lp = bound_program(spec, &grid);
    let bounds = coefficient_bounds(spec, &grid).unwrap();
    for i in 0..=spec.half_order() {
        let e = unit(lp.num_vars(), i);
        let lo = oracle(&lp, &e, OptimizationDirection::Minimize).unwrap();
        let hi = oracle(&lp, &e, OptimizationDirection::Maximize).unwrap();
        assert!((lo - bounds.lower[i]).abs() < AGREEMENT, "tap {i}: {lo} vs {}", bounds.lower[i]);
        assert!((hi - bounds.upper[i]).abs() < AGREEMENT, "tap {i}: {hi} vs {}", bounds.upper[i]);
    }
}

#[test]
fn filter2_sampled_bounds_match_oracle() {
    let spec = &FilterSpec::benchmarks()[1];
    let grid = build_frequency_grid(spec, DESIGN_DENSITY);
    let lp = bound_program(spec, &grid);
    for i in [0, 7, 29] {
        let e = unit(lp.num_vars(), i);
        let ours = lp.minimize(&e).unwrap().objective;
        let theirs = oracle(&lp, &e, OptimizationDirection::Minimize).unwrap();
        assert!((ours - theirs).abs() < AGREEMENT, "tap {i}: {ours} vs {theirs}");
    }
}

#[test]
fn bounds_are_tight() {
    let spec = &FilterSpec::benchmarks()[0];
    let grid = build_frequency_grid(spec, DESIGN_DENSITY);
    let bounds = coefficient_bounds(spec, &grid).unwrap();
    let base = bound_program(spec, &grid);
    let n = base.num_vars();
    for i in 0..n {
        // h_i ≤ lower − 1e-6 and −h_i ≤ −(upper + 1e-6) must both be infeasible.
        let mut below = base.clone();
        below.add_le(&unit(n, i), bounds.lower[i] - 1e-6);
        assert!(matches!(below.minimize(&unit(n, 0)), Err(Error::Infeasible)), "tap {i} below");
        assert!(oracle(&below, &unit(n, 0), OptimizationDirection::Minimize).is_err());

        let mut above = base.clone();
        let neg: Vec<f64> = unit(n, i).iter().map(|v| -v).collect();
        above.add_le(&neg, -(bounds.upper[i] + 1e-6));
        assert!(matches!(above.minimize(&unit(n, 0)), Err(Error::Infeasible)), "tap {i} above");
    }
}

#[test]
fn designed_taps_lie_within_bounds() {
    for spec in &FilterSpec::benchmarks()[..2] {
        let d = design_filter(spec, DESIGN_DENSITY).unwrap();
        for (i, &h) in d.real.h.iter().enumerate() {
            assert!(d.bounds.lower[i] - 1e-9 <= h && h <= d.bounds.upper[i] + 1e-9);
        }
        let q = &d.quantized;
        for i in 0..q.taps() {
            assert!(q.bounds_l[i] <= q.coeffs[i] && q.coeffs[i] <= q.bounds_u[i]);
        }
    }
}
