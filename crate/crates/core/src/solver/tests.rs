use super::*;
use crate::milp::{LinearConstraint, MilpModel, Sense, VarRef, VariableDef};
use proptest::prelude::*;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn single_bound_maximization() {
    let mut m = MilpModel::new("lp");
    let x = m.add_variable(VariableDef::nonnegative("x")).unwrap();
    m.add_constraint(LinearConstraint::new("cap", vec![(x, 1.0)], Sense::Le, 3.0))
        .unwrap();
    m.set_objective(vec![(x, -1.0)], 0.0).unwrap();
    let lp = solve_lp(&m, &opts()).unwrap();
    assert_eq!(lp.status, LpStatus::Optimal);
    assert!((lp.objective + 3.0).abs() < 1e-9);
    assert!((lp.values[0] - 3.0).abs() < 1e-9);
    // binding <= row in a minimization has a nonpositive dual
    assert!((lp.dual_values[0] + 1.0).abs() < 1e-9);
}

/// Dual of the inner maximization for the one-flight worked instance:
/// `min 0.4 a + b  s.t. a + b >= 4, b >= 0`, `a >= 0`, `b` free.
fn worked_dual() -> MilpModel {
    let mut m = MilpModel::new("dual");
    let a = m.add_variable(VariableDef::nonnegative("alpha")).unwrap();
    let b = m.add_variable(VariableDef::free("beta")).unwrap();
    m.add_constraint(LinearConstraint::new("xi0", vec![(a, 1.0), (b, 1.0)], Sense::Ge, 4.0))
        .unwrap();
    m.add_constraint(LinearConstraint::new("xi1", vec![(b, 1.0)], Sense::Ge, 0.0))
        .unwrap();
    m.set_objective(vec![(a, 0.4), (b, 1.0)], 0.0).unwrap();
    m
}

#[test]
fn worked_dual_matches_vertex_enumeration() {
    // vertices of {a >= 0, a + b >= 4, b >= 0} in the plane
    let candidates = [(4.0, 0.0), (0.0, 4.0), (0.0, 0.0)];
    let oracle = candidates
        .iter()
        .filter(|(a, b)| *a >= 0.0 && a + b >= 4.0 - 1e-12 && *b >= 0.0)
        .map(|(a, b)| 0.4 * a + b)
        .fold(f64::INFINITY, f64::min);
    assert!((oracle - 1.6).abs() < 1e-12);

    let lp = solve_lp(&worked_dual(), &opts()).unwrap();
    assert_eq!(lp.status, LpStatus::Optimal);
    assert!((lp.objective - oracle).abs() < 1e-9);
    assert!((lp.values[0] - 4.0).abs() < 1e-9 && lp.values[1].abs() < 1e-9);
    assert!(lp.dual_values.iter().all(|y| *y >= -1e-12));
}

#[test]
fn contradictory_bounds_are_infeasible() {
    let mut m = MilpModel::new("inf");
    let x = m.add_variable(VariableDef::nonnegative("x")).unwrap();
    m.add_constraint(LinearConstraint::new("a", vec![(x, 1.0)], Sense::Le, 1.0))
        .unwrap();
    m.add_constraint(LinearConstraint::new("b", vec![(x, 1.0)], Sense::Ge, 2.0))
        .unwrap();
    assert_eq!(solve_lp(&m, &opts()).unwrap().status, LpStatus::Infeasible);
    assert_eq!(solve_milp(&m, &opts()).unwrap().status, SolveStatus::Infeasible);
}

#[test]
fn unbounded_ray_detected() {
    let mut m = MilpModel::new("ray");
    let x = m.add_variable(VariableDef::nonnegative("x")).unwrap();
    let y = m.add_variable(VariableDef::free("y")).unwrap();
    m.add_constraint(LinearConstraint::new("r", vec![(x, 1.0), (y, -1.0)], Sense::Le, 2.0))
        .unwrap();
    m.set_objective(vec![(x, -1.0)], 0.0).unwrap();
    assert_eq!(solve_lp(&m, &opts()).unwrap().status, LpStatus::Unbounded);
    assert_eq!(solve_milp(&m, &opts()).unwrap().status, SolveStatus::Unbounded);
}

#[test]
fn beale_cycling_example_terminates() {
    let mut m = MilpModel::new("beale");
    let x: Vec<VarRef> = (4..=7)
        .map(|i| m.add_variable(VariableDef::nonnegative(format!("x{i}"))).unwrap())
        .collect();
    m.add_constraint(LinearConstraint::new(
        "r1",
        vec![(x[0], 0.25), (x[1], -8.0), (x[2], -1.0), (x[3], 9.0)],
        Sense::Le,
        0.0,
    ))
    .unwrap();
    m.add_constraint(LinearConstraint::new(
        "r2",
        vec![(x[0], 0.5), (x[1], -12.0), (x[2], -0.5), (x[3], 3.0)],
        Sense::Le,
        0.0,
    ))
    .unwrap();
    m.add_constraint(LinearConstraint::new("r3", vec![(x[2], 1.0)], Sense::Le, 1.0))
        .unwrap();
    m.set_objective(vec![(x[0], -0.75), (x[1], 20.0), (x[2], -0.5), (x[3], 6.0)], 0.0)
        .unwrap();
    let lp = solve_lp(&m, &opts()).unwrap();
    assert_eq!(lp.status, LpStatus::Optimal);
    assert!((lp.objective + 1.25).abs() < 1e-9, "{}", lp.objective);
}

#[test]
fn equality_rows_and_redundancy() {
    // x + y = 2 twice (redundant), x - y = 0
    let mut m = MilpModel::new("eq");
    let x = m.add_variable(VariableDef::free("x")).unwrap();
    let y = m.add_variable(VariableDef::free("y")).unwrap();
    for name in ["s1", "s2"] {
        m.add_constraint(LinearConstraint::new(name, vec![(x, 1.0), (y, 1.0)], Sense::Eq, 2.0))
            .unwrap();
    }
    m.add_constraint(LinearConstraint::new("d", vec![(x, 1.0), (y, -1.0)], Sense::Eq, 0.0))
        .unwrap();
    m.set_objective(vec![(x, 1.0)], 5.0).unwrap();
    let lp = solve_lp(&m, &opts()).unwrap();
    assert_eq!(lp.status, LpStatus::Optimal);
    assert!((lp.values[0] - 1.0).abs() < 1e-9 && (lp.values[1] - 1.0).abs() < 1e-9);
    assert!((lp.objective - 6.0).abs() < 1e-9);
}

#[test]
fn continuous_model_milp_equals_lp() {
    let m = worked_dual();
    let lp = solve_lp(&m, &opts()).unwrap();
    let milp = solve_milp(&m, &opts()).unwrap();
    assert_eq!(milp.status, SolveStatus::Optimal);
    assert_eq!(milp.stats.nodes, 1);
    assert_eq!(milp.objective, lp.objective);
    assert_eq!(milp.values, lp.values);
}

#[test]
fn knapsack_branches_to_integer_optimum() {
    // max 5a + 4b + 3c s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
    let mut m = MilpModel::new("knap");
    let v: Vec<VarRef> = ["a", "b", "c"]
        .iter()
        .map(|n| m.add_variable(VariableDef::binary(*n)).unwrap())
        .collect();
    let rows = [([2.0, 3.0, 1.0], 5.0), ([4.0, 1.0, 2.0], 11.0), ([3.0, 4.0, 2.0], 8.0)];
    for (k, (coef, rhs)) in rows.iter().enumerate() {
        let terms = v.iter().zip(coef).map(|(r, a)| (*r, *a)).collect();
        m.add_constraint(LinearConstraint::new(format!("r{k}"), terms, Sense::Le, *rhs))
            .unwrap();
    }
    m.set_objective(vec![(v[0], -5.0), (v[1], -4.0), (v[2], -3.0)], 0.0)
        .unwrap();
    // brute force over 8 assignments
    let mut oracle = f64::INFINITY;
    for mask in 0..8u32 {
        let x: Vec<f64> = (0..3).map(|i| ((mask >> i) & 1) as f64).collect();
        if m.violations(&x, 1e-9).is_empty() {
            oracle = oracle.min(m.objective_value(&x));
        }
    }
    for order in [NodeOrder::BestBound, NodeOrder::DepthFirst] {
        for branching in [Branching::MostFractional, Branching::LowestIndex] {
            let o = SolverOptions {
                node_order: order,
                branching,
                ..opts()
            };
            let s = solve_milp(&m, &o).unwrap();
            assert_eq!(s.status, SolveStatus::Optimal);
            assert!((s.objective - oracle).abs() < 1e-9);
            assert!(s.stats.best_bound <= s.objective + 1e-9);
        }
    }
}

#[test]
fn node_limit_keeps_incumbent_status() {
    let mut m = MilpModel::new("many");
    let v: Vec<VarRef> = (0..8)
        .map(|i| m.add_variable(VariableDef::binary(format!("b{i}"))).unwrap())
        .collect();
    let terms = v.iter().enumerate().map(|(i, r)| (*r, 2.0 + i as f64 * 0.37)).collect();
    m.add_constraint(LinearConstraint::new("w", terms, Sense::Le, 9.5))
        .unwrap();
    let obj = v
        .iter()
        .enumerate()
        .map(|(i, r)| (*r, -(3.0 + (i as f64 * 1.7) % 2.3)))
        .collect();
    m.set_objective(obj, 0.0).unwrap();
    let s = solve_milp(
        &m,
        &SolverOptions {
            node_limit: 3,
            ..opts()
        },
    )
    .unwrap();
    assert_eq!(s.status, SolveStatus::NodeLimit);
    assert!(s.stats.nodes <= 3);
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-9 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                let pivot = a[c].clone();
                for (x, y) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                    *x -= f * y;
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Optimum over a box-bounded polytope by enumerating every vertex.
fn vertex_oracle(n: usize, rows: &[(Vec<f64>, f64)], cost: &[f64], hi: f64) -> Option<f64> {
    // hyperplanes: rows as equalities plus x_j = 0 and x_j = hi
    let mut planes: Vec<(Vec<f64>, f64)> = rows.to_vec();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), 0.0));
        planes.push((e, hi));
    }
    let k = planes.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = gauss_solve(a, b) {
            let feasible = x.iter().all(|v| *v >= -1e-7 && *v <= hi + 1e-7)
                && rows
                    .iter()
                    .all(|(r, rhs)| r.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() <= rhs + 1e-7);
            if feasible {
                let z: f64 = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(z, |b: f64| b.min(z)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for l in i + 1..n {
                    idx[l] = idx[l - 1] + 1;
                }
                break;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_matches_vertex_enumeration(
        n in 2usize..4,
        raw_rows in proptest::collection::vec((proptest::collection::vec(-4i32..5, 3), -3i32..10), 1..5),
        raw_cost in proptest::collection::vec(-5i32..6, 3),
    ) {
        let hi = 4.0;
        let rows: Vec<(Vec<f64>, f64)> = raw_rows.iter()
            .map(|(a, b)| (a[..n].iter().map(|v| *v as f64).collect(), *b as f64))
            .collect();
        let cost: Vec<f64> = raw_cost[..n].iter().map(|v| *v as f64).collect();
        let mut m = MilpModel::new("rand");
        let vars: Vec<VarRef> = (0..n)
            .map(|j| m.add_variable(VariableDef::continuous(format!("v{j}"), 0.0, hi)).unwrap())
            .collect();
        for (k, (a, b)) in rows.iter().enumerate() {
            let terms = vars.iter().zip(a).filter(|(_, c)| **c != 0.0).map(|(v, c)| (*v, *c)).collect();
            m.add_constraint(LinearConstraint::new(format!("r{k}"), terms, Sense::Le, *b)).unwrap();
        }
        m.set_objective(vars.iter().zip(&cost).map(|(v, c)| (*v, *c)).collect(), 0.0).unwrap();
        let lp = solve_lp(&m, &opts()).unwrap();
        match vertex_oracle(n, &rows, &cost, hi) {
            None => prop_assert_eq!(lp.status, LpStatus::Infeasible),
            Some(z) => {
                prop_assert_eq!(lp.status, LpStatus::Optimal);
                prop_assert!((lp.objective - z).abs() < 1e-7, "lp {} oracle {}", lp.objective, z);
                prop_assert!(m.violations(&lp.values, 1e-7).is_empty());
                for (y, c) in lp.dual_values.iter().zip(m.constraints()) {
                    prop_assert!(*y <= 1e-9, "dual {} on {}", y, c.name);
                }
            }
        }
    }
}
