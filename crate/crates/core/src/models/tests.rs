use super::*;
use crate::domain::{ConnectionPair, Flight, SupportGrid, TimeHorizon};
use crate::milp::VarKind;
use crate::solver::{solve_milp, SolverOptions};
use proptest::prelude::*;

fn schedule(t: u32, flights: &[(u32, f64)], conns: &[(usize, usize, u32)], c_h: f64) -> FlightSchedule {
    let flights = flights
        .iter()
        .enumerate()
        .map(|(i, (r, c))| Flight::new(format!("f{}", i + 1), "A", *r, *c))
        .collect();
    let conns = conns
        .iter()
        .map(|(a, b, s)| ConnectionPair::new(format!("f{}", a + 1), format!("f{}", b + 1), *s))
        .collect();
    FlightSchedule::new(TimeHorizon::new(t).unwrap(), flights, conns, c_h).unwrap()
}

fn dist(atoms: &[(u32, f64)]) -> CapacityDistribution {
    CapacityDistribution::new(atoms.iter().map(|a| a.0).collect(), atoms.iter().map(|a| a.1).collect()).unwrap()
}

fn solve(model: &MilpModel) -> Solution {
    solve_milp(model, &SolverOptions::default()).unwrap()
}

fn worked() -> FlightSchedule {
    schedule(2, &[(1, 1.0)], &[], 2.0)
}

fn worked_amb(eps: f64) -> AmbiguitySpec {
    AmbiguitySpec::new(dist(&[(1, 1.0)]), eps, SupportGrid::new(vec![0, 1]).unwrap()).unwrap()
}

// ---- brute-force oracles, independent of the model builders ----

/// Every slot vector respecting windows and connections.
fn assignments(s: &FlightSchedule) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for f in &s.flights {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                f.window(s.horizon).map(move |t| {
                    let mut p = prefix.clone();
                    p.push(t);
                    p
                })
            })
            .collect();
    }
    out.retain(|a| {
        s.connections.iter().all(|c| {
            let i = s.flight_index(&c.predecessor).unwrap();
            let j = s.flight_index(&c.successor).unwrap();
            let d1 = a[i] - s.flights[i].scheduled_arrival;
            let d2 = a[j] - s.flights[j].scheduled_arrival;
            d1 as i64 - c.slack as i64 <= d2 as i64
        })
    });
    out
}

fn ground(s: &FlightSchedule, a: &[u32]) -> f64 {
    s.flights
        .iter()
        .zip(a)
        .map(|(f, t)| f.ground_cost * (t - f.scheduled_arrival) as f64)
        .sum()
}

fn arrivals(s: &FlightSchedule, a: &[u32]) -> Vec<i64> {
    let mut n = vec![0; s.horizon.num_slots() as usize];
    for t in a {
        n[*t as usize - 1] += 1;
    }
    n
}

fn queue_cost(s: &FlightSchedule, a: &[u32], cap: u32) -> f64 {
    let mut y = 0i64;
    let mut total = 0i64;
    for n in arrivals(s, a) {
        y = (y + n - cap as i64).max(0);
        total += y;
    }
    s.airborne_cost * total as f64
}

fn det_oracle(s: &FlightSchedule, k: u32) -> Option<f64> {
    assignments(s)
        .iter()
        .filter(|a| arrivals(s, a).iter().all(|n| *n <= k as i64))
        .map(|a| ground(s, a))
        .min_by(f64::total_cmp)
}

fn sp_oracle(s: &FlightSchedule, d: &CapacityDistribution) -> Option<f64> {
    assignments(s)
        .iter()
        .map(|a| ground(s, a) + d.atoms().map(|(k, p)| p * queue_cost(s, a, k)).sum::<f64>())
        .min_by(f64::total_cmp)
}

/// `min_{alpha >= 0} eps*alpha + sum_s p_s max_xi (c(xi) - alpha |xi_s - xi|)`,
/// a convex piecewise-linear function minimized at 0 or a breakpoint.
fn dual_value(costs: &[(u32, f64)], amb: &AmbiguitySpec) -> f64 {
    let at = |alpha: f64| {
        amb.radius() * alpha
            + amb
                .empirical()
                .atoms()
                .map(|(xs, p)| {
                    p * costs
                        .iter()
                        .map(|(xi, c)| c - alpha * (*xi as f64 - xs as f64).abs())
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .sum::<f64>()
    };
    let mut candidates = vec![0.0];
    for (xs, _) in amb.empirical().atoms() {
        for (x1, c1) in costs {
            for (x2, c2) in costs {
                let d1 = (*x1 as f64 - xs as f64).abs();
                let d2 = (*x2 as f64 - xs as f64).abs();
                if d1 != d2 {
                    let a = (c1 - c2) / (d1 - d2);
                    if a > 0.0 {
                        candidates.push(a);
                    }
                }
            }
        }
    }
    candidates.into_iter().map(at).fold(f64::INFINITY, f64::min)
}

fn dr_oracle_for(s: &FlightSchedule, amb: &AmbiguitySpec, a: &[u32]) -> f64 {
    let costs: Vec<(u32, f64)> = amb
        .grid()
        .values()
        .iter()
        .map(|xi| (*xi, queue_cost(s, a, *xi)))
        .collect();
    ground(s, a) + dual_value(&costs, amb)
}

fn dr_oracle(s: &FlightSchedule, amb: &AmbiguitySpec) -> Option<f64> {
    assignments(s)
        .iter()
        .map(|a| dr_oracle_for(s, amb, a))
        .min_by(f64::total_cmp)
}

// ---- worked examples ----

#[test]
fn d_saghp_two_flights_one_slot_capacity() {
    let s = schedule(3, &[(1, 1.0), (1, 1.0)], &[], 5.0);
    let m = build_d_saghp(&s, 1);
    let sol = solve(&m);
    assert!((sol.objective - 1.0).abs() < 1e-9);
    let p = extract_policy(&m, &sol, &s).unwrap();
    assert_eq!(p.ground_cost, 1.0);
    let mut slots: Vec<u32> = p.assignments.values().copied().collect();
    slots.sort();
    assert_eq!(slots, vec![1, 2]);
    // both {f1->1, f2->2} and {f1->2, f2->1} are optimal; the vertex found is deterministic
    let again = extract_policy(&m, &solve(&m), &s).unwrap();
    assert_eq!(again, p);
    assert_eq!(det_oracle(&s, 1), Some(1.0));
}

#[test]
fn d_saghp_ample_capacity_and_infeasible() {
    let s = schedule(3, &[(1, 2.0), (2, 1.0), (2, 3.0)], &[], 5.0);
    let m = build_d_saghp(&s, 3);
    let sol = solve(&m);
    assert!(sol.objective.abs() < 1e-9);
    let p = extract_policy(&m, &sol, &s).unwrap();
    assert_eq!(p, GroundHoldingPolicy::no_delay(&s));

    let tight = schedule(1, &[(1, 1.0), (1, 1.0)], &[], 5.0);
    assert_eq!(solve(&build_d_saghp(&tight, 1)).status, SolveStatus::Infeasible);
}

#[test]
fn s_saghp_worked_example() {
    let s = schedule(2, &[(1, 1.0)], &[], 3.0);
    let m = build_s_saghp(&s, &dist(&[(0, 0.5), (1, 0.5)]), &BuildOptions::default());
    let sol = solve(&m);
    assert!((sol.objective - 2.5).abs() < 1e-9, "{}", sol.objective);
    assert_eq!(extract_policy(&m, &sol, &s).unwrap().assignments["f1"], 2);
}

#[test]
fn s_saghp_degenerate_matches_deterministic() {
    let s = schedule(3, &[(1, 1.0), (1, 1.0)], &[], 5.0);
    let sp = solve(&build_s_saghp(
        &s,
        &CapacityDistribution::degenerate(1),
        &BuildOptions::default(),
    ));
    let det = solve(&build_d_saghp(&s, 1));
    assert!((sp.objective - det.objective).abs() < 1e-9);
    assert!((sp.objective - 1.0).abs() < 1e-9);
    let ample = solve(&build_s_saghp(
        &s,
        &dist(&[(2, 0.3), (5, 0.7)]),
        &BuildOptions::default(),
    ));
    assert!(ample.objective.abs() < 1e-9);
}

#[test]
fn dr_saghp_worked_examples() {
    let s = worked();
    for (eps, expected, slot) in [
        (0.4, 1.6, Some(1)),
        (0.5, 2.0, None),
        (1.0, 3.0, Some(2)),
        (0.0, 0.0, Some(1)),
    ] {
        let amb = worked_amb(eps);
        let m = build_dr_saghp(&s, &amb, &BuildOptions::default());
        let sol = solve(&m);
        assert!((sol.objective - expected).abs() < 1e-6, "eps {eps}: {}", sol.objective);
        assert!((dr_oracle(&s, &amb).unwrap() - expected).abs() < 1e-9);
        let p = extract_policy(&m, &sol, &s).unwrap();
        if let Some(slot) = slot {
            assert_eq!(p.assignments["f1"], slot, "eps {eps}");
        }
    }
    let amb = worked_amb(0.4);
    let m = build_dr_saghp(&s, &amb, &BuildOptions::default());
    let sol = solve(&m);
    let duals = robust_duals(&m, &sol, &s, &amb, None).unwrap();
    assert!((duals.alpha - 4.0).abs() < 1e-6);
    assert!(duals.beta[0].abs() < 1e-6);
    assert_eq!(duals.recourse_costs[&0], 4.0);
    assert!((duals.dual_objective(&amb) - 1.6).abs() < 1e-6);
}

#[test]
fn dr_saghp_options() {
    let s = worked();
    let amb = worked_amb(0.0);
    let capped = build_dr_saghp(
        &s,
        &amb,
        &BuildOptions {
            cap_alpha: true,
            ..Default::default()
        },
    );
    let alpha = capped.var_by_name(&names::alpha()).unwrap();
    assert_eq!(capped.variables()[alpha.index()].upper, ALPHA_CAP);
    assert!(solve(&capped).objective.abs() < 1e-9);

    // With the queue forced empty at T, the zero-capacity scenario cannot
    // absorb the flight at all, so any mass on it is infeasible.
    let clear = BuildOptions {
        clear_queue_at_horizon: true,
        ..Default::default()
    };
    let sol = solve(&build_dr_saghp(&s, &worked_amb(0.4), &clear));
    assert_eq!(sol.status, SolveStatus::Infeasible);
    let relaxed = AmbiguitySpec::new(dist(&[(1, 1.0)]), 0.4, SupportGrid::new(vec![1, 2]).unwrap()).unwrap();
    assert!(solve(&build_dr_saghp(&s, &relaxed, &clear)).objective.abs() < 1e-9);
}

#[test]
fn dr_maghp_separable_and_connected() {
    let flights = vec![Flight::new("a1", "A", 1, 1.0), Flight::new("b1", "B", 1, 1.0)];
    let sched = |conns: Vec<ConnectionPair>| {
        FlightSchedule::new(TimeHorizon::new(2).unwrap(), flights.clone(), conns, 2.0).unwrap()
    };
    let ambs: BTreeMap<String, AmbiguitySpec> =
        [("A".to_string(), worked_amb(0.4)), ("B".to_string(), worked_amb(0.4))].into();
    let airports = vec!["A".to_string(), "B".to_string()];

    let net = NetworkInstance::new(airports.clone(), sched(vec![]), ambs.clone()).unwrap();
    let m = build_dr_maghp(&net, &BuildOptions::default());
    let sol = solve(&m);
    assert!((sol.objective - 3.2).abs() < 1e-6);
    for z in ["A", "B"] {
        let d = robust_duals(&m, &sol, net.schedule(), net.ambiguity(z).unwrap(), Some(z)).unwrap();
        assert!((d.alpha - 4.0).abs() < 1e-6);
    }

    let loose = NetworkInstance::new(
        airports.clone(),
        sched(vec![ConnectionPair::new("a1", "b1", 5)]),
        ambs.clone(),
    )
    .unwrap();
    assert!((solve(&build_dr_maghp(&loose, &BuildOptions::default())).objective - 3.2).abs() < 1e-6);

    let zero = net.with_shared_radius(0.0).unwrap();
    assert!(solve(&build_dr_maghp(&zero, &BuildOptions::default())).objective.abs() < 1e-9);

    // At eps = 1 both airports hold; a tight connection forces the same at 0.4.
    let shared = net.with_shared_radius(1.0).unwrap();
    assert!((solve(&build_dr_maghp(&shared, &BuildOptions::default())).objective - 6.0).abs() < 1e-6);
}

#[test]
fn dr_maghp_cross_airport_coupling_binds() {
    let flights = vec![Flight::new("a1", "A", 1, 1.0), Flight::new("b1", "B", 1, 1.0)];
    let s = FlightSchedule::new(
        TimeHorizon::new(2).unwrap(),
        flights,
        vec![ConnectionPair::new("a1", "b1", 0)],
        2.0,
    )
    .unwrap();
    let a_amb = worked_amb(1.0);
    let b_amb = AmbiguitySpec::new(dist(&[(1, 1.0)]), 1.0, SupportGrid::new(vec![1]).unwrap()).unwrap();
    let net = NetworkInstance::new(
        vec!["A".into(), "B".into()],
        s.clone(),
        [("A".to_string(), a_amb), ("B".to_string(), b_amb)].into(),
    )
    .unwrap();
    let m = build_dr_maghp(&net, &BuildOptions::default());
    let sol = solve(&m);
    let p = extract_policy(&m, &sol, &s).unwrap();
    // A holds (3.0), so B must hold too (+1).
    assert_eq!(p.assignments["a1"], 2);
    assert_eq!(p.assignments["b1"], 2);
    assert!((sol.objective - 4.0).abs() < 1e-6);
}

#[test]
fn extract_policy_rejects_fractional() {
    let s = worked();
    let m = build_d_saghp(&s, 1);
    let mut sol = solve(&m);
    let x1 = m.var_by_name(&names::x("f1", 1)).unwrap();
    let x2 = m.var_by_name(&names::x("f1", 2)).unwrap();
    sol.values[x1.index()] = 0.5;
    sol.values[x2.index()] = 0.5;
    assert!(matches!(extract_policy(&m, &sol, &s), Err(PolicyError::NoSlot { .. })));
    sol.values[x1.index()] = 1.0;
    sol.values[x2.index()] = 1.0;
    assert!(matches!(
        extract_policy(&m, &sol, &s),
        Err(PolicyError::MultipleSlots { .. })
    ));
    sol.status = SolveStatus::Infeasible;
    assert!(matches!(extract_policy(&m, &sol, &s), Err(PolicyError::NoIncumbent(_))));
}

#[test]
fn policy_checks() {
    let s = schedule(3, &[(1, 1.0), (2, 2.0)], &[(0, 1, 0)], 5.0);
    let ok = GroundHoldingPolicy::from_assignments(&s, [("f1".into(), 2), ("f2".into(), 3)].into()).unwrap();
    assert_eq!(ok.ground_cost, 3.0);
    assert_eq!(ok.total_delay(), 2);
    assert_eq!(ok.arrivals_per_slot(&s, None), vec![0, 1, 1]);
    assert!(matches!(
        GroundHoldingPolicy::from_assignments(&s, [("f1".into(), 2), ("f2".into(), 2)].into()),
        Err(PolicyError::Coupling { .. })
    ));
    assert!(matches!(
        GroundHoldingPolicy::from_assignments(&s, [("f1".into(), 1), ("f2".into(), 1)].into()),
        Err(PolicyError::OutsideWindow { .. })
    ));
    assert!(matches!(
        GroundHoldingPolicy::from_assignments(&s, [("f1".into(), 1)].into()),
        Err(PolicyError::UnknownFlight(_))
    ));
}

// ---- randomized properties ----

#[derive(Debug, Clone)]
struct Case {
    schedule: FlightSchedule,
    dist: CapacityDistribution,
}

fn case() -> impl Strategy<Value = Case> {
    (1u32..=4, 1usize..=3, 1.0f64..6.0)
        .prop_flat_map(|(t, n, c_h)| {
            (
                Just(t),
                proptest::collection::vec((1..=t, 0u32..=3), n),
                proptest::option::of((0..n, 0..n, 0u32..=2)),
                proptest::collection::btree_map(0u32..=3, 1u32..=4, 1..=3),
                Just((c_h * 2.0).round() / 2.0),
            )
        })
        .prop_map(|(t, flights, conn, atoms, c_h)| {
            let flights: Vec<(u32, f64)> = flights.into_iter().map(|(r, c)| (r, c as f64)).collect();
            let conns: Vec<_> = conn.into_iter().filter(|(a, b, _)| a != b).collect();
            let total: u32 = atoms.values().sum();
            let d: Vec<(u32, f64)> = atoms.iter().map(|(k, w)| (*k, *w as f64 / total as f64)).collect();
            Case {
                schedule: schedule(t, &flights, &conns, c_h),
                dist: dist(&d),
            }
        })
}

fn eps_value() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(0.25), Just(0.5), Just(1.0), Just(3.0), 0.0f64..2.0]
}

fn objective(model: &MilpModel) -> Option<f64> {
    let sol = solve(model);
    (sol.status == SolveStatus::Optimal).then_some(sol.objective)
}

fn same(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-6,
        (None, None) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn d_saghp_matches_enumeration(c in case(), k in 0u32..=3) {
        let got = objective(&build_d_saghp(&c.schedule, k));
        let want = det_oracle(&c.schedule, k);
        prop_assert!(same(got, want), "{got:?} vs {want:?}");
    }

    #[test]
    fn s_saghp_matches_enumeration(c in case()) {
        let got = objective(&build_s_saghp(&c.schedule, &c.dist, &BuildOptions::default()));
        let want = sp_oracle(&c.schedule, &c.dist);
        prop_assert!(same(got, want), "{got:?} vs {want:?}");
    }

    #[test]
    fn dr_saghp_matches_dual_oracle(c in case(), eps in eps_value()) {
        let amb = AmbiguitySpec::with_default_grid(c.dist.clone(), eps).unwrap();
        let m = build_dr_saghp(&c.schedule, &amb, &BuildOptions::default());
        let sol = solve(&m);
        let want = dr_oracle(&c.schedule, &amb);
        prop_assert!(same((sol.status == SolveStatus::Optimal).then_some(sol.objective), want));
        if sol.status == SolveStatus::Optimal {
            let p = extract_policy(&m, &sol, &c.schedule).unwrap();
            prop_assert!(p.check_coupling(&c.schedule).is_ok());
            let slots: Vec<u32> = c.schedule.flights.iter().map(|f| p.assignments[&f.id]).collect();
            prop_assert!((dr_oracle_for(&c.schedule, &amb, &slots) - sol.objective).abs() < 1e-6);
        }
    }

    #[test]
    fn eps_zero_equals_sp_and_bounds_hold(c in case(), eps in eps_value()) {
        let sp = objective(&build_s_saghp(&c.schedule, &c.dist, &BuildOptions::default()));
        let dr0 = objective(&build_dr_saghp(&c.schedule, &AmbiguitySpec::with_default_grid(c.dist.clone(), 0.0).unwrap(), &BuildOptions::default()));
        prop_assert!(same(sp, dr0), "{sp:?} vs {dr0:?}");
        let dr = objective(&build_dr_saghp(&c.schedule, &AmbiguitySpec::with_default_grid(c.dist.clone(), eps).unwrap(), &BuildOptions::default()));
        if let (Some(sp), Some(dr)) = (sp, dr) {
            prop_assert!(sp <= dr + 1e-6);
        }
    }

    #[test]
    fn dr_monotone_in_eps_and_grid(c in case(), e1 in eps_value(), e2 in eps_value(), extra in proptest::collection::vec(0u32..=6, 0..3)) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let base = AmbiguitySpec::with_default_grid(c.dist.clone(), lo).unwrap();
        let opts = BuildOptions::default();
        let a = objective(&build_dr_saghp(&c.schedule, &base, &opts));
        let b = objective(&build_dr_saghp(&c.schedule, &base.with_radius(hi).unwrap(), &opts));
        if let (Some(a), Some(b)) = (a, b) {
            prop_assert!(a <= b + 1e-9 + 1e-7, "{a} > {b}");
        }
        let wide = AmbiguitySpec::new(c.dist.clone(), lo, base.grid().union(extra)).unwrap();
        let w = objective(&build_dr_saghp(&c.schedule, &wide, &opts));
        if let (Some(a), Some(w)) = (a, w) {
            prop_assert!(a <= w + 1e-9 + 1e-7, "{a} > {w}");
        }
    }

    #[test]
    fn dr_saghp_dimensions(c in case(), eps in eps_value()) {
        let amb = AmbiguitySpec::with_default_grid(c.dist.clone(), eps).unwrap();
        let m = build_dr_saghp(&c.schedule, &amb, &BuildOptions::default());
        let t = c.schedule.horizon.num_slots() as usize;
        let binaries: usize = c.schedule.flights.iter().map(|f| (t - f.scheduled_arrival as usize) + 1).sum();
        let (g, n) = (amb.grid().len(), amb.empirical().len());
        let continuous = m.variables().iter().filter(|v| v.kind == VarKind::Continuous).count();
        prop_assert_eq!(m.num_binaries(), binaries);
        prop_assert_eq!(continuous, g * t + 1 + n);
        prop_assert_eq!(m.num_constraints(), g * n + c.schedule.flights.len() + g * t + c.schedule.connections.len());
    }
}
