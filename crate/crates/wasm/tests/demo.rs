use groundhold_wasm::demo::{self, CompareOptions, DemoInstance};
use groundhold_wasm::parse_omega;

fn worked() -> DemoInstance {
    DemoInstance {
        horizon: 2,
        airborne_cost: 2.0,
        schedule: "flight_id,airport,scheduled_arrival_slot,ground_cost\nf1,A,1,1\n".into(),
        connections: String::new(),
        capacity: "capacity,probability\n1,1\n".into(),
        grid: "0..1".into(),
    }
}

#[test]
fn curve_on_single_flight() {
    let pts = demo::epsilon_curve(&worked(), &[0.0, 0.4, 0.5, 1.0]).unwrap();
    let obj: Vec<f64> = pts.iter().map(|p| p.objective.unwrap()).collect();
    for (got, want) in obj.iter().zip([0.0, 1.6, 2.0, 3.0]) {
        assert!((got - want).abs() < 1e-9, "{obj:?}");
    }
    assert_eq!(pts[1].assignments["f1"], 1);
    assert_eq!(pts[3].assignments["f1"], 2);
    assert!(demo::epsilon_curve(&worked(), &[]).is_err());
    assert!(demo::epsilon_curve(&worked(), &[-1.0]).is_err());
}

#[test]
fn worst_case_moves_mass_to_zero() {
    let w = demo::worst_case(&worked(), 0.4).unwrap();
    assert!((w.objective - 1.6).abs() < 1e-9);
    assert!((w.alpha - 4.0).abs() < 1e-9);
    assert_eq!(w.empirical, vec![(1, 1.0)]);
    let p0 = w.worst_case.iter().find(|a| a.0 == 0).unwrap().1;
    assert!((p0 - 0.4).abs() < 1e-9);
    assert!(w.distance <= 0.4 + 1e-9);
    assert!((w.worst_case_expected_cost - 1.6).abs() < 1e-9);
}

#[test]
fn example_round_trips_and_compares() {
    let ex = demo::example(7).unwrap();
    let json = serde_json::to_string(&ex).unwrap();
    assert_eq!(serde_json::from_str::<DemoInstance>(&json).unwrap(), ex);
    assert_eq!(demo::example(7).unwrap(), ex);

    let opts = CompareOptions {
        epsilon: 0.1,
        shift: 1,
        shift_fraction: 0.5,
        samples: 1000,
        seed: 2024,
    };
    let c = demo::compare(&ex, &opts).unwrap();
    assert_eq!(c.policies.len(), 3);
    assert!(c.policies[0].model.starts_with("det"));
    let mean = |i: usize| c.policies[i].evaluation.as_ref().unwrap().mean;
    assert!(mean(2) < mean(1), "dr {} vs sp {}", mean(2), mean(1));
    let total: f64 = c.evaluation_distribution.iter().map(|a| a.1).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(demo::compare(&ex, &CompareOptions { samples: 0, ..opts }).is_err());
}

#[test]
fn rejects_bad_input() {
    let mut two = worked();
    two.schedule.push_str("f2,B,1,1\n");
    assert!(demo::worst_case(&two, 0.1).unwrap_err().contains("one airport"));
    let mut bad = worked();
    bad.capacity = "capacity,probability\n1,0.5\n".into();
    assert!(demo::worst_case(&bad, 0.1).is_err());
    assert_eq!(parse_omega("0, 0.5,1,").unwrap(), vec![0.0, 0.5, 1.0]);
    assert!(parse_omega("0,x").is_err());
}
