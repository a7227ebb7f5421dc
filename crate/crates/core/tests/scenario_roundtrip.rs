use fogmarket_core::model::{DsoAgent, DssAgent, FogNodeAgent, Point, Scenario};
use fogmarket_core::PreferenceList;
use proptest::prelude::*;

fn scenario_strategy() -> impl Strategy<Value = Scenario<f64>> {
    (1usize..4, 0usize..5, 0usize..4, any::<u64>()).prop_flat_map(|(m, n, k, seed)| {
        let dss = (0.0f64..10.0, 0.0f64..10.0, 0.01f64..5.0, Just(m));
        let fog = (0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0, 0.0f64..100.0, prop::collection::vec(0.0f64..=1.0, m));
        (
            prop::collection::vec(dss, n),
            prop::collection::vec(fog, k),
            prop::collection::vec(0.0f64..20.0, m),
            Just(seed),
        )
            .prop_map(|(dsss, fns, costs, seed)| Scenario {
                mu: 0.1,
                t_th: 60.0,
                theta: 0.02,
                kappa: 0.1,
                cloud_distance: 100.0,
                seed,
                dsss: dsss
                    .into_iter()
                    .enumerate()
                    .map(|(id, (x, y, lambda, m))| DssAgent {
                        id,
                        position: Point::new(x, y),
                        arrival_rate: lambda,
                        alpha: 50.0,
                        beta: 0.01,
                        gamma: 0.001,
                        dso_pref: PreferenceList::new((0..m).rev().collect()),
                    })
                    .collect(),
                dsos: costs
                    .into_iter()
                    .enumerate()
                    .map(|(id, c)| DsoAgent { id, cloud_unit_cost: c, price: None })
                    .collect(),
                fns: fns
                    .into_iter()
                    .enumerate()
                    .map(|(id, (x, y, rent, capacity, dso_weights))| FogNodeAgent {
                        id,
                        position: Point::new(x, y),
                        rent,
                        capacity,
                        dso_weights,
                    })
                    .collect(),
            })
    })
}

proptest! {
    #[test]
    fn scenario_json_round_trip_is_identity(s in scenario_strategy()) {
        prop_assert!(s.validate().is_ok());
        let text = serde_json::to_string(&s).unwrap();
        let back: Scenario<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, s);
    }
}
