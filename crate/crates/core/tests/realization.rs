mod common;

use rsh_rank::extension::ExtendOptions;
use rsh_rank::realize::{check_dimbound, realize_rank, verify_realization, TargetProfile};
use rsh_rank::Tolerances;

#[test]
fn flagship_realization_verifies() {
    let tol = Tolerances::default();
    let (r, t) = common::flagship();
    let db = check_dimbound(&r, t.eps());
    assert_eq!(db.stages[0].margin, 1.0);
    assert_eq!(db.stages[1].margin, 12.0);
    let b = realize_rank(&r, &t, &ExtendOptions::default(), &tol).unwrap();
    let rep = verify_realization(&r, &b, &t, &tol).unwrap();
    assert!(rep.passed(), "{rep:#?}");
}

#[test]
fn unitary_clutching_is_respected() {
    let tol = Tolerances::default();
    let mut r = common::dimension_drop(20, 80, 4, 20);
    let mut g = common::rng(5);
    let stage = &mut r.stages_mut()[1];
    for entry in stage.clutch.values_mut() {
        entry.unitary = Some(common::random_unitary(&mut g, 80));
    }
    let h1 = r.stages()[1].space.vertices().iter().map(|v| 0.95 - 0.3 * v[0] * (1.0 - v[0])).collect();
    let t = TargetProfile::new(&r, vec![vec![0.95], h1], 0.9, &tol).unwrap();
    let b = realize_rank(&r, &t, &ExtendOptions::default(), &tol).unwrap();
    b.validate(&r, &tol).unwrap();
    assert!(verify_realization(&r, &b, &t, &tol).unwrap().passed());
}

#[test]
fn realization_refuses_a_failing_dimension_bound() {
    let tol = Tolerances::default();
    let r = common::dimension_drop(8, 32, 4, 10);
    let h1 = vec![0.6; 11];
    let t = TargetProfile::new(&r, vec![vec![0.6], h1], 0.5, &tol).unwrap();
    assert!(!check_dimbound(&r, 0.5).passed());
    let err = realize_rank(&r, &t, &ExtendOptions::default(), &tol).unwrap_err();
    assert!(err.to_string().contains("4·dim + 4"), "{err}");
}
