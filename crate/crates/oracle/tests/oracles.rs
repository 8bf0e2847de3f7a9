use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use viflow_oracle::{
    active_set_enumeration, proximal_gradient_reference, random_instance, DofLaw, InstanceParams, OracleError,
    ProxOptions, SmallInstance, State,
};

fn scalar(alpha: f64, f: f64, law: DofLaw) -> SmallInstance {
    SmallInstance::new(dmatrix![alpha], dvector![f], vec![law]).unwrap()
}

#[test]
fn soft_threshold_closed_form() {
    let inst = scalar(2.0, 3.0, DofLaw::Abs(1.0));
    let p = proximal_gradient_reference(&inst, &ProxOptions::default());
    assert!((p.u[0] - 1.0).abs() < 1e-6);
    let e = active_set_enumeration(&inst).unwrap();
    assert_eq!(e.u[0], 1.0);
    assert_eq!(e.states, vec![State::Pos]);
}

#[test]
fn outflow_cone_closed_form() {
    let inst = scalar(1.0, 1.0, DofLaw::Outflow(2.0));
    let p = proximal_gradient_reference(&inst, &ProxOptions::default());
    assert!(p.u[0].abs() < 1e-7);
    let e = active_set_enumeration(&inst).unwrap();
    assert_eq!(e.u[0], 0.0);
    assert_eq!(e.states, vec![State::Zero]);
    // slack f − a·v − g = −1 < 0 on the closed contact
    assert!(inst.kkt_residual(&e.u) < 1e-14);
}

#[test]
fn inflow_cone_opens_under_negative_load() {
    let inst = scalar(1.0, -3.0, DofLaw::Inflow(1.0));
    let e = active_set_enumeration(&inst).unwrap();
    assert!((e.u[0] + 2.0).abs() < 1e-14);
    let p = proximal_gradient_reference(&inst, &ProxOptions::default());
    assert!((p.u[0] + 2.0).abs() < 1e-9);
}

#[test]
fn decoupled_pair_is_componentwise() {
    let inst = SmallInstance::new(
        DMatrix::from_diagonal(&dvector![2.0, 1.0]),
        dvector![3.0, 1.0],
        vec![DofLaw::Abs(1.0), DofLaw::Outflow(2.0)],
    )
    .unwrap();
    let e = active_set_enumeration(&inst).unwrap();
    assert_eq!(e.u, dvector![1.0, 0.0]);
    let p = proximal_gradient_reference(&inst, &ProxOptions::default());
    assert!((&p.u - &e.u).amax() < 1e-9);
}

#[test]
fn coupled_pair_agrees_across_oracles() {
    let inst = SmallInstance::new(
        dmatrix![2.0, 0.5; 0.5, 1.0],
        dvector![3.0, -2.0],
        vec![DofLaw::Abs(1.0), DofLaw::Abs(0.5)],
    )
    .unwrap();
    let e = active_set_enumeration(&inst).unwrap();
    let p = proximal_gradient_reference(&inst, &ProxOptions::default());
    assert!(inst.energy_distance(&e.u, &p.u) < 1e-6);
    assert!(inst.kkt_residual(&e.u) < 1e-12);
}

#[test]
fn zero_load_gives_zero() {
    let inst = random_instance(
        3,
        InstanceParams {
            n: 6,
            constrained: 6,
            symmetric: true,
            skew: 0.0,
        },
    );
    let inst = SmallInstance::new(inst.a, DVector::zeros(6), inst.laws).unwrap();
    let e = active_set_enumeration(&inst).unwrap();
    assert_eq!(e.u, DVector::zeros(6));
    assert!(e.states.iter().all(|&s| s == State::Zero));
}

#[test]
fn random_instances_agree() {
    for seed in 0..60u64 {
        let symmetric = seed % 3 != 0;
        let inst = random_instance(
            seed,
            InstanceParams {
                n: 1 + (seed as usize % 8),
                constrained: 1 + (seed as usize % 6),
                symmetric,
                skew: 0.5,
            },
        );
        let e = active_set_enumeration(&inst).unwrap();
        let p = proximal_gradient_reference(&inst, &ProxOptions::default());
        let d = inst.energy_distance(&e.u, &p.u);
        assert!(d < 1e-7, "seed {seed}: distance {d:e}");
        assert!(inst.kkt_residual(&p.u) < 1e-7, "seed {seed}");
        if symmetric {
            assert!(inst.energy(&e.u) <= inst.energy(&p.u) + 1e-12);
        }
    }
}

#[test]
fn enumeration_limit() {
    let inst = random_instance(
        1,
        InstanceParams {
            n: 14,
            constrained: 13,
            symmetric: true,
            skew: 0.0,
        },
    );
    assert_eq!(
        active_set_enumeration(&inst).unwrap_err(),
        OracleError::TooLarge(13, 12)
    );
}

#[test]
fn indefinite_instance_is_rejected() {
    let r = SmallInstance::new(dmatrix![1.0, 0.0; 0.0, -1.0], dvector![0.0, 0.0], vec![DofLaw::Free; 2]);
    assert!(matches!(r, Err(OracleError::Malformed(_))));
}
