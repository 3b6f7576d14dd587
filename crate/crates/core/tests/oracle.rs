use gradecast_core::consensus::ConsensusVariant;
use gradecast_core::oracle::{gradecast_exhaustive, oracle_exhaustive, OracleError, OracleOptions, OracleVerdict};
use gradecast_core::SystemParams;

fn explore(variant: ConsensusVariant, inputs: Vec<Vec<i64>>) -> OracleVerdict {
    let options = OracleOptions {
        variant,
        include_fault_free: false,
        only_inputs: Some(inputs),
        ..OracleOptions::default()
    };
    oracle_exhaustive(SystemParams::new(4, 1, 0).unwrap(), 2, &options).unwrap()
}

#[test]
fn correct_protocol_survives_every_explored_strategy_on_mixed_inputs() {
    let v = explore(ConsensusVariant::Correct, vec![vec![0, 1, 1], vec![0, 0, 1]]);
    assert_eq!(v.runs, 2);
    assert!(v.terminals > 0);
    assert!(v.ok(), "{:?}", v.violations);
}

#[test]
fn weakened_break_threshold_loses_agreement() {
    let v = explore(ConsensusVariant::WeakBreak, vec![vec![0, 1, 1]]);
    assert!(v.violations.iter().any(|x| x.property == "agreement"), "{:?}", v.violations);
}

#[test]
fn skipping_the_bad_update_loses_agreement() {
    let v = explore(ConsensusVariant::NoBadUpdate, vec![vec![0, 1, 1]]);
    assert!(v.violations.iter().any(|x| x.property == "agreement"), "{:?}", v.violations);
}

#[test]
fn unanimous_inputs_are_kept_in_every_explored_execution() {
    for variant in [ConsensusVariant::Correct, ConsensusVariant::WeakBreak, ConsensusVariant::NoBadUpdate] {
        let v = explore(variant, vec![vec![1, 1, 1]]);
        assert!(!v.violations.iter().any(|x| x.property == "validity"), "{variant:?}: {:?}", v.violations);
    }
}

#[test]
fn gradecast_is_exhaustively_sound_for_four_nodes() {
    let g = gradecast_exhaustive(4, 1, 2).unwrap();
    assert!(g.leader_runs > 0 && g.echoer_runs > 0);
    assert!(g.ok(), "{:?}", g.examples);
}

#[test]
fn state_budget_is_enforced() {
    let options = OracleOptions {
        max_states: 10,
        ..OracleOptions::default()
    };
    let r = oracle_exhaustive(SystemParams::new(4, 1, 0).unwrap(), 2, &options);
    assert!(matches!(r, Err(OracleError::StateSpaceTooLarge { .. })), "{r:?}");
}

#[test]
fn degenerate_parameters_are_rejected() {
    let params = SystemParams::new(4, 1, 0).unwrap();
    assert!(matches!(
        oracle_exhaustive(params, 0, &OracleOptions::default()),
        Err(OracleError::InvalidParams(_))
    ));
    assert!(gradecast_exhaustive(3, 1, 2).is_err());
}
