//! Sequential specifications the checkers test histories against.

use std::hash::Hash;

use crate::types::Value;

pub trait SequentialSpec {
    type State: Clone + Eq + Hash + std::fmt::Debug;

    fn initial(&self) -> Self::State;
    /// Applies an operation with argument `arg`, returning the new state
    /// and the response.
    fn apply(&self, state: &Self::State, arg: Value) -> (Self::State, Value);
}

/// Swap: install the argument, return the previous value.
#[derive(Clone, Copy, Debug, Default)]
pub struct SwapSpec;

impl SequentialSpec for SwapSpec {
    type State = Value;

    fn initial(&self) -> Value {
        Value::Bottom
    }

    fn apply(&self, state: &Value, arg: Value) -> (Value, Value) {
        (arg, *state)
    }
}

/// Write that always acknowledges with the same response.
#[derive(Clone, Copy, Debug, Default)]
pub struct WriteSpec;

impl SequentialSpec for WriteSpec {
    type State = Value;

    fn initial(&self) -> Value {
        Value::Bottom
    }

    fn apply(&self, _state: &Value, arg: Value) -> (Value, Value) {
        (arg, Value::Int(0))
    }
}

/// Test-and-set ignoring its argument: the first call returns ⊥, later
/// calls return 1.
#[derive(Clone, Copy, Debug, Default)]
pub struct TestAndSetSpec;

impl SequentialSpec for TestAndSetSpec {
    type State = bool;

    fn initial(&self) -> bool {
        false
    }

    fn apply(&self, state: &bool, _arg: Value) -> (bool, Value) {
        (true, if *state { Value::Int(1) } else { Value::Bottom })
    }
}
