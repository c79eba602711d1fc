//! Distinguishability: after some base sequence of operations, whichever
//! of two invocations `M(x)`, `M(y)` runs first returns a designated
//! response `z`, and the one that runs second does not.

use crate::checker::spec::{SequentialSpec, SwapSpec};
use crate::types::Value;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistinguishWitness {
    pub base: Vec<Value>,
    pub x: Value,
    pub y: Value,
    pub z: Value,
}

/// Base sequences up to `max_base` operations drawn from `values`.
fn bases(values: &[Value], max_base: usize) -> Vec<Vec<Value>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_base {
        let mut grown = Vec::new();
        for b in &layer {
            for &v in values {
                let mut nb: Vec<Value> = b.clone();
                nb.push(v);
                grown.push(nb);
            }
        }
        out.extend(grown.iter().cloned());
        layer = grown;
    }
    out
}

pub fn find_distinguishing<S: SequentialSpec>(spec: &S, values: &[Value], max_base: usize) -> Option<DistinguishWitness> {
    for base in bases(values, max_base) {
        let mut s = spec.initial();
        for &v in &base {
            s = spec.apply(&s, v).0;
        }
        for &x in values {
            for &y in values {
                if x == y {
                    continue;
                }
                let (sx, rx1) = spec.apply(&s, x);
                let (_, ry2) = spec.apply(&sx, y);
                let (sy, ry1) = spec.apply(&s, y);
                let (_, rx2) = spec.apply(&sy, x);
                if rx1 == ry1 && ry2 != rx1 && rx2 != rx1 {
                    return Some(DistinguishWitness { base, x, y, z: rx1 });
                }
            }
        }
    }
    None
}

/// Swap over `values` (at least two, none ⊥) with base sequences of
/// length at most 2.
pub fn check_distinguishable_swap(values: &[u64]) -> bool {
    let vals: Vec<Value> = values.iter().map(|&v| Value::Int(v)).collect();
    find_distinguishing(&SwapSpec, &vals, 2).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::spec::{TestAndSetSpec, WriteSpec};

    #[test]
    fn swap_is_distinguished_by_bottom_on_empty_base() {
        let w = find_distinguishing(&SwapSpec, &[Value::Int(1), Value::Int(2)], 2).unwrap();
        assert!(w.base.is_empty());
        assert_eq!(w.z, Value::Bottom);
        assert!(check_distinguishable_swap(&[7, 9]));
    }

    #[test]
    fn write_is_not() {
        assert!(find_distinguishing(&WriteSpec, &[Value::Int(1), Value::Int(2), Value::Int(3)], 2).is_none());
    }

    #[test]
    fn test_and_set_is() {
        assert!(find_distinguishing(&TestAndSetSpec, &[Value::Int(1), Value::Int(2)], 2).is_some());
    }
}
