use proptest::prelude::*;

use crate::info::JointPmf;

/// Random pmfs with up to `max_m` sensors and alphabets of 1 to `max_a`
/// symbols; some cells are forced to zero to exercise support handling.
pub fn pmf_strategy(max_m: usize, max_a: usize) -> impl Strategy<Value = JointPmf> {
    (1..=max_m)
        .prop_flat_map(move |m| proptest::collection::vec(1..=max_a, m))
        .prop_flat_map(|sizes| {
            let cells: usize = sizes.iter().product();
            let weights =
                proptest::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.01f64..1.0], cells);
            (Just(sizes), weights)
        })
        .prop_filter_map("all-zero weights", |(sizes, w)| {
            JointPmf::from_weights(sizes, w).ok()
        })
}
