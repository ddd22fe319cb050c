use super::DatagenError;
use crate::model::{SimInstant, UpdateOperation};

/// Shifts operations so that `scheduled - dependency >= t_safe` for every op.
///
/// A shifted op may be the dependency of a later one, so each op's dependency
/// is first raised to the latest shifted time of any op originally scheduled
/// at or before it. The result is stably re-sorted by scheduled time.
pub fn enforce_t_safe(
    stream: Vec<UpdateOperation>,
    t_safe_millis: i64,
    simulation_end: SimInstant,
) -> Result<Vec<UpdateOperation>, DatagenError> {
    let original: Vec<SimInstant> = stream.iter().map(|o| o.scheduled_time).collect();
    debug_assert!(
        original.windows(2).all(|w| w[0] <= w[1]),
        "stream must be sorted"
    );
    let mut prefix_max: Vec<SimInstant> = Vec::with_capacity(stream.len());
    let mut out = Vec::with_capacity(stream.len());
    for (i, mut op) in stream.into_iter().enumerate() {
        // ops before i with original time <= dependency
        let upto = original[..i].partition_point(|&t| t <= op.dependency_time);
        if upto > 0 {
            op.dependency_time = op.dependency_time.max(prefix_max[upto - 1]);
        }
        let earliest = op.dependency_time.plus_millis(t_safe_millis);
        if op.scheduled_time < earliest {
            if earliest > simulation_end {
                return Err(DatagenError::UnsatisfiableDependency {
                    index: i,
                    required: earliest,
                    end: simulation_end,
                });
            }
            op.scheduled_time = earliest;
        }
        let prev = prefix_max.last().copied().unwrap_or(SimInstant::MIN);
        prefix_max.push(prev.max(op.scheduled_time));
        out.push(op);
    }
    out.sort_by_key(|o| o.scheduled_time);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OpType, Payload, PersonId, MILLIS_PER_SECOND};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const T_SAFE: i64 = 10 * MILLIS_PER_SECOND;

    fn op(sched: i64, dep: i64) -> UpdateOperation {
        UpdateOperation {
            op_type: OpType::Del1,
            scheduled_time: SimInstant(sched),
            dependency_time: SimInstant(dep),
            payload: Payload::RemovePerson {
                person_id: PersonId(1),
            },
        }
    }

    #[test]
    fn boundary_slack_is_unchanged() {
        let s = vec![op(100_000, 90_000)];
        let out = enforce_t_safe(s.clone(), T_SAFE, SimInstant(1_000_000)).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn short_slack_is_shifted_to_dependency_plus_t_safe() {
        let out = enforce_t_safe(vec![op(100_000, 99_000)], T_SAFE, SimInstant(1_000_000)).unwrap();
        assert_eq!(out[0].scheduled_time, SimInstant(109_000));
    }

    #[test]
    fn shift_past_end_is_unsatisfiable() {
        let err =
            enforce_t_safe(vec![op(100_000, 99_000)], T_SAFE, SimInstant(105_000)).unwrap_err();
        assert!(matches!(
            err,
            DatagenError::UnsatisfiableDependency { index: 0, .. }
        ));
    }

    #[test]
    fn shifted_dependency_drags_dependents_along() {
        // op 0 moves from 100s to 109s; op 1 depends on time 100s and must
        // follow the moved op by T_safe.
        let out = enforce_t_safe(
            vec![op(100_000, 99_000), op(112_000, 100_000)],
            T_SAFE,
            SimInstant(1_000_000),
        )
        .unwrap();
        assert_eq!(out[1].scheduled_time, SimInstant(119_000));
    }

    #[test]
    fn random_ten_thousand_ops_have_no_violations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut times: Vec<i64> = (0..10_000).map(|_| rng.gen_range(0..100_000_000)).collect();
        times.sort_unstable();
        let stream: Vec<_> = times
            .iter()
            .map(|&t| op(t, t - rng.gen_range(0..30_000)))
            .collect();
        let out = enforce_t_safe(stream, T_SAFE, SimInstant(i64::MAX / 2)).unwrap();
        assert_eq!(out.len(), 10_000);
        let violations = out.iter().filter(|o| o.slack_millis() < T_SAFE).count();
        assert_eq!(violations, 0);
        assert!(out
            .windows(2)
            .all(|w| w[0].scheduled_time <= w[1].scheduled_time));
    }

    proptest! {
        #[test]
        fn enforcement_postcondition(mut pairs in proptest::collection::vec((0i64..1_000_000, 0i64..50_000), 0..200)) {
            pairs.sort_unstable();
            let stream: Vec<_> = pairs.iter().map(|&(t, lag)| op(t, t - lag)).collect();
            let out = enforce_t_safe(stream.clone(), T_SAFE, SimInstant(i64::MAX / 2)).unwrap();
            prop_assert_eq!(out.len(), stream.len());
            for o in &out {
                prop_assert!(o.slack_millis() >= T_SAFE);
            }
            // never moves anything earlier
            let mut before: Vec<_> = stream.iter().map(|o| o.scheduled_time).collect();
            let mut after: Vec<_> = out.iter().map(|o| o.scheduled_time).collect();
            before.sort_unstable();
            after.sort_unstable();
            for (b, a) in before.iter().zip(&after) {
                prop_assert!(a >= b);
            }
        }
    }
}
