//! Cross-module properties: the parser against the pretty-printer, the
//! object-update algebra against a set model, the generator against the
//! type checker, and the engine's structural invariants under random walks.

use proptest::prelude::*;

use csn::generator::{gen_well_typed_network, GenConfig};
use csn::parser::parse_program;
use csn::schedule::Policy;
use csn::semantics::{
    apply_step, canonical_state_bytes, enabled_choices, run, Network, StepBudget,
};
use csn::syntax::{alpha_equal, alpha_normalize, object_update, Label, Method, Object, Program, Value};
use csn::types::check_network;

/// Every program in a generated network: queue items plus method bodies.
fn programs_of(n: &Network) -> Vec<Program> {
    let mut out = Vec::new();
    for s in &n.sensors {
        out.extend(s.queue.iter().cloned());
        for method in s.object.methods.values() {
            out.push(method.body.clone());
        }
    }
    out
}

proptest! {
    /// Printing and re-parsing any generated program is identity up to
    /// alpha-conversion.
    #[test]
    fn roundtrip_generated_programs(seed: u64) {
        let cfg = GenConfig::new(seed);
        let n = gen_well_typed_network(&cfg);
        for p in programs_of(&n) {
            let printed = p.to_string();
            let parsed = parse_program(&printed)
                .unwrap_or_else(|e| panic!("re-parse of `{printed}` failed: {e}"));
            prop_assert!(
                alpha_equal(&p, &parsed),
                "`{printed}` re-parsed to `{parsed}`"
            );
        }
    }

    /// Generated networks always pass the checker (generator soundness).
    #[test]
    fn generated_networks_typecheck(seed: u64) {
        let cfg = GenConfig::new(seed);
        let n = gen_well_typed_network(&cfg);
        prop_assert_eq!(check_network(&cfg.interface, &n), Ok(()));
    }

    /// Canonical state bytes do not depend on declaration order.
    #[test]
    fn canonical_bytes_are_permutation_invariant(seed: u64) {
        let cfg = GenConfig::new(seed);
        let n = gen_well_typed_network(&cfg);
        let mut permuted = n.clone();
        permuted.sensors.reverse();
        prop_assert_eq!(canonical_state_bytes(&n), canonical_state_bytes(&permuted));
    }

    /// Normalization is idempotent and stays in the alpha class.
    #[test]
    fn alpha_normalize_is_idempotent(seed: u64) {
        let cfg = GenConfig::new(seed);
        let n = gen_well_typed_network(&cfg);
        for p in programs_of(&n) {
            let once = alpha_normalize(&p);
            prop_assert!(alpha_equal(&p, &once));
            prop_assert_eq!(alpha_normalize(&once), once.clone());
        }
    }

    /// A random walk preserves the engine's structural invariants:
    /// populated membranes, nonnegative metered energy, the step counter,
    /// and deterministic choice enumeration.
    #[test]
    fn random_walks_preserve_engine_invariants(seed: u64, steps in 1usize..40) {
        let cfg = GenConfig::new(seed);
        let mut n = gen_well_typed_network(&cfg);
        n.world.metering = true;
        let mut policy = Policy::random(seed);
        for _ in 0..steps {
            let choices = enabled_choices(&n);
            prop_assert_eq!(&choices, &enabled_choices(&n), "enumeration is stable");
            if choices.is_empty() {
                break;
            }
            let Some(choice) = policy.pick(&n, &choices) else { break };
            let before = n.step_count;
            let (next, _) = apply_step(&n, &choice).expect("enabled choices apply");
            prop_assert_eq!(next.step_count, before + 1);
            for s in &next.sensors {
                if let Some(m) = &s.membrane {
                    prop_assert!(!m.delivered.is_empty(), "membranes are never empty");
                }
                prop_assert!(s.energy >= 0.0, "metering never drives energy negative");
            }
            n = next;
        }
    }

    /// Two runs with identical inputs and policy produce byte-identical
    /// trace serializations.
    #[test]
    fn runs_are_reproducible(seed: u64) {
        let cfg = GenConfig::new(seed);
        let budget = StepBudget::new(60);
        let make = || {
            let n = gen_well_typed_network(&cfg);
            let mut policy = Policy::random(seed);
            let (_, trace) = run(n, &mut policy, budget);
            trace.to_jsonl()
        };
        prop_assert_eq!(make(), make());
    }

    /// Every trace line is standalone JSON with a numeric "step" field.
    #[test]
    fn trace_lines_are_jsonl(seed in 0u64..500) {
        let cfg = GenConfig::new(seed);
        let n = gen_well_typed_network(&cfg);
        let mut policy = Policy::deliver_all();
        let (_, trace) = run(n, &mut policy, StepBudget::new(40));
        for line in trace.to_jsonl().lines() {
            let v: serde_json::Value = serde_json::from_str(line)
                .unwrap_or_else(|e| panic!("bad JSONL line `{line}`: {e}"));
            assert!(v.get("step").is_some_and(|s| s.is_u64()), "line `{line}`");
        }
    }
}

fn tiny_object() -> impl Strategy<Value = Object> {
    let label = prop_oneof![Just("a"), Just("b"), Just("c"), Just("d")];
    let body = 0u8..8;
    proptest::collection::btree_map(label, body, 0..4).prop_map(|entries| {
        let mut o = Object::new();
        for (name, k) in entries {
            o.insert(
                Label::new(name),
                Method {
                    params: Vec::new(),
                    body: Program::val(Value::number(k as f64)),
                },
            );
        }
        o
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2048))]

    /// The update operation agrees with its set-theoretic model: the label
    /// set is the union, and on common labels the right operand wins.
    #[test]
    fn object_update_matches_the_set_model(o1 in tiny_object(), o2 in tiny_object()) {
        let updated = object_update(&o1, &o2);
        let expected: std::collections::BTreeMap<_, _> = o1
            .methods
            .iter()
            .chain(o2.methods.iter())
            .map(|(l, m)| (l.clone(), m.clone()))
            .collect(); // later (right) entries overwrite earlier ones
        prop_assert_eq!(&updated.methods, &expected);
        // Update never loses labels, and is idempotent on the right.
        for l in o1.methods.keys().chain(o2.methods.keys()) {
            prop_assert!(updated.contains(l));
        }
        prop_assert_eq!(object_update(&updated, &o2).methods, updated.methods.clone());
    }
}
