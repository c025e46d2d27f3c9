//! Bounded breadth-first exploration of the reachable state space.
//!
//! Every enabled choice is expanded at every reached state, up to a step
//! depth and a cap on distinct states. States are deduplicated by their
//! canonical byte encoding, so confluent interleavings (e.g. broadcast
//! deliveries in either order) do not blow the search up.

use std::collections::{HashSet, VecDeque};

use crate::semantics::{
    apply_choice, canonical_state_bytes, enabled_choices, Network, RuntimeError, StepChoice,
    StepError,
};

#[derive(Debug, Clone)]
pub struct ExploreConfig {
    /// Maximum number of steps from the root.
    pub depth: usize,
    /// Maximum number of distinct states (root included) before giving up.
    pub state_cap: usize,
}

impl ExploreConfig {
    pub fn new(depth: usize) -> ExploreConfig {
        ExploreConfig {
            depth,
            state_cap: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Explored {
    /// The predicate held at every state reached by at least one step.
    AllHold { states: usize },
    /// A choice sequence from the root to a state where the predicate
    /// fails; replaying it reproduces the violation.
    Counterexample(Vec<StepChoice>),
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ExploreError {
    #[error("state budget exceeded after {visited} distinct states")]
    StateBudgetExceeded { visited: usize },
    #[error(transparent)]
    Runtime(RuntimeError),
}

struct NodeRec {
    parent: Option<usize>,
    choice: Option<StepChoice>,
}

fn path_to(arena: &[NodeRec], mut idx: usize) -> Vec<StepChoice> {
    let mut path = Vec::new();
    loop {
        let node = &arena[idx];
        match (&node.parent, &node.choice) {
            (Some(p), Some(c)) => {
                path.push(c.clone());
                idx = *p;
            }
            _ => break,
        }
    }
    path.reverse();
    path
}

/// Explores all states reachable from `root` within `cfg.depth` steps,
/// checking `predicate` on every state reached by at least one step (the
/// root itself is the caller's responsibility — the point is to check what
/// stepping preserves).
pub fn explore(
    root: &Network,
    cfg: &ExploreConfig,
    predicate: &mut dyn FnMut(&Network) -> bool,
) -> Result<Explored, ExploreError> {
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    seen.insert(canonical_state_bytes(root));
    let mut arena = vec![NodeRec {
        parent: None,
        choice: None,
    }];
    let mut queue: VecDeque<(Network, usize, usize)> = VecDeque::new();
    queue.push_back((root.clone(), 0, 0));

    while let Some((net, idx, depth)) = queue.pop_front() {
        if depth == cfg.depth {
            continue;
        }
        for choice in enabled_choices(&net) {
            let mut child = net.clone();
            apply_choice(&mut child, &choice).map_err(|e| match e {
                StepError::Runtime(r) => ExploreError::Runtime(r),
                StepError::InvalidChoice(c) => {
                    unreachable!("enabled choice rejected by apply_choice: {c:?}")
                }
            })?;
            let key = canonical_state_bytes(&child);
            if seen.contains(&key) {
                continue;
            }
            if seen.len() >= cfg.state_cap {
                return Err(ExploreError::StateBudgetExceeded {
                    visited: seen.len(),
                });
            }
            seen.insert(key);
            let child_idx = arena.len();
            arena.push(NodeRec {
                parent: Some(idx),
                choice: Some(choice.clone()),
            });
            if !predicate(&child) {
                return Ok(Explored::Counterexample(path_to(&arena, child_idx)));
            }
            queue.push_back((child, child_idx, depth + 1));
        }
    }
    Ok(Explored::AllHold { states: seen.len() })
}
