//! Scheduling policies: how one enabled choice is picked per step.
//!
//! `deliver-all` is the deterministic protocol-friendly policy (full
//! broadcast bursts, cyclic sensor turns), `round-robin` interleaves one
//! choice per sensor turn, and `random` explores uniformly-ish but
//! reproducibly from a seed, keyed by sensor id so the pick sequence does
//! not depend on the order sensors are listed in.

use std::collections::{BTreeMap, VecDeque};

use crate::semantics::{Network, RuleName, Sensor, StepChoice};

/// Per-sensor count of consecutive productive local steps granted to the
/// current head program; used to preempt heads that never finish.
#[derive(Debug, Clone, Default)]
pub struct TurnCounts(BTreeMap<String, u64>);

/// How many productive local steps a head program may take in a row while
/// other programs wait in the queue, before the queue is rotated once.
const HEAD_STREAK_LIMIT: u64 = 8;

#[derive(Debug, Clone)]
pub enum Policy {
    /// Cyclic sensor turns; a started broadcast runs to completion
    /// (every reachable neighbor, then release) before anyone else moves.
    DeliverAll { next: usize, turns: TurnCounts },
    /// Cyclic sensor turns, one choice per turn; broadcasts interleave.
    RoundRobin { next: usize, turns: TurnCounts },
    /// Seeded pseudo-random choice, invariant under permutation of the
    /// sensor list.
    Random { seed: u64 },
    /// Plays back an explicit list of choices, then falls through. A
    /// scripted choice that is not currently enabled stalls the run loudly
    /// rather than silently picking something else.
    Scripted {
        script: VecDeque<StepChoice>,
        fallback: Box<Policy>,
    },
}

impl Policy {
    pub fn deliver_all() -> Policy {
        Policy::DeliverAll {
            next: 0,
            turns: TurnCounts::default(),
        }
    }

    pub fn round_robin() -> Policy {
        Policy::RoundRobin {
            next: 0,
            turns: TurnCounts::default(),
        }
    }

    pub fn random(seed: u64) -> Policy {
        Policy::Random { seed }
    }

    pub fn scripted(script: Vec<StepChoice>, fallback: Policy) -> Policy {
        Policy::Scripted {
            script: script.into(),
            fallback: Box::new(fallback),
        }
    }

    /// Parses a CLI policy name.
    pub fn from_name(name: &str, seed: u64) -> Option<Policy> {
        match name {
            "deliver-all" => Some(Policy::deliver_all()),
            "round-robin" => Some(Policy::round_robin()),
            "random" => Some(Policy::random(seed)),
            _ => None,
        }
    }

    /// Picks one of `choices` (all currently enabled in `n`). `None` means
    /// the policy refuses (only the scripted policy does).
    pub fn pick(&mut self, n: &Network, choices: &[StepChoice]) -> Option<StepChoice> {
        match self {
            Policy::DeliverAll { next, turns } => {
                // Finish an open broadcast first: deliveries, then release.
                if let Some(s) = n.sensors.iter().find(|s| s.membrane.is_some()) {
                    if let Some(c) = choices.iter().find(
                        |c| matches!(c, StepChoice::Deliver { sender, .. } if *sender == s.id),
                    ) {
                        return Some(c.clone());
                    }
                    if let Some(c) = choices
                        .iter()
                        .find(|c| matches!(c, StepChoice::Release { sender } if *sender == s.id))
                    {
                        return Some(c.clone());
                    }
                }
                pick_cyclic(n, choices, next, turns)
            }
            Policy::RoundRobin { next, turns } => pick_cyclic(n, choices, next, turns),
            Policy::Random { seed } => {
                let mut actors: Vec<&str> = choices.iter().map(StepChoice::actor).collect();
                actors.sort_unstable();
                actors.dedup();
                let step = n.step_count;
                let actor = actors
                    .into_iter()
                    .min_by_key(|a| (hash_parts(&[&seed.to_le_bytes(), &step.to_le_bytes(), a.as_bytes()]), *a))?;
                let mine: Vec<&StepChoice> =
                    choices.iter().filter(|c| c.actor() == actor).collect();
                let roll = hash_parts(&[
                    &seed.to_le_bytes(),
                    &step.to_le_bytes(),
                    actor.as_bytes(),
                    b"choice",
                ]);
                Some(mine[(roll % mine.len() as u64) as usize].clone())
            }
            Policy::Scripted { script, fallback } => match script.pop_front() {
                None => fallback.pick(n, choices),
                Some(c) if choices.contains(&c) => Some(c),
                Some(_) => None,
            },
        }
    }
}

/// Cyclic scan from `*next`: the first sensor with something worth doing
/// acts, and the cursor moves past it. If nobody has anything worth doing
/// the first enabled choice is returned so the run loop's quiescence
/// detection can see the idle cycling.
///
/// Fairness between a sensor's programs: a head may take at most
/// `HEAD_STREAK_LIMIT` productive local steps in a row while other
/// programs wait behind it; then the queue is rotated once. Without this,
/// a head that never finishes (a polling loop, say) would starve the
/// calls other sensors have delivered into the queue.
fn pick_cyclic(
    n: &Network,
    choices: &[StepChoice],
    next: &mut usize,
    turns: &mut TurnCounts,
) -> Option<StepChoice> {
    let count = n.sensors.len();
    for offset in 0..count {
        let idx = (*next + offset) % count;
        let sensor = &n.sensors[idx];
        if let Some(c) = best_for(sensor, choices) {
            *next = (idx + 1) % count;
            let streak = turns.0.entry(sensor.id.clone()).or_insert(0);
            match c {
                StepChoice::Local { rule, .. } if *rule != RuleName::NoMethodTop => {
                    *streak += 1;
                    if *streak > HEAD_STREAK_LIMIT && sensor.queue.len() >= 2 {
                        if let Some(rot) = choices.iter().find(
                            |c| matches!(c, StepChoice::Switch { sensor: s } if *s == sensor.id),
                        ) {
                            *streak = 0;
                            return Some(rot.clone());
                        }
                    }
                }
                StepChoice::Switch { .. } => *streak = 0,
                _ => {}
            }
            return Some(c.clone());
        }
    }
    choices.first().cloned()
}

/// The most useful choice for one sensor: a productive local step, then
/// broadcast delivery, then release, then — when the head is only busy
/// waiting or stuck and other programs are queued — rotation. A bare
/// busy-wait is last; an identity rotation (singleton queue) is never
/// preferred.
fn best_for<'c>(sensor: &Sensor, choices: &'c [StepChoice]) -> Option<&'c StepChoice> {
    let mine = || choices.iter().filter(|c| c.actor() == sensor.id);
    if let Some(c) = mine().find(|c| {
        matches!(c, StepChoice::Local { rule, .. } if *rule != RuleName::NoMethodTop)
    }) {
        return Some(c);
    }
    if let Some(c) = mine().find(|c| matches!(c, StepChoice::Deliver { .. })) {
        return Some(c);
    }
    if let Some(c) = mine().find(|c| matches!(c, StepChoice::Release { .. })) {
        return Some(c);
    }
    if sensor.queue.len() >= 2 {
        if let Some(c) = mine().find(|c| matches!(c, StepChoice::Switch { .. })) {
            return Some(c);
        }
    }
    mine().find(|c| {
        matches!(
            c,
            StepChoice::Local {
                rule: RuleName::NoMethodTop,
                ..
            }
        )
    })
}

/// FNV-1a over the concatenation of length-delimited parts. Hand-rolled so
/// scheduling never depends on the standard library's hasher internals.
fn hash_parts(parts: &[&[u8]]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    };
    for part in parts {
        for b in (part.len() as u64).to_le_bytes() {
            eat(b);
        }
        for &b in *part {
            eat(b);
        }
    }
    h
}
