//! The small-step reduction engine.
//!
//! A network steps by picking one enabled [`StepChoice`] and applying it.
//! Local rules rewrite the head program of one sensor inside its reduction
//! context (a chain of `let` frames); broadcast is split into one delivery
//! step per receiver plus a release step, with a membrane recording who has
//! already been reached so nobody hears the same message twice. Scheduling
//! policies resolve the nondeterminism; [`explore`](crate::semantics::explore)
//! walks all of it breadth-first instead.

mod explore;

pub use explore::{explore, ExploreConfig, ExploreError, Explored};

use std::collections::{BTreeSet, HashSet, VecDeque};

use thiserror::Error;

use crate::schedule::Policy;
use crate::syntax::{
    alpha_normalize, instantiate, object_update, Label, Object, Program, Value, Variable,
};
use crate::trace::{Trace, TraceEvent};
use crate::world::{
    call_builtin, distance, BuiltinCallError, BuiltinTable, LogEntry, LogStore, Position,
    WorldConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorStatus {
    Online,
    Off,
}

/// The membrane of a broadcast in progress: which sensors the current
/// message has already engulfed. Created at the first delivery, discarded
/// at release.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BroadcastState {
    pub delivered: BTreeSet<String>,
}

/// One sensor: a queue of programs run round-robin, the installed object,
/// and the physical attributes (position, transmission radius, energy).
#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub id: String,
    pub status: SensorStatus,
    pub queue: VecDeque<Program>,
    pub object: Object,
    pub position: Position,
    pub radius: f64,
    pub energy: f64,
    pub membrane: Option<BroadcastState>,
}

impl Sensor {
    pub fn new(
        id: impl Into<String>,
        object: Object,
        queue: Vec<Program>,
        position: Position,
        radius: f64,
        energy: f64,
    ) -> Self {
        Sensor {
            id: id.into(),
            status: SensorStatus::Online,
            queue: queue.into(),
            object,
            position,
            radius,
            energy,
            membrane: None,
        }
    }

    pub fn head(&self) -> Option<&Program> {
        self.queue.front()
    }
}

/// A network: a flat collection of sensors plus the world they live in.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub sensors: Vec<Sensor>,
    pub world: WorldConfig,
    pub step_count: u64,
    pub logs: LogStore,
    pub builtins: BuiltinTable,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("duplicate sensor id `{0}`")]
    DuplicateSensorId(String),
}

impl Network {
    pub fn new(sensors: Vec<Sensor>, world: WorldConfig) -> Result<Self, NetworkError> {
        let mut seen = BTreeSet::new();
        for s in &sensors {
            if !seen.insert(s.id.clone()) {
                return Err(NetworkError::DuplicateSensorId(s.id.clone()));
            }
        }
        Ok(Network {
            sensors,
            world,
            step_count: 0,
            logs: LogStore::new(),
            builtins: BuiltinTable::standard(),
        })
    }

    pub fn sensor(&self, id: &str) -> Option<&Sensor> {
        self.sensors.iter().find(|s| s.id == id)
    }

    fn sensor_index(&self, id: &str) -> Option<usize> {
        self.sensors.iter().position(|s| s.id == id)
    }

    /// Whether a sensor can act at all. A sensor whose battery cannot pay
    /// for even the cheaper of (internal step, broadcast) behaves exactly
    /// like one that is switched off.
    pub fn is_online(&self, s: &Sensor) -> bool {
        s.status == SensorStatus::Online && s.energy >= self.world.off_threshold()
    }
}

/// The named reduction rules, exactly as they appear in traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleName {
    MethodTop,
    NoMethodTop,
    Method,
    BroadcastDeliver,
    Release,
    InstallTop,
    Install,
    Let,
    Switch,
    Complete,
}

impl RuleName {
    pub fn as_str(&self) -> &'static str {
        match self {
            RuleName::MethodTop => "method-top",
            RuleName::NoMethodTop => "no-method-top",
            RuleName::Method => "method",
            RuleName::BroadcastDeliver => "broadcast-deliver",
            RuleName::Release => "release",
            RuleName::InstallTop => "install-top",
            RuleName::Install => "install",
            RuleName::Let => "let",
            RuleName::Switch => "switch",
            RuleName::Complete => "complete",
        }
    }
}

/// One resolved unit of nondeterminism: which rule fires where.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepChoice {
    /// A local rule on the sensor's head program (anything except
    /// broadcast delivery/release and queue rotation).
    Local { sensor: String, rule: RuleName },
    /// Deliver the current broadcast of `sender` to `receiver`.
    Deliver { sender: String, receiver: String },
    /// Dissolve the sender's membrane; the broadcast call completes with
    /// the empty object.
    Release { sender: String },
    /// Rotate the sensor's head program to the back of the queue.
    Switch { sensor: String },
}

impl StepChoice {
    /// The sensor whose state the choice touches first (the actor).
    pub fn actor(&self) -> &str {
        match self {
            StepChoice::Local { sensor, .. } | StepChoice::Switch { sensor } => sensor,
            StepChoice::Deliver { sender, .. } | StepChoice::Release { sender } => sender,
        }
    }

    /// Productive choices make progress; busy-waits and queue rotations do
    /// not, and a run in which only unproductive choices remain is
    /// quiescent once it revisits a configuration.
    pub fn is_productive(&self) -> bool {
        !matches!(
            self,
            StepChoice::Switch { .. }
                | StepChoice::Local {
                    rule: RuleName::NoMethodTop,
                    ..
                }
        )
    }
}

// ---------------------------------------------------------------------------
// Redex decomposition
// ---------------------------------------------------------------------------

/// One `let x = [·] in P` frame of a reduction context, outermost first.
#[derive(Debug, Clone, PartialEq)]
pub struct LetFrame {
    pub binder: Variable,
    pub body: Program,
}

/// A decomposed head program: the innermost reducible core and the frames
/// around it.
#[derive(Debug, Clone, PartialEq)]
pub struct Redex {
    pub frames: Vec<LetFrame>,
    pub core: Program,
}

impl Redex {
    /// Wraps a rewritten core back into the context frames.
    pub fn reassemble(frames: &[LetFrame], core: Program) -> Program {
        frames.iter().rev().fold(core, |acc, frame| Program::Let {
            binder: frame.binder.clone(),
            bound: Box::new(acc),
            body: Box::new(frame.body.clone()),
        })
    }
}

/// Why a head program can make no step of its own.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StuckReason {
    #[error("anonymous object has no method `{0}`")]
    UndefinedAnonymousMethod(Label),
    #[error("call target is not callable")]
    BadCallTarget,
    #[error("install operand is not an object")]
    BadInstallOperand,
    #[error("free variable `{0}` in evaluation position")]
    FreeVariable(Variable),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decomposition {
    Redex(Redex),
    /// The whole head is a value; nothing in the calculus consumes it.
    Completed(Value),
    Stuck(StuckReason),
}

/// Splits a program into reduction context and core. A `let` whose bound
/// program is itself reducible contributes a context frame; a `let` whose
/// bound program is a value IS the core (ready for substitution).
pub fn decompose(p: &Program) -> Decomposition {
    let mut frames = Vec::new();
    let mut current = p;
    loop {
        match current {
            Program::Val(v) => {
                if frames.is_empty() {
                    return Decomposition::Completed(v.clone());
                }
                unreachable!("value bounds are cores, not frames");
            }
            Program::Let {
                binder,
                bound,
                body,
            } => {
                if matches!(**bound, Program::Val(_)) {
                    return Decomposition::Redex(Redex {
                        frames,
                        core: current.clone(),
                    });
                }
                frames.push(LetFrame {
                    binder: binder.clone(),
                    body: (**body).clone(),
                });
                current = bound.as_ref();
            }
            Program::Call { target, method, .. } => {
                return match target {
                    Value::Net | Value::Loc => Decomposition::Redex(Redex {
                        frames,
                        core: current.clone(),
                    }),
                    Value::Obj(o) => {
                        if o.contains(method) {
                            Decomposition::Redex(Redex {
                                frames,
                                core: current.clone(),
                            })
                        } else {
                            Decomposition::Stuck(StuckReason::UndefinedAnonymousMethod(
                                method.clone(),
                            ))
                        }
                    }
                    Value::Var(x) => Decomposition::Stuck(StuckReason::FreeVariable(x.clone())),
                    Value::Builtin(_) => Decomposition::Stuck(StuckReason::BadCallTarget),
                };
            }
            Program::Install { target, addition } => {
                let target_ok = matches!(target, Value::Loc | Value::Obj(_));
                let addition_ok = matches!(addition, Value::Obj(_));
                return if target_ok && addition_ok {
                    Decomposition::Redex(Redex {
                        frames,
                        core: current.clone(),
                    })
                } else if let Value::Var(x) = target {
                    Decomposition::Stuck(StuckReason::FreeVariable(x.clone()))
                } else if let Value::Var(x) = addition {
                    Decomposition::Stuck(StuckReason::FreeVariable(x.clone()))
                } else {
                    Decomposition::Stuck(StuckReason::BadInstallOperand)
                };
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Enabled choices
// ---------------------------------------------------------------------------

/// Enumerates every choice the rules license in `n`, in a deterministic
/// order: sensors in list order; per sensor its local rule (the head shape
/// determines at most one), then broadcast deliveries (receivers sorted by
/// id), release, and switch.
pub fn enabled_choices(n: &Network) -> Vec<StepChoice> {
    let mut out = Vec::new();
    for s in &n.sensors {
        if !n.is_online(s) {
            continue;
        }
        let Some(head) = s.head() else { continue };
        let has_energy_for_step = s.energy >= n.world.e_in;
        match decompose(head) {
            Decomposition::Completed(_) => {
                // Deliberate deviation: the calculus has no rule for a head
                // value; popping it is observably equivalent to parking it
                // behind R-switch forever, so we pop (and trace it).
                out.push(StepChoice::Local {
                    sensor: s.id.clone(),
                    rule: RuleName::Complete,
                });
            }
            Decomposition::Stuck(_) => {}
            Decomposition::Redex(redex) => match &redex.core {
                Program::Call {
                    target: Value::Net, ..
                } => {
                    if s.energy >= n.world.e_out {
                        let mut receivers: Vec<&str> = n
                            .sensors
                            .iter()
                            .filter(|t| {
                                t.id != s.id
                                    && n.is_online(t)
                                    && distance(s.position, t.position) < s.radius
                                    && !s
                                        .membrane
                                        .as_ref()
                                        .is_some_and(|m| m.delivered.contains(&t.id))
                            })
                            .map(|t| t.id.as_str())
                            .collect();
                        receivers.sort_unstable();
                        for r in receivers {
                            out.push(StepChoice::Deliver {
                                sender: s.id.clone(),
                                receiver: r.to_string(),
                            });
                        }
                    }
                    // Release needs no energy and no delivery: a broadcast
                    // may reach every neighbor, some, or none.
                    out.push(StepChoice::Release {
                        sender: s.id.clone(),
                    });
                }
                Program::Call {
                    target: Value::Loc,
                    method,
                    ..
                } => {
                    if s.object.contains(method) || n.builtins.contains(method) {
                        if has_energy_for_step {
                            out.push(StepChoice::Local {
                                sensor: s.id.clone(),
                                rule: RuleName::MethodTop,
                            });
                        }
                    } else {
                        // The call actively waits for the method to appear;
                        // the self-loop carries no energy premise.
                        out.push(StepChoice::Local {
                            sensor: s.id.clone(),
                            rule: RuleName::NoMethodTop,
                        });
                    }
                }
                Program::Call { .. } => {
                    if has_energy_for_step {
                        out.push(StepChoice::Local {
                            sensor: s.id.clone(),
                            rule: RuleName::Method,
                        });
                    }
                }
                Program::Install { target, .. } => {
                    if has_energy_for_step {
                        let rule = if matches!(target, Value::Loc) {
                            RuleName::InstallTop
                        } else {
                            RuleName::Install
                        };
                        out.push(StepChoice::Local {
                            sensor: s.id.clone(),
                            rule,
                        });
                    }
                }
                Program::Let { .. } => {
                    if has_energy_for_step {
                        out.push(StepChoice::Local {
                            sensor: s.id.clone(),
                            rule: RuleName::Let,
                        });
                    }
                }
                Program::Val(_) => unreachable!("value cores are Completed"),
            },
        }
        // Rotation is blocked only while a broadcast membrane holds
        // deliveries: the broadcasting form can shed an empty membrane but
        // not a populated one.
        if !s.queue.is_empty() && s.membrane.is_none() {
            out.push(StepChoice::Switch {
                sensor: s.id.clone(),
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Applying a step
// ---------------------------------------------------------------------------

/// Payload of a trace `Step` event; what changed beyond the rule name.
#[derive(Debug, Clone, PartialEq)]
pub enum StepDetail {
    /// method-top / no-method-top / method. `builtin` marks dispatch into
    /// the builtin table rather than the sensor object.
    Method { method: Label, builtin: bool },
    Deliver { receiver: String, method: Label },
    Release { method: Label },
    /// install-top / install; the labels the addition carried.
    Installed { labels: Vec<Label> },
    Let { binder: Variable },
    Switch,
    Complete,
}

/// What one applied step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub rule: RuleName,
    pub sensor: String,
    pub detail: StepDetail,
    pub log: Option<LogEntry>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("sensor {sensor}: method `{method}` takes {expected} argument(s), got {found}")]
    MethodArityMismatch {
        sensor: String,
        method: Label,
        expected: usize,
        found: usize,
    },
    #[error("sensor {sensor}: {source}")]
    Builtin {
        sensor: String,
        source: BuiltinCallError,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("step choice is not enabled: {0:?}")]
    InvalidChoice(StepChoice),
    #[error(transparent)]
    Runtime(RuntimeError),
}

fn charge(world: &WorldConfig, energy: &mut f64, cost: f64) {
    if world.metering {
        *energy = (*energy - cost).max(0.0);
    }
}

/// Applies one enabled choice, returning the successor network and a record
/// of what happened. `InvalidChoice` flags a programming error in the
/// caller, not a calculus state; `Runtime` errors can only arise in untyped
/// runs (a present method or builtin called at the wrong arity).
pub fn apply_step(n: &Network, choice: &StepChoice) -> Result<(Network, StepRecord), StepError> {
    if !enabled_choices(n).contains(choice) {
        return Err(StepError::InvalidChoice(choice.clone()));
    }
    let mut next = n.clone();
    let record = apply_choice(&mut next, choice)?;
    Ok((next, record))
}

/// The mutation core of `apply_step`: applies a choice known to be enabled,
/// in place. Every error returns before the first write, so on `Err` the
/// network is exactly as it was. Callers that enumerated the choices
/// themselves (the run loop, the explorer) use this to skip re-validation
/// and the whole-network clone.
pub(crate) fn apply_choice(
    next: &mut Network,
    choice: &StepChoice,
) -> Result<StepRecord, StepError> {
    let step = next.step_count;
    let record = match choice {
        StepChoice::Switch { sensor } => {
            let idx = next.sensor_index(sensor).expect("enabled choice has actor");
            next.sensors[idx].queue.rotate_left(1);
            StepRecord {
                rule: RuleName::Switch,
                sensor: sensor.clone(),
                detail: StepDetail::Switch,
                log: None,
            }
        }
        StepChoice::Deliver { sender, receiver } => {
            let (method, args) = {
                let s = next.sensor(sender).expect("enabled choice has sender");
                let Decomposition::Redex(redex) = decompose(s.head().unwrap()) else {
                    unreachable!("delivery enabled only on broadcast redexes")
                };
                match redex.core {
                    Program::Call { method, args, .. } => (method, args),
                    _ => unreachable!(),
                }
            };
            let ridx = next.sensor_index(receiver).expect("receiver exists");
            next.sensors[ridx].queue.push_back(Program::Call {
                target: Value::Loc,
                method: method.clone(),
                args: args.clone(),
            });
            let sidx = next.sensor_index(sender).unwrap();
            next.sensors[sidx]
                .membrane
                .get_or_insert_with(BroadcastState::default)
                .delivered
                .insert(receiver.clone());
            StepRecord {
                rule: RuleName::BroadcastDeliver,
                sensor: sender.clone(),
                detail: StepDetail::Deliver {
                    receiver: receiver.clone(),
                    method,
                },
                log: None,
            }
        }
        StepChoice::Release { sender } => {
            let sidx = next.sensor_index(sender).expect("sender exists");
            let s = &mut next.sensors[sidx];
            let Decomposition::Redex(redex) = decompose(s.head().unwrap()) else {
                unreachable!("release enabled only on broadcast redexes")
            };
            let method = match &redex.core {
                Program::Call { method, .. } => method.clone(),
                _ => unreachable!(),
            };
            let rebuilt =
                Redex::reassemble(&redex.frames, Program::Val(Value::Obj(Object::new())));
            *s.queue.front_mut().unwrap() = rebuilt;
            s.membrane = None;
            let world = next.world.clone();
            charge(&world, &mut next.sensors[sidx].energy, world.e_out);
            StepRecord {
                rule: RuleName::Release,
                sensor: sender.clone(),
                detail: StepDetail::Release { method },
                log: None,
            }
        }
        StepChoice::Local { sensor, rule } => {
            let sidx = next.sensor_index(sensor).expect("actor exists");
            match rule {
                RuleName::Complete => {
                    next.sensors[sidx].queue.pop_front();
                    StepRecord {
                        rule: RuleName::Complete,
                        sensor: sensor.clone(),
                        detail: StepDetail::Complete,
                        log: None,
                    }
                }
                RuleName::NoMethodTop => StepRecord {
                    // The self-loop: the call waits for code that is not
                    // there yet. No state change, no energy.
                    rule: RuleName::NoMethodTop,
                    sensor: sensor.clone(),
                    detail: match decompose(next.sensors[sidx].head().unwrap()) {
                        Decomposition::Redex(Redex {
                            core: Program::Call { method, .. },
                            ..
                        }) => StepDetail::Method {
                            method,
                            builtin: false,
                        },
                        _ => unreachable!("no-method-top enabled only on loc calls"),
                    },
                    log: None,
                },
                RuleName::MethodTop
                | RuleName::Method
                | RuleName::InstallTop
                | RuleName::Install
                | RuleName::Let => {
                    let record = apply_local(next, sidx, *rule, step)?;
                    let world = next.world.clone();
                    charge(&world, &mut next.sensors[sidx].energy, world.e_in);
                    record
                }
                RuleName::BroadcastDeliver | RuleName::Release | RuleName::Switch => {
                    unreachable!("not local rules")
                }
            }
        }
    };
    next.step_count += 1;
    Ok(record)
}

/// The five context-rewriting local rules. The head is decomposed, the core
/// rewritten according to `rule`, and the context reassembled around the
/// result.
fn apply_local(
    n: &mut Network,
    sidx: usize,
    rule: RuleName,
    step: u64,
) -> Result<StepRecord, StepError> {
    let sensor_id = n.sensors[sidx].id.clone();
    let Decomposition::Redex(redex) = decompose(n.sensors[sidx].head().unwrap()) else {
        unreachable!("local rules are enabled only on redexes")
    };
    let (core, detail, log) = match (&rule, &redex.core) {
        (
            RuleName::MethodTop,
            Program::Call {
                target: Value::Loc,
                method,
                args,
            },
        ) => {
            if let Some(m) = n.sensors[sidx].object.get(method) {
                let body = instantiate(m, args).ok_or_else(|| {
                    StepError::Runtime(RuntimeError::MethodArityMismatch {
                        sensor: sensor_id.clone(),
                        method: method.clone(),
                        expected: m.params.len(),
                        found: args.len(),
                    })
                })?;
                (
                    body,
                    StepDetail::Method {
                        method: method.clone(),
                        builtin: false,
                    },
                    None,
                )
            } else {
                // Dispatch into the builtin table (the sensor object
                // shadows it, so we only get here when the label is absent).
                let position = n.sensors[sidx].position;
                let world = n.world.clone();
                let (value, log) = call_builtin(
                    &n.builtins,
                    method,
                    args,
                    &sensor_id,
                    position,
                    &world,
                    &mut n.logs,
                    step,
                )
                .map_err(|source| {
                    StepError::Runtime(RuntimeError::Builtin {
                        sensor: sensor_id.clone(),
                        source,
                    })
                })?;
                (
                    Program::Val(value),
                    StepDetail::Method {
                        method: method.clone(),
                        builtin: true,
                    },
                    log,
                )
            }
        }
        (
            RuleName::Method,
            Program::Call {
                target: Value::Obj(o),
                method,
                args,
            },
        ) => {
            let m = o.get(method).expect("method presence checked by decompose");
            let body = instantiate(m, args).ok_or_else(|| {
                StepError::Runtime(RuntimeError::MethodArityMismatch {
                    sensor: sensor_id.clone(),
                    method: method.clone(),
                    expected: m.params.len(),
                    found: args.len(),
                })
            })?;
            (
                body,
                StepDetail::Method {
                    method: method.clone(),
                    builtin: false,
                },
                None,
            )
        }
        (
            RuleName::InstallTop,
            Program::Install {
                target: Value::Loc,
                addition: Value::Obj(addition),
            },
        ) => {
            let labels: Vec<Label> = addition.methods.keys().cloned().collect();
            let updated = object_update(&n.sensors[sidx].object, addition);
            n.sensors[sidx].object = updated.clone();
            (
                Program::Val(Value::Obj(updated)),
                StepDetail::Installed { labels },
                None,
            )
        }
        (
            RuleName::Install,
            Program::Install {
                target: Value::Obj(base),
                addition: Value::Obj(addition),
            },
        ) => {
            let labels: Vec<Label> = addition.methods.keys().cloned().collect();
            (
                Program::Val(Value::Obj(object_update(base, addition))),
                StepDetail::Installed { labels },
                None,
            )
        }
        (
            RuleName::Let,
            Program::Let {
                binder,
                bound,
                body,
            },
        ) => {
            let Program::Val(v) = &**bound else {
                unreachable!("let cores carry value bounds")
            };
            let bindings = std::iter::once((binder.clone(), v.clone())).collect();
            (
                crate::syntax::substitute(body, &bindings),
                StepDetail::Let {
                    binder: binder.clone(),
                },
                None,
            )
        }
        _ => unreachable!("rule/core mismatch: {rule:?} vs {:?}", redex.core),
    };
    *n.sensors[sidx].queue.front_mut().unwrap() = Redex::reassemble(&redex.frames, core);
    Ok(StepRecord {
        rule,
        sensor: sensor_id,
        detail,
        log,
    })
}

// ---------------------------------------------------------------------------
// Canonical state bytes (dedup for quiescence detection and exploration)
// ---------------------------------------------------------------------------

/// A canonical byte representation of the observable network state.
/// Sensors are sorted by id; sensors that can never act again (off, or
/// below the energy threshold) are dropped — off is the neutral element of
/// network composition. Programs are alpha-normalized, so states differing
/// only in bound names coincide. Logs and the step counter are excluded:
/// they record history, not future behavior.
pub fn canonical_state_bytes(n: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ids: Vec<usize> = (0..n.sensors.len())
        .filter(|&i| n.is_online(&n.sensors[i]))
        .collect();
    ids.sort_by(|&a, &b| n.sensors[a].id.cmp(&n.sensors[b].id));
    for i in ids {
        let s = &n.sensors[i];
        push_field(&mut out, s.id.as_bytes());
        push_field(&mut out, &s.position.0.to_bits().to_le_bytes());
        push_field(&mut out, &s.position.1.to_bits().to_le_bytes());
        push_field(&mut out, &s.radius.to_bits().to_le_bytes());
        push_field(&mut out, &s.energy.to_bits().to_le_bytes());
        let object = alpha_normalize(&Program::Val(Value::Obj(s.object.clone())));
        push_field(&mut out, object.to_string().as_bytes());
        push_field(&mut out, &(s.queue.len() as u64).to_le_bytes());
        for p in &s.queue {
            push_field(&mut out, alpha_normalize(p).to_string().as_bytes());
        }
        match &s.membrane {
            None => push_field(&mut out, b"-"),
            Some(m) => {
                push_field(&mut out, &(m.delivered.len() as u64).to_le_bytes());
                for id in &m.delivered {
                    push_field(&mut out, id.as_bytes());
                }
            }
        }
    }
    out
}

fn push_field(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(bytes);
}

// ---------------------------------------------------------------------------
// Driving a run
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepBudget {
    pub max_steps: u64,
}

impl StepBudget {
    pub fn new(max_steps: u64) -> Self {
        StepBudget { max_steps }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    /// Nothing productive can ever happen again: no choices at all, or only
    /// busy-waits/rotations cycling through already-seen configurations.
    Quiescent,
    BudgetExhausted,
    RuntimeError(RuntimeError),
    /// The policy declined to pick although choices were enabled (a
    /// scripted policy ran past its script, or picked a disabled choice).
    PolicyStalled,
}

/// Runs a network under a scheduling policy until quiescence, budget
/// exhaustion, or a runtime error; returns the final network and the full
/// event trace.
pub fn run(mut n: Network, policy: &mut Policy, budget: StepBudget) -> (Network, Trace) {
    let start = n.step_count;
    let mut events = Vec::new();
    let mut idle_seen: HashSet<Vec<u8>> = HashSet::new();
    let stop = loop {
        if n.step_count - start >= budget.max_steps {
            break StopReason::BudgetExhausted;
        }
        let choices = enabled_choices(&n);
        if choices.is_empty() {
            break StopReason::Quiescent;
        }
        if !choices.iter().any(StepChoice::is_productive) {
            // Only busy-waits and rotations remain; once a configuration
            // repeats, no productive step can ever be reached again.
            if !idle_seen.insert(canonical_state_bytes(&n)) {
                break StopReason::Quiescent;
            }
        }
        let Some(choice) = policy.pick(&n, &choices) else {
            break StopReason::PolicyStalled;
        };
        debug_assert!(choices.contains(&choice), "policies pick enabled choices");
        let step = n.step_count;
        match apply_choice(&mut n, &choice) {
            Ok(record) => {
                events.push(TraceEvent::step(step, &record));
                if let Some(log) = &record.log {
                    events.push(TraceEvent::log(step, &record.sensor, log));
                }
                if choice.is_productive() {
                    idle_seen.clear();
                }
            }
            Err(StepError::Runtime(e)) => break StopReason::RuntimeError(e),
            Err(StepError::InvalidChoice(_)) => {
                unreachable!("apply_choice does not re-validate")
            }
        }
    };
    (n, Trace { events, stop })
}
