//! Static types for sensor networks.
//!
//! The system distinguishes the built-in data type `B`, the network type
//! `Net`, and object types, which come in two kinds: plain (anonymous
//! literals) and sensor (the object installed behind `loc`). All sensors
//! share one fixed [`Interface`]; a sensor may implement any subset of it,
//! but every method it does implement must carry exactly the declared
//! signature.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::semantics::{Network, Sensor, SensorStatus};
use crate::syntax::{Label, Object, Program, Value, Variable};

/// Whether an object type describes an anonymous object or a sensor object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjKind {
    Plain,
    Sensor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodType {
    pub params: Vec<Type>,
    pub ret: Type,
}

impl MethodType {
    pub fn new(params: Vec<Type>, ret: Type) -> Self {
        MethodType { params, ret }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjType {
    pub kind: ObjKind,
    pub methods: BTreeMap<Label, MethodType>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Type {
    /// The single built-in data type: numbers, symbols, unit.
    Builtin,
    Net,
    Obj(ObjType),
}

impl Type {
    /// The empty plain object type, result of every broadcast call.
    pub fn empty_obj() -> Type {
        Type::Obj(ObjType {
            kind: ObjKind::Plain,
            methods: BTreeMap::new(),
        })
    }

    pub fn plain(methods: BTreeMap<Label, MethodType>) -> Type {
        Type::Obj(ObjType {
            kind: ObjKind::Plain,
            methods,
        })
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Builtin => f.write_str("B"),
            Type::Net => f.write_str("Net"),
            Type::Obj(o) => {
                let (open, close) = match o.kind {
                    ObjKind::Plain => ("{", "}"),
                    ObjKind::Sensor => ("[", "]"),
                };
                f.write_str(open)?;
                for (i, (l, sig)) in o.methods.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{l}: (")?;
                    for (j, p) in sig.params.iter().enumerate() {
                        if j > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{p}")?;
                    }
                    write!(f, ") -> {}", sig.ret)?;
                }
                f.write_str(close)
            }
        }
    }
}

/// The network-wide sensor interface, fixed for a whole checking run. `loc`
/// is typed as the sensor-kind object over exactly these signatures, and
/// broadcast calls are checked against them as well.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interface {
    methods: BTreeMap<Label, MethodType>,
}

impl Interface {
    /// Builds an interface, merging in the built-in method signatures. An
    /// explicit declaration that disagrees with a built-in's signature is
    /// rejected so local and remote views of the interface cannot diverge.
    pub fn new(mut methods: BTreeMap<Label, MethodType>) -> Result<Self, TypeError> {
        for (label, sig) in crate::world::builtin_signatures() {
            match methods.get(&label) {
                None => {
                    methods.insert(label, sig);
                }
                Some(declared) if *declared == sig => {}
                Some(_) => {
                    return Err(TypeError::new(TypeErrorKind::SignatureMismatch(label))
                        .at("interface"));
                }
            }
        }
        Ok(Interface { methods })
    }

    /// An interface holding only the built-in methods.
    pub fn builtins_only() -> Self {
        Interface::new(BTreeMap::new()).expect("builtin signatures are consistent")
    }

    pub fn get(&self, label: &Label) -> Option<&MethodType> {
        self.methods.get(label)
    }

    pub fn methods(&self) -> &BTreeMap<Label, MethodType> {
        &self.methods
    }

    /// The type of `loc`: the sensor-kind object over the full interface.
    pub fn loc_type(&self) -> Type {
        Type::Obj(ObjType {
            kind: ObjKind::Sensor,
            methods: self.methods.clone(),
        })
    }
}

/// A typing environment. Extension replaces any previous binding for the
/// same variable: a formal presentation would extend only at fresh
/// variables, alpha-renaming shadowed terms first; replacing is the
/// standard equivalent that avoids the rename.
#[derive(Debug, Clone, Default)]
pub struct TypingEnv {
    vars: BTreeMap<Variable, Type>,
}

impl TypingEnv {
    pub fn empty() -> Self {
        TypingEnv::default()
    }

    pub fn lookup(&self, x: &Variable) -> Option<&Type> {
        self.vars.get(x)
    }

    pub fn extended(&self, x: Variable, t: Type) -> TypingEnv {
        let mut vars = self.vars.clone();
        vars.insert(x, t);
        TypingEnv { vars }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeErrorKind {
    #[error("unbound variable `{0}`")]
    UnboundVariable(Variable),
    #[error("no method `{method}` on target of type {target}")]
    NoSuchMethod { method: Label, target: Type },
    #[error("method `{method}` takes {expected} argument(s), got {found}")]
    ArityMismatch {
        method: Label,
        expected: usize,
        found: usize,
    },
    #[error("argument {position} of `{method}` has type {found}, expected {expected}")]
    ArgumentTypeMismatch {
        method: Label,
        position: usize,
        expected: Type,
        found: Type,
    },
    #[error("install operand has type {0}, expected an object")]
    TargetNotObject(Type),
    #[error("call target has type {0}, expected an object or net")]
    TargetNotNetOrObject(Type),
    #[error("cannot install a sensor object into an anonymous object")]
    IllegalInstallCombination,
    #[error("method `{0}` is not part of the interface")]
    MethodNotInInterface(Label),
    #[error("method `{0}` does not match its interface signature")]
    SignatureMismatch(Label),
}

impl TypeErrorKind {
    /// Stable machine-readable code for the JSON error report.
    pub fn code(&self) -> &'static str {
        match self {
            TypeErrorKind::UnboundVariable(_) => "unbound-variable",
            TypeErrorKind::NoSuchMethod { .. } => "no-such-method",
            TypeErrorKind::ArityMismatch { .. } => "arity-mismatch",
            TypeErrorKind::ArgumentTypeMismatch { .. } => "argument-type-mismatch",
            TypeErrorKind::TargetNotObject(_) => "target-not-object",
            TypeErrorKind::TargetNotNetOrObject(_) => "target-not-net-or-object",
            TypeErrorKind::IllegalInstallCombination => "illegal-install-combination",
            TypeErrorKind::MethodNotInInterface(_) => "method-not-in-interface",
            TypeErrorKind::SignatureMismatch(_) => "signature-mismatch",
        }
    }
}

/// A type error, optionally annotated with the sensor and the structural
/// location (e.g. `method ping` or `queue[0]`) it was found at.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub sensor: Option<String>,
    pub location: String,
}

impl TypeError {
    pub fn new(kind: TypeErrorKind) -> Self {
        TypeError {
            kind,
            sensor: None,
            location: String::new(),
        }
    }

    fn at(mut self, location: &str) -> Self {
        if self.location.is_empty() {
            self.location = location.to_string();
        } else {
            self.location = format!("{location} / {}", self.location);
        }
        self
    }

    fn on_sensor(mut self, id: &str) -> Self {
        self.sensor = Some(id.to_string());
        self
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            code: self.kind.code(),
            sensor: self.sensor.clone(),
            location: self.location.clone(),
            message: self.kind.to_string(),
        }
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = &self.sensor {
            write!(f, "sensor {s}: ")?;
        }
        if !self.location.is_empty() {
            write!(f, "{}: ", self.location)?;
        }
        write!(f, "{}", self.kind)
    }
}

/// One entry of the machine-readable error report.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub code: &'static str,
    pub sensor: Option<String>,
    pub location: String,
    pub message: String,
}

/// Types a value. Object literals are always plain-kind; their method
/// signatures are fixed by the interface (each label must appear there) and
/// each body must produce the declared return type.
pub fn type_of_value(env: &TypingEnv, iface: &Interface, v: &Value) -> Result<Type, TypeError> {
    match v {
        Value::Builtin(_) => Ok(Type::Builtin),
        Value::Net => Ok(Type::Net),
        Value::Loc => Ok(iface.loc_type()),
        Value::Var(x) => env
            .lookup(x)
            .cloned()
            .ok_or_else(|| TypeError::new(TypeErrorKind::UnboundVariable(x.clone()))),
        Value::Obj(o) => Ok(Type::Obj(type_of_object(env, iface, o)?)),
    }
}

/// Types an object literal against the interface, yielding its plain object
/// type.
pub fn type_of_object(
    env: &TypingEnv,
    iface: &Interface,
    o: &Object,
) -> Result<ObjType, TypeError> {
    let mut methods = BTreeMap::new();
    for (label, method) in &o.methods {
        let sig = iface.get(label).ok_or_else(|| {
            TypeError::new(TypeErrorKind::MethodNotInInterface(label.clone()))
                .at(&format!("method {label}"))
        })?;
        if method.params.len() != sig.params.len() {
            return Err(TypeError::new(TypeErrorKind::SignatureMismatch(label.clone()))
                .at(&format!("method {label}")));
        }
        let mut body_env = env.clone();
        for (p, t) in method.params.iter().zip(&sig.params) {
            body_env = body_env.extended(p.clone(), t.clone());
        }
        let body_ty = type_of_program(&body_env, iface, &method.body)
            .map_err(|e| e.at(&format!("method {label}")))?;
        if body_ty != sig.ret {
            return Err(TypeError::new(TypeErrorKind::SignatureMismatch(label.clone()))
                .at(&format!("method {label}")));
        }
        methods.insert(label.clone(), sig.clone());
    }
    Ok(ObjType {
        kind: ObjKind::Plain,
        methods,
    })
}

/// Types a program.
pub fn type_of_program(
    env: &TypingEnv,
    iface: &Interface,
    p: &Program,
) -> Result<Type, TypeError> {
    match p {
        Program::Val(v) => type_of_value(env, iface, v),
        Program::Call {
            target,
            method,
            args,
        } => {
            let target_ty = type_of_value(env, iface, target)?;
            let sig = match &target_ty {
                // A broadcast call is checked against the interface; its
                // result is always the empty object (remote results are
                // unobservable).
                Type::Net => iface.get(method).cloned().ok_or_else(|| {
                    TypeError::new(TypeErrorKind::NoSuchMethod {
                        method: method.clone(),
                        target: Type::Net,
                    })
                })?,
                Type::Obj(o) => o.methods.get(method).cloned().ok_or_else(|| {
                    TypeError::new(TypeErrorKind::NoSuchMethod {
                        method: method.clone(),
                        target: target_ty.clone(),
                    })
                })?,
                other => {
                    return Err(TypeError::new(TypeErrorKind::TargetNotNetOrObject(
                        other.clone(),
                    )))
                }
            };
            if args.len() != sig.params.len() {
                return Err(TypeError::new(TypeErrorKind::ArityMismatch {
                    method: method.clone(),
                    expected: sig.params.len(),
                    found: args.len(),
                }));
            }
            for (i, (arg, expected)) in args.iter().zip(&sig.params).enumerate() {
                let found = type_of_value(env, iface, arg)?;
                if found != *expected {
                    return Err(TypeError::new(TypeErrorKind::ArgumentTypeMismatch {
                        method: method.clone(),
                        position: i + 1,
                        expected: expected.clone(),
                        found,
                    }));
                }
            }
            Ok(match target_ty {
                Type::Net => Type::empty_obj(),
                _ => sig.ret,
            })
        }
        Program::Install { target, addition } => {
            let t1 = type_of_value(env, iface, target).map_err(|e| e.at("install"))?;
            let t2 = type_of_value(env, iface, addition).map_err(|e| e.at("install"))?;
            type_combine(&t1, &t2).map_err(|e| e.at("install"))
        }
        Program::Let {
            binder,
            bound,
            body,
        } => {
            let bound_ty = type_of_program(env, iface, bound)?;
            let body_env = env.extended(binder.clone(), bound_ty);
            type_of_program(&body_env, iface, body)
        }
    }
}

/// The type-level counterpart of the object update: methods of `t2` win on
/// clashes and the kind of `t1` is kept. Installing a sensor object into an
/// anonymous one is illegal — the result could promise interface methods
/// the anonymous object cannot actually serve.
pub fn type_combine(t1: &Type, t2: &Type) -> Result<Type, TypeError> {
    let (o1, o2) = match (t1, t2) {
        (Type::Obj(o1), Type::Obj(o2)) => (o1, o2),
        (Type::Obj(_), other) | (other, _) => {
            return Err(TypeError::new(TypeErrorKind::TargetNotObject(other.clone())));
        }
    };
    if o1.kind == ObjKind::Plain && o2.kind == ObjKind::Sensor {
        return Err(TypeError::new(TypeErrorKind::IllegalInstallCombination));
    }
    let mut methods = o1.methods.clone();
    for (l, sig) in &o2.methods {
        methods.insert(l.clone(), sig.clone());
    }
    Ok(Type::Obj(ObjType {
        kind: o1.kind,
        methods,
    }))
}

/// Checks one sensor: its object must be a subset of the interface with
/// exactly the declared signatures (bodies typed under the declared
/// parameter types), and every queued program must be well typed — at any
/// type — under the empty environment. Sensors switched off are fine as
/// they are.
pub fn check_sensor(iface: &Interface, sensor: &Sensor) -> Result<(), TypeError> {
    if sensor.status == SensorStatus::Off {
        return Ok(());
    }
    let id = sensor.id.as_str();
    type_of_object(&TypingEnv::empty(), iface, &sensor.object)
        .map_err(|e| e.on_sensor(id))?;
    for (i, p) in sensor.queue.iter().enumerate() {
        type_of_program(&TypingEnv::empty(), iface, p)
            .map_err(|e| e.at(&format!("queue[{i}]")).on_sensor(id))?;
    }
    Ok(())
}

/// Checks a whole network, collecting one error per failing sensor instead
/// of stopping at the first.
pub fn check_network(iface: &Interface, network: &Network) -> Result<(), Vec<TypeError>> {
    let errors: Vec<TypeError> = network
        .sensors
        .iter()
        .filter_map(|s| check_sensor(iface, s).err())
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{object_update, Method, Variable};

    fn ping_interface() -> Interface {
        let b = Type::Builtin;
        let empty = Type::empty_obj;
        Interface::new(BTreeMap::from([
            (Label::new("ping"), MethodType::new(vec![], empty())),
            (Label::new("forward"), MethodType::new(vec![b], empty())),
        ]))
        .unwrap()
    }

    fn msensor_object() -> Object {
        // {ping = () net.forward(m), forward = (x) {}}
        let mut o = Object::new();
        o.insert(
            Label::new("ping"),
            Method {
                params: vec![],
                body: Program::call(Value::Net, "forward", vec![Value::var("m")]),
            },
        );
        o.insert(
            Label::new("forward"),
            Method {
                params: vec![Variable::new("x")],
                body: Program::val(Value::Obj(Object::new())),
            },
        );
        o
    }

    #[test]
    fn values_have_axiomatic_types() {
        let iface = ping_interface();
        let env = TypingEnv::empty();
        assert_eq!(type_of_value(&env, &iface, &Value::Net).unwrap(), Type::Net);
        assert_eq!(
            type_of_value(&env, &iface, &Value::number(3.0)).unwrap(),
            Type::Builtin
        );
        assert_eq!(
            type_of_value(&env, &iface, &Value::unit()).unwrap(),
            Type::Builtin
        );
        assert_eq!(type_of_value(&env, &iface, &Value::Loc).unwrap(), iface.loc_type());
        match type_of_value(&env, &iface, &Value::Loc).unwrap() {
            Type::Obj(o) => assert_eq!(o.kind, ObjKind::Sensor),
            t => panic!("loc should be an object, got {t}"),
        }
    }

    #[test]
    fn msensor_object_types_as_interface_subset() {
        let iface = ping_interface();
        let env = TypingEnv::empty().extended(Variable::new("m"), Type::Builtin);
        let ty = type_of_object(&env, &iface, &msensor_object()).unwrap();
        assert_eq!(ty.kind, ObjKind::Plain);
        assert_eq!(
            ty.methods,
            BTreeMap::from([
                (Label::new("ping"), MethodType::new(vec![], Type::empty_obj())),
                (
                    Label::new("forward"),
                    MethodType::new(vec![Type::Builtin], Type::empty_obj())
                ),
            ])
        );
    }

    #[test]
    fn broadcast_calls_return_the_empty_object() {
        let iface = ping_interface();
        let p = Program::call(Value::Net, "ping", vec![]);
        assert_eq!(
            type_of_program(&TypingEnv::empty(), &iface, &p).unwrap(),
            Type::empty_obj()
        );
    }

    #[test]
    fn local_calls_through_loc_use_the_interface() {
        let iface = ping_interface();
        let p = Program::call(Value::Loc, "forward", vec![Value::number(7.0)]);
        assert_eq!(
            type_of_program(&TypingEnv::empty(), &iface, &p).unwrap(),
            Type::empty_obj()
        );
    }

    #[test]
    fn broadcast_result_has_no_methods() {
        // let x = net.ping() in x.forward(1.0): the empty object lacks forward.
        let iface = ping_interface();
        let p = Program::let_in(
            "x",
            Program::call(Value::Net, "ping", vec![]),
            Program::call(Value::var("x"), "forward", vec![Value::number(1.0)]),
        );
        let err = type_of_program(&TypingEnv::empty(), &iface, &p).unwrap_err();
        assert!(matches!(err.kind, TypeErrorKind::NoSuchMethod { .. }), "{err}");
    }

    #[test]
    fn argument_types_are_checked_exactly() {
        let iface = ping_interface();
        let bad_arity = Program::call(Value::Loc, "forward", vec![]);
        let err = type_of_program(&TypingEnv::empty(), &iface, &bad_arity).unwrap_err();
        assert!(matches!(err.kind, TypeErrorKind::ArityMismatch { expected: 1, found: 0, .. }));

        let bad_type = Program::call(Value::Loc, "forward", vec![Value::Net]);
        let err = type_of_program(&TypingEnv::empty(), &iface, &bad_type).unwrap_err();
        assert!(matches!(
            err.kind,
            TypeErrorKind::ArgumentTypeMismatch { position: 1, .. }
        ));
    }

    #[test]
    fn combine_is_right_biased_and_keeps_left_kind() {
        let f_nullary = MethodType::new(vec![], Type::empty_obj());
        let f_unary = MethodType::new(vec![Type::Builtin], Type::empty_obj());
        let sensor_f = Type::Obj(ObjType {
            kind: ObjKind::Sensor,
            methods: BTreeMap::from([(Label::new("f"), f_nullary.clone())]),
        });
        let plain_f = Type::plain(BTreeMap::from([(Label::new("f"), f_unary.clone())]));

        let combined = type_combine(&sensor_f, &plain_f).unwrap();
        match combined {
            Type::Obj(o) => {
                assert_eq!(o.kind, ObjKind::Sensor);
                assert_eq!(o.methods, BTreeMap::from([(Label::new("f"), f_unary)]));
            }
            t => panic!("expected object type, got {t}"),
        }

        let neutral = type_combine(&Type::empty_obj(), &plain_f).unwrap();
        assert_eq!(neutral, plain_f);
    }

    #[test]
    fn plain_cannot_absorb_sensor() {
        let sensor_empty = Type::Obj(ObjType {
            kind: ObjKind::Sensor,
            methods: BTreeMap::new(),
        });
        let err = type_combine(&Type::empty_obj(), &sensor_empty).unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::IllegalInstallCombination);
        // The other three kind combinations are all defined.
        assert!(type_combine(&sensor_empty, &sensor_empty).is_ok());
        assert!(type_combine(&sensor_empty, &Type::empty_obj()).is_ok());
        assert!(type_combine(&Type::empty_obj(), &Type::empty_obj()).is_ok());
    }

    #[test]
    fn combine_rejects_non_objects() {
        let err = type_combine(&Type::Builtin, &Type::empty_obj()).unwrap_err();
        assert!(matches!(err.kind, TypeErrorKind::TargetNotObject(Type::Builtin)));
    }

    #[test]
    fn combine_agrees_with_object_update_on_domains() {
        // Exhaustive check over all subsets of a 2-label universe, both as
        // objects and as types: the combined label set and the winner on
        // clashes must match object_update exactly.
        let labels = [Label::new("a"), Label::new("b")];
        let body_of = |tag: f64| Method {
            params: vec![],
            body: Program::val(Value::number(tag)),
        };
        let sig_of = |tag: f64| MethodType::new(vec![Type::Builtin; tag as usize], Type::Builtin);

        for mask1 in 0u32..4 {
            for mask2 in 0u32..4 {
                let mut o1 = Object::new();
                let mut o2 = Object::new();
                let mut t1 = BTreeMap::new();
                let mut t2 = BTreeMap::new();
                for (i, l) in labels.iter().enumerate() {
                    if mask1 & (1 << i) != 0 {
                        o1.insert(l.clone(), body_of(1.0));
                        t1.insert(l.clone(), sig_of(1.0));
                    }
                    if mask2 & (1 << i) != 0 {
                        o2.insert(l.clone(), body_of(2.0));
                        t2.insert(l.clone(), sig_of(2.0));
                    }
                }
                let updated = object_update(&o1, &o2);
                let combined = match type_combine(&Type::plain(t1), &Type::plain(t2)).unwrap() {
                    Type::Obj(o) => o.methods,
                    _ => unreachable!(),
                };
                let update_labels: Vec<&Label> = updated.methods.keys().collect();
                let combine_labels: Vec<&Label> = combined.keys().collect();
                assert_eq!(update_labels, combine_labels);
                for l in combined.keys() {
                    let from_o2 = o2.contains(l);
                    assert_eq!(
                        combined[l].params.len() == 2,
                        from_o2,
                        "right bias must match object_update for {l}"
                    );
                }
            }
        }
    }

    #[test]
    fn interface_always_contains_builtins() {
        let iface = ping_interface();
        for name in ["field", "log_mac", "log_field"] {
            assert!(iface.get(&Label::new(name)).is_some(), "missing builtin {name}");
        }
        assert_eq!(
            iface.get(&Label::new("field")).unwrap(),
            &MethodType::new(vec![], Type::Builtin)
        );
    }

    #[test]
    fn interface_rejects_conflicting_builtin_declaration() {
        let err = Interface::new(BTreeMap::from([(
            Label::new("field"),
            MethodType::new(vec![Type::Builtin], Type::Builtin),
        )]))
        .unwrap_err();
        assert!(matches!(err.kind, TypeErrorKind::SignatureMismatch(_)));
    }

    #[test]
    fn literal_methods_must_be_in_the_interface() {
        let iface = ping_interface();
        let mut o = Object::new();
        o.insert(
            Label::new("extra"),
            Method {
                params: vec![],
                body: Program::call(Value::Loc, "extra", vec![]),
            },
        );
        let err = type_of_object(&TypingEnv::empty(), &iface, &o).unwrap_err();
        assert!(matches!(err.kind, TypeErrorKind::MethodNotInInterface(_)));
    }

    #[test]
    fn let_extends_the_environment() {
        let iface = ping_interface();
        // let x = 3 in loc.forward(x)
        let p = Program::let_in(
            "x",
            Program::val(Value::number(3.0)),
            Program::call(Value::Loc, "forward", vec![Value::var("x")]),
        );
        assert_eq!(
            type_of_program(&TypingEnv::empty(), &iface, &p).unwrap(),
            Type::empty_obj()
        );
        // Unbound without the let.
        let q = Program::call(Value::Loc, "forward", vec![Value::var("x")]);
        let err = type_of_program(&TypingEnv::empty(), &iface, &q).unwrap_err();
        assert!(matches!(err.kind, TypeErrorKind::UnboundVariable(_)));
    }

    #[test]
    fn type_checking_is_deterministic() {
        let iface = ping_interface();
        let p = Program::let_in(
            "x",
            Program::call(Value::Net, "ping", vec![]),
            Program::call(Value::var("x"), "forward", vec![Value::number(1.0)]),
        );
        let a = type_of_program(&TypingEnv::empty(), &iface, &p);
        let b = type_of_program(&TypingEnv::empty(), &iface, &p);
        assert_eq!(a, b);
    }
}
