//! Abstract syntax for sensor programs.
//!
//! A sensor runs [`Program`]s over [`Value`]s; objects are finite maps from
//! method labels to parameterized method bodies. The operations that the
//! rest of the crate leans on live here: free variables, capture-avoiding
//! parallel substitution, the right-biased object update `O + O'`, and
//! alpha-equivalence / alpha-normalization of programs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Words that can never name a variable, regardless of how the term was
/// constructed (parsed, generated, or built by hand in tests).
pub const VARIABLE_RESERVED: &[&str] = &["net", "loc", "install", "let", "in", "off"];

/// Everything the concrete syntax additionally claims for itself. The
/// parser refuses these as identifiers; programmatic construction only
/// enforces [`VARIABLE_RESERVED`].
pub const SURFACE_RESERVED: &[&str] = &[
    "net", "loc", "install", "let", "in", "off", "sensor", "world", "interface", "at", "radius",
    "energy", "object", "run",
];

/// A method label. Labels live in a separate namespace from variables and
/// may shadow nothing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(String);

impl Label {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(!name.is_empty(), "method labels must be non-empty");
        Label(name)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A program variable. Construction rejects the core reserved words so a
/// reserved name cannot sneak in through any code path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(!name.is_empty(), "variables must be non-empty");
        assert!(
            !VARIABLE_RESERVED.contains(&name.as_str()),
            "`{name}` is reserved and cannot be a variable"
        );
        Variable(name)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ground data a sensor can compute with or log.
#[derive(Debug, Clone)]
pub enum BuiltinValue {
    Number(f64),
    Symbol(String),
    Unit,
}

// Numbers compare by bit pattern so equality stays reflexive (NaN included)
// and agrees with the byte-level canonical form used for state dedup.
impl PartialEq for BuiltinValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (BuiltinValue::Number(a), BuiltinValue::Number(b)) => a.to_bits() == b.to_bits(),
            (BuiltinValue::Symbol(a), BuiltinValue::Symbol(b)) => a == b,
            (BuiltinValue::Unit, BuiltinValue::Unit) => true,
            _ => false,
        }
    }
}

impl Eq for BuiltinValue {}

/// Values: ground data, variables, the two location references, and object
/// literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Builtin(BuiltinValue),
    Var(Variable),
    /// The whole network, target of broadcast calls.
    Net,
    /// The sensor evaluating the program.
    Loc,
    Obj(Object),
}

impl Value {
    pub fn number(n: f64) -> Self {
        Value::Builtin(BuiltinValue::Number(n))
    }

    pub fn symbol(s: impl Into<String>) -> Self {
        Value::Builtin(BuiltinValue::Symbol(s.into()))
    }

    pub fn unit() -> Self {
        Value::Builtin(BuiltinValue::Unit)
    }

    pub fn var(name: &str) -> Self {
        Value::Var(Variable::new(name))
    }
}

/// A method: parameter list plus body. Parameters bind inside the body and
/// are expected to be pairwise distinct (the parser enforces this).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Method {
    pub params: Vec<Variable>,
    pub body: Program,
}

/// An object: a finite map from labels to methods. `BTreeMap` keeps label
/// order canonical everywhere (printing, typing, canonical state bytes).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Object {
    pub methods: BTreeMap<Label, Method>,
}

impl Object {
    pub fn new() -> Self {
        Object::default()
    }

    pub fn get(&self, label: &Label) -> Option<&Method> {
        self.methods.get(label)
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.methods.contains_key(label)
    }

    /// Inserts a method, returning the previous one under that label if any.
    pub fn insert(&mut self, label: Label, method: Method) -> Option<Method> {
        self.methods.insert(label, method)
    }

    pub fn is_empty(&self) -> bool {
        self.methods.is_empty()
    }
}

/// Programs in the object layer of the calculus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Program {
    /// A finished computation.
    Val(Value),
    /// Method call `v.l(v1, ..., vn)`; the target may be `loc`, `net`, or an
    /// object literal (after substitution, never a bare variable).
    Call {
        target: Value,
        method: Label,
        args: Vec<Value>,
    },
    /// Code installation `install v v'`; evaluates to the updated object.
    Install { target: Value, addition: Value },
    /// Sequencing with binding. `P; Q` is sugar for a `let` whose binder is
    /// unused in `Q`.
    Let {
        binder: Variable,
        bound: Box<Program>,
        body: Box<Program>,
    },
}

impl Program {
    pub fn val(v: Value) -> Self {
        Program::Val(v)
    }

    pub fn call(target: Value, method: &str, args: Vec<Value>) -> Self {
        Program::Call {
            target,
            method: Label::new(method),
            args,
        }
    }

    pub fn let_in(binder: &str, bound: Program, body: Program) -> Self {
        Program::Let {
            binder: Variable::new(binder),
            bound: Box::new(bound),
            body: Box::new(body),
        }
    }
}

/// Parallel substitution: maps variables to the values replacing them.
pub type Bindings = BTreeMap<Variable, Value>;

/// The object update `O + O'`: methods of the addition win on label clashes,
/// everything else is kept.
pub fn object_update(base: &Object, addition: &Object) -> Object {
    let mut methods = base.methods.clone();
    for (label, method) in &addition.methods {
        methods.insert(label.clone(), method.clone());
    }
    Object { methods }
}

/// Free variables of a program.
pub fn free_vars(p: &Program) -> BTreeSet<Variable> {
    let mut out = BTreeSet::new();
    collect_program(p, &mut Vec::new(), &mut out);
    out
}

/// Free variables of a value (non-trivial only for object literals).
pub fn value_free_vars(v: &Value) -> BTreeSet<Variable> {
    let mut out = BTreeSet::new();
    collect_value(v, &mut Vec::new(), &mut out);
    out
}

fn collect_program(p: &Program, bound: &mut Vec<Variable>, out: &mut BTreeSet<Variable>) {
    match p {
        Program::Val(v) => collect_value(v, bound, out),
        Program::Call { target, args, .. } => {
            collect_value(target, bound, out);
            for a in args {
                collect_value(a, bound, out);
            }
        }
        Program::Install { target, addition } => {
            collect_value(target, bound, out);
            collect_value(addition, bound, out);
        }
        Program::Let {
            binder,
            bound: b,
            body,
        } => {
            collect_program(b, bound, out);
            bound.push(binder.clone());
            collect_program(body, bound, out);
            bound.pop();
        }
    }
}

fn collect_value(v: &Value, bound: &mut Vec<Variable>, out: &mut BTreeSet<Variable>) {
    match v {
        Value::Builtin(_) | Value::Net | Value::Loc => {}
        Value::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        Value::Obj(o) => {
            for method in o.methods.values() {
                let depth = bound.len();
                bound.extend(method.params.iter().cloned());
                collect_program(&method.body, bound, out);
                bound.truncate(depth);
            }
        }
    }
}

/// Picks a variable not in `avoid`, derived from `base` by appending `#k`.
/// The `#` character is unlexable, so machine-chosen names can never collide
/// with source identifiers; scanning from `#0` keeps the choice a pure
/// function of the term rather than of allocation history.
pub(crate) fn fresh_variable(base: &Variable, avoid: &BTreeSet<Variable>) -> Variable {
    let stem = base.as_str().split('#').next().unwrap_or("x");
    let stem = if stem.is_empty() { "x" } else { stem };
    for k in 0u64.. {
        let candidate = Variable(format!("{stem}#{k}"));
        if !avoid.contains(&candidate) {
            return candidate;
        }
    }
    unreachable!("ran out of fresh variable names")
}

/// Capture-avoiding parallel substitution on programs. Binders are renamed
/// only when a substituted value would actually capture them.
pub fn substitute(p: &Program, bindings: &Bindings) -> Program {
    if bindings.is_empty() {
        return p.clone();
    }
    match p {
        Program::Val(v) => Program::Val(substitute_value(v, bindings)),
        Program::Call {
            target,
            method,
            args,
        } => Program::Call {
            target: substitute_value(target, bindings),
            method: method.clone(),
            args: args.iter().map(|a| substitute_value(a, bindings)).collect(),
        },
        Program::Install { target, addition } => Program::Install {
            target: substitute_value(target, bindings),
            addition: substitute_value(addition, bindings),
        },
        Program::Let {
            binder,
            bound,
            body,
        } => {
            let bound = Box::new(substitute(bound, bindings));
            let fv_body = free_vars(body);
            // The binder shadows; substituting for variables not free in the
            // body is a no-op and must not force renames.
            let inner: Bindings = bindings
                .iter()
                .filter(|(x, _)| *x != binder && fv_body.contains(*x))
                .map(|(x, v)| (x.clone(), v.clone()))
                .collect();
            if inner.is_empty() {
                return Program::Let {
                    binder: binder.clone(),
                    bound,
                    body: body.clone(),
                };
            }
            let incoming: BTreeSet<Variable> =
                inner.values().flat_map(value_free_vars).collect();
            if incoming.contains(binder) {
                let mut avoid = incoming;
                avoid.extend(fv_body);
                avoid.extend(inner.keys().cloned());
                avoid.insert(binder.clone());
                let renamed = fresh_variable(binder, &avoid);
                let rename: Bindings =
                    BTreeMap::from([(binder.clone(), Value::Var(renamed.clone()))]);
                let body = substitute(&substitute(body, &rename), &inner);
                Program::Let {
                    binder: renamed,
                    bound,
                    body: Box::new(body),
                }
            } else {
                Program::Let {
                    binder: binder.clone(),
                    bound,
                    body: Box::new(substitute(body, &inner)),
                }
            }
        }
    }
}

/// Capture-avoiding substitution on values; descends into object literal
/// method bodies, treating parameters as binders.
pub fn substitute_value(v: &Value, bindings: &Bindings) -> Value {
    match v {
        Value::Builtin(_) | Value::Net | Value::Loc => v.clone(),
        Value::Var(x) => match bindings.get(x) {
            Some(image) => image.clone(),
            None => v.clone(),
        },
        Value::Obj(o) => {
            let methods = o
                .methods
                .iter()
                .map(|(l, m)| (l.clone(), substitute_method(m, bindings)))
                .collect();
            Value::Obj(Object { methods })
        }
    }
}

fn substitute_method(m: &Method, bindings: &Bindings) -> Method {
    let fv_body = free_vars(&m.body);
    let inner: Bindings = bindings
        .iter()
        .filter(|(x, _)| !m.params.contains(x) && fv_body.contains(*x))
        .map(|(x, v)| (x.clone(), v.clone()))
        .collect();
    if inner.is_empty() {
        return m.clone();
    }
    let incoming: BTreeSet<Variable> = inner.values().flat_map(value_free_vars).collect();
    let captured: Vec<Variable> = m
        .params
        .iter()
        .filter(|p| incoming.contains(*p))
        .cloned()
        .collect();
    if captured.is_empty() {
        return Method {
            params: m.params.clone(),
            body: substitute(&m.body, &inner),
        };
    }
    let mut avoid = incoming;
    avoid.extend(fv_body);
    avoid.extend(inner.keys().cloned());
    avoid.extend(m.params.iter().cloned());
    let mut rename = Bindings::new();
    let mut params = Vec::with_capacity(m.params.len());
    for p in &m.params {
        if captured.contains(p) {
            let fresh = fresh_variable(p, &avoid);
            avoid.insert(fresh.clone());
            rename.insert(p.clone(), Value::Var(fresh.clone()));
            params.push(fresh);
        } else {
            params.push(p.clone());
        }
    }
    Method {
        params,
        body: substitute(&substitute(&m.body, &rename), &inner),
    }
}

/// Instantiates a method body: checks arity and substitutes arguments for
/// parameters in parallel.
pub fn instantiate(method: &Method, args: &[Value]) -> Option<Program> {
    if method.params.len() != args.len() {
        return None;
    }
    let bindings: Bindings = method
        .params
        .iter()
        .cloned()
        .zip(args.iter().cloned())
        .collect();
    Some(substitute(&method.body, &bindings))
}

// ---------------------------------------------------------------------------
// Alpha-equivalence and normalization
// ---------------------------------------------------------------------------

/// Structural equality up to consistent renaming of bound variables. Free
/// variables must match by name; numbers compare by bit pattern.
pub fn alpha_equal(a: &Program, b: &Program) -> bool {
    alpha_prog(a, b, &mut Vec::new(), &mut Vec::new())
}

fn lookup(stack: &[Variable], x: &Variable) -> Option<usize> {
    stack.iter().rposition(|v| v == x)
}

fn alpha_prog(
    a: &Program,
    b: &Program,
    la: &mut Vec<Variable>,
    lb: &mut Vec<Variable>,
) -> bool {
    match (a, b) {
        (Program::Val(va), Program::Val(vb)) => alpha_value(va, vb, la, lb),
        (
            Program::Call {
                target: ta,
                method: ma,
                args: aa,
            },
            Program::Call {
                target: tb,
                method: mb,
                args: ab,
            },
        ) => {
            ma == mb
                && aa.len() == ab.len()
                && alpha_value(ta, tb, la, lb)
                && aa.iter().zip(ab).all(|(x, y)| alpha_value(x, y, la, lb))
        }
        (
            Program::Install {
                target: ta,
                addition: xa,
            },
            Program::Install {
                target: tb,
                addition: xb,
            },
        ) => alpha_value(ta, tb, la, lb) && alpha_value(xa, xb, la, lb),
        (
            Program::Let {
                binder: ba,
                bound: pa,
                body: qa,
            },
            Program::Let {
                binder: bb,
                bound: pb,
                body: qb,
            },
        ) => {
            if !alpha_prog(pa, pb, la, lb) {
                return false;
            }
            la.push(ba.clone());
            lb.push(bb.clone());
            let ok = alpha_prog(qa, qb, la, lb);
            la.pop();
            lb.pop();
            ok
        }
        _ => false,
    }
}

fn alpha_value(a: &Value, b: &Value, la: &mut Vec<Variable>, lb: &mut Vec<Variable>) -> bool {
    match (a, b) {
        (Value::Builtin(x), Value::Builtin(y)) => x == y,
        (Value::Net, Value::Net) | (Value::Loc, Value::Loc) => true,
        (Value::Var(x), Value::Var(y)) => match (lookup(la, x), lookup(lb, y)) {
            (Some(i), Some(j)) => i == j,
            (None, None) => x == y,
            _ => false,
        },
        (Value::Obj(oa), Value::Obj(ob)) => {
            if oa.methods.len() != ob.methods.len() {
                return false;
            }
            oa.methods.iter().zip(&ob.methods).all(|((la_l, ma), (lb_l, mb))| {
                if la_l != lb_l || ma.params.len() != mb.params.len() {
                    return false;
                }
                let depth = la.len();
                la.extend(ma.params.iter().cloned());
                lb.extend(mb.params.iter().cloned());
                let ok = alpha_prog(&ma.body, &mb.body, la, lb);
                la.truncate(depth);
                lb.truncate(depth);
                ok
            })
        }
        _ => false,
    }
}

/// Renames every binder to a canonical `#b<k>` name in traversal order, so
/// alpha-equivalent programs become structurally identical. `#`-initial
/// names cannot be lexed and are never produced by [`fresh_variable`], so
/// the renaming cannot capture anything.
pub fn alpha_normalize(p: &Program) -> Program {
    let mut counter = 0u64;
    norm_prog(p, &mut Vec::new(), &mut counter)
}

fn canon(k: u64) -> Variable {
    Variable(format!("#b{k}"))
}

fn norm_prog(p: &Program, env: &mut Vec<(Variable, Variable)>, counter: &mut u64) -> Program {
    match p {
        Program::Val(v) => Program::Val(norm_value(v, env, counter)),
        Program::Call {
            target,
            method,
            args,
        } => Program::Call {
            target: norm_value(target, env, counter),
            method: method.clone(),
            args: args.iter().map(|a| norm_value(a, env, counter)).collect(),
        },
        Program::Install { target, addition } => Program::Install {
            target: norm_value(target, env, counter),
            addition: norm_value(addition, env, counter),
        },
        Program::Let {
            binder,
            bound,
            body,
        } => {
            let bound = Box::new(norm_prog(bound, env, counter));
            let fresh = canon(*counter);
            *counter += 1;
            env.push((binder.clone(), fresh.clone()));
            let body = Box::new(norm_prog(body, env, counter));
            env.pop();
            Program::Let {
                binder: fresh,
                bound,
                body,
            }
        }
    }
}

fn norm_value(v: &Value, env: &mut Vec<(Variable, Variable)>, counter: &mut u64) -> Value {
    match v {
        Value::Builtin(_) | Value::Net | Value::Loc => v.clone(),
        Value::Var(x) => match env.iter().rposition(|(orig, _)| orig == x) {
            Some(i) => Value::Var(env[i].1.clone()),
            None => v.clone(),
        },
        Value::Obj(o) => {
            let methods = o
                .methods
                .iter()
                .map(|(l, m)| {
                    let depth = env.len();
                    let mut params = Vec::with_capacity(m.params.len());
                    for p in &m.params {
                        let fresh = canon(*counter);
                        *counter += 1;
                        env.push((p.clone(), fresh.clone()));
                        params.push(fresh);
                    }
                    let body = norm_prog(&m.body, env, counter);
                    env.truncate(depth);
                    (l.clone(), Method { params, body })
                })
                .collect();
            Value::Obj(Object { methods })
        }
    }
}

// ---------------------------------------------------------------------------
// Printing (canonical single-line form; the parser reads this back)
// ---------------------------------------------------------------------------

impl fmt::Display for BuiltinValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinValue::Number(n) => write!(f, "{n}"),
            BuiltinValue::Symbol(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            BuiltinValue::Unit => f.write_str("()"),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Builtin(b) => write!(f, "{b}"),
            Value::Var(x) => write!(f, "{x}"),
            Value::Net => f.write_str("net"),
            Value::Loc => f.write_str("loc"),
            Value::Obj(o) => write!(f, "{o}"),
        }
    }
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.methods.is_empty() {
            return f.write_str("{}");
        }
        f.write_str("{")?;
        for (i, (label, method)) in self.methods.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{label} = (")?;
            for (j, p) in method.params.iter().enumerate() {
                if j > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{p}")?;
            }
            write!(f, ") {}", method.body)?;
        }
        f.write_str("}")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Val(v) => write!(f, "{v}"),
            Program::Call {
                target,
                method,
                args,
            } => {
                write!(f, "{target}.{method}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Program::Install { target, addition } => {
                write!(f, "install {target} {addition}")
            }
            Program::Let {
                binder,
                bound,
                body,
            } => {
                if free_vars(body).contains(binder) {
                    write!(f, "let {binder} = {bound} in {body}")
                } else if matches!(**bound, Program::Let { .. }) {
                    // `;` binds looser than `let ... in`, so a sequenced
                    // left-hand `let` needs parentheses to read back as the
                    // same tree.
                    write!(f, "({bound}); {body}")
                } else {
                    write!(f, "{bound}; {body}")
                }
            }
        }
    }
}
