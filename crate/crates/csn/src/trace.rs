//! Run traces: one event per applied step, plus a log event every time a
//! logging builtin fires. Serialized as JSON lines with a stable field
//! order, so identical runs produce byte-identical trace files.

use std::io::{self, Write};

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::semantics::{StepDetail, StepRecord, StopReason};
use crate::syntax::{BuiltinValue, Value};
use crate::world::LogEntry;

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Step {
        step: u64,
        rule: &'static str,
        sensor: String,
        detail: StepDetail,
    },
    Log {
        step: u64,
        sensor: String,
        builtin: String,
        value: Value,
    },
}

impl TraceEvent {
    pub fn step(step: u64, record: &StepRecord) -> TraceEvent {
        TraceEvent::Step {
            step,
            rule: record.rule.as_str(),
            sensor: record.sensor.clone(),
            detail: record.detail.clone(),
        }
    }

    pub fn log(step: u64, sensor: &str, entry: &LogEntry) -> TraceEvent {
        TraceEvent::Log {
            step,
            sensor: sensor.to_string(),
            builtin: entry.builtin.as_str().to_string(),
            value: entry.value.clone(),
        }
    }

    /// The step index this event belongs to.
    pub fn at_step(&self) -> u64 {
        match self {
            TraceEvent::Step { step, .. } | TraceEvent::Log { step, .. } => *step,
        }
    }
}

/// A complete run trace with the reason the run stopped. Only the events
/// are serialized; the stop reason is reported out of band.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    pub stop: StopReason,
}

impl Trace {
    /// Renders the trace as JSON lines, one event per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&serde_json::to_string(event).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_jsonl().as_bytes())
    }
}

impl Serialize for TraceEvent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            TraceEvent::Step {
                step,
                rule,
                sensor,
                detail,
            } => {
                let mut s = serializer.serialize_struct("Step", 4)?;
                s.serialize_field("step", step)?;
                s.serialize_field("rule", rule)?;
                s.serialize_field("sensor", sensor)?;
                s.serialize_field("detail", &DetailJson(detail))?;
                s.end()
            }
            TraceEvent::Log {
                step,
                sensor,
                builtin,
                value,
            } => {
                let mut s = serializer.serialize_struct("Log", 4)?;
                s.serialize_field("step", step)?;
                s.serialize_field("sensor", sensor)?;
                s.serialize_field("builtin", builtin)?;
                s.serialize_field("value", &ValueJson(value))?;
                s.end()
            }
        }
    }
}

struct DetailJson<'a>(&'a StepDetail);

impl Serialize for DetailJson<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            StepDetail::Method { method, builtin } => {
                let n = if *builtin { 2 } else { 1 };
                let mut s = serializer.serialize_struct("Detail", n)?;
                s.serialize_field("method", method.as_str())?;
                if *builtin {
                    s.serialize_field("builtin", &true)?;
                }
                s.end()
            }
            StepDetail::Deliver { receiver, method } => {
                let mut s = serializer.serialize_struct("Detail", 2)?;
                s.serialize_field("receiver", receiver)?;
                s.serialize_field("method", method.as_str())?;
                s.end()
            }
            StepDetail::Release { method } => {
                let mut s = serializer.serialize_struct("Detail", 1)?;
                s.serialize_field("method", method.as_str())?;
                s.end()
            }
            StepDetail::Installed { labels } => {
                let mut s = serializer.serialize_struct("Detail", 1)?;
                let names: Vec<&str> = labels.iter().map(|l| l.as_str()).collect();
                s.serialize_field("labels", &names)?;
                s.end()
            }
            StepDetail::Let { binder } => {
                let mut s = serializer.serialize_struct("Detail", 1)?;
                s.serialize_field("binder", binder.as_str())?;
                s.end()
            }
            StepDetail::Switch | StepDetail::Complete => {
                let s = serializer.serialize_struct("Detail", 0)?;
                s.end()
            }
        }
    }
}

/// Logged values in JSON: numbers as numbers, symbols as strings, unit as
/// null; anything else falls back to its printed form.
struct ValueJson<'a>(&'a Value);

impl Serialize for ValueJson<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Value::Builtin(BuiltinValue::Number(n)) => serializer.serialize_f64(*n),
            Value::Builtin(BuiltinValue::Symbol(s)) => serializer.serialize_str(s),
            Value::Builtin(BuiltinValue::Unit) => serializer.serialize_none(),
            other => {
                let mut s = serializer.serialize_struct("Value", 1)?;
                s.serialize_field("object", &other.to_string())?;
                s.end()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::RuleName;
    use crate::syntax::Label;

    #[test]
    fn step_lines_have_fixed_field_order() {
        let record = StepRecord {
            rule: RuleName::MethodTop,
            sensor: "sink".into(),
            detail: StepDetail::Method {
                method: Label::new("log_mac"),
                builtin: true,
            },
            log: None,
        };
        let line = serde_json::to_string(&TraceEvent::step(3, &record)).unwrap();
        assert_eq!(
            line,
            r#"{"step":3,"rule":"method-top","sensor":"sink","detail":{"method":"log_mac","builtin":true}}"#
        );
    }

    #[test]
    fn log_lines_serialize_values() {
        let entry = LogEntry {
            step: 9,
            builtin: Label::new("log_mac"),
            value: Value::symbol("m1"),
        };
        let line = serde_json::to_string(&TraceEvent::log(9, "sink", &entry)).unwrap();
        assert_eq!(
            line,
            r#"{"step":9,"sensor":"sink","builtin":"log_mac","value":"m1"}"#
        );

        let number = LogEntry {
            step: 1,
            builtin: Label::new("log_field"),
            value: Value::number(25.0),
        };
        let line = serde_json::to_string(&TraceEvent::log(1, "s1", &number)).unwrap();
        assert_eq!(
            line,
            r#"{"step":1,"sensor":"s1","builtin":"log_field","value":25.0}"#
        );
    }

    #[test]
    fn jsonl_is_one_line_per_event() {
        let record = StepRecord {
            rule: RuleName::Switch,
            sensor: "a".into(),
            detail: StepDetail::Switch,
            log: None,
        };
        let trace = Trace {
            events: vec![TraceEvent::step(0, &record), TraceEvent::step(1, &record)],
            stop: StopReason::Quiescent,
        };
        let text = trace.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n'));
    }
}
