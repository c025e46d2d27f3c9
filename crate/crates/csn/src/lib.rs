//! A small calculus for programmable wireless sensor networks.
//!
//! The crate is organized in layers. [`syntax`] defines programs, values and
//! objects together with substitution and the object-update operator.
//! [`parser`] maps the concrete `.csn` syntax onto that AST and back.
//! [`types`] implements the static discipline that makes networks safe to
//! run, [`world`] the physical side (positions, ranges, energy, scalar
//! fields, builtins), and [`semantics`] the small-step reduction engine with
//! its bounded state-space explorer. [`schedule`] provides the pluggable
//! scheduling policies, [`trace`] the JSONL event log, and [`generator`]
//! seeded random generation of well-typed networks for property testing.

pub mod generator;
pub mod parser;
pub mod schedule;
pub mod semantics;
pub mod syntax;
pub mod trace;
pub mod types;
pub mod world;
