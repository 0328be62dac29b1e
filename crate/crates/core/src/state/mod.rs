//! Values, valuations, declarations and the expression language.
//!
//! Every declared type has a finite carrier, so valuations, event alphabets and
//! condition equivalence can all be decided by enumeration.

mod expr;
mod subst;

pub use expr::{BinOp, EvalCtx, EventTerm, Expr};
pub use subst::Subst;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

/// A declared value type. All carriers are finite.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Bool,
    Int { lo: i64, hi: i64 },
    Seq { elem: Box<ValueType>, max_len: usize },
}

impl ValueType {
    pub fn int(lo: i64, hi: i64) -> Self {
        ValueType::Int { lo, hi }
    }

    pub fn seq(elem: ValueType, max_len: usize) -> Self {
        ValueType::Seq { elem: Box::new(elem), max_len }
    }

    /// Enumerates the carrier in canonical order.
    pub fn carrier(&self) -> Vec<Value> {
        match self {
            ValueType::Bool => vec![Value::Bool(false), Value::Bool(true)],
            ValueType::Int { lo, hi } => (*lo..=*hi).map(Value::Int).collect(),
            ValueType::Seq { elem, max_len } => {
                let elems = elem.carrier();
                let mut out = vec![Value::Seq(vec![])];
                let mut layer: Vec<Vec<Value>> = vec![vec![]];
                for _ in 0..*max_len {
                    let mut next = Vec::new();
                    for prefix in &layer {
                        for e in &elems {
                            let mut s = prefix.clone();
                            s.push(e.clone());
                            next.push(s);
                        }
                    }
                    out.extend(next.iter().cloned().map(Value::Seq));
                    layer = next;
                }
                out
            }
        }
    }

    pub fn carrier_size(&self) -> u128 {
        match self {
            ValueType::Bool => 2,
            ValueType::Int { lo, hi } => (hi - lo + 1).max(0) as u128,
            ValueType::Seq { elem, max_len } => {
                let n = elem.carrier_size();
                let mut total: u128 = 0;
                let mut layer: u128 = 1;
                for _ in 0..=*max_len {
                    total = total.saturating_add(layer);
                    layer = layer.saturating_mul(n);
                }
                total
            }
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (ValueType::Bool, Value::Bool(_)) => true,
            (ValueType::Int { lo, hi }, Value::Int(n)) => lo <= n && n <= hi,
            (ValueType::Seq { elem, max_len }, Value::Seq(xs)) => {
                xs.len() <= *max_len && xs.iter().all(|x| elem.contains(x))
            }
            _ => false,
        }
    }

    /// Saturates `v` into the carrier: integers clamp, sequences truncate.
    pub fn fit(&self, v: &Value) -> Value {
        match (self, v) {
            (ValueType::Bool, Value::Bool(b)) => Value::Bool(*b),
            (ValueType::Bool, Value::Int(n)) => Value::Bool(*n != 0),
            (ValueType::Int { lo, hi }, Value::Int(n)) => Value::Int((*n).clamp(*lo, *hi)),
            (ValueType::Int { lo, hi }, Value::Bool(b)) => Value::Int((*b as i64).clamp(*lo, *hi)),
            (ValueType::Seq { elem, max_len }, Value::Seq(xs)) => {
                Value::Seq(xs.iter().take(*max_len).map(|x| elem.fit(x)).collect())
            }
            _ => self.default_value(),
        }
    }

    pub fn default_value(&self) -> Value {
        match self {
            ValueType::Bool => Value::Bool(false),
            ValueType::Int { lo, hi } => Value::Int(0i64.clamp(*lo, *hi)),
            ValueType::Seq { .. } => Value::Seq(vec![]),
        }
    }

    /// True when every value of `self` is already a value of `other`.
    pub fn within(&self, other: &ValueType) -> bool {
        match (self, other) {
            (ValueType::Bool, ValueType::Bool) => true,
            (ValueType::Int { lo, hi }, ValueType::Int { lo: l2, hi: h2 }) => lo >= l2 && hi <= h2,
            (
                ValueType::Seq { elem, max_len },
                ValueType::Seq { elem: e2, max_len: m2 },
            ) => max_len <= m2 && elem.within(e2),
            _ => false,
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Bool => write!(f, "bool"),
            ValueType::Int { lo, hi } => write!(f, "int[{lo}..{hi}]"),
            ValueType::Seq { elem, max_len } => write!(f, "seq {elem} maxlen {max_len}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Seq(Vec<Value>),
}

impl Value {
    pub fn as_bool(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            Value::Int(n) => *n != 0,
            Value::Seq(xs) => !xs.is_empty(),
        }
    }

    pub fn as_int(&self) -> i64 {
        match self {
            Value::Int(n) => *n,
            Value::Bool(b) => *b as i64,
            Value::Seq(xs) => xs.len() as i64,
        }
    }

    pub fn as_seq(&self) -> &[Value] {
        match self {
            Value::Seq(xs) => xs,
            _ => &[],
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Seq(xs) if xs.is_empty() => write!(f, "<>"),
            Value::Seq(xs) => {
                write!(f, "<")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ">")
            }
        }
    }
}

/// A ground event `c` or `c.v`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub chan: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub data: Option<Value>,
}

impl Event {
    pub fn new(chan: impl Into<String>, data: Option<Value>) -> Self {
        Event { chan: chan.into(), data }
    }

    pub fn plain(chan: impl Into<String>) -> Self {
        Event::new(chan, None)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.data {
            None => write!(f, "{}", self.chan),
            Some(v) => write!(f, "{}.{}", self.chan, v),
        }
    }
}

pub type GroundTrace = Vec<Event>;
pub type AccSet = BTreeSet<Event>;

pub fn show_trace(t: &[Event]) -> String {
    let items: Vec<String> = t.iter().map(|e| e.to_string()).collect();
    format!("<{}>", items.join(", "))
}

pub fn show_events(a: &AccSet) -> String {
    let items: Vec<String> = a.iter().map(|e| e.to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

/// A total assignment of values to the declared state variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Valuation(pub BTreeMap<String, Value>);

impl Valuation {
    pub fn get(&self, x: &str) -> Option<&Value> {
        self.0.get(x)
    }

    pub fn set(&mut self, x: impl Into<String>, v: Value) {
        self.0.insert(x.into(), v);
    }

    pub fn with(mut self, x: impl Into<String>, v: Value) -> Self {
        self.set(x, v);
        self
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k} ↦ {v}")?;
        }
        write!(f, "}}")
    }
}

/// Declared channels and state variables.
///
/// A channel with `None` payload carries no data (`a`), otherwise its events
/// are `c.v` for every `v` in the payload carrier.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Env {
    pub vars: BTreeMap<String, ValueType>,
    pub chans: BTreeMap<String, Option<ValueType>>,
    #[serde(skip)]
    valuations: OnceLock<Vec<Valuation>>,
    #[serde(skip)]
    alphabet: OnceLock<Vec<Event>>,
}

impl PartialEq for Env {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars && self.chans == other.chans
    }
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn var(mut self, name: impl Into<String>, ty: ValueType) -> Self {
        self.add_var(name, ty);
        self
    }

    pub fn chan(mut self, name: impl Into<String>, ty: Option<ValueType>) -> Self {
        self.add_chan(name, ty);
        self
    }

    pub fn add_var(&mut self, name: impl Into<String>, ty: ValueType) {
        self.vars.insert(name.into(), ty);
        self.invalidate();
    }

    pub fn add_chan(&mut self, name: impl Into<String>, ty: Option<ValueType>) {
        self.chans.insert(name.into(), ty);
        self.invalidate();
    }

    fn invalidate(&mut self) {
        self.valuations = OnceLock::new();
        self.alphabet = OnceLock::new();
    }

    pub fn var_type(&self, x: &str) -> Option<&ValueType> {
        self.vars.get(x)
    }

    pub fn chan_type(&self, c: &str) -> Option<&Option<ValueType>> {
        self.chans.get(c)
    }

    pub fn state_space_size(&self) -> u128 {
        self.vars.values().fold(1u128, |acc, t| acc.saturating_mul(t.carrier_size()))
    }

    /// Every valuation of the declared variables, in canonical order.
    pub fn valuations(&self) -> &[Valuation] {
        self.valuations.get_or_init(|| {
            let mut out = vec![Valuation::default()];
            for (name, ty) in &self.vars {
                let carrier = ty.carrier();
                let mut next = Vec::with_capacity(out.len() * carrier.len());
                for s in &out {
                    for v in &carrier {
                        next.push(s.clone().with(name.clone(), v.clone()));
                    }
                }
                out = next;
            }
            out
        })
    }

    /// The default initial valuation (each variable at its type default).
    pub fn default_valuation(&self) -> Valuation {
        Valuation(
            self.vars
                .iter()
                .map(|(k, t)| (k.clone(), t.default_value()))
                .collect(),
        )
    }

    pub fn chan_events(&self, c: &str) -> Vec<Event> {
        match self.chans.get(c) {
            Some(None) => vec![Event::plain(c)],
            Some(Some(ty)) => ty
                .carrier()
                .into_iter()
                .map(|v| Event::new(c, Some(v)))
                .collect(),
            None => vec![],
        }
    }

    /// The finite event alphabet.
    pub fn alphabet(&self) -> &[Event] {
        self.alphabet.get_or_init(|| {
            let mut out = Vec::new();
            for c in self.chans.keys() {
                out.extend(self.chan_events(c));
            }
            out.sort();
            out
        })
    }

    /// Every trace over the alphabet of length at most `bound`, shortest first.
    pub fn traces_upto(&self, bound: usize) -> Vec<GroundTrace> {
        let alpha = self.alphabet();
        let mut out = vec![vec![]];
        let mut layer: Vec<GroundTrace> = vec![vec![]];
        for _ in 0..bound {
            let mut next = Vec::with_capacity(layer.len() * alpha.len());
            for t in &layer {
                for e in alpha {
                    let mut t2 = t.clone();
                    t2.push(e.clone());
                    next.push(t2);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    pub fn count_traces_upto(&self, bound: usize) -> u128 {
        let n = self.alphabet().len() as u128;
        let mut total = 0u128;
        let mut layer = 1u128;
        for _ in 0..=bound {
            total = total.saturating_add(layer);
            layer = layer.saturating_mul(n);
        }
        total
    }

    /// Fits a raw state into the declared carriers.
    pub fn fit_state(&self, s: &Valuation) -> Valuation {
        Valuation(
            self.vars
                .iter()
                .map(|(k, t)| {
                    let v = s.get(k).map(|v| t.fit(v)).unwrap_or_else(|| t.default_value());
                    (k.clone(), v)
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seq_carrier_enumerates_bounded_sequences() {
        let t = ValueType::seq(ValueType::int(0, 1), 2);
        let c = t.carrier();
        assert_eq!(c.len(), 7);
        assert_eq!(t.carrier_size(), 7);
        assert!(c.iter().all(|v| t.contains(v)));
        assert_eq!(c[0], Value::Seq(vec![]));
    }

    #[test]
    fn fit_saturates() {
        let t = ValueType::int(0, 3);
        assert_eq!(t.fit(&Value::Int(5)), Value::Int(3));
        assert_eq!(t.fit(&Value::Int(-2)), Value::Int(0));
        let s = ValueType::seq(ValueType::int(0, 1), 2);
        let v = Value::Seq(vec![Value::Int(1), Value::Int(0), Value::Int(1)]);
        assert_eq!(s.fit(&v), Value::Seq(vec![Value::Int(1), Value::Int(0)]));
    }

    #[test]
    fn env_valuations_and_alphabet() {
        let env = Env::new()
            .var("x", ValueType::int(0, 2))
            .var("b", ValueType::Bool)
            .chan("a", None)
            .chan("c", Some(ValueType::int(0, 1)));
        assert_eq!(env.valuations().len(), 6);
        assert_eq!(env.alphabet().len(), 3);
        assert_eq!(env.traces_upto(2).len(), 1 + 3 + 9);
        assert_eq!(env.count_traces_upto(2), 13);
    }
}
