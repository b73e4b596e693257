//! Fault models.
//!
//! A single-event transient on a clock buffer is modelled as a spurious
//! clock pulse reaching every flip-flop in the buffer's cone: each of them
//! copies its data input to its output. A flip-flop whose input already
//! equals its output (or whose enable is low) is reached but keeps its
//! state. A single-event upset inverts one stored bit.
//!
//! Faults are applied to a settled pre-edge state, after which the
//! combinational logic is settled again so outputs reflect the fault within
//! the same cycle.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clocktree::{BufferId, ClockTree, ClockTreeError};
use crate::netlist::{Driver, Netlist};
use crate::simulator::{Circuit, SimState};

#[derive(Debug, Error)]
pub enum FaultError {
    #[error(transparent)]
    Tree(#[from] ClockTreeError),
    #[error("unknown flip-flop \"{0}\"")]
    UnknownFf(String),
    #[error("clock tree does not match the netlist: {0}")]
    TreeMismatch(String),
    #[error("malformed fault record: {0}")]
    BadRecord(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FaultKind {
    SetOnBuffer(BufferId),
    SeuOnFf(String),
}

/// One fault to inject: what and at which cycle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FaultRecord", into = "FaultRecord")]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub cycle: usize,
}

#[derive(Serialize, Deserialize)]
struct FaultRecord {
    kind: String,
    target: String,
    cycle: usize,
}

impl From<FaultSpec> for FaultRecord {
    fn from(f: FaultSpec) -> Self {
        FaultRecord {
            kind: f.kind_label().to_string(),
            target: f.target_label(),
            cycle: f.cycle,
        }
    }
}

impl TryFrom<FaultRecord> for FaultSpec {
    type Error = FaultError;

    fn try_from(r: FaultRecord) -> Result<Self, Self::Error> {
        let kind = match r.kind.as_str() {
            "set" => {
                let id = r
                    .target
                    .strip_prefix("buf")
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| FaultError::BadRecord(format!("bad buffer \"{}\"", r.target)))?;
                FaultKind::SetOnBuffer(BufferId(id))
            }
            "seu" => FaultKind::SeuOnFf(r.target),
            other => return Err(FaultError::BadRecord(format!("unknown kind \"{other}\""))),
        };
        Ok(FaultSpec {
            kind,
            cycle: r.cycle,
        })
    }
}

impl FaultSpec {
    pub fn kind_label(&self) -> &'static str {
        match self.kind {
            FaultKind::SetOnBuffer(_) => "set",
            FaultKind::SeuOnFf(_) => "seu",
        }
    }

    pub fn target_label(&self) -> String {
        match &self.kind {
            FaultKind::SetOnBuffer(b) => b.to_string(),
            FaultKind::SeuOnFf(ff) => ff.clone(),
        }
    }
}

impl fmt::Display for FaultSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}@{}",
            self.kind_label(),
            self.target_label(),
            self.cycle
        )
    }
}

/// Flip-flops touched by one injection, as circuit flip-flop indices in
/// netlist order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InjectionEffect {
    pub reached: Vec<usize>,
    pub changed: Vec<usize>,
    pub unchanged: Vec<usize>,
}

impl InjectionEffect {
    pub fn names<'a>(&self, circuit: &'a Circuit, set: &[usize]) -> Vec<&'a str> {
        set.iter()
            .map(|&i| circuit.ff_names()[i].as_str())
            .collect()
    }
}

/// A clock tree resolved to circuit flip-flop indices.
#[derive(Debug, Clone)]
pub struct BoundTree {
    cones: Vec<Vec<usize>>,
}

impl BoundTree {
    /// Maps every cone to circuit indices. The tree must cover exactly the
    /// circuit's flip-flops.
    pub fn new(circuit: &Circuit, tree: &ClockTree) -> Result<Self, FaultError> {
        if tree.ffs().len() != circuit.ff_count() {
            return Err(FaultError::TreeMismatch(format!(
                "tree has {} flip-flops, netlist has {}",
                tree.ffs().len(),
                circuit.ff_count()
            )));
        }
        let map = tree
            .ffs()
            .iter()
            .map(|name| {
                circuit.ff_index(name).ok_or_else(|| {
                    FaultError::TreeMismatch(format!("unknown flip-flop \"{name}\""))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let cones = tree
            .buffers()
            .iter()
            .map(|b| {
                let mut cone: Vec<usize> = b.cone.iter().map(|&i| map[i]).collect();
                cone.sort_unstable();
                cone
            })
            .collect();
        Ok(BoundTree { cones })
    }

    pub fn cone(&self, id: BufferId) -> Result<&[usize], FaultError> {
        self.cones
            .get(id.0)
            .map(Vec::as_slice)
            .ok_or(FaultError::Tree(ClockTreeError::UnknownBuffer(id)))
    }

    pub fn buffer_count(&self) -> usize {
        self.cones.len()
    }
}

/// Race-through on the given flip-flops, in place. `s` must be settled.
pub fn apply_set_cone(circuit: &Circuit, s: &mut SimState, cone: &[usize]) -> InjectionEffect {
    let latched: Vec<bool> = cone.iter().map(|&f| circuit.effective_d(s, f)).collect();
    let mut effect = InjectionEffect {
        reached: cone.to_vec(),
        ..InjectionEffect::default()
    };
    for (&f, v) in cone.iter().zip(latched) {
        if s.ff_values[f] != v {
            s.ff_values[f] = v;
            effect.changed.push(f);
        } else {
            effect.unchanged.push(f);
        }
    }
    circuit.settle(s);
    effect
}

/// Injects an SET into `buffer`: every flip-flop in its cone copies its
/// effective D input to Q.
pub fn apply_set(
    circuit: &Circuit,
    tree: &ClockTree,
    s: &SimState,
    buffer: BufferId,
) -> Result<(SimState, InjectionEffect), FaultError> {
    let bound = BoundTree::new(circuit, tree)?;
    let mut next = s.clone();
    let effect = apply_set_cone(circuit, &mut next, bound.cone(buffer)?);
    Ok((next, effect))
}

/// Flips one flip-flop by index, in place, and re-settles.
pub fn apply_seu_index(circuit: &Circuit, s: &mut SimState, ff: usize) -> InjectionEffect {
    s.ff_values[ff] = !s.ff_values[ff];
    circuit.settle(s);
    InjectionEffect {
        reached: vec![ff],
        changed: vec![ff],
        unchanged: Vec::new(),
    }
}

pub fn apply_seu(
    circuit: &Circuit,
    s: &SimState,
    ff: &str,
) -> Result<(SimState, InjectionEffect), FaultError> {
    let idx = circuit
        .ff_index(ff)
        .ok_or_else(|| FaultError::UnknownFf(ff.to_string()))?;
    let mut next = s.clone();
    let effect = apply_seu_index(circuit, &mut next, idx);
    Ok((next, effect))
}

/// Reference semantics for an SET, used to check [`apply_set`].
///
/// Works directly on the netlist by name: net values are recomputed by
/// memoized recursive evaluation rather than the compiled levelized model,
/// and the transient is a full extra clock edge delivered only to the
/// flip-flops of the buffer's cone. The state layout follows the
/// [`Circuit`] convention (flip-flops in netlist order, nets in sorted name
/// order).
pub fn explicit_pulse_oracle(
    n: &Netlist,
    tree: &ClockTree,
    s: &SimState,
    buffer: BufferId,
) -> Result<SimState, FaultError> {
    let cone: Vec<&str> = tree.cone(buffer)?;
    if let Some(missing) = cone.iter().find(|c| n.ff_index(c).is_none()) {
        return Err(FaultError::TreeMismatch(format!(
            "unknown flip-flop \"{missing}\""
        )));
    }
    let net_names: Vec<&str> = n.nets().into_iter().collect();
    let inputs: BTreeMap<&str, bool> = net_names
        .iter()
        .zip(&s.net_values)
        .filter(|(name, _)| n.inputs.iter().any(|p| p == *name))
        .map(|(&name, &v)| (name, v))
        .collect();
    let mut ffs: BTreeMap<&str, bool> = n
        .flipflops
        .iter()
        .zip(&s.ff_values)
        .map(|(f, &v)| (f.name.as_str(), v))
        .collect();

    let before = reference::evaluate(n, &ffs, &inputs);
    let mut latched = Vec::new();
    for ff in &n.flipflops {
        if !cone.contains(&ff.name.as_str()) {
            continue;
        }
        let clocked = ff.enable.as_ref().is_none_or(|en| before[en.as_str()]);
        if clocked {
            latched.push((ff.name.as_str(), before[ff.d.as_str()]));
        }
    }
    for (name, v) in latched {
        ffs.insert(name, v);
    }
    let after = reference::evaluate(n, &ffs, &inputs);
    Ok(SimState {
        cycle: s.cycle,
        ff_values: n.flipflops.iter().map(|f| ffs[f.name.as_str()]).collect(),
        net_values: net_names.iter().map(|name| after[*name]).collect(),
    })
}

mod reference {
    use super::*;

    /// Value of every net given flip-flop and input values.
    pub(super) fn evaluate<'a>(
        n: &'a Netlist,
        ffs: &BTreeMap<&str, bool>,
        inputs: &BTreeMap<&str, bool>,
    ) -> HashMap<&'a str, bool> {
        let drivers = n.drivers();
        let mut memo: HashMap<&'a str, bool> = HashMap::new();
        for net in n.nets() {
            value(n, &drivers, ffs, inputs, net, &mut memo);
        }
        memo
    }

    fn value<'a>(
        n: &'a Netlist,
        drivers: &HashMap<&'a str, Driver>,
        ffs: &BTreeMap<&str, bool>,
        inputs: &BTreeMap<&str, bool>,
        net: &'a str,
        memo: &mut HashMap<&'a str, bool>,
    ) -> bool {
        if let Some(&v) = memo.get(net) {
            return v;
        }
        let v = match drivers.get(net) {
            Some(Driver::Input(_)) => inputs[net],
            Some(Driver::FlipFlop(i)) => ffs[n.flipflops[*i].name.as_str()],
            Some(Driver::Gate(i)) => {
                let g = &n.gates[*i];
                let args: Vec<bool> = g
                    .inputs
                    .iter()
                    .map(|a| value(n, drivers, ffs, inputs, a.as_str(), memo))
                    .collect();
                g.kind.eval(&args)
            }
            None => false,
        };
        memo.insert(net, v);
        v
    }
}
