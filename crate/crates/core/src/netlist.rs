//! Structural netlist model: gates, flip-flops, nets and ports.
//!
//! The on-disk form is a JSON document:
//!
//! ```json
//! {
//!   "name": "toggle",
//!   "inputs": [], "outputs": ["q"],
//!   "gates": [{"id": "inv", "kind": "NOT", "in": ["q"], "out": "d"}],
//!   "ffs": [{"name": "t.ff", "d": "d", "q": "q", "init": 0}]
//! }
//! ```
//!
//! There is no clock net. All flip-flops belong to a single implicit clock
//! domain whose distribution network is synthesized separately.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetlistError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown gate kind \"{kind}\" on gate \"{gate}\"")]
    UnknownGateKind { gate: String, kind: String },
    #[error("invalid init value {value} on flip-flop \"{ff}\" (expected 0 or 1)")]
    BadInit { ff: String, value: u64 },
    #[error("invalid netlist: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("combinational cycle through gates {0:?}")]
    CombinationalCycle(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Or,
    Not,
    Xor,
    Nand,
    Nor,
    Xnor,
    Buf,
    Mux2,
    Const0,
    Const1,
}

impl GateKind {
    pub const ALL: [GateKind; 11] = [
        GateKind::And,
        GateKind::Or,
        GateKind::Not,
        GateKind::Xor,
        GateKind::Nand,
        GateKind::Nor,
        GateKind::Xnor,
        GateKind::Buf,
        GateKind::Mux2,
        GateKind::Const0,
        GateKind::Const1,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Const0 | GateKind::Const1 => 0,
            GateKind::Not | GateKind::Buf => 1,
            GateKind::Mux2 => 3,
            _ => 2,
        }
    }

    /// Evaluates the gate function. `MUX2` inputs are `[a, b, sel]` and
    /// select `b` when `sel` is 1.
    pub fn eval(self, inputs: &[bool]) -> bool {
        match self {
            GateKind::And => inputs[0] & inputs[1],
            GateKind::Or => inputs[0] | inputs[1],
            GateKind::Not => !inputs[0],
            GateKind::Xor => inputs[0] ^ inputs[1],
            GateKind::Nand => !(inputs[0] & inputs[1]),
            GateKind::Nor => !(inputs[0] | inputs[1]),
            GateKind::Xnor => !(inputs[0] ^ inputs[1]),
            GateKind::Buf => inputs[0],
            GateKind::Mux2 => {
                if inputs[2] {
                    inputs[1]
                } else {
                    inputs[0]
                }
            }
            GateKind::Const0 => false,
            GateKind::Const1 => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Not => "NOT",
            GateKind::Xor => "XOR",
            GateKind::Nand => "NAND",
            GateKind::Nor => "NOR",
            GateKind::Xnor => "XNOR",
            GateKind::Buf => "BUF",
            GateKind::Mux2 => "MUX2",
            GateKind::Const0 => "CONST0",
            GateKind::Const1 => "CONST1",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GateKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub id: String,
    pub kind: GateKind,
    pub inputs: Vec<String>,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipFlop {
    /// Hierarchical, dot-separated name.
    pub name: String,
    pub d: String,
    pub q: String,
    /// When present, the next state is `enable ? d : q`.
    pub enable: Option<String>,
    pub init: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Netlist {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub gates: Vec<Gate>,
    pub flipflops: Vec<FlipFlop>,
}

/// A single broken netlist invariant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    MultipleDrivers(String),
    UndrivenNet(String),
    DuplicateName(String),
    ArityMismatch {
        gate: String,
        kind: GateKind,
        found: usize,
    },
    UndrivenOutput(String),
    /// Gate ids on a combinational loop, in traversal order.
    CombinationalCycle(Vec<String>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MultipleDrivers(n) => write!(f, "net \"{n}\" has multiple drivers"),
            Violation::UndrivenNet(n) => write!(f, "undriven net \"{n}\""),
            Violation::DuplicateName(n) => write!(f, "duplicate name \"{n}\""),
            Violation::ArityMismatch { gate, kind, found } => write!(
                f,
                "gate \"{gate}\" of kind {kind} expects {} inputs, found {found}",
                kind.arity()
            ),
            Violation::UndrivenOutput(n) => write!(f, "output port \"{n}\" is undriven"),
            Violation::CombinationalCycle(g) => {
                write!(f, "combinational cycle through gates [{}]", g.join(", "))
            }
        }
    }
}

/// Who drives a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Input(usize),
    Gate(usize),
    FlipFlop(usize),
}

impl Netlist {
    /// All nets mentioned by the netlist, sorted.
    pub fn nets(&self) -> BTreeSet<&str> {
        let mut nets = BTreeSet::new();
        nets.extend(self.inputs.iter().map(String::as_str));
        nets.extend(self.outputs.iter().map(String::as_str));
        for g in &self.gates {
            nets.insert(g.output.as_str());
            nets.extend(g.inputs.iter().map(String::as_str));
        }
        for ff in &self.flipflops {
            nets.insert(ff.d.as_str());
            nets.insert(ff.q.as_str());
            if let Some(en) = &ff.enable {
                nets.insert(en.as_str());
            }
        }
        nets
    }

    pub fn ff_names(&self) -> Vec<String> {
        self.flipflops.iter().map(|f| f.name.clone()).collect()
    }

    pub fn ff_index(&self, name: &str) -> Option<usize> {
        self.flipflops.iter().position(|f| f.name == name)
    }

    /// Driver map for every driven net. Nets with several drivers keep the first.
    pub fn drivers(&self) -> HashMap<&str, Driver> {
        let mut map = HashMap::new();
        for (i, p) in self.inputs.iter().enumerate() {
            map.entry(p.as_str()).or_insert(Driver::Input(i));
        }
        for (i, g) in self.gates.iter().enumerate() {
            map.entry(g.output.as_str()).or_insert(Driver::Gate(i));
        }
        for (i, ff) in self.flipflops.iter().enumerate() {
            map.entry(ff.q.as_str()).or_insert(Driver::FlipFlop(i));
        }
        map
    }

    /// Serializes to the JSON document form.
    pub fn to_json(&self) -> String {
        let doc = NetlistDoc::from(self);
        serde_json::to_string_pretty(&doc).expect("netlist document serializes")
    }
}

/// Parses and validates a netlist document.
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let doc: NetlistDoc = serde_json::from_str(text).map_err(|e| NetlistError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let netlist = doc.into_netlist()?;
    let violations = validate(&netlist);
    if violations.is_empty() {
        Ok(netlist)
    } else {
        Err(NetlistError::Invalid(violations))
    }
}

/// Checks every structural invariant. An empty result means the netlist is
/// simulatable.
pub fn validate(n: &Netlist) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    for name in n
        .gates
        .iter()
        .map(|g| g.id.as_str())
        .chain(n.flipflops.iter().map(|f| f.name.as_str()))
    {
        if !seen.insert(name) {
            out.push(Violation::DuplicateName(name.to_string()));
        }
    }
    for ports in [&n.inputs, &n.outputs] {
        let mut seen = BTreeSet::new();
        for p in ports {
            if !seen.insert(p.as_str()) {
                out.push(Violation::DuplicateName(p.clone()));
            }
        }
    }

    let mut driver_count: BTreeMap<&str, usize> = BTreeMap::new();
    for net in n
        .inputs
        .iter()
        .chain(n.gates.iter().map(|g| &g.output))
        .chain(n.flipflops.iter().map(|f| &f.q))
    {
        *driver_count.entry(net.as_str()).or_default() += 1;
    }
    for (net, count) in &driver_count {
        if *count > 1 {
            out.push(Violation::MultipleDrivers(net.to_string()));
        }
    }

    for g in &n.gates {
        if g.inputs.len() != g.kind.arity() {
            out.push(Violation::ArityMismatch {
                gate: g.id.clone(),
                kind: g.kind,
                found: g.inputs.len(),
            });
        }
    }

    let mut undriven = BTreeSet::new();
    let mut check = |net: &String| {
        if !driver_count.contains_key(net.as_str()) {
            undriven.insert(net.clone());
        }
    };
    for g in &n.gates {
        g.inputs.iter().for_each(&mut check);
    }
    for ff in &n.flipflops {
        check(&ff.d);
        if let Some(en) = &ff.enable {
            check(en);
        }
    }
    out.extend(undriven.into_iter().map(Violation::UndrivenNet));
    for p in &n.outputs {
        if !driver_count.contains_key(p.as_str()) {
            out.push(Violation::UndrivenOutput(p.clone()));
        }
    }

    if let Err(cycle) = topo_order(n) {
        out.push(Violation::CombinationalCycle(cycle));
    }
    out
}

/// Orders gate indices so that every gate follows the gates driving its
/// inputs. Primary inputs and flip-flop outputs are sources.
pub fn levelize(n: &Netlist) -> Result<Vec<usize>, NetlistError> {
    topo_order(n).map_err(NetlistError::CombinationalCycle)
}

/// Kahn's algorithm over the gate graph. On failure returns the gate ids of
/// one cycle.
fn topo_order(n: &Netlist) -> Result<Vec<usize>, Vec<String>> {
    let mut gate_driver: HashMap<&str, usize> = HashMap::new();
    for (i, g) in n.gates.iter().enumerate() {
        gate_driver.entry(g.output.as_str()).or_insert(i);
    }
    let mut fanin: Vec<Vec<usize>> = Vec::with_capacity(n.gates.len());
    let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); n.gates.len()];
    for (i, g) in n.gates.iter().enumerate() {
        let preds: Vec<usize> = g
            .inputs
            .iter()
            .filter_map(|net| gate_driver.get(net.as_str()).copied())
            .collect();
        for &p in &preds {
            fanout[p].push(i);
        }
        fanin.push(preds);
    }
    let mut pending: Vec<usize> = fanin.iter().map(Vec::len).collect();
    let mut ready: Vec<usize> = (0..n.gates.len()).filter(|&i| pending[i] == 0).collect();
    ready.reverse();
    let mut order = Vec::with_capacity(n.gates.len());
    while let Some(g) = ready.pop() {
        order.push(g);
        for &succ in fanout[g].iter().rev() {
            pending[succ] -= 1;
            if pending[succ] == 0 {
                ready.push(succ);
            }
        }
    }
    if order.len() == n.gates.len() {
        return Ok(order);
    }

    // Walk predecessors among the unresolved gates until one repeats.
    let start = (0..n.gates.len()).find(|&i| pending[i] > 0).unwrap();
    let mut path = vec![start];
    let mut pos: HashMap<usize, usize> = HashMap::from([(start, 0)]);
    let mut cur = start;
    loop {
        let next = *fanin[cur]
            .iter()
            .find(|&&p| pending[p] > 0)
            .expect("unresolved gate has an unresolved predecessor");
        if let Some(&at) = pos.get(&next) {
            return Err(path[at..].iter().map(|&i| n.gates[i].id.clone()).collect());
        }
        pos.insert(next, path.len());
        path.push(next);
        cur = next;
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateDoc {
    id: String,
    kind: String,
    #[serde(rename = "in")]
    inputs: Vec<String>,
    out: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FfDoc {
    name: String,
    d: String,
    q: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    en: Option<String>,
    init: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetlistDoc {
    name: String,
    #[serde(default)]
    inputs: Vec<String>,
    #[serde(default)]
    outputs: Vec<String>,
    #[serde(default)]
    gates: Vec<GateDoc>,
    #[serde(default)]
    ffs: Vec<FfDoc>,
}

impl NetlistDoc {
    fn into_netlist(self) -> Result<Netlist, NetlistError> {
        let gates = self
            .gates
            .into_iter()
            .map(|g| {
                let kind = g
                    .kind
                    .parse()
                    .map_err(|kind| NetlistError::UnknownGateKind {
                        gate: g.id.clone(),
                        kind,
                    })?;
                Ok(Gate {
                    id: g.id,
                    kind,
                    inputs: g.inputs,
                    output: g.out,
                })
            })
            .collect::<Result<Vec<_>, NetlistError>>()?;
        let flipflops = self
            .ffs
            .into_iter()
            .map(|f| {
                let init = match f.init {
                    0 => false,
                    1 => true,
                    value => return Err(NetlistError::BadInit { ff: f.name, value }),
                };
                Ok(FlipFlop {
                    name: f.name,
                    d: f.d,
                    q: f.q,
                    enable: f.en,
                    init,
                })
            })
            .collect::<Result<Vec<_>, NetlistError>>()?;
        Ok(Netlist {
            name: self.name,
            inputs: self.inputs,
            outputs: self.outputs,
            gates,
            flipflops,
        })
    }
}

impl From<&Netlist> for NetlistDoc {
    fn from(n: &Netlist) -> Self {
        NetlistDoc {
            name: n.name.clone(),
            inputs: n.inputs.clone(),
            outputs: n.outputs.clone(),
            gates: n
                .gates
                .iter()
                .map(|g| GateDoc {
                    id: g.id.clone(),
                    kind: g.kind.to_string(),
                    inputs: g.inputs.clone(),
                    out: g.output.clone(),
                })
                .collect(),
            ffs: n
                .flipflops
                .iter()
                .map(|f| FfDoc {
                    name: f.name.clone(),
                    d: f.d.clone(),
                    q: f.q.clone(),
                    en: f.enable.clone(),
                    init: f.init as u64,
                })
                .collect(),
        }
    }
}

/// Incremental netlist construction, mostly for generated circuits and tests.
#[derive(Debug, Default)]
pub struct NetlistBuilder {
    netlist: Netlist,
    counter: usize,
}

impl NetlistBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        NetlistBuilder {
            netlist: Netlist {
                name: name.into(),
                ..Netlist::default()
            },
            counter: 0,
        }
    }

    pub fn input(&mut self, name: impl Into<String>) -> String {
        let name = name.into();
        self.netlist.inputs.push(name.clone());
        name
    }

    pub fn output(&mut self, net: impl Into<String>) {
        self.netlist.outputs.push(net.into());
    }

    /// Adds a gate driving a freshly named net and returns that net.
    pub fn gate(&mut self, kind: GateKind, inputs: &[&str]) -> String {
        let out = format!("n{}", self.counter);
        self.gate_to(kind, inputs, out.clone());
        out
    }

    pub fn gate_to(&mut self, kind: GateKind, inputs: &[&str], out: impl Into<String>) {
        let id = format!("g{}", self.counter);
        self.counter += 1;
        self.netlist.gates.push(Gate {
            id,
            kind,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            output: out.into(),
        });
    }

    /// Adds a flip-flop whose Q net is named after the flip-flop.
    pub fn ff(&mut self, name: &str, d: &str, enable: Option<&str>, init: bool) -> String {
        let q = format!("{name}.q");
        self.netlist.flipflops.push(FlipFlop {
            name: name.to_string(),
            d: d.to_string(),
            q: q.clone(),
            enable: enable.map(str::to_string),
            init,
        });
        q
    }

    /// Mutable access to the flip-flop list, for closing feedback loops
    /// after the D logic has been built.
    pub fn flipflops_mut(&mut self) -> &mut Vec<FlipFlop> {
        &mut self.netlist.flipflops
    }

    pub fn finish(self) -> Netlist {
        self.netlist
    }
}
