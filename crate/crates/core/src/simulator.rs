//! Cycle-based two-valued simulation.
//!
//! A [`Circuit`] is the compiled, index-based form of a [`Netlist`]. One call
//! to [`Circuit::step_cycle`] applies the cycle's inputs, settles the
//! combinational logic, clocks every flip-flop at once and settles again, so
//! the returned state is always consistent with its flip-flop values and the
//! inputs of the cycle just completed. Monitored outputs are sampled from that
//! post-edge state.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{levelize, validate, GateKind, Netlist, NetlistError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("missing value for input \"{port}\" at cycle {cycle}")]
    MissingInput { cycle: usize, port: String },
    #[error("stimulus drives unknown input \"{0}\"")]
    UnknownInput(String),
    #[error("monitor \"{0}\" is not an output of the netlist")]
    UnknownMonitor(String),
    #[error("unknown flip-flop \"{0}\"")]
    UnknownFf(String),
    #[error("unknown net \"{0}\"")]
    UnknownNet(String),
    #[error("invalid stimulus: {0}")]
    BadStimulus(String),
    #[error("malformed trace: {0}")]
    BadTrace(String),
}

/// Circuit state between clock edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimState {
    pub cycle: usize,
    /// Flip-flop values in netlist order.
    pub ff_values: Vec<bool>,
    /// Net values indexed by [`Circuit::net_index`].
    pub net_values: Vec<bool>,
}

/// Input vectors, active window and monitored outputs for one testbench run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stimulus {
    pub n_cycles: usize,
    /// Inclusive `[first, last]` cycle range where faults may be injected.
    pub active_window: (usize, usize),
    pub monitors: Vec<String>,
    /// Fully expanded per-cycle input values, `n_cycles` long.
    pub vectors: Vec<BTreeMap<String, bool>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StimulusDoc {
    n_cycles: usize,
    active_window: [usize; 2],
    monitors: Vec<String>,
    /// Sparse map from cycle index to the ports that change at that cycle.
    #[serde(default)]
    vectors: BTreeMap<usize, BTreeMap<String, u8>>,
}

impl Stimulus {
    pub fn new(
        n_cycles: usize,
        active_window: (usize, usize),
        monitors: Vec<String>,
        vectors: Vec<BTreeMap<String, bool>>,
    ) -> Result<Self, SimError> {
        if n_cycles == 0 {
            return Err(SimError::BadStimulus("n_cycles must be positive".into()));
        }
        let (first, last) = active_window;
        if first > last || last >= n_cycles {
            return Err(SimError::BadStimulus(format!(
                "active window [{first}, {last}] outside [0, {}]",
                n_cycles - 1
            )));
        }
        if vectors.len() != n_cycles {
            return Err(SimError::BadStimulus(format!(
                "{} vectors for {n_cycles} cycles",
                vectors.len()
            )));
        }
        Ok(Stimulus {
            n_cycles,
            active_window,
            monitors,
            vectors,
        })
    }

    /// Parses the JSON stimulus document. A cycle missing from `vectors`
    /// inherits the previous cycle's values, and a listed cycle only needs
    /// the ports that change.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let doc: StimulusDoc = serde_json::from_str(text).map_err(|e| {
            SimError::BadStimulus(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        if let Some((&c, _)) = doc.vectors.range(doc.n_cycles..).next() {
            return Err(SimError::BadStimulus(format!(
                "vector for cycle {c} beyond n_cycles {}",
                doc.n_cycles
            )));
        }
        let mut vectors = Vec::with_capacity(doc.n_cycles);
        let mut current: BTreeMap<String, bool> = BTreeMap::new();
        for cycle in 0..doc.n_cycles {
            if let Some(changes) = doc.vectors.get(&cycle) {
                for (port, &bit) in changes {
                    if bit > 1 {
                        return Err(SimError::BadStimulus(format!(
                            "value {bit} for \"{port}\" at cycle {cycle} is not a bit"
                        )));
                    }
                    current.insert(port.clone(), bit == 1);
                }
            }
            vectors.push(current.clone());
        }
        Stimulus::new(
            doc.n_cycles,
            (doc.active_window[0], doc.active_window[1]),
            doc.monitors,
            vectors,
        )
    }

    /// Sparse JSON form; only cycles where some value changes are listed.
    pub fn to_json(&self) -> String {
        let mut sparse = BTreeMap::new();
        let mut prev: BTreeMap<String, bool> = BTreeMap::new();
        for (cycle, v) in self.vectors.iter().enumerate() {
            let diff: BTreeMap<String, u8> = v
                .iter()
                .filter(|(k, b)| prev.get(*k) != Some(b))
                .map(|(k, &b)| (k.clone(), b as u8))
                .collect();
            if !diff.is_empty() || cycle == 0 {
                sparse.insert(cycle, diff);
            }
            prev = v.clone();
        }
        let doc = StimulusDoc {
            n_cycles: self.n_cycles,
            active_window: [self.active_window.0, self.active_window.1],
            monitors: self.monitors.clone(),
            vectors: sparse,
        };
        serde_json::to_string_pretty(&doc).expect("stimulus serializes")
    }
}

/// Monitored output values for every cycle of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenTrace {
    pub monitors: Vec<String>,
    pub rows: Vec<Vec<bool>>,
}

impl GoldenTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.monitors.len()
    }

    /// CSV with a header of monitor names and one `0`/`1` row per cycle.
    pub fn to_csv(&self) -> String {
        let mut out = self.monitors.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, &b) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push(if b { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, SimError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let monitors: Vec<String> = reader
            .headers()
            .map_err(|e| SimError::BadTrace(e.to_string()))?
            .iter()
            .filter(|h| !h.is_empty())
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| SimError::BadTrace(e.to_string()))?;
            let row = record
                .iter()
                .map(|f| match f.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(SimError::BadTrace(format!(
                        "row {i}: \"{other}\" is not a bit"
                    ))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != monitors.len() {
                return Err(SimError::BadTrace(format!(
                    "row {i} has {} columns, expected {}",
                    row.len(),
                    monitors.len()
                )));
            }
            rows.push(row);
        }
        Ok(GoldenTrace { monitors, rows })
    }
}

#[derive(Debug, Clone)]
struct Op {
    kind: GateKind,
    inputs: [u32; 3],
    output: u32,
}

#[derive(Debug, Clone, Copy)]
struct FfPins {
    d: u32,
    q: u32,
    enable: Option<u32>,
}

/// A stimulus resolved against a specific circuit's port indices.
#[derive(Debug, Clone)]
pub struct BoundStimulus {
    pub n_cycles: usize,
    pub active_window: (usize, usize),
    /// Input bits per cycle in netlist input order.
    pub vectors: Vec<Vec<bool>>,
    /// Net index of each monitor.
    pub monitor_nets: Vec<usize>,
    pub monitors: Vec<String>,
}

/// Compiled, immutable simulation model of a netlist.
#[derive(Debug, Clone)]
pub struct Circuit {
    name: String,
    net_names: Vec<String>,
    net_index: HashMap<String, usize>,
    ops: Vec<Op>,
    ffs: Vec<FfPins>,
    ff_names: Vec<String>,
    ff_index: HashMap<String, usize>,
    ff_init: Vec<bool>,
    input_nets: Vec<usize>,
    input_index: HashMap<String, usize>,
    outputs: Vec<String>,
}

impl Circuit {
    pub fn new(n: &Netlist) -> Result<Self, SimError> {
        let violations = validate(n);
        if !violations.is_empty() {
            return Err(NetlistError::Invalid(violations).into());
        }
        let order = levelize(n)?;
        let net_names: Vec<String> = n.nets().into_iter().map(str::to_string).collect();
        let net_index: HashMap<String, usize> = net_names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let idx = |s: &str| net_index[s] as u32;
        let ops = order
            .iter()
            .map(|&g| {
                let gate = &n.gates[g];
                let mut inputs = [0u32; 3];
                for (slot, net) in inputs.iter_mut().zip(&gate.inputs) {
                    *slot = idx(net);
                }
                Op {
                    kind: gate.kind,
                    inputs,
                    output: idx(&gate.output),
                }
            })
            .collect();
        let ffs = n
            .flipflops
            .iter()
            .map(|f| FfPins {
                d: idx(&f.d),
                q: idx(&f.q),
                enable: f.enable.as_deref().map(idx),
            })
            .collect();
        Ok(Circuit {
            name: n.name.clone(),
            ops,
            ffs,
            ff_names: n.ff_names(),
            ff_index: n
                .flipflops
                .iter()
                .enumerate()
                .map(|(i, f)| (f.name.clone(), i))
                .collect(),
            ff_init: n.flipflops.iter().map(|f| f.init).collect(),
            input_nets: n.inputs.iter().map(|p| net_index[p.as_str()]).collect(),
            input_index: n
                .inputs
                .iter()
                .enumerate()
                .map(|(i, p)| (p.clone(), i))
                .collect(),
            outputs: n.outputs.clone(),
            net_names,
            net_index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ff_names(&self) -> &[String] {
        &self.ff_names
    }

    pub fn ff_count(&self) -> usize {
        self.ffs.len()
    }

    pub fn ff_index(&self, name: &str) -> Option<usize> {
        self.ff_index.get(name).copied()
    }

    pub fn net_index(&self, name: &str) -> Option<usize> {
        self.net_index.get(name).copied()
    }

    pub fn net_names(&self) -> &[String] {
        &self.net_names
    }

    pub fn input_names(&self) -> impl Iterator<Item = &str> {
        let mut names: Vec<(&String, &usize)> = self.input_index.iter().collect();
        names.sort_by_key(|(_, &i)| i);
        names.into_iter().map(|(s, _)| s.as_str())
    }

    pub fn ff_value(&self, s: &SimState, name: &str) -> Result<bool, SimError> {
        let i = self
            .ff_index(name)
            .ok_or_else(|| SimError::UnknownFf(name.to_string()))?;
        Ok(s.ff_values[i])
    }

    pub fn net_value(&self, s: &SimState, name: &str) -> Result<bool, SimError> {
        let i = self
            .net_index(name)
            .ok_or_else(|| SimError::UnknownNet(name.to_string()))?;
        Ok(s.net_values[i])
    }

    /// Cycle 0 with every flip-flop at its init value. Nets are not settled.
    pub fn reset(&self) -> SimState {
        SimState {
            cycle: 0,
            ff_values: self.ff_init.clone(),
            net_values: vec![false; self.net_names.len()],
        }
    }

    pub fn bind(&self, st: &Stimulus) -> Result<BoundStimulus, SimError> {
        for v in &st.vectors {
            if let Some(port) = v.keys().find(|p| !self.input_index.contains_key(*p)) {
                return Err(SimError::UnknownInput(port.clone()));
            }
        }
        let vectors = st
            .vectors
            .iter()
            .enumerate()
            .map(|(cycle, v)| {
                self.input_bits(v)
                    .map_err(|port| SimError::MissingInput { cycle, port })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let monitor_nets = st
            .monitors
            .iter()
            .map(|m| {
                if self.outputs.contains(m) {
                    Ok(self.net_index[m.as_str()])
                } else {
                    Err(SimError::UnknownMonitor(m.clone()))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BoundStimulus {
            n_cycles: st.n_cycles,
            active_window: st.active_window,
            vectors,
            monitor_nets,
            monitors: st.monitors.clone(),
        })
    }

    fn input_bits(&self, inputs: &BTreeMap<String, bool>) -> Result<Vec<bool>, String> {
        let mut bits = vec![false; self.input_nets.len()];
        for (port, &i) in &self.input_index {
            bits[i] = *inputs.get(port).ok_or_else(|| port.clone())?;
        }
        Ok(bits)
    }

    /// Drives the primary inputs. Does not settle.
    pub fn apply_inputs(&self, s: &mut SimState, inputs: &[bool]) {
        for (&net, &b) in self.input_nets.iter().zip(inputs) {
            s.net_values[net] = b;
        }
    }

    /// Propagates flip-flop outputs and primary inputs through the gates in
    /// levelized order.
    pub fn settle(&self, s: &mut SimState) {
        for (pins, &v) in self.ffs.iter().zip(&s.ff_values) {
            s.net_values[pins.q as usize] = v;
        }
        let nets = &mut s.net_values;
        for op in &self.ops {
            let [a, b, c] = op.inputs;
            let v = match op.kind {
                GateKind::And => nets[a as usize] & nets[b as usize],
                GateKind::Or => nets[a as usize] | nets[b as usize],
                GateKind::Not => !nets[a as usize],
                GateKind::Xor => nets[a as usize] ^ nets[b as usize],
                GateKind::Nand => !(nets[a as usize] & nets[b as usize]),
                GateKind::Nor => !(nets[a as usize] | nets[b as usize]),
                GateKind::Xnor => !(nets[a as usize] ^ nets[b as usize]),
                GateKind::Buf => nets[a as usize],
                GateKind::Mux2 => {
                    if nets[c as usize] {
                        nets[b as usize]
                    } else {
                        nets[a as usize]
                    }
                }
                GateKind::Const0 => false,
                GateKind::Const1 => true,
            };
            nets[op.output as usize] = v;
        }
    }

    /// Value a flip-flop would latch on a clock edge in the settled state `s`:
    /// D when enabled, its own Q otherwise.
    pub fn effective_d(&self, s: &SimState, ff: usize) -> bool {
        let pins = self.ffs[ff];
        match pins.enable {
            Some(en) if !s.net_values[en as usize] => s.ff_values[ff],
            _ => s.net_values[pins.d as usize],
        }
    }

    /// Clocks all flip-flops simultaneously from a settled state.
    pub fn clock_edge(&self, s: &mut SimState) {
        let next: Vec<bool> = (0..self.ffs.len())
            .map(|i| self.effective_d(s, i))
            .collect();
        s.ff_values = next;
    }

    /// Full cycle on pre-resolved input bits, in place.
    pub fn step_bits(&self, s: &mut SimState, inputs: &[bool]) {
        self.apply_inputs(s, inputs);
        self.settle(s);
        self.clock_edge(s);
        self.settle(s);
        s.cycle += 1;
    }

    /// One synchronous cycle: settle with `inputs`, clock every flip-flop
    /// and settle again.
    pub fn step_cycle(
        &self,
        s: &SimState,
        inputs: &BTreeMap<String, bool>,
    ) -> Result<SimState, SimError> {
        let bits = self
            .input_bits(inputs)
            .map_err(|port| SimError::MissingInput {
                cycle: s.cycle,
                port,
            })?;
        let mut next = s.clone();
        self.step_bits(&mut next, &bits);
        Ok(next)
    }

    pub fn sample(&self, s: &SimState, monitor_nets: &[usize]) -> Vec<bool> {
        monitor_nets.iter().map(|&n| s.net_values[n]).collect()
    }

    /// Runs the bound stimulus from `initial`. When `retain` is set the
    /// returned trajectory holds the state after every cycle.
    pub fn run_bound(
        &self,
        st: &BoundStimulus,
        initial: SimState,
        retain: bool,
    ) -> (GoldenTrace, Vec<SimState>) {
        let mut s = initial;
        let mut rows = Vec::with_capacity(st.n_cycles);
        let mut trajectory = Vec::new();
        for inputs in &st.vectors {
            self.step_bits(&mut s, inputs);
            rows.push(self.sample(&s, &st.monitor_nets));
            if retain {
                trajectory.push(s.clone());
            }
        }
        (
            GoldenTrace {
                monitors: st.monitors.clone(),
                rows,
            },
            trajectory,
        )
    }

    pub fn run(
        &self,
        st: &Stimulus,
        initial: SimState,
        retain: bool,
    ) -> Result<(GoldenTrace, Vec<SimState>), SimError> {
        let bound = self.bind(st)?;
        Ok(self.run_bound(&bound, initial, retain))
    }

    /// Settled state at the start of `cycle`: the state after `cycle` steps
    /// with that cycle's inputs applied and settled, before its clock edge.
    pub fn pre_edge_state(&self, st: &BoundStimulus, cycle: usize) -> SimState {
        let mut s = self.reset();
        for inputs in &st.vectors[..cycle] {
            self.step_bits(&mut s, inputs);
        }
        self.apply_inputs(&mut s, &st.vectors[cycle]);
        self.settle(&mut s);
        s
    }

    /// Human-readable dump of flip-flop values, for debugging.
    pub fn describe(&self, s: &SimState) -> String {
        let mut out = String::new();
        for (name, v) in self.ff_names.iter().zip(&s.ff_values) {
            let _ = writeln!(out, "{name}={}", *v as u8);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::NetlistBuilder;

    pub(crate) fn toggle() -> Netlist {
        let mut b = NetlistBuilder::new("toggle");
        let q = b.ff("t.ff", "d", None, false);
        b.gate_to(GateKind::Not, &[&q], "d");
        b.output(q);
        b.finish()
    }

    fn counter2() -> Netlist {
        let mut b = NetlistBuilder::new("counter2");
        b.gate_to(GateKind::Not, &["b0.q"], "d0");
        b.gate_to(GateKind::Xor, &["b1.q", "b0.q"], "d1");
        let q0 = b.ff("b0", "d0", None, false);
        let q1 = b.ff("b1", "d1", None, false);
        b.output(q0);
        b.output(q1);
        b.finish()
    }

    fn no_inputs(n: usize) -> Vec<BTreeMap<String, bool>> {
        vec![BTreeMap::new(); n]
    }

    #[test]
    fn reset_sets_init_values() {
        let c = Circuit::new(&toggle()).unwrap();
        let s = c.reset();
        assert_eq!(s.cycle, 0);
        assert_eq!(s.ff_values, vec![false]);

        let mut n = counter2();
        n.flipflops[0].init = true;
        let c = Circuit::new(&n).unwrap();
        assert_eq!(c.reset().ff_values, vec![true, false]);
    }

    #[test]
    fn toggle_alternates() {
        let c = Circuit::new(&toggle()).unwrap();
        let s0 = c.reset();
        let s1 = c.step_cycle(&s0, &BTreeMap::new()).unwrap();
        assert!(c.ff_value(&s1, "t.ff").unwrap());
        let s2 = c.step_cycle(&s1, &BTreeMap::new()).unwrap();
        assert!(!c.ff_value(&s2, "t.ff").unwrap());
        assert_eq!(s2.cycle, 2);
    }

    #[test]
    fn counter_counts() {
        let c = Circuit::new(&counter2()).unwrap();
        let mut s = c.reset();
        let mut seen = Vec::new();
        for _ in 0..4 {
            s = c.step_cycle(&s, &BTreeMap::new()).unwrap();
            seen.push((s.ff_values[1] as u8) << 1 | s.ff_values[0] as u8);
        }
        assert_eq!(seen, vec![1, 2, 3, 0]);
    }

    #[test]
    fn disabled_ff_holds() {
        let mut b = NetlistBuilder::new("hold");
        let en = b.input("en");
        let d = b.input("d");
        b.ff("r", &d, Some(&en), false);
        let c = Circuit::new(&b.finish()).unwrap();
        let inputs = BTreeMap::from([("en".to_string(), false), ("d".to_string(), true)]);
        let s = c.step_cycle(&c.reset(), &inputs).unwrap();
        assert_eq!(s.ff_values, vec![false]);
    }

    #[test]
    fn missing_input_is_an_error() {
        let mut b = NetlistBuilder::new("m");
        let a = b.input("a");
        b.ff("r", &a, None, false);
        let c = Circuit::new(&b.finish()).unwrap();
        assert!(matches!(
            c.step_cycle(&c.reset(), &BTreeMap::new()),
            Err(SimError::MissingInput { port, .. }) if port == "a"
        ));
    }

    #[test]
    fn passthrough_trace() {
        let mut b = NetlistBuilder::new("pass");
        let a = b.input("a");
        b.output(a);
        let c = Circuit::new(&b.finish()).unwrap();
        let vectors = [false, true, true, false]
            .iter()
            .map(|&v| BTreeMap::from([("a".to_string(), v)]))
            .collect();
        let st = Stimulus::new(4, (0, 3), vec!["a".into()], vectors).unwrap();
        let (trace, states) = c.run(&st, c.reset(), false).unwrap();
        assert!(states.is_empty());
        let col: Vec<bool> = trace.rows.iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![false, true, true, false]);
    }

    #[test]
    fn toggle_trace_samples_after_edge() {
        let c = Circuit::new(&toggle()).unwrap();
        let st = Stimulus::new(4, (0, 3), vec!["t.ff.q".into()], no_inputs(4)).unwrap();
        let (trace, states) = c.run(&st, c.reset(), true).unwrap();
        assert_eq!(states.len(), 4);
        let col: Vec<u8> = trace.rows.iter().map(|r| r[0] as u8).collect();
        assert_eq!(col, vec![1, 0, 1, 0]);
    }

    #[test]
    fn monitor_must_be_output() {
        let c = Circuit::new(&toggle()).unwrap();
        let st = Stimulus::new(2, (0, 1), vec!["d".into()], no_inputs(2)).unwrap();
        assert!(matches!(c.bind(&st), Err(SimError::UnknownMonitor(_))));
    }

    #[test]
    fn stimulus_inherits_vectors() {
        let text = r#"{"n_cycles": 4, "active_window": [1, 2], "monitors": [],
            "vectors": {"0": {"a": 0, "b": 1}, "2": {"a": 1}}}"#;
        let st = Stimulus::parse(text).unwrap();
        assert!(!st.vectors[1]["a"]);
        assert!(st.vectors[2]["a"]);
        assert!(st.vectors[3]["b"]);
        assert_eq!(Stimulus::parse(&st.to_json()).unwrap(), st);
    }

    #[test]
    fn stimulus_window_checked() {
        let text = r#"{"n_cycles": 4, "active_window": [2, 4], "monitors": []}"#;
        assert!(matches!(
            Stimulus::parse(text),
            Err(SimError::BadStimulus(_))
        ));
    }

    #[test]
    fn trace_csv_round_trip() {
        let t = GoldenTrace {
            monitors: vec!["a".into(), "b".into()],
            rows: vec![vec![true, false], vec![false, false]],
        };
        assert_eq!(t.to_csv(), "a,b\n1,0\n0,0\n");
        assert_eq!(GoldenTrace::from_csv(&t.to_csv()).unwrap(), t);
    }
}
