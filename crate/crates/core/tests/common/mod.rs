#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use cdnfi_core::netlist::{FlipFlop, Gate, GateKind, Netlist};
use cdnfi_core::simulator::{GoldenTrace, Stimulus};
use cdnfi_core::{parse_netlist, Circuit};

pub fn circuits_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../circuits")
}

pub fn read(name: &str) -> String {
    fs::read_to_string(circuits_dir().join(name)).unwrap()
}

pub struct Bundled {
    pub netlist: Netlist,
    pub circuit: Circuit,
    pub stimulus: Stimulus,
    pub golden: GoldenTrace,
}

pub fn bundled(name: &str) -> Bundled {
    let netlist = parse_netlist(&read(&format!("{name}.json"))).unwrap();
    let circuit = Circuit::new(&netlist).unwrap();
    let stimulus = Stimulus::parse(&read(&format!("{name}.stim.json"))).unwrap();
    let golden = GoldenTrace::from_csv(&read(&format!("{name}.golden.csv"))).unwrap();
    Bundled {
        netlist,
        circuit,
        stimulus,
        golden,
    }
}

/// Brute-force reference simulator working on names only. Gates are
/// settled by repeated sweeps in document order until nothing changes, so it
/// shares no evaluation order with the levelized simulator.
pub struct RefSim<'a> {
    n: &'a Netlist,
    pub ffs: BTreeMap<String, bool>,
    pub nets: BTreeMap<String, bool>,
}

impl<'a> RefSim<'a> {
    pub fn new(n: &'a Netlist) -> Self {
        RefSim {
            n,
            ffs: n
                .flipflops
                .iter()
                .map(|f| (f.name.clone(), f.init))
                .collect(),
            nets: BTreeMap::new(),
        }
    }

    pub fn settle(&mut self, inputs: &BTreeMap<String, bool>) {
        self.nets.clear();
        for (k, v) in inputs {
            self.nets.insert(k.clone(), *v);
        }
        for f in &self.n.flipflops {
            self.nets.insert(f.q.clone(), self.ffs[&f.name]);
        }
        for g in &self.n.gates {
            self.nets.insert(g.output.clone(), false);
        }
        loop {
            let mut changed = false;
            for g in &self.n.gates {
                let args: Vec<bool> = g.inputs.iter().map(|a| self.nets[a]).collect();
                let v = g.kind.eval(&args);
                if self.nets[&g.output] != v {
                    self.nets.insert(g.output.clone(), v);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    pub fn edge(&mut self) {
        let next: Vec<(String, bool)> = self
            .n
            .flipflops
            .iter()
            .map(|f| {
                let enabled = f.enable.as_ref().is_none_or(|e| self.nets[e]);
                let v = if enabled {
                    self.nets[&f.d]
                } else {
                    self.ffs[&f.name]
                };
                (f.name.clone(), v)
            })
            .collect();
        self.ffs.extend(next);
    }

    pub fn sample(&self, monitors: &[String]) -> Vec<bool> {
        monitors.iter().map(|m| self.nets[m]).collect()
    }
}

/// Full trace with an optional bit flip of `ff` at the start of `cycle`.
pub fn ref_trace(n: &Netlist, st: &Stimulus, upset: Option<(&str, usize)>) -> Vec<Vec<bool>> {
    let mut sim = RefSim::new(n);
    let mut rows = Vec::new();
    for (cycle, inputs) in st.vectors.iter().enumerate() {
        sim.settle(inputs);
        if let Some((ff, at)) = upset {
            if at == cycle {
                let v = sim.ffs[ff];
                sim.ffs.insert(ff.to_string(), !v);
                sim.settle(inputs);
            }
        }
        sim.edge();
        sim.settle(inputs);
        rows.push(sim.sample(&st.monitors));
    }
    rows
}

/// CRC-8, polynomial 0x07, init 0, MSB first.
pub fn crc8(bytes: &[u8]) -> u8 {
    let mut crc = 0u8;
    for &b in bytes {
        crc ^= b;
        for _ in 0..8 {
            crc = if crc & 0x80 != 0 {
                (crc << 1) ^ 0x07
            } else {
                crc << 1
            };
        }
    }
    crc
}

/// Description of a random acyclic circuit, turned into a netlist by
/// [`RandomCircuit::build`]. Every gate only reads nets created before it.
#[derive(Debug, Clone)]
pub struct RandomCircuit {
    pub n_inputs: usize,
    pub ffs: Vec<(bool, bool)>,
    /// (kind index, three operand picks)
    pub gates: Vec<(usize, [usize; 3])>,
    /// Per flip-flop: D pick and optional enable pick.
    pub ff_wiring: Vec<(usize, Option<usize>)>,
    pub n_outputs: usize,
}

impl RandomCircuit {
    pub fn build(&self) -> Netlist {
        let mut nets: Vec<String> = Vec::new();
        let inputs: Vec<String> = (0..self.n_inputs).map(|i| format!("in{i}")).collect();
        nets.extend(inputs.iter().cloned());
        for i in 0..self.ffs.len() {
            nets.push(format!("blk{}.r{i}.q", i % 3));
        }
        let mut gates = Vec::new();
        for (gi, (k, picks)) in self.gates.iter().enumerate() {
            let kind = GateKind::ALL[k % GateKind::ALL.len()];
            let ins = (0..kind.arity())
                .map(|j| nets[picks[j] % nets.len()].clone())
                .collect();
            let out = format!("w{gi}");
            gates.push(Gate {
                id: format!("g{gi}"),
                kind,
                inputs: ins,
                output: out.clone(),
            });
            nets.push(out);
        }
        let flipflops = self
            .ffs
            .iter()
            .zip(&self.ff_wiring)
            .enumerate()
            .map(|(i, (&(init, _), &(d, en)))| FlipFlop {
                name: format!("blk{}.r{i}", i % 3),
                d: nets[d % nets.len()].clone(),
                q: format!("blk{}.r{i}.q", i % 3),
                enable: en.map(|e| nets[e % nets.len()].clone()),
                init,
            })
            .collect();
        let outputs: Vec<String> = (0..self.n_outputs)
            .map(|i| nets[nets.len() - 1 - i % nets.len()].clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        Netlist {
            name: "random".into(),
            inputs,
            outputs,
            gates,
            flipflops,
        }
    }
}

pub fn random_stimulus(
    n: &Netlist,
    bits: &[bool],
    n_cycles: usize,
    window: (usize, usize),
) -> Stimulus {
    let mut k = 0;
    let vectors = (0..n_cycles)
        .map(|_| {
            n.inputs
                .iter()
                .map(|p| {
                    let b = bits[k % bits.len().max(1)];
                    k += 1;
                    (p.clone(), b)
                })
                .collect()
        })
        .collect();
    Stimulus::new(n_cycles, window, n.outputs.clone(), vectors).unwrap()
}

pub mod strategies {
    use proptest::prelude::*;

    use super::RandomCircuit;

    pub fn random_circuit() -> impl Strategy<Value = RandomCircuit> {
        (1usize..4, 1usize..10, 0usize..16).prop_flat_map(|(n_inputs, n_ffs, n_gates)| {
            (
                Just(n_inputs),
                prop::collection::vec((any::<bool>(), any::<bool>()), n_ffs),
                prop::collection::vec((0usize..11, [0usize..64, 0usize..64, 0usize..64]), n_gates),
                prop::collection::vec((0usize..64, prop::option::weighted(0.3, 0usize..64)), n_ffs),
                1usize..4,
            )
                .prop_map(|(n_inputs, ffs, gates, ff_wiring, n_outputs)| {
                    RandomCircuit {
                        n_inputs,
                        ffs,
                        gates,
                        ff_wiring,
                        n_outputs,
                    }
                })
        })
    }
}
