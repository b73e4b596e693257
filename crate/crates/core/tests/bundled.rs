mod common;

use std::collections::BTreeSet;

use cdnfi_core::{levelize, Circuit, GoldenTrace};
use common::{bundled, crc8, read, ref_trace};
use serde_json::Value;

const ALL: [&str; 4] = ["crc8_pipeline", "toggle", "counter2", "wide1233"];

const PACKETS: [&[u8]; 3] = [
    &[0x31, 0x32, 0x33, 0x34, 0x35, 0x36],
    &[0xde, 0xad, 0xbe, 0xef, 0x00, 0xff, 0x5a, 0xa5],
    &[0x01, 0x80, 0x7e, 0x42, 0x99],
];

fn byte_at(trace: &GoldenTrace, row: usize, prefix: &str) -> u8 {
    (0..8).fold(0u8, |acc, i| {
        let col = trace
            .monitors
            .iter()
            .position(|m| *m == format!("{prefix}{i}"))
            .unwrap();
        acc | (trace.rows[row][col] as u8) << i
    })
}

#[test]
fn crc8_reference_check_value() {
    assert_eq!(crc8(b"123456789"), 0xf4);
}

#[test]
fn manifests_match_netlists() {
    for name in ALL {
        let b = bundled(name);
        let m: Value = serde_json::from_str(&read(&format!("{name}.manifest.json"))).unwrap();
        let n = &b.netlist;
        assert_eq!(m["name"], n.name.as_str());
        assert_eq!(m["ff_count"], n.flipflops.len());
        assert_eq!(m["gate_count"], n.gates.len());
        assert_eq!(m["net_count"], n.nets().len());
        assert_eq!(m["input_count"], n.inputs.len());
        assert_eq!(m["output_count"], n.outputs.len());
        for f in &n.flipflops {
            assert_eq!(m["ff_init"][&f.name], f.init as u8, "{}", f.name);
        }
    }
    assert_eq!(bundled("wide1233").netlist.flipflops.len(), 1233);
}

#[test]
fn levelized_order_respects_dependencies() {
    for name in ALL {
        let n = bundled(name).netlist;
        let order = levelize(&n).unwrap();
        assert_eq!(
            order.iter().copied().collect::<BTreeSet<_>>().len(),
            n.gates.len()
        );
        let mut known: BTreeSet<&str> = n.inputs.iter().map(String::as_str).collect();
        known.extend(n.flipflops.iter().map(|f| f.q.as_str()));
        for &g in &order {
            let gate = &n.gates[g];
            for i in &gate.inputs {
                assert!(
                    known.contains(i.as_str()),
                    "{name}: {} read before driven",
                    i
                );
            }
            known.insert(&gate.output);
        }
    }
}

#[test]
fn golden_files_match_both_simulators() {
    for name in ALL {
        let b = bundled(name);
        let (trace, _) = b
            .circuit
            .run(&b.stimulus, b.circuit.reset(), false)
            .unwrap();
        assert_eq!(trace, b.golden, "{name}");
        assert_eq!(
            ref_trace(&b.netlist, &b.stimulus, None),
            b.golden.rows,
            "{name}"
        );
    }
}

#[test]
fn crc8_pipeline_computes_packet_crcs() {
    let b = bundled("crc8_pipeline");
    let g = &b.golden;
    let mut cycle = 3;
    for packet in PACKETS {
        for (k, &byte) in packet.iter().enumerate() {
            assert_eq!(byte_at(g, cycle + k + 2, "rx_data_"), byte);
        }
        let last = cycle + packet.len() - 1;
        let want = crc8(packet);
        assert_eq!(
            byte_at(g, last + 1, "tx_crc_"),
            want,
            "tx crc of {packet:02x?}"
        );
        assert_eq!(
            byte_at(g, last + 2, "rx_crc_"),
            want,
            "rx crc of {packet:02x?}"
        );
        // Held by the enable through the idle gap.
        assert_eq!(byte_at(g, last + 4, "rx_crc_"), want);
        cycle = last + 3;
    }
    assert_eq!(b.stimulus.active_window, (3, 27));
    assert_eq!(b.stimulus.n_cycles, 36);
}

#[test]
fn flip_flop_declaration_order_does_not_matter() {
    for name in ALL {
        let b = bundled(name);
        let mut n = b.netlist.clone();
        n.flipflops.reverse();
        let c = Circuit::new(&n).unwrap();
        let (trace, _) = c.run(&b.stimulus, c.reset(), false).unwrap();
        assert_eq!(trace, b.golden, "{name}");
    }
}
