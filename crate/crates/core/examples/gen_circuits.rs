//! Regenerates the bundled circuits under `circuits/`.
//!
//! ```text
//! cargo run -p cdnfi-core --example gen_circuits -- circuits
//! ```
//!
//! Writes, per circuit, `<name>.json` (netlist), `<name>.manifest.json`
//! (element counts and init values) and, where a testbench exists,
//! `<name>.stim.json` plus the golden trace `<name>.golden.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cdnfi_core::netlist::{GateKind, Netlist, NetlistBuilder};
use cdnfi_core::simulator::{Circuit, Stimulus};
use serde_json::json;

/// One CRC-8 (poly 0x07) byte update built from XOR gates. Returns the
/// eight next-state nets, bit 0 first.
fn crc8_update(
    b: &mut NetlistBuilder,
    crc: &[String],
    data: &[String],
    clear: &str,
) -> Vec<String> {
    let keep = b.gate(GateKind::Not, &[clear]);
    let mut x: Vec<String> = (0..8)
        .map(|i| {
            let masked = b.gate(GateKind::And, &[&crc[i], &keep]);
            b.gate(GateKind::Xor, &[&masked, &data[i]])
        })
        .collect();
    for _ in 0..8 {
        let msb = x[7].clone();
        let b1 = b.gate(GateKind::Xor, &[&x[0], &msb]);
        let b2 = b.gate(GateKind::Xor, &[&x[1], &msb]);
        let mut next = vec![msb, b1, b2];
        next.extend(x[2..7].iter().cloned());
        x = next;
    }
    x
}

/// Byte-serial packet path: a transmit stage computing CRC-8, a link stage
/// standing in for the loopback, and a receive stage recomputing the CRC.
fn crc8_pipeline() -> Netlist {
    let mut b = NetlistBuilder::new("crc8_pipeline");
    let sop = b.input("sop");
    let valid = b.input("valid");
    let din: Vec<String> = (0..8).map(|i| b.input(format!("din_{i}"))).collect();

    let tx_data: Vec<String> = (0..8)
        .map(|i| b.ff(&format!("tx.data({i})"), &din[i], None, false))
        .collect();
    let tx_valid = b.ff("tx.valid", &valid, None, false);
    let tx_sop = b.ff("tx.sop", &sop, None, false);
    let tx_crc_q: Vec<String> = (0..8).map(|i| format!("tx.crc({i}).q")).collect();
    let tx_next = crc8_update(&mut b, &tx_crc_q, &tx_data, &tx_sop);
    for (i, d) in tx_next.iter().enumerate() {
        b.ff(&format!("tx.crc({i})"), d, Some(&tx_valid), false);
    }

    let phy_data: Vec<String> = (0..8)
        .map(|i| b.ff(&format!("phy.data({i})"), &tx_data[i], None, false))
        .collect();
    let phy_valid = b.ff("phy.valid", &tx_valid, None, false);
    let phy_sop = b.ff("phy.sop", &tx_sop, None, false);

    let rx_data: Vec<String> = (0..8)
        .map(|i| b.ff(&format!("rx.data({i})"), &phy_data[i], None, false))
        .collect();
    let rx_valid = b.ff("rx.valid", &phy_valid, None, false);
    b.ff("rx.sop", &phy_sop, None, false);
    let rx_crc_q: Vec<String> = (0..8).map(|i| format!("rx.crc({i}).q")).collect();
    let rx_next = crc8_update(&mut b, &rx_crc_q, &phy_data, &phy_sop);
    for (i, d) in rx_next.iter().enumerate() {
        b.ff(&format!("rx.crc({i})"), d, Some(&phy_valid), false);
    }

    // Byte counter, restarted at 1 on start of packet.
    let c: Vec<String> = (0..3).map(|i| format!("ctl.cnt({i}).q")).collect();
    let one = b.gate(GateKind::Const1, &[]);
    let zero = b.gate(GateKind::Const0, &[]);
    let n0 = b.gate(GateKind::Not, &[&c[0]]);
    let n1 = b.gate(GateKind::Xor, &[&c[1], &c[0]]);
    let carry = b.gate(GateKind::And, &[&c[1], &c[0]]);
    let n2 = b.gate(GateKind::Xor, &[&c[2], &carry]);
    let d0 = b.gate(GateKind::Mux2, &[&n0, &one, &tx_sop]);
    let d1 = b.gate(GateKind::Mux2, &[&n1, &zero, &tx_sop]);
    let d2 = b.gate(GateKind::Mux2, &[&n2, &zero, &tx_sop]);
    for (i, d) in [d0, d1, d2].iter().enumerate() {
        b.ff(&format!("ctl.cnt({i})"), d, Some(&tx_valid), false);
    }

    // Running parity of transmitted bit 0; never observed.
    let par_d = b.gate(GateKind::Xor, &["dbg.parity.q", &tx_data[0]]);
    b.ff("dbg.parity", &par_d, Some(&tx_valid), false);

    for (i, q) in tx_crc_q.iter().enumerate() {
        b.gate_to(GateKind::Buf, &[q], format!("tx_crc_{i}"));
    }
    for (i, q) in rx_data.iter().enumerate() {
        b.gate_to(GateKind::Buf, &[q], format!("rx_data_{i}"));
    }
    b.gate_to(GateKind::Buf, &[&rx_valid], "rx_valid");
    for (i, q) in rx_crc_q.iter().enumerate() {
        b.gate_to(GateKind::Buf, &[q], format!("rx_crc_{i}"));
    }
    b.gate_to(GateKind::Buf, &[&c[2]], "byte_cnt_2");

    for i in 0..8 {
        b.output(format!("tx_crc_{i}"));
    }
    for i in 0..8 {
        b.output(format!("rx_data_{i}"));
    }
    b.output("rx_valid");
    for i in 0..8 {
        b.output(format!("rx_crc_{i}"));
    }
    b.output("byte_cnt_2");
    b.finish()
}

/// Three packets separated by idle gaps, with a flush tail.
pub const CRC8_PACKETS: [&[u8]; 3] = [
    &[0x31, 0x32, 0x33, 0x34, 0x35, 0x36],
    &[0xde, 0xad, 0xbe, 0xef, 0x00, 0xff, 0x5a, 0xa5],
    &[0x01, 0x80, 0x7e, 0x42, 0x99],
];

fn crc8_stimulus(n: &Netlist) -> Stimulus {
    let idle: BTreeMap<String, bool> = n.inputs.iter().map(|p| (p.clone(), false)).collect();
    let mut vectors = vec![idle.clone(); 3];
    let mut first_active = None;
    let mut last_byte = 0;
    for packet in CRC8_PACKETS {
        for (k, &byte) in packet.iter().enumerate() {
            let mut v = idle.clone();
            v.insert("valid".into(), true);
            v.insert("sop".into(), k == 0);
            for i in 0..8 {
                v.insert(format!("din_{i}"), byte >> i & 1 == 1);
            }
            first_active.get_or_insert(vectors.len());
            last_byte = vectors.len();
            vectors.push(v);
        }
        vectors.push(idle.clone());
        vectors.push(idle.clone());
    }
    // Active through the last byte's arrival at the receive side.
    let last_active = last_byte + 2;
    vectors.extend(std::iter::repeat_n(idle, 8));
    Stimulus::new(
        vectors.len(),
        (first_active.unwrap(), last_active),
        n.outputs.clone(),
        vectors,
    )
    .unwrap()
}

fn toggle() -> Netlist {
    let mut b = NetlistBuilder::new("toggle");
    let q = b.ff("t.ff", "t.d", None, false);
    b.gate_to(GateKind::Not, &[&q], "t.d");
    b.output(q);
    b.finish()
}

fn counter2() -> Netlist {
    let mut b = NetlistBuilder::new("counter2");
    let en = b.input("en");
    b.gate_to(GateKind::Not, &["cnt.b0.q"], "cnt.d0");
    b.gate_to(GateKind::Xor, &["cnt.b1.q", "cnt.b0.q"], "cnt.d1");
    let q0 = b.ff("cnt.b0", "cnt.d0", Some(&en), false);
    let q1 = b.ff("cnt.b1", "cnt.d1", Some(&en), false);
    b.output(q0);
    b.output(q1);
    b.finish()
}

fn const_stimulus(n: &Netlist, cycles: usize, window: (usize, usize), value: bool) -> Stimulus {
    let v: BTreeMap<String, bool> = n.inputs.iter().map(|p| (p.clone(), value)).collect();
    Stimulus::new(cycles, window, n.outputs.clone(), vec![v; cycles]).unwrap()
}

/// 1233 flip-flops in four shift-register banks, for clock-tree scale runs.
fn wide1233() -> Netlist {
    let mut b = NetlistBuilder::new("wide1233");
    let din = b.input("din");
    for (bank, len) in [
        ("rx_eq0.crc", 216),
        ("rx_fifo.mem", 400),
        ("tx_dq0.shift", 217),
        ("tx_fifo.mem", 400),
    ] {
        let mut prev = din.clone();
        for i in 0..len {
            prev = b.ff(&format!("{bank}({i})"), &prev, None, i % 3 == 0);
        }
        let out = format!("{}_out", bank.replace('.', "_"));
        b.gate_to(GateKind::Buf, &[&prev], out.clone());
        b.output(out);
    }
    b.finish()
}

fn manifest(n: &Netlist) -> String {
    let inits: BTreeMap<&str, u8> = n
        .flipflops
        .iter()
        .map(|f| (f.name.as_str(), f.init as u8))
        .collect();
    let doc = json!({
        "name": n.name,
        "ff_count": n.flipflops.len(),
        "gate_count": n.gates.len(),
        "net_count": n.nets().len(),
        "input_count": n.inputs.len(),
        "output_count": n.outputs.len(),
        "ff_init": inits,
    });
    serde_json::to_string_pretty(&doc).unwrap() + "\n"
}

fn write(dir: &Path, n: &Netlist, stim: Option<&Stimulus>) {
    let base = |ext: &str| dir.join(format!("{}.{ext}", n.name));
    fs::write(base("json"), n.to_json() + "\n").unwrap();
    fs::write(base("manifest.json"), manifest(n)).unwrap();
    if let Some(st) = stim {
        fs::write(base("stim.json"), st.to_json() + "\n").unwrap();
        let c = Circuit::new(n).unwrap();
        let (trace, _) = c.run(st, c.reset(), false).unwrap();
        fs::write(base("golden.csv"), trace.to_csv()).unwrap();
    }
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "circuits".into()));
    fs::create_dir_all(&dir).unwrap();

    let crc = crc8_pipeline();
    let st = crc8_stimulus(&crc);
    write(&dir, &crc, Some(&st));

    let t = toggle();
    write(&dir, &t, Some(&const_stimulus(&t, 4, (0, 3), false)));

    let c = counter2();
    write(&dir, &c, Some(&const_stimulus(&c, 8, (1, 6), true)));

    let w = wide1233();
    write(&dir, &w, Some(&const_stimulus(&w, 16, (2, 13), true)));

    for n in [&crc, &t, &c, &w] {
        println!(
            "{}: {} ffs, {} gates",
            n.name,
            n.flipflops.len(),
            n.gates.len()
        );
    }
}
