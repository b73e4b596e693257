//! Statistical fault-injection campaigns against a golden reference.
//!
//! Every injection re-simulates from reset up to its cycle, applies the
//! fault to the settled pre-edge state and then continues to the end of the
//! stimulus, comparing the monitored outputs with the golden trace. Injections
//! are independent, run in parallel, and are tallied in target-then-time
//! order so results do not depend on scheduling.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clocktree::{BufferId, ClockTree};
use crate::faults::{
    apply_set_cone, apply_seu_index, BoundTree, FaultError, FaultKind, FaultSpec, InjectionEffect,
};
use crate::rng;
use crate::simulator::{BoundStimulus, Circuit, GoldenTrace, SimError, Stimulus};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error("injections per target must be at least 1")]
    NoInjections,
    #[error("campaign has no targets")]
    NoTargets,
    #[error("SET injection requires a clock tree")]
    MissingTree,
    #[error("injection cycle {cycle} outside the stimulus ({n_cycles} cycles)")]
    CycleOutOfRange { cycle: usize, n_cycles: usize },
    #[error("golden trace has {rows}x{width} entries, stimulus expects {n_cycles}x{monitors}")]
    GoldenShape {
        rows: usize,
        width: usize,
        n_cycles: usize,
        monitors: usize,
    },
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultTarget {
    Buffer(BufferId),
    Ff(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    AllBuffers,
    AllFfs,
    Explicit(Vec<FaultTarget>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub injections_per_target: usize,
    pub seed: u64,
    pub targets: Targets,
    /// Reuse one sampled time list for every target.
    pub shared_time_list: bool,
    /// Inject every target at every active cycle instead of sampling.
    #[serde(default)]
    pub exhaustive: bool,
}

impl CampaignConfig {
    pub fn new(injections_per_target: usize, seed: u64, targets: Targets) -> Self {
        CampaignConfig {
            injections_per_target,
            seed,
            targets,
            shared_time_list: true,
            exhaustive: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Masked,
    FunctionalFailure,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Masked => "masked",
            Classification::FunctionalFailure => "failure",
        })
    }
}

/// `FunctionalFailure` iff some monitored bit differs at or after
/// `from_cycle`. Traces of different shape count as a failure.
pub fn classify(golden: &GoldenTrace, observed: &GoldenTrace, from_cycle: usize) -> Classification {
    if golden.rows.len() != observed.rows.len() || golden.width() != observed.width() {
        return Classification::FunctionalFailure;
    }
    let diverges = golden
        .rows
        .iter()
        .zip(&observed.rows)
        .skip(from_cycle)
        .any(|(g, o)| g != o);
    if diverges {
        Classification::FunctionalFailure
    } else {
        Classification::Masked
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionOutcome {
    pub spec: FaultSpec,
    #[serde(with = "effect_serde")]
    pub effect: InjectionEffect,
    pub classification: Classification,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub injected: u64,
    pub reached: u64,
    pub changed: u64,
    pub unchanged: u64,
    pub failures: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetTally {
    pub target: String,
    pub injected: u64,
    pub reached: u64,
    pub changed: u64,
    pub failures: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FfTally {
    pub name: String,
    pub times_reached: u64,
    pub times_changed: u64,
    pub times_changed_and_failed: u64,
    pub times_upset: u64,
    pub times_upset_and_failed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    pub outcomes: Vec<InjectionOutcome>,
    pub totals: Totals,
    pub per_target: Vec<TargetTally>,
    /// One entry per flip-flop, netlist order.
    pub per_ff: Vec<FfTally>,
}

/// Injection cycles shared by every target: `injections_per_target` uniform
/// draws with replacement from the active window (or the whole window when
/// exhaustive).
pub fn sample_times(
    cfg: &CampaignConfig,
    window: (usize, usize),
) -> Result<Vec<usize>, CampaignError> {
    sample_stream(cfg, window, "campaign.times")
}

/// Times for target number `target`, honouring `shared_time_list`.
pub fn sample_times_for(
    cfg: &CampaignConfig,
    window: (usize, usize),
    target: usize,
) -> Result<Vec<usize>, CampaignError> {
    if cfg.shared_time_list || cfg.exhaustive {
        sample_times(cfg, window)
    } else {
        sample_stream(cfg, window, &format!("campaign.times/{target}"))
    }
}

fn sample_stream(
    cfg: &CampaignConfig,
    (first, last): (usize, usize),
    label: &str,
) -> Result<Vec<usize>, CampaignError> {
    if cfg.injections_per_target == 0 {
        return Err(CampaignError::NoInjections);
    }
    if first > last {
        return Err(SimError::BadStimulus(format!("empty active window [{first}, {last}]")).into());
    }
    if cfg.exhaustive {
        return Ok((first..=last).collect());
    }
    let mut r = rng::stream(cfg.seed, label);
    Ok((0..cfg.injections_per_target)
        .map(|_| rng::in_range(&mut r, first, last))
        .collect())
}

/// Everything an injection needs, resolved once per campaign.
pub struct Injector<'a> {
    circuit: &'a Circuit,
    stimulus: BoundStimulus,
    golden: &'a GoldenTrace,
    tree: Option<BoundTree>,
}

impl<'a> Injector<'a> {
    pub fn new(
        circuit: &'a Circuit,
        stimulus: &Stimulus,
        golden: &'a GoldenTrace,
        tree: Option<&ClockTree>,
    ) -> Result<Self, CampaignError> {
        let stimulus = circuit.bind(stimulus)?;
        if golden.len() != stimulus.n_cycles || golden.width() != stimulus.monitor_nets.len() {
            return Err(CampaignError::GoldenShape {
                rows: golden.len(),
                width: golden.width(),
                n_cycles: stimulus.n_cycles,
                monitors: stimulus.monitor_nets.len(),
            });
        }
        let tree = tree.map(|t| BoundTree::new(circuit, t)).transpose()?;
        Ok(Injector {
            circuit,
            stimulus,
            golden,
            tree,
        })
    }

    pub fn run(&self, spec: &FaultSpec) -> Result<InjectionOutcome, CampaignError> {
        let c = self.circuit;
        let st = &self.stimulus;
        if spec.cycle >= st.n_cycles {
            return Err(CampaignError::CycleOutOfRange {
                cycle: spec.cycle,
                n_cycles: st.n_cycles,
            });
        }
        let mut s = c.pre_edge_state(st, spec.cycle);
        let effect = match &spec.kind {
            FaultKind::SetOnBuffer(b) => {
                let tree = self.tree.as_ref().ok_or(CampaignError::MissingTree)?;
                apply_set_cone(c, &mut s, tree.cone(*b)?)
            }
            FaultKind::SeuOnFf(name) => {
                let ff = c
                    .ff_index(name)
                    .ok_or_else(|| FaultError::UnknownFf(name.clone()))?;
                apply_seu_index(c, &mut s, ff)
            }
        };

        let mut classification = Classification::Masked;
        // Nothing changed means the run is identical to the golden one.
        if !effect.changed.is_empty() {
            for cycle in spec.cycle..st.n_cycles {
                c.step_bits(&mut s, &st.vectors[cycle]);
                let diverged = st
                    .monitor_nets
                    .iter()
                    .zip(&self.golden.rows[cycle])
                    .any(|(&net, &g)| s.net_values[net] != g);
                if diverged {
                    classification = Classification::FunctionalFailure;
                    break;
                }
            }
        }
        Ok(InjectionOutcome {
            spec: spec.clone(),
            effect,
            classification,
        })
    }

    pub fn buffer_count(&self) -> Option<usize> {
        self.tree.as_ref().map(BoundTree::buffer_count)
    }
}

/// Runs a single injection.
pub fn run_injection(
    circuit: &Circuit,
    stimulus: &Stimulus,
    golden: &GoldenTrace,
    spec: &FaultSpec,
    tree: Option<&ClockTree>,
) -> Result<InjectionOutcome, CampaignError> {
    Injector::new(circuit, stimulus, golden, tree)?.run(spec)
}

/// Expands the target selection into fault specs, target-major.
pub fn plan(
    circuit: &Circuit,
    stimulus: &Stimulus,
    cfg: &CampaignConfig,
    tree: Option<&ClockTree>,
) -> Result<(Vec<String>, Vec<FaultSpec>), CampaignError> {
    let kinds: Vec<FaultKind> = match &cfg.targets {
        Targets::AllBuffers => tree
            .ok_or(CampaignError::MissingTree)?
            .buffer_ids()
            .map(FaultKind::SetOnBuffer)
            .collect(),
        Targets::AllFfs => circuit
            .ff_names()
            .iter()
            .cloned()
            .map(FaultKind::SeuOnFf)
            .collect(),
        Targets::Explicit(list) => list
            .iter()
            .map(|t| match t {
                FaultTarget::Buffer(b) => FaultKind::SetOnBuffer(*b),
                FaultTarget::Ff(f) => FaultKind::SeuOnFf(f.clone()),
            })
            .collect(),
    };
    if kinds.is_empty() {
        return Err(CampaignError::NoTargets);
    }
    let mut labels = Vec::with_capacity(kinds.len());
    let mut specs = Vec::new();
    for (i, kind) in kinds.into_iter().enumerate() {
        let times = sample_times_for(cfg, stimulus.active_window, i)?;
        let probe = FaultSpec { kind, cycle: 0 };
        labels.push(probe.target_label());
        specs.extend(times.into_iter().map(|cycle| FaultSpec {
            kind: probe.kind.clone(),
            cycle,
        }));
    }
    Ok((labels, specs))
}

pub fn run_campaign(
    circuit: &Circuit,
    stimulus: &Stimulus,
    golden: &GoldenTrace,
    cfg: &CampaignConfig,
    tree: Option<&ClockTree>,
) -> Result<CampaignResult, CampaignError> {
    let injector = Injector::new(circuit, stimulus, golden, tree)?;
    let (labels, specs) = plan(circuit, stimulus, cfg, tree)?;
    let outcomes = specs
        .par_iter()
        .map(|spec| injector.run(spec))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(circuit, cfg, &labels, outcomes))
}

/// As [`run_campaign`] on a dedicated pool of `workers` threads (0 picks
/// the rayon default). The result does not depend on `workers`.
pub fn run_campaign_with_workers(
    circuit: &Circuit,
    stimulus: &Stimulus,
    golden: &GoldenTrace,
    cfg: &CampaignConfig,
    tree: Option<&ClockTree>,
    workers: usize,
) -> Result<CampaignResult, CampaignError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CampaignError::Pool(e.to_string()))?;
    pool.install(|| run_campaign(circuit, stimulus, golden, cfg, tree))
}

fn aggregate(
    circuit: &Circuit,
    cfg: &CampaignConfig,
    labels: &[String],
    outcomes: Vec<InjectionOutcome>,
) -> CampaignResult {
    let mut totals = Totals::default();
    let mut per_target: Vec<TargetTally> = labels
        .iter()
        .map(|l| TargetTally {
            target: l.clone(),
            ..TargetTally::default()
        })
        .collect();
    let mut per_ff: Vec<FfTally> = circuit
        .ff_names()
        .iter()
        .map(|n| FfTally {
            name: n.clone(),
            ..FfTally::default()
        })
        .collect();

    // Outcomes are target-major with the same number of times per target.
    let per = outcomes.len() / labels.len().max(1);
    for (i, o) in outcomes.iter().enumerate() {
        let target_idx = i / per.max(1);
        let failed = o.classification == Classification::FunctionalFailure;
        let e = &o.effect;
        totals.injected += 1;
        totals.reached += e.reached.len() as u64;
        totals.changed += e.changed.len() as u64;
        totals.unchanged += e.unchanged.len() as u64;
        totals.failures += failed as u64;

        let t = &mut per_target[target_idx];
        t.injected += 1;
        t.reached += e.reached.len() as u64;
        t.changed += e.changed.len() as u64;
        t.failures += failed as u64;

        for &f in &e.reached {
            per_ff[f].times_reached += 1;
        }
        match o.spec.kind {
            FaultKind::SetOnBuffer(_) => {
                for &f in &e.changed {
                    per_ff[f].times_changed += 1;
                    per_ff[f].times_changed_and_failed += failed as u64;
                }
            }
            FaultKind::SeuOnFf(_) => {
                for &f in &e.changed {
                    per_ff[f].times_upset += 1;
                    per_ff[f].times_upset_and_failed += failed as u64;
                }
            }
        }
    }
    CampaignResult {
        config: cfg.clone(),
        outcomes,
        totals,
        per_target,
        per_ff,
    }
}

impl CampaignResult {
    /// Campaign log as CSV: a `#`-prefixed JSON config header, then one
    /// record per injection.
    pub fn log_csv(&self, circuit_name: &str) -> String {
        let header = serde_json::json!({
            "circuit": circuit_name,
            "config": self.config,
            "prng": rng::PRNG_NAME,
        });
        let mut out = format!("# {header}\n");
        out.push_str("kind,target,cycle,n_reached,n_changed,classification\n");
        for o in &self.outcomes {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                o.spec.kind_label(),
                o.spec.target_label(),
                o.spec.cycle,
                o.effect.reached.len(),
                o.effect.changed.len(),
                o.classification
            ));
        }
        out
    }

    /// Campaign log as a JSON document with the same content as
    /// [`log_csv`](Self::log_csv).
    pub fn log_json(&self, circuit_name: &str) -> String {
        let records: Vec<serde_json::Value> = self
            .outcomes
            .iter()
            .map(|o| {
                serde_json::json!({
                    "kind": o.spec.kind_label(),
                    "target": o.spec.target_label(),
                    "cycle": o.spec.cycle,
                    "n_reached": o.effect.reached.len(),
                    "n_changed": o.effect.changed.len(),
                    "classification": o.classification.to_string(),
                })
            })
            .collect();
        let doc = serde_json::json!({
            "circuit": circuit_name,
            "config": self.config,
            "prng": rng::PRNG_NAME,
            "records": records,
        });
        serde_json::to_string_pretty(&doc).expect("log serializes") + "\n"
    }
}

mod effect_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::faults::InjectionEffect;

    #[derive(Serialize, Deserialize)]
    struct Doc {
        reached: Vec<usize>,
        changed: Vec<usize>,
    }

    pub fn serialize<S: Serializer>(e: &InjectionEffect, s: S) -> Result<S::Ok, S::Error> {
        Doc {
            reached: e.reached.clone(),
            changed: e.changed.clone(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<InjectionEffect, D::Error> {
        let doc = Doc::deserialize(d)?;
        let unchanged = doc
            .reached
            .iter()
            .copied()
            .filter(|f| !doc.changed.contains(f))
            .collect();
        Ok(InjectionEffect {
            reached: doc.reached,
            changed: doc.changed,
            unchanged,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::clocktree::{generate_tree, Grouping};
    use crate::netlist::{GateKind, Netlist, NetlistBuilder};

    fn toggle() -> Netlist {
        let mut b = NetlistBuilder::new("toggle");
        let q = b.ff("t", "d", None, false);
        b.gate_to(GateKind::Not, &[&q], "d");
        b.output(q);
        b.finish()
    }

    fn stim(n: usize, window: (usize, usize), monitors: &[&str], inputs: &[&str]) -> Stimulus {
        let v: BTreeMap<String, bool> = inputs.iter().map(|p| (p.to_string(), false)).collect();
        Stimulus::new(
            n,
            window,
            monitors.iter().map(|s| s.to_string()).collect(),
            vec![v; n],
        )
        .unwrap()
    }

    fn golden(c: &Circuit, st: &Stimulus) -> GoldenTrace {
        c.run(st, c.reset(), false).unwrap().0
    }

    #[test]
    fn single_cycle_window() {
        let cfg = CampaignConfig::new(3, 1, Targets::AllFfs);
        assert_eq!(sample_times(&cfg, (10, 10)).unwrap(), vec![10, 10, 10]);
    }

    #[test]
    fn times_are_seeded_and_in_range() {
        let cfg = CampaignConfig::new(1000, 42, Targets::AllFfs);
        let a = sample_times(&cfg, (0, 99)).unwrap();
        assert!(a.iter().all(|&t| t <= 99));
        assert_eq!(a, sample_times(&cfg, (0, 99)).unwrap());
        let other = CampaignConfig::new(1000, 43, Targets::AllFfs);
        assert_ne!(a, sample_times(&other, (0, 99)).unwrap());
    }

    #[test]
    fn unshared_times_differ_per_target() {
        let mut cfg = CampaignConfig::new(20, 42, Targets::AllFfs);
        cfg.shared_time_list = false;
        assert_ne!(
            sample_times_for(&cfg, (0, 99), 0).unwrap(),
            sample_times_for(&cfg, (0, 99), 1).unwrap()
        );
    }

    #[test]
    fn zero_injections_forbidden() {
        let cfg = CampaignConfig::new(0, 1, Targets::AllFfs);
        assert!(matches!(
            sample_times(&cfg, (0, 3)),
            Err(CampaignError::NoInjections)
        ));
    }

    #[test]
    fn classify_cases() {
        let g = GoldenTrace {
            monitors: vec!["a".into()],
            rows: vec![vec![false], vec![true], vec![false]],
        };
        assert_eq!(classify(&g, &g, 0), Classification::Masked);
        let mut late = g.clone();
        late.rows[2][0] = true;
        assert_eq!(classify(&g, &late, 0), Classification::FunctionalFailure);
        let mut early = g.clone();
        early.rows[0][0] = true;
        assert_eq!(classify(&g, &early, 1), Classification::Masked);
        let mut short = g.clone();
        short.rows.pop();
        assert_eq!(classify(&g, &short, 0), Classification::FunctionalFailure);
    }

    #[test]
    fn seu_on_toggle_fails() {
        let n = toggle();
        let c = Circuit::new(&n).unwrap();
        let st = stim(8, (2, 5), &["t.q"], &[]);
        let g = golden(&c, &st);
        let spec = FaultSpec {
            kind: FaultKind::SeuOnFf("t".into()),
            cycle: 3,
        };
        let o = run_injection(&c, &st, &g, &spec, None).unwrap();
        assert_eq!(o.classification, Classification::FunctionalFailure);
    }

    #[test]
    fn seu_on_dead_end_ff_is_masked() {
        // "dead" samples the input but nothing observes it.
        let mut b = NetlistBuilder::new("dead");
        let a = b.input("a");
        let q = b.ff("live", &a, None, false);
        b.ff("dead", &a, None, false);
        b.output(q);
        let c = Circuit::new(&b.finish()).unwrap();
        let st = stim(6, (0, 5), &["live.q"], &["a"]);
        let g = golden(&c, &st);
        for cycle in 0..6 {
            let spec = FaultSpec {
                kind: FaultKind::SeuOnFf("dead".into()),
                cycle,
            };
            let o = run_injection(&c, &st, &g, &spec, None).unwrap();
            assert_eq!(o.classification, Classification::Masked);
        }
    }

    #[test]
    fn set_with_no_change_is_masked() {
        // Shift register of constant zeros: D == Q everywhere.
        let mut b = NetlistBuilder::new("zeros");
        let z = b.gate(GateKind::Const0, &[]);
        let q0 = b.ff("r0", &z, None, false);
        let q1 = b.ff("r1", &q0, None, false);
        b.output(q1);
        let n = b.finish();
        let c = Circuit::new(&n).unwrap();
        let t = generate_tree(&n.ff_names(), 1, Grouping::ByName).unwrap();
        let st = stim(5, (0, 4), &["r1.q"], &[]);
        let g = golden(&c, &st);
        let spec = FaultSpec {
            kind: FaultKind::SetOnBuffer(t.root()),
            cycle: 2,
        };
        let o = run_injection(&c, &st, &g, &spec, Some(&t)).unwrap();
        assert!(o.effect.changed.is_empty());
        assert_eq!(o.effect.reached.len(), 2);
        assert_eq!(o.classification, Classification::Masked);
    }

    #[test]
    fn set_requires_tree() {
        let c = Circuit::new(&toggle()).unwrap();
        let st = stim(4, (0, 3), &["t.q"], &[]);
        let g = golden(&c, &st);
        let spec = FaultSpec {
            kind: FaultKind::SetOnBuffer(BufferId(0)),
            cycle: 1,
        };
        assert!(matches!(
            run_injection(&c, &st, &g, &spec, None),
            Err(CampaignError::MissingTree)
        ));
    }

    #[test]
    fn one_injection_one_target() {
        let c = Circuit::new(&toggle()).unwrap();
        let st = stim(4, (0, 3), &["t.q"], &[]);
        let g = golden(&c, &st);
        let cfg = CampaignConfig::new(1, 9, Targets::AllFfs);
        let r = run_campaign(&c, &st, &g, &cfg, None).unwrap();
        assert_eq!(r.outcomes.len(), 1);
        assert_eq!(r.totals.injected, 1);
        assert_eq!(r.per_ff[0].times_upset, 1);
    }

    #[test]
    fn reached_formula_on_toggle_bank() {
        let mut b = NetlistBuilder::new("bank");
        for i in 0..9 {
            let q = format!("t{i}.q");
            b.ff(&format!("t{i}"), &format!("d{i}"), None, i % 2 == 0);
            b.gate_to(GateKind::Not, &[&q], format!("d{i}"));
            b.output(q);
        }
        let n = b.finish();
        let c = Circuit::new(&n).unwrap();
        let t = generate_tree(&n.ff_names(), 2, Grouping::ByName).unwrap();
        let monitors: Vec<String> = n.outputs.clone();
        let st = Stimulus::new(10, (1, 8), monitors, vec![BTreeMap::new(); 10]).unwrap();
        let g = golden(&c, &st);
        let cfg = CampaignConfig::new(5, 3, Targets::AllBuffers);
        let r = run_campaign(&c, &st, &g, &cfg, Some(&t)).unwrap();
        assert_eq!(r.totals.injected, 5 * 7);
        assert_eq!(r.totals.reached, 5 * 3 * 9);
        assert_eq!(r.totals.reached, r.totals.changed + r.totals.unchanged);
        // Every toggle flip-flop has D != Q, so everything reached changes
        // and is observed.
        assert_eq!(r.totals.unchanged, 0);
        assert_eq!(r.totals.failures, 35);
    }

    #[test]
    fn result_json_round_trip() {
        let c = Circuit::new(&toggle()).unwrap();
        let st = stim(4, (0, 3), &["t.q"], &[]);
        let g = golden(&c, &st);
        let cfg = CampaignConfig::new(3, 9, Targets::AllFfs);
        let r = run_campaign(&c, &st, &g, &cfg, None).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<CampaignResult>(&text).unwrap(), r);
        assert!(r
            .log_csv("toggle")
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("kind,target"));
    }
}
