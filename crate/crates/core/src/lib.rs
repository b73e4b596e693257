//! Logic-level fault injection for single-event transients in clock
//! distribution networks and single-event upsets in flip-flops.
//!
//! The pipeline is: parse a [`netlist`], compile it into a
//! [`simulator::Circuit`], record a golden trace, synthesize a virtual
//! [`clocktree`], run a fault-injection [`campaign`] and turn the result into
//! de-rating factors, rankings and FIT-weighted rates with [`report`].

pub mod campaign;
pub mod clocktree;
pub mod faults;
pub mod netlist;
pub mod report;
pub mod rng;
pub mod simulator;

pub use campaign::{
    classify, run_campaign, run_campaign_with_workers, run_injection, sample_times, CampaignConfig,
    CampaignError, CampaignResult, Classification, FaultTarget, InjectionOutcome, Targets,
};
pub use clocktree::{generate_tree, BufferId, ClockTree, Grouping, TopologyStats};
pub use faults::{
    apply_set, apply_seu, explicit_pulse_oracle, FaultKind, FaultSpec, InjectionEffect,
};
pub use netlist::{
    levelize, parse_netlist, validate, GateKind, Netlist, NetlistBuilder, Violation,
};
pub use report::{combine_fit, fdr, overlap, rank_ffs, FitLibrary, RankMode, VulnerabilityRanking};
pub use simulator::{Circuit, GoldenTrace, SimState, Stimulus};
