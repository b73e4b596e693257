use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cdnfi_core::campaign::{run_campaign_with_workers, CampaignConfig, CampaignResult, Targets};
use cdnfi_core::report::{emit, Document, Format, LabeledCampaign, ReportBundle};
use cdnfi_core::rng::{derive_seed, PRNG_NAME};
use cdnfi_core::{
    generate_tree, parse_netlist, Circuit, ClockTree, FitLibrary, GoldenTrace, Grouping, Netlist,
    Stimulus,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(
    name = "cdnfi",
    version,
    about = "Fault injection into clock distribution networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a netlist and write its golden trace.
    Sim {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        stimulus: PathBuf,
        /// Trace CSV; the run manifest goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate virtual clock trees over a netlist's flip-flops.
    GenCdn {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        min_fanout: u64,
        #[arg(long, value_enum, default_value_t = GroupingArg::Name)]
        grouping: GroupingArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random trees; name grouping always yields one.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run SET or SEU campaigns and write logs plus a report bundle.
    Campaign {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        stimulus: PathBuf,
        #[arg(long)]
        golden: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Clock tree file; repeat for one SET campaign per tree.
        #[arg(long = "tree", required_if_eq("mode", "set"))]
        trees: Vec<PathBuf>,
        #[arg(long, default_value_t = 170, value_parser = clap::value_parser!(u64).range(1..))]
        injections: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Inject at every active cycle instead of sampling.
        #[arg(long)]
        exhaustive: bool,
        /// Draw a separate time list for each target.
        #[arg(long)]
        per_target_times: bool,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads, 0 for one per core. Does not affect the output.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Rebuild a report bundle from saved campaign results.
    Report {
        /// `*.result.json` written by `campaign`; repeatable.
        #[arg(long = "result", required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(clap::Args)]
struct ReportArgs {
    /// CSV of `cell_class,fit`.
    #[arg(long)]
    fit_library: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    top_fraction: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupingArg {
    Name,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Set,
    Seu,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Csv,
    Text,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Text => Format::Text,
        }
    }
}

/// A problem with the command's inputs; exits with status 2.
#[derive(Debug)]
struct InputError(String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

/// Input files read so far, with their digests.
#[derive(Default)]
struct Inputs {
    digests: BTreeMap<String, String>,
}

impl Inputs {
    fn load<T, E: fmt::Display>(
        &mut self,
        path: &Path,
        parse: impl FnOnce(&str) -> Result<T, E>,
    ) -> Result<T> {
        let text = fs::read_to_string(path)
            .map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
        let value = parse(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        self.digests
            .insert(path.display().to_string(), sha256(text.as_bytes()));
        Ok(value)
    }
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to reproduce a command's outputs.
#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: Value,
    seed: Option<u64>,
    prng: &'static str,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

/// Campaign result as saved for later reporting.
#[derive(Serialize, Deserialize)]
struct SavedResult {
    circuit: String,
    label: String,
    config: Value,
    result: CampaignResult,
}

/// Pending output files, relative to an output root. Nothing is written
/// until the command has finished computing.
#[derive(Default)]
struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, contents: impl Into<String>) {
        self.files.push((name.into(), contents.into()));
    }

    fn add_docs(&mut self, prefix: &str, docs: Vec<Document>) {
        for d in docs {
            self.add(format!("{prefix}{}", d.name), d.contents);
        }
    }

    fn write(self, root: &Path, manifest_name: &str, mut manifest: RunManifest) -> Result<()> {
        for (name, contents) in &self.files {
            let path = root.join(name);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
            manifest
                .outputs
                .insert(name.clone(), sha256(contents.as_bytes()));
        }
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        let path = root.join(manifest_name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn manifest(
    command: &'static str,
    config: Value,
    seed: Option<u64>,
    inputs: Inputs,
) -> RunManifest {
    RunManifest {
        tool: "cdnfi",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        seed,
        prng: PRNG_NAME,
        inputs: inputs.digests,
        outputs: BTreeMap::new(),
    }
}

fn file_stem(p: &Path) -> String {
    let name = p
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.strip_suffix(".json").unwrap_or(&name).to_string()
}

fn sim(netlist: &Path, stimulus: &Path, out: &Path) -> Result<()> {
    let mut inputs = Inputs::default();
    let n: Netlist = inputs.load(netlist, parse_netlist)?;
    let st: Stimulus = inputs.load(stimulus, Stimulus::parse)?;
    let c = Circuit::new(&n)?;
    let (trace, _) = c.run(&st, c.reset(), false)?;

    let name = out
        .file_name()
        .context("--out must name a file")?
        .to_string_lossy()
        .into_owned();
    let root = out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut o = Outputs::default();
    o.add(name.clone(), trace.to_csv());
    let config = json!({ "circuit": n.name, "cycles": trace.len(), "monitors": trace.width() });
    o.write(
        root,
        &format!("{name}.manifest.json"),
        manifest("sim", config, None, inputs),
    )?;
    println!(
        "{}: {} cycles x {} monitors -> {}",
        n.name,
        trace.len(),
        trace.width(),
        out.display()
    );
    Ok(())
}

fn gen_cdn(
    netlist: &Path,
    min_fanout: usize,
    grouping: GroupingArg,
    seed: u64,
    count: u64,
    out_dir: &Path,
) -> Result<()> {
    let mut inputs = Inputs::default();
    let n: Netlist = inputs.load(netlist, parse_netlist)?;
    let ffs = n.ff_names();
    let jobs: Vec<(String, Grouping)> = match grouping {
        GroupingArg::Name => vec![("tree_name.json".into(), Grouping::ByName)],
        GroupingArg::Random => (0..count)
            .map(|i| {
                let s = derive_seed(seed, &format!("cdn/{i}"));
                (format!("tree_{i:03}.json"), Grouping::Random(s))
            })
            .collect(),
    };
    let mut o = Outputs::default();
    for (file, g) in jobs {
        let t = generate_tree(&ffs, min_fanout, g)?;
        println!("{file}: {}", t.stats());
        o.add(file, t.to_json());
    }
    let config = json!({
        "circuit": n.name,
        "min_fanout": min_fanout,
        "grouping": match grouping { GroupingArg::Name => "name", GroupingArg::Random => "random" },
        "count": o.files.len(),
    });
    o.write(
        out_dir,
        "manifest.json",
        manifest("gen-cdn", config, Some(seed), inputs),
    )
}

fn load_fit(inputs: &mut Inputs, args: &ReportArgs) -> Result<Option<FitLibrary>> {
    if !(args.top_fraction > 0.0 && args.top_fraction <= 1.0) {
        return Err(InputError(format!(
            "--top-fraction must be in (0, 1], got {}",
            args.top_fraction
        ))
        .into());
    }
    args.fit_library
        .as_deref()
        .map(|p| inputs.load(p, FitLibrary::parse_csv))
        .transpose()
}

fn report_config(args: &ReportArgs) -> Value {
    json!({
        "top_fraction": args.top_fraction,
        "format": args.format,
        "fit_library": args.fit_library.as_ref().map(|p| file_stem(p)),
    })
}

#[allow(clippy::too_many_arguments)]
fn campaign(
    netlist: &Path,
    stimulus: &Path,
    golden: &Path,
    mode: Mode,
    trees: &[PathBuf],
    injections: u64,
    seed: u64,
    exhaustive: bool,
    per_target_times: bool,
    out_dir: &Path,
    workers: usize,
    report: &ReportArgs,
) -> Result<()> {
    let mut inputs = Inputs::default();
    let n: Netlist = inputs.load(netlist, parse_netlist)?;
    let st: Stimulus = inputs.load(stimulus, Stimulus::parse)?;
    let g: GoldenTrace = inputs.load(golden, GoldenTrace::from_csv)?;
    let fit = load_fit(&mut inputs, report)?;
    let loaded: Vec<(String, ClockTree)> = match mode {
        Mode::Set => trees
            .iter()
            .map(|p| {
                Ok((
                    format!("set_{}", file_stem(p)),
                    inputs.load(p, ClockTree::from_json)?,
                ))
            })
            .collect::<Result<_>>()?,
        Mode::Seu => Vec::new(),
    };
    let c = Circuit::new(&n)?;

    let mut cfg = CampaignConfig::new(
        injections as usize,
        seed,
        match mode {
            Mode::Set => Targets::AllBuffers,
            Mode::Seu => Targets::AllFfs,
        },
    );
    cfg.exhaustive = exhaustive;
    cfg.shared_time_list = !per_target_times;

    let runs: Vec<(String, Option<&ClockTree>)> = match mode {
        Mode::Set => loaded.iter().map(|(l, t)| (l.clone(), Some(t))).collect(),
        Mode::Seu => vec![("seu".to_string(), None)],
    };
    let config = json!({
        "circuit": n.name,
        "mode": mode,
        "campaign": cfg,
        "trees": trees.iter().map(|p| file_stem(p)).collect::<Vec<_>>(),
        "report": report_config(report),
    });

    let mut o = Outputs::default();
    let mut campaigns = Vec::new();
    for (label, tree) in runs {
        let r = run_campaign_with_workers(&c, &st, &g, &cfg, tree, workers)
            .with_context(|| format!("campaign {label}"))?;
        let t = &r.totals;
        let f = cdnfi_core::fdr(t.failures, t.injected)?;
        println!(
            "{label}: injected={} reached={} changed={} unchanged={} failures={} fdr={f}",
            t.injected, t.reached, t.changed, t.unchanged, t.failures
        );
        o.add(format!("{label}.log.csv"), r.log_csv(&n.name));
        let saved = SavedResult {
            circuit: n.name.clone(),
            label: label.clone(),
            config: config.clone(),
            result: r.clone(),
        };
        o.add(
            format!("{label}.result.json"),
            serde_json::to_string(&saved)? + "\n",
        );
        campaigns.push(LabeledCampaign { label, result: r });
    }
    let bundle = ReportBundle {
        config: config.clone(),
        campaigns,
        top_fraction: report.top_fraction,
        fit,
    };
    o.add_docs("report/", emit(&bundle, report.format.into())?);
    o.write(
        out_dir,
        "manifest.json",
        manifest("campaign", config, Some(seed), inputs),
    )
}

fn report_cmd(results: &[PathBuf], out_dir: &Path, report: &ReportArgs) -> Result<()> {
    let mut inputs = Inputs::default();
    let fit = load_fit(&mut inputs, report)?;
    let saved: Vec<SavedResult> = results
        .iter()
        .map(|p| inputs.load(p, |t| serde_json::from_str::<SavedResult>(t)))
        .collect::<Result<_>>()?;
    let mut configs: Vec<Value> = Vec::new();
    for s in &saved {
        if !configs.contains(&s.config) {
            configs.push(s.config.clone());
        }
    }
    let config = match configs.as_slice() {
        [one] => one.clone(),
        many => json!({ "campaigns": many }),
    };
    let seed = saved.first().map(|s| s.result.config.seed);
    let bundle = ReportBundle {
        config: config.clone(),
        campaigns: saved
            .into_iter()
            .map(|s| LabeledCampaign {
                label: s.label,
                result: s.result,
            })
            .collect(),
        top_fraction: report.top_fraction,
        fit,
    };
    let mut o = Outputs::default();
    o.add_docs("", emit(&bundle, report.format.into())?);
    let config = json!({ "results": config, "report": report_config(report) });
    o.write(
        out_dir,
        "manifest.json",
        manifest("report", config, seed, inputs),
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sim {
            netlist,
            stimulus,
            out,
        } => sim(&netlist, &stimulus, &out),
        Command::GenCdn {
            netlist,
            min_fanout,
            grouping,
            seed,
            count,
            out_dir,
        } => gen_cdn(
            &netlist,
            min_fanout as usize,
            grouping,
            seed,
            count,
            &out_dir,
        ),
        Command::Campaign {
            netlist,
            stimulus,
            golden,
            mode,
            trees,
            injections,
            seed,
            exhaustive,
            per_target_times,
            out_dir,
            workers,
            report,
        } => {
            if mode == Mode::Seu && !trees.is_empty() {
                bail!(InputError("--tree only applies to --mode set".into()));
            }
            campaign(
                &netlist,
                &stimulus,
                &golden,
                mode,
                &trees,
                injections,
                seed,
                exhaustive,
                per_target_times,
                &out_dir,
                workers,
                &report,
            )
        }
        Command::Report {
            results,
            out_dir,
            report,
        } => report_cmd(&results, &out_dir, &report),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<InputError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
