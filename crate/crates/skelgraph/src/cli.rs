//! `skelgraph` subcommands. Data goes to files named by `--out`; progress
//! and diagnostics go to standard error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use skelgraph_core::ablation::{run_ablation, AblationConfig, CutKind, CutSpec};
use skelgraph_core::condense::{CondenseOptions, Grouping};
use skelgraph_core::eval::{compare, mean_std, EvalInput, PropClassifierConfig};
use skelgraph_core::fetch::build_vanilla;
use skelgraph_core::lmpp::{check_swap_invariance, SwapCheckConfig, SWAP_CHECK_MAX_NODES};
use skelgraph_core::metrics::format_bcr;
use skelgraph_core::{Aggregation, FetchConfig, SkeletonGraph, Strategy};

use crate::dataset_io::{dataset_digest, load_dataset, write_file};
use crate::error::{Error, Result};
use crate::generate::{generate_synthetic, SbmConfig};
use crate::skeleton_io::{grouping_name, load_skeleton, save_skeleton, SkeletonBundle};
use crate::{compress, save_dataset, storage, CompressOptions};

#[derive(Debug, Parser)]
#[command(name = "skelgraph", version, about = "Fetch and condense background nodes into skeleton graphs")]
struct Cli {
    /// Worker threads; 0 picks one per core. Output does not depend on it.
    #[arg(long, global = true, env = "SKELGRAPH_THREADS", default_value_t = 0)]
    threads: usize,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded stochastic-block-model dataset.
    Gen(GenArgs),
    /// Condense a dataset into a skeleton directory.
    Compress(CompressArgs),
    /// Write compression and storage statistics.
    Stats(StatsArgs),
    /// Check a skeleton against the dataset it claims to come from.
    Verify(VerifyArgs),
    /// Score targets after removing classes of edges.
    Ablate(AblateArgs),
    /// Score targets on a dataset or a skeleton.
    Eval(EvalArgs),
    /// Score a dataset and its skeleton on identical splits.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SbmConfig::default().targets)]
    targets: usize,
    #[arg(long, default_value_t = SbmConfig::default().backgrounds)]
    backgrounds: usize,
    #[arg(long, default_value_t = SbmConfig::default().communities)]
    communities: usize,
    #[arg(long, default_value_t = SbmConfig::default().p_intra)]
    p_intra: f64,
    #[arg(long, default_value_t = SbmConfig::default().p_inter)]
    p_inter: f64,
    #[arg(long, default_value_t = SbmConfig::default().p_bb_intra)]
    p_bb_intra: f64,
    #[arg(long, default_value_t = SbmConfig::default().p_bb_inter)]
    p_bb_inter: f64,
    #[arg(long, default_value_t = SbmConfig::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = SbmConfig::default().noise)]
    noise: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Alpha,
    Beta,
    Gamma,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AggArg {
    Mean,
    Sum,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GroupingArg {
    Canonical,
    Xor,
}

#[derive(Debug, Args)]
struct CompressArgs {
    /// Dataset directory.
    #[arg(long)]
    input: PathBuf,
    /// Skeleton directory to create.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    d1: u32,
    #[arg(long, default_value_t = 1)]
    d2: u32,
    #[arg(long, default_value_t = 5)]
    k_affil: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::Gamma)]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value_t = AggArg::Mean)]
    agg: AggArg,
    /// Hop cap for structure sets; defaults to max(d1 - 1, d2).
    #[arg(long)]
    hop_cap: Option<u32>,
    #[arg(long, value_enum, default_value_t = GroupingArg::Canonical)]
    grouping: GroupingArg,
    /// Key seed for `--grouping xor`.
    #[arg(long, default_value_t = 0)]
    xor_seed: u64,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    skeleton: PathBuf,
    /// Directory for `stats.tsv` and `stats.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    skeleton: PathBuf,
    /// Also run the path-passing swap check on the vanilla subgraph when it
    /// has at most 500 nodes.
    #[arg(long)]
    swap_check: bool,
}

#[derive(Debug, Args)]
struct ClassifierArgs {
    /// Number of seeds; seed `i` fixes split `i` and random cut draw `i`.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = PropClassifierConfig::default().hops)]
    hops: usize,
    #[arg(long, default_value_t = PropClassifierConfig::default().l2)]
    l2: f64,
    #[arg(long, default_value_t = PropClassifierConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = PropClassifierConfig::default().learning_rate)]
    learning_rate: f64,
}

impl ClassifierArgs {
    fn config(&self) -> PropClassifierConfig {
        PropClassifierConfig {
            hops: self.hops,
            l2: self.l2,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            ..PropClassifierConfig::default()
        }
    }

    fn seeds(&self) -> Result<Vec<u64>> {
        if self.seeds == 0 {
            return Err(skelgraph_core::Error::InvalidConfig("--seeds must be at least 1".to_string()).into());
        }
        Ok((0..self.seeds).collect())
    }
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Score table (TSV).
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated cuts: none, tt, tb, bb, bridb, random:<ratio>, or
    /// matched:<class> for a random cut at that class's edge fraction.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "none,tt,tb,bb,bridb,matched:tt,matched:tb,matched:bb,matched:bridb"
    )]
    cuts: Vec<String>,
    /// Added to each run seed for random cut draws.
    #[arg(long, default_value_t = 0)]
    cut_seed: u64,
    #[command(flatten)]
    classifier: ClassifierArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    input: PathBuf,
    /// Score this skeleton of the dataset instead of the dataset graph.
    #[arg(long)]
    skeleton: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    classifier: ClassifierArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    skeleton: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also score targets plus a random background subset of the skeleton's
    /// background count.
    #[arg(long)]
    random_baseline: bool,
    #[command(flatten)]
    classifier: ClassifierArgs,
}

struct Ctx {
    quiet: bool,
}

impl Ctx {
    fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("skelgraph: {}", msg.as_ref());
        }
    }
}

/// Parse `argv` (program name first), run, and return the exit code:
/// 0 success, 1 invalid input or arguments, 2 I/O failure, 3 failed
/// verification.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let ctx = Ctx { quiet: cli.quiet };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("skelgraph: cannot start {} worker threads: {e}", cli.threads);
            return 1;
        }
    };
    match pool.install(|| dispatch(&ctx, cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("skelgraph: error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(ctx: &Ctx, cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => gen(ctx, a),
        Command::Compress(a) => compress_cmd(ctx, a),
        Command::Stats(a) => stats(ctx, a),
        Command::Verify(a) => verify(ctx, a),
        Command::Ablate(a) => ablate(ctx, a),
        Command::Eval(a) => eval(ctx, a),
        Command::Compare(a) => compare_cmd(ctx, a),
    }
}

fn gen(ctx: &Ctx, a: GenArgs) -> Result<()> {
    let cfg = SbmConfig {
        targets: a.targets,
        backgrounds: a.backgrounds,
        communities: a.communities,
        p_intra: a.p_intra,
        p_inter: a.p_inter,
        p_bb_intra: a.p_bb_intra,
        p_bb_inter: a.p_bb_inter,
        dim: a.dim,
        noise: a.noise,
    };
    let syn = generate_synthetic(&cfg, a.seed)?;
    ctx.progress(format!(
        "generated {} nodes, {} edges",
        syn.bundle.node_count(),
        syn.bundle.graph.edge_count()
    ));
    save_dataset(&syn.bundle, &a.out)
}

fn compress_cmd(ctx: &Ctx, a: CompressArgs) -> Result<()> {
    let strategy = match a.strategy {
        StrategyArg::Alpha => Strategy::Alpha,
        StrategyArg::Beta => Strategy::Beta,
        StrategyArg::Gamma => Strategy::Gamma,
    };
    let aggregation = match a.agg {
        AggArg::Mean => Aggregation::Mean,
        AggArg::Sum => Aggregation::Sum,
    };
    let grouping = match a.grouping {
        GroupingArg::Canonical => Grouping::Canonical,
        GroupingArg::Xor => Grouping::Xor { seed: a.xor_seed },
    };
    if a.hop_cap == Some(0) {
        return Err(skelgraph_core::Error::InvalidConfig("--hop-cap must be at least 1".to_string()).into());
    }
    let opts = CompressOptions {
        fetch: FetchConfig::new(a.d1, a.d2, a.k_affil)?,
        condense: CondenseOptions {
            strategy,
            aggregation,
            hop_cap: a.hop_cap,
            grouping,
        },
    };
    let bundle = load_dataset(&a.input)?;
    ctx.progress(format!(
        "loaded {} nodes ({} targets), {} edges",
        bundle.node_count(),
        bundle.roles.target_count(),
        bundle.graph.edge_count()
    ));
    let out = compress(&bundle, &opts)?;
    let s = &out.skeleton;
    ctx.progress(format!(
        "{} skeleton: {} targets, {} supernodes, {} edges, BCR {}",
        s.strategy,
        s.target_count(),
        s.background_count(),
        s.edges.len(),
        format_bcr(s.background_count() as u64, bundle.roles.background_count() as u64)
            .unwrap_or_else(|_| "n/a".to_string())
    ));
    save_skeleton(&out, &a.out)
}

fn stats(ctx: &Ctx, a: StatsArgs) -> Result<()> {
    let dataset = load_dataset(&a.input)?;
    let skeleton = load_skeleton(&a.skeleton)?;
    let r = storage::report(&dataset, &skeleton)?;
    let bcr_text = format_bcr(r.skeleton_background_count, r.original_background_count)?;
    let mut tsv = String::from("metric\tvalue\n");
    let mut row = |k: &str, v: String| writeln!(tsv, "{k}\t{v}").unwrap();
    row("strategy", skeleton.skeleton.strategy.to_string());
    row("original_backgrounds", r.original_background_count.to_string());
    row("skeleton_backgrounds", r.skeleton_background_count.to_string());
    row("bcr", bcr_text.clone());
    row("bcr_exact", r.bcr.to_string());
    for (side, b) in [("original", r.original), ("skeleton", r.skeleton)] {
        row(&format!("{side}_target_feature_bytes"), b.target_features.to_string());
        row(&format!("{side}_background_feature_bytes"), b.background_features.to_string());
        row(&format!("{side}_adjacency_bytes"), b.adjacency.to_string());
        row(&format!("{side}_total_bytes"), b.total().to_string());
    }
    let mut patterns = serde_json::Map::new();
    if let Some(h) = &r.pattern_histogram {
        for (class, count) in h {
            row(&format!("pattern {class}"), count.to_string());
            patterns.insert(class.to_string(), (*count).into());
        }
    }
    let breakdown = |b: skelgraph_core::metrics::StorageBreakdown| {
        serde_json::json!({
            "target_feature_bytes": b.target_features,
            "background_feature_bytes": b.background_features,
            "adjacency_bytes": b.adjacency,
            "total_bytes": b.total(),
        })
    };
    let json = serde_json::json!({
        "strategy": skeleton.skeleton.strategy.name(),
        "original_backgrounds": r.original_background_count,
        "skeleton_backgrounds": r.skeleton_background_count,
        "bcr": bcr_text,
        "bcr_exact": r.bcr,
        "original": breakdown(r.original),
        "skeleton": breakdown(r.skeleton),
        "patterns": r.pattern_histogram.as_ref().map(|_| patterns),
    });
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_file(&a.out.join("stats.tsv"), tsv.as_bytes())?;
    let mut text = serde_json::to_string_pretty(&json).expect("stats serialize");
    text.push('\n');
    write_file(&a.out.join("stats.json"), text.as_bytes())?;
    ctx.progress(format!("BCR {bcr_text}"));
    Ok(())
}

/// First visible difference between two skeletons, if any.
fn skeleton_difference(want: &SkeletonGraph, got: &SkeletonGraph) -> Option<String> {
    if want.strategy != got.strategy || want.aggregation != got.aggregation {
        return Some("strategy or aggregation differs".to_string());
    }
    if want.targets != got.targets {
        return Some("target list differs".to_string());
    }
    if want.supernodes.len() != got.supernodes.len() {
        return Some(format!(
            "expected {} supernodes, found {}",
            want.supernodes.len(),
            got.supernodes.len()
        ));
    }
    for (j, (w, g)) in want.supernodes.iter().zip(&got.supernodes).enumerate() {
        if w != g {
            return Some(format!("supernode {} differs", want.supernode_id(j)));
        }
    }
    if want.folds != got.folds {
        return Some("folded members differ".to_string());
    }
    if want.edges != got.edges {
        return Some("edge list differs".to_string());
    }
    if want.features != got.features {
        return Some("features differ".to_string());
    }
    None
}

fn verify(ctx: &Ctx, a: VerifyArgs) -> Result<()> {
    let dataset = load_dataset(&a.input)?;
    let loaded = match load_skeleton(&a.skeleton) {
        Ok(s) => s,
        Err(e @ Error::Io { .. }) => return Err(e),
        Err(e) => return Err(Error::Verify(e.to_string())),
    };
    let digest = dataset_digest(&dataset);
    if loaded.provenance.source_digest != digest {
        return Err(Error::Verify(format!(
            "skeleton was built from dataset {}, not {digest}",
            loaded.provenance.source_digest
        )));
    }
    if loaded.external_ids != dataset.external_ids {
        return Err(Error::Verify("node id table differs from the dataset".to_string()));
    }
    let p = &loaded.provenance;
    let opts = CompressOptions {
        fetch: p.fetch,
        condense: CondenseOptions {
            strategy: loaded.skeleton.strategy,
            aggregation: loaded.skeleton.aggregation,
            hop_cap: Some(p.hop_cap),
            grouping: p.grouping,
        },
    };
    ctx.progress(format!(
        "recomputing {} skeleton (d1={}, d2={}, K={}, hop cap {}, {} grouping)",
        loaded.skeleton.strategy,
        p.fetch.d1,
        p.fetch.d2,
        p.fetch.k_affil,
        p.hop_cap,
        grouping_name(p.grouping)
    ));
    let fresh: SkeletonBundle = compress(&dataset, &opts)?;
    if let Some(diff) = skeleton_difference(&fresh.skeleton, &loaded.skeleton) {
        return Err(Error::Verify(diff));
    }
    if a.swap_check {
        let fetch = build_vanilla(&dataset.graph, &dataset.roles, &dataset.features, p.fetch)?;
        if fetch.vanilla.node_count() > SWAP_CHECK_MAX_NODES {
            ctx.progress(format!(
                "swap check skipped: vanilla subgraph has {} nodes (limit {SWAP_CHECK_MAX_NODES})",
                fetch.vanilla.node_count()
            ));
        } else {
            let x = dataset.features.select_rows(fetch.id_map.kept());
            let report = check_swap_invariance(&fetch.vanilla, &fetch.vanilla_roles, &x, SwapCheckConfig::default())?;
            ctx.progress(format!(
                "swap check: {} triples evaluated, max deviation {:.3e}",
                report.evaluated_triples, report.max_deviation
            ));
            if !report.passed() {
                return Err(Error::Verify(format!(
                    "swap deviation {} exceeds {}",
                    report.max_deviation, report.tolerance
                )));
            }
        }
    }
    ctx.progress("skeleton verified");
    Ok(())
}

fn parse_cut(s: &str, g: &skelgraph_core::Graph, roles: &skelgraph_core::RoleMask, seed: u64) -> Result<CutSpec> {
    let class = |name: &str| match name {
        "none" => Some(CutKind::None),
        "tt" => Some(CutKind::Tt),
        "tb" => Some(CutKind::Tb),
        "bb" => Some(CutKind::Bb),
        "bridb" => Some(CutKind::Bridb),
        _ => None,
    };
    let bad = || skelgraph_core::Error::InvalidConfig(format!("unknown cut {s:?}"));
    let spec = if let Some(r) = s.strip_prefix("random:") {
        CutSpec::random(r.parse().map_err(|_| bad())?, seed)
    } else if let Some(k) = s.strip_prefix("matched:") {
        CutSpec::matched_random(g, roles, class(k).ok_or_else(bad)?, seed)
    } else {
        let mut c = CutSpec::class(class(s).ok_or_else(bad)?);
        c.seed = seed;
        c
    };
    spec.validate()?;
    Ok(spec)
}

fn ablate(ctx: &Ctx, a: AblateArgs) -> Result<()> {
    let cfg = AblationConfig {
        classifier: a.classifier.config(),
        seeds: a.classifier.seeds()?,
    };
    cfg.classifier.validate()?;
    let bundle = load_dataset(&a.input)?;
    let specs = a
        .cuts
        .iter()
        .map(|c| parse_cut(c.trim(), &bundle.graph, &bundle.roles, a.cut_seed))
        .collect::<Result<Vec<_>>>()?;
    ctx.progress(format!("{} cuts x {} seeds", specs.len(), cfg.seeds.len()));
    let rows = run_ablation(&bundle, &specs, &cfg)?;
    let mut tsv = String::from("cut\tspec\tremoved_edges\tmean\tstd\tscores\n");
    for (name, r) in a.cuts.iter().zip(&rows) {
        let scores: Vec<String> = r.scores.iter().map(|s| format!("{s:.6}")).collect();
        writeln!(
            tsv,
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{}",
            name.trim(),
            r.label,
            r.removed_edges,
            r.mean,
            r.std,
            scores.join(",")
        )
        .unwrap();
    }
    write_output(&a.out, &tsv)
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_file(path, text.as_bytes())
}

fn checked_skeleton(dataset: &skelgraph_core::DatasetBundle, dir: &Path) -> Result<SkeletonBundle> {
    let s = load_skeleton(dir)?;
    if s.provenance.source_digest != dataset_digest(dataset) {
        return Err(Error::format(dir, "skeleton was built from a different dataset"));
    }
    Ok(s)
}

fn eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let cfg = a.classifier.config();
    let seeds = a.classifier.seeds()?;
    let dataset = load_dataset(&a.input)?;
    let labels = dataset.labels.as_ref().ok_or(skelgraph_core::Error::MissingLabels)?;
    let input = match &a.skeleton {
        Some(dir) => EvalInput::skeleton(&checked_skeleton(&dataset, dir)?.skeleton),
        None => EvalInput::original(&dataset),
    };
    let scores = input.score(labels, &cfg, &seeds)?;
    let mut tsv = String::from("seed\ttrain\tval\ttest\n");
    for (seed, s) in seeds.iter().zip(&scores) {
        writeln!(tsv, "{seed}\t{:.6}\t{:.6}\t{:.6}", s.train_accuracy, s.val_accuracy, s.test_accuracy).unwrap();
    }
    let test: Vec<f64> = scores.iter().map(|s| s.test_accuracy).collect();
    let (m, sd) = mean_std(&test);
    writeln!(tsv, "mean\t\t\t{m:.6}\nstd\t\t\t{sd:.6}").unwrap();
    ctx.progress(format!("test accuracy {:.2} +- {:.2}", 100.0 * m, 100.0 * sd));
    write_output(&a.out, &tsv)
}

fn compare_cmd(ctx: &Ctx, a: CompareArgs) -> Result<()> {
    let cfg = a.classifier.config();
    let seeds = a.classifier.seeds()?;
    let dataset = load_dataset(&a.input)?;
    let labels = dataset.labels.as_ref().ok_or(skelgraph_core::Error::MissingLabels)?;
    let skeleton = checked_skeleton(&dataset, &a.skeleton)?;
    let original = EvalInput::original(&dataset);
    let report = compare(&original, &EvalInput::skeleton(&skeleton.skeleton), labels, &cfg, &seeds)?;
    let random = if a.random_baseline {
        let keep = skeleton.skeleton.background_count();
        let mut scores = Vec::with_capacity(seeds.len());
        for &seed in &seeds {
            let subset = EvalInput::random_subset(&dataset, keep, seed)?;
            scores.push(subset.score(labels, &cfg, &[seed])?[0].test_accuracy);
        }
        Some(scores)
    } else {
        None
    };
    let mut tsv = String::from("seed\toriginal\tskeleton\tdelta");
    if random.is_some() {
        tsv.push_str("\trandom_subset");
    }
    tsv.push('\n');
    for (i, seed) in seeds.iter().enumerate() {
        let (o, s) = (report.first[i], report.second[i]);
        write!(tsv, "{seed}\t{o:.6}\t{s:.6}\t{:.6}", s - o).unwrap();
        if let Some(r) = &random {
            write!(tsv, "\t{:.6}", r[i]).unwrap();
        }
        tsv.push('\n');
    }
    let (om, osd) = report.first_mean_std();
    let (sm, ssd) = report.second_mean_std();
    let (dm, dsd) = report.delta();
    write!(tsv, "mean\t{om:.6}\t{sm:.6}\t{dm:.6}").unwrap();
    if let Some(r) = &random {
        write!(tsv, "\t{:.6}", mean_std(r).0).unwrap();
    }
    write!(tsv, "\nstd\t{osd:.6}\t{ssd:.6}\t{dsd:.6}").unwrap();
    if let Some(r) = &random {
        write!(tsv, "\t{:.6}", mean_std(r).1).unwrap();
    }
    tsv.push('\n');
    ctx.progress(format!(
        "original {:.2}, skeleton {:.2}, delta {:+.2} +- {:.2}",
        100.0 * om,
        100.0 * sm,
        100.0 * dm,
        100.0 * dsd
    ));
    write_output(&a.out, &tsv)
}
