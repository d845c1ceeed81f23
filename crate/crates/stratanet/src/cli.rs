//! Command-line front end. Each subcommand materializes one stage's artifacts
//! under the configured output directory; `pipeline` chains every enabled
//! stage in a fixed order. Stages recompute intermediates from the raw inputs
//! instead of reading each other's files, so a stage run on its own writes
//! byte-identical artifacts to the same stage inside `pipeline`.
//!
//! Every CSV artifact opens with a `# config=<hash> seed=<seed>` line (the
//! readers in [`crate::ingest`] skip `#` lines, so artifacts parse back
//! cleanly); JSON artifacts carry the same fields inline, and GraphML gets a
//! trailing comment since a comment may not precede the XML declaration.

use crate::backbone;
use crate::blockmodel::{self, SbmConfig, SimpleGraph};
use crate::bootstrap;
use crate::config::{Modules, PipelineConfig};
use crate::ergm::{self, ErgmTerm};
use crate::error::{Error, Result};
use crate::graph::{Level, Partition, Sector, WeightedDigraph};
use crate::ingest::{self, EventFormat, Roster};
use crate::metrics::{self, OverlapMode};
use crate::rng;
use crate::temporal::{self, Binning};
use clap::{Args, Parser, Subcommand};
use rand::RngCore;
use serde_json::json;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

const SBM_CHAINS: usize = 4;

#[derive(Debug, Parser)]
#[command(name = "stratanet", version, about = "Level-stratified retweet-network analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and filter the raw inputs; write filtered events and retweet graphs.
    Ingest(StageArgs),
    /// Hour-of-week activity profile per level.
    Activity(StageArgs),
    /// Per-account burstiness and the cross-level HSD comparison.
    Burstiness(StageArgs),
    /// Level-pair mixing matrix of the full graph.
    Mixing(StageArgs),
    /// Within-organization edge density per level.
    Density(StageArgs),
    /// Within-organization neighbourhood overlap per level.
    Overlap(StageArgs),
    /// Noise-corrected backbone per level.
    Backbone(StageArgs),
    /// Collapse backboned graphs onto organizations.
    Collapse(StageArgs),
    /// Bootstrap ensemble summaries per level.
    Bootstrap(StageArgs),
    /// Blockmodel of each collapsed graph.
    Sbm(StageArgs),
    /// Partition similarity within and across levels.
    Rmi(StageArgs),
    /// Bootstrapped ERGM coefficient distributions per level.
    Ergm(StageArgs),
    /// Every enabled stage in order, with a status report.
    Pipeline(StageArgs),
}

#[derive(Debug, Args)]
pub struct StageArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the backbone significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Override the number of bootstrap replicates.
    #[arg(long)]
    pub bootstrap_n: Option<usize>,
    /// Resample every level to this level's retweet count.
    #[arg(long, value_parser = parse_level)]
    pub fix_size_to: Option<Level>,
    /// Restrict per-level stages to one configured level.
    #[arg(long, value_parser = parse_level)]
    pub level: Option<Level>,
}

fn parse_level(s: &str) -> std::result::Result<Level, String> {
    Level::parse(s).map_err(|e| e.to_string())
}

pub fn run(cli: Cli) -> Result<i32> {
    let (stage, args) = cli.command.split();
    let ctx = Ctx::new(args)?;
    match stage {
        Some(s) => {
            let detail = run_stage(&ctx, s)?;
            println!("{}: {detail}", s.name());
            Ok(0)
        }
        None => run_pipeline(&ctx),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Ingest,
    Activity,
    Burstiness,
    Mixing,
    Density,
    Overlap,
    Backbone,
    Collapse,
    Bootstrap,
    Sbm,
    Rmi,
    Ergm,
}

impl Stage {
    const ORDER: [Stage; 12] = [
        Stage::Ingest,
        Stage::Activity,
        Stage::Burstiness,
        Stage::Mixing,
        Stage::Density,
        Stage::Overlap,
        Stage::Backbone,
        Stage::Collapse,
        Stage::Bootstrap,
        Stage::Sbm,
        Stage::Rmi,
        Stage::Ergm,
    ];

    fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Activity => "activity",
            Stage::Burstiness => "burstiness",
            Stage::Mixing => "mixing",
            Stage::Density => "density",
            Stage::Overlap => "overlap",
            Stage::Backbone => "backbone",
            Stage::Collapse => "collapse",
            Stage::Bootstrap => "bootstrap",
            Stage::Sbm => "sbm",
            Stage::Rmi => "rmi",
            Stage::Ergm => "ergm",
        }
    }

    fn enabled(self, m: &Modules) -> bool {
        match self {
            Stage::Ingest => true,
            Stage::Activity => m.activity,
            Stage::Burstiness => m.burstiness,
            Stage::Mixing => m.mixing,
            Stage::Density => m.density,
            Stage::Overlap => m.overlap,
            Stage::Backbone => m.backbone,
            Stage::Collapse => m.collapse,
            Stage::Bootstrap => m.bootstrap,
            Stage::Sbm => m.sbm,
            Stage::Rmi => m.rmi,
            Stage::Ergm => m.ergm,
        }
    }
}

impl Command {
    fn split(&self) -> (Option<Stage>, &StageArgs) {
        match self {
            Command::Ingest(a) => (Some(Stage::Ingest), a),
            Command::Activity(a) => (Some(Stage::Activity), a),
            Command::Burstiness(a) => (Some(Stage::Burstiness), a),
            Command::Mixing(a) => (Some(Stage::Mixing), a),
            Command::Density(a) => (Some(Stage::Density), a),
            Command::Overlap(a) => (Some(Stage::Overlap), a),
            Command::Backbone(a) => (Some(Stage::Backbone), a),
            Command::Collapse(a) => (Some(Stage::Collapse), a),
            Command::Bootstrap(a) => (Some(Stage::Bootstrap), a),
            Command::Sbm(a) => (Some(Stage::Sbm), a),
            Command::Rmi(a) => (Some(Stage::Rmi), a),
            Command::Ergm(a) => (Some(Stage::Ergm), a),
            Command::Pipeline(a) => (None, a),
        }
    }
}

fn run_stage(ctx: &Ctx, stage: Stage) -> Result<String> {
    match stage {
        Stage::Ingest => stage_ingest(ctx),
        Stage::Activity => stage_activity(ctx),
        Stage::Burstiness => stage_burstiness(ctx),
        Stage::Mixing => stage_mixing(ctx),
        Stage::Density => stage_density(ctx),
        Stage::Overlap => stage_overlap(ctx),
        Stage::Backbone => stage_backbone(ctx),
        Stage::Collapse => stage_collapse(ctx),
        Stage::Bootstrap => stage_bootstrap(ctx),
        Stage::Sbm => stage_sbm(ctx),
        Stage::Rmi => stage_rmi(ctx),
        Stage::Ergm => stage_ergm(ctx),
    }
}

fn run_pipeline(ctx: &Ctx) -> Result<i32> {
    let mut stages = Vec::new();
    let (mut input_error, mut degenerate) = (false, false);
    for stage in Stage::ORDER {
        if !stage.enabled(&ctx.config.modules) {
            stages.push(json!({"stage": stage.name(), "status": "disabled", "detail": ""}));
            continue;
        }
        match run_stage(ctx, stage) {
            Ok(detail) => {
                println!("{}: ok — {detail}", stage.name());
                stages.push(json!({"stage": stage.name(), "status": "ok", "detail": detail}));
            }
            Err(e) => {
                let msg = e.to_string();
                log::error!("stage {} failed: {msg}", stage.name());
                println!("{}: failed — {msg}", stage.name());
                match e.exit_code() {
                    2 => degenerate = true,
                    _ => input_error = true,
                }
                stages.push(json!({"stage": stage.name(), "status": "failed", "detail": msg}));
            }
        }
    }
    ctx.json_artifact(
        "pipeline_report.json",
        &json!({"config": ctx.hash, "seed": ctx.config.seed, "stages": stages}),
    )?;
    Ok(if input_error {
        1
    } else if degenerate {
        2
    } else {
        0
    })
}

// ---------------------------------------------------------------------------
// shared stage context

struct Ctx {
    config: PipelineConfig,
    hash: String,
    roster: Roster,
    /// Events surviving the configured filter.
    events: Vec<crate::graph::Event>,
    run_levels: Vec<Level>,
    /// `--level` was given: degenerate levels abort instead of being skipped.
    explicit_level: bool,
    out: PathBuf,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::invalid(format!("cannot open `{}`: {e}", path.display())))
}

impl Ctx {
    fn new(args: &StageArgs) -> Result<Ctx> {
        let mut config = PipelineConfig::load(&args.config)?;
        if let Some(s) = args.seed {
            config.seed = s;
        }
        if let Some(a) = args.alpha {
            config.alpha = a;
        }
        if let Some(n) = args.bootstrap_n {
            config.bootstrap.n = n;
        }
        if let Some(l) = args.fix_size_to {
            config.bootstrap.fix_size_to = Some(l);
        }
        config.validate()?;

        let run_levels = match args.level {
            Some(l) => {
                if !config.levels.contains(&l) {
                    return Err(Error::invalid(format!("level {l} is not in the configured levels")));
                }
                vec![l]
            }
            None => config.levels.clone(),
        };

        let hash = config.hash();

        let roster = Roster::parse_csv(BufReader::new(open(&config.roster_path())?))?;
        let events_path = config.events_path();
        let format = match events_path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => EventFormat::Jsonl,
            _ => EventFormat::Csv,
        };
        let events = ingest::parse_events(BufReader::new(open(&events_path)?), format)?;
        let keywords = match config.keywords_path() {
            Some(p) => ingest::parse_keywords(BufReader::new(open(&p)?))?,
            None => Vec::new(),
        };
        let spec = config.filter_spec(keywords)?;
        let events = ingest::filter_events(&events, &spec, &roster);

        let out = config.out_dir();
        std::fs::create_dir_all(&out)
            .map_err(|e| Error::invalid(format!("cannot create output directory `{}`: {e}", out.display())))?;

        Ok(Ctx { config, hash, roster, events, run_levels, explicit_level: args.level.is_some(), out })
    }

    fn graph(&self, level: Option<Level>) -> Result<WeightedDigraph> {
        ingest::build_account_graph(&self.events, &self.roster, level)
    }

    fn backboned(&self, level: Level) -> Result<WeightedDigraph> {
        backbone::extract_backbone(&self.graph(Some(level))?, self.config.alpha)
    }

    fn collapsed(&self, level: Level) -> Result<crate::graph::CollapsedGraph> {
        ingest::collapse(&self.backboned(level)?, &self.roster)
    }

    /// Resample size for a level: its own retweet count, or the fixed level's.
    fn boot_m(&self, level: Level) -> Result<u64> {
        let source = self.config.bootstrap.fix_size_to.unwrap_or(level);
        Ok(self.graph(Some(source))?.total_weight())
    }

    fn sbm_config(&self, level: Level) -> SbmConfig {
        let seed = rng::stream(self.config.seed, &format!("sbm-{}", level.token()), 0).next_u64();
        SbmConfig { seed, ..SbmConfig::default() }
    }

    /// Write a CSV artifact: stamp line, then `body`.
    fn artifact<F>(&self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let path = self.out.join(name);
        let file = File::create(&path)
            .map_err(|e| Error::invalid(format!("cannot create `{}`: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# config={} seed={}", self.hash, self.config.seed)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn graphml_artifact(&self, name: &str, g: &WeightedDigraph) -> Result<()> {
        let path = self.out.join(name);
        let file = File::create(&path)
            .map_err(|e| Error::invalid(format!("cannot create `{}`: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        g.write_graphml(&mut w)?;
        writeln!(w, "<!-- config={} seed={} -->", self.hash, self.config.seed)?;
        w.flush()?;
        Ok(())
    }

    fn json_artifact(&self, name: &str, value: &serde_json::Value) -> Result<()> {
        let path = self.out.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text)
            .map_err(|e| Error::invalid(format!("cannot create `{}`: {e}", path.display())))?;
        Ok(())
    }
}

fn boot_label(level: Level) -> String {
    format!("bootstrap-{}", level.token())
}

// ---------------------------------------------------------------------------
// stages

fn stage_ingest(ctx: &Ctx) -> Result<String> {
    ctx.artifact("events_filtered.csv", |w| ingest::write_events_csv(&ctx.events, w))?;
    let g = ctx.graph(None)?;
    ctx.artifact("graph_all.csv", |w| g.write_csv(w))?;
    ctx.graphml_artifact("graph_all.graphml", &g)?;
    for &level in &ctx.run_levels {
        let g = ctx.graph(Some(level))?;
        ctx.artifact(&format!("graph_{}.csv", level.token()), |w| g.write_csv(w))?;
        ctx.graphml_artifact(&format!("graph_{}.graphml", level.token()), &g)?;
    }
    Ok(format!("{} events kept; graphs for {} levels", ctx.events.len(), ctx.run_levels.len()))
}

fn stage_activity(ctx: &Ctx) -> Result<String> {
    for &level in &ctx.run_levels {
        let profile = temporal::activity_profile(
            &ctx.events,
            |e| ctx.roster.get(&e.account_id).map(|r| r.level) == Some(level),
            Binning::HourOfWeek,
            temporal::DEFAULT_TZ,
        );
        ctx.artifact(&format!("activity_{}.csv", level.token()), |w| {
            writeln!(w, "bin,count,fraction")?;
            for (i, &c) in profile.counts.iter().enumerate() {
                match &profile.normalized {
                    Some(f) => writeln!(w, "{i},{c},{:.6}", f[i])?,
                    None => writeln!(w, "{i},{c},")?,
                }
            }
            Ok(())
        })?;
    }
    Ok(format!("hour-of-week profiles for {} levels", ctx.run_levels.len()))
}

fn stage_burstiness(ctx: &Ctx) -> Result<String> {
    let rows = temporal::burstiness_by_account(&ctx.events, temporal::DEFAULT_MIN_EVENTS);
    ctx.artifact("burstiness.csv", |w| {
        writeln!(w, "account,level,org_type,n,B")?;
        for (account, b) in &rows {
            let (level, org_type) = match ctx.roster.get(account) {
                Some(r) => (r.level.token(), r.org_type.token()),
                None => ("", ""),
            };
            writeln!(w, "{account},{level},{org_type},{},{:.6}", b.n_events, b.b)?;
        }
        Ok(())
    })?;

    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for level in Level::ALL {
        let values: Vec<f64> = rows
            .iter()
            .filter(|(a, _)| ctx.roster.get(a).map(|r| r.level) == Some(level))
            .map(|(_, b)| b.b)
            .collect();
        if values.len() >= 2 {
            groups.push((level.token().to_string(), values));
        } else {
            log::warn!(
                "level {level}: {} accounts with ≥{} events; omitted from the burstiness comparison",
                values.len(),
                temporal::DEFAULT_MIN_EVENTS
            );
        }
    }
    let hsd_status = match temporal::tukey_hsd(&groups, 0.95) {
        Ok(t) => {
            ctx.artifact("hsd.csv", |w| {
                writeln!(w, "# q_critical={:.6} mse={:.6} df={}", t.q_critical, t.mse, t.df)?;
                writeln!(w, "group1,group2,mean_diff,ci_low,ci_high,p_adj")?;
                for r in &t.rows {
                    writeln!(
                        w,
                        "{},{},{:.6},{:.6},{:.6},{:.6}",
                        r.group1, r.group2, r.mean_diff, r.ci_low, r.ci_high, r.p_adj
                    )?;
                }
                Ok(())
            })?;
            format!("hsd over {} groups", groups.len())
        }
        Err(Error::Degenerate(msg)) => {
            log::warn!("skipping the hsd table: {msg}");
            ctx.artifact("hsd.csv", |w| {
                writeln!(w, "group1,group2,mean_diff,ci_low,ci_high,p_adj")?;
                Ok(())
            })?;
            "hsd skipped (too few populated groups)".to_string()
        }
        Err(e) => return Err(e),
    };
    Ok(format!("{} accounts above the event floor; {hsd_status}", rows.len()))
}

fn stage_mixing(ctx: &Ctx) -> Result<String> {
    let g = ctx.graph(None)?;
    let mm = metrics::mixing_matrix(&g, &ctx.roster)?;
    ctx.artifact("mixing.csv", |w| {
        writeln!(w, "src_level,dst_level,count,probability")?;
        for (i, a) in Level::ALL.iter().enumerate() {
            for (j, b) in Level::ALL.iter().enumerate() {
                let p = match mm.probs[i][j] {
                    Some(p) => format!("{p:.6e}"),
                    None => String::new(),
                };
                writeln!(w, "{},{},{},{p}", a.token(), b.token(), mm.counts[i][j])?;
            }
        }
        Ok(())
    })?;
    let total: u64 = mm.counts.iter().flatten().sum();
    Ok(format!("{total} directed edges over 16 level pairs"))
}

fn write_org_report(w: &mut dyn Write, value_name: &str, r: &metrics::OrgReport) -> Result<()> {
    writeln!(w, "# mean={:.6}", r.mean)?;
    writeln!(w, "organization_id,n_accounts,{value_name}")?;
    for s in &r.per_org {
        writeln!(w, "{},{},{:.6}", s.organization_id, s.n_accounts, s.value)?;
    }
    Ok(())
}

fn stage_density(ctx: &Ctx) -> Result<String> {
    let mut written = Vec::new();
    let mut skipped = Vec::new();
    for &level in &ctx.run_levels {
        let g = ctx.graph(Some(level))?;
        match metrics::org_density(&g, &ctx.roster, level) {
            Ok(report) => {
                ctx.artifact(&format!("density_{}.csv", level.token()), |w| {
                    write_org_report(w, "density", &report)
                })?;
                written.push(level);
            }
            Err(Error::Degenerate(msg)) if !ctx.explicit_level => {
                log::warn!("skipping density at {level}: {msg}");
                skipped.push(level);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(match skipped.len() {
        0 => format!("{} levels", written.len()),
        n => format!("{} levels; {n} skipped (undefined)", written.len()),
    })
}

fn stage_overlap(ctx: &Ctx) -> Result<String> {
    let mut written = 0;
    let mut skipped = 0;
    for &level in &ctx.run_levels {
        let g = ctx.graph(Some(level))?;
        for mode in [OverlapMode::Weighted, OverlapMode::Unweighted] {
            match metrics::org_mean_overlap(&g, &ctx.roster, level, mode) {
                Ok(report) => {
                    ctx.artifact(&format!("overlap_{}_{}.csv", level.token(), mode.token()), |w| {
                        write_org_report(w, "overlap", &report)
                    })?;
                    written += 1;
                }
                Err(Error::Degenerate(msg)) if !ctx.explicit_level => {
                    log::warn!("skipping {} overlap at {level}: {msg}", mode.token());
                    skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(match skipped {
        0 => format!("{written} tables"),
        n => format!("{written} tables; {n} skipped (undefined)"),
    })
}

fn stage_backbone(ctx: &Ctx) -> Result<String> {
    let mut details = Vec::new();
    for &level in &ctx.run_levels {
        let g = ctx.graph(Some(level))?;
        let scores = backbone::score_edges(&g);
        ctx.artifact(&format!("backbone_scores_{}.csv", level.token()), |w| {
            backbone::write_scores(&g, &scores, w)
        })?;
        let bb = backbone::extract_backbone(&g, ctx.config.alpha)?;
        ctx.artifact(&format!("backbone_{}.csv", level.token()), |w| bb.write_csv(w))?;
        ctx.graphml_artifact(&format!("backbone_{}.graphml", level.token()), &bb)?;
        details.push(format!("{}: {}/{} edges kept", level.token(), bb.n_edges(), g.n_edges()));
    }
    Ok(details.join("; "))
}

fn stage_collapse(ctx: &Ctx) -> Result<String> {
    let mut details = Vec::new();
    for &level in &ctx.run_levels {
        let cg = ctx.collapsed(level)?;
        ctx.artifact(&format!("collapsed_{}.csv", level.token()), |w| cg.write_csv(w))?;
        details.push(format!("{}: {} org edges", level.token(), cg.n_edges()));
    }
    Ok(details.join("; "))
}

fn stage_bootstrap(ctx: &Ctx) -> Result<String> {
    for &level in &ctx.run_levels {
        let g = ctx.graph(Some(level))?;
        let m = ctx.boot_m(level)?;
        let reps =
            bootstrap::ensemble_labeled(&g, m, ctx.config.bootstrap.n, ctx.config.seed, &boot_label(level))?;
        let n = reps.len() as f64;
        ctx.artifact(&format!("bootstrap_{}.csv", level.token()), |w| {
            writeln!(w, "src,dst,weight,mean,sd")?;
            for (s, d, wt) in g.edges() {
                let (mut sum, mut sumsq) = (0.0, 0.0);
                for rep in &reps {
                    let x = rep.weight(s, d) as f64;
                    sum += x;
                    sumsq += x * x;
                }
                let mean = sum / n;
                let var = (sumsq / n - mean * mean).max(0.0);
                writeln!(w, "{},{},{wt},{:.6},{:.6}", g.name(s), g.name(d), mean, var.sqrt())?;
            }
            Ok(())
        })?;
    }
    Ok(format!("{} replicates per level", ctx.config.bootstrap.n))
}

fn stage_sbm(ctx: &Ctx) -> Result<String> {
    let mut levels_json = serde_json::Map::new();
    let mut details = Vec::new();
    for &level in &ctx.run_levels {
        let cg = ctx.collapsed(level)?;
        let sg = SimpleGraph::from_collapsed(&cg);
        let config = ctx.sbm_config(level);
        let fit = blockmodel::fit_sbm_multistart(&sg, &config, SBM_CHAINS)?;
        ctx.artifact(&format!("partition_{}.csv", level.token()), |w| {
            writeln!(w, "organization_id,block")?;
            for (i, name) in cg.names().iter().enumerate() {
                writeln!(w, "{name},{}", fit.partition.block_of(i))?;
            }
            Ok(())
        })?;
        let sparse = sg.m() < sg.n();
        if sparse {
            log::warn!(
                "level {level}: collapsed graph is sparse ({} edges over {} organizations); \
                 the block structure is unreliable",
                sg.m(),
                sg.n()
            );
        }
        levels_json.insert(
            level.token().into(),
            json!({
                "n_blocks": fit.partition.block_count(),
                "description_length": fit.description_length,
                "sweeps": fit.sweeps_run,
                "chain_seed": config.seed,
                "n_organizations": sg.n(),
                "n_edges": sg.m(),
                "sparse": sparse,
            }),
        );
        details.push(format!("{}: B={}", level.token(), fit.partition.block_count()));
    }
    ctx.json_artifact(
        "sbm_report.json",
        &json!({"config": ctx.hash, "seed": ctx.config.seed, "levels": levels_json}),
    )?;
    Ok(details.join("; "))
}

fn stage_rmi(ctx: &Ctx) -> Result<String> {
    let mut included: Vec<(Level, Vec<Partition>)> = Vec::new();
    let mut excluded = Vec::new();
    for &level in &ctx.run_levels {
        let cg = ctx.collapsed(level)?;
        let observed = blockmodel::fit_sbm_multistart(
            &SimpleGraph::from_collapsed(&cg),
            &ctx.sbm_config(level),
            SBM_CHAINS,
        )?;
        if observed.partition.block_count() < 2 {
            log::warn!("level {level}: observed blockmodel is a single block; excluded from the rmi matrix");
            excluded.push(level);
            continue;
        }
        let g = ctx.graph(Some(level))?;
        let reps = bootstrap::ensemble_labeled(
            &g,
            ctx.boot_m(level)?,
            ctx.config.bootstrap.rmi_samples,
            ctx.config.seed,
            &boot_label(level),
        )?;
        let mut parts = Vec::with_capacity(reps.len());
        for (i, rep) in reps.iter().enumerate() {
            let bb = backbone::extract_backbone(rep, ctx.config.alpha)?;
            let sg = SimpleGraph::from_collapsed(&ingest::collapse(&bb, &ctx.roster)?);
            let seed = rng::stream(ctx.config.seed, &format!("sbm-{}-boot", level.token()), i as u64)
                .next_u64();
            let fit = blockmodel::fit_sbm_multistart(&sg, &SbmConfig { seed, ..SbmConfig::default() }, SBM_CHAINS)?;
            parts.push(fit.partition);
        }
        included.push((level, parts));
    }
    ctx.artifact("rmi_matrix.csv", |w| {
        writeln!(w, "level_a,sample_a,level_b,sample_b,raw,normalized")?;
        for (ai, (la, pa)) in included.iter().enumerate() {
            for (lb, pb) in included.iter().skip(ai).map(|(l, p)| (l, p)) {
                let same = la == lb;
                for i in 0..pa.len() {
                    let j0 = if same { i + 1 } else { 0 };
                    for j in j0..pb.len() {
                        let r = blockmodel::rmi(&pa[i], &pb[j])?;
                        writeln!(
                            w,
                            "{},{i},{},{j},{:.6},{:.6}",
                            la.token(),
                            lb.token(),
                            r.raw_rmi,
                            r.normalized
                        )?;
                    }
                }
            }
        }
        Ok(())
    })?;
    Ok(match excluded.len() {
        0 => format!("{} levels compared", included.len()),
        _ => format!(
            "{} levels compared; excluded: {}",
            included.len(),
            excluded.iter().map(|l| l.token()).collect::<Vec<_>>().join(", ")
        ),
    })
}

/// The model fit on every level: a baseline edge term, sector activity
/// controls (first sector is the reference), sector homophily and triadic
/// closure.
pub fn default_ergm_terms() -> Vec<ErgmTerm> {
    let mut terms = vec![ErgmTerm::Edges];
    terms.extend(Sector::ALL[1..].iter().map(|&s| ErgmTerm::SectorActivity(s)));
    terms.push(ErgmTerm::SectorHomophily);
    terms.push(ErgmTerm::TriadicClosure);
    terms
}

fn stage_ergm(ctx: &Ctx) -> Result<String> {
    let terms = default_ergm_terms();
    let orgs = ctx.roster.organizations();
    let sectors: Vec<Sector> = orgs
        .iter()
        .map(|o| ctx.roster.org_info(o).expect("organization from roster").0)
        .collect();

    let mut levels_json = serde_json::Map::new();
    let mut details = Vec::new();
    for &level in &ctx.run_levels {
        let g = ctx.graph(Some(level))?;
        let m = ctx.boot_m(level)?;
        let reps =
            bootstrap::ensemble_labeled(&g, m, ctx.config.bootstrap.n, ctx.config.seed, &boot_label(level))?;
        let mut collapsed = Vec::with_capacity(reps.len());
        for rep in &reps {
            let bb = backbone::extract_backbone(rep, ctx.config.alpha)?;
            collapsed.push(ingest::collapse(&bb, &ctx.roster)?);
        }
        match ergm::bootstrap_ergm(&collapsed, &sectors, &terms) {
            Ok(boot) => {
                ctx.artifact(&format!("ergm_{}.csv", level.token()), |w| {
                    writeln!(w, "sample_id,term,estimate,se,converged")?;
                    for s in &boot.samples {
                        match &s.fit {
                            Some(fit) => {
                                for (k, term) in terms.iter().enumerate() {
                                    let se = fit.standard_errors[k];
                                    let se_text =
                                        if se.is_finite() { format!("{se:.6}") } else { String::new() };
                                    writeln!(
                                        w,
                                        "{},{},{:.6},{se_text},{}",
                                        s.sample_id,
                                        term.token(),
                                        fit.theta[k],
                                        fit.converged
                                    )?;
                                }
                            }
                            None => {
                                for term in &terms {
                                    writeln!(w, "{},{},,,false", s.sample_id, term.token())?;
                                }
                            }
                        }
                    }
                    Ok(())
                })?;
                let mut terms_json = serde_json::Map::new();
                for d in &boot.distributions {
                    terms_json.insert(
                        d.term.token(),
                        json!({
                            "quantiles": d.quantiles,
                            "flat_and_wide": d.flat_and_wide,
                            "n_estimates": d.estimates.len(),
                        }),
                    );
                }
                levels_json.insert(
                    level.token().into(),
                    json!({
                        "n_samples": boot.samples.len(),
                        "n_converged": boot.n_converged,
                        "n_degenerate": boot.samples.iter().filter(|s| s.fit.is_none()).count(),
                        "terms": terms_json,
                    }),
                );
                details.push(format!("{}: {}/{} converged", level.token(), boot.n_converged, boot.samples.len()));
            }
            Err(Error::Degenerate(msg)) if !ctx.explicit_level => {
                log::warn!("ergm at {level}: {msg}");
                ctx.artifact(&format!("ergm_{}.csv", level.token()), |w| {
                    writeln!(w, "sample_id,term,estimate,se,converged")?;
                    Ok(())
                })?;
                levels_json.insert(level.token().into(), json!({"error": msg}));
                details.push(format!("{}: degenerate", level.token()));
            }
            Err(e) => return Err(e),
        }
    }
    ctx.json_artifact(
        "ergm_summary.json",
        &json!({
            "config": ctx.hash,
            "seed": ctx.config.seed,
            "bootstrap_n": ctx.config.bootstrap.n,
            "fix_size_to": ctx.config.bootstrap.fix_size_to.map(|l| l.token()),
            "terms": terms.iter().map(|t| t.token()).collect::<Vec<_>>(),
            "levels": levels_json,
        }),
    )?;
    Ok(details.join("; "))
}
