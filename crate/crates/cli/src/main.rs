use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdx_itr::config::{MethodEntry, MethodName, PipelineConfig};
use pdx_itr::error::{CliError, CliResult};
use pdx_itr::formats::{
    artifact_format, dendrogram_text, from_versioned_json, read_artifact, read_text, write_artifact, write_atomic,
};
use pdx_itr::io::{read_features, write_features, write_responses, ResponseKind};
use pdx_itr::pipeline::{self, Cell, RuleArtifact, RuleKind, Stage, RULE_FORMAT};
use pdx_itr::report::{write_reports, CellReport, REPORTS_FORMAT};
use pdx_itr_core::evaluation::{FittedRule, TuningPoint};
use pdx_itr_core::itr::fit_tree_itr;
use pdx_itr_core::rng::derive_seed;
use pdx_itr_core::screening::{rank_genes, select_top};
use pdx_itr_core::synthetic::{generate, SyntheticConfig};
use pdx_itr_core::treatment_tree::{build_tree, cut_tree, fit_reward_transform, TreatmentGrouping};

const GROUPING_FORMAT: &str = "grouping";
const ORACLE_FORMAT: &str = "synthetic-oracle";

#[derive(Parser)]
#[command(
    name = "pdx-itr",
    version,
    about = "Tree-based individualized treatment rules for PDX studies"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for independent cells.
    #[arg(long, global = true, env = "PDXITR_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or file, for `recommend`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic study with a known treatment structure.
    Simulate {
        #[arg(long, default_value_t = 60)]
        lines: usize,
        #[arg(long, default_value_t = 20)]
        features: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0.0)]
        drop_rate: f64,
    },
    /// Rank genes and optionally write the top-L_sup feature table.
    Screen {
        #[arg(long)]
        l_sup: Option<usize>,
        #[arg(long)]
        response: Option<ResponseKind>,
    },
    /// Build treatment dendrograms and optionally cut one into a grouping.
    Tree {
        #[arg(long)]
        c1: Option<usize>,
        #[arg(long)]
        c2: Option<usize>,
        #[arg(long)]
        response: Option<ResponseKind>,
    },
    /// Fit one method on all lines.
    Fit {
        #[arg(long)]
        method: Option<String>,
        /// Grouping from `tree`; fits directly at that cut.
        #[arg(long)]
        grouping: Option<PathBuf>,
        /// Penalty used with `--grouping`.
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        #[arg(long)]
        l_sup: Option<usize>,
        #[arg(long)]
        response: Option<ResponseKind>,
    },
    /// Recommend treatments for the lines of a features file.
    Recommend {
        #[arg(long)]
        rule: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Cross-validated reports for every cell.
    Evaluate,
    /// Cross-validated reports and fitted ensembles for superlearner cells.
    Superlearn {
        /// Used when the configuration lists no superlearner method.
        #[arg(long, default_value = "sl4")]
        preset: String,
    },
    /// Regenerate the CSV views from a reports.json.
    Report {
        #[arg(long)]
        reports: PathBuf,
    },
    /// Full pipeline: reports, fitted rules, dendrograms and manifest.
    Run,
}

fn load_config(g: &Global) -> CliResult<PipelineConfig> {
    let path = g
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn parse_method(name: &str) -> CliResult<MethodName> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| CliError::Config(format!("unknown method `{name}`")))
}

fn simulate(g: &Global, lines: usize, features: usize, noise: f64, drop_rate: f64) -> CliResult<()> {
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("pdx-itr-sim"));
    let seed = g.seed.unwrap_or(1);
    let mut sc = SyntheticConfig::three_groups(lines, features, noise, seed);
    sc.drop_rate = drop_rate;
    sc.companion = true;
    let (data, oracle) = generate(&sc)?;
    write_atomic(&out.join("features.tsv"), &write_features(data.features())?)?;
    write_atomic(
        &out.join("responses.tsv"),
        &write_responses(data.records(), ResponseKind::NegBar)?,
    )?;
    write_artifact(&out.join("oracle.json"), ORACLE_FORMAT, &oracle)?;
    let template = format!(
        r#"seed = {seed}
folds = 5
inner_folds = 3
responses = ["neg_bar"]
l_sup = [5]
out = "results"
methods = [{{ name = "ql1" }}, {{ name = "lasso" }}]

[input]
features = "features.tsv"
responses = "responses.tsv"
untreated = "untreated"

[filter]
min_variance_quantile = 0.0
treatment_coverage = 0.5

[grid]
c1 = [0]
c2 = [1, 2]
lambda = [0.3, 0.1, 0.03]
"#
    );
    write_atomic(&out.join("config.toml"), template.as_bytes())?;
    println!("wrote synthetic study to {}", out.display());
    Ok(())
}

fn first_response(cfg: &PipelineConfig, flag: Option<ResponseKind>) -> ResponseKind {
    flag.unwrap_or_else(|| cfg.responses.first().copied().unwrap_or(ResponseKind::NegBar))
}

fn screen(g: &Global, l_sup: Option<usize>, response: Option<ResponseKind>) -> CliResult<()> {
    let mut cfg = load_config(g)?;
    cfg.l_sup = l_sup.into_iter().collect();
    cfg.validate()?;
    let kind = first_response(&cfg, response);
    let inputs = pipeline::load_inputs(&cfg, &[kind], false)?;
    let data = inputs.dataset(kind)?;
    let ranked = rank_genes(data, cfg.screening_mode)?;
    let mut tsv = String::from("rank\tgene\tscore\n");
    for (i, s) in ranked.iter().enumerate() {
        tsv.push_str(&format!("{}\t{}\t{}\n", i + 1, s.gene, s.score));
    }
    write_atomic(&cfg.out.join("gene_ranking.tsv"), tsv.as_bytes())?;
    if let Some(l) = l_sup {
        let keep = select_top(&ranked, data.features().feature_names(), l)?;
        let subset = data.features().select_named(&keep.feature_names)?;
        write_atomic(
            &cfg.out.join(format!("features_lsup-{l}.tsv")),
            &write_features(&subset)?,
        )?;
    }
    println!("ranked {} genes into {}", ranked.len(), cfg.out.display());
    Ok(())
}

fn tree(g: &Global, c1: Option<usize>, c2: Option<usize>, response: Option<ResponseKind>) -> CliResult<()> {
    let cfg = load_config(g)?;
    cfg.validate()?;
    let kind = first_response(&cfg, response);
    let inputs = pipeline::load_inputs(&cfg, &[kind], false)?;
    let data = inputs.dataset(kind)?;
    let c1s = c1.map(|c| vec![c]).unwrap_or_else(|| cfg.grid.c1.clone());
    for c1 in c1s {
        let rewards = fit_reward_transform(data, c1)?.apply(data)?;
        let dend = build_tree(&rewards)?;
        let stem = format!("{}_c1-{c1}", kind.as_str());
        write_atomic(
            &cfg.out.join(format!("dendrogram_{stem}.txt")),
            dendrogram_text(&dend).as_bytes(),
        )?;
        if let Some(c2) = c2 {
            let grouping = cut_tree(&dend, c2)?;
            write_artifact(
                &cfg.out.join(format!("grouping_{stem}_c2-{c2}.json")),
                GROUPING_FORMAT,
                &grouping,
            )?;
        }
    }
    println!("wrote trees to {}", cfg.out.display());
    Ok(())
}

fn fit(
    g: &Global,
    method: Option<&str>,
    grouping: Option<&Path>,
    lambda: f64,
    l_sup: Option<usize>,
    response: Option<ResponseKind>,
) -> CliResult<()> {
    let mut cfg = load_config(g)?;
    let entry = match method {
        Some(name) => {
            let name = parse_method(name)?;
            cfg.methods
                .iter()
                .find(|m| m.name == name)
                .cloned()
                .unwrap_or(MethodEntry {
                    name,
                    smoothed: false,
                    dae: false,
                    propagation: Default::default(),
                })
        }
        None => cfg
            .methods
            .first()
            .cloned()
            .ok_or_else(|| CliError::Config("no method given".into()))?,
    };
    cfg.l_sup = l_sup.into_iter().collect();
    cfg.validate()?;
    let kind = first_response(&cfg, response);
    let inputs = pipeline::load_inputs(&cfg, &[kind], entry.dae)?;
    let cell = Cell {
        response: kind,
        entry: entry.clone(),
        l_sup,
    };
    let art = match grouping {
        None => pipeline::fit_cell(&cfg, &inputs, &cell)?,
        Some(path) => {
            if l_sup.is_some() || entry.dae || entry.smoothed {
                return Err(CliError::Config("--grouping fits the configured features as-is".into()));
            }
            let grouping: TreatmentGrouping = read_artifact(path, GROUPING_FORMAT)?;
            let data = inputs.dataset(kind)?;
            let method = entry
                .method(&cfg.forest)
                .ok_or_else(|| CliError::Config("--grouping needs a tree method".into()))?;
            let itr_cfg = method
                .itr_config(Some(lambda))
                .ok_or_else(|| CliError::Config("--grouping needs a tree method".into()))?;
            let transform = fit_reward_transform(data, grouping.c1)?;
            let rewards = transform.apply(data)?;
            let itr = fit_tree_itr(&itr_cfg, &rewards, &grouping, data.features(), derive_seed(cfg.seed, 0))?;
            RuleArtifact {
                cell: cell.id(),
                treatments: data.treatments().iter().map(|t| t.id.clone()).collect(),
                input_features: itr.feature_names.clone(),
                encoder: None,
                rule: RuleKind::Single {
                    chosen: TuningPoint {
                        c1: grouping.c1,
                        c2: Some(grouping.c2),
                        lambda: Some(lambda),
                    },
                    fitted: Box::new(FittedRule::Tree { itr, transform }),
                },
            }
        }
    };
    let path = cfg.out.join(format!("rule_{}.json", cell.id()));
    write_artifact(&path, RULE_FORMAT, &art)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn recommend(g: &Global, rule: &Path, features: &Path) -> CliResult<()> {
    let text = read_text(rule)?;
    let format = artifact_format(rule, &text)?;
    if format != RULE_FORMAT {
        return Err(CliError::input(
            rule,
            1,
            format!("expected a `{RULE_FORMAT}` artifact, found `{format}`"),
        ));
    }
    let art: RuleArtifact = from_versioned_json(rule, RULE_FORMAT, &text)?;
    let fm = read_features(features)?;
    let mut tsv = String::from("line_id\trecommended\n");
    for (line, names) in art.recommend(&fm)? {
        tsv.push_str(&format!("{line}\t{}\n", names.join(",")));
    }
    match &g.out {
        Some(p) => write_atomic(p, tsv.as_bytes())?,
        None => print!("{tsv}"),
    }
    Ok(())
}

fn run_stage(g: &Global, stage: Stage, preset: Option<&str>) -> CliResult<bool> {
    let mut cfg = load_config(g)?;
    if let Some(preset) = preset {
        cfg.methods.retain(|m| m.name.is_superlearner());
        if cfg.methods.is_empty() {
            cfg.methods.push(MethodEntry {
                name: parse_method(preset)?,
                smoothed: false,
                dae: false,
                propagation: Default::default(),
            });
        }
    }
    let summary = pipeline::run(&cfg, stage, g.workers)?;
    println!(
        "{} cells, {} failed; outputs in {}",
        summary.cells.len(),
        summary.failures,
        summary.out.display()
    );
    Ok(summary.failures == 0)
}

fn report(g: &Global, reports: &Path) -> CliResult<()> {
    let cells: Vec<CellReport> = read_artifact(reports, REPORTS_FORMAT)?;
    let out = g
        .out
        .clone()
        .or_else(|| reports.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    write_reports(&out, &cells)?;
    println!("wrote {} rows to {}", cells.len(), out.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult<bool> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate {
            lines,
            features,
            noise,
            drop_rate,
        } => simulate(g, *lines, *features, *noise, *drop_rate).map(|_| true),
        Command::Screen { l_sup, response } => screen(g, *l_sup, *response).map(|_| true),
        Command::Tree { c1, c2, response } => tree(g, *c1, *c2, *response).map(|_| true),
        Command::Fit {
            method,
            grouping,
            lambda,
            l_sup,
            response,
        } => fit(g, method.as_deref(), grouping.as_deref(), *lambda, *l_sup, *response).map(|_| true),
        Command::Recommend { rule, features } => recommend(g, rule, features).map(|_| true),
        Command::Evaluate => run_stage(g, Stage::Evaluate, None),
        Command::Superlearn { preset } => run_stage(g, Stage::Full, Some(preset)),
        Command::Report { reports } => report(g, reports).map(|_| true),
        Command::Run => run_stage(g, Stage::Full, None),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
