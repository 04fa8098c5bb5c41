//! Subcommand implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use trustlens_core::analytics::{
    boxplot_stats, confusion, confusion_by_practice, macro_metrics, mae, mae_in_reported_band, separation_report,
    BoxplotStats, ConfusionReport, MacroMetrics, MwMethod, Prediction, SeparationReport,
};
use trustlens_core::corpus::{variant_pairs, AdherenceLabel, Pairing};
use trustlens_core::gateway::{
    run_sweep, AssessmentRun, Gateway, ModelProfile, ResponseCache, SweepOptions, UreqTransport,
};
use trustlens_core::practices::{PracticeId, PRACTICE_COUNT};
use trustlens_core::prompting::PromptStrategy;
use trustlens_core::quality_model::{score_label_table, score_run, scores_to_csv, TrustScore};

use crate::manifest::{model_slug, Overrides, Workspace};
use crate::{svg, CliError, Command, Common, EXIT_OK, EXIT_RUNTIME, TOOL_VERSION};

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn emit(out: &mut dyn Write, line: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", line.as_ref()).map_err(runtime)
}

fn load(common: &Common) -> Result<Workspace, CliError> {
    Workspace::load(
        &common.manifest,
        &Overrides { qm_config: common.qm_config.clone(), out: common.out.clone() },
    )
}

/// `# tool ...; template_version=...; seed=...` provenance line.
pub fn header_comment(template_versions: &[String], seed: u64) -> String {
    let tv = if template_versions.is_empty() { "none".to_string() } else { template_versions.join(",") };
    format!("trustlens {TOOL_VERSION}; template_version={tv}; seed={seed}")
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn with_csv_header(header: &str, body: &str) -> String {
    format!("# {header}\n{body}")
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Validate { common } => validate(&load(common)?, out),
        Command::Assess { common, strategy, model, replay, parallelism } => {
            let ws = load(common)?;
            let strategies = match strategy {
                Some(s) => vec![s.parse::<PromptStrategy>().map_err(CliError::Validation)?],
                None => ws.manifest.strategies.clone(),
            };
            let profiles = match model {
                Some(m) => vec![ws.model(m)?.clone()],
                None => ws.manifest.models.clone(),
            };
            let parallelism = parallelism.unwrap_or(ws.manifest.parallelism);
            if parallelism == 0 {
                return Err(CliError::Validation("--parallelism must be a positive integer".into()));
            }
            let cache = Arc::new(ResponseCache::open(&ws.cache_path).map_err(runtime)?);
            let gateway = if *replay {
                Gateway::replay(cache)
            } else {
                Gateway::new(cache, Box::new(UreqTransport::default()))
            };
            assess_with(&ws, &gateway, &profiles, &strategies, parallelism, out)
        }
        Command::Score { common, run } => score(&load(common)?, run.as_deref(), out),
        Command::Eval { common, allow_incomplete } => {
            let ws = load(common)?;
            let eval = evaluate(&ws, *allow_incomplete)?;
            write_eval(&ws, &eval, out)?;
            Ok(EXIT_OK)
        }
        Command::Report { common, allow_incomplete } => {
            let ws = load(common)?;
            let eval = evaluate(&ws, *allow_incomplete)?;
            write_eval(&ws, &eval, out)?;
            let path = ws.out_dir.join("report.md");
            write_file(&path, &render_report(&ws, &eval))?;
            emit(out, format!("wrote {}", path.display()))?;
            Ok(EXIT_OK)
        }
    }
}

fn validate(ws: &Workspace, out: &mut dyn Write) -> Result<i32, CliError> {
    let stats = ws.corpus.stats();
    let pairing = variant_pairs(&ws.corpus);
    emit(
        out,
        format!(
            "corpus: {} functions in {} services ({} secure, {} fully vulnerable, {} single-vulnerability), {} variant pairs",
            stats.functions,
            stats.services,
            stats.secure,
            stats.fully_vulnerable,
            stats.single_vulnerability,
            pairing.pairs.len()
        ),
    )?;
    emit(out, format!("catalog: {} ({PRACTICE_COUNT} practices)", ws.catalog.version()))?;
    emit(out, format!("ground truth: {} labels, annotator `{}`", ws.truth.len(), ws.truth.annotator))?;
    emit(out, format!("weights: {} practices, sum {:.12}", ws.weights.len(), ws.weights.sum()))?;
    emit(
        out,
        format!(
            "quality model: r = {}, zero mode {}",
            ws.quality_model.exponent_r,
            ws.quality_model.zero_mode.describe()
        ),
    )?;
    emit(out, format!("call graph: {} edges", ws.call_graph.edge_count()))?;
    let cache_entries = if ws.cache_path.exists() {
        ResponseCache::open(&ws.cache_path).map_err(runtime)?.len()
    } else {
        0
    };
    emit(out, format!("cache: {} entries at {}", cache_entries, ws.cache_path.display()))?;
    let models: Vec<&str> = ws.manifest.models.iter().map(|m| m.model_id.as_str()).collect();
    emit(out, format!("models: {}", models.join(", ")))?;
    for w in &ws.warnings {
        emit(out, format!("warning: {w}"))?;
    }
    emit(out, "ok")?;
    Ok(EXIT_OK)
}

fn summary_line(run: &AssessmentRun) -> String {
    let h = &run.header;
    let mut s = if h.strategy.is_per_practice() {
        let counts = run.label_counts();
        format!(
            "{} {}: {} verdicts (Followed {}, NotFollowed {}, NotApplicable {})",
            h.model_id,
            h.strategy.slug(),
            h.verdict_count,
            counts[&AdherenceLabel::Followed],
            counts[&AdherenceLabel::NotFollowed],
            counts[&AdherenceLabel::NotApplicable],
        )
    } else {
        format!("{} {}: {} score verdicts", h.model_id, h.strategy.slug(), h.verdict_count)
    };
    let _ = write!(
        s,
        ", {} repaired, {} failed parses, {} item errors",
        run.header.repaired_parses, run.header.failed_parses, run.header.item_error_count
    );
    if !run.is_complete() {
        s.push_str(" [INCOMPLETE]");
    }
    s
}

/// Runs the sweeps with the given gateway and writes each run file. Score
/// estimation reads its prior classification run from the output tree, so
/// strategies run in their canonical order.
pub fn assess_with(
    ws: &Workspace,
    gateway: &Gateway,
    profiles: &[ModelProfile],
    strategies: &[PromptStrategy],
    parallelism: usize,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut strategies = strategies.to_vec();
    strategies.sort();
    strategies.dedup();
    let mut incomplete = 0;
    for profile in profiles {
        for &strategy in &strategies {
            let prior = if strategy == PromptStrategy::ScoreEstimation {
                let prior_strategy = ws.manifest.score_prior_strategy;
                let path = ws.run_path(&profile.model_id, prior_strategy);
                Some(AssessmentRun::load(&path).map_err(|e| {
                    runtime(format!(
                        "score estimation for {} needs the {} run first: {e}",
                        profile.model_id,
                        prior_strategy.slug()
                    ))
                })?)
            } else {
                None
            };
            let options = SweepOptions {
                parallelism,
                seed: ws.manifest.seed,
                call_graph: Some(&ws.call_graph),
                call_context_depth: ws.manifest.call_context_depth,
                prior_run: prior.as_ref(),
            };
            let run = run_sweep(gateway, &ws.corpus, &ws.catalog, strategy, profile, &options).map_err(runtime)?;
            run.write(&ws.run_path(&profile.model_id, strategy)).map_err(runtime)?;
            emit(out, summary_line(&run))?;
            for e in run.item_errors.iter().take(5) {
                let practice = e.practice_id.map(|p| format!(" practice {p}")).unwrap_or_default();
                emit(out, format!("  item error: {}{practice}: {}", e.function_id, e.message))?;
            }
            if run.item_errors.len() > 5 {
                emit(out, format!("  ... {} more item errors in the run file", run.item_errors.len() - 5))?;
            }
            if !run.is_complete() {
                incomplete += 1;
            }
        }
    }
    Ok(if incomplete > 0 { EXIT_RUNTIME } else { EXIT_OK })
}

fn estimates_csv(header: &str, run: &AssessmentRun) -> String {
    let mut body = String::from("function_id,score\n");
    for (fid, s) in run.score_map() {
        let _ = writeln!(body, "{fid},{s:.12}");
    }
    with_csv_header(header, &body)
}

fn score_one(ws: &Workspace, run_path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let run = AssessmentRun::load(run_path).map_err(runtime)?;
    let header = header_comment(std::slice::from_ref(&run.header.template_version), ws.manifest.seed);
    let target = run_path.with_file_name("scores.csv");
    if run.header.strategy.is_per_practice() {
        let scores = score_run(&run, &ws.quality_model)
            .map_err(|e| runtime(format!("{}: {e}", run_path.display())))?;
        write_file(&target, &with_csv_header(&header, &scores_to_csv(&scores)))?;
        let undefined = scores.values().filter(|s| !s.is_defined()).count();
        emit(
            out,
            format!("{}: {} functions scored, {undefined} undefined -> {}", run_path.display(), scores.len(), target.display()),
        )
    } else {
        if !run.is_complete() {
            return Err(runtime(format!("{}: run is marked incomplete", run_path.display())));
        }
        write_file(&target, &estimates_csv(&header, &run))?;
        emit(out, format!("{}: {} estimated scores -> {}", run_path.display(), run.verdicts.len(), target.display()))
    }
}

fn score(ws: &Workspace, run: Option<&Path>, out: &mut dyn Write) -> Result<i32, CliError> {
    if let Some(path) = run {
        score_one(ws, path, out)?;
        return Ok(EXIT_OK);
    }
    let reference = trustlens_core::quality_model::reference_scores(&ws.truth, &ws.quality_model).map_err(runtime)?;
    let path = ws.out_dir.join("reference").join("scores.csv");
    write_file(&path, &with_csv_header(&header_comment(&[], ws.manifest.seed), &scores_to_csv(&reference)))?;
    let undefined = reference.values().filter(|s| !s.is_defined()).count();
    emit(out, format!("reference: {} functions scored, {undefined} undefined -> {}", reference.len(), path.display()))?;
    let mut failures = 0;
    for model in &ws.manifest.models {
        for &strategy in &ws.manifest.strategies {
            let path = ws.run_path(&model.model_id, strategy);
            if !path.exists() {
                continue;
            }
            if let Err(e) = score_one(ws, &path, out) {
                emit(out, format!("error: {e}"))?;
                failures += 1;
            }
        }
    }
    Ok(if failures > 0 { EXIT_RUNTIME } else { EXIT_OK })
}

// Evaluation.

pub struct MetricsRow {
    pub model_id: String,
    pub strategy: PromptStrategy,
    pub metrics: MacroMetrics,
    pub report: ConfusionReport,
}

pub struct MaeRow {
    pub model_id: String,
    pub strategy: PromptStrategy,
    /// `estimate` for direct score estimation, `labels+qm` for quality-model scores from verdicts.
    pub source: &'static str,
    pub mae: f64,
    pub n: usize,
    pub excluded: usize,
}

pub struct Evaluation {
    pub template_versions: Vec<String>,
    pub metrics: Vec<MetricsRow>,
    /// strategy → model → per-practice macro F1.
    pub heatmaps: BTreeMap<PromptStrategy, BTreeMap<String, Vec<Option<f64>>>>,
    pub mae: Vec<MaeRow>,
    pub boxplots: Vec<(String, BoxplotStats)>,
    pub separation: Vec<(String, SeparationReport)>,
    pub reference: BTreeMap<String, TrustScore>,
    pub pairing: Pairing,
    pub notes: Vec<String>,
    pub failed_parses: usize,
}

fn add_separation(
    eval: &mut Evaluation,
    group: &str,
    scores: &BTreeMap<String, TrustScore>,
) -> Result<(), CliError> {
    match separation_report(scores, &eval.pairing.pairs) {
        Ok(rep) => {
            eval.boxplots.push((format!("{group}:secure"), rep.secure));
            eval.boxplots.push((format!("{group}:vulnerable"), rep.vulnerable));
            for n in &rep.notes {
                eval.notes.push(format!("{group}: {n}"));
            }
            eval.separation.push((group.to_string(), rep));
        }
        Err(e) => eval.notes.push(format!("{group}: no separation test ({e})")),
    }
    Ok(())
}

pub fn evaluate(ws: &Workspace, allow_incomplete: bool) -> Result<Evaluation, CliError> {
    let reference = trustlens_core::quality_model::reference_scores(&ws.truth, &ws.quality_model).map_err(runtime)?;
    let reference_values: BTreeMap<String, Option<f64>> =
        reference.iter().map(|(k, s)| (k.clone(), s.value)).collect();
    let mut eval = Evaluation {
        template_versions: Vec::new(),
        metrics: Vec::new(),
        heatmaps: BTreeMap::new(),
        mae: Vec::new(),
        boxplots: Vec::new(),
        separation: Vec::new(),
        reference: reference.clone(),
        pairing: variant_pairs(&ws.corpus),
        notes: Vec::new(),
        failed_parses: 0,
    };
    add_separation(&mut eval, "reference", &reference)?;

    let mut strategies = ws.manifest.strategies.clone();
    strategies.sort();
    strategies.dedup();
    let mut versions = BTreeSet::new();
    for model in &ws.manifest.models {
        for &strategy in &strategies {
            let path = ws.run_path(&model.model_id, strategy);
            if !path.exists() {
                eval.notes.push(format!("{} {}: no run file", model.model_id, strategy.slug()));
                continue;
            }
            let run = AssessmentRun::load(&path).map_err(runtime)?;
            if !run.is_complete() {
                if !allow_incomplete {
                    return Err(runtime(format!(
                        "{} is incomplete ({} item errors); pass --allow-incomplete to evaluate it",
                        path.display(),
                        run.item_errors.len()
                    )));
                }
                eval.notes.push(format!(
                    "{} {}: incomplete run, {} item errors",
                    model.model_id,
                    strategy.slug(),
                    run.item_errors.len()
                ));
            }
            versions.insert(run.header.template_version.clone());
            let group = format!("{}/{}", model.model_id, strategy.slug());
            if strategy.is_per_practice() {
                eval.failed_parses += run.header.failed_parses;
                let predictions: BTreeMap<(String, PracticeId), Prediction> = run
                    .verdicts
                    .iter()
                    .filter_map(|v| v.practice_id.map(|p| ((v.function_id.clone(), p), v.metric_label())))
                    .collect();
                let truth: BTreeMap<(String, PracticeId), AdherenceLabel> = if run.is_complete() {
                    ws.truth.entries().clone()
                } else {
                    ws.truth
                        .entries()
                        .iter()
                        .filter(|(k, _)| predictions.contains_key(*k))
                        .map(|(k, v)| (k.clone(), *v))
                        .collect()
                };
                let report = confusion(&predictions, &truth).map_err(|e| runtime(format!("{group}: {e}")))?;
                let metrics = macro_metrics(&report.matrix).map_err(|e| runtime(format!("{group}: {e}")))?;
                eval.metrics.push(MetricsRow { model_id: model.model_id.clone(), strategy, metrics, report });

                let per_practice = if run.is_complete() {
                    confusion_by_practice(&predictions, &ws.truth).map_err(|e| runtime(format!("{group}: {e}")))?
                } else {
                    BTreeMap::new()
                };
                let row: Vec<Option<f64>> = PracticeId::all()
                    .map(|p| per_practice.get(&p).and_then(|r| macro_metrics(&r.matrix).ok()).map(|m| m.f1))
                    .collect();
                eval.heatmaps.entry(strategy).or_default().insert(model.model_id.clone(), row);

                if run.is_complete() {
                    let scores = score_label_table(&run.label_table(), &ws.quality_model).map_err(runtime)?;
                    let predicted: BTreeMap<String, Option<f64>> =
                        scores.iter().map(|(k, s)| (k.clone(), s.value)).collect();
                    if let Ok(m) = mae(&predicted, &reference_values) {
                        eval.mae.push(MaeRow {
                            model_id: model.model_id.clone(),
                            strategy,
                            source: "labels+qm",
                            mae: m.mae,
                            n: m.n,
                            excluded: m.excluded,
                        });
                    }
                    add_separation(&mut eval, &group, &scores)?;
                }
            } else {
                let estimates = run.score_map();
                let predicted: BTreeMap<String, Option<f64>> =
                    reference_values.keys().map(|k| (k.clone(), estimates.get(k).copied())).collect();
                match mae(&predicted, &reference_values) {
                    Ok(m) => eval.mae.push(MaeRow {
                        model_id: model.model_id.clone(),
                        strategy,
                        source: "estimate",
                        mae: m.mae,
                        n: m.n,
                        excluded: m.excluded,
                    }),
                    Err(e) => eval.notes.push(format!("{group}: no MAE ({e})")),
                }
                let values: Vec<f64> = estimates.values().copied().collect();
                if let Some(stats) = boxplot_stats(&values) {
                    eval.boxplots.push((format!("{group}:estimates"), stats));
                }
            }
        }
    }
    eval.template_versions = versions.into_iter().collect();
    Ok(eval)
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn method_name(m: MwMethod) -> &'static str {
    match m {
        MwMethod::Exact => "exact",
        MwMethod::NormalApprox => "normal-approx",
    }
}

pub fn band_flag(row: &MaeRow) -> &'static str {
    if row.source != "estimate" {
        "n/a"
    } else if mae_in_reported_band(row.mae) {
        "yes"
    } else {
        "no"
    }
}

fn write_eval(ws: &Workspace, eval: &Evaluation, out: &mut dyn Write) -> Result<(), CliError> {
    let dir = ws.out_dir.join("eval");
    let header = header_comment(&eval.template_versions, ws.manifest.seed);

    let mut metrics = String::from("model,strategy,macro_acc,balanced_acc,macro_prec,macro_rec,macro_f1,excluded\n");
    let mut confusion_csv = String::from("model,strategy,truth,pred_followed,pred_not_followed,pred_not_applicable\n");
    for row in &eval.metrics {
        let m = &row.metrics;
        let _ = writeln!(
            metrics,
            "{},{},{},{},{},{},{},{}",
            row.model_id,
            row.strategy.slug(),
            f6(m.accuracy),
            f6(m.balanced_accuracy),
            f6(m.precision),
            f6(m.recall),
            f6(m.f1),
            row.report.excluded
        );
        for label in AdherenceLabel::ALL {
            let c = row.report.matrix.counts[label.index()];
            let _ = writeln!(
                confusion_csv,
                "{},{},{},{},{},{}",
                row.model_id,
                row.strategy.slug(),
                label.name(),
                c[0],
                c[1],
                c[2]
            );
        }
    }
    write_file(&dir.join("metrics.csv"), &with_csv_header(&header, &metrics))?;
    write_file(&dir.join("confusion.csv"), &with_csv_header(&header, &confusion_csv))?;

    let practice_labels: Vec<String> = PracticeId::all().map(|p| p.to_string()).collect();
    for (strategy, rows) in &eval.heatmaps {
        let mut csv = String::from("model");
        for p in &practice_labels {
            let _ = write!(csv, ",p{p}");
        }
        csv.push('\n');
        for (model, values) in rows {
            csv.push_str(model);
            for v in values {
                csv.push(',');
                csv.push_str(&v.map(f6).unwrap_or_else(|| "NA".into()));
            }
            csv.push('\n');
        }
        let tv_header = header_comment(&[strategy.template_version()], ws.manifest.seed);
        let name = format!("heatmap_{}", strategy.slug());
        write_file(&dir.join(format!("{name}.csv")), &with_csv_header(&tv_header, &csv))?;
        let models: Vec<String> = rows.keys().cloned().collect();
        let values: Vec<Vec<Option<f64>>> = rows.values().cloned().collect();
        let title = format!("Per-practice macro F1, strategy {}", strategy.slug());
        write_file(
            &dir.join(format!("{name}.svg")),
            &svg::heatmap(&tv_header, &title, &models, &practice_labels, &values),
        )?;
    }

    let mut mae_csv = String::from("model,strategy,source,mae,n,excluded,in_reported_band\n");
    for row in &eval.mae {
        let _ = writeln!(
            mae_csv,
            "{},{},{},{},{},{},{}",
            row.model_id,
            row.strategy.slug(),
            row.source,
            f6(row.mae),
            row.n,
            row.excluded,
            band_flag(row)
        );
    }
    write_file(&dir.join("mae.csv"), &with_csv_header(&header, &mae_csv))?;

    let mut box_csv = String::from("group,min,q1,median,q3,max,n\n");
    for (group, s) in &eval.boxplots {
        let _ = writeln!(
            box_csv,
            "{group},{},{},{},{},{},{}",
            f6(s.min),
            f6(s.q1),
            f6(s.median),
            f6(s.q3),
            f6(s.max),
            s.n
        );
    }
    write_file(&dir.join("boxplots.csv"), &with_csv_header(&header, &box_csv))?;
    write_file(
        &dir.join("boxplots.svg"),
        &svg::boxplots(&header, "Trust scores by variant group", &eval.boxplots),
    )?;

    let mut sep = String::from(
        "group,secure_median,vulnerable_median,u_statistic,p_value,method,iqr_overlap,n_secure,n_vulnerable\n",
    );
    for (group, r) in &eval.separation {
        let _ = writeln!(
            sep,
            "{group},{},{},{},{:.6e},{},{},{},{}",
            f6(r.secure.median),
            f6(r.vulnerable.median),
            r.test.u_statistic,
            r.test.p_value,
            method_name(r.test.method),
            r.iqr_overlap,
            r.test.n1,
            r.test.n2
        );
    }
    write_file(&dir.join("separation.csv"), &with_csv_header(&header, &sep))?;

    emit(out, format!("evaluated {} classification runs, {} MAE rows -> {}", eval.metrics.len(), eval.mae.len(), dir.display()))?;
    for note in &eval.notes {
        emit(out, format!("note: {note}"))?;
    }
    Ok(())
}

fn render_report(ws: &Workspace, eval: &Evaluation) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "<!-- {} -->", header_comment(&eval.template_versions, ws.manifest.seed));
    md.push_str("# Trustworthiness assessment report\n\n");
    let stats = ws.corpus.stats();
    let _ = writeln!(
        md,
        "Corpus: {} functions, {} variant pairs. Catalog `{}`. Quality model: r = {}, {}.\n",
        stats.functions,
        eval.pairing.pairs.len(),
        ws.catalog.version(),
        ws.quality_model.exponent_r,
        ws.quality_model.zero_mode.describe()
    );

    md.push_str("## Classification metrics\n\n");
    md.push_str("Accuracy is overall accuracy (trace / total); balanced accuracy is the mean per-class recall. ");
    md.push_str("Precision, recall and F1 are macro averages over the three labels.\n\n");
    md.push_str("| model | strategy | accuracy | balanced acc. | macro P | macro R | macro F1 | excluded |\n");
    md.push_str("|---|---|---|---|---|---|---|---|\n");
    for row in &eval.metrics {
        let m = &row.metrics;
        let _ = writeln!(
            md,
            "| {} | {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {} |",
            row.model_id,
            row.strategy.slug(),
            m.accuracy,
            m.balanced_accuracy,
            m.precision,
            m.recall,
            m.f1,
            row.report.excluded
        );
    }
    let _ = writeln!(
        md,
        "\nUnparseable responses: {}. They count as NotFollowed when scoring and are excluded from the metrics above.\n",
        eval.failed_parses
    );

    md.push_str("## Score error (MAE against reference scores)\n\n");
    md.push_str("| model | strategy | source | MAE | n | within 0.40-0.60 band |\n|---|---|---|---|---|---|\n");
    for row in &eval.mae {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {:.3} | {} | {} |",
            row.model_id,
            row.strategy.slug(),
            row.source,
            row.mae,
            row.n,
            band_flag(row)
        );
    }

    md.push_str("\n## Secure vs vulnerable separation\n\n");
    md.push_str("| group | secure median | vulnerable median | U | p (two-sided) | method | IQR overlap |\n");
    md.push_str("|---|---|---|---|---|---|---|\n");
    for (group, r) in &eval.separation {
        let _ = writeln!(
            md,
            "| {group} | {:.4} | {:.4} | {} | {:.3e} | {} | {} |",
            r.secure.median,
            r.vulnerable.median,
            r.test.u_statistic,
            r.test.p_value,
            method_name(r.test.method),
            if r.iqr_overlap { "yes" } else { "no" }
        );
    }
    md.push_str("\nScores are relative indicators for ranking and screening, not compliance verdicts.\n");
    if !eval.notes.is_empty() {
        md.push_str("\n## Notes\n\n");
        for n in &eval.notes {
            let _ = writeln!(md, "- {n}");
        }
    }
    md.push_str("\n## Files\n\n");
    for strategy in eval.heatmaps.keys() {
        let _ = writeln!(md, "- `eval/heatmap_{}.svg`", strategy.slug());
    }
    md.push_str("- `eval/boxplots.svg`\n");
    md
}

/// Run file paths for every manifest model and strategy, whether or not they exist.
pub fn expected_run_files(ws: &Workspace) -> Vec<PathBuf> {
    let mut v = Vec::new();
    for m in &ws.manifest.models {
        for &s in &ws.manifest.strategies {
            v.push(ws.out_dir.join("runs").join(model_slug(&m.model_id)).join(s.slug()).join("run.jsonl"));
        }
    }
    v
}
