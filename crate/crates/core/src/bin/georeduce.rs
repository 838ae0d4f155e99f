use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use georeduce::clustering::{
    cluster_oip_spread, compare_labelings, dbscan, equi_width_histogram, histogram_counts, Labeling,
};
use georeduce::config::ExperimentConfig;
use georeduce::genome::{ensemble_matrix, GeneLibrary, ModelId};
use georeduce::io::{self as gio, fmt_real};
use georeduce::metric::{Euclidean, PredictedMetric};
use georeduce::oilfield::{evaluate_ensemble, generate_gene_library, Oracle};
use georeduce::pipeline::{draw_sample, reduce_ensemble, ReductionReport};
use georeduce::regress::{
    error_metrics, sample_size_sweep, train, Model, Predictor, RegressorKind,
};
use georeduce::sofm::{self, SofmGrid};
use georeduce::{Error, Result};

#[derive(Parser)]
#[command(
    name = "georeduce",
    version,
    about = "Geological model ensemble reduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; defaults apply to omitted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory. Nothing is written outside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WithRegressor {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "gb")]
    regressor: RegressorKind,
}

#[derive(Subcommand)]
enum Command {
    /// Write the ensemble genomes and their OIP labels.
    Generate(Common),
    /// Write OIP labels only.
    Evaluate(Common),
    /// Equi-width histogram clustering of true OIP.
    ClusterHistogram(Common),
    /// DBSCAN on genomes with the Euclidean metric.
    ClusterDbscan(Common),
    /// Euclidean-metric SOFM on genomes.
    FitSofm(Common),
    /// Train a regressor on a random sample and score it on the rest.
    Train(WithRegressor),
    /// Hold-out error against training sample size.
    Sweep(WithRegressor),
    /// Semi-supervised reduction with a predicted-OIP metric.
    Reduce(Common),
    /// Summarise an existing report.json.
    Report(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Generate(c)
            | Command::Evaluate(c)
            | Command::ClusterHistogram(c)
            | Command::ClusterDbscan(c)
            | Command::FitSofm(c)
            | Command::Reduce(c)
            | Command::Report(c) => c,
            Command::Train(r) | Command::Sweep(r) => &r.common,
        }
    }
}

/// Exclusive claim on an output directory, released on drop.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".georeduce.lock");
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    Error::Io(std::io::Error::new(
                        e.kind(),
                        format!(
                            "{} exists; another run is using this directory",
                            path.display()
                        ),
                    ))
                } else {
                    Error::Io(e)
                }
            })?;
        Ok(DirLock { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn plot(&self, name: &str) -> PathBuf {
        self.out.join("plotdata").join(name)
    }

    fn library(&self) -> GeneLibrary {
        generate_gene_library(&self.cfg.oilfield)
    }
}

fn oip_values(lib: &GeneLibrary, ctx: &Ctx) -> Vec<f64> {
    evaluate_ensemble(lib, &ctx.cfg.oilfield)
        .iter()
        .map(|l| l.oip)
        .collect()
}

fn write_oip_histogram(ctx: &Ctx, oip: &[f64]) -> Result<()> {
    let hist = equi_width_histogram(oip, ctx.cfg.n_bins_reference)?;
    let counts = histogram_counts(oip, &hist);
    gio::write_rows(
        &ctx.plot("oip_histogram.csv"),
        &["bin", "lower", "upper", "count"].map(String::from),
        counts.iter().enumerate().map(|(b, n)| {
            [
                b.to_string(),
                fmt_real(hist.edges[b]),
                fmt_real(hist.edges[b + 1]),
                n.to_string(),
            ]
        }),
    )
}

fn write_scatter(path: &Path, oip: &[f64], labeling: &Labeling) -> Result<()> {
    gio::write_rows(
        path,
        &["id", "oip", "cluster"].map(String::from),
        labeling
            .to_signed()
            .iter()
            .enumerate()
            .map(|(i, c)| [i.to_string(), fmt_real(oip[i]), c.to_string()]),
    )
}

fn write_sofm_scatter(
    path: &Path,
    grid: &SofmGrid,
    neurons: &[usize],
    labeling: &Labeling,
    columns: &[(&str, &[f64])],
) -> Result<()> {
    let mut header: Vec<String> = vec!["id".into(), "row".into(), "col".into(), "cluster".into()];
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    gio::write_rows(
        path,
        &header,
        neurons.iter().enumerate().map(|(i, &n)| {
            let (r, c) = grid.position(n);
            let cluster = labeling.assignments()[i].map_or(-1, i64::from);
            [
                i.to_string(),
                r.to_string(),
                c.to_string(),
                cluster.to_string(),
            ]
            .into_iter()
            .chain(columns.iter().map(move |(_, v)| fmt_real(v[i])))
            .collect::<Vec<_>>()
        }),
    )
}

fn spread_line(name: &str, labeling: &Labeling, oip: &[f64]) -> Result<String> {
    let s = cluster_oip_spread(labeling, oip)?;
    Ok(format!(
        "{name}: {} clusters, {} noise, mean OIP spread {:.4e}",
        labeling.n_clusters(),
        labeling.n_noise(),
        s.mean_range
    ))
}

/// Trains on the configured sample and returns the model with predictions
/// for every genome.
fn train_on_sample(
    ctx: &Ctx,
    kind: RegressorKind,
    genomes: &[Vec<f64>],
    oip: &[f64],
) -> Result<(Vec<ModelId>, Model, Vec<f64>)> {
    let ids = draw_sample(ctx.cfg.seed, ctx.cfg.sample_fraction, genomes.len())?;
    let x: Vec<Vec<f64>> = ids.iter().map(|id| genomes[id.get()].clone()).collect();
    let y: Vec<f64> = ids.iter().map(|id| oip[id.get()]).collect();
    let model = train(kind, &x, &y, &ctx.cfg.train_params())?;
    let predicted = genomes.par_iter().map(|g| model.predict_row(g)).collect();
    Ok((ids, model, predicted))
}

fn write_model(ctx: &Ctx, model: &Model) -> Result<PathBuf> {
    let (name, text) = match model {
        Model::Gb(m) => ("model_gb.txt", m.to_text()),
        Model::Mlp(m) => ("model_mlp.txt", m.to_text()),
    };
    let path = ctx.path(name);
    fs::write(&path, text)?;
    Ok(path)
}

fn write_predicted_vs_true(
    ctx: &Ctx,
    sample: &[ModelId],
    oip: &[f64],
    predicted: &[f64],
) -> Result<()> {
    let mut in_sample = vec![false; oip.len()];
    for id in sample {
        in_sample[id.get()] = true;
    }
    gio::write_rows(
        &ctx.plot("predicted_vs_true.csv"),
        &["id", "in_sample", "true_oip", "predicted_oip"].map(String::from),
        (0..oip.len()).map(|i| {
            [
                i.to_string(),
                u8::from(in_sample[i]).to_string(),
                fmt_real(oip[i]),
                fmt_real(predicted[i]),
            ]
        }),
    )
}

fn holdout(sample: &[ModelId], oip: &[f64], predicted: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut in_sample = vec![false; oip.len()];
    for id in sample {
        in_sample[id.get()] = true;
    }
    (0..oip.len())
        .filter(|&i| !in_sample[i])
        .map(|i| (oip[i], predicted[i]))
        .unzip()
}

fn generate(ctx: &Ctx) -> Result<()> {
    let lib = ctx.library();
    let genomes = ensemble_matrix(&lib);
    let oip = oip_values(&lib, ctx);
    gio::write_genomes(&ctx.path("genomes.csv"), &genomes)?;
    gio::write_labels(&ctx.path("labels.csv"), &oip)?;
    write_oip_histogram(ctx, &oip)?;
    println!("wrote {} genomes and labels", genomes.len());
    Ok(())
}

fn evaluate(ctx: &Ctx) -> Result<()> {
    let oip = oip_values(&ctx.library(), ctx);
    gio::write_labels(&ctx.path("labels.csv"), &oip)?;
    write_oip_histogram(ctx, &oip)?;
    let (min, max) = oip
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    println!(
        "evaluated {} models, OIP in [{min:.4e}, {max:.4e}]",
        oip.len()
    );
    Ok(())
}

fn cluster_histogram(ctx: &Ctx) -> Result<()> {
    let oip = oip_values(&ctx.library(), ctx);
    let hist = equi_width_histogram(&oip, ctx.cfg.n_bins_reference)?;
    gio::write_clusters(&ctx.path("clusters.csv"), &hist.labeling)?;
    write_scatter(&ctx.plot("gold_scatter.csv"), &oip, &hist.labeling)?;
    write_oip_histogram(ctx, &oip)?;
    println!("{}", spread_line("histogram", &hist.labeling, &oip)?);
    Ok(())
}

fn cluster_dbscan(ctx: &Ctx) -> Result<()> {
    let lib = ctx.library();
    let genomes = ensemble_matrix(&lib);
    let oip = oip_values(&lib, ctx);
    let labeling = dbscan(&genomes, ctx.cfg.dbscan, &Euclidean);
    gio::write_clusters(&ctx.path("clusters.csv"), &labeling)?;
    write_scatter(&ctx.plot("dbscan_scatter.csv"), &oip, &labeling)?;
    let gold = equi_width_histogram(&oip, ctx.cfg.n_bins_reference)?.labeling;
    if labeling.n_clusters() > 0 {
        println!("{}", spread_line("dbscan", &labeling, &oip)?);
    } else {
        println!("dbscan: no clusters, {} noise", labeling.n_noise());
    }
    println!("rand vs gold: {:.6}", compare_labelings(&labeling, &gold)?);
    Ok(())
}

fn fit_sofm(ctx: &Ctx) -> Result<()> {
    let lib = ctx.library();
    let genomes = ensemble_matrix(&lib);
    let oip = oip_values(&lib, ctx);
    let grid = sofm::fit(&genomes, &ctx.cfg.sofm, &Euclidean)?;
    let neurons = sofm::assign_neurons(&grid, &genomes, &Euclidean);
    let labeling = sofm::assign_clusters(&grid, &genomes, &Euclidean);
    gio::write_grid(&ctx.path("grid.csv"), &grid)?;
    gio::write_clusters(&ctx.path("clusters.csv"), &labeling)?;
    // pseudo-models are not ensemble members, so they are scored by a regressor
    let (_, model, _) = train_on_sample(ctx, RegressorKind::Gb, &genomes, &oip)?;
    let neuron_values = sofm::neuron_oip(&grid, |w| model.predict_row(w));
    gio::write_neuron_oip(&ctx.plot("sofm_neuron_oip.csv"), &grid, &neuron_values)?;
    write_sofm_scatter(
        &ctx.plot("sofm_scatter.csv"),
        &grid,
        &neurons,
        &labeling,
        &[("oip", &oip)],
    )?;
    let gold = equi_width_histogram(&oip, ctx.cfg.n_bins_reference)?.labeling;
    println!("{}", spread_line("sofm", &labeling, &oip)?);
    println!("rand vs gold: {:.6}", compare_labelings(&labeling, &gold)?);
    Ok(())
}

fn train_cmd(ctx: &Ctx, kind: RegressorKind) -> Result<()> {
    let lib = ctx.library();
    let genomes = ensemble_matrix(&lib);
    let oip = oip_values(&lib, ctx);
    let (sample, model, predicted) = train_on_sample(ctx, kind, &genomes, &oip)?;
    let path = write_model(ctx, &model)?;
    write_predicted_vs_true(ctx, &sample, &oip, &predicted)?;
    let (t, p) = holdout(&sample, &oip, &predicted);
    let m = error_metrics(&t, &p)?;
    println!(
        "trained on {} models, wrote {}",
        sample.len(),
        path.display()
    );
    println!(
        "hold-out ({} models): mae {:.4e} rmse {:.4e}",
        t.len(),
        m.mae,
        m.rmse
    );
    Ok(())
}

fn sweep(ctx: &Ctx, kind: RegressorKind) -> Result<()> {
    let lib = ctx.library();
    let genomes = ensemble_matrix(&lib);
    let oip = oip_values(&lib, ctx);
    let result = sample_size_sweep(
        &genomes,
        &oip,
        &ctx.cfg.sweep,
        kind,
        &ctx.cfg.train_params(),
    )?;
    gio::write_sweep(&ctx.path("sweep.csv"), &result)?;
    gio::write_rows(
        &ctx.plot("sweep_curve.csv"),
        &["fraction", "rmse_mean"].map(String::from),
        result
            .rows
            .iter()
            .map(|r| [r.fraction.to_string(), fmt_real(r.rmse_mean)]),
    )?;
    for r in &result.rows {
        println!("{:.2}  {:.4e}", r.fraction, r.rmse_mean);
    }
    Ok(())
}

fn reduce(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg.reduction();
    let lib = generate_gene_library(&cfg.oilfield);
    let genomes = ensemble_matrix(&lib);
    let oracle = Oracle::new(&lib, &cfg.oilfield);
    let r = reduce_ensemble(&cfg, &genomes, &oracle)?;
    fs::write(ctx.path("report.json"), r.report.to_json())?;
    fs::write(ctx.path("model_gb.txt"), r.blind.model.to_text())?;
    gio::write_grid(&ctx.path("grid.csv"), &r.blind.grid)?;
    gio::write_clusters(&ctx.path("clusters.csv"), &r.blind.labeling)?;

    let metric = PredictedMetric::new(&r.blind.model);
    let neurons = sofm::assign_neurons(&r.blind.grid, &genomes, &metric);
    let neuron_values = sofm::neuron_oip(&r.blind.grid, |w| r.blind.model.predict_row(w));
    gio::write_neuron_oip(
        &ctx.plot("semi_neuron_oip.csv"),
        &r.blind.grid,
        &neuron_values,
    )?;
    write_sofm_scatter(
        &ctx.plot("semi_scatter.csv"),
        &r.blind.grid,
        &neurons,
        &r.blind.labeling,
        &[
            ("true_oip", &r.truth),
            ("predicted_oip", &r.blind.predicted),
        ],
    )?;
    write_predicted_vs_true(ctx, &r.blind.sample_ids, &r.truth, &r.blind.predicted)?;
    print_summary(&r.report);
    Ok(())
}

fn report(ctx: &Ctx) -> Result<()> {
    let path = ctx.path("report.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    print_summary(&ReductionReport::from_json(&text)?);
    Ok(())
}

fn print_summary(r: &ReductionReport) {
    println!("models:                 {}", r.n_models);
    println!("evaluated sample:       {}", r.sample_ids.len());
    println!(
        "representatives:        {} ({:.3}% of ensemble)",
        r.representatives.len(),
        100.0 * r.reduction_ratio
    );
    println!(
        "hold-out mae / rmse:    {:.4e} / {:.4e}",
        r.holdout_error.mae, r.holdout_error.rmse
    );
    println!(
        "rand vs gold:           {:.6} (euclidean sofm {:.6})",
        r.rand_vs_gold, r.euclidean_sofm_rand_vs_gold
    );
    println!("rand vs euclidean sofm: {:.6}", r.rand_vs_euclidean_sofm);
    println!(
        "mean true OIP spread:   {:.4e} (euclidean sofm {:.4e}, gold {:.4e})",
        r.true_spread.mean_range,
        r.euclidean_sofm_true_spread.mean_range,
        r.gold_true_spread.mean_range
    );
}

fn run(cli: Cli) -> Result<()> {
    let common = cli.command.common();
    let cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let _lock = match cli.command {
        Command::Report(_) => None,
        _ => Some(DirLock::acquire(&common.out)?),
    };
    let ctx = Ctx {
        cfg,
        out: common.out.clone(),
    };
    match &cli.command {
        Command::Generate(_) => generate(&ctx),
        Command::Evaluate(_) => evaluate(&ctx),
        Command::ClusterHistogram(_) => cluster_histogram(&ctx),
        Command::ClusterDbscan(_) => cluster_dbscan(&ctx),
        Command::FitSofm(_) => fit_sofm(&ctx),
        Command::Train(r) => train_cmd(&ctx, r.regressor),
        Command::Sweep(r) => sweep(&ctx, r.regressor),
        Command::Reduce(_) => reduce(&ctx),
        Command::Report(_) => report(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("georeduce: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Io(_) => 3,
                _ => 1,
            })
        }
    }
}
