use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaug::acc::{gamma_table, run_variants, summary_header, summary_record, GAMMA_PERIODS};
use adaug::config::{
    load_quad_suite, load_scenario, AccSection, PlantName, QuadSuiteConfig, ScenarioConfig,
};
use adaug::csvio::{
    create_file, read_numeric_csv, write_acc_trajectory, write_table, write_trajectory,
};
use adaug::error::{HarnessError, Result};
use adaug::jsonio::save_ddp_solution;
use adaug::plant::{solve_quadrotor, Plant};
use adaug::quad::{run_quad_suites, QuadReport};
use adaug::scenarios::{sample_scenarios, Scenario};
use adaug::svg::{line_plot, Series};
use adaug::sweep::{run_sweep, Experiment, SweepOptions, Variant};
use adaug_core::safe::acc::{AccScenarioConfig, AccVariant};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "adaug",
    version,
    about = "L1 adaptive augmentation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario or suite file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "AA_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Run only the un-augmented baseline.
    #[arg(long)]
    no_l1: bool,
    /// Run a single variant.
    #[arg(long)]
    variant: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the first sampled scenario of a config and write its trajectories.
    Simulate(Common),
    /// Run every scenario of a config for each variant.
    Sweep(Common),
    /// Quadrotor propeller, mass/inertia, wind and joint suites.
    QuadSuite(Common),
    /// Adaptive cruise control safety scenario.
    Acc(Common),
    /// Estimation-error bound for decades of sampling periods.
    GammaTable(Common),
    /// Line plot of CSV columns as SVG.
    Plot(PlotArgs),
    /// Solve the quadrotor navigation problem and store the solution.
    DdpSolve(Common),
}

#[derive(Args)]
struct PlotArgs {
    /// Input CSV.
    input: PathBuf,
    /// Column for the horizontal axis.
    #[arg(long, default_value = "t")]
    x: String,
    /// Columns to plot; defaults to every other numeric column.
    #[arg(long, value_delimiter = ',')]
    y: Vec<String>,
    #[arg(long)]
    title: Option<String>,
    /// Output SVG file.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(c) => simulate(&c),
        Command::Sweep(c) => sweep(&c),
        Command::QuadSuite(c) => quad_suite(&c),
        Command::Acc(c) => acc(&c),
        Command::GammaTable(c) => gamma(&c),
        Command::Plot(p) => plot(&p),
        Command::DdpSolve(c) => ddp_solve(&c),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn scenario_config(c: &Common) -> Result<ScenarioConfig> {
    let path = c
        .config
        .as_deref()
        .ok_or_else(|| HarnessError::config("--config is required"))?;
    let mut cfg = load_scenario(path)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if c.no_l1 {
        cfg.l1.enabled = false;
    }
    Ok(cfg)
}

fn variants(c: &Common, cfg: &ScenarioConfig) -> Result<Vec<Variant>> {
    let only = c.variant.as_deref().map(Variant::parse).transpose()?;
    Ok(SweepOptions::variants_for(cfg, c.no_l1, only))
}

fn simulate(c: &Common) -> Result<bool> {
    let cfg = scenario_config(c)?;
    let variants = variants(c, &cfg)?;
    let scenario = sample_scenarios(&cfg, cfg.seed)
        .into_iter()
        .next()
        .unwrap_or_else(Scenario::nominal);
    let exp = Experiment::new(cfg)?;
    let mut ok = true;
    for v in variants {
        let traj = exp.run(&scenario, v)?;
        let path = c.out.join(format!("{}_{}.csv", scenario.id, v.name()));
        write_trajectory(create_file(&path)?, &traj)?;
        let m = exp.score(&traj, None);
        println!(
            "{} {}: reward {:.6} final tracking error {:.6}{}",
            scenario.id,
            v.name(),
            m.accumulated_reward,
            m.final_tracking_error,
            m.failure_time
                .map_or(String::new(), |t| format!(" FAILED at t = {t}"))
        );
        ok &= !traj.failed();
    }
    Ok(ok)
}

fn sweep(c: &Common) -> Result<bool> {
    let cfg = scenario_config(c)?;
    let opts = SweepOptions {
        jobs: c.jobs,
        variants: variants(c, &cfg)?,
        episode_dir: Some(c.out.join("episodes")),
    };
    let res = run_sweep(&cfg, cfg.seed, &opts)?;
    let summary = c.out.join("summary.csv");
    res.write_summary(&summary)?;
    for v in &opts.variants {
        if let Some(mean) = res.mean_normalized(*v, |_| true) {
            println!("{}: mean normalized reward {mean:.4}", v.name());
        }
    }
    let failed = res.rows.iter().filter(|r| r.failed()).count();
    println!(
        "{} episodes, {failed} failed; summary in {}",
        res.rows.len(),
        summary.display()
    );
    Ok(failed == 0)
}

fn quad_suite(c: &Common) -> Result<bool> {
    let mut cfg = match &c.config {
        Some(p) => load_quad_suite(p)?,
        None => QuadSuiteConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let report: QuadReport = run_quad_suites(&cfg, c.jobs)?;
    write_table(
        &c.out.join("quad_episodes.csv"),
        &QuadReport::header(),
        &report.records(),
    )?;
    write_table(
        &c.out.join("quad_summary.csv"),
        &QuadReport::summary_header(),
        &report.summary_records(),
    )?;
    println!(
        "ddp: cost {:.4} after {} iterations (converged: {}), ideal final distance to target {:.4}",
        report.ddp_cost, report.ddp_iterations, report.ddp_converged, report.ideal_target_error
    );
    for s in &report.summaries {
        println!(
            "{:>13}: median final error {:.4} without L1, {:.4} with L1",
            s.suite.name(),
            s.median_plain,
            s.median_l1
        );
    }
    Ok(report.rows.iter().all(|r| r.failure_time.is_none()))
}

fn acc_config(c: &Common) -> Result<AccScenarioConfig> {
    let mut cfg = AccScenarioConfig::default();
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        AccSection::from_toml(&text)?.apply(&mut cfg);
    }
    Ok(cfg)
}

fn acc(c: &Common) -> Result<bool> {
    let cfg = acc_config(c)?;
    let variants = match &c.variant {
        Some(v) => vec![AccVariant::parse(v)?],
        None => AccVariant::ALL.to_vec(),
    };
    let runs = run_variants(&cfg, &variants)?;
    let mut records = Vec::new();
    for t in &runs {
        write_acc_trajectory(
            create_file(&c.out.join(format!("acc_{}.csv", t.variant.name())))?,
            t,
        )?;
        println!(
            "{:>18}: min h {:.4}, estimate error sup {}, gamma {:.4}",
            t.variant.name(),
            t.min_h,
            t.estimate_error_sup
                .map_or("-".into(), |e| format!("{e:.4}")),
            t.gamma
        );
        records.push(summary_record(t));
    }
    write_table(&c.out.join("acc_summary.csv"), &summary_header(), &records)?;
    Ok(true)
}

fn gamma(c: &Common) -> Result<bool> {
    let cfg = acc_config(c)?;
    let rows = gamma_table(&cfg, &GAMMA_PERIODS)?;
    println!("{:>10}  {:>12}", "T_s", "gamma");
    for (t, g) in &rows {
        println!("{t:>10e}  {g:>12.6}");
    }
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|(t, g)| vec![t.to_string(), g.to_string()])
        .collect();
    write_table(
        &c.out.join("gamma_table.csv"),
        &["t_s".into(), "gamma".into()],
        &records,
    )?;
    Ok(true)
}

fn plot(p: &PlotArgs) -> Result<bool> {
    let table = read_numeric_csv(&p.input)?;
    let x = table
        .column(&p.x)
        .ok_or_else(|| {
            HarnessError::config(format!(
                "{}: no numeric column {:?}",
                p.input.display(),
                p.x
            ))
        })?
        .to_vec();
    let names: Vec<String> = if p.y.is_empty() {
        table
            .header
            .iter()
            .filter(|h| **h != p.x)
            .cloned()
            .collect()
    } else {
        p.y.clone()
    };
    let series = names
        .iter()
        .map(|name| {
            let y = table.column(name).ok_or_else(|| {
                HarnessError::config(format!("{}: no numeric column {name:?}", p.input.display()))
            })?;
            Ok(Series {
                name: name.clone(),
                x: x.clone(),
                y: y.to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let title = p.title.clone().unwrap_or_else(|| file_stem(&p.input));
    let svg = line_plot(&title, &p.x, "", &series);
    if let Some(dir) = p.out.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(&p.out, svg).map_err(|e| HarnessError::io(&p.out, e))?;
    Ok(true)
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

fn ddp_solve(c: &Common) -> Result<bool> {
    let cfg = match &c.config {
        Some(_) => scenario_config(c)?,
        None => ScenarioConfig::new(PlantName::Quadrotor),
    };
    let Plant::Quadrotor(quad) = Plant::nominal(&cfg)? else {
        return Err(HarnessError::config("ddp-solve needs a quadrotor config"));
    };
    let (_, sol) = solve_quadrotor(&quad, &cfg.ddp)?;
    let path = c.out.join("ddp_solution.json");
    save_ddp_solution(&path, &sol)?;
    let end = sol
        .x_nominal
        .last()
        .map(|x| x.rows(0, 3).into_owned())
        .unwrap_or_default();
    println!(
        "cost {:.6}, {} iterations, converged {}, final position ({:.4}, {:.4}, {:.4}); saved {}",
        sol.cost,
        sol.iterations,
        sol.converged,
        end[0],
        end[1],
        end[2],
        path.display()
    );
    Ok(sol.converged)
}
