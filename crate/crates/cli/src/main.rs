use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rdsmdr::bootstrap::{bootstrap, BootstrapConfig, BootstrapMethod};
use rdsmdr::estimators::{
    DataMode, EstimateReport, Estimation, EstimationFrame, EstimatorKind, HomogeneousPolicy,
    RecruitmentFits,
};
use rdsmdr::harness::ingest::{ingest, sensitivity_transform, IngestOptions, SensitivityTransform};
use rdsmdr::harness::scenario::{
    all_scenarios, run_scenario, summary_csv, wide_table_csv, ScenarioConfig, ScenarioResult,
    TableMetric,
};
use rdsmdr::inference::{fit_dr, fit_mdr, FitOptions, FitResult};
use rdsmdr::io::{
    from_json, parse_sample_csv, parse_survey_csv, parse_tie_table_csv, read_population, to_json,
    write_edges_csv, write_nodes_csv, write_sample_csv,
};
use rdsmdr::netgen::{HomophilyLevel, PopulationRecipe};
use rdsmdr::recruitment::{scenario_covariates, CovariateSpec, MdrLevel, RecruitmentModel};
use rdsmdr::rng::from_seed;
use rdsmdr::sampler::{run_rds, RdsSample, SamplingDesign};
use rdsmdr::{Error, Result};

#[derive(Parser)]
#[command(
    name = "rdsmdr",
    version,
    about = "Respondent-driven sampling under multivariate differential recruitment"
)]
struct Cli {
    /// Random seed for stochastic commands.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format for reports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic population and write nodes.csv and edges.csv.
    Generate(GenerateArgs),
    /// Draw an RDS sample from a population and write members.csv and alters.csv.
    Sample(SampleArgs),
    /// Fit recruitment coefficients by maximum likelihood.
    Fit(FitArgs),
    /// Prevalence estimates for a sample.
    Estimate(EstimateArgs),
    /// Bootstrap standard errors and confidence intervals.
    Bootstrap(BootstrapArgs),
    /// Run simulation scenarios.
    Scenario(ScenarioArgs),
    /// Repair a raw survey and write an estimation-ready sample.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Population recipe JSON; overrides --homophily and --n.
    #[arg(long)]
    recipe: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Homophily::None)]
    homophily: Homophily,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Homophily {
    None,
    Moderate,
    High,
}

impl From<Homophily> for HomophilyLevel {
    fn from(h: Homophily) -> Self {
        match h {
            Homophily::None => HomophilyLevel::None,
            Homophily::Moderate => HomophilyLevel::Moderate,
            Homophily::High => HomophilyLevel::High,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mdr {
    None,
    Moderate,
    High,
}

impl From<Mdr> for MdrLevel {
    fn from(m: Mdr) -> Self {
        match m {
            Mdr::None => MdrLevel::None,
            Mdr::Moderate => MdrLevel::Moderate,
            Mdr::High => MdrLevel::High,
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    nodes: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    /// Tie-level attribute table, `NAME=PATH`; may be repeated.
    #[arg(long = "tie-table")]
    tie_tables: Vec<String>,
    /// Recruitment model JSON; overrides --mdr.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mdr::None)]
    mdr: Mdr,
    /// Sampling design JSON.
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SampleInput {
    #[arg(long)]
    members: PathBuf,
    #[arg(long)]
    alters: Option<PathBuf>,
}

impl SampleInput {
    fn load(&self) -> Result<RdsSample> {
        let members = read(&self.members)?;
        let alters = self.alters.as_deref().map(read).transpose()?;
        parse_sample_csv(&members, alters.as_deref())
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: SampleInput,
    /// Covariate list JSON (default: recruit age, outcome, their product, age gap).
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Fit a single-attribute DR model on this binary attribute instead.
    #[arg(long)]
    dr: Option<String>,
    /// Standardize covariates during optimization.
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelInputs {
    /// Covariate list JSON for the MDR estimators.
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Previously written MDR fit; refitted when absent.
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Binary attribute driving the DR estimators.
    #[arg(long, default_value = "z")]
    dr_attr: String,
    /// DR intensity; fitted when absent.
    #[arg(long)]
    dr_phi: Option<f64>,
    /// Comma-separated estimators (vh, sh, lu, dr-ii, dr-ego, mdr-ii, mdr-ego).
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "vh,lu,dr-ii,dr-ego,mdr-ii,mdr-ego"
    )]
    estimators: Vec<String>,
    /// Return 0 or 1 for single-outcome samples instead of "undefined".
    #[arg(long)]
    limit_homogeneous: bool,
}

impl ModelInputs {
    fn kinds(&self) -> Result<Vec<EstimatorKind>> {
        self.estimators.iter().map(|s| s.parse()).collect()
    }

    fn policy(&self) -> HomogeneousPolicy {
        if self.limit_homogeneous {
            HomogeneousPolicy::Limit
        } else {
            HomogeneousPolicy::Undefined
        }
    }

    /// Fits only what the requested estimators need.
    fn fits(&self, sample: &RdsSample, kinds: &[EstimatorKind]) -> Result<RecruitmentFits> {
        let specs = load_covariates(self.covariates.as_deref())?;
        let mut fits = RecruitmentFits {
            dr_attr: self.dr_attr.clone(),
            mdr_specs: specs,
            ..Default::default()
        };
        if kinds
            .iter()
            .any(|k| matches!(k, EstimatorKind::DrIi | EstimatorKind::DrEgo))
        {
            fits.dr_phi = Some(match self.dr_phi {
                Some(p) => p,
                None => fit_dr(sample, &self.dr_attr)?
                    .phi_hat
                    .expect("DR fits report phi"),
            });
        }
        if kinds
            .iter()
            .any(|k| matches!(k, EstimatorKind::MdrIi | EstimatorKind::MdrEgo))
        {
            let fit: FitResult = match &self.fit {
                Some(p) => from_json(&read(p)?)?,
                None => fit_mdr(
                    sample,
                    &fits.mdr_specs,
                    &FitOptions {
                        standardize: true,
                        ..Default::default()
                    },
                )?,
            };
            let names: Vec<&str> = fits.mdr_specs.iter().map(|s| s.name.as_str()).collect();
            if fit
                .covariates
                .iter()
                .map(String::as_str)
                .ne(names.iter().copied())
            {
                return Err(Error::Config(format!(
                    "fit covariates {:?} do not match {:?}",
                    fit.covariates, names
                )));
            }
            fits.mdr_beta = Some(fit.beta_hat);
        }
        Ok(fits)
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: SampleInput,
    #[command(flatten)]
    model: ModelInputs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    input: SampleInput,
    #[command(flatten)]
    model: ModelInputs,
    /// Resampler (salganik, lu, dr, nb, nb-fixed); default pairs each estimator with its own.
    #[arg(long)]
    method: Option<String>,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Coupons per recruiter for nb-fixed (default: most recruits observed).
    #[arg(long)]
    coupons: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario config JSON: one object or an array of them.
    #[arg(long, required_unless_present = "all")]
    config: Option<PathBuf>,
    /// Run all nine scenario cells with default settings.
    #[arg(long)]
    all: bool,
    /// Use 15 networks x 80 samples per cell.
    #[arg(long)]
    full_scale: bool,
    /// Override the configs' root seed with --seed.
    #[arg(long)]
    reseed: bool,
    /// Leave out per-sample traces from the JSON output.
    #[arg(long)]
    no_traces: bool,
    /// Results JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for rmse.csv, sd.csv, bias.csv, coverage.csv and summary.csv.
    #[arg(long)]
    tables: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    /// Raw survey CSV.
    #[arg(long)]
    survey: PathBuf,
    /// Ingestion options JSON.
    #[arg(long)]
    options: Option<PathBuf>,
    /// Also write the perturbed sensitivity dataset.
    #[arg(long)]
    sensitivity: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_covariates(path: Option<&Path>) -> Result<Vec<CovariateSpec>> {
    match path {
        Some(p) => from_json(&read(p)?),
        None => Ok(scenario_covariates()),
    }
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let recipe = match &a.recipe {
        Some(p) => from_json::<PopulationRecipe>(&read(p)?)?,
        None => PopulationRecipe::new(a.n, HomophilyLevel::from(a.homophily).ergm(), cli.seed),
    };
    let pop = recipe.draw()?;
    write(&a.out.join("nodes.csv"), &write_nodes_csv(&pop)?)?;
    write(&a.out.join("edges.csv"), &write_edges_csv(&pop)?)
}

fn sample(cli: &Cli, a: &SampleArgs) -> Result<()> {
    let mut pop = read_population(&read(&a.nodes)?, &read(&a.edges)?)?;
    for spec in &a.tie_tables {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--tie-table expects NAME=PATH, got `{spec}`")))?;
        let table = parse_tie_table_csv(&read(Path::new(path))?, pop.ids())?;
        pop = pop.with_tie_table(name, table)?;
    }
    let model = match &a.model {
        Some(p) => from_json::<RecruitmentModel>(&read(p)?)?,
        None => RecruitmentModel::Mdr(MdrLevel::from(a.mdr).model()),
    };
    let design = match &a.design {
        Some(p) => from_json::<SamplingDesign>(&read(p)?)?,
        None => SamplingDesign::default(),
    };
    let s = run_rds(&pop, &model, &design, &mut from_seed(cli.seed))?;
    let (members, alters) = write_sample_csv(&s)?;
    write(&a.out.join("members.csv"), &members)?;
    write(&a.out.join("alters.csv"), &alters)
}

fn fit(a: &FitArgs) -> Result<()> {
    let s = a.input.load()?;
    let result = match &a.dr {
        Some(attr) => fit_dr(&s, attr)?,
        None => {
            let specs = load_covariates(a.covariates.as_deref())?;
            fit_mdr(
                &s,
                &specs,
                &FitOptions {
                    standardize: a.standardize,
                    ..Default::default()
                },
            )?
        }
    };
    emit(a.out.as_deref(), &to_json(&result)?)
}

fn estimate_reports(
    s: &RdsSample,
    m: &ModelInputs,
) -> Result<(Vec<EstimateReport>, RecruitmentFits)> {
    let kinds = m.kinds()?;
    let fits = m.fits(s, &kinds)?;
    let est = Estimation::new(s, &fits, m.policy())?;
    let mode = if kinds.iter().any(|k| k.is_ego()) {
        EstimationFrame::new(s)?.mode
    } else {
        DataMode::Network
    };
    let reports = kinds
        .iter()
        .map(|&k| {
            let (estimate, undefined_reason) = match est.estimate(k) {
                Ok(v) => (Some(v), None),
                Err(e) if e.is_undefined() => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            Ok(EstimateReport {
                estimator: k,
                estimate,
                weight_source: k.weight_source(),
                data_mode: mode,
                undefined_reason,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((reports, fits))
}

fn estimate(cli: &Cli, a: &EstimateArgs) -> Result<()> {
    let s = a.input.load()?;
    let (reports, _) = estimate_reports(&s, &a.model)?;
    let text = match cli.format {
        Format::Json => to_json(&reports)?,
        Format::Csv => {
            let mut out = String::from("estimator,estimate,weight_source,undefined_reason\n");
            for r in &reports {
                out += &format!(
                    "{},{},{},{}\n",
                    r.estimator.label(),
                    r.estimate.map(|v| v.to_string()).unwrap_or_default(),
                    serde_json::to_value(r.weight_source)
                        .map(|v| v.as_str().unwrap_or_default().to_string())
                        .unwrap_or_default(),
                    r.undefined_reason
                        .as_deref()
                        .unwrap_or("")
                        .replace(',', ";")
                );
            }
            out
        }
    };
    emit(a.out.as_deref(), &text)
}

fn run_bootstrap(cli: &Cli, a: &BootstrapArgs) -> Result<()> {
    let s = a.input.load()?;
    let (points, fits) = estimate_reports(&s, &a.model)?;
    let fixed: Option<BootstrapMethod> = a.method.as_deref().map(str::parse).transpose()?;
    let mut groups: Vec<(BootstrapMethod, Vec<usize>)> = Vec::new();
    for (k, r) in points.iter().enumerate() {
        let m = fixed.unwrap_or_else(|| BootstrapMethod::default_for(r.estimator));
        match groups.iter_mut().find(|g| g.0 == m) {
            Some(g) => g.1.push(k),
            None => groups.push((m, vec![k])),
        }
    }
    let mut reports = Vec::new();
    for (method, idx) in groups {
        let config = BootstrapConfig {
            method,
            replicates: a.replicates,
            alpha: a.alpha,
            rng_seed: cli.seed,
            coupons: a.coupons,
        };
        let kinds: Vec<EstimatorKind> = idx.iter().map(|&k| points[k].estimator).collect();
        let pts: Vec<Option<f64>> = idx.iter().map(|&k| points[k].estimate).collect();
        reports.extend(bootstrap(
            &s,
            &fits,
            &kinds,
            &pts,
            &config,
            a.model.policy(),
        )?);
    }
    let text = match cli.format {
        Format::Json => to_json(&reports)?,
        Format::Csv => {
            let mut out = String::from("estimator,method,replicates,point,se,ci_lo,ci_hi,clamped,undefined_replicates,refit_failures\n");
            let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for r in &reports {
                out += &format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    r.estimator.label(),
                    r.method.label(),
                    r.replicates,
                    f(r.point),
                    f(r.se),
                    f(r.ci.map(|c| c[0])),
                    f(r.ci.map(|c| c[1])),
                    r.clamped,
                    r.undefined_replicates,
                    r.refit_failures
                );
            }
            out
        }
    };
    emit(a.out.as_deref(), &text)
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(Box<ScenarioConfig>),
    Many(Vec<ScenarioConfig>),
}

fn scenario(cli: &Cli, a: &ScenarioArgs) -> Result<()> {
    let mut configs = match (&a.config, a.all) {
        (Some(p), _) => match from_json::<OneOrMany>(&read(p)?)? {
            OneOrMany::One(c) => vec![*c],
            OneOrMany::Many(v) => v,
        },
        (None, _) => all_scenarios(cli.seed),
    };
    for c in &mut configs {
        if a.full_scale {
            *c = c.clone().full_scale();
        }
        if a.reseed {
            c.root_seed = cli.seed;
        }
    }
    let mut results: Vec<ScenarioResult> = Vec::with_capacity(configs.len());
    for c in &configs {
        eprintln!(
            "scenario {} ({} x {})",
            c.scenario_number(),
            c.networks,
            c.samples_per_network
        );
        let mut r = run_scenario(c)?;
        if a.no_traces {
            r.traces.clear();
        }
        results.push(r);
    }
    if let Some(dir) = &a.tables {
        for (name, metric) in [
            ("rmse", TableMetric::Rmse),
            ("sd", TableMetric::Sd),
            ("bias", TableMetric::Bias),
            ("coverage", TableMetric::Coverage),
        ] {
            write(
                &dir.join(format!("{name}.csv")),
                &wide_table_csv(&results, metric)?,
            )?;
        }
        write(&dir.join("summary.csv"), &summary_csv(&results)?)?;
    }
    let text = match cli.format {
        Format::Json if results.len() == 1 => to_json(&results[0])?,
        Format::Json => to_json(&results)?,
        Format::Csv => summary_csv(&results)?,
    };
    emit(a.out.as_deref(), &text)
}

#[derive(Serialize)]
struct IngestOutput<'a> {
    audit: &'a rdsmdr::harness::RepairAudit,
}

fn run_ingest(cli: &Cli, a: &IngestArgs) -> Result<()> {
    let raw = parse_survey_csv(&read(&a.survey)?)?;
    let options = match &a.options {
        Some(p) => from_json::<IngestOptions>(&read(p)?)?,
        None => IngestOptions::default(),
    };
    let mut rng = from_seed(cli.seed);
    let (s, audit) = ingest(&raw, &options, &mut rng)?;
    let (members, alters) = write_sample_csv(&s)?;
    write(&a.out.join("members.csv"), &members)?;
    write(&a.out.join("alters.csv"), &alters)?;
    write(
        &a.out.join("repair_audit.json"),
        &to_json(&IngestOutput { audit: &audit })?,
    )?;
    if a.sensitivity {
        let t = sensitivity_transform(&s, &SensitivityTransform::default(), &mut rng)?;
        let (members, alters) = write_sample_csv(&t)?;
        write(&a.out.join("sensitivity_members.csv"), &members)?;
        write(&a.out.join("sensitivity_alters.csv"), &alters)?;
    }
    eprintln!(
        "{} members, {} modified, {} imputed",
        audit.members,
        audit.modified_count,
        audit.imputed.len()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Sample(a) => sample(cli, a),
        Command::Fit(a) => fit(a),
        Command::Estimate(a) => estimate(cli, a),
        Command::Bootstrap(a) => run_bootstrap(cli, a),
        Command::Scenario(a) => scenario(cli, a),
        Command::Ingest(a) => run_ingest(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
