use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use smaup::experiments::{
    effects_experiment, generate_null, power_experiment, size_experiment, EffectsConfig, EffectsSummary, NullConfig,
    PowerSizeConfig, PowerSizeReport, Recipe, RhoMode,
};
use smaup::seeds::SeedKey;
use smaup::statistic::{scan_k, DecisionBasis, RHO_GRID};
use smaup::{
    aggregate_mean, generate_sar, generate_with_target_rho, random_regions, smaup_test, AreaVariable,
    CriticalValueTable, Level, NullDistribution, SafeK, SarSpec, SmaupParams, SmaupResult, SpatialWeights,
    TestOptions,
};

use crate::output::{emit, read, Meta};
use crate::{
    AggregateArgs, EffectsArgs, ExportArgs, Format, GraphSource, ModeArg, NullArgs, PermuteArgs, PowerSizeArgs,
    RecipeArgs, ScanArgs, SeedArgs, SimulateArgs, TestArgs, TestCommon, WeightsArgs,
};

pub enum Kind {
    Power,
    Size,
}

/// The given seed, or a fresh one from system entropy (reported on stderr).
fn resolve_seed(args: &mut SeedArgs) -> u64 {
    *args.seed.get_or_insert_with(|| {
        let seed = rand::random::<u64>();
        eprintln!("seed: {seed}");
        seed
    })
}

fn lattice(dims: &[usize]) -> Result<SpatialWeights> {
    Ok(SpatialWeights::lattice_rook(dims[0], dims[1])?)
}

fn load_weights(path: &Path) -> Result<SpatialWeights> {
    serde_json::from_str(&read(path)?).with_context(|| format!("invalid weights file {}", path.display()))
}

fn load_values(path: &Path) -> Result<AreaVariable> {
    Ok(AreaVariable::from_csv_str(&read(path)?)?)
}

fn graph(source: &GraphSource) -> Result<SpatialWeights> {
    match (&source.lattice, &source.weights) {
        (Some(dims), _) => lattice(dims),
        (None, Some(path)) => load_weights(path),
        (None, None) => bail!("one of --lattice or --weights is required"),
    }
}

fn recipe(args: &RecipeArgs) -> Recipe {
    Recipe {
        r: args.r,
        levene_center: args.center.into(),
        stall_window: args.stall_window,
        reuse_rho: args.reuse_rho,
        ..Recipe::default()
    }
}

pub fn weights(args: WeightsArgs) -> Result<()> {
    let standardize = !args.binary;
    let w = if let Some(dims) = &args.lattice {
        lattice(dims)?
    } else if let Some(path) = &args.adjacency {
        let (w, report) = SpatialWeights::from_adjacency_str(&read(path)?)?;
        if report.repaired_edges > 0 {
            eprintln!("warning: added {} missing reciprocal edges", report.repaired_edges);
        }
        w
    } else if let Some(path) = &args.geojson {
        SpatialWeights::from_geojson(&read(path)?)?
    } else {
        bail!("one of --lattice, --adjacency or --geojson is required");
    };
    let w = w.with_standardization(standardize);
    eprintln!("n={} edges={} connected={}", w.n(), w.edge_count(), w.is_connected());
    emit(args.out.as_deref(), &(serde_json::to_string(&w)? + "\n"))
}

pub fn simulate(mut args: SimulateArgs) -> Result<()> {
    let seed = resolve_seed(&mut args.seed);
    let w = graph(&args.graph)?;
    let y = generate_sar(&w, &SarSpec::new(args.rho, seed)?)?;
    let meta = Meta::new(Some(seed), &args);
    emit(args.out.as_deref(), &(meta.csv_comment() + &y.to_csv_string()))
}

pub fn permute_rho(mut args: PermuteArgs) -> Result<()> {
    let seed = resolve_seed(&mut args.seed);
    let w = load_weights(&args.weights)?;
    let y = load_values(&args.values)?;
    let out = generate_with_target_rho(&w, &y, args.target, args.window, args.max_retries, seed)?;
    eprintln!("estimated rho {:.6} after {} attempt(s)", out.estimated_rho, out.attempts);
    let meta = Meta::new(Some(seed), &args);
    emit(args.out.as_deref(), &(meta.csv_comment() + &out.variable.to_csv_string()))
}

pub fn aggregate(mut args: AggregateArgs) -> Result<()> {
    let seed = resolve_seed(&mut args.seed);
    let w = load_weights(&args.weights)?;
    let y = AreaVariable::on(&w, load_values(&args.values)?.into_values())?;
    let regions = random_regions(&w, args.k, &mut SeedKey::new(seed).rng())?;
    let agg = aggregate_mean(&y, &regions)?;
    let meta = Meta::new(Some(seed), &args);
    if let Some(path) = &args.regions {
        emit(Some(path), &(meta.csv_comment() + &regions.to_csv_string()))?;
    }
    let mut csv = meta.csv_comment() + "region_id,size,mean\n";
    for (i, (size, mean)) in agg.region_sizes.iter().zip(&agg.region_means).enumerate() {
        writeln!(csv, "{i},{size},{mean:?}")?;
    }
    emit(args.out.as_deref(), &csv)
}

struct TestInputs {
    y: AreaVariable,
    w: SpatialWeights,
    null: Option<NullDistribution>,
    name: String,
}

fn test_inputs(common: &TestCommon) -> Result<TestInputs> {
    let w = load_weights(&common.weights)?;
    let y = load_values(&common.values)?;
    let null = match &common.null {
        Some(path) => Some(
            serde_json::from_str::<NullDistribution>(&read(path)?)
                .with_context(|| format!("invalid null distribution {}", path.display()))?,
        ),
        None => None,
    };
    let name = common.values.file_stem().map_or_else(|| "y".into(), |s| s.to_string_lossy().into_owned());
    Ok(TestInputs { y, w, null, name })
}

fn options<'a>(common: &TestCommon, null: Option<&'a NullDistribution>) -> TestOptions<'a> {
    TestOptions {
        level: Some(common.alpha),
        rho_override: common.rho,
        null,
        params: SmaupParams::default(),
        lookup: common.lookup.into(),
    }
}

fn fmt_p(p: Option<f64>) -> String {
    p.map_or_else(|| "-".into(), |p| format!("{p:.3}"))
}

#[derive(Serialize)]
struct TestConfig<'a> {
    common: &'a TestCommon,
    k: usize,
}

pub fn test(args: TestArgs) -> Result<()> {
    let common = &args.common;
    let inputs = test_inputs(common)?;
    let result = smaup_test(&inputs.y, &inputs.w, args.k, &options(common, inputs.null.as_ref()))?;
    let meta = Meta::new(None, &TestConfig { common, k: args.k });
    let text = match common.format {
        Format::Json => meta.json(&result)?,
        Format::Csv => {
            let mut csv = meta.csv_comment() + "variable,n,k,rho,m,alpha,critical_value,pseudo_p,reject\n";
            for d in &result.decisions {
                let p = result.pseudo_p.map_or_else(String::new, |p| p.to_string());
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{}",
                    inputs.name,
                    result.n,
                    result.k,
                    result.rho_used,
                    result.m_value,
                    d.alpha.alpha(),
                    d.critical_value,
                    p,
                    d.reject
                )?;
            }
            csv
        }
        Format::Table => test_table(&inputs.name, &result),
    };
    emit(common.out.as_deref(), &text)
}

/// One row per variable: Variable, N, k, rho, M with stars, critical value
/// at the chosen level, pseudo-p.
fn test_table(name: &str, r: &SmaupResult) -> String {
    let level = r.level;
    let mut out = String::new();
    let crit_head = format!("M_crit({})", level.alpha());
    let _ = writeln!(out, "{:<12} {:>6} {:>6} {:>9} {:>11} {:>13} {:>9}", "Variable", "N", "k", "rho", "M", crit_head, "pseudo-p");
    let m = format!("{:.5}{}", r.m_value, r.stars(DecisionBasis::CriticalValue));
    let _ = writeln!(
        out,
        "{:<12} {:>6} {:>6} {:>9.5} {:>11} {:>13.5} {:>9}",
        name,
        r.n,
        r.k,
        r.rho_used,
        m,
        r.critical_value(level),
        fmt_p(r.pseudo_p)
    );
    let verdict = if r.rejected() { "rejected: sensitive to the MAUP" } else { "not rejected" };
    let _ = writeln!(out, "\nH0 at alpha = {}: {verdict}", level.alpha());
    let crits: Vec<String> =
        Level::ALL.iter().map(|l| format!("{} -> {:.5}", l.alpha(), r.critical_value(*l))).collect();
    let _ = writeln!(out, "critical values: {}", crits.join(", "));
    let rho_note = if r.rho_estimated { "estimated" } else { "given" };
    let _ = writeln!(out, "theta = {:.5}, rho {rho_note}", r.theta);
    let _ = writeln!(out, "*** p < 0.01, ** p < 0.05, * p < 0.1");
    out
}

#[derive(Serialize)]
struct ScanConfig<'a> {
    common: &'a TestCommon,
    k_min: usize,
    k_max: usize,
}

#[derive(Serialize)]
struct ScanReport<'a> {
    alpha: Level,
    basis: DecisionBasis,
    min_safe_k: SafeK,
    rows: &'a [SmaupResult],
}

pub fn scan(args: ScanArgs) -> Result<()> {
    let common = &args.common;
    let inputs = test_inputs(common)?;
    let k_max = args.k_max.unwrap_or(inputs.w.n());
    let basis = if inputs.null.is_some() { DecisionBasis::PseudoP } else { DecisionBasis::CriticalValue };
    let opts = options(common, inputs.null.as_ref());
    let result = scan_k(&inputs.y, &inputs.w, common.alpha, args.k_min..=k_max, basis, &opts)?;
    let meta = Meta::new(None, &ScanConfig { common, k_min: args.k_min, k_max });
    let verdict = match result.verdict {
        SafeK::Safe(k) => format!("min safe k = {k}"),
        SafeK::NoSafeK => "no safe k in range".to_string(),
    };
    let level = common.alpha;
    let text = match common.format {
        Format::Json => {
            meta.json(&ScanReport { alpha: level, basis, min_safe_k: result.verdict, rows: &result.rows })?
        }
        Format::Csv => {
            let mut csv = meta.csv_comment() + "k,theta,m,critical_value,pseudo_p,reject\n";
            for r in &result.rows {
                let p = r.pseudo_p.map_or_else(String::new, |p| p.to_string());
                writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    r.k,
                    r.theta,
                    r.m_value,
                    r.critical_value(level),
                    p,
                    r.rejects(level, basis)
                )?;
            }
            writeln!(csv, "# {verdict}")?;
            csv
        }
        Format::Table => {
            let mut t = format!("{:>6} {:>8} {:>11} {:>10} {:>9}  decision\n", "k", "theta", "M", "M_crit", "pseudo-p");
            for r in &result.rows {
                let decision = if r.rejects(level, basis) { "reject" } else { "-" };
                writeln!(
                    t,
                    "{:>6} {:>8.4} {:>11} {:>10.5} {:>9}  {decision}",
                    r.k,
                    r.theta,
                    format!("{:.5}{}", r.m_value, r.stars(basis)),
                    r.critical_value(level),
                    fmt_p(r.pseudo_p)
                )?;
            }
            writeln!(t, "\n{verdict} (alpha = {})", level.alpha())?;
            t
        }
    };
    emit(common.out.as_deref(), &text)
}

pub fn null(mut args: NullArgs) -> Result<()> {
    let seed = resolve_seed(&mut args.seed);
    let w = match (&args.n, &args.lattice, &args.weights) {
        (Some(n), _, _) => SpatialWeights::square_lattice(*n)?,
        (None, Some(dims), _) => lattice(dims)?,
        (None, None, Some(path)) => load_weights(path)?,
        _ => bail!("one of --n, --lattice or --weights is required"),
    };
    let config = NullConfig { rho: args.rho, replicates: args.replicates, master_seed: seed, recipe: recipe(&args.recipe) };
    let null = generate_null(&w, &config, args.workers.resolve())?;
    let meta = Meta::new(Some(seed), &args);
    emit(args.out.as_deref(), &meta.json(&null)?)
}

pub fn power_size(mut args: PowerSizeArgs, kind: Kind) -> Result<()> {
    let seed = resolve_seed(&mut args.seed);
    let config = PowerSizeConfig {
        ns: args.n.clone(),
        rhos: args.rho.clone(),
        instances: args.instances,
        alpha: args.alpha,
        master_seed: seed,
        recipe: recipe(&args.recipe),
        lookup: args.lookup.into(),
    };
    let workers = args.workers.resolve();
    let report = match kind {
        Kind::Power => power_experiment(&config, workers)?,
        Kind::Size => size_experiment(&config, workers)?,
    };
    let meta = Meta::new(Some(seed), &args);
    let text = match args.format {
        Format::Json => meta.json(&report)?,
        Format::Csv => meta.csv_comment() + &report.to_csv_string(),
        Format::Table => power_size_table(&report),
    };
    emit(args.out.as_deref(), &text)
}

/// Rho rows by N columns.
fn power_size_table(report: &PowerSizeReport) -> String {
    let mut out = format!("{:>6}", "rho");
    for n in &report.config.ns {
        let _ = write!(out, " {:>9}", format!("N={n}"));
    }
    out.push('\n');
    for &rho in &report.config.rhos {
        let _ = write!(out, "{rho:>6}");
        for &n in &report.config.ns {
            let p = report.cell(n, rho).map_or(f64::NAN, |c| c.proportion);
            let _ = write!(out, " {p:>9.3}");
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "\n{} at alpha = {}, {} instances per cell",
        report.kind, report.config.alpha, report.config.instances
    );
    out
}

fn parse_ks(specs: &[String]) -> Result<BTreeMap<usize, Vec<usize>>> {
    let mut ks = BTreeMap::new();
    for spec in specs {
        let (n, list) = spec.split_once('=').with_context(|| format!("--k `{spec}`: expected N=k1,k2,..."))?;
        let n: usize = n.trim().parse().with_context(|| format!("--k `{spec}`: bad N"))?;
        let list = list
            .split(',')
            .map(|k| k.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("--k `{spec}`: bad region count"))?;
        ks.insert(n, list);
    }
    Ok(ks)
}

pub fn effects(mut args: EffectsArgs) -> Result<()> {
    let seed = resolve_seed(&mut args.seed);
    let mut config = EffectsConfig::full_grid(seed);
    let given = parse_ks(&args.ks)?;
    if !args.n.is_empty() {
        config.ns = args.n.clone();
    } else if !given.is_empty() {
        config.ns = given.keys().copied().collect();
    }
    for n in &config.ns {
        if let Some(list) = given.get(n) {
            config.ks.insert(*n, list.clone());
        }
    }
    config.ks.retain(|n, _| config.ns.contains(n));
    if let Some(n) = config.ns.iter().find(|n| !config.ks.contains_key(n)) {
        bail!("no region counts for N = {n}; pass --k {n}=k1,k2,...");
    }
    config.rhos = if args.rho.is_empty() { RHO_GRID.to_vec() } else { args.rho.clone() };
    config.instances = args.instances;
    config.r = args.r;
    config.mode = match args.mode {
        ModeArg::Isolation => RhoMode::Isolation,
        ModeArg::Independent => RhoMode::Independent,
    };
    config.window = args.window;
    config.max_retries = args.max_retries;

    let summary = effects_experiment(&config, args.workers.resolve())?;
    for (n, k) in &summary.skipped {
        eprintln!("warning: skipped k = {k} for N = {n}");
    }
    let meta = Meta::new(Some(seed), &args);
    let text = match args.format {
        Format::Json => meta.json(&summary)?,
        Format::Csv => meta.csv_comment() + &summary.to_csv_string(),
        Format::Table => effects_table(&summary),
    };
    emit(args.out.as_deref(), &text)
}

fn effects_table(summary: &EffectsSummary) -> String {
    let mut out = format!(
        "{:>5} {:>6} {:>5} {:>12} {:>12} {:>9} {:>9}\n",
        "N", "rho", "k", "mean RCM", "mean RCV", "t rej", "Lev rej"
    );
    for c in &summary.cells {
        let _ = writeln!(
            out,
            "{:>5} {:>6} {:>5} {:>12.5} {:>12.5} {:>9.3} {:>9.3}",
            c.n,
            c.rho,
            c.k,
            c.mean_rcm_bar(),
            c.mean_rcv_bar(),
            c.t_reject,
            c.levene_reject
        );
    }
    out
}

pub fn export_critical_values(args: ExportArgs) -> Result<()> {
    emit(args.out.as_deref(), &CriticalValueTable::embedded().to_csv_string())
}
