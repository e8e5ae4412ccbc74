//! The `oceanflow` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 empty result.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::eddy::{detect_eddies_3d, BoundaryRadii, EddyCentre, EddyLayer, EddyParams, Rotation};
use crate::export::{
    write_eddy_csv, write_file, write_json, write_profile_csv, write_tracks_csv, ExportError,
    PolyData, RectilinearData,
};
use crate::fields::{self, DerivedFieldKind};
use crate::fronts::{build_track_graph, extract_tracks};
use crate::grid::{Axis, Position, ScalarField};
use crate::ingest::{open_dataset, write_raw, Dataset, VariableMap, VariableRole};
use crate::profile::{
    depth_profiles, isosurface_depth, vertical_slice, IsoDepthMap, ProfileVariable, Sampling,
    VerticalSlice,
};
use crate::synth::OceanSpec;
use crate::tracer::{
    integrate_many, integrate_pathline, seed_in_isovolume, seed_uniform, seed_weighted, Direction,
    IntegrationParams, Seed, TimeSeriesFlow, WeightTransform,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Empty(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Empty(_) => EXIT_EMPTY,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "error: {m}"),
            Self::Empty(m) => write!(f, "empty result: {m}"),
        }
    }
}

fn data(e: impl Display) -> CliError {
    CliError::Data(e.to_string())
}

fn usage(e: impl Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        data(e)
    }
}

type CliResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "oceanflow",
    version,
    about = "Flow-feature analysis for gridded ocean data"
)]
pub struct Cli {
    /// TOML file with the variable map and a `[defaults]` table.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one variable-map entry, e.g. `--map u=uvel`.
    #[arg(long = "map", global = true, value_name = "KEY=NAME")]
    pub map: Vec<String>,
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    pub rng_seed: Option<u64>,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print axes, variables, time range and land fraction.
    Info(InfoArgs),
    /// Compute a derived field at one timestep and write it as VTK.
    Derive(DeriveArgs),
    /// Seed and integrate streamlines or pathlines.
    Trace(TraceArgs),
    /// Detect eddies at one timestep.
    Eddies(EddyArgs),
    /// Extract and track isovolume surface fronts.
    Fronts(FrontArgs),
    /// Sample a vertical needle.
    Profile(ProfileArgs),
    /// Depth of an isosurface per water column.
    Isodepth(IsoDepthArgs),
    /// Latitude-depth section at a fixed longitude.
    Section(SectionArgs),
    /// Write a synthetic dataset in the raw format.
    Synth(SynthArgs),
}

/// Closed coordinate windows applied before any processing.
#[derive(Debug, Clone, Default, Args)]
pub struct Crop {
    #[arg(long, value_name = "LO:HI")]
    pub lon_range: Option<String>,
    #[arg(long, value_name = "LO:HI")]
    pub lat_range: Option<String>,
    #[arg(long, value_name = "LO:HI")]
    pub depth_range: Option<String>,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub crop: Crop,
    /// Print the summary as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct DeriveArgs {
    pub input: PathBuf,
    /// speed, speed-horizontal, vorticity-z, curl-magnitude or okubo-weiss.
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 0)]
    pub t: usize,
    #[command(flatten)]
    pub crop: Crop,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    pub input: PathBuf,
    /// uniform, weighted, isovolume or point.
    #[arg(long, default_value = "uniform")]
    pub seeding: String,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Weight field for weighted seeding: a variable or derived field name.
    #[arg(long, default_value = "vorticity-z")]
    pub weight: String,
    /// positive, negative or absolute.
    #[arg(long, default_value = "absolute")]
    pub transform: String,
    /// Range constraint for isovolume seeding, e.g. `temperature=26:28`.
    #[arg(long = "range", value_name = "FIELD=LO:HI")]
    pub ranges: Vec<String>,
    /// Explicit seed for point seeding.
    #[arg(long = "point", value_name = "LON,LAT,DEPTH")]
    pub points: Vec<String>,
    /// Timestep for streamlines (and for seeding fields).
    #[arg(long, default_value_t = 0)]
    pub t: usize,
    /// Integrate pathlines through `--t-range` instead of streamlines.
    #[arg(long)]
    pub pathline: bool,
    #[arg(long, value_name = "A:B")]
    pub t_range: Option<String>,
    #[arg(long)]
    pub step_length: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub min_speed: Option<f64>,
    #[arg(long)]
    pub max_time: Option<f64>,
    /// forward, backward or both.
    #[arg(long, default_value = "forward")]
    pub direction: String,
    /// Include the vertical velocity.
    #[arg(long)]
    pub vertical: bool,
    /// Variables or derived fields sampled along each line.
    #[arg(long = "sample")]
    pub samples: Vec<String>,
    #[command(flatten)]
    pub crop: Crop,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EddyArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub t: usize,
    /// Persistence threshold for speed minima, m/s.
    #[arg(long)]
    pub persistence: Option<f64>,
    /// Largest boundary radius searched, meters.
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Skip the boundary-ring profile streamlines.
    #[arg(long)]
    pub no_lines: bool,
    #[command(flatten)]
    pub crop: Crop,
    /// Output stem; writes `<stem>.json`, `<stem>.csv` and `<stem>.vtk`.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FrontArgs {
    pub input: PathBuf,
    #[arg(long, default_value = "salinity")]
    pub variable: String,
    #[arg(long, value_name = "LO:HI")]
    pub range: String,
    #[arg(long, value_name = "A:B")]
    pub t_range: Option<String>,
    #[arg(long)]
    pub min_length: Option<usize>,
    /// Drop links whose overlap over union is below this.
    #[arg(long)]
    pub jaccard: Option<f64>,
    #[command(flatten)]
    pub crop: Crop,
    /// Output stem; writes `<stem>.graph.json`, `<stem>.tracks.csv` and
    /// `<stem>.tracks.vtk`.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    pub input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub lon: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lat: f64,
    #[arg(long, default_value_t = 0)]
    pub t: usize,
    /// Sample every timestep of a closed range instead of `--t`.
    #[arg(long, value_name = "A:B")]
    pub t_range: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "temperature,salinity")]
    pub variables: Vec<String>,
    /// Use the nearest grid column instead of bilinear interpolation.
    #[arg(long)]
    pub nearest: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct IsoDepthArgs {
    pub input: PathBuf,
    #[arg(long, default_value = "temperature")]
    pub variable: String,
    #[arg(long, allow_hyphen_values = true)]
    pub iso: f64,
    #[arg(long, default_value_t = 0)]
    pub t: usize,
    #[command(flatten)]
    pub crop: Crop,
    /// `.csv` for a table, anything else for VTK.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SectionArgs {
    pub input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub lon: f64,
    #[arg(long, default_value = "temperature")]
    pub variable: String,
    #[arg(long, default_value_t = 0)]
    pub t: usize,
    #[arg(long)]
    pub nearest: bool,
    #[command(flatten)]
    pub crop: Crop,
    /// `.csv` for a table, anything else for VTK.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    pub nx: usize,
    #[arg(long, default_value_t = 64)]
    pub ny: usize,
    #[arg(long, default_value_t = 12)]
    pub nz: usize,
    #[arg(long, default_value_t = 6)]
    pub nt: usize,
    #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
    pub lon_range: Option<String>,
    #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
    pub lat_range: Option<String>,
    #[arg(long)]
    pub max_depth: Option<f64>,
    #[arg(long)]
    pub no_island: bool,
    /// Omit the vertical velocity variable.
    #[arg(long)]
    pub no_w: bool,
    /// Header path; data files are written next to it.
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Values of the `[defaults]` configuration table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub jobs: Option<usize>,
    pub rng_seed: Option<u64>,
    pub persistence: Option<f64>,
    pub r_max: Option<f64>,
    pub step_length: Option<f64>,
    pub max_steps: Option<usize>,
    pub min_speed: Option<f64>,
    pub seeds: Option<usize>,
    pub min_track_length: Option<usize>,
    pub jaccard: Option<f64>,
}

/// Variable map plus defaults, after applying `--map` overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub map: VariableMap,
    pub defaults: Defaults,
}

impl Config {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| data(format!("cannot read {}: {e}", p.display())))?;
                text.parse()
                    .map_err(|e: toml::de::Error| usage(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (key, value) in &table {
            if value.is_table() && key != "defaults" {
                return Err(usage(format!("unknown config table [{key}]")));
            }
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| usage(format!("--map expects KEY=NAME, got `{o}`")))?;
            let value = if k == "fill_value" {
                toml::Value::Float(parse_num(v)?)
            } else {
                toml::Value::String(v.to_string())
            };
            table.insert(k.trim().to_string(), value);
        }
        let map = VariableMap::from_table(&table).map_err(usage)?;
        let defaults = match table.get("defaults") {
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|e| usage(format!("[defaults]: {e}")))?,
            None => Defaults::default(),
        };
        Ok(Self { map, defaults })
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    s.trim().parse().map_err(|e| usage(format!("`{s}`: {e}")))
}

fn parse_pair<T: FromStr>(s: &str) -> Result<(T, T), CliError>
where
    T::Err: Display,
{
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("expected LO:HI, got `{s}`")))?;
    Ok((parse_num(a)?, parse_num(b)?))
}

/// `A:B` or a single `A`.
fn parse_steps(s: &str) -> Result<(usize, usize), CliError> {
    match s.split_once(':') {
        Some(_) => parse_pair(s),
        None => parse_num(s).map(|t| (t, t)),
    }
}

fn parse_role(s: &str) -> Result<VariableRole, CliError> {
    s.parse().map_err(usage)
}

/// A dataset variable or a field derived from the velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
enum FieldSpec {
    Role(VariableRole),
    Derived(DerivedFieldKind),
}

impl FieldSpec {
    fn parse(s: &str) -> Result<Self, CliError> {
        if let Ok(r) = s.parse() {
            return Ok(Self::Role(r));
        }
        s.parse()
            .map(Self::Derived)
            .map_err(|_| usage(format!("`{s}` is neither a variable nor a derived field")))
    }

    fn load(self, d: &Dataset, t: usize) -> Result<ScalarField, CliError> {
        match self {
            Self::Role(r) => d.load_scalar(r, t).map_err(data),
            Self::Derived(k) => fields::derive(&d.load_vector(t).map_err(data)?, k).map_err(data),
        }
    }
}

fn check_t(d: &Dataset, t: usize) -> Result<(), CliError> {
    if t >= d.time().len() {
        return Err(usage(format!(
            "timestep {t} out of range (dataset has {})",
            d.time().len()
        )));
    }
    Ok(())
}

fn open(input: &Path, cfg: &Config, crop: &Crop) -> Result<Dataset, CliError> {
    let d = open_dataset(input, &cfg.map).map_err(data)?;
    let range = |r: &Option<String>| r.as_deref().map(parse_pair::<f64>).transpose();
    let (lon, lat, depth) = (
        range(&crop.lon_range)?,
        range(&crop.lat_range)?,
        range(&crop.depth_range)?,
    );
    if lon.is_none() && lat.is_none() && depth.is_none() {
        return Ok(d);
    }
    d.subset(lon, lat, depth, None).map_err(data)
}

fn with_extension(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn is_csv(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("oceanflow: {e}");
            e.code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult {
    let cfg = Config::load(cli.config.as_deref(), &cli.map)?;
    let jobs = cli.jobs.or(cfg.defaults.jobs);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(data)?;
    let rng_seed = cli.rng_seed.or(cfg.defaults.rng_seed).unwrap_or(0);
    pool.install(|| match &cli.command {
        Command::Info(a) => cmd_info(a, &cfg),
        Command::Derive(a) => cmd_derive(a, &cfg),
        Command::Trace(a) => cmd_trace(a, &cfg, rng_seed),
        Command::Eddies(a) => cmd_eddies(a, &cfg),
        Command::Fronts(a) => cmd_fronts(a, &cfg),
        Command::Profile(a) => cmd_profile(a, &cfg),
        Command::Isodepth(a) => cmd_isodepth(a, &cfg),
        Command::Section(a) => cmd_section(a, &cfg),
        Command::Synth(a) => cmd_synth(a),
    })
}

#[derive(Serialize)]
struct AxisSummary<'a> {
    name: &'a str,
    units: &'a str,
    len: usize,
    first: f64,
    last: f64,
}

#[derive(Serialize)]
struct VariableSummary<'a> {
    role: VariableRole,
    name: &'a str,
    units: &'a str,
}

#[derive(Serialize)]
struct InfoSummary<'a> {
    axes: Vec<AxisSummary<'a>>,
    time: AxisSummary<'a>,
    variables: Vec<VariableSummary<'a>>,
    land_fraction: f64,
}

fn axis_summary(ax: &Axis) -> AxisSummary<'_> {
    AxisSummary {
        name: ax.name(),
        units: ax.units(),
        len: ax.len(),
        first: ax.first(),
        last: ax.last(),
    }
}

fn cmd_info(a: &InfoArgs, cfg: &Config) -> CliResult {
    let d = open(&a.input, cfg, &a.crop)?;
    let g = d.grid();
    let tv = d.time().values();
    let summary = InfoSummary {
        axes: vec![
            axis_summary(g.lon()),
            axis_summary(g.lat()),
            axis_summary(g.depth()),
        ],
        time: AxisSummary {
            name: d.time().name(),
            units: d.time().units(),
            len: tv.len(),
            first: tv[0],
            last: tv[tv.len() - 1],
        },
        variables: d
            .catalog()
            .iter()
            .map(|c| VariableSummary {
                role: c.role,
                name: &c.name,
                units: &c.units,
            })
            .collect(),
        land_fraction: g.land_fraction(),
    };
    let mut out = std::io::stdout().lock();
    if a.json {
        return write_json(&mut out, &summary).map_err(CliError::from);
    }
    let mut text = String::new();
    for ax in &summary.axes {
        text += &format!(
            "{:<10} {:>6} nodes  [{}, {}] {}\n",
            ax.name, ax.len, ax.first, ax.last, ax.units
        );
    }
    let t = &summary.time;
    text += &format!(
        "{:<10} {:>6} steps  [{}, {}] {}\n",
        t.name, t.len, t.first, t.last, t.units
    );
    for v in &summary.variables {
        text += &format!(
            "variable   {:<12} {:<12} {}\n",
            v.role.name(),
            v.name,
            v.units
        );
    }
    text += &format!("land fraction {:.4}\n", summary.land_fraction);
    out.write_all(text.as_bytes()).map_err(data)
}

fn cmd_derive(a: &DeriveArgs, cfg: &Config) -> CliResult {
    let kind: DerivedFieldKind = a.kind.parse().map_err(usage)?;
    let d = open(&a.input, cfg, &a.crop)?;
    check_t(&d, a.t)?;
    let vf = d.load_vector(a.t).map_err(data)?;
    let field = fields::derive(&vf, kind).map_err(data)?;
    let grid = RectilinearData::from_fields(&[&field]);
    write_file(&a.output, |w| {
        Ok(grid.write(w, &format!("{} t={}", kind, a.t))?)
    })?;
    Ok(())
}

fn parse_point(s: &str) -> Result<Position, CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    let [lon, lat, depth] = parts[..] else {
        return Err(usage(format!("expected LON,LAT,DEPTH, got `{s}`")));
    };
    Ok(Position::new(
        parse_num(lon)?,
        parse_num(lat)?,
        parse_num(depth)?,
    ))
}

fn cmd_trace(a: &TraceArgs, cfg: &Config, rng_seed: u64) -> CliResult {
    let defaults = &cfg.defaults;
    let base = IntegrationParams::default();
    let params = IntegrationParams {
        step_length: a
            .step_length
            .or(defaults.step_length)
            .unwrap_or(base.step_length),
        max_steps: a.max_steps.or(defaults.max_steps).unwrap_or(base.max_steps),
        min_speed: a.min_speed.or(defaults.min_speed).unwrap_or(base.min_speed),
        include_vertical: a.vertical,
        direction: a.direction.parse::<Direction>().map_err(usage)?,
        max_time: a.max_time,
    };
    params.validate().map_err(usage)?;
    let n = a.seeds.or(defaults.seeds).unwrap_or(100);
    let d = open(&a.input, cfg, &a.crop)?;
    let (t0, t1) = match &a.t_range {
        Some(r) => parse_steps(r)?,
        None if a.pathline => (a.t, d.time().len().saturating_sub(1)),
        None => (a.t, a.t),
    };
    check_t(&d, t0)?;
    check_t(&d, t1)?;
    if a.vertical && !d.has_vertical_velocity() {
        return Err(data(
            "--vertical needs a mapped vertical velocity (set `w` in the variable map)",
        ));
    }

    let seed_t = t0;
    let seeds: Vec<Seed> = match a.seeding.to_ascii_lowercase().as_str() {
        "uniform" => seed_uniform(d.grid(), n, rng_seed).map_err(data)?,
        "weighted" => {
            let w = FieldSpec::parse(&a.weight)?.load(&d, seed_t)?;
            let transform: WeightTransform = a.transform.parse().map_err(usage)?;
            seed_weighted(&w, transform, n, rng_seed).map_err(data)?
        }
        "isovolume" => {
            if a.ranges.is_empty() {
                return Err(usage(
                    "isovolume seeding needs at least one --range FIELD=LO:HI",
                ));
            }
            let mut loaded = Vec::new();
            for r in &a.ranges {
                let (name, range) = r
                    .split_once('=')
                    .ok_or_else(|| usage(format!("expected FIELD=LO:HI, got `{r}`")))?;
                loaded.push((
                    FieldSpec::parse(name)?.load(&d, seed_t)?,
                    parse_pair::<f64>(range)?,
                ));
            }
            let constraints: Vec<_> = loaded.iter().map(|(f, r)| (f, *r)).collect();
            match seed_in_isovolume(&constraints, n, rng_seed) {
                Err(crate::tracer::TracerError::EmptySelection) => {
                    return Err(CliError::Empty(
                        "no seed satisfies the range constraints".into(),
                    ))
                }
                other => other.map_err(data)?,
            }
        }
        "point" => {
            if a.points.is_empty() {
                return Err(usage(
                    "point seeding needs at least one --point LON,LAT,DEPTH",
                ));
            }
            a.points
                .iter()
                .map(|p| parse_point(p).map(Seed::new))
                .collect::<Result<_, _>>()?
        }
        other => return Err(usage(format!("unknown seeding `{other}`"))),
    };
    if seeds.is_empty() {
        return Err(usage("no seeds requested"));
    }

    let mut lines = if a.pathline {
        let flow = TimeSeriesFlow::from_dataset(&d, t0, t1).map_err(data)?;
        let born: Vec<Seed> = seeds
            .iter()
            .map(|s| Seed::at_time(s.position, t0 as f64))
            .collect();
        use rayon::prelude::*;
        born.par_iter()
            .map(|s| integrate_pathline(&flow, s, &params))
            .collect::<Result<Vec<_>, _>>()
            .map_err(data)?
    } else {
        let vf = d.load_vector(a.t).map_err(data)?;
        integrate_many(&vf, &seeds, &params)
    };
    for name in &a.samples {
        let field = FieldSpec::parse(name)?.load(&d, seed_t)?;
        for line in &mut lines {
            line.sample_scalar(&field);
        }
    }
    let pd = PolyData::from_field_lines(&lines);
    let kind = if a.pathline {
        "pathlines"
    } else {
        "streamlines"
    };
    write_file(&a.output, |w| {
        Ok(pd.write(
            w,
            &format!("{kind} seeding={} rng_seed={rng_seed}", a.seeding),
        )?)
    })?;
    Ok(())
}

#[derive(Serialize)]
struct EddyRecord<'a> {
    id: usize,
    levels: (usize, usize),
    centre: &'a EddyCentre,
    rotation: Rotation,
    radii: &'a BoundaryRadii,
    layers: &'a [EddyLayer],
}

#[derive(Serialize)]
struct EddyReport<'a> {
    t: usize,
    time: f64,
    time_units: &'a str,
    params: &'a EddyParams,
    eddies: Vec<EddyRecord<'a>>,
}

fn cmd_eddies(a: &EddyArgs, cfg: &Config) -> CliResult {
    let base = EddyParams::default();
    let params = EddyParams {
        persistence_threshold: a
            .persistence
            .or(cfg.defaults.persistence)
            .unwrap_or(base.persistence_threshold),
        r_max: a.r_max.or(cfg.defaults.r_max).unwrap_or(base.r_max),
        ring_fractions: if a.no_lines {
            Vec::new()
        } else {
            base.ring_fractions.clone()
        },
        ..base
    };
    if !(params.persistence_threshold >= 0.0 && params.r_max > 0.0) {
        return Err(usage("persistence must be non-negative and r-max positive"));
    }
    let d = open(&a.input, cfg, &a.crop)?;
    check_t(&d, a.t)?;
    let vf = d.load_vector(a.t).map_err(data)?;
    let eddies = detect_eddies_3d(&vf, &params);
    let time = d.time().values()[a.t];
    let report = EddyReport {
        t: a.t,
        time,
        time_units: d.time().units(),
        params: &params,
        eddies: eddies
            .iter()
            .enumerate()
            .map(|(id, e)| EddyRecord {
                id,
                levels: e.level_range(),
                centre: e.centre(),
                rotation: e.rotation(),
                radii: e.boundary_radii(),
                layers: &e.layers,
            })
            .collect(),
    };
    write_file(with_extension(&a.output, ".json"), |w| {
        write_json(w, &report)
    })?;
    write_file(with_extension(&a.output, ".csv"), |w| {
        write_eddy_csv(w, a.t, time, &eddies)
    })?;
    let pd = PolyData::from_eddies(&eddies);
    write_file(with_extension(&a.output, ".vtk"), |w| {
        Ok(pd.write(w, &format!("eddy profile lines t={}", a.t))?)
    })?;
    log::info!("{} eddies at t={}", eddies.len(), a.t);
    if eddies.is_empty() {
        return Err(CliError::Empty(format!("no eddies detected at t={}", a.t)));
    }
    Ok(())
}

fn cmd_fronts(a: &FrontArgs, cfg: &Config) -> CliResult {
    let role = parse_role(&a.variable)?;
    let range = parse_pair::<f64>(&a.range)?;
    let time_range = a.t_range.as_deref().map(parse_steps).transpose()?;
    let min_length = a.min_length.or(cfg.defaults.min_track_length).unwrap_or(2);
    let jaccard = a.jaccard.or(cfg.defaults.jaccard);
    if range.0 > range.1 || jaccard.is_some_and(|j| !(0.0..=1.0).contains(&j)) {
        return Err(usage("invalid --range or --jaccard"));
    }
    let d = open(&a.input, cfg, &a.crop)?;
    if let Some((t0, t1)) = time_range {
        check_t(&d, t0)?;
        check_t(&d, t1)?;
    }
    let graph = build_track_graph(&d, role, range, time_range, jaccard).map_err(data)?;
    let tracks = extract_tracks(&graph, min_length);
    write_file(with_extension(&a.output, ".graph.json"), |w| {
        write_json(w, &graph)
    })?;
    write_file(with_extension(&a.output, ".tracks.csv"), |w| {
        write_tracks_csv(w, &graph, &tracks)
    })?;
    let pd = PolyData::from_tracks(&graph, &tracks);
    write_file(with_extension(&a.output, ".tracks.vtk"), |w| {
        Ok(pd.write(w, "front tracks")?)
    })?;
    log::info!(
        "{} fronts, {} edges, {} tracks",
        graph.node_count(),
        graph.edges().len(),
        tracks.len()
    );
    if tracks.is_empty() {
        return Err(CliError::Empty(format!(
            "no track of length >= {min_length}"
        )));
    }
    Ok(())
}

fn sampling(nearest: bool) -> Sampling {
    if nearest {
        Sampling::Nearest
    } else {
        Sampling::Interpolated
    }
}

fn cmd_profile(a: &ProfileArgs, cfg: &Config) -> CliResult {
    let vars = a
        .variables
        .iter()
        .map(|v| v.parse::<ProfileVariable>().map_err(usage))
        .collect::<Result<Vec<_>, _>>()?;
    let d = open(&a.input, cfg, &Crop::default())?;
    let (t0, t1) = match &a.t_range {
        Some(r) => parse_steps(r)?,
        None => (a.t, a.t),
    };
    check_t(&d, t0)?;
    check_t(&d, t1)?;
    let times: Vec<usize> = (t0..=t1).collect();
    let profiles =
        depth_profiles(&d, a.lon, a.lat, &times, &vars, sampling(a.nearest)).map_err(data)?;
    write_file(&a.output, |w| write_profile_csv(w, &profiles))?;
    let all_masked = profiles
        .iter()
        .all(|p| p.columns.iter().all(|(_, c)| c.iter().all(Option::is_none)));
    if all_masked {
        return Err(CliError::Empty(format!(
            "needle at ({}, {}) is masked at every level",
            a.lon, a.lat
        )));
    }
    Ok(())
}

fn write_iso_csv(w: impl Write, m: &IsoDepthMap) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lon", "lat", "depth"])?;
    for (j, lat) in m.lat.iter().enumerate() {
        for (i, lon) in m.lon.iter().enumerate() {
            let z = m.get(i, j).map(|z| z.to_string()).unwrap_or_default();
            out.write_record([lon.to_string(), lat.to_string(), z])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_isodepth(a: &IsoDepthArgs, cfg: &Config) -> CliResult {
    let var: ProfileVariable = a.variable.parse().map_err(usage)?;
    let d = open(&a.input, cfg, &a.crop)?;
    check_t(&d, a.t)?;
    let map = isosurface_depth(&d, var, a.iso, a.t).map_err(data)?;
    if is_csv(&a.output) {
        write_file(&a.output, |w| write_iso_csv(w, &map))?;
    } else {
        let grid = RectilinearData::from_iso_depth(&map);
        write_file(&a.output, |w| {
            Ok(grid.write(w, &format!("{} = {} depth", var, a.iso))?)
        })?;
    }
    if map.depths.iter().all(Option::is_none) {
        return Err(CliError::Empty(format!(
            "no column reaches {var} = {}",
            a.iso
        )));
    }
    Ok(())
}

fn write_section_csv(w: impl Write, s: &VerticalSlice) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lon", "lat", "depth", s.variable.name()])?;
    for (k, depth) in s.depth.iter().enumerate() {
        for (j, lat) in s.lat.iter().enumerate() {
            let v = s.get(j, k).map(|v| v.to_string()).unwrap_or_default();
            out.write_record([s.lon.to_string(), lat.to_string(), depth.to_string(), v])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_section(a: &SectionArgs, cfg: &Config) -> CliResult {
    let var: ProfileVariable = a.variable.parse().map_err(usage)?;
    let d = open(&a.input, cfg, &a.crop)?;
    check_t(&d, a.t)?;
    let s = vertical_slice(&d, a.lon, a.t, var, sampling(a.nearest)).map_err(data)?;
    if is_csv(&a.output) {
        write_file(&a.output, |w| write_section_csv(w, &s))?;
    } else {
        let grid = RectilinearData::from_section(&s);
        write_file(&a.output, |w| {
            Ok(grid.write(w, &format!("{} section at lon {}", var, s.lon))?)
        })?;
    }
    if s.values.iter().all(Option::is_none) {
        return Err(CliError::Empty(format!(
            "section at lon {} is entirely masked",
            s.lon
        )));
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> CliResult {
    let base = OceanSpec::default();
    let spec = OceanSpec {
        nx: a.nx,
        ny: a.ny,
        nz: a.nz,
        nt: a.nt,
        lon: a
            .lon_range
            .as_deref()
            .map(parse_pair)
            .transpose()?
            .unwrap_or(base.lon),
        lat: a
            .lat_range
            .as_deref()
            .map(parse_pair)
            .transpose()?
            .unwrap_or(base.lat),
        max_depth: a.max_depth.unwrap_or(base.max_depth),
        island: !a.no_island,
        vertical_velocity: !a.no_w,
    };
    let d = spec.dataset().map_err(usage)?;
    write_raw(&d, &a.output).map_err(data)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_with_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.toml");
        fs::write(
            &path,
            "lon = \"nav_lon\"\nu = \"uvel\"\n[defaults]\njobs = 2\npersistence = 0.01\n",
        )
        .unwrap();
        let cfg = Config::load(Some(&path), &["v=vvel".into(), "temperature=".into()]).unwrap();
        assert_eq!(cfg.map.lon, "nav_lon");
        assert_eq!(cfg.map.u.as_deref(), Some("uvel"));
        assert_eq!(cfg.map.v.as_deref(), Some("vvel"));
        assert_eq!(cfg.map.temperature, None);
        assert_eq!(cfg.defaults.jobs, Some(2));
        assert_eq!(cfg.defaults.persistence, Some(0.01));

        fs::write(&path, "[defaults]\nbogus = 1\n").unwrap();
        assert_eq!(
            Config::load(Some(&path), &[]).unwrap_err().code(),
            EXIT_USAGE
        );
        fs::write(&path, "[extra]\n").unwrap();
        assert_eq!(
            Config::load(Some(&path), &[]).unwrap_err().code(),
            EXIT_USAGE
        );
        assert_eq!(
            Config::load(None, &["nonsense".into()]).unwrap_err().code(),
            EXIT_USAGE
        );
    }

    #[test]
    fn argument_parsing() {
        assert_eq!(parse_steps("3").unwrap(), (3, 3));
        assert_eq!(parse_steps("2:5").unwrap(), (2, 5));
        assert_eq!(parse_pair::<f64>("-1.5:2").unwrap(), (-1.5, 2.0));
        assert!(parse_pair::<f64>("1").is_err());
        assert_eq!(
            parse_point("80,12.5,10").unwrap(),
            Position::new(80.0, 12.5, 10.0)
        );
        assert!(matches!(
            FieldSpec::parse("okubo-weiss"),
            Ok(FieldSpec::Derived(DerivedFieldKind::OkuboWeiss))
        ));
        assert!(matches!(
            FieldSpec::parse("salinity"),
            Ok(FieldSpec::Role(VariableRole::Salinity))
        ));
        assert!(FieldSpec::parse("pressure").is_err());
        assert_eq!(
            with_extension(Path::new("out/e"), ".json"),
            PathBuf::from("out/e.json")
        );
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["oceanflow", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["oceanflow", "--help"]), EXIT_OK);
        assert_eq!(
            run(["oceanflow", "info", "/nonexistent/file.nc"]),
            EXIT_DATA
        );
    }
}
