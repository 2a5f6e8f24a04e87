use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use smallprod::explorer::{self, Campaign, StoreLine};
use smallprod::iso::{check_intersection_property, kappa_restricted, IsoInstance};
use smallprod::laws::{self, BoundMode};
use smallprod::setops::{deficiency, product_set};
use smallprod::{Certificate, Error, FiniteSubset, Group, LawId, LawReport, Verdict, Witness};

/// Product sets, isoperimetric numbers and law checks in torsion-free groups.
///
/// Every flag can also be set through an environment variable named
/// SMALLPROD_<FLAG>, e.g. SMALLPROD_GROUP=klein.
#[derive(Parser, Debug)]
#[command(name = "smallprod", version)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true, env = "SMALLPROD_FORMAT")]
    format: Format,

    /// Write output here instead of stdout (for `explore`: the record store).
    #[arg(long, global = true, env = "SMALLPROD_OUT")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the product set AB of two set files.
    Sumset {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "zd:1", env = "SMALLPROD_GROUP")]
        group: Group,
    },
    /// Restricted isoperimetric number of C over a ball window.
    Kappa {
        c: PathBuf,
        #[arg(long, default_value = "zd:1", env = "SMALLPROD_GROUP")]
        group: Group,
        #[arg(long, default_value_t = 1, env = "SMALLPROD_N")]
        n: usize,
        #[arg(long, default_value_t = 4, env = "SMALLPROD_RADIUS")]
        radius: u32,
    },
    /// Check one or more laws on given or sampled sets.
    Verify(VerifyArgs),
    /// Build one of the example families and check it.
    Example {
        #[arg(long, value_enum)]
        name: ExampleName,
        #[arg(long, default_value_t = 3, env = "SMALLPROD_M")]
        m: i64,
        #[arg(long, default_value_t = 1, env = "SMALLPROD_K")]
        k: i64,
    },
    /// Run a search campaign from a config file.
    Explore {
        #[arg(long, env = "SMALLPROD_CONFIG")]
        config: PathBuf,
        /// Override the campaign's parallelism.
        #[arg(long, env = "SMALLPROD_JOBS")]
        jobs: Option<usize>,
        /// Override the campaign's seed.
        #[arg(long, env = "SMALLPROD_SEED")]
        seed: Option<u64>,
    },
    /// Summarize a stored run.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(clap::Args, Debug)]
struct VerifyArgs {
    /// Law id; repeat for several.
    #[arg(long, required = true)]
    law: Vec<LawId>,
    #[arg(long, default_value = "zd:1", env = "SMALLPROD_GROUP")]
    group: Group,
    /// Set file for A (also C for isoperimetric laws); sampled when absent.
    #[arg(long)]
    a: Option<PathBuf>,
    /// Set file for B; sampled when absent.
    #[arg(long)]
    b: Option<PathBuf>,
    #[arg(long, default_value_t = 2, env = "SMALLPROD_N")]
    n: usize,
    #[arg(long, env = "SMALLPROD_K")]
    k: Option<i64>,
    #[arg(long, default_value_t = 3, env = "SMALLPROD_D")]
    d: i64,
    #[arg(long, default_value_t = 3, env = "SMALLPROD_M")]
    m: i64,
    /// Ball radius for sampling and for the isoperimetric window.
    #[arg(long, default_value_t = 3, env = "SMALLPROD_RADIUS")]
    radius: u32,
    /// Size of sampled sets.
    #[arg(long, default_value_t = 4)]
    size: usize,
    /// Use the general bound on c(k) for main_theorem.
    #[arg(long)]
    general: bool,
    #[arg(long, env = "SMALLPROD_SEED")]
    seed: Option<u64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ExampleName {
    KleinGrid,
    KleinUnion,
    CLower,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

type Res<T> = smallprod::Result<T>;

fn io_err(path: &Path) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn read_set(group: Group, path: &Path) -> Res<FiniteSubset> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let s = FiniteSubset::parse(group, &text)?;
    if s.is_empty() {
        return Err(Error::Usage(format!("{} holds no elements", path.display())));
    }
    Ok(s)
}

struct Output {
    sink: Box<dyn Write>,
    path: Option<PathBuf>,
}

impl Output {
    fn open(path: Option<&Path>) -> Res<Self> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(fs::File::create(p).map_err(io_err(p))?),
            None => Box::new(io::stdout().lock()),
        };
        Ok(Output {
            sink,
            path: path.map(Path::to_path_buf),
        })
    }

    fn line(&mut self, s: impl AsRef<str>) -> Res<()> {
        let path = self.path.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
        writeln!(self.sink, "{}", s.as_ref()).map_err(io_err(&path))
    }
}

fn run(cli: &Cli) -> Res<ExitCode> {
    match &cli.cmd {
        Command::Sumset { a, b, group } => sumset(cli, *group, a, b),
        Command::Kappa { c, group, n, radius } => kappa(cli, *group, c, *n, *radius),
        Command::Verify(args) => verify(cli, args),
        Command::Example { name, m, k } => example(cli, *name, *m, *k),
        Command::Explore { config, jobs, seed } => explore(cli, config, *jobs, *seed),
        Command::Report { run } => report(cli, run),
    }
}

fn sumset(cli: &Cli, group: Group, a: &Path, b: &Path) -> Res<ExitCode> {
    let a = read_set(group, a)?;
    let b = read_set(group, b)?;
    let ab = product_set(&a, &b)?;
    let def = deficiency(&a, &b)?;
    let mut out = Output::open(cli.out.as_deref())?;
    match cli.format {
        Format::Json => out.line(
            json!({"group": group.to_string(), "product": ab.to_strings(), "size": ab.len(), "deficiency": def})
                .to_string(),
        )?,
        Format::Csv => {
            out.line("element")?;
            for s in ab.to_strings() {
                out.line(csv_field(&s))?;
            }
        }
        Format::Text => {
            out.line(format!("AB = {ab}"))?;
            out.line(format!("|AB| = {}", ab.len()))?;
            out.line(format!("deficiency = {def}"))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn kappa(cli: &Cli, group: Group, c: &Path, n: usize, radius: u32) -> Res<ExitCode> {
    let c = read_set(group, c)?;
    let res = kappa_restricted(&IsoInstance::over_ball(c, n, radius)?)?;
    let rec = res.to_record();
    let mut out = Output::open(cli.out.as_deref())?;
    match cli.format {
        Format::Json => out.line(serde_json::to_string(&rec).expect("record serializes"))?,
        Format::Csv => {
            out.line("kappa_hat,certificate,atom_size,atoms")?;
            let cert = serde_json::to_value(rec.certificate).expect("certificate serializes");
            let atoms: Vec<String> = rec.atoms.iter().map(|a| format!("{{{}}}", a.join(" "))).collect();
            out.line(format!(
                "{},{},{},{}",
                rec.kappa_hat,
                cert.as_str().unwrap_or_default(),
                rec.atom_size,
                csv_field(&atoms.join(";"))
            ))?;
        }
        Format::Text => {
            let cert = serde_json::to_value(rec.certificate).expect("certificate serializes");
            out.line(format!("kappa_hat = {}", rec.kappa_hat))?;
            out.line(format!("certificate = {}", cert.as_str().unwrap_or_default()))?;
            for atom in &res.atoms {
                out.line(format!("atom {atom}"))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Samples lazily so the seed is only announced when randomness is used.
struct Sampler {
    group: Group,
    radius: u32,
    size: usize,
    seed: Option<u64>,
    rng: Option<ChaCha8Rng>,
}

impl Sampler {
    fn draw(&mut self) -> Res<FiniteSubset> {
        if self.rng.is_none() {
            let seed = self.seed.unwrap_or_else(|| {
                let s = rand::random::<u64>();
                eprintln!("seed: {s}");
                s
            });
            self.rng = Some(ChaCha8Rng::seed_from_u64(seed));
        }
        let pool = self.group.ball(self.radius)?;
        let size = self.size.clamp(1, pool.len());
        let picks = index::sample(self.rng.as_mut().unwrap(), pool.len(), size);
        FiniteSubset::new(self.group, picks.into_iter().map(|i| pool[i].clone()))
    }
}

fn verify(cli: &Cli, v: &VerifyArgs) -> Res<ExitCode> {
    let mut sampler = Sampler {
        group: v.group,
        radius: v.radius,
        size: v.size,
        seed: v.seed,
        rng: None,
    };
    let mut a_set: Option<FiniteSubset> = v.a.as_deref().map(|p| read_set(v.group, p)).transpose()?;
    let mut b_set: Option<FiniteSubset> = v.b.as_deref().map(|p| read_set(v.group, p)).transpose()?;
    let mut reports = Vec::new();
    for &law in &v.law {
        let needs_a = !matches!(law, LawId::Uvk | LawId::KleinGrid | LawId::KleinUnion | LawId::CLower);
        let needs_b = matches!(
            law,
            LawId::Kempermann
                | LawId::KempermannEquality
                | LawId::Hls
                | LawId::RuzsaDim
                | LawId::GardnerGronchi
                | LawId::Uvk
                | LawId::MainTheorem
        );
        if needs_a && a_set.is_none() {
            a_set = Some(sampler.draw()?);
        }
        if needs_b && b_set.is_none() {
            b_set = Some(sampler.draw()?);
        }
        let a = a_set.as_ref();
        let b = b_set.as_ref();
        match law {
            LawId::Kempermann => reports.push(laws::check_kempermann(a.unwrap(), b.unwrap())?),
            LawId::KempermannEquality => reports.push(laws::check_equality_pair(a.unwrap(), b.unwrap())?),
            LawId::Hls => reports.push(laws::check_hls(a.unwrap(), b.unwrap())?),
            LawId::FreimanDim => reports.push(laws::check_freiman_dim(a.unwrap())?),
            LawId::RuzsaDim => reports.push(laws::check_ruzsa_dim(a.unwrap(), b.unwrap())?),
            LawId::GardnerGronchi => reports.push(laws::check_gardner_gronchi(a.unwrap(), b.unwrap())?),
            LawId::ThreeKFour => reports.push(laws::check_3k4(a.unwrap())?),
            LawId::CorollaryAb => reports.push(laws::check_corollary_ab(a.unwrap())?),
            LawId::TwoProgressionUnion => reports.push(laws::check_two_progression_union(a.unwrap())?),
            LawId::Uvk => reports.push(laws::check_uvk(b.unwrap(), v.d)?),
            LawId::MainTheorem => {
                let mode = if v.general { BoundMode::General } else { BoundMode::UniqueProduct };
                reports.push(laws::check_main_theorem(a.unwrap(), b.unwrap(), v.k.unwrap_or(1), mode)?)
            }
            LawId::KleinGrid => reports.push(laws::example_klein_grid(v.m)?.2),
            LawId::KleinUnion => reports.push(laws::example_klein_union(v.m)?.1),
            LawId::CLower => reports.push(laws::empirical_c_lower(v.k.unwrap_or(1))?.report),
            LawId::Intersection => {
                let c = a.unwrap();
                let res = kappa_restricted(&IsoInstance::over_ball(c.clone(), v.n, v.radius)?)?;
                for u in &res.atoms {
                    for f in &res.fragments_sample {
                        reports.push(check_intersection_property(u, f, v.n, res.certificate));
                    }
                }
            }
            atom => {
                let c = a.unwrap();
                let res = kappa_restricted(&IsoInstance::over_ball(c.clone(), v.n, v.radius)?)?;
                if res.certificate != Certificate::CertifiedExact {
                    let w = Witness::new(v.group).set("C", c).param("n", v.n as i64);
                    reports.push(LawReport::skipped(atom, w, "isoperimetric value not certified exact"));
                    continue;
                }
                for u in &res.atoms {
                    reports.push(laws::check_atom_law(atom, c, v.n, v.k, u)?);
                }
            }
        }
    }
    let mut out = Output::open(cli.out.as_deref())?;
    emit_reports(&mut out, cli.format, &reports)?;
    Ok(exit_for(&reports))
}

fn exit_for<'a>(reports: impl IntoIterator<Item = &'a LawReport>) -> ExitCode {
    let violated = reports
        .into_iter()
        .any(|r| r.verdict == Verdict::Violated && !r.law.is_conjecture());
    if violated {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn emit_reports(out: &mut Output, format: Format, reports: &[LawReport]) -> Res<()> {
    match format {
        Format::Json => {
            for r in reports {
                out.line(serde_json::to_string(r).expect("report serializes"))?;
            }
        }
        Format::Csv => {
            out.line("law,verdict,slack,note")?;
            for r in reports {
                let slack = r.slack.map(|s| s.to_string()).unwrap_or_default();
                let note = r.note.clone().unwrap_or_default();
                out.line(format!("{},{},{},{}", r.law, r.verdict, slack, csv_field(&note)))?;
            }
        }
        Format::Text => {
            for r in reports {
                out.line(r.one_line())?;
            }
        }
    }
    Ok(())
}

fn example(cli: &Cli, name: ExampleName, m: i64, k: i64) -> Res<ExitCode> {
    let mut out = Output::open(cli.out.as_deref())?;
    let (sets, report): (Vec<(&str, FiniteSubset)>, LawReport) = match name {
        ExampleName::KleinGrid => {
            let (a, b, r) = laws::example_klein_grid(m)?;
            let ab = product_set(&a, &b)?;
            (vec![("A", a), ("B", b), ("AB", ab)], r)
        }
        ExampleName::KleinUnion => {
            let (a, r) = laws::example_klein_union(m)?;
            let aa = product_set(&a, &a)?;
            (vec![("A", a), ("A2", aa)], r)
        }
        ExampleName::CLower => {
            let w = laws::empirical_c_lower(k)?;
            let (a, b) = laws::klein_grid_sets(w.m);
            (vec![("A", a), ("B", b)], w.report)
        }
    };
    match cli.format {
        Format::Json => {
            let sets: serde_json::Map<String, serde_json::Value> = sets
                .iter()
                .map(|(n, s)| (n.to_string(), json!(s.to_strings())))
                .collect();
            out.line(json!({"group": "klein", "sets": sets, "report": report}).to_string())?;
        }
        Format::Csv => {
            out.line("set,size")?;
            for (n, s) in &sets {
                out.line(format!("{n},{}", s.len()))?;
            }
        }
        Format::Text => {
            for (n, s) in &sets {
                out.line(format!("|{n}| = {}", s.len()))?;
            }
            for (n, s) in &sets {
                out.line(format!("{n} = {s}"))?;
            }
            out.line(report.one_line())?;
        }
    }
    Ok(exit_for([&report]))
}

fn explore(cli: &Cli, config: &Path, jobs: Option<usize>, seed: Option<u64>) -> Res<ExitCode> {
    let mut c = Campaign::load(config)?;
    if let Some(j) = jobs {
        c.jobs = j;
    }
    if let Some(s) = seed {
        c.seed = s;
    }
    let store = cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.jsonl", c.name)));
    let rec = explorer::run_campaign_to(&c, &store)?;
    let summary = rec.summary(&c.name);
    let mut out = Output::open(None)?;
    match cli.format {
        Format::Json => out.line(serde_json::to_string(&StoreLine::Summary(summary)).expect("summary serializes"))?,
        Format::Csv => out.line(explorer::summary_csv(&rec.counts)?.trim_end())?,
        Format::Text => {
            for r in &rec.records {
                for rep in &r.reports {
                    if matches!(rep.verdict, Verdict::Finding | Verdict::Violated) {
                        out.line(format!("instance {}: {}", r.index, rep.one_line()))?;
                    }
                }
            }
            out.line(format!("campaign {} ({})", c.name, rec.campaign_hash))?;
            out.line(format!("instances {}", rec.records.len()))?;
            out.line(format!("records_hash {}", rec.records_hash))?;
            out.line(format!("store {}", store.display()))?;
            out.line(format!("clean {}", rec.clean))?;
            out.line(format!("wall_clock_ms {}", rec.wall_clock_ms))?;
        }
    }
    Ok(exit_for(rec.reports()))
}

fn report(cli: &Cli, run: &Path) -> Res<ExitCode> {
    let lines = explorer::read_store(run)?;
    let counts = explorer::store_counts(&lines);
    let mut out = Output::open(cli.out.as_deref())?;
    match cli.format {
        Format::Json => {
            for (law, c) in &counts {
                out.line(json!({"law": law, "counts": c}).to_string())?;
            }
        }
        Format::Csv => out.line(explorer::summary_csv(&counts)?.trim_end())?,
        Format::Text => {
            out.line(format!(
                "{:<22} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10}",
                "law", "holds", "violated", "hyp_no", "finding", "skipped", "min_slack", "max_slack"
            ))?;
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
            for (law, c) in &counts {
                out.line(format!(
                    "{:<22} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10}",
                    law.as_str(),
                    c.holds,
                    c.violated,
                    c.hypothesis_not_met,
                    c.finding,
                    c.skipped,
                    opt(c.min_slack),
                    opt(c.max_slack)
                ))?;
            }
        }
    }
    let violated = counts.iter().any(|(law, c)| !law.is_conjecture() && c.violated > 0);
    Ok(if violated { ExitCode::from(1) } else { ExitCode::SUCCESS })
}
