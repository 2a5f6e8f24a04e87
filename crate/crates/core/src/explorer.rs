//! Seeded search campaigns over the law verifiers, with an append-only
//! JSON-lines record store and a CSV summary.
//!
//! Instance `i` of a campaign draws all of its randomness from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `i`, so every instance
//! can be replayed on its own and the record stream does not depend on the
//! number of worker threads.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::group::Group;
use crate::iso::{kappa_restricted, Certificate, IsoInstance};
use crate::laws::{self, k_subsets, BoundMode, EQUALITY_PAIR_CAP};
use crate::report::{LawId, LawReport, Verdict, Witness};
use crate::setops::{deficiency, FiniteSubset};

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const INSTANCE_CAP: usize = 1_000_000;
pub const JOBS_CAP: usize = 256;
pub const SET_SIZE_CAP: usize = 64;
pub const HUNT_CAP: usize = 1 << 20;

/// Instances handed to the worker pool between writes.
const CHUNK: usize = 512;

fn default_jobs() -> usize {
    1
}

fn default_n() -> Vec<usize> {
    vec![1, 2]
}

fn default_k() -> Vec<i64> {
    vec![1]
}

fn default_d() -> i64 {
    3
}

fn default_window_radius() -> u32 {
    3
}

/// A search campaign. Read from TOML:
///
/// ```toml
/// schema_version = 1
/// name = "kempermann-fuzz"
/// group = "klein"
/// laws = ["kempermann", "hls"]
/// seed = 7
/// instances = 1000
/// jobs = 4             # optional, default 1
/// radius = 6
/// size_a = [1, 12]
/// size_b = [1, 12]
/// n = [1, 2]           # optional
/// k = [1]              # optional
/// d = 3                # optional
/// window_radius = 3    # optional
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    pub schema_version: u32,
    pub name: String,
    pub group: Group,
    pub laws: Vec<LawId>,
    pub seed: u64,
    pub instances: usize,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    pub radius: u32,
    pub size_a: [usize; 2],
    pub size_b: [usize; 2],
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_k")]
    pub k: Vec<i64>,
    #[serde(default = "default_d")]
    pub d: i64,
    #[serde(default = "default_window_radius")]
    pub window_radius: u32,
}

impl Campaign {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Campaign = toml::from_str(text).map_err(|e| Error::Usage(format!("campaign config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Campaign::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("campaign serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Usage(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.laws.is_empty() {
            return Err(Error::Usage("campaign lists no laws".into()));
        }
        if self.instances > INSTANCE_CAP {
            return Err(Error::Resource {
                what: "campaign instances",
                requested: self.instances,
                cap: INSTANCE_CAP,
            });
        }
        if self.jobs == 0 || self.jobs > JOBS_CAP {
            return Err(Error::Usage(format!("jobs must be in 1..={JOBS_CAP}")));
        }
        for (name, [lo, hi]) in [("size_a", self.size_a), ("size_b", self.size_b)] {
            if lo == 0 || lo > hi {
                return Err(Error::Usage(format!("{name} must be a range [lo, hi] with 1 ≤ lo ≤ hi")));
            }
            if hi > SET_SIZE_CAP {
                return Err(Error::Resource {
                    what: "sampled set size",
                    requested: hi,
                    cap: SET_SIZE_CAP,
                });
            }
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::Usage("n grid must be non-empty and positive".into()));
        }
        if self.k.is_empty() || self.k.iter().any(|&k| k < 0) {
            return Err(Error::Usage("k grid must be non-empty and non-negative".into()));
        }
        if self.d < 0 {
            return Err(Error::Usage("d must be non-negative".into()));
        }
        let ball = self.group.ball(self.radius)?.len();
        let need = self.size_a[1].max(self.size_b[1]);
        if need > ball {
            return Err(Error::Usage(format!("ball of radius {} has only {ball} elements, sets need {need}", self.radius)));
        }
        self.group.ball(self.window_radius)?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, ignoring `jobs`.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.jobs = 1;
        let json = serde_json::to_vec(&canon).expect("campaign serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Reports produced for one campaign instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub schema_version: u32,
    pub campaign_hash: String,
    pub index: usize,
    pub reports: Vec<LawReport>,
}

/// Per-law verdict counts and slack range.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LawCounts {
    pub holds: u64,
    pub violated: u64,
    pub hypothesis_not_met: u64,
    pub finding: u64,
    pub skipped: u64,
    pub min_slack: Option<f64>,
    pub max_slack: Option<f64>,
}

impl LawCounts {
    pub fn add(&mut self, r: &LawReport) {
        match r.verdict {
            Verdict::Holds => self.holds += 1,
            Verdict::Violated => self.violated += 1,
            Verdict::HypothesisNotMet => self.hypothesis_not_met += 1,
            Verdict::Finding => self.finding += 1,
            Verdict::Skipped => self.skipped += 1,
        }
        if let Some(s) = r.slack {
            let v = s.as_f64();
            self.min_slack = Some(self.min_slack.map_or(v, |m| m.min(v)));
            self.max_slack = Some(self.max_slack.map_or(v, |m| m.max(v)));
        }
    }

    pub fn total(&self) -> u64 {
        self.holds + self.violated + self.hypothesis_not_met + self.finding + self.skipped
    }
}

pub fn tally<'a>(reports: impl IntoIterator<Item = &'a LawReport>) -> BTreeMap<LawId, LawCounts> {
    let mut counts: BTreeMap<LawId, LawCounts> = BTreeMap::new();
    for r in reports {
        counts.entry(r.law).or_default().add(r);
    }
    counts
}

/// Closing line of a stored run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub schema_version: u32,
    pub campaign_hash: String,
    pub name: String,
    pub instances: usize,
    /// Hex SHA-256 over the instance lines in index order.
    pub records_hash: String,
    pub counts: BTreeMap<LawId, LawCounts>,
    pub clean: bool,
    pub wall_clock_ms: u64,
    pub artifact_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoreLine {
    Instance(InstanceRecord),
    Summary(SummaryRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub campaign_hash: String,
    pub records: Vec<InstanceRecord>,
    pub counts: BTreeMap<LawId, LawCounts>,
    pub records_hash: String,
    pub wall_clock_ms: u64,
    pub artifact_version: String,
    /// No theorem-status law was violated.
    pub clean: bool,
}

impl RunRecord {
    pub fn reports(&self) -> impl Iterator<Item = &LawReport> {
        self.records.iter().flat_map(|r| r.reports.iter())
    }

    pub fn summary(&self, name: &str) -> SummaryRecord {
        SummaryRecord {
            schema_version: SCHEMA_VERSION,
            campaign_hash: self.campaign_hash.clone(),
            name: name.to_string(),
            instances: self.records.len(),
            records_hash: self.records_hash.clone(),
            counts: self.counts.clone(),
            clean: self.clean,
            wall_clock_ms: self.wall_clock_ms,
            artifact_version: self.artifact_version.clone(),
        }
    }
}

fn is_clean(counts: &BTreeMap<LawId, LawCounts>) -> bool {
    counts.iter().all(|(law, c)| law.is_conjecture() || c.violated == 0)
}

fn sample_set(group: Group, pool: &[crate::group::Element], size: usize, rng: &mut ChaCha8Rng) -> FiniteSubset {
    let picks = index::sample(rng, pool.len(), size);
    FiniteSubset::new(group, picks.into_iter().map(|i| pool[i].clone())).expect("ball elements")
}

fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// The sets and parameters of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDraw {
    pub a: FiniteSubset,
    pub b: FiniteSubset,
    pub n: usize,
    pub k: i64,
}

pub fn draw_instance(c: &Campaign, index: usize) -> Result<InstanceDraw> {
    let pool = c.group.ball(c.radius)?;
    Ok(draw_from(c, &pool, index))
}

fn draw_from(c: &Campaign, pool: &[crate::group::Element], index: usize) -> InstanceDraw {
    let mut rng = instance_rng(c.seed, index);
    let sa = rng.random_range(c.size_a[0]..=c.size_a[1]);
    let sb = rng.random_range(c.size_b[0]..=c.size_b[1]);
    let a = sample_set(c.group, pool, sa, &mut rng);
    let b = sample_set(c.group, pool, sb, &mut rng);
    let n = c.n[rng.random_range(0..c.n.len())];
    let k = c.k[rng.random_range(0..c.k.len())];
    InstanceDraw { a, b, n, k }
}

fn larger_first(a: &FiniteSubset, b: &FiniteSubset) -> (FiniteSubset, FiniteSubset) {
    if a.len() >= b.len() {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// Runs every campaign law on one drawn instance.
pub fn run_instance(c: &Campaign, draw: &InstanceDraw, index: usize) -> Result<Vec<LawReport>> {
    let InstanceDraw { a, b, n, k } = draw;
    let lattice = matches!(c.group, Group::Lattice(_));
    let family_m = (index % 40) as i64 + 1;
    let needs_iso = c.laws.iter().any(|l| l.is_atom_lemma() || *l == LawId::Intersection);
    let iso = if needs_iso && *n <= c.group.ball(c.window_radius)?.len() {
        Some(kappa_restricted(&IsoInstance::over_ball(a.clone(), *n, c.window_radius)?)?)
    } else {
        None
    };
    let mut out = Vec::new();
    for &law in &c.laws {
        let not_lattice = || LawReport::skipped(law, Witness::new(c.group), "needs a lattice backend");
        match law {
            LawId::Kempermann => out.push(laws::check_kempermann(a, b)?),
            LawId::KempermannEquality => out.push(laws::check_equality_pair(a, b)?),
            LawId::Hls => out.push(laws::check_hls(a, b)?),
            LawId::FreimanDim if lattice => out.push(laws::check_freiman_dim(a)?),
            LawId::RuzsaDim if lattice => {
                let (x, y) = larger_first(a, b);
                out.push(laws::check_ruzsa_dim(&x, &y)?)
            }
            LawId::GardnerGronchi if lattice => {
                let (x, y) = larger_first(a, b);
                out.push(laws::check_gardner_gronchi(&x, &y)?)
            }
            LawId::FreimanDim | LawId::RuzsaDim | LawId::GardnerGronchi => out.push(not_lattice()),
            LawId::ThreeKFour => out.push(laws::check_3k4(a)?),
            LawId::TwoProgressionUnion => out.push(laws::check_two_progression_union(a)?),
            LawId::CorollaryAb => out.push(laws::check_corollary_ab(a)?),
            LawId::Uvk => out.push(laws::check_uvk(b, c.d)?),
            LawId::MainTheorem => out.push(laws::check_main_theorem(a, b, *k, BoundMode::UniqueProduct)?),
            LawId::KleinGrid => out.push(laws::example_klein_grid(family_m)?.2),
            LawId::KleinUnion => out.push(laws::example_klein_union(family_m)?.1),
            LawId::CLower => out.push(laws::empirical_c_lower((index % 20) as i64 + 1)?.report),
            LawId::Intersection => match &iso {
                Some(res) => {
                    for u in &res.atoms {
                        for f in &res.fragments_sample {
                            out.push(crate::iso::check_intersection_property(u, f, *n, res.certificate));
                        }
                    }
                }
                None => out.push(LawReport::skipped(law, Witness::new(c.group), "n exceeds the window")),
            },
            atom => match &iso {
                Some(res) => {
                    for u in &res.atoms {
                        let mut r = laws::check_atom_law(atom, a, *n, None, u)?;
                        if res.certificate != Certificate::CertifiedExact {
                            if r.verdict == Verdict::Violated || r.verdict == Verdict::Finding {
                                r.unconfirmed = true;
                            } else {
                                r = LawReport::skipped(atom, r.witness, "isoperimetric value not certified exact");
                            }
                        }
                        out.push(r);
                    }
                }
                None => out.push(LawReport::skipped(atom, Witness::new(c.group), "n exceeds the window")),
            },
        }
    }
    Ok(out)
}

fn instance_line(rec: &InstanceRecord) -> String {
    serde_json::to_string(&StoreLine::Instance(rec.clone())).expect("record serializes")
}

/// Runs a campaign in memory.
pub fn run_campaign(c: &Campaign) -> Result<RunRecord> {
    run_campaign_inner(c, |_| Ok(()))
}

/// Runs a campaign, appending one line per instance and a summary line to `path`.
/// On a write failure the error names the partially written file.
pub fn run_campaign_to(c: &Campaign, path: &Path) -> Result<RunRecord> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let rec = run_campaign_inner(c, |chunk| {
        for r in chunk {
            writeln!(w, "{}", instance_line(r)).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    })?;
    let summary = serde_json::to_string(&StoreLine::Summary(rec.summary(&c.name))).expect("summary serializes");
    writeln!(w, "{summary}").map_err(io_err)?;
    w.flush().map_err(io_err)?;
    Ok(rec)
}

fn run_campaign_inner(
    c: &Campaign,
    mut sink: impl FnMut(&[InstanceRecord]) -> Result<()>,
) -> Result<RunRecord> {
    c.validate()?;
    let start = Instant::now();
    let hash = c.hash();
    let pool = c.group.ball(c.radius)?;
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(c.jobs)
        .build()
        .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    let mut records = Vec::with_capacity(c.instances);
    let mut hasher = Sha256::new();
    for lo in (0..c.instances).step_by(CHUNK) {
        let hi = (lo + CHUNK).min(c.instances);
        let chunk: Vec<InstanceRecord> = threads.install(|| {
            (lo..hi)
                .into_par_iter()
                .map(|i| {
                    let draw = draw_from(c, &pool, i);
                    Ok(InstanceRecord {
                        schema_version: SCHEMA_VERSION,
                        campaign_hash: hash.clone(),
                        index: i,
                        reports: run_instance(c, &draw, i)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for r in &chunk {
            hasher.update(instance_line(r).as_bytes());
            hasher.update(b"\n");
        }
        sink(&chunk)?;
        records.extend(chunk);
    }
    let counts = tally(records.iter().flat_map(|r| r.reports.iter()));
    Ok(RunRecord {
        campaign_hash: hash,
        clean: is_clean(&counts),
        counts,
        records,
        records_hash: hex::encode(hasher.finalize()),
        wall_clock_ms: start.elapsed().as_millis() as u64,
        artifact_version: ARTIFACT_VERSION.to_string(),
    })
}

/// Reads every line of a record store.
pub fn read_store(path: &Path) -> Result<Vec<StoreLine>> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StoreLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Per-law counts over every instance line of a store.
pub fn store_counts(lines: &[StoreLine]) -> BTreeMap<LawId, LawCounts> {
    tally(lines.iter().flat_map(|l| match l {
        StoreLine::Instance(r) => r.reports.as_slice(),
        StoreLine::Summary(_) => &[],
    }))
}

/// Comma-separated summary: law, verdict counts, slack range.
pub fn summary_csv(counts: &BTreeMap<LawId, LawCounts>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Usage(format!("csv: {e}"));
    w.write_record([
        "law",
        "holds",
        "violated",
        "hypothesis_not_met",
        "finding",
        "skipped",
        "min_slack",
        "max_slack",
    ])
    .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (law, c) in counts {
        w.write_record([
            law.as_str().to_string(),
            c.holds.to_string(),
            c.violated.to_string(),
            c.hypothesis_not_met.to_string(),
            c.finding.to_string(),
            c.skipped.to_string(),
            opt(c.min_slack),
            opt(c.max_slack),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Usage(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Writes the CSV summary of a store next to it, returning its path.
pub fn export_summary(store: &Path) -> Result<PathBuf> {
    let csv = summary_csv(&store_counts(&read_store(store)?))?;
    let out = store.with_extension("csv");
    std::fs::write(&out, csv).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    Ok(out)
}

/// All pairs of subsets of `window` with the given sizes that reach the
/// minimum deficiency, in lexicographic order of their index sets.
pub fn extremal_pairs(
    window: &FiniteSubset,
    size_a: usize,
    size_b: usize,
) -> Result<Vec<(FiniteSubset, FiniteSubset, i64)>> {
    let sa = k_subsets(window.len(), size_a);
    let sb = k_subsets(window.len(), size_b);
    let pairs = sa.len().saturating_mul(sb.len());
    if pairs > EQUALITY_PAIR_CAP {
        return Err(Error::Resource {
            what: "pairs in the extremal enumeration",
            requested: pairs,
            cap: EQUALITY_PAIR_CAP,
        });
    }
    let bs: Vec<FiniteSubset> = sb.into_iter().map(|i| window.subset(i)).collect();
    let mut best = i64::MAX;
    let mut out = Vec::new();
    for ia in sa {
        let a = window.subset(ia);
        for b in &bs {
            let d = deficiency(&a, b)?;
            if d < best {
                best = d;
                out.clear();
            }
            if d == best {
                out.push((a.clone(), b.clone(), d));
            }
        }
    }
    Ok(out)
}

/// Open statements the hunter can scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conjecture {
    /// |A²| ≤ 3|A| − 4 puts A in a progression of length ≤ 2|A| − 3.
    ProgressionCover,
    /// Every n-atom has exactly n elements.
    AtomCardinality,
    /// |A²| < (10/3)|A| − 5 makes A a union of two progressions.
    TwoProgressionUnion,
}

impl FromStr for Conjecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conj1" | "3k4" => Ok(Conjecture::ProgressionCover),
            "conj2" | "atom_conjecture" => Ok(Conjecture::AtomCardinality),
            "union" | "two_progression_union" => Ok(Conjecture::TwoProgressionUnion),
            _ => Err(Error::Usage(format!("unknown conjecture `{s}`"))),
        }
    }
}

/// Sets the hunter visits.
#[derive(Debug, Clone)]
pub enum HuntGrid {
    /// Every subset of `pool` with size in `sizes`. Atom hunts use each
    /// subset as C with n = 1..=n_max over ball(window_radius).
    Subsets {
        pool: FiniteSubset,
        sizes: RangeInclusive<usize>,
        n_max: usize,
        window_radius: u32,
    },
    /// The Klein union family for m = 1..=m_max.
    KleinUnionFamily { m_max: i64 },
}

impl HuntGrid {
    fn sets(&self) -> Result<Vec<FiniteSubset>> {
        match self {
            HuntGrid::Subsets { pool, sizes, .. } => {
                let mut total = 0usize;
                let mut out = Vec::new();
                for k in sizes.clone() {
                    let idx = k_subsets(pool.len(), k);
                    total = total.saturating_add(idx.len());
                    if total > HUNT_CAP {
                        return Err(Error::Resource {
                            what: "sets in the hunt grid",
                            requested: total,
                            cap: HUNT_CAP,
                        });
                    }
                    out.extend(idx.into_iter().map(|i| pool.subset(i)));
                }
                Ok(out)
            }
            HuntGrid::KleinUnionFamily { m_max } => Ok((1..=*m_max).map(laws::klein_union_set).collect()),
        }
    }
}

/// Scans a grid and returns only the `finding` and `violated` reports.
pub fn hunt(conj: Conjecture, grid: &HuntGrid) -> Result<Vec<LawReport>> {
    let sets = grid.sets()?;
    let reports: Vec<Vec<LawReport>> = sets
        .par_iter()
        .map(|a| -> Result<Vec<LawReport>> {
            match conj {
                Conjecture::ProgressionCover => Ok(vec![laws::check_3k4(a)?]),
                Conjecture::TwoProgressionUnion => Ok(vec![laws::check_two_progression_union(a)?]),
                Conjecture::AtomCardinality => {
                    let (n_max, radius) = match grid {
                        HuntGrid::Subsets { n_max, window_radius, .. } => (*n_max, *window_radius),
                        HuntGrid::KleinUnionFamily { .. } => (3, 3),
                    };
                    let mut out = Vec::new();
                    for n in 1..=n_max {
                        let res = kappa_restricted(&IsoInstance::over_ball(a.clone(), n, radius)?)?;
                        for u in &res.atoms {
                            let mut r = laws::check_atom_law(LawId::AtomConjecture, a, n, None, u)?;
                            r.unconfirmed = res.certificate != Certificate::CertifiedExact;
                            out.push(r);
                        }
                    }
                    Ok(out)
                }
            }
        })
        .collect::<Result<_>>()?;
    Ok(reports
        .into_iter()
        .flatten()
        .filter(|r| matches!(r.verdict, Verdict::Finding | Verdict::Violated))
        .collect())
}
