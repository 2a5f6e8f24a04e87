//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or exceeds its time limit.

use std::collections::{BTreeSet, HashSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smallprod::explorer::{self, Campaign, Conjecture, HuntGrid, StoreLine};
use smallprod::iso::{kappa_restricted, IsoInstance};
use smallprod::laws::{self, BoundMode};
use smallprod::setops::product_set;
use smallprod::{Certificate, Element, FiniteSubset, Group, LawId, Slack, Verdict};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Group law written out independently of the library.
fn oracle_mul(x: &Element, y: &Element) -> Element {
    match (x, y) {
        (Element::Lattice(a), Element::Lattice(b)) => Element::Lattice(a.iter().zip(b).map(|(p, q)| p + q).collect()),
        (Element::Free(a), Element::Free(b)) => {
            let mut w = a.clone();
            for &g in b {
                if w.last() == Some(&-g) {
                    w.pop();
                } else {
                    w.push(g);
                }
            }
            Element::Free(w)
        }
        (Element::Klein(a, b), Element::Klein(c, d)) => {
            let sign = if c.rem_euclid(2) == 0 { 1 } else { -1 };
            Element::Klein(a + c, sign * b + d)
        }
        (Element::Heisenberg(x1, y1, z1), Element::Heisenberg(x2, y2, z2)) => {
            Element::Heisenberg(x1 + x2, y1 + y2, z1 + z2 + x1 * y2)
        }
        _ => panic!("mixed backends"),
    }
}

fn oracle_product_size(a: &FiniteSubset, b: &FiniteSubset) -> usize {
    let mut s = HashSet::new();
    for x in a {
        for y in b {
            s.insert(oracle_mul(x, y));
        }
    }
    s.len()
}

fn klein(pairs: impl IntoIterator<Item = (i64, i64)>) -> FiniteSubset {
    FiniteSubset::new(Group::Klein, pairs.into_iter().map(|(a, b)| Element::Klein(a, b))).unwrap()
}

fn z(v: impl IntoIterator<Item = i64>) -> FiniteSubset {
    FiniteSubset::new(Group::Lattice(1), v.into_iter().map(|x| Element::Lattice(vec![x]))).unwrap()
}

fn sample(group: Group, pool: &[Element], size: usize, rng: &mut ChaCha8Rng) -> FiniteSubset {
    FiniteSubset::new(group, index::sample(rng, pool.len(), size).into_iter().map(|i| pool[i].clone())).unwrap()
}

fn subsets_of(items: &[i64], sizes: std::ops::RangeInclusive<usize>) -> Vec<Vec<i64>> {
    let n = items.len();
    (0u32..1 << n)
        .filter(|m| sizes.contains(&(m.count_ones() as usize)))
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| items[i]).collect())
        .collect()
}

fn c1_klein_grid() -> Outcome {
    for m in 1..=40i64 {
        let (a, b, r) = laws::example_klein_grid(m).map_err(|e| e.to_string())?;
        let lib = product_set(&a, &b).unwrap().len() as i64;
        let oracle = oracle_product_size(&a, &b) as i64;
        ensure!(lib == m * m + 2 * m, "m={m}: |AB| = {lib}");
        ensure!(oracle == lib, "m={m}: oracle {oracle} vs {lib}");
        ensure!(r.verdict == Verdict::Holds, "m={m}: report {}", r.one_line());
    }
    Ok("|AB| = m²+2m for m = 1..40".into())
}

fn c2_klein_union() -> Outcome {
    for m in 1..=40i64 {
        let (a, r) = laws::example_klein_union(m).map_err(|e| e.to_string())?;
        let sq = product_set(&a, &a).unwrap().len() as i64;
        ensure!(a.len() as i64 == 3 * m + 1, "m={m}: |A| = {}", a.len());
        ensure!(sq == 10 * m - 1, "m={m}: |A²| = {sq}");
        ensure!(oracle_product_size(&a, &a) as i64 == sq, "m={m}: oracle disagrees");
        ensure!(r.verdict == Verdict::Holds, "m={m}: report {}", r.one_line());
    }
    Ok("|A| = 3m+1, |A²| = 10m−1 for m = 1..40".into())
}

fn c3_c_lower() -> Outcome {
    for k in 1..=20i64 {
        let w = laws::empirical_c_lower(k).map_err(|e| e.to_string())?;
        let m = (k + 3) / 2;
        let (a, b) = laws::klein_grid_sets(w.m);
        let def = oracle_product_size(&a, &b) as i64 - a.len() as i64 - b.len() as i64;
        ensure!(w.m == m && w.b_size == m * m, "k={k}: m={} |B|={}", w.m, w.b_size);
        ensure!(w.deficiency == 2 * m - 3 && def == w.deficiency, "k={k}: deficiency {} oracle {def}", w.deficiency);
        ensure!(w.deficiency <= k, "k={k}: deficiency exceeds k");
        ensure!(w.report.verdict == Verdict::Holds, "k={k}: {}", w.report.one_line());
    }
    Ok("deficiency 2⌊(k+3)/2⌋−3 ≤ k with |B| = ⌊(k+3)/2⌋² for k = 1..20".into())
}

fn c4_kempermann_fuzz() -> Outcome {
    let mut total = 0u64;
    for group in ["zd:2", "free:2", "klein", "heis"] {
        let c = Campaign::from_toml(&format!(
            "schema_version = 1\nname = \"kempermann-{group}\"\ngroup = \"{group}\"\nlaws = [\"kempermann\"]\n\
             seed = 2024\ninstances = 10000\njobs = 4\nradius = 6\nsize_a = [1, 12]\nsize_b = [1, 12]\n"
        ))
        .map_err(|e| e.to_string())?;
        let rec = explorer::run_campaign(&c).map_err(|e| e.to_string())?;
        let counts = &rec.counts[&LawId::Kempermann];
        ensure!(counts.total() == 10_000, "{group}: {} reports", counts.total());
        ensure!(counts.violated == 0, "{group}: {} violations", counts.violated);
        for r in rec.reports() {
            let a = r.witness.get_set("A").unwrap();
            let b = r.witness.get_set("B").unwrap();
            let size = oracle_product_size(&a, &b);
            ensure!(size + 1 >= a.len() + b.len(), "{group}: oracle violation {:?}", r.witness);
            ensure!(r.slack == Some(Slack::Exact(size as i64 - (a.len() + b.len()) as i64 + 1)), "{group}: slack mismatch");
        }
        total += counts.total();
    }
    Ok(format!("{total} pairs, 0 violations"))
}

fn c5_equality() -> Outcome {
    let window = z(0..=7);
    let r = laws::check_equality_characterization(&window, 2..=4).map_err(|e| e.to_string())?;
    let sets = subsets_of(&(0..=7).collect::<Vec<_>>(), 2..=4);
    let mut extremal = 0i64;
    let diff = |s: &[i64]| -> Option<i64> {
        let d = s[1] - s[0];
        s.windows(2).all(|w| w[1] - w[0] == d).then_some(d)
    };
    for a in &sets {
        for b in &sets {
            let sums: HashSet<i64> = a.iter().flat_map(|x| b.iter().map(move |y| x + y)).collect();
            if sums.len() + 1 == a.len() + b.len() {
                extremal += 1;
                ensure!(diff(a).is_some() && diff(a) == diff(b), "oracle exception {a:?} {b:?}");
            }
        }
    }
    ensure!(r.verdict == Verdict::Holds, "library: {}", r.one_line());
    ensure!(r.witness.get_param("exceptions").unwrap() == 0, "library reports exceptions");
    let lib = r.witness.get_param("extremal_pairs").unwrap();
    ensure!(lib == extremal, "extremal pairs: library {lib}, oracle {extremal}");
    Ok(format!("{extremal} extremal pairs, all progressions with a common ratio"))
}

fn c6_kappa() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for group in [Group::Lattice(2), Group::Free(2), Group::Klein, Group::Heisenberg] {
        let pool = group.ball(2).unwrap();
        for i in 0..100 {
            let size = rng.random_range(1..=6);
            let c = sample(group, &pool, size, &mut rng);
            let res = kappa_restricted(&IsoInstance::over_ball(c.clone(), 1, 2).unwrap()).map_err(|e| e.to_string())?;
            ensure!(res.kappa_hat == c.len() as i64 - 1, "{group} #{i}: κ̂₁ = {} for |C| = {}", res.kappa_hat, c.len());
            ensure!(res.certificate == Certificate::CertifiedExact, "{group} #{i}: not certified");
        }
    }
    // full enumeration over the window [−6..6]
    let cset = [0i64, 1, 3];
    let window: Vec<i64> = (-6..=6).collect();
    let mut best = i64::MAX;
    let mut by_size: Vec<(usize, BTreeSet<i64>)> = Vec::new();
    for x in subsets_of(&window, 2..=window.len()) {
        let xc: HashSet<i64> = x.iter().flat_map(|a| cset.iter().map(move |c| a + c)).collect();
        let v = xc.len() as i64 - x.len() as i64;
        if v < best {
            best = v;
            by_size.clear();
        }
        if v == best {
            by_size.push((x.len(), x.into_iter().collect()));
        }
    }
    let min_size = by_size.iter().map(|(s, _)| *s).min().unwrap();
    let oracle_atoms: BTreeSet<BTreeSet<i64>> = by_size
        .into_iter()
        .filter(|(s, x)| *s == min_size && x.contains(&0))
        .map(|(_, x)| x)
        .collect();
    let inst = IsoInstance::new(z(cset), 2, z(window.iter().copied())).unwrap();
    let res = kappa_restricted(&inst).map_err(|e| e.to_string())?;
    let lib_atoms: BTreeSet<BTreeSet<i64>> = res
        .atoms
        .iter()
        .map(|u| {
            u.iter()
                .map(|e| match e {
                    Element::Lattice(v) => v[0],
                    _ => unreachable!(),
                })
                .collect()
        })
        .collect();
    ensure!(best == 3 && res.kappa_hat == 3, "κ̂₂ = {} (oracle {best})", res.kappa_hat);
    ensure!(lib_atoms == oracle_atoms, "atoms {lib_atoms:?} vs oracle {oracle_atoms:?}");
    ensure!(lib_atoms.contains(&BTreeSet::from([0, 1])), "{{0,1}} missing from atoms");
    Ok(format!("400 certified κ̂₁ = |C|−1; κ̂₂({{0,1,3}}) = 3 with atoms {oracle_atoms:?}"))
}

fn c7_atom_lemmas() -> Outcome {
    let mut corpus: Vec<(FiniteSubset, usize)> = Vec::new();
    for c in subsets_of(&(0..=8).collect::<Vec<_>>(), 1..=4) {
        for n in 1..=3 {
            corpus.push((z(c.clone()), n));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for group in [Group::Lattice(2), Group::Free(2), Group::Klein, Group::Heisenberg] {
        let pool = group.ball(1).unwrap();
        for _ in 0..40 {
            let size = rng.random_range(2..=4);
            corpus.push((sample(group, &pool, size, &mut rng), rng.random_range(1..=2)));
        }
    }
    let mut certified = 0;
    let mut checks = 0;
    for (c, n) in &corpus {
        let radius = if c.group() == Group::Lattice(1) { 6 } else { 2 };
        let res = kappa_restricted(&IsoInstance::over_ball(c.clone(), *n, radius).unwrap()).map_err(|e| e.to_string())?;
        if res.certificate != Certificate::CertifiedExact {
            continue;
        }
        certified += 1;
        for r in laws::check_atom_lemmas(c, *n, None, &res).map_err(|e| e.to_string())? {
            checks += 1;
            ensure!(r.verdict != Verdict::Violated, "{}: {:?}", r.one_line(), r.witness);
            ensure!(r.law.is_conjecture() || r.verdict != Verdict::Finding, "unexpected finding {}", r.one_line());
        }
    }
    ensure!(certified > 0, "no certified results in the corpus");
    let grid = HuntGrid::Subsets {
        pool: z(0..=8),
        sizes: 1..=9,
        n_max: 3,
        window_radius: 8,
    };
    let findings = explorer::hunt(Conjecture::AtomCardinality, &grid).map_err(|e| e.to_string())?;
    ensure!(findings.is_empty(), "{} atom-cardinality findings, first {:?}", findings.len(), findings[0]);
    Ok(format!("{checks} lemma checks on {certified} certified results; 0 atom-cardinality findings"))
}

fn c8_uvk() -> Outcome {
    let pool = Group::Klein.ball(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = klein([(0, 0), (1, 0), (0, 1)]);
    let hi = pool.len().min(150);
    for i in 0..200 {
        let size = rng.random_range(109..=hi);
        let b = sample(Group::Klein, &pool, size, &mut rng);
        let r = laws::check_uvk(&b, 3).map_err(|e| e.to_string())?;
        let ab = oracle_product_size(&a, &b);
        ensure!(r.verdict == Verdict::Holds, "#{i}: {}", r.one_line());
        ensure!(ab > b.len() + 3, "#{i}: oracle |AB| = {ab}, |B| = {}", b.len());
    }
    Ok(format!("200 sets with 109 ≤ |B| ≤ {hi} (ball(8) has {} elements)", pool.len()))
}

fn c9_main_theorem() -> Outcome {
    let (a, b) = laws::klein_grid_sets(23);
    ensure!(b.len() == 529 && 529 > BoundMode::UniqueProduct.threshold(1), "grid size");
    let r = laws::check_main_theorem(&a, &b, 1, BoundMode::UniqueProduct).map_err(|e| e.to_string())?;
    let ab = oracle_product_size(&a, &b);
    ensure!(ab == 575, "|AB| = {ab}");
    ensure!(r.verdict == Verdict::Holds && r.slack == Some(Slack::Exact(575 - 533)), "{}", r.one_line());
    let g = laws::check_main_theorem(&a, &b, 1, BoundMode::General).map_err(|e| e.to_string())?;
    ensure!(g.verdict == Verdict::Skipped, "general bound: {}", g.one_line());
    ensure!(g.note.as_deref().is_some_and(|n| n.starts_with("skipped_by_scale")), "note {:?}", g.note);
    for k in 1..=10 {
        ensure!(BoundMode::General.threshold(k) > laws::DESK_SCALE, "k={k} within desk scale");
    }
    Ok("|AB| = 575 > 533; general bound 32(k+3)⁶ skipped_by_scale".into())
}

fn c10_three_k_four() -> Outcome {
    let mut hyp = 0;
    for a in subsets_of(&(0..=10).collect::<Vec<_>>(), 4..=5) {
        let k = a.len() as i64;
        let sums: HashSet<i64> = a.iter().flat_map(|x| a.iter().map(move |y| x + y)).collect();
        let r = laws::check_3k4(&z(a.iter().copied())).map_err(|e| e.to_string())?;
        if sums.len() as i64 > 3 * k - 4 {
            ensure!(r.verdict == Verdict::HypothesisNotMet, "{a:?}: {}", r.one_line());
            continue;
        }
        hyp += 1;
        let g = a.windows(2).map(|w| w[1] - w[0]).fold(0, num_gcd);
        let cover = (a[a.len() - 1] - a[0]) / g + 1;
        ensure!(cover <= 2 * k - 3, "oracle exception {a:?} cover {cover}");
        ensure!(r.verdict == Verdict::Holds, "{a:?}: {}", r.one_line());
        ensure!(r.witness.get_param("cover").unwrap() == cover, "{a:?}: cover {} vs {cover}", r.witness.get_param("cover").unwrap());
    }
    Ok(format!("{hyp} sets meet the hypothesis, all covered"))
}

fn num_gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        num_gcd(b, a % b)
    }
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = "schema_version = 1\nname = \"det\"\ngroup = \"klein\"\n\
                laws = [\"kempermann\", \"kempermann_equality\", \"hls\", \"3k4\", \"two_progression_union\", \
                \"uvk\", \"main_theorem\", \"intersection\", \"atom_left\", \"atom_right\", \"atom_nonunique\", \
                \"two_atom_rough\", \"two_atom\", \"n_atom\", \"atom_conjecture\", \"klein_grid\", \"klein_union\", \"c_lower\"]\n\
                seed = 99\ninstances = 400\nradius = 4\nsize_a = [1, 5]\nsize_b = [1, 8]\nn = [1, 2, 3]\nwindow_radius = 2\n";
    let mut streams = Vec::new();
    for jobs in [1, 4, 1] {
        let c = Campaign::from_toml(&format!("{base}jobs = {jobs}\n")).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("run-{}.jsonl", streams.len()));
        explorer::run_campaign_to(&c, &path).map_err(|e| e.to_string())?;
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let mut instances: Vec<&str> = Vec::new();
        let mut summary = None;
        for line in text.lines() {
            match serde_json::from_str::<StoreLine>(line).map_err(|e| e.to_string())? {
                StoreLine::Instance(_) => instances.push(line),
                StoreLine::Summary(mut s) => {
                    s.wall_clock_ms = 0;
                    summary = Some(s);
                }
            }
        }
        streams.push((instances.join("\n"), summary.ok_or("no summary line")?));
    }
    ensure!(streams[0].0 == streams[1].0, "instance lines differ between jobs 1 and 4");
    ensure!(streams[0].0 == streams[2].0, "instance lines differ between repeated runs");
    ensure!(streams[0].1 == streams[1].1, "summaries differ");
    ensure!(streams[0].1.clean, "campaign not clean");
    Ok(format!("400 instances, records_hash {}", &streams[0].1.records_hash[..16]))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: [Criterion; 11] = [
        ("klein grid family", secs(5), c1_klein_grid),
        ("klein union family", secs(5), c2_klein_union),
        ("quadratic c(k) witness", None, c3_c_lower),
        ("kempermann fuzz", secs(60), c4_kempermann_fuzz),
        ("equality characterization", secs(60), c5_equality),
        ("isoperimetric suite", None, c6_kappa),
        ("atom lemma suite", None, c7_atom_lemmas),
        ("uvk at desk scale", secs(120), c8_uvk),
        ("main theorem, unique-product gate", None, c9_main_theorem),
        ("3k-4 exhaustive", secs(60), c10_three_k_four),
        ("determinism", None, c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let verdict = match (&outcome, limit) {
            (Err(e), _) => Err(e.clone()),
            (Ok(_), Some(l)) if took > *l => Err(format!("took {took:.2?}, limit {l:?}")),
            (Ok(msg), _) => Ok(msg.clone()),
        };
        let limit_s = limit.map(|l| format!(" limit {l:?}")).unwrap_or_default();
        match verdict {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} ({took:.2?}{limit_s})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} ({took:.2?}{limit_s})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
