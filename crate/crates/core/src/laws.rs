//! Verifiers for the inequalities, lemmas and example families on small
//! product sets. Every checker returns a [`LawReport`] whose witness is
//! enough to recompute it with [`replay`].

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::group::{Element, Group};
use crate::iso::{Certificate, IsoResult};
use crate::report::{LawId, LawReport, Slack, Verdict, Witness};
use crate::setops::{
    cyclic_hull_contains, deficiency, dimension, is_left_progression_of, is_right_progression_of,
    min_progression_cover, pair_ratios, product_set, union_of_two_progressions, FiniteSubset,
};

/// Largest number of pairs the exhaustive equality check will enumerate.
pub const EQUALITY_PAIR_CAP: usize = 2_000_000;

/// Largest general-bound threshold on |B| treated as reachable at desk scale.
pub const DESK_SCALE: i64 = 100_000;

/// Guard band for comparisons against real-valued bounds.
pub const REAL_GUARD: f64 = 1e-9;

/// Which bound on c(k) gates the main theorem's hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    /// |B| > 4(2k+3)³, valid in unique-product groups.
    UniqueProduct,
    /// |B| > 32(k+3)⁶, valid in every torsion-free group.
    General,
}

impl BoundMode {
    pub fn threshold(&self, k: i64) -> i64 {
        match self {
            BoundMode::UniqueProduct => 4 * (2 * k + 3).pow(3),
            BoundMode::General => 32 * (k + 3).pow(6),
        }
    }

    fn code(&self) -> i64 {
        match self {
            BoundMode::UniqueProduct => 0,
            BoundMode::General => 1,
        }
    }

    fn from_code(c: i64) -> Result<Self> {
        match c {
            0 => Ok(BoundMode::UniqueProduct),
            1 => Ok(BoundMode::General),
            _ => Err(Error::Usage(format!("unknown bound mode {c}"))),
        }
    }
}

fn size(s: &FiniteSubset) -> i64 {
    s.len() as i64
}

fn binom2(d: i64) -> i64 {
    d * (d - 1) / 2
}

fn lattice_only(a: &FiniteSubset) -> Result<()> {
    match a.group() {
        Group::Lattice(_) => Ok(()),
        g => Err(Error::Unsupported(format!("dimension bounds need a lattice backend, not {g}"))),
    }
}

/// |AB| ≥ |A| + |B| − 1.
pub fn check_kempermann(a: &FiniteSubset, b: &FiniteSubset) -> Result<LawReport> {
    let ab = product_set(a, b)?;
    let w = Witness::new(a.group()).set("A", a).set("B", b);
    Ok(LawReport::at_least(LawId::Kempermann, size(&ab), size(a) + size(b) - 1, w))
}

/// A ratio r with A a left r-progression and B a right r-progression, up to translation.
pub fn common_progression_ratio(a: &FiniteSubset, b: &FiniteSubset) -> Option<Element> {
    pair_ratios(a)
        .into_iter()
        .find(|r| is_left_progression_of(a, r) && is_right_progression_of(b, r))
}

/// A single pair with min(|A|,|B|) ≥ 2 and |AB| = |A| + |B| − 1 must be a
/// pair of progressions with a common ratio.
pub fn check_equality_pair(a: &FiniteSubset, b: &FiniteSubset) -> Result<LawReport> {
    let w = Witness::new(a.group()).set("A", a).set("B", b);
    if a.len().min(b.len()) < 2 {
        return Ok(LawReport::hypothesis_not_met(LawId::KempermannEquality, w, "min(|A|,|B|) < 2"));
    }
    if deficiency(a, b)? != -1 {
        return Ok(LawReport::hypothesis_not_met(LawId::KempermannEquality, w, "|AB| > |A| + |B| − 1"));
    }
    Ok(match common_progression_ratio(a, b) {
        Some(r) => LawReport::new(LawId::KempermannEquality, Verdict::Holds, None, w.element("ratio", &r)),
        None => LawReport::new(LawId::KempermannEquality, Verdict::Violated, None, w),
    })
}

/// Every pair A, B ⊆ window with sizes in `sizes`, min(|A|,|B|) ≥ 2 and
/// |AB| = |A| + |B| − 1 must be a pair of progressions with a common ratio.
pub fn check_equality_characterization(
    window: &FiniteSubset,
    sizes: RangeInclusive<usize>,
) -> Result<LawReport> {
    let lo = (*sizes.start()).max(2);
    let hi = (*sizes.end()).min(window.len());
    let subsets: Vec<FiniteSubset> = (lo..=hi)
        .flat_map(|k| k_subsets(window.len(), k))
        .map(|idx| window.subset(idx))
        .collect();
    let pairs = subsets.len().saturating_mul(subsets.len());
    if pairs > EQUALITY_PAIR_CAP {
        return Err(Error::Resource {
            what: "pairs in the equality enumeration",
            requested: pairs,
            cap: EQUALITY_PAIR_CAP,
        });
    }
    let mut extremal = 0i64;
    let mut exceptions = 0i64;
    let mut first_bad: Option<(FiniteSubset, FiniteSubset)> = None;
    for a in &subsets {
        for b in &subsets {
            if deficiency(a, b)? != -1 {
                continue;
            }
            extremal += 1;
            if common_progression_ratio(a, b).is_none() {
                exceptions += 1;
                first_bad.get_or_insert_with(|| (a.clone(), b.clone()));
            }
        }
    }
    let mut w = Witness::new(window.group())
        .set("window", window)
        .param("min_size", *sizes.start() as i64)
        .param("max_size", *sizes.end() as i64)
        .param("pairs", pairs as i64)
        .param("extremal_pairs", extremal)
        .param("exceptions", exceptions);
    if let Some((a, b)) = &first_bad {
        w = w.set("A", a).set("B", b);
    }
    let verdict = if exceptions == 0 { Verdict::Holds } else { Verdict::Violated };
    Ok(LawReport::new(LawId::KempermannEquality, verdict, Some(Slack::Exact(-exceptions)), w))
}

/// Index sets of size k from 0..n in lexicographic order.
pub(crate) fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// |AB| ≥ |A| + |B| + 1 when |B| ≥ 4 and A lies in no left coset of a cyclic subgroup.
pub fn check_hls(a: &FiniteSubset, b: &FiniteSubset) -> Result<LawReport> {
    let w = Witness::new(a.group()).set("A", a).set("B", b);
    if b.len() < 4 {
        return Ok(LawReport::hypothesis_not_met(LawId::Hls, w, "|B| < 4"));
    }
    if let Some((g, h)) = cyclic_hull_contains(a) {
        let w = w.element("coset", &g).element("generator", &h);
        return Ok(LawReport::hypothesis_not_met(LawId::Hls, w, "A lies in a left coset of a cyclic subgroup"));
    }
    let ab = product_set(a, b)?;
    Ok(LawReport::at_least(LawId::Hls, size(&ab), size(a) + size(b) + 1, w))
}

/// |A²| ≥ (d+1)|A| − C(d+1, 2) with d the dimension of A.
pub fn check_freiman_dim(a: &FiniteSubset) -> Result<LawReport> {
    lattice_only(a)?;
    let d = dimension(a)?.rank as i64;
    let aa = product_set(a, a)?;
    let w = Witness::new(a.group()).set("A", a).param("d", d);
    Ok(LawReport::at_least(LawId::FreimanDim, size(&aa), (d + 1) * size(a) - binom2(d + 1), w))
}

/// |AB| ≥ |A| + d|B| − C(d+1, 2) when |A| ≥ |B|, with d the dimension of AB.
pub fn check_ruzsa_dim(a: &FiniteSubset, b: &FiniteSubset) -> Result<LawReport> {
    lattice_only(a)?;
    let ab = product_set(a, b)?;
    let d = dimension(&ab)?.rank as i64;
    let w = Witness::new(a.group()).set("A", a).set("B", b).param("d", d);
    if a.len() < b.len() {
        return Ok(LawReport::hypothesis_not_met(LawId::RuzsaDim, w, "|A| < |B|"));
    }
    Ok(LawReport::at_least(LawId::RuzsaDim, size(&ab), size(a) + d * size(b) - binom2(d + 1), w))
}

/// Discrete Brunn–Minkowski bound
/// |AB| ≥ |A| + (d−1)|B| + (|A|−d)^((d−1)/d) (|B|−d)^(1/d) − C(d, 2)
/// for |A| ≥ |B| and B of full dimension d in the span of AB.
pub fn check_gardner_gronchi(a: &FiniteSubset, b: &FiniteSubset) -> Result<LawReport> {
    lattice_only(a)?;
    let ab = product_set(a, b)?;
    let d = dimension(b)?.rank as i64;
    let d_ab = dimension(&ab)?.rank as i64;
    let w = Witness::new(a.group()).set("A", a).set("B", b).param("d", d);
    if a.len() < b.len() {
        return Ok(LawReport::hypothesis_not_met(LawId::GardnerGronchi, w, "|A| < |B|"));
    }
    if d == 0 || d != d_ab {
        return Ok(LawReport::hypothesis_not_met(
            LawId::GardnerGronchi,
            w,
            "B is not full-dimensional in the span of AB",
        ));
    }
    let df = d as f64;
    let rhs = size(a) as f64 + (df - 1.0) * size(b) as f64
        + ((size(a) - d) as f64).powf((df - 1.0) / df) * ((size(b) - d) as f64).powf(1.0 / df)
        - binom2(d) as f64;
    let lhs = size(&ab) as f64;
    let verdict = if lhs >= rhs - REAL_GUARD { Verdict::Holds } else { Verdict::Violated };
    Ok(LawReport::new(LawId::GardnerGronchi, verdict, Some(Slack::Real(lhs - rhs)), w))
}

/// If |A| ≥ 4 and |A²| ≤ 3|A| − 4 then A lies in a progression of length ≤ 2|A| − 3.
///
/// A theorem in abelian backends; elsewhere a failure is reported as a finding.
pub fn check_3k4(a: &FiniteSubset) -> Result<LawReport> {
    let w = Witness::new(a.group()).set("A", a);
    if a.len() < 4 {
        return Ok(LawReport::hypothesis_not_met(LawId::ThreeKFour, w, "|A| < 4"));
    }
    let aa = product_set(a, a)?;
    if size(&aa) > 3 * size(a) - 4 {
        return Ok(LawReport::hypothesis_not_met(LawId::ThreeKFour, w, "|A²| > 3|A| − 4"));
    }
    let fail = if a.group().is_abelian() { Verdict::Violated } else { Verdict::Finding };
    let bound = 2 * size(a) - 3;
    Ok(match min_progression_cover(a) {
        Some(len) => {
            let w = w.param("cover", len as i64);
            let verdict = if len as i64 <= bound { Verdict::Holds } else { fail };
            LawReport::new(LawId::ThreeKFour, verdict, Some(Slack::Exact(bound - len as i64)), w)
        }
        None => LawReport::new(LawId::ThreeKFour, fail, None, w).with_note("A lies in no progression"),
    })
}

fn atom_witness(c: &FiniteSubset, u: &FiniteSubset, n: usize, k: Option<i64>) -> Witness {
    let mut w = Witness::new(c.group()).set("C", c).set("U", u).param("n", n as i64);
    if let Some(k) = k {
        w = w.param("k", k);
    }
    w
}

/// max over g ≠ 1 of |U ∩ gU|; only g ∈ UU⁻¹ can give a non-empty intersection.
fn max_left_overlap(u: &FiniteSubset) -> (i64, Option<Element>) {
    let g = u.group();
    let mut best = (0, None);
    let ratios = product_set(u, &u.inverse()).expect("non-empty atom");
    for x in &ratios {
        if g.is_identity(x) {
            continue;
        }
        let m = u.intersection_len(&u.left_translate(x)) as i64;
        if m > best.0 {
            best = (m, Some(x.clone()));
        }
    }
    best
}

/// max over g ≠ 1 of |U ∩ Ug|, with g ranging over U⁻¹U.
fn max_right_overlap(u: &FiniteSubset) -> (i64, Option<Element>) {
    let g = u.group();
    let mut best = (0, None);
    let ratios = product_set(&u.inverse(), u).expect("non-empty atom");
    for x in &ratios {
        if g.is_identity(x) {
            continue;
        }
        let m = u.intersection_len(&u.right_translate(x)) as i64;
        if m > best.0 {
            best = (m, Some(x.clone()));
        }
    }
    best
}

/// Checks one atom-lemma law on a single atom U of C.
pub fn check_atom_law(
    law: LawId,
    c: &FiniteSubset,
    n: usize,
    k: Option<i64>,
    u: &FiniteSubset,
) -> Result<LawReport> {
    let grp = c.group();
    let nn = n as i64;
    let w = atom_witness(c, u, n, k);
    let k = match k {
        Some(k) => k,
        None => deficiency(u, c)?,
    };
    let report = match law {
        LawId::AtomLeft => {
            let (m, g) = max_left_overlap(u);
            let w = match &g {
                Some(g) => w.element("g", g),
                None => w,
            };
            LawReport::at_least(law, nn - 1, m, w)
        }
        LawId::AtomRight => {
            if n < 2 {
                return Ok(LawReport::hypothesis_not_met(law, w, "n < 2"));
            }
            // (n−1)|U ∩ Ug| ≤ (n−2)|U| + 1
            let (m, g) = max_right_overlap(u);
            let w = match &g {
                Some(g) => w.element("g", g),
                None => w,
            };
            LawReport::at_least(law, (nn - 2) * size(u) + 1, (nn - 1) * m, w)
        }
        LawId::AtomNonunique => {
            if u.len() <= n {
                return Ok(LawReport::hypothesis_not_met(law, w, "|U| = n"));
            }
            let uc = product_set(u, c)?;
            let mut fewest = i64::MAX;
            let mut worst = None;
            for z in &uc {
                let reps = u
                    .iter()
                    .filter(|x| c.contains(&grp.mul(&grp.invert(x), z)))
                    .count() as i64;
                if reps < fewest {
                    fewest = reps;
                    worst = Some(z.clone());
                }
            }
            let w = w.element("z", worst.as_ref().unwrap());
            LawReport::at_least(law, fewest, 2, w)
        }
        LawId::TwoAtomRough => {
            if n != 2 || c.len() < 3 {
                return Ok(LawReport::hypothesis_not_met(law, w, "needs n = 2 and |C| ≥ 3"));
            }
            LawReport::at_least(law, size(c) - 1, size(u), w)
        }
        LawId::TwoAtom => {
            if n != 2 || c.len() < 3 {
                return Ok(LawReport::hypothesis_not_met(law, w, "needs n = 2 and |C| ≥ 3"));
            }
            if size(&product_set(u, c)?) > size(u) + size(c) + k {
                return Ok(LawReport::hypothesis_not_met(law, w, "|UC| > |U| + |C| + k"));
            }
            LawReport::at_least(law, k + 3, size(u), w.param("k_used", k))
        }
        LawId::NAtom => {
            if n < 3 || c.len() < 3 {
                return Ok(LawReport::hypothesis_not_met(law, w, "needs n ≥ 3 and |C| ≥ 3"));
            }
            if size(&product_set(u, c)?) > size(u) + size(c) + k {
                return Ok(LawReport::hypothesis_not_met(law, w, "|UC| > |U| + |C| + k"));
            }
            LawReport::at_least(law, nn * (2 * k + 3), size(u), w.param("k_used", k))
        }
        LawId::AtomConjecture => LawReport::at_least(law, nn, size(u), w),
        other => return Err(Error::Usage(format!("{other} is not an atom law"))),
    };
    Ok(report)
}

pub const ATOM_LAWS: [LawId; 7] = [
    LawId::AtomLeft,
    LawId::AtomRight,
    LawId::AtomNonunique,
    LawId::TwoAtomRough,
    LawId::TwoAtom,
    LawId::NAtom,
    LawId::AtomConjecture,
];

/// One report per atom law per atom of `result`.
///
/// Results without an exactness certificate yield `skipped` reports only.
pub fn check_atom_lemmas(
    c: &FiniteSubset,
    n: usize,
    k: Option<i64>,
    result: &IsoResult,
) -> Result<Vec<LawReport>> {
    if result.certificate != Certificate::CertifiedExact {
        let w = Witness::new(c.group()).set("C", c).param("n", n as i64);
        return Ok(ATOM_LAWS
            .iter()
            .map(|law| LawReport::skipped(*law, w.clone(), "isoperimetric value not certified exact"))
            .collect());
    }
    let mut out = Vec::new();
    for u in &result.atoms {
        for law in ATOM_LAWS {
            out.push(check_atom_law(law, c, n, k, u)?);
        }
    }
    Ok(out)
}

/// The two named generators u, v of a backend with at least two generators.
fn uv_pair(g: Group) -> Result<(Element, Element)> {
    let gens = g.generators();
    if gens.len() < 2 {
        return Err(Error::Unsupported(format!("{g} has fewer than two generators")));
    }
    Ok((gens[0].clone(), gens[1].clone()))
}

/// With A = {1, u, v} not in a cyclic coset, d ≥ 3 and |B| > 4d³: |AB| > |B| + d.
pub fn check_uvk(b: &FiniteSubset, d: i64) -> Result<LawReport> {
    let g = b.group();
    let (u, v) = uv_pair(g)?;
    let a = FiniteSubset::new(g, [g.identity(), u, v])?;
    let w = Witness::new(g).set("B", b).param("d", d);
    if cyclic_hull_contains(&a).is_some() {
        return Ok(LawReport::hypothesis_not_met(LawId::Uvk, w, "{1,u,v} lies in a cyclic coset"));
    }
    if d < 3 {
        return Ok(LawReport::hypothesis_not_met(LawId::Uvk, w, "d < 3"));
    }
    if size(b) <= 4 * d.pow(3) {
        return Ok(LawReport::hypothesis_not_met(LawId::Uvk, w, "|B| ≤ 4d³"));
    }
    let ab = product_set(&a, b)?;
    Ok(LawReport::greater(LawId::Uvk, size(&ab), size(b) + d, w))
}

/// |AB| > |A| + |B| + k when A lies in no cyclic coset and |B| exceeds the bound on c(k).
pub fn check_main_theorem(a: &FiniteSubset, b: &FiniteSubset, k: i64, mode: BoundMode) -> Result<LawReport> {
    let w = Witness::new(a.group())
        .set("A", a)
        .set("B", b)
        .param("k", k)
        .param("mode", mode.code());
    if k < 1 {
        return Ok(LawReport::hypothesis_not_met(LawId::MainTheorem, w, "k < 1"));
    }
    if mode == BoundMode::UniqueProduct && !a.group().unique_product() {
        return Ok(LawReport::hypothesis_not_met(LawId::MainTheorem, w, "backend lacks unique products"));
    }
    if let Some((g, h)) = cyclic_hull_contains(a) {
        let w = w.element("coset", &g).element("generator", &h);
        return Ok(LawReport::hypothesis_not_met(LawId::MainTheorem, w, "A lies in a left coset of a cyclic subgroup"));
    }
    let threshold = mode.threshold(k);
    let w = w.param("threshold", threshold);
    if size(b) <= threshold {
        if threshold > DESK_SCALE {
            return Ok(LawReport::skipped(
                LawId::MainTheorem,
                w,
                format!("skipped_by_scale: needs |B| > {threshold}"),
            ));
        }
        return Ok(LawReport::hypothesis_not_met(LawId::MainTheorem, w, format!("|B| ≤ {threshold}")));
    }
    let ab = product_set(a, b)?;
    Ok(LawReport::greater(LawId::MainTheorem, size(&ab), size(a) + size(b) + k, w))
}

fn klein_set(pairs: impl IntoIterator<Item = (i64, i64)>) -> FiniteSubset {
    FiniteSubset::new(Group::Klein, pairs.into_iter().map(|(a, b)| Element::Klein(a, b)))
        .expect("klein elements")
}

/// A = {1, u, v}, B = {uⁱvʲ : 0 ≤ i, j < m}.
pub fn klein_grid_sets(m: i64) -> (FiniteSubset, FiniteSubset) {
    let a = klein_set([(0, 0), (1, 0), (0, 1)]);
    let b = klein_set((0..m).flat_map(|i| (0..m).map(move |j| (i, j))));
    (a, b)
}

/// The grid family: |AB| = m² + 2m and deficiency 2m − 3.
pub fn example_klein_grid(m: i64) -> Result<(FiniteSubset, FiniteSubset, LawReport)> {
    if m < 1 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    let (a, b) = klein_grid_sets(m);
    let report = klein_grid_report(&a, &b, m)?;
    Ok((a, b, report))
}

fn klein_grid_report(a: &FiniteSubset, b: &FiniteSubset, m: i64) -> Result<LawReport> {
    let ab = size(&product_set(a, b)?);
    let def = ab - size(a) - size(b);
    let w = Witness::new(Group::Klein).param("m", m).param("product_size", ab).param("deficiency", def);
    let ok = ab == m * m + 2 * m && def == 2 * m - 3;
    let verdict = if ok { Verdict::Holds } else { Verdict::Violated };
    Ok(LawReport::new(LawId::KleinGrid, verdict, Some(Slack::Exact(ab - (m * m + 2 * m))), w))
}

/// A = P ∪ vuQ with P = {uⁱ : 0 ≤ i ≤ 2m} and Q = {u²ⁱ : 0 ≤ i < m}.
pub fn klein_union_set(m: i64) -> FiniteSubset {
    let g = Group::Klein;
    let vu = g.mul(&Element::Klein(0, 1), &Element::Klein(1, 0));
    let p = (0..=2 * m).map(|i| Element::Klein(i, 0));
    let vuq = (0..m).map(|i| g.mul(&vu, &Element::Klein(2 * i, 0)));
    FiniteSubset::new(g, p.chain(vuq)).expect("klein elements")
}

/// The union family: |A| = 3m + 1 and |A²| = 10m − 1.
pub fn example_klein_union(m: i64) -> Result<(FiniteSubset, LawReport)> {
    if m < 1 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    let a = klein_union_set(m);
    let report = klein_union_report(&a, m)?;
    Ok((a, report))
}

fn klein_union_report(a: &FiniteSubset, m: i64) -> Result<LawReport> {
    let aa = size(&product_set(a, a)?);
    let w = Witness::new(Group::Klein)
        .param("m", m)
        .param("set_size", size(a))
        .param("square_size", aa);
    let ok = size(a) == 3 * m + 1 && aa == 10 * m - 1;
    let verdict = if ok { Verdict::Holds } else { Verdict::Violated };
    Ok(LawReport::new(LawId::KleinUnion, verdict, Some(Slack::Exact(aa - (10 * m - 1))), w))
}

/// A pair with |AB| ≤ |A| + |B| + k and |B| = m², so c(k) ≥ m².
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalBoundWitness {
    pub k: i64,
    pub b_size: i64,
    pub deficiency: i64,
    pub m: i64,
    pub report: LawReport,
}

/// Grid family with m = ⌊(k+3)/2⌋, whose deficiency 2m − 3 does not exceed k.
pub fn empirical_c_lower(k: i64) -> Result<EmpiricalBoundWitness> {
    if k < 1 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let m = (k + 3) / 2;
    let (a, b) = klein_grid_sets(m);
    let def = deficiency(&a, &b)?;
    let w = Witness::new(Group::Klein)
        .param("k", k)
        .param("m", m)
        .param("b_size", size(&b))
        .param("deficiency", def);
    let ok = def == 2 * m - 3 && def <= k;
    let verdict = if ok { Verdict::Holds } else { Verdict::Violated };
    let report = LawReport::new(LawId::CLower, verdict, Some(Slack::Exact(k - def)), w);
    Ok(EmpiricalBoundWitness {
        k,
        b_size: size(&b),
        deficiency: def,
        m,
        report,
    })
}

/// In unique-product groups: |A| ≥ 6³ and |A²| = 2|A| + n with
/// 0 ≤ n ≤ 2^(−5/3)|A|^(1/3) − 3/2 put A inside a progression of length |A| + n + 1.
pub fn check_corollary_ab(a: &FiniteSubset) -> Result<LawReport> {
    let w = Witness::new(a.group()).set("A", a);
    if !a.group().unique_product() {
        return Ok(LawReport::hypothesis_not_met(LawId::CorollaryAb, w, "backend lacks unique products"));
    }
    if a.len() < 216 {
        return Ok(LawReport::hypothesis_not_met(LawId::CorollaryAb, w, "|A| < 216"));
    }
    let n = size(&product_set(a, a)?) - 2 * size(a);
    let w = w.param("n", n);
    let cap = 2f64.powf(-5.0 / 3.0) * (size(a) as f64).cbrt() - 1.5;
    if n < 0 || n as f64 > cap + REAL_GUARD {
        return Ok(LawReport::hypothesis_not_met(
            LawId::CorollaryAb,
            w,
            format!("n = {n} outside [0, {cap:.4}]"),
        ));
    }
    let bound = size(a) + n + 1;
    Ok(match min_progression_cover(a) {
        Some(len) => LawReport::at_least(LawId::CorollaryAb, bound, len as i64, w.param("cover", len as i64)),
        None => LawReport::new(LawId::CorollaryAb, Verdict::Violated, None, w).with_note("A lies in no progression"),
    })
}

/// |A²| < (10/3)|A| − 5 should make A the union of two progressions.
pub fn check_two_progression_union(a: &FiniteSubset) -> Result<LawReport> {
    let w = Witness::new(a.group()).set("A", a);
    let aa = size(&product_set(a, a)?);
    // 3|A²| < 10|A| − 15
    if 3 * aa >= 10 * size(a) - 15 {
        return Ok(LawReport::hypothesis_not_met(
            LawId::TwoProgressionUnion,
            w.param("square_size", aa),
            "|A²| ≥ (10/3)|A| − 5",
        ));
    }
    let w = w.param("square_size", aa);
    Ok(match union_of_two_progressions(a) {
        Some((p, q)) => LawReport::new(LawId::TwoProgressionUnion, Verdict::Holds, None, w.set("P", &p).set("Q", &q)),
        None => LawReport::new(LawId::TwoProgressionUnion, Verdict::Finding, None, w),
    })
}

/// Recomputes a report from its witness alone.
pub fn replay(report: &LawReport) -> Result<LawReport> {
    let w = &report.witness;
    let group = w.group()?;
    let opt_k = w.params.get("k").copied();
    let r = match report.law {
        LawId::Kempermann => check_kempermann(&w.get_set("A")?, &w.get_set("B")?)?,
        LawId::KempermannEquality if !w.sets.contains_key("window") => {
            check_equality_pair(&w.get_set("A")?, &w.get_set("B")?)?
        }
        LawId::KempermannEquality => {
            let lo = w.get_param("min_size")? as usize;
            let hi = w.get_param("max_size")? as usize;
            check_equality_characterization(&w.get_set("window")?, lo..=hi)?
        }
        LawId::Hls => check_hls(&w.get_set("A")?, &w.get_set("B")?)?,
        LawId::FreimanDim => check_freiman_dim(&w.get_set("A")?)?,
        LawId::RuzsaDim => check_ruzsa_dim(&w.get_set("A")?, &w.get_set("B")?)?,
        LawId::GardnerGronchi => check_gardner_gronchi(&w.get_set("A")?, &w.get_set("B")?)?,
        LawId::ThreeKFour => check_3k4(&w.get_set("A")?)?,
        LawId::Intersection => {
            let cert = match report.note.as_deref() {
                Some("certified_exact") => Certificate::CertifiedExact,
                Some("heuristic_stable") => Certificate::HeuristicStable,
                _ => Certificate::UpperBoundOnly,
            };
            crate::iso::check_intersection_property(
                &w.get_set("U")?,
                &w.get_set("F")?,
                w.get_param("n")? as usize,
                cert,
            )
        }
        law if law.is_atom_lemma() => {
            let n = w.get_param("n")? as usize;
            let c = w.get_set("C")?;
            if report.verdict == Verdict::Skipped {
                return Ok(report.clone());
            }
            check_atom_law(law, &c, n, opt_k, &w.get_set("U")?)?
        }
        LawId::Uvk => check_uvk(&w.get_set("B")?, w.get_param("d")?)?,
        LawId::MainTheorem => check_main_theorem(
            &w.get_set("A")?,
            &w.get_set("B")?,
            w.get_param("k")?,
            BoundMode::from_code(w.get_param("mode")?)?,
        )?,
        LawId::CorollaryAb => check_corollary_ab(&w.get_set("A")?)?,
        LawId::TwoProgressionUnion => check_two_progression_union(&w.get_set("A")?)?,
        LawId::KleinGrid => example_klein_grid(w.get_param("m")?)?.2,
        LawId::KleinUnion => example_klein_union(w.get_param("m")?)?.1,
        LawId::CLower => empirical_c_lower(w.get_param("k")?)?.report,
        _ => unreachable!("atom laws handled above"),
    };
    debug_assert_eq!(group, r.witness.group()?);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iso::{kappa_restricted, IsoInstance};

    fn z(v: &[i64]) -> FiniteSubset {
        FiniteSubset::new(Group::Lattice(1), v.iter().map(|x| Element::Lattice(vec![*x]))).unwrap()
    }

    fn z2(v: &[(i64, i64)]) -> FiniteSubset {
        FiniteSubset::new(Group::Lattice(2), v.iter().map(|&(a, b)| Element::Lattice(vec![a, b]))).unwrap()
    }

    fn slack(r: &LawReport) -> i64 {
        match r.slack {
            Some(Slack::Exact(v)) => v,
            other => panic!("no exact slack: {other:?}"),
        }
    }

    #[test]
    fn kempermann_examples() {
        let r = check_kempermann(&z(&[0, 2, 4]), &z(&[1, 3, 5, 7])).unwrap();
        assert_eq!((r.verdict, slack(&r)), (Verdict::Holds, 0));
        let (a, b) = klein_grid_sets(3);
        let r = check_kempermann(&a, &b).unwrap();
        assert_eq!(slack(&r), 4);
        let f = Group::Free(2);
        let a = FiniteSubset::from_strings(f, &["1", "a", "b a^-1"]).unwrap();
        let b = FiniteSubset::from_strings(f, &["b", "a b", "a^2"]).unwrap();
        let r = check_kempermann(&a, &b).unwrap();
        assert!(r.verdict == Verdict::Holds && slack(&r) >= 0);
    }

    #[test]
    fn k_subsets_counts() {
        assert_eq!(k_subsets(5, 2).len(), 10);
        assert_eq!(k_subsets(4, 4), vec![vec![0, 1, 2, 3]]);
        assert!(k_subsets(2, 3).is_empty());
    }

    #[test]
    fn equality_characterization() {
        let window = z(&(0..8).collect::<Vec<_>>());
        let r = check_equality_characterization(&window, 2..=4).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert!(r.witness.get_param("extremal_pairs").unwrap() > 0);
        // singletons are outside the hypothesis
        let r1 = check_equality_characterization(&window, 1..=1).unwrap();
        assert_eq!(r1.witness.get_param("extremal_pairs").unwrap(), 0);
        let klein = FiniteSubset::ball(Group::Klein, 2).unwrap();
        assert_eq!(check_equality_characterization(&klein, 2..=3).unwrap().verdict, Verdict::Holds);
        let big = z(&(0..40).collect::<Vec<_>>());
        assert!(matches!(check_equality_characterization(&big, 2..=5), Err(Error::Resource { .. })));
    }

    #[test]
    fn equality_pairs() {
        let r = check_equality_pair(&z(&[0, 2, 4]), &z(&[1, 3])).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert_eq!(replay(&r).unwrap(), r);
        let r = check_equality_pair(&z(&[0, 1, 3]), &z(&[0, 1])).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisNotMet);
        let (a, _) = klein_grid_sets(1);
        let u = klein_set([(0, 0), (1, 0)]);
        assert_eq!(check_equality_pair(&a, &u).unwrap().verdict, Verdict::HypothesisNotMet);
    }

    #[test]
    fn hls_examples() {
        let (a, b) = klein_grid_sets(2);
        let r = check_hls(&a, &b).unwrap();
        assert_eq!((r.verdict, slack(&r)), (Verdict::Holds, 0));
        let r = check_hls(&z(&[0, 1, 5]), &z(&[0, 1, 2, 3])).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisNotMet);
        let f = Group::Free(2);
        let a = FiniteSubset::from_strings(f, &["1", "a", "b"]).unwrap();
        let r = check_hls(&a, &FiniteSubset::ball(f, 1).unwrap()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        let r = check_hls(&a, &FiniteSubset::from_strings(f, &["1", "a", "b"]).unwrap()).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisNotMet);
    }

    #[test]
    fn dimension_bounds() {
        let a = z2(&[(0, 0), (1, 0), (0, 1)]);
        let r = check_freiman_dim(&a).unwrap();
        assert_eq!((r.verdict, slack(&r)), (Verdict::Holds, 0));
        // one-dimensional: reduces to |2A| ≥ 2|A| − 1
        let r = check_freiman_dim(&z(&[0, 3, 6, 9])).unwrap();
        assert_eq!(slack(&r), 0);
        let grid: Vec<(i64, i64)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        let g = z2(&grid);
        let r = check_gardner_gronchi(&g, &g).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        match r.slack {
            Some(Slack::Real(v)) => assert!((v - 1.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        let r = check_ruzsa_dim(&g, &a).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert_eq!(check_ruzsa_dim(&a, &g).unwrap().verdict, Verdict::HypothesisNotMet);
        let (ka, kb) = klein_grid_sets(2);
        assert!(matches!(check_freiman_dim(&ka), Err(Error::Unsupported(_))));
        assert!(matches!(check_gardner_gronchi(&ka, &kb), Err(Error::Unsupported(_))));
    }

    #[test]
    fn three_k_minus_four() {
        let r = check_3k4(&z(&[0, 1, 2, 4])).unwrap();
        assert_eq!((r.verdict, slack(&r)), (Verdict::Holds, 0));
        let r = check_3k4(&z(&[3, 5, 7, 9, 11])).unwrap();
        assert_eq!((r.verdict, slack(&r)), (Verdict::Holds, 2));
        assert_eq!(check_3k4(&z(&[0, 1, 2])).unwrap().verdict, Verdict::HypothesisNotMet);
        assert_eq!(check_3k4(&z(&[0, 1, 5, 20])).unwrap().verdict, Verdict::HypothesisNotMet);
    }

    #[test]
    fn atom_lemmas_on_interval() {
        let c = z(&[0, 1, 2]);
        let window = z(&(-6..=6).collect::<Vec<_>>());
        let inst = IsoInstance::new(c.clone(), 2, window).unwrap();
        let res = kappa_restricted(&inst).unwrap();
        assert!(res.atoms.contains(&z(&[0, 1])));
        let reports = check_atom_lemmas(&c, 2, None, &res).unwrap();
        assert!(reports.iter().all(|r| r.verdict != Verdict::Violated && r.verdict != Verdict::Finding));
        let u = z(&[0, 1]);
        let right = check_atom_law(LawId::AtomRight, &c, 2, None, &u).unwrap();
        // (n−1)|U ∩ (U+1)| = 1 ≤ (n−2)|U| + 1 = 1
        assert_eq!((right.verdict, slack(&right)), (Verdict::Holds, 0));
        let rough = check_atom_law(LawId::TwoAtomRough, &c, 2, None, &u).unwrap();
        assert_eq!((rough.verdict, slack(&rough)), (Verdict::Holds, 0));
        let conj = check_atom_law(LawId::AtomConjecture, &c, 2, None, &u).unwrap();
        assert_eq!(conj.verdict, Verdict::Holds);
        let big = check_atom_law(LawId::AtomConjecture, &c, 2, None, &z(&[0, 1, 2])).unwrap();
        assert_eq!(big.verdict, Verdict::Finding);
    }

    #[test]
    fn atom_lemmas_skip_uncertified() {
        let c = z(&[0, 1, 3]);
        let inst = IsoInstance::new(c.clone(), 2, z(&(-6..=6).collect::<Vec<_>>())).unwrap();
        let res = kappa_restricted(&inst).unwrap();
        let reports = check_atom_lemmas(&c, 2, None, &res).unwrap();
        assert!(reports.iter().all(|r| r.verdict == Verdict::Skipped));
    }

    #[test]
    fn uvk_examples() {
        let g = Group::Klein;
        let ball = g.ball(8).unwrap();
        let b = FiniteSubset::new(g, ball.iter().take(109).cloned()).unwrap();
        let r = check_uvk(&b, 3).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        let b108 = FiniteSubset::new(g, ball.iter().take(108).cloned()).unwrap();
        assert_eq!(check_uvk(&b108, 3).unwrap().verdict, Verdict::HypothesisNotMet);
        let mut grid: Vec<(i64, i64)> = (0..11).flat_map(|i| (0..10).map(move |j| (i, j))).collect();
        grid.push((-5, -5));
        let b = klein_set(grid);
        assert_eq!(b.len(), 111);
        let r = check_uvk(&b, 3).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert!(slack(&r) > 0);
    }

    #[test]
    fn main_theorem_gates() {
        let (a, b) = klein_grid_sets(23);
        let r = check_main_theorem(&a, &b, 1, BoundMode::UniqueProduct).unwrap();
        assert_eq!((r.verdict, slack(&r)), (Verdict::Holds, 575 - 533));
        let b500 = FiniteSubset::new(Group::Klein, b.elements()[..500].iter().cloned()).unwrap();
        assert_eq!(
            check_main_theorem(&a, &b500, 1, BoundMode::UniqueProduct).unwrap().verdict,
            Verdict::HypothesisNotMet
        );
        let r = check_main_theorem(&a, &b, 1, BoundMode::General).unwrap();
        assert_eq!(r.verdict, Verdict::Skipped);
        assert_eq!(BoundMode::General.threshold(1), 131072);
        assert_eq!(BoundMode::UniqueProduct.threshold(1), 500);
    }

    #[test]
    fn example_families() {
        assert_eq!(example_klein_grid(1).unwrap().2.witness.get_param("product_size").unwrap(), 3);
        assert_eq!(example_klein_grid(5).unwrap().2.witness.get_param("product_size").unwrap(), 35);
        let (a, r) = example_klein_union(1).unwrap();
        assert_eq!((a.len(), r.witness.get_param("square_size").unwrap()), (4, 9));
        let (a, r) = example_klein_union(2).unwrap();
        assert_eq!((a.len(), r.witness.get_param("square_size").unwrap()), (7, 19));
        let w = empirical_c_lower(5).unwrap();
        assert_eq!((w.m, w.b_size, w.deficiency), (4, 16, 5));
        let w = empirical_c_lower(1).unwrap();
        assert_eq!((w.m, w.b_size, w.deficiency), (2, 4, 1));
    }

    #[test]
    fn corollary_ab() {
        let interval = z(&(0..216).collect::<Vec<_>>());
        assert_eq!(check_corollary_ab(&interval).unwrap().verdict, Verdict::HypothesisNotMet);
        let mut gap: Vec<i64> = (0..215).collect();
        gap.push(216);
        let r = check_corollary_ab(&z(&gap)).unwrap();
        assert_eq!(r.witness.get_param("n").unwrap(), 0);
        assert_eq!((r.verdict, slack(&r)), (Verdict::Holds, 0));
        let klein = klein_set((0..216).map(|i| (i, 0)));
        assert_eq!(check_corollary_ab(&klein).unwrap().verdict, Verdict::HypothesisNotMet);
    }

    #[test]
    fn union_conjecture_on_family() {
        for m in 1..6 {
            let a = klein_union_set(m);
            let r = check_two_progression_union(&a).unwrap();
            assert_eq!(r.verdict, Verdict::HypothesisNotMet);
        }
        let a = z(&[0, 1, 2, 3, 10, 11, 12]);
        assert_eq!(check_two_progression_union(&a).unwrap().verdict, Verdict::Holds);
    }

    #[test]
    fn replays_reproduce_reports() {
        let (a, b) = klein_grid_sets(3);
        let reports = vec![
            check_kempermann(&a, &b).unwrap(),
            check_hls(&a, &b).unwrap(),
            check_3k4(&z(&[0, 1, 2, 4])).unwrap(),
            check_freiman_dim(&z2(&[(0, 0), (1, 0), (0, 1)])).unwrap(),
            example_klein_grid(4).unwrap().2,
            example_klein_union(3).unwrap().1,
            empirical_c_lower(7).unwrap().report,
            check_atom_law(LawId::AtomRight, &z(&[0, 1, 2]), 2, None, &z(&[0, 1])).unwrap(),
            check_main_theorem(&a, &b, 1, BoundMode::UniqueProduct).unwrap(),
        ];
        for r in reports {
            let line = serde_json::to_string(&r).unwrap();
            let back: LawReport = serde_json::from_str(&line).unwrap();
            assert_eq!(replay(&back).unwrap(), r);
        }
    }
}
