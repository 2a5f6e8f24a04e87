//! Finite subsets of a backend group and the combinatorics built on them.

use std::collections::BTreeSet;
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Element, Group};

/// Largest set for which [`cover_by_two_progressions`] splits exhaustively.
pub const TWO_COVER_CAP: usize = 18;

/// A finite set of elements of one backend, sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FiniteSubset {
    group: Group,
    elems: Vec<Element>,
}

impl FiniteSubset {
    pub fn new(group: Group, elems: impl IntoIterator<Item = Element>) -> Result<Self> {
        let mut elems: Vec<Element> = elems.into_iter().collect();
        for g in &elems {
            group.check(g)?;
        }
        elems.sort();
        elems.dedup();
        Ok(FiniteSubset { group, elems })
    }

    /// Builds a set from elements already known to belong to `group`.
    pub(crate) fn from_trusted(group: Group, mut elems: Vec<Element>) -> Self {
        elems.sort();
        elems.dedup();
        FiniteSubset { group, elems }
    }

    pub fn empty(group: Group) -> Self {
        FiniteSubset {
            group,
            elems: Vec::new(),
        }
    }

    pub fn singleton(group: Group, g: Element) -> Result<Self> {
        Self::new(group, [g])
    }

    pub fn ball(group: Group, radius: u32) -> Result<Self> {
        Ok(FiniteSubset {
            group,
            elems: group.ball(radius)?,
        })
    }

    /// Parses a set file: one element per line, blank lines and `#` comments skipped.
    pub fn parse(group: Group, text: &str) -> Result<Self> {
        let mut elems = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            if line.trim().is_empty() {
                continue;
            }
            elems.push(group.parse_element(line).map_err(|e| e.at_line(i + 1))?);
        }
        Self::new(group, elems)
    }

    /// One printed element per line, in set order.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for g in &self.elems {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.elems.iter().map(|g| g.to_string()).collect()
    }

    pub fn from_strings<S: AsRef<str>>(group: Group, items: &[S]) -> Result<Self> {
        let elems = items
            .iter()
            .enumerate()
            .map(|(i, s)| group.parse_element(s.as_ref()).map_err(|e| e.at_line(i + 1)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(group, elems)
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elems
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Element> {
        self.elems.iter()
    }

    pub fn contains(&self, g: &Element) -> bool {
        self.elems.binary_search(g).is_ok()
    }

    pub fn position(&self, g: &Element) -> Option<usize> {
        self.elems.binary_search(g).ok()
    }

    pub fn is_subset(&self, other: &FiniteSubset) -> bool {
        self.elems.iter().all(|g| other.contains(g))
    }

    pub fn intersection_len(&self, other: &FiniteSubset) -> usize {
        self.elems.iter().filter(|g| other.contains(g)).count()
    }

    pub fn union(&self, other: &FiniteSubset) -> FiniteSubset {
        let mut v = self.elems.clone();
        v.extend(other.elems.iter().cloned());
        FiniteSubset::from_trusted(self.group, v)
    }

    pub fn difference(&self, other: &FiniteSubset) -> FiniteSubset {
        FiniteSubset {
            group: self.group,
            elems: self.elems.iter().filter(|g| !other.contains(g)).cloned().collect(),
        }
    }

    /// gS
    pub fn left_translate(&self, g: &Element) -> FiniteSubset {
        let elems = self.elems.iter().map(|x| self.group.mul(g, x)).collect();
        FiniteSubset::from_trusted(self.group, elems)
    }

    /// Sg
    pub fn right_translate(&self, g: &Element) -> FiniteSubset {
        let elems = self.elems.iter().map(|x| self.group.mul(x, g)).collect();
        FiniteSubset::from_trusted(self.group, elems)
    }

    /// S⁻¹
    pub fn inverse(&self) -> FiniteSubset {
        let elems = self.elems.iter().map(|x| self.group.invert(x)).collect();
        FiniteSubset::from_trusted(self.group, elems)
    }

    pub fn subset(&self, indices: impl IntoIterator<Item = usize>) -> FiniteSubset {
        let elems = indices.into_iter().map(|i| self.elems[i].clone()).collect();
        FiniteSubset::from_trusted(self.group, elems)
    }

    fn same_group(&self, other: &FiniteSubset) -> Result<()> {
        if self.group == other.group {
            Ok(())
        } else {
            Err(Error::BackendMismatch {
                expected: self.group.to_string(),
                found: other.group.to_string(),
            })
        }
    }
}

impl fmt::Display for FiniteSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, g) in self.elems.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{g}")?;
        }
        f.write_str("}")
    }
}

impl<'a> IntoIterator for &'a FiniteSubset {
    type Item = &'a Element;
    type IntoIter = std::slice::Iter<'a, Element>;

    fn into_iter(self) -> Self::IntoIter {
        self.elems.iter()
    }
}

/// `{base·ratioⁱ : 0 ≤ i < length}` with `base` and `ratio` commuting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgressionDescriptor {
    pub base: Element,
    pub ratio: Element,
    pub length: usize,
}

impl ProgressionDescriptor {
    pub fn new(group: Group, base: Element, ratio: Element, length: usize) -> Result<Self> {
        group.check(&base)?;
        group.check(&ratio)?;
        if length == 0 {
            return Err(Error::Domain("progression length must be positive".into()));
        }
        if group.is_identity(&ratio) {
            return Err(Error::Domain("progression ratio must not be the identity".into()));
        }
        if !group.commutes(&base, &ratio) {
            return Err(Error::Domain("progression base must commute with its ratio".into()));
        }
        Ok(ProgressionDescriptor {
            base,
            ratio,
            length,
        })
    }

    pub fn expand(&self, group: Group) -> FiniteSubset {
        let mut elems = Vec::with_capacity(self.length);
        let mut x = self.base.clone();
        for _ in 0..self.length {
            elems.push(x.clone());
            x = group.mul(&x, &self.ratio);
        }
        FiniteSubset::from_trusted(group, elems)
    }
}

/// A maximal run `{h, hg, …, hg^(len-1)}` inside a set; `h` need not commute with `g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub start: Element,
    pub step: Element,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub rank: usize,
    /// Independent difference vectors a − a₀ spanning the difference lattice over ℚ.
    pub basis: Vec<Vec<i64>>,
}

fn require_nonempty(a: &FiniteSubset, what: &str) -> Result<()> {
    if a.is_empty() {
        Err(Error::Domain(format!("{what} must be non-empty")))
    } else {
        Ok(())
    }
}

/// AB = {ab : a ∈ A, b ∈ B}.
pub fn product_set(a: &FiniteSubset, b: &FiniteSubset) -> Result<FiniteSubset> {
    a.same_group(b)?;
    require_nonempty(a, "left factor")?;
    require_nonempty(b, "right factor")?;
    let g = a.group();
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(g.mul(x, y));
        }
    }
    Ok(FiniteSubset::from_trusted(g, out))
}

/// |AB| − |A| − |B|.
pub fn deficiency(a: &FiniteSubset, b: &FiniteSubset) -> Result<i64> {
    let ab = product_set(a, b)?;
    Ok(ab.len() as i64 - a.len() as i64 - b.len() as i64)
}

/// B_g = {x ∈ B : gx ∉ B}.
pub fn boundary_set(b: &FiniteSubset, g: &Element) -> Result<FiniteSubset> {
    let grp = b.group();
    grp.check(g)?;
    let elems = b
        .iter()
        .filter(|x| !b.contains(&grp.mul(g, x)))
        .cloned()
        .collect();
    Ok(FiniteSubset { group: grp, elems })
}

/// Partition of B into the classes B ∩ ⟨g⟩x.
pub fn coset_classes(b: &FiniteSubset, g: &Element) -> Result<Vec<FiniteSubset>> {
    let grp = b.group();
    grp.check(g)?;
    if grp.is_identity(g) {
        return Err(Error::Domain("coset classes of the trivial subgroup".into()));
    }
    let mut classes: Vec<(Element, Vec<Element>)> = Vec::new();
    'outer: for x in b {
        for (rep, members) in classes.iter_mut() {
            // x ~ rep iff x·rep⁻¹ ∈ ⟨g⟩
            let q = grp.mul(x, &grp.invert(rep));
            if grp.in_cyclic(&q, g)?.is_some() {
                members.push(x.clone());
                continue 'outer;
            }
        }
        classes.push((x.clone(), vec![x.clone()]));
    }
    Ok(classes
        .into_iter()
        .map(|(_, m)| FiniteSubset::from_trusted(grp, m))
        .collect())
}

/// Exponents of `s0⁻¹x` in ⟨r⟩ for every x in A, or `None` if some element misses.
fn left_exponents(a: &FiniteSubset, s0: &Element, r: &Element) -> Option<Vec<i64>> {
    let g = a.group();
    let s0inv = g.invert(s0);
    a.iter()
        .map(|x| g.in_cyclic(&g.mul(&s0inv, x), r).ok().flatten())
        .collect()
}

/// Exponents of `x·s0⁻¹` in ⟨r⟩.
fn right_exponents(a: &FiniteSubset, s0: &Element, r: &Element) -> Option<Vec<i64>> {
    let g = a.group();
    let s0inv = g.invert(s0);
    a.iter()
        .map(|x| g.in_cyclic(&g.mul(x, &s0inv), r).ok().flatten())
        .collect()
}

fn is_interval(exps: &[i64]) -> bool {
    let set: BTreeSet<i64> = exps.iter().copied().collect();
    let (lo, hi) = (*set.first().unwrap(), *set.last().unwrap());
    set.len() == exps.len() && (hi - lo + 1) as usize == exps.len()
}

/// True when some left translate of A is {rⁱ : i in an interval}.
pub fn is_left_progression_of(a: &FiniteSubset, r: &Element) -> bool {
    match a.elements().first() {
        None => false,
        Some(s0) => left_exponents(a, s0, r).is_some_and(|e| is_interval(&e)),
    }
}

/// True when some right translate of A is {rⁱ : i in an interval}.
pub fn is_right_progression_of(a: &FiniteSubset, r: &Element) -> bool {
    match a.elements().first() {
        None => false,
        Some(s0) => right_exponents(a, s0, r).is_some_and(|e| is_interval(&e)),
    }
}

/// Ratios x⁻¹y over ordered pairs of distinct elements, deduplicated.
pub fn pair_ratios(a: &FiniteSubset) -> Vec<Element> {
    let g = a.group();
    let mut out = BTreeSet::new();
    for x in a {
        let xinv = g.invert(x);
        for y in a {
            if x != y {
                out.insert(g.mul(&xinv, y));
            }
        }
    }
    out.into_iter().collect()
}

/// Returns a descriptor whose expansion is exactly A, if A is a progression.
pub fn detect_progression(a: &FiniteSubset) -> Option<ProgressionDescriptor> {
    let g = a.group();
    let s0 = a.elements().first()?;
    if a.len() == 1 {
        return Some(ProgressionDescriptor {
            base: s0.clone(),
            ratio: g.generators()[0].clone(),
            length: 1,
        });
    }
    // s0 has a neighbour in any progression equal to A, so its ratio is some s0⁻¹y;
    // prefer the orientation that starts at s0
    let mut best: Option<ProgressionDescriptor> = None;
    for r in first_ratios(a) {
        let Some(exps) = left_exponents(a, s0, &r) else {
            continue;
        };
        if !is_interval(&exps) {
            continue;
        }
        let lo = *exps.iter().min().unwrap();
        let base = g.mul(s0, &g.power(&r, lo));
        if !g.commutes(&base, &r) {
            continue;
        }
        let better = best
            .as_ref()
            .is_none_or(|b| (&base != s0, &r, &base) < (&b.base != s0, &b.ratio, &b.base));
        if better {
            best = Some(ProgressionDescriptor {
                base,
                ratio: r,
                length: a.len(),
            });
        }
    }
    best
}

/// Ratios s₀⁻¹y from the first element s₀ to every other element of A.
fn first_ratios(a: &FiniteSubset) -> Vec<Element> {
    let g = a.group();
    let s0inv = g.invert(&a.elements()[0]);
    let out: BTreeSet<Element> = a.elements()[1..].iter().map(|y| g.mul(&s0inv, y)).collect();
    out.into_iter().collect()
}

/// Primitive roots of the ratios s₀⁻¹y. A covering progression with ratio t
/// puts every s₀⁻¹y in ⟨t⟩. Klein roots are not unique, which is why the
/// root of every s₀⁻¹y is tried rather than only the first.
fn cover_ratio_candidates(a: &FiniteSubset) -> Vec<Element> {
    let g = a.group();
    let mut out = BTreeSet::new();
    for r in first_ratios(a) {
        if let Ok((root, _)) = g.primitive_root(&r) {
            out.insert(root);
        }
    }
    out.into_iter().collect()
}

/// Shortest progression containing A, with its descriptor.
pub fn min_progression_cover_witness(a: &FiniteSubset) -> Option<ProgressionDescriptor> {
    let g = a.group();
    let s0 = a.elements().first()?;
    if a.len() == 1 {
        return detect_progression(a);
    }
    let mut best: Option<ProgressionDescriptor> = None;
    for rho in cover_ratio_candidates(a) {
        let Some(exps) = left_exponents(a, s0, &rho) else {
            continue;
        };
        let lo = *exps.iter().min().unwrap();
        let hi = *exps.iter().max().unwrap();
        let step = exps.iter().fold(0i64, |acc, e| acc.gcd(&(e - lo)));
        if step == 0 {
            continue;
        }
        let ratio = g.power(&rho, step);
        let base = g.mul(s0, &g.power(&rho, lo));
        if !g.commutes(&base, &ratio) {
            continue;
        }
        let length = ((hi - lo) / step + 1) as usize;
        let better = match &best {
            None => true,
            Some(b) => {
                (length, &base != s0, &ratio, &base) < (b.length, &b.base != s0, &b.ratio, &b.base)
            }
        };
        if better {
            best = Some(ProgressionDescriptor {
                base,
                ratio,
                length,
            });
        }
    }
    best
}

/// Minimal length of a progression containing A.
pub fn min_progression_cover(a: &FiniteSubset) -> Option<usize> {
    min_progression_cover_witness(a).map(|p| p.length)
}

/// Two progressions whose union contains A with total length at most `budget`.
///
/// Every split of A into two parts is tried (the second possibly empty) and
/// the split with the smallest total cover length wins; ties go to the
/// lexicographically first split.
pub fn cover_by_two_progressions(
    a: &FiniteSubset,
    budget: usize,
) -> Result<Option<(ProgressionDescriptor, Option<ProgressionDescriptor>)>> {
    if a.len() > TWO_COVER_CAP {
        return Err(Error::Resource {
            what: "set size for two-progression covers",
            requested: a.len(),
            cap: TWO_COVER_CAP,
        });
    }
    if a.is_empty() {
        return Ok(None);
    }
    let n = a.len();
    let mut best: Option<(usize, ProgressionDescriptor, Option<ProgressionDescriptor>)> = None;
    // element 0 always lies in the first part
    for mask in 0u32..(1 << (n - 1)) {
        let first: Vec<usize> = std::iter::once(0)
            .chain((1..n).filter(|i| mask & (1 << (i - 1)) == 0))
            .collect();
        let second: Vec<usize> = (1..n).filter(|i| mask & (1 << (i - 1)) != 0).collect();
        let Some(p1) = min_progression_cover_witness(&a.subset(first)) else {
            continue;
        };
        if p1.length > budget {
            continue;
        }
        let p2 = if second.is_empty() {
            None
        } else {
            match min_progression_cover_witness(&a.subset(second)) {
                Some(p) => Some(p),
                None => continue,
            }
        };
        let total = p1.length + p2.as_ref().map_or(0, |p| p.length);
        if total <= budget && best.as_ref().is_none_or(|b| total < b.0) {
            best = Some((total, p1, p2));
        }
    }
    Ok(best.map(|(_, p1, p2)| (p1, p2)))
}

/// Maximal runs `{x, xr, xr², …}` contained in A whose start commutes with `r`.
fn maximal_progressions(a: &FiniteSubset) -> Vec<FiniteSubset> {
    let g = a.group();
    let mut out = BTreeSet::new();
    for x in a {
        out.insert(vec![x.clone()]);
    }
    for r in pair_ratios(a) {
        let rinv = g.invert(&r);
        for x in a {
            if a.contains(&g.mul(x, &rinv)) || !g.commutes(x, &r) {
                continue;
            }
            let mut run = vec![x.clone()];
            let mut y = g.mul(x, &r);
            while a.contains(&y) {
                run.push(y.clone());
                y = g.mul(&y, &r);
            }
            if run.len() > 1 {
                run.sort();
                out.insert(run);
            }
        }
    }
    out.into_iter()
        .map(|v| FiniteSubset::from_trusted(g, v))
        .collect()
}

/// Two progressions contained in A whose union is exactly A, if they exist.
pub fn union_of_two_progressions(a: &FiniteSubset) -> Option<(FiniteSubset, FiniteSubset)> {
    let runs = maximal_progressions(a);
    for (i, p) in runs.iter().enumerate() {
        if p.len() == a.len() {
            return Some((p.clone(), FiniteSubset::empty(a.group())));
        }
        let rest = a.difference(p);
        for q in &runs[i..] {
            if rest.is_subset(q) {
                return Some((p.clone(), q.clone()));
            }
        }
    }
    None
}

/// Rank of the lattice spanned by {a − a₀}; lattice backends only.
pub fn dimension(a: &FiniteSubset) -> Result<DimensionReport> {
    if !matches!(a.group(), Group::Lattice(_)) {
        return Err(Error::Unsupported(format!(
            "dimension is defined here for lattice backends, not {}",
            a.group()
        )));
    }
    require_nonempty(a, "set")?;
    let vecs: Vec<Vec<i64>> = a
        .iter()
        .map(|x| match x {
            Element::Lattice(v) => v.clone(),
            _ => unreachable!(),
        })
        .collect();
    let a0 = &vecs[0];
    let mut basis: Vec<Vec<i64>> = Vec::new();
    let mut echelon: Vec<Vec<i128>> = Vec::new();
    for v in &vecs[1..] {
        let diff: Vec<i64> = v.iter().zip(a0).map(|(x, y)| x - y).collect();
        if let Some(row) = reduce_against(&echelon, diff.iter().map(|&x| x as i128).collect()) {
            echelon.push(row);
            basis.push(diff);
        }
    }
    Ok(DimensionReport {
        rank: basis.len(),
        basis,
    })
}

/// Fraction-free elimination of `v` against echelon rows; returns the
/// reduced row if `v` is independent of them.
fn reduce_against(echelon: &[Vec<i128>], mut v: Vec<i128>) -> Option<Vec<i128>> {
    for row in echelon {
        let pivot = row.iter().position(|x| *x != 0).unwrap();
        if v[pivot] != 0 {
            let (p, q) = (row[pivot], v[pivot]);
            for (x, y) in v.iter_mut().zip(row) {
                *x = *x * p - q * y;
            }
            let g = v.iter().fold(0i128, |acc, x| acc.gcd(x));
            if g > 1 {
                v.iter_mut().for_each(|x| *x /= g);
            }
        }
    }
    if v.iter().all(|x| *x == 0) {
        None
    } else {
        // keep pivots ordered so later rows eliminate cleanly
        Some(v)
    }
}

/// A coset witness `(g, h)` with A ⊆ g⟨h⟩, if one exists.
pub fn cyclic_hull_contains(a: &FiniteSubset) -> Option<(Element, Element)> {
    let g = a.group();
    let a0 = a.elements().first()?;
    if a.len() == 1 {
        return Some((a0.clone(), g.generators()[0].clone()));
    }
    let a0inv = g.invert(a0);
    let diffs: Vec<Element> = a
        .iter()
        .map(|x| g.mul(&a0inv, x))
        .filter(|d| !g.is_identity(d))
        .collect();
    let mut candidates = BTreeSet::new();
    for d in &diffs {
        if let Ok((root, _)) = g.primitive_root(d) {
            candidates.insert(root);
        }
    }
    for rho in candidates {
        let exps: Option<Vec<i64>> = diffs
            .iter()
            .map(|d| g.in_cyclic(d, &rho).ok().flatten())
            .collect();
        if let Some(exps) = exps {
            let step = exps.iter().fold(0i64, |acc, e| acc.gcd(e));
            return Some((a0.clone(), g.power(&rho, step)));
        }
    }
    None
}

/// Partition of U into maximal runs {h, hg, …, hg^α} with hg⁻¹ ∉ U.
pub fn max_progression_partition(u: &FiniteSubset, g: &Element) -> Result<Vec<Run>> {
    let grp = u.group();
    grp.check(g)?;
    if grp.is_identity(g) {
        return Err(Error::Domain("runs with identity step".into()));
    }
    let ginv = grp.invert(g);
    let mut runs = Vec::new();
    for h in u {
        if u.contains(&grp.mul(h, &ginv)) {
            continue;
        }
        let mut length = 1;
        let mut x = grp.mul(h, g);
        while u.contains(&x) {
            length += 1;
            x = grp.mul(&x, g);
        }
        runs.push(Run {
            start: h.clone(),
            step: g.clone(),
            length,
        });
    }
    Ok(runs)
}
