//! Exact arithmetic in four torsion-free groups.
//!
//! Every element is stored in a canonical normal form, so equality, hashing
//! and ordering are structural:
//!
//! * `zd:<d>`: the lattice ℤᵈ, elements are integer vectors;
//! * `free:<k>`: the free group on `a, b, …`, elements are freely reduced words;
//! * `klein`: ⟨u, v | u⁻¹vu = v⁻¹⟩, every element is uniquely uᵃvᵇ;
//! * `heis`: the integer Heisenberg group, (x,y,z)(x',y',z') = (x+x', y+y', z+z'+xy').
//!
//! Integer overflow is a hard failure (panic), never a silent wraparound.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ball radius cap used by [`Group::ball`].
pub const DEFAULT_BALL_CAP: u32 = 12;

/// A group element in normal form.
///
/// Free-group letters are signed generator indices: `+i` is the `i`-th
/// generator (1-based), `-i` its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Lattice(Vec<i64>),
    Free(Vec<i32>),
    /// uᵃvᵇ
    Klein(i64, i64),
    Heisenberg(i64, i64, i64),
}

/// One of the supported torsion-free backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Lattice(usize),
    Free(usize),
    Klein,
    Heisenberg,
}

fn ck(v: Option<i64>) -> i64 {
    v.expect("integer overflow in group arithmetic")
}

fn add(a: i64, b: i64) -> i64 {
    ck(a.checked_add(b))
}

fn mul(a: i64, b: i64) -> i64 {
    ck(a.checked_mul(b))
}

fn neg(a: i64) -> i64 {
    ck(a.checked_neg())
}

fn sign(a: i64) -> i64 {
    a.signum()
}

impl Group {
    pub fn torsion_free(&self) -> bool {
        true
    }

    /// All four backends have the unique product property.
    pub fn unique_product(&self) -> bool {
        true
    }

    pub fn is_abelian(&self) -> bool {
        matches!(self, Group::Lattice(_) | Group::Free(0) | Group::Free(1))
    }

    pub fn identity(&self) -> Element {
        match *self {
            Group::Lattice(d) => Element::Lattice(vec![0; d]),
            Group::Free(_) => Element::Free(Vec::new()),
            Group::Klein => Element::Klein(0, 0),
            Group::Heisenberg => Element::Heisenberg(0, 0, 0),
        }
    }

    /// Positive generators, in presentation order.
    pub fn generators(&self) -> Vec<Element> {
        match *self {
            Group::Lattice(d) => (0..d)
                .map(|i| {
                    let mut v = vec![0; d];
                    v[i] = 1;
                    Element::Lattice(v)
                })
                .collect(),
            Group::Free(k) => (1..=k as i32).map(|i| Element::Free(vec![i])).collect(),
            Group::Klein => vec![Element::Klein(1, 0), Element::Klein(0, 1)],
            Group::Heisenberg => vec![Element::Heisenberg(1, 0, 0), Element::Heisenberg(0, 1, 0)],
        }
    }

    /// Generators followed by their inverses.
    pub fn symmetric_generators(&self) -> Vec<Element> {
        let gens = self.generators();
        let inv: Vec<Element> = gens.iter().map(|g| self.invert(g)).collect();
        gens.into_iter().chain(inv).collect()
    }

    pub fn contains(&self, g: &Element) -> bool {
        match (self, g) {
            (Group::Lattice(d), Element::Lattice(v)) => v.len() == *d,
            (Group::Free(k), Element::Free(w)) => {
                w.iter().all(|&l| l != 0 && l.unsigned_abs() as usize <= *k)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            (Group::Klein, Element::Klein(..)) => true,
            (Group::Heisenberg, Element::Heisenberg(..)) => true,
            _ => false,
        }
    }

    pub fn check(&self, g: &Element) -> Result<()> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(Error::BackendMismatch {
                expected: self.to_string(),
                found: format!("{g:?}"),
            })
        }
    }

    /// Checked product: both operands must belong to this backend.
    pub fn multiply(&self, g: &Element, h: &Element) -> Result<Element> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.mul(g, h))
    }

    /// Product of two elements already known to belong to this backend.
    ///
    /// Panics on a backend mismatch.
    pub fn mul(&self, g: &Element, h: &Element) -> Element {
        match (g, h) {
            (Element::Lattice(a), Element::Lattice(b)) => {
                assert_eq!(a.len(), b.len(), "lattice dimension mismatch");
                Element::Lattice(a.iter().zip(b).map(|(x, y)| add(*x, *y)).collect())
            }
            (Element::Free(a), Element::Free(b)) => {
                let mut cut = 0;
                while cut < a.len() && cut < b.len() && a[a.len() - 1 - cut] == -b[cut] {
                    cut += 1;
                }
                let mut w = Vec::with_capacity(a.len() + b.len() - 2 * cut);
                w.extend_from_slice(&a[..a.len() - cut]);
                w.extend_from_slice(&b[cut..]);
                Element::Free(w)
            }
            // uᵃvᵇ·uᶜvᵈ = u^(a+c) v^((-1)ᶜ b + d), since v^b u^c = u^c v^((-1)^c b)
            (Element::Klein(a, b), Element::Klein(c, d)) => {
                let twisted = if c.rem_euclid(2) == 0 { *b } else { neg(*b) };
                Element::Klein(add(*a, *c), add(twisted, *d))
            }
            (Element::Heisenberg(x, y, z), Element::Heisenberg(x2, y2, z2)) => {
                Element::Heisenberg(add(*x, *x2), add(*y, *y2), add(add(*z, *z2), mul(*x, *y2)))
            }
            _ => panic!("backend mismatch in multiplication: {g:?} * {h:?}"),
        }
    }

    pub fn invert(&self, g: &Element) -> Element {
        match g {
            Element::Lattice(v) => Element::Lattice(v.iter().map(|x| neg(*x)).collect()),
            Element::Free(w) => Element::Free(w.iter().rev().map(|l| -l).collect()),
            Element::Klein(a, b) => {
                let b2 = if a.rem_euclid(2) == 0 { neg(*b) } else { *b };
                Element::Klein(neg(*a), b2)
            }
            Element::Heisenberg(x, y, z) => {
                Element::Heisenberg(neg(*x), neg(*y), add(neg(*z), mul(*x, *y)))
            }
        }
    }

    pub fn is_identity(&self, g: &Element) -> bool {
        *g == self.identity()
    }

    pub fn commutes(&self, g: &Element, h: &Element) -> bool {
        self.mul(g, h) == self.mul(h, g)
    }

    /// gⁿ by repeated squaring; negative exponents go through the inverse.
    pub fn power(&self, g: &Element, n: i64) -> Element {
        let mut base = if n < 0 { self.invert(g) } else { g.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = self.identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        acc
    }

    /// Returns `(root, e)` with `g = rootᵉ` and `e` maximal.
    pub fn primitive_root(&self, g: &Element) -> Result<(Element, u64)> {
        self.check(g)?;
        if self.is_identity(g) {
            return Err(Error::Domain("the identity has no primitive root".into()));
        }
        Ok(match g {
            Element::Lattice(v) => {
                let e = v.iter().fold(0i64, |acc, x| acc.gcd(x));
                (Element::Lattice(v.iter().map(|x| x / e).collect()), e as u64)
            }
            Element::Free(w) => free_primitive_root(w),
            Element::Klein(a, b) => klein_primitive_root(*a, *b),
            Element::Heisenberg(a, b, c) => heisenberg_primitive_root(*a, *b, *c),
        })
    }

    /// Returns `k` with `g = hᵏ`, or `None` when `g ∉ ⟨h⟩`.
    ///
    /// `h = 1` is only allowed together with `g = 1` (answer 0).
    pub fn in_cyclic(&self, g: &Element, h: &Element) -> Result<Option<i64>> {
        self.check(g)?;
        self.check(h)?;
        if self.is_identity(g) {
            return Ok(Some(0));
        }
        if self.is_identity(h) {
            return Err(Error::Domain(
                "power membership in the trivial subgroup of a non-identity element".into(),
            ));
        }
        let candidate = match (g, h) {
            (Element::Lattice(a), Element::Lattice(b)) => {
                let i = b.iter().position(|x| *x != 0).expect("non-identity");
                exact_div(a[i], b[i])
            }
            (Element::Free(_), Element::Free(_)) => {
                let (rg, eg) = self.primitive_root(g)?;
                let (rh, eh) = self.primitive_root(h)?;
                let j = if rg == rh {
                    eg as i64
                } else if rg == self.invert(&rh) {
                    -(eg as i64)
                } else {
                    return Ok(None);
                };
                exact_div(j, eh as i64)
            }
            (Element::Klein(a, b), Element::Klein(x, y)) => {
                if *x == 0 {
                    if *a != 0 {
                        return Ok(None);
                    }
                    exact_div(*b, *y)
                } else {
                    exact_div(*a, *x)
                }
            }
            (Element::Heisenberg(a, b, c), Element::Heisenberg(x, y, z)) => {
                if *x != 0 {
                    exact_div(*a, *x)
                } else if *y != 0 {
                    exact_div(*b, *y)
                } else if *a != 0 || *b != 0 {
                    None
                } else {
                    exact_div(*c, *z)
                }
            }
            _ => unreachable!("checked above"),
        };
        Ok(candidate.filter(|k| self.power(h, *k) == *g))
    }

    /// Elements of word length at most `radius`, sorted.
    pub fn ball(&self, radius: u32) -> Result<Vec<Element>> {
        self.ball_with_cap(radius, DEFAULT_BALL_CAP)
    }

    pub fn ball_with_cap(&self, radius: u32, cap: u32) -> Result<Vec<Element>> {
        if radius > cap {
            return Err(Error::Resource {
                what: "ball radius",
                requested: radius as usize,
                cap: cap as usize,
            });
        }
        let gens = self.symmetric_generators();
        let id = self.identity();
        let mut seen: HashSet<Element> = HashSet::from([id.clone()]);
        let mut frontier = VecDeque::from([(id, 0u32)]);
        while let Some((g, dist)) = frontier.pop_front() {
            if dist == radius {
                continue;
            }
            for s in &gens {
                let h = self.mul(&g, s);
                if seen.insert(h.clone()) {
                    frontier.push_back((h, dist + 1));
                }
            }
        }
        let mut out: Vec<Element> = seen.into_iter().collect();
        out.sort();
        Ok(out)
    }

    pub fn parse_element(&self, s: &str) -> Result<Element> {
        let g = match self {
            Group::Lattice(d) => Element::Lattice(parse_tuple(s, *d)?),
            Group::Heisenberg => {
                let t = parse_tuple(s, 3)?;
                Element::Heisenberg(t[0], t[1], t[2])
            }
            Group::Free(k) => {
                let letters: Vec<char> = ('a'..='z').take(*k).collect();
                let mut acc = self.identity();
                for (col, c, e) in parse_word(s, &letters)? {
                    let _ = col;
                    let idx = letters.iter().position(|l| *l == c).unwrap() as i32 + 1;
                    acc = self.mul(&acc, &self.power(&Element::Free(vec![idx]), e));
                }
                acc
            }
            Group::Klein => {
                let mut acc = self.identity();
                for (_, c, e) in parse_word(s, &['u', 'v'])? {
                    let gen = if c == 'u' { Element::Klein(1, 0) } else { Element::Klein(0, 1) };
                    acc = self.mul(&acc, &self.power(&gen, e));
                }
                acc
            }
        };
        Ok(g)
    }

    pub fn format_element(&self, g: &Element) -> String {
        g.to_string()
    }
}

fn exact_div(a: i64, b: i64) -> Option<i64> {
    if b != 0 && a % b == 0 {
        Some(a / b)
    } else {
        None
    }
}

fn free_primitive_root(w: &[i32]) -> (Element, u64) {
    // w = t c t⁻¹ with c cyclically reduced
    let mut lo = 0;
    let mut hi = w.len();
    while hi - lo >= 2 && w[lo] == -w[hi - 1] {
        lo += 1;
        hi -= 1;
    }
    let core = &w[lo..hi];
    let len = core.len();
    let period = (1..=len)
        .filter(|p| len.is_multiple_of(*p))
        .find(|&p| core.chunks(p).all(|chunk| chunk == &core[..p]))
        .expect("full length is always a period");
    let g = Group::Free(0);
    let conj = Element::Free(w[..lo].to_vec());
    let root = g.mul(&g.mul(&conj, &Element::Free(core[..period].to_vec())), &g.invert(&conj));
    (root, (len / period) as u64)
}

fn klein_primitive_root(a: i64, b: i64) -> (Element, u64) {
    // (x,y)^k = (kx, ky) when x is even; (kx, y or 0 by parity of k) when x is odd
    if a == 0 {
        (Element::Klein(0, sign(b)), b.unsigned_abs())
    } else if b == 0 {
        (Element::Klein(sign(a), 0), a.unsigned_abs())
    } else if a.rem_euclid(2) == 1 {
        (Element::Klein(sign(a), b), a.unsigned_abs())
    } else {
        let mut e = a.gcd(&b);
        while e % 2 == 0 {
            e /= 2;
        }
        (Element::Klein(a / e, b / e), e as u64)
    }
}

fn heisenberg_primitive_root(a: i64, b: i64, c: i64) -> (Element, u64) {
    if a == 0 && b == 0 {
        return (Element::Heisenberg(0, 0, sign(c)), c.unsigned_abs());
    }
    // (x,y,z)^e = (ex, ey, ez + e(e-1)/2·xy)
    let g = a.gcd(&b);
    for e in (1..=g).rev().filter(|e| g % e == 0) {
        let (x, y) = (a / e, b / e);
        let t = c - mul(mul(e, e - 1) / 2, mul(x, y));
        if t % e == 0 {
            return (Element::Heisenberg(x, y, t / e), e as u64);
        }
    }
    unreachable!("e = 1 always succeeds")
}

fn parse_int(s: &str, column: usize) -> Result<i64> {
    s.trim()
        .parse::<i64>()
        .map_err(|_| Error::parse(column, format!("expected an integer, found `{}`", s.trim())))
}

fn parse_tuple(s: &str, arity: usize) -> Result<Vec<i64>> {
    let lead = s.len() - s.trim_start().len();
    let t = s.trim();
    let inner = t
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::parse(lead + 1, "expected a parenthesised tuple"))?;
    let mut out = Vec::with_capacity(arity);
    let mut col = lead + 2;
    for part in inner.split(',') {
        out.push(parse_int(part, col)?);
        col += part.len() + 1;
    }
    if out.len() != arity {
        return Err(Error::parse(
            lead + 1,
            format!("expected {arity} coordinates, found {}", out.len()),
        ));
    }
    Ok(out)
}

/// Splits a word into `(column, generator, exponent)` factors.
fn parse_word(s: &str, letters: &[char]) -> Result<Vec<(usize, char, i64)>> {
    let mut out = Vec::new();
    let mut pos = 0;
    for tok in s.split_whitespace() {
        let start = pos + s[pos..].find(tok).unwrap();
        pos = start + tok.len();
        let col = start + 1;
        if tok == "1" {
            continue;
        }
        let mut chars = tok.chars();
        let c = chars.next().unwrap();
        if !letters.contains(&c) {
            return Err(Error::parse(col, format!("unknown generator `{c}`")));
        }
        let rest = chars.as_str();
        let e = if rest.is_empty() {
            1
        } else if let Some(num) = rest.strip_prefix('^') {
            parse_int(num, col + 2)?
        } else {
            return Err(Error::parse(col + 1, format!("unexpected `{rest}` after generator")));
        };
        out.push((col, c, e));
    }
    Ok(out)
}

fn write_factor(f: &mut fmt::Formatter<'_>, first: &mut bool, letter: char, e: i64) -> fmt::Result {
    if e == 0 {
        return Ok(());
    }
    if !*first {
        f.write_str(" ")?;
    }
    *first = false;
    if e == 1 {
        write!(f, "{letter}")
    } else {
        write!(f, "{letter}^{e}")
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Lattice(v) => {
                f.write_str("(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
            Element::Heisenberg(x, y, z) => write!(f, "({x},{y},{z})"),
            Element::Klein(a, b) => {
                if *a == 0 && *b == 0 {
                    return f.write_str("1");
                }
                let mut first = true;
                write_factor(f, &mut first, 'u', *a)?;
                write_factor(f, &mut first, 'v', *b)
            }
            Element::Free(w) => {
                if w.is_empty() {
                    return f.write_str("1");
                }
                let mut first = true;
                let mut i = 0;
                while i < w.len() {
                    let mut j = i;
                    while j < w.len() && w[j] == w[i] {
                        j += 1;
                    }
                    let letter = (b'a' + (w[i].unsigned_abs() - 1) as u8) as char;
                    let run = (j - i) as i64;
                    write_factor(f, &mut first, letter, if w[i] > 0 { run } else { -run })?;
                    i = j;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::Lattice(d) => write!(f, "zd:{d}"),
            Group::Free(k) => write!(f, "free:{k}"),
            Group::Klein => f.write_str("klein"),
            Group::Heisenberg => f.write_str("heis"),
        }
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("unknown group spec `{s}` (expected zd:<d>, free:<k>, klein or heis)"));
        match s.trim() {
            "klein" => Ok(Group::Klein),
            "heis" => Ok(Group::Heisenberg),
            t => {
                let (kind, num) = t.split_once(':').ok_or_else(bad)?;
                let num: usize = num.parse().map_err(|_| bad())?;
                match kind {
                    "zd" if num >= 1 => Ok(Group::Lattice(num)),
                    "free" if (1..=26).contains(&num) => Ok(Group::Free(num)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

impl Serialize for Group {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Group {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
