//! Law reports shared by the verifiers and the explorer's record format.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Element, Group};
use crate::setops::FiniteSubset;

/// Stable identifiers of every checked statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LawId {
    #[serde(rename = "kempermann")]
    Kempermann,
    #[serde(rename = "kempermann_equality")]
    KempermannEquality,
    #[serde(rename = "hls")]
    Hls,
    #[serde(rename = "freiman_dim")]
    FreimanDim,
    #[serde(rename = "ruzsa_dim")]
    RuzsaDim,
    #[serde(rename = "gardner_gronchi")]
    GardnerGronchi,
    #[serde(rename = "3k4")]
    ThreeKFour,
    #[serde(rename = "intersection")]
    Intersection,
    #[serde(rename = "atom_left")]
    AtomLeft,
    #[serde(rename = "atom_right")]
    AtomRight,
    #[serde(rename = "atom_nonunique")]
    AtomNonunique,
    #[serde(rename = "two_atom_rough")]
    TwoAtomRough,
    #[serde(rename = "two_atom")]
    TwoAtom,
    #[serde(rename = "n_atom")]
    NAtom,
    #[serde(rename = "atom_conjecture")]
    AtomConjecture,
    #[serde(rename = "uvk")]
    Uvk,
    #[serde(rename = "main_theorem")]
    MainTheorem,
    #[serde(rename = "corollary_ab")]
    CorollaryAb,
    #[serde(rename = "two_progression_union")]
    TwoProgressionUnion,
    #[serde(rename = "klein_grid")]
    KleinGrid,
    #[serde(rename = "klein_union")]
    KleinUnion,
    #[serde(rename = "c_lower")]
    CLower,
}

impl LawId {
    pub const ALL: [LawId; 22] = [
        LawId::Kempermann,
        LawId::KempermannEquality,
        LawId::Hls,
        LawId::FreimanDim,
        LawId::RuzsaDim,
        LawId::GardnerGronchi,
        LawId::ThreeKFour,
        LawId::Intersection,
        LawId::AtomLeft,
        LawId::AtomRight,
        LawId::AtomNonunique,
        LawId::TwoAtomRough,
        LawId::TwoAtom,
        LawId::NAtom,
        LawId::AtomConjecture,
        LawId::Uvk,
        LawId::MainTheorem,
        LawId::CorollaryAb,
        LawId::TwoProgressionUnion,
        LawId::KleinGrid,
        LawId::KleinUnion,
        LawId::CLower,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LawId::Kempermann => "kempermann",
            LawId::KempermannEquality => "kempermann_equality",
            LawId::Hls => "hls",
            LawId::FreimanDim => "freiman_dim",
            LawId::RuzsaDim => "ruzsa_dim",
            LawId::GardnerGronchi => "gardner_gronchi",
            LawId::ThreeKFour => "3k4",
            LawId::Intersection => "intersection",
            LawId::AtomLeft => "atom_left",
            LawId::AtomRight => "atom_right",
            LawId::AtomNonunique => "atom_nonunique",
            LawId::TwoAtomRough => "two_atom_rough",
            LawId::TwoAtom => "two_atom",
            LawId::NAtom => "n_atom",
            LawId::AtomConjecture => "atom_conjecture",
            LawId::Uvk => "uvk",
            LawId::MainTheorem => "main_theorem",
            LawId::CorollaryAb => "corollary_ab",
            LawId::TwoProgressionUnion => "two_progression_union",
            LawId::KleinGrid => "klein_grid",
            LawId::KleinUnion => "klein_union",
            LawId::CLower => "c_lower",
        }
    }

    /// Conjectures report `finding`, never `violated`.
    pub fn is_conjecture(&self) -> bool {
        matches!(self, LawId::AtomConjecture | LawId::TwoProgressionUnion)
    }

    pub fn is_atom_lemma(&self) -> bool {
        matches!(
            self,
            LawId::AtomLeft
                | LawId::AtomRight
                | LawId::AtomNonunique
                | LawId::TwoAtomRough
                | LawId::TwoAtom
                | LawId::NAtom
                | LawId::AtomConjecture
        )
    }
}

impl fmt::Display for LawId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LawId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LawId::ALL
            .iter()
            .find(|l| l.as_str() == s)
            .copied()
            .ok_or_else(|| Error::Usage(format!("unknown law id `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    HypothesisNotMet,
    Finding,
    Skipped,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::HypothesisNotMet => "hypothesis_not_met",
            Verdict::Finding => "finding",
            Verdict::Skipped => "skipped",
        })
    }
}

/// Larger side minus smaller side of the checked inequality, as stated.
/// Non-strict laws hold iff the slack is ≥ 0, strict laws iff it is > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Slack {
    Exact(i64),
    Real(f64),
}

impl Slack {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Slack::Exact(v) => v as f64,
            Slack::Real(v) => v,
        }
    }
}

impl fmt::Display for Slack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slack::Exact(v) => write!(f, "{v}"),
            Slack::Real(v) => write!(f, "{v:.6}"),
        }
    }
}

/// Everything needed to recompute a report: printed sets, elements and integer parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub group: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sets: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub elements: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, i64>,
}

impl Witness {
    pub fn new(group: Group) -> Self {
        Witness {
            group: group.to_string(),
            ..Default::default()
        }
    }

    pub fn set(mut self, name: &str, s: &FiniteSubset) -> Self {
        self.sets.insert(name.to_string(), s.to_strings());
        self
    }

    pub fn element(mut self, name: &str, g: &Element) -> Self {
        self.elements.insert(name.to_string(), g.to_string());
        self
    }

    pub fn param(mut self, name: &str, v: i64) -> Self {
        self.params.insert(name.to_string(), v);
        self
    }

    pub fn group(&self) -> Result<Group> {
        self.group.parse()
    }

    pub fn get_set(&self, name: &str) -> Result<FiniteSubset> {
        let items = self
            .sets
            .get(name)
            .ok_or_else(|| Error::Usage(format!("witness has no set `{name}`")))?;
        FiniteSubset::from_strings(self.group()?, items)
    }

    pub fn get_element(&self, name: &str) -> Result<Element> {
        let s = self
            .elements
            .get(name)
            .ok_or_else(|| Error::Usage(format!("witness has no element `{name}`")))?;
        self.group()?.parse_element(s)
    }

    pub fn get_param(&self, name: &str) -> Result<i64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::Usage(format!("witness has no parameter `{name}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub law: LawId,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<Slack>,
    pub witness: Witness,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Set on findings derived from a result without an exactness certificate.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unconfirmed: bool,
}

impl LawReport {
    pub fn new(law: LawId, verdict: Verdict, slack: Option<Slack>, witness: Witness) -> Self {
        LawReport {
            law,
            verdict,
            slack,
            witness,
            note: None,
            unconfirmed: false,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Report for a non-strict inequality `lhs ≥ rhs`.
    pub fn at_least(law: LawId, lhs: i64, rhs: i64, witness: Witness) -> Self {
        let verdict = if lhs >= rhs {
            Verdict::Holds
        } else if law.is_conjecture() {
            Verdict::Finding
        } else {
            Verdict::Violated
        };
        LawReport::new(law, verdict, Some(Slack::Exact(lhs - rhs)), witness)
    }

    /// Report for a strict inequality `lhs > rhs`.
    pub fn greater(law: LawId, lhs: i64, rhs: i64, witness: Witness) -> Self {
        let verdict = if lhs > rhs {
            Verdict::Holds
        } else if law.is_conjecture() {
            Verdict::Finding
        } else {
            Verdict::Violated
        };
        LawReport::new(law, verdict, Some(Slack::Exact(lhs - rhs)), witness)
    }

    pub fn hypothesis_not_met(law: LawId, witness: Witness, why: impl Into<String>) -> Self {
        LawReport::new(law, Verdict::HypothesisNotMet, None, witness).with_note(why)
    }

    pub fn skipped(law: LawId, witness: Witness, why: impl Into<String>) -> Self {
        LawReport::new(law, Verdict::Skipped, None, witness).with_note(why)
    }

    pub fn one_line(&self) -> String {
        let mut s = format!("{} {}", self.law, self.verdict);
        if let Some(sl) = &self.slack {
            s.push_str(&format!(" slack={sl}"));
        }
        if self.unconfirmed {
            s.push_str(" unconfirmed");
        }
        if let Some(n) = &self.note {
            s.push_str(&format!(" ({n})"));
        }
        s
    }
}
