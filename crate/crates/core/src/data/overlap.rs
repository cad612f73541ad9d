//! Normal / entity-pair-overlap / single-entity-overlap sentence labels.
//!
//! Two triples overlap on an *entity pair* when their ordered
//! `(subject, object)` spans are equal. They overlap on a *single entity*
//! when they share at least one entity span but not the ordered pair; a
//! reversed pair (`(a, b)` and `(b, a)`) therefore counts as single-entity
//! overlap. A sentence with neither kind of overlap is Normal.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::Triple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OverlapClass {
    Normal,
    #[serde(rename = "EPO")]
    Epo,
    #[serde(rename = "SEO")]
    Seo,
}

impl fmt::Display for OverlapClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverlapClass::Normal => "Normal",
            OverlapClass::Epo => "EPO",
            OverlapClass::Seo => "SEO",
        })
    }
}

/// Non-empty label set: `{Normal}` or a non-empty subset of `{EPO, SEO}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct OverlapLabels {
    pub epo: bool,
    pub seo: bool,
}

impl OverlapLabels {
    pub fn is_normal(&self) -> bool {
        !self.epo && !self.seo
    }

    pub fn contains(&self, class: OverlapClass) -> bool {
        match class {
            OverlapClass::Normal => self.is_normal(),
            OverlapClass::Epo => self.epo,
            OverlapClass::Seo => self.seo,
        }
    }

    pub fn classes(&self) -> Vec<OverlapClass> {
        if self.is_normal() {
            return vec![OverlapClass::Normal];
        }
        let mut out = Vec::with_capacity(2);
        if self.epo {
            out.push(OverlapClass::Epo);
        }
        if self.seo {
            out.push(OverlapClass::Seo);
        }
        out
    }
}

pub fn classify_overlap(triples: &[Triple]) -> OverlapLabels {
    let mut labels = OverlapLabels::default();
    for (i, a) in triples.iter().enumerate() {
        for b in &triples[i + 1..] {
            if a.subject == b.subject && a.object == b.object {
                labels.epo = true;
            } else if a.subject == b.subject
                || a.subject == b.object
                || a.object == b.subject
                || a.object == b.object
            {
                labels.seo = true;
            }
        }
    }
    labels
}
