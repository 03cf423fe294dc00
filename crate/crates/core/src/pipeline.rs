//! Corpus-to-storm orchestration shared by the command line and evaluation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::{build_vector, compute_stats, group_corpus, select_weighted, Document, StopList};
use crate::error::{Error, Result};
use crate::layout::{
    self, CloudSpec, IterativeReport, Storm, StormSpec, WordSpec,
};
use crate::optimizer::MinimizeReport;
use crate::style::{assign_size, assign_styles, SizeScale};

/// Turns documents into cloud specifications with a shared style table.
///
/// Word sizes scale per cloud so every cloud spans the full size range.
pub fn prepare(docs: &[Document], stoplist: &StopList, config: &RunConfig) -> Result<StormSpec> {
    let docs = group_corpus(docs, config.grouping)?;
    let vectors = docs
        .iter()
        .map(|d| build_vector(d, stoplist))
        .collect::<Result<Vec<_>>>()?;
    let stats = compute_stats(&vectors);
    let mut vocab = BTreeSet::new();
    let clouds: Vec<CloudSpec> = docs
        .iter()
        .zip(&vectors)
        .map(|(doc, v)| {
            let selected = select_weighted(v, &stats, config.weight_mode, config.words_per_cloud);
            let scale = SizeScale::fit(
                config.size_min,
                config.size_max,
                selected.iter().map(|(_, w)| *w),
            );
            let words = selected
                .into_iter()
                .map(|(text, weight)| {
                    vocab.insert(text.clone());
                    WordSpec {
                        target: assign_size(weight, &scale),
                        text,
                        weight,
                    }
                })
                .collect();
            CloudSpec {
                doc_id: doc.id.clone(),
                label: doc.label.clone(),
                words,
                scale,
            }
        })
        .collect();
    let styles = assign_styles(vocab.iter().map(String::as_str), &stats, &config.style());
    Ok(StormSpec { clouds, styles })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Independent,
    Iterative,
    Gradient,
    Combined,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Independent,
        Method::Iterative,
        Method::Gradient,
        Method::Combined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Independent => "independent",
            Method::Iterative => "iterative",
            Method::Gradient => "gradient",
            Method::Combined => "combined",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub storm: Storm,
    pub iterative: Option<IterativeReport>,
    pub optimizer: Option<MinimizeReport>,
    pub elapsed: Duration,
}

/// Lays out `spec` with the chosen method, timing the layout alone.
pub fn build_storm(spec: &StormSpec, method: Method, config: &RunConfig) -> Result<BuildOutcome> {
    let layout = config.layout();
    let objective = config.objective();
    let start = Instant::now();
    let (storm, iterative, optimizer) = match method {
        Method::Independent => (layout::independent_layout(spec, &layout)?, None, None),
        Method::Iterative => {
            let (s, r) = layout::iterative_layout(spec, &layout)?;
            (s, Some(r), None)
        }
        Method::Gradient => {
            let (s, r) = layout::gradient_layout(spec, &layout, &objective)?;
            (s, None, Some(r))
        }
        Method::Combined => {
            let (s, i, r) = layout::combined_layout(spec, &layout, &objective)?;
            (s, Some(i), Some(r))
        }
    };
    Ok(BuildOutcome {
        storm,
        iterative,
        optimizer,
        elapsed: start.elapsed(),
    })
}
