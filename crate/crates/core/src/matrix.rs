//! Papers × tools grid of binary verdicts for one criterion.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detectors::{Criterion, ToolVerdict};

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("verdict for {pmcid} from {tool} is for {found}, expected {expected}")]
    CriterionMismatch {
        pmcid: String,
        tool: String,
        found: Criterion,
        expected: Criterion,
    },
    #[error("conflicting verdicts for (paper, tool): {}", fmt_pairs(.pairs))]
    Conflict { pairs: Vec<(String, String)> },
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
}

fn fmt_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(p, t)| format!("({p}, {t})"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    /// Every tool ran and all agree.
    Unanimous(bool),
    /// At least two tools that ran disagree.
    Disagreement,
    /// The tools that ran agree, but at least one tool has no verdict.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMatrix {
    pub criterion: Criterion,
    pub papers: Vec<String>,
    pub tools: Vec<String>,
    /// `cells[paper][tool]`; `None` means the tool produced no verdict.
    pub cells: Vec<Vec<Option<bool>>>,
    /// paper → tool → evidence sentences, for positive cells that had any.
    #[serde(default)]
    pub evidence: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

/// Builds the grid. Papers and tools are sorted; a duplicate (paper, tool)
/// pair is accepted only when both verdicts agree.
pub fn merge_into_matrix(verdicts: &[ToolVerdict], criterion: Criterion) -> Result<DetectionMatrix, MatrixError> {
    let mut by_pair: BTreeMap<(&str, &str), bool> = BTreeMap::new();
    let mut conflicts: BTreeSet<(String, String)> = BTreeSet::new();
    let mut evidence: BTreeMap<String, BTreeMap<String, Vec<String>>> = BTreeMap::new();
    for v in verdicts {
        if v.criterion != criterion {
            return Err(MatrixError::CriterionMismatch {
                pmcid: v.pmcid.clone(),
                tool: v.tool.clone(),
                found: v.criterion,
                expected: criterion,
            });
        }
        match by_pair.insert((&v.pmcid, &v.tool), v.present) {
            Some(prev) if prev != v.present => {
                conflicts.insert((v.pmcid.clone(), v.tool.clone()));
            }
            _ => {}
        }
        if v.present && !v.evidence.is_empty() {
            let slot = evidence
                .entry(v.pmcid.clone())
                .or_default()
                .entry(v.tool.clone())
                .or_default();
            for e in &v.evidence {
                if !slot.contains(e) {
                    slot.push(e.clone());
                }
            }
        }
    }
    if !conflicts.is_empty() {
        return Err(MatrixError::Conflict {
            pairs: conflicts.into_iter().collect(),
        });
    }
    let papers: Vec<String> = by_pair
        .keys()
        .map(|(p, _)| p.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let tools: Vec<String> = by_pair
        .keys()
        .map(|(_, t)| t.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let cells = papers
        .iter()
        .map(|p| {
            tools
                .iter()
                .map(|t| by_pair.get(&(p.as_str(), t.as_str())).copied())
                .collect()
        })
        .collect();
    Ok(DetectionMatrix {
        criterion,
        papers,
        tools,
        cells,
        evidence,
    })
}

impl DetectionMatrix {
    pub fn tool_index(&self, tool: &str) -> Option<usize> {
        self.tools.iter().position(|t| t == tool)
    }

    pub fn paper_index(&self, pmcid: &str) -> Option<usize> {
        self.papers.binary_search_by(|p| p.as_str().cmp(pmcid)).ok()
    }

    pub fn row_status(&self, row: usize) -> RowStatus {
        let cells = &self.cells[row];
        let present: Vec<bool> = cells.iter().flatten().copied().collect();
        let (any_true, any_false) = (present.contains(&true), present.contains(&false));
        if any_true && any_false {
            RowStatus::Disagreement
        } else if present.len() < cells.len() || present.is_empty() {
            RowStatus::Incomplete
        } else {
            RowStatus::Unanimous(any_true)
        }
    }

    pub fn status_of(&self, pmcid: &str) -> Option<RowStatus> {
        self.paper_index(pmcid).map(|i| self.row_status(i))
    }

    /// Papers on which at least two tools disagree.
    pub fn disagreements(&self) -> Vec<&str> {
        (0..self.papers.len())
            .filter(|&i| self.row_status(i) == RowStatus::Disagreement)
            .map(|i| self.papers[i].as_str())
            .collect()
    }

    /// Papers every tool classified identically, with that classification.
    pub fn unanimous(&self) -> Vec<(&str, bool)> {
        (0..self.papers.len())
            .filter_map(|i| match self.row_status(i) {
                RowStatus::Unanimous(v) => Some((self.papers[i].as_str(), v)),
                _ => None,
            })
            .collect()
    }

    /// One tool's verdicts, skipping absent cells.
    pub fn column(&self, tool: &str) -> Result<BTreeMap<String, bool>, MatrixError> {
        let j = self
            .tool_index(tool)
            .ok_or_else(|| MatrixError::UnknownTool(tool.to_string()))?;
        Ok(self
            .papers
            .iter()
            .zip(&self.cells)
            .filter_map(|(p, row)| row[j].map(|v| (p.clone(), v)))
            .collect())
    }

    /// Rows with a verdict from every tool, as (pmcid, feature vector).
    pub fn complete_rows(&self) -> Vec<(&str, Vec<bool>)> {
        self.papers
            .iter()
            .zip(&self.cells)
            .filter_map(|(p, row)| row.iter().copied().collect::<Option<Vec<bool>>>().map(|r| (p.as_str(), r)))
            .collect()
    }

    pub fn evidence_for(&self, pmcid: &str, tool: &str) -> &[String] {
        self.evidence
            .get(pmcid)
            .and_then(|m| m.get(tool))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Verdicts present in the grid for one paper, in tool order.
    pub fn verdicts_for(&self, pmcid: &str) -> Vec<ToolVerdict> {
        let Some(i) = self.paper_index(pmcid) else {
            return Vec::new();
        };
        self.tools
            .iter()
            .zip(&self.cells[i])
            .filter_map(|(t, cell)| {
                cell.map(|present| {
                    let mut v = ToolVerdict::new(pmcid, t, self.criterion, present);
                    if present {
                        v.evidence = self.evidence_for(pmcid, t).to_vec();
                    }
                    v
                })
            })
            .collect()
    }

    pub fn to_verdicts(&self) -> Vec<ToolVerdict> {
        self.papers.iter().flat_map(|p| self.verdicts_for(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(p: &str, t: &str, present: bool) -> ToolVerdict {
        ToolVerdict::new(p, t, Criterion::Blinding, present)
    }

    #[test]
    fn shape_and_status() {
        let m = merge_into_matrix(
            &[
                v("PMC3", "b", true),
                v("PMC1", "a", true),
                v("PMC1", "b", true),
                v("PMC2", "a", true),
                v("PMC2", "b", false),
                v("PMC3", "a", true),
            ],
            Criterion::Blinding,
        )
        .unwrap();
        assert_eq!(m.papers, ["PMC1", "PMC2", "PMC3"]);
        assert_eq!(m.tools, ["a", "b"]);
        assert_eq!(m.disagreements(), ["PMC2"]);
        assert_eq!(m.unanimous(), [("PMC1", true), ("PMC3", true)]);
    }

    #[test]
    fn absent_cells() {
        let m = merge_into_matrix(
            &[v("PMC1", "a", true), v("PMC1", "b", true), v("PMC2", "b", false)],
            Criterion::Blinding,
        )
        .unwrap();
        assert_eq!(m.cells[1], [None, Some(false)]);
        assert_eq!(m.row_status(1), RowStatus::Incomplete);
        assert_eq!(m.column("a").unwrap().len(), 1);
        assert_eq!(m.complete_rows().len(), 1);
    }

    #[test]
    fn conflicts_listed() {
        let err = merge_into_matrix(
            &[v("PMC1", "a", true), v("PMC1", "a", false), v("PMC1", "a", true)],
            Criterion::Blinding,
        )
        .unwrap_err();
        assert_eq!(
            err,
            MatrixError::Conflict {
                pairs: vec![("PMC1".into(), "a".into())]
            }
        );
        assert!(merge_into_matrix(&[v("PMC1", "a", true), v("PMC1", "a", true)], Criterion::Blinding).is_ok());
        assert!(matches!(
            merge_into_matrix(&[v("PMC1", "a", true)], Criterion::Power),
            Err(MatrixError::CriterionMismatch { .. })
        ));
    }
}
