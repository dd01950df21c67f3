//! Preference profiles: one valuation per agent, plus the JSON file format.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cake::{Cake, Points, LAB_TOTAL};
use crate::valuation::{Segment, Valuation};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Profile {
    cake: Cake,
    agents: Vec<Valuation>,
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("invalid profile: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("cannot read profile: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse profile: {0}")]
    Json(#[from] serde_json::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    General,
    /// 0/1 weights and exactly 120 points per agent.
    Lab,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    CakeTooNarrow {
        width: u32,
    },
    NoAgents,
    EmptySegment {
        agent: usize,
        start: u32,
        end: u32,
    },
    OutOfBounds {
        agent: usize,
        start: u32,
        end: u32,
        width: u32,
    },
    Overlap {
        agent: usize,
        start: u32,
        end: u32,
    },
    ZeroTotal {
        agent: usize,
    },
    NonBinaryWeight {
        agent: usize,
        start: u32,
        end: u32,
        weight: u64,
    },
    LabTotal {
        agent: usize,
        total: Points,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CakeTooNarrow { width } => write!(f, "cake width {width} is below 2"),
            Violation::NoAgents => write!(f, "profile has no agents"),
            Violation::EmptySegment { agent, start, end } => {
                write!(f, "agent {agent}: empty segment [{start}, {end})")
            }
            Violation::OutOfBounds {
                agent,
                start,
                end,
                width,
            } => write!(
                f,
                "agent {agent}: segment [{start}, {end}) outside [0, {width})"
            ),
            Violation::Overlap { agent, start, end } => {
                write!(f, "agent {agent}: segments overlap on [{start}, {end})")
            }
            Violation::ZeroTotal { agent } => write!(f, "agent {agent}: total value is 0"),
            Violation::NonBinaryWeight {
                agent,
                start,
                end,
                weight,
            } => write!(
                f,
                "agent {agent}: weight {weight} on [{start}, {end}) is not 0 or 1"
            ),
            Violation::LabTotal { agent, total } => {
                write!(f, "agent {agent}: total {total} is not {LAB_TOTAL}")
            }
        }
    }
}

/// On-disk form: `{"cake_pixels": 600, "agents": [{"weights": [[s, e, w], ...]}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub cake_pixels: u32,
    pub agents: Vec<AgentWeights>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentWeights {
    pub weights: Vec<(u32, u32, u64)>,
}

pub fn validate_profile(file: &ProfileFile, mode: Mode) -> Vec<Violation> {
    let mut out = Vec::new();
    let width = file.cake_pixels;
    if width < 2 {
        out.push(Violation::CakeTooNarrow { width });
    }
    if file.agents.is_empty() {
        out.push(Violation::NoAgents);
    }
    for (agent, a) in file.agents.iter().enumerate() {
        let mut total: Points = 0;
        let mut sorted: Vec<(u32, u32)> = Vec::new();
        for &(start, end, weight) in &a.weights {
            if start >= end {
                out.push(Violation::EmptySegment { agent, start, end });
                continue;
            }
            if end > width {
                out.push(Violation::OutOfBounds {
                    agent,
                    start,
                    end,
                    width,
                });
                continue;
            }
            if mode == Mode::Lab && weight > 1 {
                out.push(Violation::NonBinaryWeight {
                    agent,
                    start,
                    end,
                    weight,
                });
            }
            total += weight * u64::from(end - start);
            sorted.push((start, end));
        }
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[1].0 < w[0].1 {
                out.push(Violation::Overlap {
                    agent,
                    start: w[1].0,
                    end: w[0].1.min(w[1].1),
                });
            }
        }
        if total == 0 {
            out.push(Violation::ZeroTotal { agent });
        } else if mode == Mode::Lab && total != LAB_TOTAL {
            out.push(Violation::LabTotal { agent, total });
        }
    }
    out
}

impl ProfileFile {
    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        ProfileFile::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Profile {
    pub fn new(cake: Cake, agents: Vec<Valuation>) -> Result<Self, ProfileError> {
        Profile::from_file(
            &ProfileFile {
                cake_pixels: cake.width(),
                agents: agents
                    .iter()
                    .map(|v| AgentWeights {
                        weights: v
                            .segments()
                            .iter()
                            .map(|s| (s.start, s.end, s.weight))
                            .collect(),
                    })
                    .collect(),
            },
            Mode::General,
        )
    }

    pub fn from_file(file: &ProfileFile, mode: Mode) -> Result<Self, ProfileError> {
        let violations = validate_profile(file, mode);
        if !violations.is_empty() {
            return Err(ProfileError::Invalid(violations));
        }
        let cake = Cake::new(file.cake_pixels).expect("width validated");
        let agents = file
            .agents
            .iter()
            .map(|a| {
                Valuation::new(
                    cake,
                    a.weights
                        .iter()
                        .filter(|w| w.2 > 0)
                        .map(|&(s, e, w)| Segment::new(s, e, w))
                        .collect(),
                )
                .expect("segments validated")
            })
            .collect();
        Ok(Profile { cake, agents })
    }

    /// Lab-style profile from half-open desired intervals per agent.
    pub fn desired(cake: Cake, agents: &[&[(u32, u32)]]) -> Result<Self, ProfileError> {
        Profile::from_file(
            &ProfileFile {
                cake_pixels: cake.width(),
                agents: agents
                    .iter()
                    .map(|iv| AgentWeights {
                        weights: iv.iter().map(|&(a, b)| (a, b, 1)).collect(),
                    })
                    .collect(),
            },
            Mode::General,
        )
    }

    pub fn to_file(&self) -> ProfileFile {
        ProfileFile {
            cake_pixels: self.cake.width(),
            agents: self
                .agents
                .iter()
                .map(|v| AgentWeights {
                    weights: v
                        .segments()
                        .iter()
                        .map(|s| (s.start, s.end, s.weight))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn cake(&self) -> Cake {
        self.cake
    }

    pub fn agents(&self) -> &[Valuation] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &Valuation {
        &self.agents[i]
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(weights: Vec<Vec<(u32, u32, u64)>>) -> ProfileFile {
        ProfileFile {
            cake_pixels: 600,
            agents: weights
                .into_iter()
                .map(|weights| AgentWeights { weights })
                .collect(),
        }
    }

    #[test]
    fn overlap_and_zero_total_reported() {
        let f = file(vec![vec![(0, 10, 1), (5, 20, 1)], vec![]]);
        let v = validate_profile(&f, Mode::General);
        assert!(v.contains(&Violation::Overlap {
            agent: 0,
            start: 5,
            end: 10
        }));
        assert!(v.contains(&Violation::ZeroTotal { agent: 1 }));
    }

    #[test]
    fn lab_mode_checks_weights_and_total() {
        let f = file(vec![vec![(0, 60, 2)]]);
        assert!(validate_profile(&f, Mode::General).is_empty());
        let v = validate_profile(&f, Mode::Lab);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::NonBinaryWeight { .. }));
        let f = file(vec![vec![(0, 100, 1)]]);
        assert_eq!(
            validate_profile(&f, Mode::Lab),
            vec![Violation::LabTotal {
                agent: 0,
                total: 100
            }]
        );
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"cake_pixels": 600, "agents": [{"weights": [[0, 120, 1]]}, {"weights": [[120, 240, 1]]}]}"#;
        let f = ProfileFile::from_json(text).unwrap();
        let p = Profile::from_file(&f, Mode::Lab).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.agent(1).range(0, 200), 80);
        assert_eq!(p.to_file(), f);
    }

    #[test]
    fn invalid_profile_error_lists_violations() {
        let f = file(vec![vec![(10, 5, 1)]]);
        let err = Profile::from_file(&f, Mode::General).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("empty segment"), "{msg}");
        assert!(msg.contains("total value is 0"), "{msg}");
    }
}
