//! Built-in preference profiles.
//!
//! The lab tables list 1-indexed inclusive pixel ranges as columns and one
//! 0/1 row per agent, subject first. A range `a-b` becomes `[a-1, b)`.

use crate::cake::Cake;
use crate::procedure::ProcedureId;
use crate::profile::{AgentWeights, Mode, Profile, ProfileFile};

struct Table {
    columns: &'static [(u32, u32)],
    rows: &'static [&'static [u8]],
}

const T_2ACC: Table = Table {
    columns: &[
        (61, 120),
        (121, 130),
        (171, 190),
        (291, 310),
        (411, 430),
        (451, 540),
    ],
    rows: &[&[1, 0, 1, 1, 1, 0], &[0, 1, 0, 0, 1, 1]],
};

const T_2SCC: Table = Table {
    columns: &[
        (141, 170),
        (191, 220),
        (231, 240),
        (241, 260),
        (271, 300),
        (311, 320),
        (321, 330),
        (361, 390),
        (471, 490),
        (511, 540),
    ],
    rows: &[
        &[0, 0, 1, 1, 1, 1, 0, 0, 1, 1],
        &[1, 1, 1, 0, 0, 1, 1, 1, 0, 0],
    ],
};

const T_3DS: Table = Table {
    columns: &[
        (71, 110),
        (121, 130),
        (131, 150),
        (151, 160),
        (171, 180),
        (191, 200),
        (271, 310),
        (311, 380),
        (411, 430),
        (451, 540),
    ],
    rows: &[
        &[1, 1, 1, 1, 0, 0, 1, 0, 0, 0],
        &[0, 1, 0, 0, 0, 0, 0, 0, 1, 1],
        &[0, 1, 1, 0, 1, 1, 0, 1, 0, 0],
    ],
};

const T_4DS: Table = Table {
    columns: &[
        (61, 80),
        (81, 90),
        (91, 120),
        (141, 150),
        (151, 170),
        (171, 180),
        (181, 210),
        (211, 240),
        (241, 270),
        (271, 300),
        (301, 330),
        (331, 360),
        (371, 390),
        (391, 420),
        (421, 450),
        (451, 480),
        (491, 510),
        (511, 540),
    ],
    rows: &[
        &[1, 0, 0, 1, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0],
        &[1, 1, 0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0],
        &[0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0],
        &[0, 0, 0, 0, 1, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1],
    ],
};

const T_3LD: Table = Table {
    columns: &[
        (71, 90),
        (91, 110),
        (121, 190),
        (221, 230),
        (231, 260),
        (281, 300),
        (301, 320),
        (341, 350),
        (351, 370),
        (371, 400),
        (401, 410),
        (431, 440),
        (451, 460),
    ],
    rows: &[
        &[0, 1, 0, 1, 1, 1, 0, 1, 1, 0, 1, 0, 0],
        &[1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        &[0, 0, 0, 0, 0, 1, 1, 0, 1, 1, 1, 1, 1],
    ],
};

const T_4LD: Table = Table {
    columns: &[
        (61, 90),
        (91, 110),
        (111, 160),
        (181, 230),
        (231, 250),
        (251, 270),
        (271, 280),
        (281, 290),
        (311, 340),
        (341, 350),
        (351, 370),
        (371, 380),
        (381, 410),
        (421, 520),
    ],
    rows: &[
        &[1, 0, 0, 1, 1, 0, 1, 1, 0, 0, 0, 0, 0, 0],
        &[0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 1, 1, 0, 0],
        &[0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 1, 1, 0],
        &[0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    ],
};

const T_4EP: Table = Table {
    columns: &[
        (91, 110),
        (111, 120),
        (121, 140),
        (161, 170),
        (171, 190),
        (191, 210),
        (211, 220),
        (221, 240),
        (241, 270),
        (281, 300),
        (301, 320),
        (331, 340),
        (341, 350),
        (351, 360),
        (361, 370),
        (411, 430),
        (471, 510),
    ],
    rows: &[
        &[1, 1, 0, 0, 1, 1, 1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0],
        &[0, 1, 1, 0, 1, 1, 0, 0, 0, 1, 1, 0, 0, 1, 0, 0, 0],
        &[0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 1, 1, 1, 1, 0],
        &[0, 0, 0, 1, 1, 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 0, 1],
    ],
};

const T_3SC: Table = Table {
    columns: &[
        (71, 80),
        (81, 90),
        (91, 100),
        (101, 110),
        (141, 150),
        (151, 170),
        (171, 190),
        (211, 230),
        (271, 280),
        (281, 290),
        (291, 300),
        (301, 320),
        (321, 330),
        (331, 340),
        (381, 400),
        (451, 470),
        (471, 490),
    ],
    rows: &[
        &[0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 1, 1, 1],
        &[0, 1, 0, 1, 1, 1, 0, 0, 1, 1, 0, 1, 0, 1, 0, 0, 1],
        &[1, 1, 1, 1, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 1],
    ],
};

fn table(id: ProcedureId) -> &'static Table {
    match id {
        ProcedureId::Acc2 => &T_2ACC,
        ProcedureId::Scc2 => &T_2SCC,
        ProcedureId::Ds3 => &T_3DS,
        ProcedureId::Ds4 => &T_4DS,
        ProcedureId::Ld3 => &T_3LD,
        ProcedureId::Ld4 => &T_4LD,
        ProcedureId::Ep4 => &T_4EP,
        ProcedureId::Sc3 => &T_3SC,
    }
}

/// The lab profile file for a procedure, subject first.
pub fn lab_profile_file(id: ProcedureId) -> ProfileFile {
    let t = table(id);
    ProfileFile {
        cake_pixels: Cake::lab().width(),
        agents: t
            .rows
            .iter()
            .map(|row| AgentWeights {
                weights: t
                    .columns
                    .iter()
                    .zip(row.iter())
                    .filter(|(_, &d)| d == 1)
                    .map(|(&(a, b), _)| (a - 1, b, 1))
                    .collect(),
            })
            .collect(),
    }
}

pub fn lab_profile(id: ProcedureId) -> Profile {
    Profile::from_file(&lab_profile_file(id), Mode::Lab).expect("built-in lab profile is valid")
}

/// Lab profile by fixture name (`2acc`, `2scc`, `3ds`, `4ds`, `3ld`, `4ld`, `4ep`, `3sc`).
pub fn lab_profile_named(name: &str) -> Option<Profile> {
    name.parse::<ProcedureId>().ok().map(lab_profile)
}

/// Block valuations: agent `i` values only the `i`-th of `n` equal stretches.
pub fn blocks(n: usize) -> Profile {
    let w = Cake::lab().width();
    let step = w / n as u32;
    let file = ProfileFile {
        cake_pixels: w,
        agents: (0..n as u32)
            .map(|i| AgentWeights {
                weights: vec![(
                    i * step,
                    if i + 1 == n as u32 { w } else { (i + 1) * step },
                    1,
                )],
            })
            .collect(),
    };
    Profile::from_file(&file, Mode::General).expect("block profile is valid")
}

/// Instance showing a procedure is at best ((n-1)/n)-strategy-proof.
pub fn gap_profile(id: ProcedureId) -> Profile {
    match id {
        ProcedureId::Scc2 => {
            // The subject's value sits on [0, 150) plus a dense sliver just
            // left of the opponent's narrow block, so any midpoint below 296
            // leaves the sliver on the wrong side.
            let file = ProfileFile {
                cake_pixels: Cake::lab().width(),
                agents: vec![
                    AgentWeights {
                        weights: vec![(0, 150, 1), (296, 298, 75)],
                    },
                    AgentWeights {
                        weights: vec![(300, 304, 1)],
                    },
                ],
            };
            Profile::from_file(&file, Mode::General).expect("valid")
        }
        other => blocks(other.agents()),
    }
}

/// Six 100-pixel parts with integer densities. Agent 0 is the 3SC cutter;
/// agents 1 and 2 share one valuation.
pub fn envious_cutter_profile() -> Profile {
    const SUBJECT: [u64; 6] = [0, 40, 1, 39, 1, 39];
    const OTHERS: [u64; 6] = [20, 20, 40, 0, 40, 0];
    let agent = |d: &[u64; 6]| AgentWeights {
        weights: d
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0)
            .map(|(k, &w)| (k as u32 * 100, k as u32 * 100 + 100, w))
            .collect(),
    };
    let file = ProfileFile {
        cake_pixels: Cake::lab().width(),
        agents: vec![agent(&SUBJECT), agent(&OTHERS), agent(&OTHERS)],
    };
    Profile::from_file(&file, Mode::General).expect("valid")
}
