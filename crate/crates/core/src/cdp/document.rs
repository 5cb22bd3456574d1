//! JSON form of a [`LayeredCdp`].
//!
//! ```json
//! {
//!   "horizon": 2,
//!   "numActions": 2,
//!   "levels": [1, 2],
//!   "start": 0,
//!   "revealHistory": false,
//!   "transitions": [ { "level": 1, "index": 0, "next": [0, 1] } ],
//!   "observations": [
//!     { "level": 1, "index": 0, "support": [
//!         { "observation": { "token": 0 }, "prob": 1.0,
//!           "rewards": [ { "kind": "deterministic", "value": 0.0 },
//!                        { "kind": "bernoulli", "mean": 0.5 } ] } ] }
//!   ]
//! }
//! ```
//!
//! `transitions` lists every state of levels `1..H`; states at level `H` move
//! to the terminal state and have no entry. `observations` lists every state.
//! Floats are written with shortest round-trip formatting, so load and save
//! are exact inverses on all numeric fields.

use serde::{Deserialize, Serialize};

use super::{LayeredCdp, ObsRewardDist, StateId, SupportPoint};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CdpDocument {
    pub horizon: usize,
    pub num_actions: usize,
    pub levels: Vec<usize>,
    #[serde(default)]
    pub start: usize,
    #[serde(default)]
    pub reveal_history: bool,
    pub transitions: Vec<TransitionRow>,
    pub observations: Vec<ObservationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub level: usize,
    pub index: usize,
    pub next: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub level: usize,
    pub index: usize,
    pub support: Vec<SupportPoint>,
}

impl From<LayeredCdp> for CdpDocument {
    fn from(cdp: LayeredCdp) -> Self {
        let transitions = cdp
            .transitions_raw()
            .iter()
            .enumerate()
            .flat_map(|(h, level)| {
                level
                    .iter()
                    .enumerate()
                    .map(move |(i, next)| TransitionRow { level: h + 1, index: i, next: next.clone() })
            })
            .collect();
        let observations = cdp
            .states()
            .map(|s: StateId| ObservationRow {
                level: s.level,
                index: s.index,
                support: cdp.dist(s).support().to_vec(),
            })
            .collect();
        CdpDocument {
            horizon: cdp.horizon(),
            num_actions: cdp.num_actions(),
            levels: cdp.level_sizes().to_vec(),
            start: cdp.start_index(),
            reveal_history: cdp.reveals_history(),
            transitions,
            observations,
        }
    }
}

impl TryFrom<CdpDocument> for LayeredCdp {
    type Error = Error;

    fn try_from(doc: CdpDocument) -> Result<Self, Error> {
        let h = doc.horizon;
        if doc.levels.len() != h {
            return Err(Error::InvalidCdp(format!("levels has {} entries, horizon is {h}", doc.levels.len())));
        }
        let mut transitions: Vec<Vec<Option<Vec<usize>>>> =
            doc.levels.iter().take(h.saturating_sub(1)).map(|&m| vec![None; m]).collect();
        for row in doc.transitions {
            let slot = row
                .level
                .checked_sub(1)
                .and_then(|l| transitions.get_mut(l))
                .and_then(|lv| lv.get_mut(row.index))
                .ok_or_else(|| Error::InvalidCdp(format!("transition row for unknown state s{}.{}", row.level, row.index)))?;
            if slot.replace(row.next).is_some() {
                return Err(Error::InvalidCdp(format!("duplicate transition row s{}.{}", row.level, row.index)));
            }
        }
        let transitions = transitions
            .into_iter()
            .enumerate()
            .map(|(l, lv)| {
                lv.into_iter()
                    .enumerate()
                    .map(|(i, r)| r.ok_or_else(|| Error::InvalidCdp(format!("missing transition row s{}.{i}", l + 1))))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut observations: Vec<Vec<Option<ObsRewardDist>>> =
            doc.levels.iter().map(|&m| (0..m).map(|_| None).collect()).collect();
        for row in doc.observations {
            let slot = row
                .level
                .checked_sub(1)
                .and_then(|l| observations.get_mut(l))
                .and_then(|lv| lv.get_mut(row.index))
                .ok_or_else(|| Error::InvalidCdp(format!("observation row for unknown state s{}.{}", row.level, row.index)))?;
            if slot.replace(ObsRewardDist::new(row.support)?).is_some() {
                return Err(Error::InvalidCdp(format!("duplicate observation row s{}.{}", row.level, row.index)));
            }
        }
        let observations = observations
            .into_iter()
            .enumerate()
            .map(|(l, lv)| {
                lv.into_iter()
                    .enumerate()
                    .map(|(i, d)| d.ok_or_else(|| Error::InvalidCdp(format!("missing observations for s{}.{i}", l + 1))))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;

        LayeredCdp::new(h, doc.num_actions, doc.levels, doc.start, transitions, observations, doc.reveal_history)
    }
}
