//! Static critical site percolation: configurations, crossings, arm
//! events, pivotal sites, the four-arm calibration and the `d_mod` distance.

mod alpha4;
mod arms;
mod crossing;
mod dmod;
mod important;

use serde::{Deserialize, Serialize};

use crate::lattice::Lattice;
use crate::rng;

pub use alpha4::{calibrate_alpha4, default_cache_dir, Alpha4Calibration, Alpha4Entry, CACHE_ENV};
pub use arms::{four_arm, four_arm_bfs, trace_arm_interfaces, ArmStarts, LatticeBox};
pub use crossing::{
    crosses, crossing, crossing_table, hex_board_crossing, pivotal_for, pivotal_probabilities, CrossingResult,
    QuadSites,
};
pub use dmod::{d_mod, MAX_DMOD_QUADS};
pub use important::{epsilon_important, pivotal_measure, write_sites_csv};

const TAG_COLOR: u64 = 0x0C01_0B5E;

/// Per-site colors, `+1` open (black) and `-1` closed (white).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    pub colors: Vec<i8>,
    pub seed: u64,
}

impl Configuration {
    pub fn from_open(open: impl IntoIterator<Item = bool>, seed: u64) -> Self {
        Configuration { colors: open.into_iter().map(|o| if o { 1 } else { -1 }).collect(), seed }
    }

    pub fn constant(n: usize, open: bool) -> Self {
        Configuration { colors: vec![if open { 1 } else { -1 }; n], seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    #[inline]
    pub fn is_open(&self, s: u32) -> bool {
        self.colors[s as usize] > 0
    }

    pub fn flip(&mut self, s: u32) {
        self.colors[s as usize] = -self.colors[s as usize];
    }

    pub fn set(&mut self, s: u32, open: bool) {
        self.colors[s as usize] = if open { 1 } else { -1 };
    }

    pub fn open_count(&self) -> usize {
        self.colors.iter().filter(|&&c| c > 0).count()
    }
}

/// Key whose lattice bits are the colors of configuration `seed`.
pub fn color_key(seed: u64) -> u64 {
    rng::hash4(seed, TAG_COLOR, 0, 0, 0)
}

/// Color of lattice point `(i, j)` in the configuration with this seed,
/// defined on the whole plane.
#[inline]
pub fn color_at(key: u64, i: i32, j: i32) -> bool {
    rng::lattice_bit(key, i, j)
}

/// Iid fair colors. Colors are attached to lattice coordinates, so lattices
/// over overlapping domains see the same colors at shared points.
pub fn sample_configuration(lat: &Lattice, seed: u64) -> Configuration {
    let key = color_key(seed);
    let colors = (0..lat.len() as u32)
        .map(|s| {
            let (i, j) = lat.coords(s);
            if color_at(key, i, j) {
                1
            } else {
                -1
            }
        })
        .collect();
    Configuration { colors, seed }
}
