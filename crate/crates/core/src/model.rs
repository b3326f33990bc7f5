//! Per-round domain types shared by the simulator and the sifting stage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Encoding basis of a time-bin qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    /// Which time bin carries the pulse.
    Z,
    /// Relative phase 0 or pi between the two bins.
    X,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Z, Basis::X];

    pub fn index(self) -> usize {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Basis::Z => "Z",
            Basis::X => "X",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Basis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Z" | "z" => Ok(Basis::Z),
            "X" | "x" => Ok(Basis::X),
            other => Err(format!("unknown basis {other:?}, expected Z or X")),
        }
    }
}

/// Click flags of the two detectors in the two time bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Clicks {
    /// Detector D1 in bins t0 and t1.
    pub d1: [bool; 2],
    /// Detector D2 in bins t0 and t1.
    pub d2: [bool; 2],
}

impl Clicks {
    /// Builds from flags ordered (D1,t0), (D1,t1), (D2,t0), (D2,t1).
    pub fn from_flags(flags: [bool; 4]) -> Self {
        Clicks {
            d1: [flags[0], flags[1]],
            d2: [flags[2], flags[3]],
        }
    }

    /// Flags ordered (D1,t0), (D1,t1), (D2,t0), (D2,t1).
    pub fn flags(&self) -> [bool; 4] {
        [self.d1[0], self.d1[1], self.d2[0], self.d2[1]]
    }

    /// Pattern number in 0..16; bit `i` is flag `i` of [`Clicks::flags`].
    pub fn pattern_index(&self) -> usize {
        self.flags()
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &f)| acc | (usize::from(f) << i))
    }

    pub fn from_pattern_index(index: usize) -> Self {
        assert!(index < 16, "pattern index {index} out of range");
        Clicks::from_flags([0, 1, 2, 3].map(|i| index >> i & 1 == 1))
    }

    pub fn count(&self) -> usize {
        self.flags().iter().filter(|&&f| f).count()
    }

    /// Successful partial Bell-state measurement: exactly two clicks, on
    /// different detectors in different time bins.
    pub fn is_bsm_success(&self) -> bool {
        let [a, b, c, d] = self.flags();
        (a && d && !b && !c) || (b && c && !a && !d)
    }
}

/// Record of one simulated round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulsePairOutcome {
    pub intensity_index_alice: usize,
    pub intensity_index_bob: usize,
    pub basis_alice: Basis,
    pub basis_bob: Basis,
    pub bit_alice: bool,
    pub bit_bob: bool,
    pub clicks: Clicks,
}
