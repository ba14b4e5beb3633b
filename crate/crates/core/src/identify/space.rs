use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::CrackSpec;

/// Grid coordinates of a candidate: indices into the location and depth lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Theta {
    pub location: usize,
    pub depth: usize,
}

/// Discrete search grid `Θ` of crack lines × depths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpace {
    pub lines: Vec<usize>,
    pub depths: Vec<u32>,
}

impl ParameterSpace {
    pub fn new(lines: Vec<usize>, depths: Vec<u32>) -> Result<Self> {
        if lines.is_empty() || depths.is_empty() {
            return Err(Error::invalid(
                "parameter space needs at least one line and one depth",
            ));
        }
        let strictly_increasing = |v: &[u64]| v.windows(2).all(|w| w[0] < w[1]);
        let l: Vec<u64> = lines.iter().map(|&v| v as u64).collect();
        let d: Vec<u64> = depths.iter().map(|&v| v as u64).collect();
        if !strictly_increasing(&l) || !strictly_increasing(&d) {
            return Err(Error::invalid(
                "lines and depths must be strictly increasing",
            ));
        }
        if depths.iter().any(|&d| d == 0 || d >= 100) {
            return Err(Error::invalid("depths must lie in 1..100 percent"));
        }
        Ok(ParameterSpace { lines, depths })
    }

    pub fn len(&self) -> usize {
        self.lines.len() * self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of parameters per candidate.
    pub fn dimension(&self) -> usize {
        2
    }

    pub fn contains(&self, t: Theta) -> bool {
        t.location < self.lines.len() && t.depth < self.depths.len()
    }

    pub fn crack(&self, t: Theta) -> CrackSpec {
        CrackSpec::new(self.lines[t.location], self.depths[t.depth])
    }

    pub fn theta_of(&self, crack: &CrackSpec) -> Option<Theta> {
        Some(Theta {
            location: self.lines.iter().position(|&l| l == crack.location_index)?,
            depth: self.depths.iter().position(|&d| d == crack.depth_percent)?,
        })
    }

    /// Row-major enumeration (location outer, depth inner).
    pub fn iter(&self) -> impl Iterator<Item = Theta> + '_ {
        (0..self.lines.len()).flat_map(move |location| {
            (0..self.depths.len()).map(move |depth| Theta { location, depth })
        })
    }

    pub fn index(&self, t: Theta) -> usize {
        t.location * self.depths.len() + t.depth
    }

    pub fn theta(&self, index: usize) -> Theta {
        Theta {
            location: index / self.depths.len(),
            depth: index % self.depths.len(),
        }
    }

    /// Extent of each grid coordinate minus one.
    pub fn spans(&self) -> [usize; 2] {
        [self.lines.len() - 1, self.depths.len() - 1]
    }
}
