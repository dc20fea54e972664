//! Nested multi-level codebooks.
//!
//! Level `k` (0-based, widest first) splits the search sector into
//! `level_sizes[k]` equal sine-width intervals. A codeword's children are the
//! next-level codewords whose intervals lie inside its own.
//!
//! The JSON form is the serde encoding of [`HierarchicalCodebook`]: the
//! array, the sector `{lo, hi}`, the synthesis tag, `levels` as lists of
//! beamformers (`weights` as `[re, im]` pairs, `coverage`, `level`,
//! `index`) and `children` as index lists per level.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{
    ideal_single, synthesize_deactivation, AngleInterval, Beamformer, UniformLinearArray,
};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Synthesis {
    /// Flat-top beams: constant gain inside the coverage, zero outside.
    Ideal,
    /// Realizable deactivation beams; gains come from the weights.
    Deactivation,
}

impl std::str::FromStr for Synthesis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Self::Ideal),
            "deactivation" => Ok(Self::Deactivation),
            other => Err(invalid(format!("unknown synthesis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalCodebook {
    array: UniformLinearArray,
    sector: AngleInterval,
    synthesis: Synthesis,
    levels: Vec<Vec<Beamformer>>,
    children: Vec<Vec<Vec<usize>>>,
}

impl HierarchicalCodebook {
    /// Builds the codebook. Every level size must be a multiple of the
    /// previous one. Codewords always carry deactivation weights, so the
    /// narrowest level must be realizable by the array even when
    /// `synthesis` is [`Synthesis::Ideal`].
    pub fn build(
        array: UniformLinearArray,
        sector: AngleInterval,
        level_sizes: &[usize],
        synthesis: Synthesis,
    ) -> Result<Self> {
        if level_sizes.is_empty() {
            return Err(invalid("codebook needs at least one level"));
        }
        if level_sizes[0] == 0 {
            return Err(invalid("level sizes must be positive"));
        }
        for pair in level_sizes.windows(2) {
            if pair[1] < pair[0] {
                return Err(invalid(format!(
                    "level sizes must be nondecreasing, got {} after {}",
                    pair[1], pair[0]
                )));
            }
            if pair[1] % pair[0] != 0 {
                return Err(Error::RaggedNesting {
                    parent: pair[0],
                    child: pair[1],
                });
            }
        }

        let mut levels = Vec::with_capacity(level_sizes.len());
        for (k, &size) in level_sizes.iter().enumerate() {
            let beams = sector
                .split(size)
                .into_iter()
                .enumerate()
                .map(|(l, iv)| {
                    let mut b = synthesize_deactivation(&array, iv)?;
                    b.level = k;
                    b.index = l;
                    Ok(b)
                })
                .collect::<Result<Vec<_>>>()?;
            levels.push(beams);
        }

        let mut children = Vec::with_capacity(level_sizes.len());
        for k in 0..level_sizes.len() {
            if k + 1 == level_sizes.len() {
                children.push(vec![Vec::new(); level_sizes[k]]);
                continue;
            }
            let kids = levels[k]
                .iter()
                .map(|parent| {
                    levels[k + 1]
                        .iter()
                        .filter(|c| contains(&parent.coverage, &c.coverage))
                        .map(|c| c.index)
                        .collect()
                })
                .collect();
            children.push(kids);
        }
        Ok(Self {
            array,
            sector,
            synthesis,
            levels,
            children,
        })
    }

    pub fn array(&self) -> &UniformLinearArray {
        &self.array
    }

    pub fn sector(&self) -> AngleInterval {
        self.sector
    }

    pub fn synthesis(&self) -> Synthesis {
        self.synthesis
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_size(&self, level: usize) -> usize {
        self.levels[level].len()
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    pub fn top_size(&self) -> usize {
        self.levels.last().map_or(0, Vec::len)
    }

    pub fn level(&self, level: usize) -> &[Beamformer] {
        &self.levels[level]
    }

    pub fn beam(&self, level: usize, index: usize) -> &Beamformer {
        &self.levels[level][index]
    }

    pub fn children(&self, level: usize, index: usize) -> &[usize] {
        &self.children[level][index]
    }

    /// Index of the level-`level` codeword whose interval holds `sine`, if
    /// any. The sector's upper end belongs to the last codeword.
    pub fn locate(&self, level: usize, sine: f64) -> Option<usize> {
        let beams = &self.levels[level];
        if sine == self.sector.hi() {
            return Some(beams.len() - 1);
        }
        if !self.sector.contains(sine) {
            return None;
        }
        let guess = ((sine - self.sector.lo()) / self.sector.width() * beams.len() as f64) as usize;
        let guess = guess.min(beams.len() - 1);
        // Rounding in the guess can be one off near interval edges.
        [guess, guess.saturating_sub(1), (guess + 1).min(beams.len() - 1)]
            .into_iter()
            .find(|&l| beams[l].coverage.contains(sine))
    }

    /// Amplitude response `v(s) · w†` of a codeword. Ideal codewords return
    /// the square root of their flat gain inside the coverage and zero
    /// outside.
    pub fn response(&self, level: usize, index: usize, sine: f64) -> Complex64 {
        match self.synthesis {
            Synthesis::Ideal => {
                if self.locate(level, sine) == Some(index) {
                    Complex64::new(self.ideal_level_gain(level).sqrt(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Synthesis::Deactivation => self
                .array
                .response_sine(&self.levels[level][index].weights, sine),
        }
    }

    /// Power gain of a codeword toward `sine`.
    pub fn gain(&self, level: usize, index: usize, sine: f64) -> f64 {
        self.response(level, index, sine).norm_sqr()
    }

    /// Flat gain of an ideal level-`level` codeword.
    pub fn ideal_level_gain(&self, level: usize) -> f64 {
        ideal_single(
            self.level_size(level),
            self.top_size(),
            self.array.num_elements(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn contains(outer: &AngleInterval, inner: &AngleInterval) -> bool {
    let tol = 1e-12 * outer.width().max(1.0);
    inner.lo() >= outer.lo() - tol && inner.hi() <= outer.hi() + tol
}
