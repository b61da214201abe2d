use rand::Rng as _;

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::rng::{derive_seed, rng_from_seed};
use crate::synth::{gen_atom_map, gen_sequence_sample, AtomMapSpec, SequenceSample, SpecSampler};

/// Deterministic, index-addressed supply of training samples.
pub trait SampleSource: Sync {
    /// `[height, width]` of every sample.
    fn input_size(&self) -> [usize; 2];

    fn sample(&self, index: u64) -> Result<SequenceSample>;
}

fn draw_step(seed: u64, total_steps: u32) -> u32 {
    rng_from_seed(seed).random_range(1..=total_steps)
}

/// Fresh synthetic atom map per sample, with the lattice randomly placed
/// and oriented, degraded by a randomly drawn final state at a uniformly
/// drawn step.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSource {
    pub atoms: AtomMapSpec,
    pub sampler: SpecSampler,
    pub size: [usize; 2],
    pub seed: u64,
}

impl SampleSource for SyntheticSource {
    fn input_size(&self) -> [usize; 2] {
        self.size
    }

    fn sample(&self, index: u64) -> Result<SequenceSample> {
        let s = derive_seed(self.seed, index);
        let mut rng = rng_from_seed(derive_seed(s, 0));
        let angle = rng.random::<f64>() * std::f64::consts::FRAC_PI_3;
        let (sin, cos) = angle.sin_cos();
        let rotate = |v: [f64; 2]| [cos * v[0] - sin * v[1], sin * v[0] + cos * v[1]];
        let cell = self.atoms.lattice_a[0].hypot(self.atoms.lattice_a[1]);
        let spec = AtomMapSpec {
            lattice_a: rotate(self.atoms.lattice_a),
            lattice_b: rotate(self.atoms.lattice_b),
            origin: [rng.random::<f64>() * cell, rng.random::<f64>() * cell],
            seed: derive_seed(s, 1),
            ..self.atoms.clone()
        };
        let [h, w] = self.size;
        let x0 = gen_atom_map(&spec, h, w)?;
        let deg = self.sampler.sample(h, w, derive_seed(s, 2))?;
        let t = draw_step(derive_seed(s, 3), deg.total_steps);
        gen_sequence_sample(&x0, &deg, t, derive_seed(s, 4))
    }
}

/// Random crops of user-provided maps.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSource {
    maps: Vec<ImageGrid>,
    pub sampler: SpecSampler,
    pub size: [usize; 2],
    pub seed: u64,
}

impl MapSource {
    pub fn new(maps: Vec<ImageGrid>, sampler: SpecSampler, size: [usize; 2], seed: u64) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidParameter("no atom maps given".into()));
        }
        if let Some(m) = maps.iter().find(|m| m.height() < size[0] || m.width() < size[1]) {
            return Err(Error::Dimension {
                expected: format!("maps of at least {}x{}", size[0], size[1]),
                actual: format!("{}x{}", m.height(), m.width()),
            });
        }
        Ok(Self {
            maps,
            sampler,
            size,
            seed,
        })
    }
}

impl SampleSource for MapSource {
    fn input_size(&self) -> [usize; 2] {
        self.size
    }

    fn sample(&self, index: u64) -> Result<SequenceSample> {
        let s = derive_seed(self.seed, index);
        let mut rng = rng_from_seed(derive_seed(s, 0));
        let map = &self.maps[rng.random_range(0..self.maps.len())];
        let [h, w] = self.size;
        let row = rng.random_range(0..=map.height() - h);
        let col = rng.random_range(0..=map.width() - w);
        let x0 = map.crop(row, col, h, w)?;
        let deg = self.sampler.sample(h, w, derive_seed(s, 2))?;
        let t = draw_step(derive_seed(s, 3), deg.total_steps);
        gen_sequence_sample(&x0, &deg, t, derive_seed(s, 4))
    }
}
