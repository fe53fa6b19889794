//! Single-qubit Clifford group as Bloch-sphere rotations, decomposed into
//! ±π/2 and π pulses about x and y.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use rand::Rng;

use crate::error::{Error, Result};
use crate::signal::SimRng;

/// Physical pulses used by the decompositions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pulse {
    X90,
    Xm90,
    Y90,
    Ym90,
    X180,
    Y180,
}

impl Pulse {
    pub const ALL: [Pulse; 6] = [Pulse::X90, Pulse::Xm90, Pulse::Y90, Pulse::Ym90, Pulse::X180, Pulse::Y180];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&p| p == self).expect("listed")
    }

    /// `(amplitude as a fraction of π, drive phase)`.
    pub fn amplitude_phase(self) -> (f64, f64) {
        match self {
            Pulse::X90 => (0.5, 0.0),
            Pulse::Xm90 => (0.5, PI),
            Pulse::Y90 => (0.5, PI / 2.0),
            Pulse::Ym90 => (0.5, 3.0 * PI / 2.0),
            Pulse::X180 => (1.0, 0.0),
            Pulse::Y180 => (1.0, PI / 2.0),
        }
    }

    /// Ideal rotation with integer entries.
    pub fn matrix(self) -> Matrix3<i8> {
        match self {
            Pulse::X90 => Matrix3::new(1, 0, 0, 0, 0, -1, 0, 1, 0),
            Pulse::Xm90 => Matrix3::new(1, 0, 0, 0, 0, 1, 0, -1, 0),
            Pulse::Y90 => Matrix3::new(0, 0, 1, 0, 1, 0, -1, 0, 0),
            Pulse::Ym90 => Matrix3::new(0, 0, -1, 0, 1, 0, 1, 0, 0),
            Pulse::X180 => Matrix3::new(1, 0, 0, 0, -1, 0, 0, 0, -1),
            Pulse::Y180 => Matrix3::new(-1, 0, 0, 0, 1, 0, 0, 0, -1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliffordGroup {
    matrices: Vec<Matrix3<i8>>,
    /// Pulses in time order.
    decompositions: Vec<Vec<Pulse>>,
    /// `compose[a][b]`: apply `a`, then `b`.
    compose: Vec<Vec<usize>>,
    inverse: Vec<usize>,
}

/// Number of pulses summed over all 24 decompositions; guards the table.
const TOTAL_PULSES: usize = 44;

impl CliffordGroup {
    /// Breadth-first enumeration from the identity, so each element gets a
    /// shortest decomposition. Fails if the result is not the 24-element group.
    pub fn new() -> Result<Self> {
        let mut matrices = vec![Matrix3::<i8>::identity()];
        let mut decompositions: Vec<Vec<Pulse>> = vec![vec![]];
        let mut frontier = 0;
        while frontier < matrices.len() {
            for p in Pulse::ALL {
                let m = p.matrix() * matrices[frontier];
                if !matrices.contains(&m) {
                    let mut d = decompositions[frontier].clone();
                    d.push(p);
                    matrices.push(m);
                    decompositions.push(d);
                }
            }
            frontier += 1;
        }
        let index_of = |m: &Matrix3<i8>| matrices.iter().position(|x| x == m);
        let n = matrices.len();
        let mut compose = vec![vec![0; n]; n];
        let mut inverse = vec![0; n];
        for a in 0..n {
            for b in 0..n {
                compose[a][b] = index_of(&(matrices[b] * matrices[a]))
                    .ok_or_else(|| Error::Internal("Clifford table is not closed".into()))?;
            }
            inverse[a] = index_of(&matrices[a].transpose())
                .ok_or_else(|| Error::Internal("Clifford inverse missing".into()))?;
        }
        let group = Self { matrices, decompositions, compose, inverse };
        group.verify()?;
        Ok(group)
    }

    fn verify(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Internal(format!("Clifford table checksum failed: {msg}")));
        if self.matrices.len() != 24 {
            return fail("expected 24 elements");
        }
        let total: usize = self.decompositions.iter().map(Vec::len).sum();
        if total != TOTAL_PULSES {
            return fail("unexpected decomposition lengths");
        }
        for (m, d) in self.matrices.iter().zip(&self.decompositions) {
            let product = d.iter().fold(Matrix3::<i8>::identity(), |acc, p| p.matrix() * acc);
            if &product != m {
                return fail("decomposition does not reproduce its element");
            }
            if m.map(f64::from).determinant() != 1.0 || m.transpose() * m != Matrix3::identity() {
                return fail("element is not a proper rotation");
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrix(&self, c: usize) -> Matrix3<f64> {
        self.matrices[c].map(f64::from)
    }

    pub fn decomposition(&self, c: usize) -> &[Pulse] {
        &self.decompositions[c]
    }

    pub fn compose(&self, first: usize, then: usize) -> usize {
        self.compose[first][then]
    }

    pub fn inverse(&self, c: usize) -> usize {
        self.inverse[c]
    }

    pub fn mean_pulses(&self) -> f64 {
        TOTAL_PULSES as f64 / self.len() as f64
    }

    /// `m` uniformly random Cliffords followed by the element that returns
    /// the sequence to the identity.
    pub fn random_sequence(&self, m: usize, rng: &mut SimRng) -> Vec<usize> {
        let mut seq: Vec<usize> = (0..m).map(|_| rng.random_range(0..self.len())).collect();
        let net = seq.iter().fold(0, |acc, &c| self.compose(acc, c));
        seq.push(self.inverse(net));
        seq
    }
}
