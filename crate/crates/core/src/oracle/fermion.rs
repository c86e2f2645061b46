//! Slater-determinant basis at fixed `(n_up, n_down)` and second-quantized
//! operators on it.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::model::ElectronBosonSystem;

/// Determinants over `n_orbitals` spatial orbitals. Spin orbitals are ordered
/// with all up-spin orbitals before all down-spin orbitals; a determinant is
/// the bit string `up | (down << n_orbitals)`.
#[derive(Debug, Clone)]
pub struct DeterminantBasis {
    n_orbitals: usize,
    n_up: usize,
    n_down: usize,
    strings: Vec<u64>,
    index: HashMap<u64, usize>,
}

fn combinations(n: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    for bits in 0u64..(1u64 << n) {
        if bits.count_ones() as usize == k {
            out.push(bits);
        }
    }
    out
}

impl DeterminantBasis {
    pub fn new(n_orbitals: usize, n_up: usize, n_down: usize) -> Self {
        assert!(2 * n_orbitals <= 62, "too many orbitals for a bit-string basis");
        let ups = combinations(n_orbitals, n_up);
        let downs = combinations(n_orbitals, n_down);
        let mut strings = Vec::with_capacity(ups.len() * downs.len());
        for &u in &ups {
            for &d in &downs {
                strings.push(u | (d << n_orbitals));
            }
        }
        let index = strings.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Self {
            n_orbitals,
            n_up,
            n_down,
            strings,
            index,
        }
    }

    pub fn for_system(system: &ElectronBosonSystem) -> Self {
        let (up, down) = system.spin.occupations(system.n_electrons);
        Self::new(system.n_orbitals, up, down)
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn n_down(&self) -> usize {
        self.n_down
    }

    pub fn string(&self, i: usize) -> u64 {
        self.strings[i]
    }

    pub fn position(&self, string: u64) -> Option<usize> {
        self.index.get(&string).copied()
    }

    /// Occupation (0, 1 or 2) of each spatial orbital in determinant `i`.
    pub fn occupations(&self, i: usize) -> Vec<u32> {
        let s = self.strings[i];
        let n = self.n_orbitals;
        (0..n)
            .map(|p| ((s >> p) & 1) as u32 + ((s >> (p + n)) & 1) as u32)
            .collect()
    }

    /// Up and down occupied orbital lists of determinant `i`, ascending.
    pub fn occupied(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
        let s = self.strings[i];
        let n = self.n_orbitals;
        let up = (0..n).filter(|&p| (s >> p) & 1 == 1).collect();
        let down = (0..n).filter(|&p| (s >> (p + n)) & 1 == 1).collect();
        (up, down)
    }

    /// Matrix of the spin-summed one-body operator `sum_pq m_pq E_pq`.
    pub fn one_body(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n_orbitals;
        let dim = self.len();
        let mut out = DMatrix::zeros(dim, dim);
        for (j, &s) in self.strings.iter().enumerate() {
            for p in 0..n {
                for q in 0..n {
                    let v = m[(p, q)];
                    if v == 0.0 {
                        continue;
                    }
                    for spin in 0..2 {
                        let off = spin * n;
                        if let Some((t, sign)) = excite(s, p + off, q + off) {
                            let i = self.index[&t];
                            out[(i, j)] += sign * v;
                        }
                    }
                }
            }
        }
        out
    }

    /// Electronic Hamiltonian `sum h E + 1/2 sum (pq|rs)(E E - d E) + E_core`.
    pub fn electronic_hamiltonian(&self, system: &ElectronBosonSystem) -> DMatrix<f64> {
        let n = self.n_orbitals;
        let dim = self.len();
        let mut out = self.one_body(&system.h);
        for i in 0..dim {
            out[(i, i)] += system.core_energy;
        }
        for (j, &s) in self.strings.iter().enumerate() {
            for p in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        for t in 0..n {
                            let v = system.eri.get(p, q, r, t);
                            if v == 0.0 {
                                continue;
                            }
                            for sigma in 0..2 {
                                for tau in 0..2 {
                                    let (a, b) = (sigma * n, tau * n);
                                    // c+_{p a} c+_{r b} c_{t b} c_{q a}
                                    let Some((s1, g1)) = annihilate(s, q + a) else { continue };
                                    let Some((s2, g2)) = annihilate(s1, t + b) else { continue };
                                    let Some((s3, g3)) = create(s2, r + b) else { continue };
                                    let Some((s4, g4)) = create(s3, p + a) else { continue };
                                    let i = self.index[&s4];
                                    out[(i, j)] += 0.5 * v * g1 * g2 * g3 * g4;
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn parity_below(s: u64, k: usize) -> f64 {
    if (s & ((1u64 << k) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn annihilate(s: u64, k: usize) -> Option<(u64, f64)> {
    if (s >> k) & 1 == 0 {
        return None;
    }
    Some((s & !(1u64 << k), parity_below(s, k)))
}

fn create(s: u64, k: usize) -> Option<(u64, f64)> {
    if (s >> k) & 1 == 1 {
        return None;
    }
    Some((s | (1u64 << k), parity_below(s, k)))
}

/// `c+_p c_q |s>`.
fn excite(s: u64, p: usize, q: usize) -> Option<(u64, f64)> {
    let (s1, g1) = annihilate(s, q)?;
    let (s2, g2) = create(s1, p)?;
    Some((s2, g1 * g2))
}
