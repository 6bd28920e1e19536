//! Hashed linear-path fingerprints and Tanimoto similarity.
//!
//! Every simple path of 0..=`max_path_length` bonds contributes one bit. A path is
//! labelled by its alternating atom/bond sequence, read in whichever direction
//! gives the lexicographically smaller label, then hashed with 64-bit FNV-1a.

use serde::{Deserialize, Serialize};

use super::molecule::Molecule;
use super::ChemError;

pub const DEFAULT_ALGORITHM_TAG: &str = "linear-path-fnv1a";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFingerprintConfig", into = "RawFingerprintConfig")]
pub struct FingerprintConfig {
    width: usize,
    max_path_length: usize,
    algorithm_tag: String,
}

#[derive(Serialize, Deserialize)]
struct RawFingerprintConfig {
    width: usize,
    max_path_length: usize,
    #[serde(default = "default_tag")]
    algorithm_tag: String,
}

fn default_tag() -> String {
    DEFAULT_ALGORITHM_TAG.to_string()
}

impl TryFrom<RawFingerprintConfig> for FingerprintConfig {
    type Error = ChemError;

    fn try_from(raw: RawFingerprintConfig) -> Result<Self, Self::Error> {
        FingerprintConfig::new(raw.width, raw.max_path_length, raw.algorithm_tag)
    }
}

impl From<FingerprintConfig> for RawFingerprintConfig {
    fn from(c: FingerprintConfig) -> Self {
        RawFingerprintConfig {
            width: c.width,
            max_path_length: c.max_path_length,
            algorithm_tag: c.algorithm_tag,
        }
    }
}

impl Default for FingerprintConfig {
    fn default() -> Self {
        FingerprintConfig {
            width: 2048,
            max_path_length: 5,
            algorithm_tag: DEFAULT_ALGORITHM_TAG.to_string(),
        }
    }
}

impl FingerprintConfig {
    /// `width` must be a power of two >= 256 and `max_path_length` in 1..=7.
    pub fn new(
        width: usize,
        max_path_length: usize,
        algorithm_tag: impl Into<String>,
    ) -> Result<Self, ChemError> {
        if width < 256 || !width.is_power_of_two() {
            return Err(ChemError::InvalidConfig(format!(
                "fingerprint width {width} must be a power of two >= 256"
            )));
        }
        if !(1..=7).contains(&max_path_length) {
            return Err(ChemError::InvalidConfig(format!(
                "max_path_length {max_path_length} outside 1..=7"
            )));
        }
        let algorithm_tag = algorithm_tag.into();
        if algorithm_tag != DEFAULT_ALGORITHM_TAG {
            return Err(ChemError::InvalidConfig(format!(
                "unknown fingerprint algorithm '{algorithm_tag}'"
            )));
        }
        Ok(FingerprintConfig {
            width,
            max_path_length,
            algorithm_tag,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn max_path_length(&self) -> usize {
        self.max_path_length
    }

    pub fn algorithm_tag(&self) -> &str {
        &self.algorithm_tag
    }

    /// Tag stored on fingerprints: scheme plus path length.
    fn full_tag(&self) -> String {
        format!("{}/p{}", self.algorithm_tag, self.max_path_length)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
    algorithm_tag: String,
}

impl Fingerprint {
    pub fn empty(width: usize, algorithm_tag: impl Into<String>) -> Self {
        Fingerprint {
            words: vec![0; width.div_ceil(64)],
            width,
            algorithm_tag: algorithm_tag.into(),
        }
    }

    pub fn from_bits(
        width: usize,
        algorithm_tag: impl Into<String>,
        bits: impl IntoIterator<Item = usize>,
    ) -> Self {
        let mut fp = Fingerprint::empty(width, algorithm_tag);
        for b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn set(&mut self, bit: usize) {
        assert!(
            bit < self.width,
            "bit {bit} out of range for width {}",
            self.width
        );
        self.words[bit / 64] |= 1u64 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] & (1u64 << (bit % 64)) != 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn algorithm_tag(&self) -> &str {
        &self.algorithm_tag
    }

    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn on_bits(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|b| self.get(*b))
    }

    /// Folds the bit vector into `buckets` bins holding the fraction of set bits in each.
    pub fn sketch(&self, buckets: usize) -> Vec<f64> {
        let mut out = vec![0.0; buckets];
        let total = self.popcount();
        if total == 0 || buckets == 0 {
            return out;
        }
        for b in self.on_bits() {
            out[b % buckets] += 1.0;
        }
        for v in &mut out {
            *v /= total as f64;
        }
        out
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn atom_label(mol: &Molecule, i: usize) -> String {
    let a = &mol.atoms()[i];
    let mut s = if a.aromatic {
        a.element.symbol().to_ascii_lowercase()
    } else {
        a.element.symbol().to_string()
    };
    if a.charge != 0 {
        s.push_str(&format!("{:+}", a.charge));
    }
    s
}

pub fn fingerprint(mol: &Molecule, config: &FingerprintConfig) -> Fingerprint {
    let mut fp = Fingerprint::empty(config.width, config.full_tag());
    let adj = mol.adjacency();
    let labels: Vec<String> = (0..mol.atom_count()).map(|i| atom_label(mol, i)).collect();

    let mut path_atoms: Vec<usize> = Vec::with_capacity(config.max_path_length + 1);
    let mut path_bonds: Vec<char> = Vec::with_capacity(config.max_path_length);
    let mut on_path = vec![false; mol.atom_count()];

    #[allow(clippy::too_many_arguments)]
    fn walk(
        mol: &Molecule,
        adj: &[Vec<(usize, usize)>],
        labels: &[String],
        max_len: usize,
        atoms: &mut Vec<usize>,
        bonds: &mut Vec<char>,
        on_path: &mut [bool],
        fp: &mut Fingerprint,
    ) {
        let label = path_label(labels, atoms, bonds);
        let bit = (fnv1a(label.as_bytes()) % fp.width as u64) as usize;
        fp.set(bit);
        if bonds.len() == max_len {
            return;
        }
        let last = *atoms.last().unwrap();
        for &(nb, bi) in &adj[last] {
            if on_path[nb] {
                continue;
            }
            on_path[nb] = true;
            atoms.push(nb);
            bonds.push(mol.bonds()[bi].order.symbol());
            walk(mol, adj, labels, max_len, atoms, bonds, on_path, fp);
            atoms.pop();
            bonds.pop();
            on_path[nb] = false;
        }
    }

    for start in 0..mol.atom_count() {
        on_path[start] = true;
        path_atoms.push(start);
        walk(
            mol,
            &adj,
            &labels,
            config.max_path_length,
            &mut path_atoms,
            &mut path_bonds,
            &mut on_path,
            &mut fp,
        );
        path_atoms.pop();
        on_path[start] = false;
    }
    fp
}

fn path_label(labels: &[String], atoms: &[usize], bonds: &[char]) -> String {
    let render = |rev: bool| {
        let mut s = format!("{}|", bonds.len());
        let n = atoms.len();
        for k in 0..n {
            let ai = if rev { atoms[n - 1 - k] } else { atoms[k] };
            s.push_str(&labels[ai]);
            if k + 1 < n {
                let bi = if rev { n - 2 - k } else { k };
                s.push(bonds[bi]);
            }
        }
        s
    };
    let fwd = render(false);
    let rev = render(true);
    if rev < fwd {
        rev
    } else {
        fwd
    }
}

/// |a AND b| / |a OR b|; 1.0 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, ChemError> {
    if a.width != b.width {
        return Err(ChemError::WidthMismatch {
            left: a.width,
            right: b.width,
        });
    }
    if a.algorithm_tag != b.algorithm_tag {
        return Err(ChemError::AlgorithmMismatch {
            left: a.algorithm_tag.clone(),
            right: b.algorithm_tag.clone(),
        });
    }
    let (mut and, mut or) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        and += (x & y).count_ones();
        or += (x | y).count_ones();
    }
    if or == 0 {
        return Ok(1.0);
    }
    Ok(and as f64 / or as f64)
}
