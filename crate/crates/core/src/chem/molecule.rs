use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use super::element::Element;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Aromatic,
    Double,
    Triple,
}

impl BondOrder {
    /// Contribution to the bonded valence of each endpoint. Aromatic bonds count as 1;
    /// the aromatic adjustment is applied per atom when hydrogens are assigned.
    pub fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Aromatic => 1.5,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Aromatic => ':',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub charge: i32,
    /// Hydrogens written inside a bracket atom.
    pub explicit_h: u32,
    /// Hydrogens implied by the valence table (always 0 for bracket atoms).
    pub implicit_h: u32,
    pub aromatic: bool,
    pub isotope: Option<u32>,
    /// Whether the atom was written in bracket form.
    pub bracket: bool,
}

impl Atom {
    pub fn total_h(&self) -> u32 {
        self.explicit_h + self.implicit_h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }
}

/// A molecular graph parsed from SMILES. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub(crate) atoms: Vec<Atom>,
    pub(crate) bonds: Vec<Bond>,
    pub(crate) source_text: String,
}

impl Molecule {
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Neighbor lists as (neighbor atom, bond index), sorted by neighbor.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (bi, b) in self.bonds.iter().enumerate() {
            adj[b.begin].push((b.end, bi));
            adj[b.end].push((b.begin, bi));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn atom_count_vector(&self) -> ElementCounts {
        let mut counts = ElementCounts::default();
        let mut hydrogens = 0u32;
        for atom in &self.atoms {
            counts.add_count(atom.element.symbol(), 1);
            hydrogens += atom.total_h();
        }
        if hydrogens > 0 {
            counts.add_count("H", hydrogens);
        }
        counts
    }

    pub fn formal_charge_sum(&self) -> i64 {
        self.atoms.iter().map(|a| a.charge as i64).sum()
    }

    /// Returns a copy with atoms relabelled so that old atom `i` becomes `perm[i]`.
    /// The graph itself is unchanged.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = self.atoms.clone();
        for (old, atom) in self.atoms.iter().enumerate() {
            atoms[perm[old]] = atom.clone();
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                begin: perm[b.begin],
                end: perm[b.end],
                order: b.order,
            })
            .collect();
        Molecule {
            atoms,
            bonds,
            source_text: self.source_text.clone(),
        }
    }
}

/// Per-element atom tallies, hydrogens included under `H`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ElementCounts(BTreeMap<String, u32>);

impl ElementCounts {
    pub fn get(&self, symbol: &str) -> u32 {
        self.0.get(symbol).copied().unwrap_or(0)
    }

    pub fn add_count(&mut self, symbol: &str, n: u32) {
        if n > 0 {
            *self.0.entry(symbol.to_string()).or_insert(0) += n;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Element-wise signed difference `self - other`, zero entries dropped.
    pub fn signed_difference(&self, other: &ElementCounts) -> BTreeMap<String, i64> {
        let mut out = BTreeMap::new();
        for (k, v) in &self.0 {
            out.insert(k.clone(), *v as i64);
        }
        for (k, v) in &other.0 {
            *out.entry(k.clone()).or_insert(0) -= *v as i64;
        }
        out.retain(|_, v| *v != 0);
        out
    }
}

impl<const N: usize> From<[(&str, u32); N]> for ElementCounts {
    fn from(items: [(&str, u32); N]) -> Self {
        let mut c = ElementCounts::default();
        for (k, v) in items {
            c.add_count(k, v);
        }
        c
    }
}

impl AddAssign<&ElementCounts> for ElementCounts {
    fn add_assign(&mut self, rhs: &ElementCounts) {
        for (k, v) in &rhs.0 {
            self.add_count(k, *v);
        }
    }
}

impl Add for &ElementCounts {
    type Output = ElementCounts;

    fn add(self, rhs: &ElementCounts) -> ElementCounts {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl std::fmt::Display for ElementCounts {
    /// Hill order: C, H, then the rest alphabetically.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut keys: Vec<&String> = self.0.keys().collect();
        let has_c = self.0.contains_key("C");
        keys.sort_by_key(|k| match (has_c, k.as_str()) {
            (true, "C") => (0, String::new()),
            (true, "H") => (1, String::new()),
            _ => (2, (*k).clone()),
        });
        for k in keys {
            let n = self.0[k];
            if n == 1 {
                write!(f, "{k}")?;
            } else {
                write!(f, "{k}{n}")?;
            }
        }
        Ok(())
    }
}
