//! Chemistry primitives: SMILES parsing, atom counts, charges, fingerprints and
//! conservation residuals.

mod conservation;
mod element;
mod fingerprint;
mod molecule;
mod smiles;

pub use conservation::{conservation_residual, ConservationResidual};
pub use element::Element;
pub use fingerprint::{
    fingerprint, tanimoto, Fingerprint, FingerprintConfig, DEFAULT_ALGORITHM_TAG,
};
pub use molecule::{Atom, Bond, BondOrder, ElementCounts, Molecule};
pub use smiles::{parse_smiles, write_smiles, MAX_SMILES_LEN};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ChemError {
    #[error("SMILES syntax error at {position}: {reason}")]
    Syntax { position: usize, reason: String },
    #[error("atom {atom} ({element}) has bonded valence {bonded}, above maximum {max}")]
    Valence {
        atom: usize,
        element: String,
        bonded: u32,
        max: u32,
    },
    #[error("fingerprint widths differ: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("fingerprint algorithms differ: {left} vs {right}")]
    AlgorithmMismatch { left: String, right: String },
    #[error("invalid fingerprint config: {0}")]
    InvalidConfig(String),
}

pub fn atom_count_vector(mol: &Molecule) -> ElementCounts {
    mol.atom_count_vector()
}

pub fn formal_charge_sum(mol: &Molecule) -> i64 {
    mol.formal_charge_sum()
}
