use std::collections::BTreeMap;
use std::ops::Neg;

use super::molecule::{ElementCounts, Molecule};

/// Signed element and charge imbalance, reactants minus products.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConservationResidual {
    /// Non-zero entries only.
    pub elements: BTreeMap<String, i64>,
    pub charge: i64,
}

impl ConservationResidual {
    pub fn is_balanced(&self) -> bool {
        self.elements.is_empty() && self.charge == 0
    }

    pub fn element(&self, symbol: &str) -> i64 {
        self.elements.get(symbol).copied().unwrap_or(0)
    }
}

impl Neg for ConservationResidual {
    type Output = ConservationResidual;

    fn neg(self) -> ConservationResidual {
        ConservationResidual {
            elements: self.elements.into_iter().map(|(k, v)| (k, -v)).collect(),
            charge: -self.charge,
        }
    }
}

impl std::fmt::Display for ConservationResidual {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_balanced() {
            return f.write_str("balanced");
        }
        let parts: Vec<String> = self
            .elements
            .iter()
            .map(|(k, v)| format!("{k}:{v:+}"))
            .collect();
        write!(f, "{{{}}} charge {:+}", parts.join(", "), self.charge)
    }
}

pub fn conservation_residual(
    reactants: &[Molecule],
    products: &[Molecule],
) -> ConservationResidual {
    let sum = |mols: &[Molecule]| {
        let mut c = ElementCounts::default();
        let mut q = 0i64;
        for m in mols {
            c += &m.atom_count_vector();
            q += m.formal_charge_sum();
        }
        (c, q)
    };
    let (rc, rq) = sum(reactants);
    let (pc, pq) = sum(products);
    ConservationResidual {
        elements: rc.signed_difference(&pc),
        charge: rq - pq,
    }
}
