//! SMILES reader and writer for the subset used by diagram payloads.
//!
//! Supported: organic-subset atoms, bracket atoms with isotope, hydrogen count and
//! charge, bond symbols `- = # :`, lowercase aromatic atoms, ring closures (`1`, `%12`),
//! branches and dot-disconnected components. Stereo marks (`@`, `/`, `\`) are accepted
//! and dropped; `/` and `\` read as single bonds.

use std::collections::BTreeMap;

use super::element::Element;
use super::molecule::{Atom, Bond, BondOrder, Molecule};
use super::ChemError;

pub const MAX_SMILES_LEN: usize = 4096;

pub fn parse_smiles(text: &str) -> Result<Molecule, ChemError> {
    if text.is_empty() {
        return Err(syntax(0, "empty SMILES"));
    }
    if text.len() > MAX_SMILES_LEN {
        return Err(syntax(MAX_SMILES_LEN, "SMILES longer than 4096 characters"));
    }
    if let Some(pos) = text.bytes().position(|b| !b.is_ascii()) {
        return Err(syntax(pos, "non-ASCII character"));
    }
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        open_rings: BTreeMap::new(),
        branches: Vec::new(),
        prev: None,
        pending: None,
        after_open_paren: false,
    };
    p.run()?;
    let mut mol = Molecule {
        atoms: p.atoms,
        bonds: p.bonds,
        source_text: text.to_string(),
    };
    assign_hydrogens(&mut mol)?;
    Ok(mol)
}

fn syntax(position: usize, reason: impl Into<String>) -> ChemError {
    ChemError::Syntax {
        position,
        reason: reason.into(),
    }
}

struct OpenRing {
    atom: usize,
    bond: Option<BondOrder>,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    open_rings: BTreeMap<u32, OpenRing>,
    branches: Vec<usize>,
    prev: Option<usize>,
    pending: Option<(BondOrder, usize)>,
    after_open_paren: bool,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.src.get(self.pos + offset).copied()
    }

    fn run(&mut self) -> Result<(), ChemError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if self.prev.is_none() {
                        return Err(syntax(start, "branch opened without a preceding atom"));
                    }
                    if self.pending.is_some() {
                        return Err(syntax(start, "bond symbol before '('"));
                    }
                    self.branches.push(self.prev.unwrap());
                    self.pos += 1;
                    self.after_open_paren = true;
                    continue;
                }
                b')' => {
                    if self.after_open_paren {
                        return Err(syntax(start, "empty branch"));
                    }
                    if self.pending.is_some() {
                        return Err(syntax(start, "dangling bond before ')'"));
                    }
                    let Some(anchor) = self.branches.pop() else {
                        return Err(syntax(start, "unbalanced ')'"));
                    };
                    self.prev = Some(anchor);
                    self.pos += 1;
                }
                b'.' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(syntax(start, "misplaced '.'"));
                    }
                    if !self.branches.is_empty() {
                        return Err(syntax(start, "'.' inside a branch"));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.prev.is_none() {
                        return Err(syntax(start, "bond symbol without a preceding atom"));
                    }
                    if self.pending.is_some() {
                        return Err(syntax(start, "two consecutive bond symbols"));
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    self.pending = Some((order, start));
                    self.pos += 1;
                }
                b'$' => return Err(syntax(start, "quadruple bonds are not supported")),
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.push_atom(atom, start)?;
                }
                b'*' => return Err(syntax(start, "wildcard atoms are not supported")),
                b'@' => return Err(syntax(start, "chirality mark outside a bracket atom")),
                c if c.is_ascii_whitespace() => return Err(syntax(start, "whitespace in SMILES")),
                _ => {
                    let atom = self.organic_atom()?;
                    self.push_atom(atom, start)?;
                }
            }
            self.after_open_paren = false;
        }
        let end = self.src.len();
        if self.src.last() == Some(&b'.') {
            return Err(syntax(end - 1, "trailing '.'"));
        }
        if let Some((_, at)) = self.pending {
            return Err(syntax(at, "dangling bond at end of input"));
        }
        if !self.branches.is_empty() {
            return Err(syntax(end, "unclosed branch"));
        }
        if let Some((digit, _)) = self.open_rings.iter().next() {
            return Err(syntax(end, format!("unclosed ring bond {digit}")));
        }
        if self.atoms.is_empty() {
            return Err(syntax(0, "no atoms"));
        }
        Ok(())
    }

    fn push_atom(&mut self, atom: Atom, at: usize) -> Result<(), ChemError> {
        let idx = self.atoms.len();
        let aromatic = atom.aromatic;
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = match self.pending.take() {
                Some((o, _)) => o,
                None => self.default_order(prev, idx),
            };
            if order == BondOrder::Aromatic && !(aromatic && self.atoms[prev].aromatic) {
                return Err(syntax(at, "aromatic bond between non-aromatic atoms"));
            }
            self.bonds.push(Bond {
                begin: prev,
                end: idx,
                order,
            });
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn ring_closure(&mut self) -> Result<(), ChemError> {
        let start = self.pos;
        let Some(atom) = self.prev else {
            return Err(syntax(start, "ring bond without a preceding atom"));
        };
        let number = if self.peek() == Some(b'%') {
            match (self.peek_at(1), self.peek_at(2)) {
                (Some(a), Some(b)) if a.is_ascii_digit() && b.is_ascii_digit() => {
                    self.pos += 3;
                    ((a - b'0') * 10 + (b - b'0')) as u32
                }
                _ => return Err(syntax(start, "'%' must be followed by two digits")),
            }
        } else {
            let d = self.peek().unwrap() - b'0';
            self.pos += 1;
            d as u32
        };
        let explicit = self.pending.take().map(|(o, _)| o);
        match self.open_rings.remove(&number) {
            None => {
                self.open_rings.insert(
                    number,
                    OpenRing {
                        atom,
                        bond: explicit,
                    },
                );
            }
            Some(open) => {
                if open.atom == atom {
                    return Err(syntax(
                        start,
                        format!("ring bond {number} closes on its own atom"),
                    ));
                }
                let order = match (open.bond, explicit) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(syntax(
                            start,
                            format!("conflicting bond orders on ring bond {number}"),
                        ))
                    }
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => self.default_order(open.atom, atom),
                };
                if order == BondOrder::Aromatic
                    && !(self.atoms[open.atom].aromatic && self.atoms[atom].aromatic)
                {
                    return Err(syntax(
                        start,
                        "aromatic ring bond between non-aromatic atoms",
                    ));
                }
                let duplicate = self.bonds.iter().any(|b| {
                    (b.begin == open.atom && b.end == atom)
                        || (b.begin == atom && b.end == open.atom)
                });
                if duplicate {
                    return Err(syntax(
                        start,
                        format!("ring bond {number} duplicates an existing bond"),
                    ));
                }
                self.bonds.push(Bond {
                    begin: open.atom,
                    end: atom,
                    order,
                });
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, ChemError> {
        let start = self.pos;
        let c = self.peek().unwrap();
        let (element, aromatic, len) = match c {
            b'B' if self.peek_at(1) == Some(b'r') => (Element::BR, false, 2),
            b'C' if self.peek_at(1) == Some(b'l') => (Element::CL, false, 2),
            b'B' => (Element::B, false, 1),
            b'C' => (Element::C, false, 1),
            b'N' => (Element::N, false, 1),
            b'O' => (Element::O, false, 1),
            b'P' => (Element::P, false, 1),
            b'S' => (Element::S, false, 1),
            b'F' => (Element::F, false, 1),
            b'I' => (Element::I, false, 1),
            b'b' => (Element::B, true, 1),
            b'c' => (Element::C, true, 1),
            b'n' => (Element::N, true, 1),
            b'o' => (Element::O, true, 1),
            b'p' => (Element::P, true, 1),
            b's' => (Element::S, true, 1),
            _ => {
                return Err(syntax(
                    start,
                    format!("unknown element or token '{}'", c as char),
                ))
            }
        };
        self.pos += len;
        Ok(Atom {
            element,
            charge: 0,
            explicit_h: 0,
            implicit_h: 0,
            aromatic,
            isotope: None,
            bracket: false,
        })
    }

    fn digits(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
    }

    fn bracket_atom(&mut self) -> Result<Atom, ChemError> {
        let open = self.pos;
        self.pos += 1;
        let isotope = self.digits();

        let sym_start = self.pos;
        let (element, aromatic) = match self.peek() {
            Some(c) if c.is_ascii_uppercase() => {
                let two = self
                    .peek_at(1)
                    .filter(|n| n.is_ascii_lowercase())
                    .and_then(|n| {
                        let s = [c, n];
                        Element::from_symbol(std::str::from_utf8(&s).ok()?)
                    });
                match two {
                    Some(e) => {
                        self.pos += 2;
                        (e, false)
                    }
                    None => {
                        let s = [c];
                        let e = Element::from_symbol(std::str::from_utf8(&s).unwrap()).ok_or_else(
                            || syntax(sym_start, format!("unknown element '{}'", c as char)),
                        )?;
                        self.pos += 1;
                        (e, false)
                    }
                }
            }
            Some(c) if c.is_ascii_lowercase() => {
                let two = match (c, self.peek_at(1)) {
                    (b's', Some(b'e')) => Some(Element::from_symbol("Se").unwrap()),
                    (b'a', Some(b's')) => Some(Element::from_symbol("As").unwrap()),
                    (b't', Some(b'e')) => Some(Element::from_symbol("Te").unwrap()),
                    _ => None,
                };
                match two {
                    Some(e) => {
                        self.pos += 2;
                        (e, true)
                    }
                    None => {
                        let e = match c {
                            b'b' => Element::B,
                            b'c' => Element::C,
                            b'n' => Element::N,
                            b'o' => Element::O,
                            b'p' => Element::P,
                            b's' => Element::S,
                            _ => {
                                return Err(syntax(
                                    sym_start,
                                    format!("unknown aromatic element '{}'", c as char),
                                ))
                            }
                        };
                        self.pos += 1;
                        (e, true)
                    }
                }
            }
            _ => return Err(syntax(sym_start, "missing element symbol in bracket atom")),
        };

        // Chirality: '@', '@@', or '@TH1'-style classes. Discarded.
        while self.peek() == Some(b'@') {
            self.pos += 1;
        }
        if let (Some(a), Some(b)) = (self.peek(), self.peek_at(1)) {
            let class = [a, b];
            if matches!(&class, b"TH" | b"AL" | b"SP" | b"TB" | b"OH")
                && self.peek_at(2).is_some_and(|d| d.is_ascii_digit())
                && self.src[sym_start..self.pos].contains(&b'@')
            {
                self.pos += 2;
                self.digits();
            }
        }

        let mut explicit_h = 0;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            explicit_h = self.digits().unwrap_or(1);
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.digits() {
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.digits().is_none() {
                return Err(syntax(self.pos, "atom class requires digits"));
            }
        }

        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(c) => {
                return Err(syntax(
                    self.pos,
                    format!("unexpected '{}' in bracket atom", c as char),
                ))
            }
            None => return Err(syntax(open, "unclosed bracket atom")),
        }

        Ok(Atom {
            element,
            charge,
            explicit_h,
            implicit_h: 0,
            aromatic,
            isotope,
            bracket: true,
        })
    }
}

/// Fills `implicit_h` on organic-subset atoms and rejects over-bonded atoms.
///
/// Non-aromatic atoms take the lowest table valence that is at least their bonded
/// valence. Aromatic atoms count each aromatic bond as 1, add 1 for the aromatic
/// system, and clamp the hydrogen count at zero.
fn assign_hydrogens(mol: &mut Molecule) -> Result<(), ChemError> {
    let mut bonded = vec![0u32; mol.atoms.len()];
    for b in &mol.bonds {
        bonded[b.begin] += b.order.valence();
        bonded[b.end] += b.order.valence();
    }
    for (i, atom) in mol.atoms.iter_mut().enumerate() {
        let used = bonded[i];
        if atom.bracket {
            if atom.charge == 0 {
                if let Some(max) = atom.element.max_valence() {
                    if used + atom.explicit_h > max {
                        return Err(ChemError::Valence {
                            atom: i,
                            element: atom.element.symbol().to_string(),
                            bonded: used + atom.explicit_h,
                            max,
                        });
                    }
                }
            }
            continue;
        }
        let valences = atom.element.default_valences();
        let max = *valences.last().expect("organic subset atoms have valences");
        if used > max {
            return Err(ChemError::Valence {
                atom: i,
                element: atom.element.symbol().to_string(),
                bonded: used,
                max,
            });
        }
        let target = valences.iter().copied().find(|v| *v >= used).unwrap_or(max);
        atom.implicit_h = if atom.aromatic {
            target.saturating_sub(used + 1)
        } else {
            target - used
        };
    }
    Ok(())
}

/// Writes a (non-canonical) SMILES string that re-parses to the same graph.
pub fn write_smiles(mol: &Molecule) -> String {
    let n = mol.atoms.len();
    let adj = mol.adjacency();
    let mut order = vec![usize::MAX; n];
    let mut parent = vec![None::<usize>; n];
    let mut tree_bond = vec![false; mol.bonds.len()];
    let mut roots = Vec::new();
    let mut counter = 0;

    for start in 0..n {
        if order[start] != usize::MAX {
            continue;
        }
        roots.push(start);
        let mut stack = vec![start];
        while let Some(a) = stack.pop() {
            if order[a] != usize::MAX {
                continue;
            }
            order[a] = counter;
            counter += 1;
            if let Some(bi) = parent[a] {
                tree_bond[bi] = true;
            }
            for &(nb, bi) in adj[a].iter().rev() {
                if order[nb] == usize::MAX {
                    parent[nb] = Some(bi);
                    stack.push(nb);
                }
            }
        }
    }

    let mut out = String::new();
    let mut ring_ids: BTreeMap<usize, u32> = BTreeMap::new();
    let mut free: Vec<u32> = Vec::new();
    let mut next_id = 1u32;
    let mut emitted = vec![false; n];
    for (ci, &root) in roots.iter().enumerate() {
        if ci > 0 {
            out.push('.');
        }
        emit(
            mol,
            root,
            &adj,
            &order,
            &tree_bond,
            &mut emitted,
            &mut ring_ids,
            &mut free,
            &mut next_id,
            &mut out,
        );
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn emit(
    mol: &Molecule,
    atom: usize,
    adj: &[Vec<(usize, usize)>],
    order: &[usize],
    tree_bond: &[bool],
    emitted: &mut [bool],
    ring_ids: &mut BTreeMap<usize, u32>,
    free: &mut Vec<u32>,
    next_id: &mut u32,
    out: &mut String,
) {
    emitted[atom] = true;
    write_atom(&mol.atoms[atom], out);

    for &(nb, bi) in &adj[atom] {
        if tree_bond[bi] {
            continue;
        }
        let bond = mol.bonds[bi];
        let sym = bond_symbol(mol, &bond);
        if let Some(id) = ring_ids.remove(&bi) {
            out.push_str(sym);
            push_ring_id(id, out);
            free.push(id);
            free.sort_unstable_by(|a, b| b.cmp(a));
        } else if order[nb] > order[atom] {
            let id = free.pop().unwrap_or_else(|| {
                let id = *next_id;
                *next_id += 1;
                id
            });
            ring_ids.insert(bi, id);
            out.push_str(sym);
            push_ring_id(id, out);
        }
    }

    let children: Vec<(usize, usize)> = adj[atom]
        .iter()
        .copied()
        .filter(|&(nb, bi)| tree_bond[bi] && !emitted[nb] && order[nb] > order[atom])
        .collect();
    let mut children = children;
    children.sort_by_key(|&(nb, _)| order[nb]);
    let last = children.len().saturating_sub(1);
    for (k, (nb, bi)) in children.into_iter().enumerate() {
        let branch = k < last;
        if branch {
            out.push('(');
        }
        out.push_str(bond_symbol(mol, &mol.bonds[bi]));
        emit(
            mol, nb, adj, order, tree_bond, emitted, ring_ids, free, next_id, out,
        );
        if branch {
            out.push(')');
        }
    }
}

fn push_ring_id(id: u32, out: &mut String) {
    if id < 10 {
        out.push(char::from(b'0' + id as u8));
    } else {
        out.push_str(&format!("%{id:02}"));
    }
}

fn bond_symbol(mol: &Molecule, bond: &Bond) -> &'static str {
    let both_aromatic = mol.atoms[bond.begin].aromatic && mol.atoms[bond.end].aromatic;
    match (bond.order, both_aromatic) {
        (BondOrder::Single, false) | (BondOrder::Aromatic, true) => "",
        (BondOrder::Single, true) => "-",
        (BondOrder::Aromatic, false) => ":",
        (BondOrder::Double, _) => "=",
        (BondOrder::Triple, _) => "#",
    }
}

fn write_atom(atom: &Atom, out: &mut String) {
    let symbol = if atom.aromatic {
        atom.element.symbol().to_ascii_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    if !atom.bracket {
        out.push_str(&symbol);
        return;
    }
    out.push('[');
    if let Some(iso) = atom.isotope {
        out.push_str(&iso.to_string());
    }
    out.push_str(&symbol);
    match atom.explicit_h {
        0 => {}
        1 => out.push('H'),
        h => out.push_str(&format!("H{h}")),
    }
    match atom.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => out.push_str(&format!("+{c}")),
        c => out.push_str(&format!("-{}", -c)),
    }
    out.push(']');
}
