//! Parser for a restricted SMILES dialect.
//!
//! Supported: the elements B C N O P S F Cl Br I, aromatic lowercase
//! b c n o p s, bond symbols `- = # :`, branches, ring closures 1-9 and
//! `%nn`, and bracket atoms with charge and explicit-H count. Stereo
//! markers (`/`, `\`, `@`) and bracket isotopes are accepted and ignored.
//! The parser is purely syntactic: valence is not checked.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::{AtomRecord, BondOrder, BondRecord, Element, Molecule};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmilesError {
    #[error("empty input (byte {offset})")]
    EmptyInput { offset: usize },
    #[error("unbalanced parenthesis (byte {offset})")]
    UnbalancedParenthesis { offset: usize },
    #[error("unclosed ring bond (byte {offset})")]
    UnclosedRingBond { offset: usize },
    #[error("unknown element (byte {offset})")]
    UnknownElement { offset: usize },
}

/// Explicit bond symbol, pending until the next atom or ring digit.
#[derive(Clone, Copy, Debug, PartialEq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondSym {
    fn order(self) -> BondOrder {
        match self {
            BondSym::Single => BondOrder::Single,
            BondSym::Double => BondOrder::Double,
            BondSym::Triple => BondOrder::Triple,
            BondSym::Aromatic => BondOrder::Aromatic,
        }
    }
}

struct RingEntry {
    atom: usize,
    sym: Option<BondSym>,
    offset: usize,
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<AtomRecord>,
    // (a1, a2, order); ring membership is perceived afterwards
    bonds: Vec<(usize, usize, BondOrder)>,
    prev: Option<usize>,
    branch_stack: Vec<(Option<usize>, usize)>,
    pending: Option<BondSym>,
    rings: BTreeMap<u32, RingEntry>,
}

pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        branch_stack: Vec::new(),
        pending: None,
        rings: BTreeMap::new(),
    };
    p.run()?;

    if p.atoms.is_empty() {
        return Err(SmilesError::EmptyInput { offset: 0 });
    }
    if let Some((_, off)) = p.branch_stack.first() {
        return Err(SmilesError::UnbalancedParenthesis { offset: *off });
    }
    if let Some(entry) = p.rings.values().next() {
        return Err(SmilesError::UnclosedRingBond {
            offset: entry.offset,
        });
    }

    let in_ring = perceive_rings(p.atoms.len(), &p.bonds);
    let bonds = p
        .bonds
        .iter()
        .zip(in_ring)
        .map(|(&(a1, a2, order), in_ring)| BondRecord {
            a1,
            a2,
            order,
            in_ring,
        })
        .collect();

    Ok(Molecule {
        atoms: p.atoms,
        bonds,
        source_text: text.to_string(),
    })
}

impl<'a> Parser<'a> {
    fn run(&mut self) -> Result<(), SmilesError> {
        while self.pos < self.bytes.len() {
            let off = self.pos;
            let b = self.bytes[self.pos];
            match b {
                b' ' | b'\t' | b'\r' | b'\n' => break, // trailing annotation
                b'(' => {
                    self.branch_stack.push((self.prev, off));
                    self.pos += 1;
                }
                b')' => match self.branch_stack.pop() {
                    Some((restored, _)) => {
                        self.prev = restored;
                        self.pending = None;
                        self.pos += 1;
                    }
                    None => return Err(SmilesError::UnbalancedParenthesis { offset: off }),
                },
                b'-' | b'/' | b'\\' => {
                    self.pending = Some(BondSym::Single);
                    self.pos += 1;
                }
                b'=' => {
                    self.pending = Some(BondSym::Double);
                    self.pos += 1;
                }
                b'#' => {
                    self.pending = Some(BondSym::Triple);
                    self.pos += 1;
                }
                b':' => {
                    self.pending = Some(BondSym::Aromatic);
                    self.pos += 1;
                }
                b'1'..=b'9' => {
                    self.ring_closure(u32::from(b - b'0'), off)?;
                    self.pos += 1;
                }
                b'%' => {
                    let d1 = self.bytes.get(self.pos + 1).copied();
                    let d2 = self.bytes.get(self.pos + 2).copied();
                    match (d1, d2) {
                        (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                            let id = u32::from(x - b'0') * 10 + u32::from(y - b'0');
                            self.ring_closure(id, off)?;
                            self.pos += 3;
                        }
                        _ => return Err(SmilesError::UnclosedRingBond { offset: off }),
                    }
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.push_atom(atom);
                }
                _ => {
                    let atom = self.plain_atom()?;
                    self.push_atom(atom);
                }
            }
        }
        Ok(())
    }

    /// Atom outside brackets: bare element symbol, aromatic if lowercase.
    fn plain_atom(&mut self) -> Result<AtomRecord, SmilesError> {
        let off = self.pos;
        let b = self.bytes[self.pos];
        let next = self.bytes.get(self.pos + 1).copied();
        let (element, aromatic, len) = match (b, next) {
            (b'C', Some(b'l')) => (Element::Cl, false, 2),
            (b'B', Some(b'r')) => (Element::Br, false, 2),
            (b'B', _) => (Element::B, false, 1),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'b', _) => (Element::B, true, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b'p', _) => (Element::P, true, 1),
            (b's', _) => (Element::S, true, 1),
            _ => return Err(SmilesError::UnknownElement { offset: off }),
        };
        self.pos += len;
        Ok(AtomRecord {
            element,
            aromatic,
            formal_charge: 0,
            explicit_h: 0,
        })
    }

    /// Bracket atom: `[<isotope><element><@...><H count><charge>]`.
    fn bracket_atom(&mut self) -> Result<AtomRecord, SmilesError> {
        self.pos += 1; // consume '['
        // isotope digits, ignored
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos >= self.bytes.len() {
            return Err(SmilesError::UnknownElement { offset: self.pos });
        }
        let mut atom = self.plain_atom()?;
        // stereo markers, ignored
        while self.pos < self.bytes.len() && self.bytes[self.pos] == b'@' {
            self.pos += 1;
        }
        // explicit hydrogen count
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'H' {
            self.pos += 1;
            let mut count: u32 = 1;
            if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                count = u32::from(self.bytes[self.pos] - b'0');
                self.pos += 1;
            }
            atom.explicit_h = count.min(u32::from(u8::MAX)) as u8;
        }
        // formal charge: '+', '-', repeated signs, or a sign with digits
        if self.pos < self.bytes.len() && (self.bytes[self.pos] == b'+' || self.bytes[self.pos] == b'-')
        {
            let sign: i32 = if self.bytes[self.pos] == b'+' { 1 } else { -1 };
            let sign_byte = self.bytes[self.pos];
            let mut magnitude: i32 = 1;
            self.pos += 1;
            if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                magnitude = i32::from(self.bytes[self.pos] - b'0');
                self.pos += 1;
            } else {
                while self.pos < self.bytes.len() && self.bytes[self.pos] == sign_byte {
                    magnitude += 1;
                    self.pos += 1;
                }
            }
            atom.formal_charge = sign * magnitude;
        }
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b']' {
            self.pos += 1;
            Ok(atom)
        } else {
            Err(SmilesError::UnknownElement { offset: self.pos })
        }
    }

    fn push_atom(&mut self, atom: AtomRecord) {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let pending = self.pending.take();
            let order = self.bond_order(prev, idx, pending);
            self.add_bond(prev, idx, order);
        } else {
            self.pending = None;
        }
        self.prev = Some(idx);
    }

    fn ring_closure(&mut self, id: u32, offset: usize) -> Result<(), SmilesError> {
        let current = match self.prev {
            Some(a) => a,
            None => return Err(SmilesError::UnclosedRingBond { offset }),
        };
        let pending = self.pending.take();
        match self.rings.remove(&id) {
            Some(entry) => {
                // the closure bond attaches at the closing digit
                let sym = pending.or(entry.sym);
                if entry.atom != current {
                    let order = self.bond_order(entry.atom, current, sym);
                    self.add_bond(entry.atom, current, order);
                }
            }
            None => {
                self.rings.insert(
                    id,
                    RingEntry {
                        atom: current,
                        sym: pending,
                        offset,
                    },
                );
            }
        }
        Ok(())
    }

    fn bond_order(&self, a1: usize, a2: usize, sym: Option<BondSym>) -> BondOrder {
        match sym {
            Some(s) => s.order(),
            None => {
                if self.atoms[a1].aromatic && self.atoms[a2].aromatic {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                }
            }
        }
    }

    fn add_bond(&mut self, a1: usize, a2: usize, order: BondOrder) {
        let dup = self
            .bonds
            .iter()
            .any(|&(x, y, _)| (x == a1 && y == a2) || (x == a2 && y == a1));
        if !dup {
            self.bonds.push((a1, a2, order));
        }
    }
}

/// A bond is in a ring iff it is not a bridge of the (multi-component)
/// graph. Iterative Tarjan bridge finding.
fn perceive_rings(n_atoms: usize, bonds: &[(usize, usize, BondOrder)]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_atoms];
    for (b, &(a1, a2, _)) in bonds.iter().enumerate() {
        adj[a1].push((a2, b));
        adj[a2].push((a1, b));
    }

    let mut in_ring = vec![true; bonds.len()];
    let mut disc = vec![usize::MAX; n_atoms];
    let mut low = vec![0usize; n_atoms];
    let mut timer = 0usize;

    for root in 0..n_atoms {
        if disc[root] != usize::MAX {
            continue;
        }
        // stack frame: (node, parent bond, next neighbor index)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&(v, pbond, ni)) = stack.last() {
            if ni < adj[v].len() {
                stack.last_mut().expect("nonempty").2 += 1;
                let (u, b) = adj[v][ni];
                if b == pbond {
                    continue;
                }
                if disc[u] == usize::MAX {
                    disc[u] = timer;
                    low[u] = timer;
                    timer += 1;
                    stack.push((u, b, 0));
                } else {
                    low[v] = low[v].min(disc[u]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > disc[parent] {
                        in_ring[pbond] = false; // bridge
                    }
                }
            }
        }
    }
    in_ring
}
