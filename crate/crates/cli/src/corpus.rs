//! Seeded synthetic corpus generator. Produces small drug-like molecules
//! in the supported SMILES dialect: decorated heteroatom chains with
//! frequent halogen/carbonyl terminals and an optional (hetero)aromatic or
//! aliphatic ring. Molecule `i` of a run depends only on `(seed, i)`.

use molmae_core::rng::{SplitRng, Stream};

fn pick<'a>(stream: &mut Stream, table: &[(&'a str, f64)]) -> &'a str {
    let total: f64 = table.iter().map(|(_, w)| w).sum();
    let mut x = stream.next_f64() * total;
    for (item, w) in table {
        x -= w;
        if x <= 0.0 {
            return item;
        }
    }
    table.last().expect("non-empty table").0
}

const CHAIN_ELEMENTS: &[(&str, f64)] = &[
    ("C", 0.58),
    ("N", 0.16),
    ("O", 0.12),
    ("S", 0.10),
    ("P", 0.04),
];

// degree-1 terminals are dominated by halogens and carbonyl oxygen, so a
// masked terminal is rarely carbon
const DECORATIONS: &[(&str, f64)] = &[
    ("(F)", 0.42),
    ("(Cl)", 0.17),
    ("(Br)", 0.04),
    ("(I)", 0.02),
    ("(=O)", 0.20),
    ("(O)", 0.05),
    ("(N)", 0.04),
    ("(C#N)", 0.03),
    ("(OC)", 0.01),
    ("(=S)", 0.01),
    ("([NH3+])", 0.005),
    ("([O-])", 0.005),
];

const RINGS: &[(&str, f64)] = &[
    ("c1ccccc1", 0.30),
    ("c1ccncc1", 0.20),
    ("c1cncnc1", 0.12),
    ("c1ccsc1", 0.10),
    ("c1cc[nH]c1", 0.08),
    ("C1CCCCC1", 0.08),
    ("C1CCOC1", 0.12),
];

/// One molecule from the generator's distribution.
pub fn generate_molecule(rng: &SplitRng) -> String {
    let mut stream = rng.stream();
    let mut out = String::new();

    let with_ring = stream.next_f64() < 0.5;
    let ring_first = with_ring && stream.next_f64() < 0.4;
    if ring_first {
        out += pick(&mut stream, RINGS);
    }

    let chain_len = 2 + stream.below(4) as usize;
    for i in 0..chain_len {
        out += pick(&mut stream, CHAIN_ELEMENTS);
        let end = i == 0 || i + 1 == chain_len;
        // chain ends always carry at least one decoration (so bare chain
        // atoms rarely end up with degree 1); interiors at most one
        if end {
            out += pick(&mut stream, DECORATIONS);
            if stream.next_f64() < 0.45 {
                out += pick(&mut stream, DECORATIONS);
            }
        } else if stream.next_f64() < 0.45 {
            out += pick(&mut stream, DECORATIONS);
        }
    }

    if with_ring && !ring_first {
        out += pick(&mut stream, RINGS);
    }
    out
}

/// Deterministic corpus: molecule `i` comes from the stream derived at
/// index `i`, so any prefix of a larger run is reproducible.
pub fn generate_corpus(seed: u64, count: usize) -> Vec<String> {
    let root = SplitRng::new(seed).derive("corpus");
    (0..count)
        .map(|i| generate_molecule(&root.derive_index(i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use molmae_core::molgraph::{parse_smiles, Element};
    use molmae_core::train::PreparedMolecule;

    #[test]
    fn corpus_is_deterministic() {
        let a = generate_corpus(7, 50);
        let b = generate_corpus(7, 50);
        assert_eq!(a, b);
        // a prefix of a longer run matches
        let long = generate_corpus(7, 80);
        assert_eq!(a[..], long[..50]);
        assert_ne!(a, generate_corpus(8, 50));
    }

    #[test]
    fn every_generated_molecule_parses_and_is_maskable() {
        for (i, smiles) in generate_corpus(123, 2000).iter().enumerate() {
            let mol = parse_smiles(smiles).unwrap_or_else(|e| panic!("#{i} {smiles}: {e}"));
            let prepared = PreparedMolecule::new(mol).unwrap_or_else(|e| panic!("#{i} {smiles}: {e}"));
            assert!(prepared.is_maskable(), "#{i} {smiles}");
        }
    }

    #[test]
    fn corpus_composition_supports_the_desk_scale_tasks() {
        let corpus = generate_corpus(99, 2000);
        let mut n_atoms = 0usize;
        let mut n_carbon = 0usize;
        let mut n_terminal = 0usize;
        let mut with_oxygen = 0usize;
        for smiles in &corpus {
            let mol = parse_smiles(smiles).unwrap();
            let degrees = mol.degrees();
            n_atoms += mol.n_atoms();
            n_carbon += mol
                .atoms
                .iter()
                .filter(|a| a.element == Element::C)
                .count();
            n_terminal += degrees.iter().filter(|&&d| d == 1).count();
            if mol.atoms.iter().any(|a| a.element == Element::O) {
                with_oxygen += 1;
            }
        }
        let carbon_frac = n_carbon as f64 / n_atoms as f64;
        let terminal_frac = n_terminal as f64 / n_atoms as f64;
        let oxygen_rate = with_oxygen as f64 / corpus.len() as f64;
        // carbon must not dominate so far that the majority baseline is
        // unbeatable, and terminals must be frequent enough to carry the
        // contextual signal
        assert!(carbon_frac < 0.62, "carbon fraction {carbon_frac}");
        assert!(terminal_frac > 0.25, "terminal fraction {terminal_frac}");
        assert!(
            (0.35..=0.95).contains(&oxygen_rate),
            "oxygen rate {oxygen_rate}"
        );
        let mean_atoms = n_atoms as f64 / corpus.len() as f64;
        assert!((5.0..=20.0).contains(&mean_atoms), "mean atoms {mean_atoms}");
    }
}
