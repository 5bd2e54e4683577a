//! Ready-made automata for the standard patterns.

use crate::automaton::{SymbolTable, WeightedAutomaton};
use crate::C64;

const ONE: C64 = C64::new(1.0, 0.0);

/// One state, every symbol maps it to itself with weight 1.
pub fn unit(symbols: SymbolTable) -> WeightedAutomaton {
    let names: Vec<String> = symbols.names().to_vec();
    let mut b = WeightedAutomaton::builder(symbols).state("A").initial("A", ONE).accept("A", ONE);
    for n in &names {
        b = b.edge("A", "A", n, ONE);
    }
    b.build().expect("unit automaton")
}

/// Exactly one `1` in the word: `A` has not seen a 1, `B` has.
pub fn w_state() -> WeightedAutomaton {
    WeightedAutomaton::builder(SymbolTable::qubit_basis())
        .states(&["A", "B"])
        .edge("A", "A", "0", ONE)
        .edge("A", "B", "1", ONE)
        .edge("B", "B", "0", ONE)
        .initial("A", ONE)
        .accept("B", ONE)
        .build()
        .expect("W automaton")
}

/// All symbols equal: `0…0 + 1…1`.
pub fn cat() -> WeightedAutomaton {
    WeightedAutomaton::builder(SymbolTable::qubit_basis())
        .states(&["A", "B"])
        .edge("A", "A", "0", ONE)
        .edge("B", "B", "1", ONE)
        .initial("A", ONE)
        .initial("B", ONE)
        .accept("A", ONE)
        .accept("B", ONE)
        .build()
        .expect("cat automaton")
}

/// Deterministic automaton accepting words that end in `00` or `11`.
///
/// `B`/`D` remember a fresh 0/1 run of length one, `C`/`E` a run of at least
/// two.
pub fn ends_in_two_equal() -> WeightedAutomaton {
    WeightedAutomaton::builder(SymbolTable::qubit_basis())
        .states(&["A", "B", "C", "D", "E"])
        .edge("A", "B", "0", ONE)
        .edge("A", "D", "1", ONE)
        .edge("B", "C", "0", ONE)
        .edge("B", "D", "1", ONE)
        .edge("C", "C", "0", ONE)
        .edge("C", "D", "1", ONE)
        .edge("D", "B", "0", ONE)
        .edge("D", "E", "1", ONE)
        .edge("E", "B", "0", ONE)
        .edge("E", "E", "1", ONE)
        .initial("A", ONE)
        .accept("C", ONE)
        .accept("E", ONE)
        .build()
        .expect("DFA")
}

/// Two neighboring 1's and 0 elsewhere: `1100… + 0110… + …`.
pub fn neighbor_pairs() -> WeightedAutomaton {
    WeightedAutomaton::builder(SymbolTable::qubit_basis())
        .states(&["A", "B", "C"])
        .edge("A", "A", "0", ONE)
        .edge("A", "B", "1", ONE)
        .edge("B", "C", "1", ONE)
        .edge("C", "C", "0", ONE)
        .initial("A", ONE)
        .accept("C", ONE)
        .build()
        .expect("neighbor automaton")
}

/// Nearest-neighbor coupling `XXI…I + IXXI… + …` over symbols `I`, `X`.
/// The edge `B → C` places the second X of each pair.
pub fn neighbor_coupling() -> WeightedAutomaton {
    WeightedAutomaton::builder(SymbolTable::paulis(&["I", "X"]))
        .states(&["A", "B", "C"])
        .edge("A", "A", "I", ONE)
        .edge("A", "B", "X", ONE)
        .edge("B", "C", "X", ONE)
        .edge("C", "C", "I", ONE)
        .initial("A", ONE)
        .accept("C", ONE)
        .build()
        .expect("neighbor coupling")
}

/// Field along z: `ZI…I + IZI… + …` over symbols `I`, `Z`.
pub fn magnetic_field() -> WeightedAutomaton {
    WeightedAutomaton::builder(SymbolTable::paulis(&["I", "Z"]))
        .states(&["A", "B"])
        .edge("A", "A", "I", ONE)
        .edge("A", "B", "Z", ONE)
        .edge("B", "B", "I", ONE)
        .initial("A", ONE)
        .accept("B", ONE)
        .build()
        .expect("magnetic field")
}

/// Periodic-boundary pairs: under the trace, accepts words whose 1's come
/// in cyclically adjacent pairs.
pub fn cyclic_pairs() -> WeightedAutomaton {
    WeightedAutomaton::builder(SymbolTable::qubit_basis())
        .states(&["A", "B"])
        .edge("A", "A", "0", ONE)
        .edge("A", "B", "1", ONE)
        .edge("B", "A", "1", ONE)
        .initial("A", ONE)
        .accept("A", ONE)
        .build()
        .expect("cyclic pairs")
}

/// Transverse-field Ising Hamiltonian `−Σ XX − g Σ Z` as a single automaton
/// over `I`, `X`, `Z`.
pub fn transverse_ising(g: f64) -> WeightedAutomaton {
    WeightedAutomaton::builder(SymbolTable::paulis(&["I", "X", "Z"]))
        .states(&["A", "B", "C"])
        .edge("A", "A", "I", ONE)
        .edge("A", "B", "X", -ONE)
        .edge("B", "C", "X", ONE)
        .edge("A", "C", "Z", C64::new(-g, 0.0))
        .edge("C", "C", "I", ONE)
        .initial("A", ONE)
        .accept("C", ONE)
        .build()
        .expect("transverse Ising")
}

/// The automata every equivalence check runs over.
pub fn standard() -> Vec<(&'static str, WeightedAutomaton)> {
    vec![
        ("w", w_state()),
        ("neighbor-coupling", neighbor_coupling()),
        ("magnetic-field", magnetic_field()),
        ("ends-in-two", ends_in_two_equal()),
        ("cat", cat()),
    ]
}

/// `−Σ XX − g Σ Z` assembled as the direct sum of the scaled
/// neighbor-coupling and field automata over the common table `I, X, Z`.
pub fn transverse_ising_sum(g: f64) -> WeightedAutomaton {
    let table = SymbolTable::paulis(&["I", "X", "Z"]);
    let xx = neighbor_coupling().extend_alphabet(&table).expect("I, X embed");
    let z = magnetic_field().extend_alphabet(&table).expect("I, Z embed");
    xx.scale(-ONE).sum(&z.scale(C64::new(-g, 0.0))).expect("same table")
}
