//! Decision procedure and proof checker for quantifier-free separation logic
//! with separating conjunction and magic wand.

pub mod core;
pub mod formula;
pub mod hilbert;
pub mod semantics;

pub use crate::core::{
    boxseptra, boxstar, compute_basis, core_type_model, core_type_sat, decide_sat, decide_valid,
    eliminate_septraction, eliminate_star, entails, normalize, to_core_type_dnf, CoreBool,
    CoreError, CoreFormula, CoreLiteral, CoreType, NormalizedForm, SatResult, ValidResult,
};
pub use crate::formula::{expand_shortcuts, free_vars, parse, print, CoreBasis, Formula, ParseError, Var};
pub use crate::semantics::{brute_sat, core_abstract_sat, satisfies, EnumerationBounds, MemoryState};
