//! DB-nets: a relational persistence layer, a query/action data logic layer and a
//! coloured Petri net control layer; their compilation into prioritized ν-CPNs; and a
//! content-aware weak-bisimulation checker that certifies the compilation on bounded instances.

pub mod value;
pub mod term;
pub mod relational;
pub mod query;
pub mod oracle;
pub mod fresh;
pub mod marking;
pub mod lts;
pub mod dbnet;
pub mod nucpn;
pub mod translate;
pub mod equivalence;
pub mod corpus;
pub mod dsl;
pub mod dot;
pub mod random;
pub mod simulate;
