pub mod compress;
pub mod dataslice;
pub mod dsl;
pub mod engine;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod io;
pub mod milp;
pub mod progslice;
pub mod query;
pub mod random;
pub mod rational;
pub mod reenact;
pub mod solver;
pub mod relation;
pub mod sat;
pub mod statement;
pub mod store;
pub mod symbolic;
pub mod value;
pub mod workload;

pub use engine::{answer, Answer, Method, RunReport, WhatIfOptions, WhatIfParams};
pub use error::{Error, Result};
pub use expr::{Cond, Expr};
pub use query::{ProjItem, Query};
pub use reenact::{Delta, Sign};
pub use relation::{Catalog, Database, Relation, Tuple};
pub use statement::{History, Modification, Normalized, Statement};
pub use store::VersionedStore;
pub use value::{ArithOp, Attribute, CmpOp, Decimal, Schema, Type, Value};
pub use workload::{generate_workload, Workload, WorkloadSpec};
