pub mod chart;
pub mod coupling;
pub mod apath;
pub mod dual;
pub mod error;
pub mod examples;
pub mod expr;
pub mod fibration;
pub mod groupoid;
pub mod linalg;
pub mod monodromy;
pub mod quadrature;
pub mod yang_mills;

pub use chart::{CoordinateDomain, Field, SectionPair, Valence};
pub use coupling::{check_coupling_conditions, CouplingReport, GeometricData};
pub use dual::Dual;
pub use error::{Error, Result};
pub use fibration::FiberedSpace;
