//! Black-box analysis of pricing mechanisms: axiom checks, decomposition of
//! supermartingales, driver representation, probes and recovery of `g`.

pub mod axioms;
pub mod decomposition;
pub mod faulty;
pub mod probes;
pub mod properties;
pub mod recovery;

pub use axioms::{axiom_suite, cone, Axiom, AxiomReport, AxiomVerdict, AxiomWitness, AXIOM_TOL};
pub use decomposition::{doob_meyer, pairwise_bound_margin, represent, DecompositionResult, RepresentationResult};
pub use probes::{
    central_node, euler_path, extrapolate_to_zero, infinitesimal_probe, z_probe, z_probe_surface, ProbePath, ProbeSpec,
};
pub use properties::{check_price_property, PriceProperty, PropertyCheck, PROPERTY_TOL};
pub use recovery::{
    recover_generator, tensor_grid, verify_main_theorem, MainTheoremReport, RecoveredGenerator, TableRow,
};
