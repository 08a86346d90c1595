//! Piecewise-linear isometric embeddings of flat tori.
//!
//! The crate is organized around four construction routes (Burago–Zalgaller
//! folding over a conformal base, Zalgaller long-torus origami, diplotori and
//! a merged universal triangulation) plus the verification oracles shared by
//! all of them.

pub mod diplotorus;
pub mod flat_mesh;
pub mod moduli;
pub mod verify;
pub mod zalgaller;

pub use flat_mesh::{
    AbstractTriangulation, Development, EulerAudit, FlatChart, GeometricMesh,
    MetricTriangulation,
};
pub use moduli::{Modulus, RealizationChoice, RealizationKind, Region, UnimodularMap};
pub use zalgaller::{
    assemble_long_torus, assemble_long_torus_with, build_bend, build_gasket,
    build_helical_twist, gasket_length, BendSpec, GasketSpec, LongTorus, LongTorusPlan,
    SectionSpec, TwistPlan, ZalgallerError,
};
