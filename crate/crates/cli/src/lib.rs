//! Scenario runner and report writer for the invariance checks.

mod build;
pub mod report;
pub mod run;
pub mod scenario;

pub use report::{aggregate_exit, summary, LegOut, Report, Row, Status, EXIT_EXECUTION, EXIT_MISMATCH, EXIT_OK, EXIT_SCHEMA};
pub use run::{digest, run_bytes, run_scenario, run_suite, scenario_files, Options};
pub use scenario::{parse_scenario, Check, Scenario, SCHEMA_VERSION};

macro_rules! demos {
    ($($name:literal),* $(,)?) => {
        /// The shipped scenarios, by file stem.
        pub const DEMOS: &[(&str, &str)] = &[$(($name, include_str!(concat!("../scenarios/", $name, ".scn")))),*];
    };
}

demos!(
    "classification_matrix",
    "scalar_potential",
    "velocity",
    "strain_rate",
    "vorticity",
    "velocity_gradient",
    "z_quantity",
    "composite_norm",
    "christoffel",
    "geometric_suite",
    "oscillator",
    "drag_gravity",
    "galilean_covariance",
    "rotating_frame_closure",
    "spring_frame_indifference",
    "absolute_velocity_force",
    "ns_taylor_green",
    "ns_beltrami",
    "ns_shear",
    "ns_euler_scaling",
    "decomposed_3d",
    "decomposed_planar",
    "closure_phi2_viscous",
    "closure_phi2_constant",
    "closure_bare_mean",
    "closure_compliant",
);

pub fn demo(name: &str) -> Option<&'static str> {
    DEMOS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
