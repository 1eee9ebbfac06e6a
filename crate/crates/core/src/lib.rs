//! Numerical and structural checks that separate form-invariance (the tensor
//! property) from frame-indifference (objectivity) for tensor fields,
//! Newtonian particle mechanics and the incompressible Navier-Stokes
//! equations.

pub mod checks;
pub mod expr;
pub mod frames;
pub mod mechanics;
pub mod ns;
pub mod sampling;
