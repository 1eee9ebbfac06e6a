use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Shape of a field value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Scalar,
    Vec3,
    Mat3,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Shape::Scalar => "scalar",
            Shape::Vec3 => "vec3",
            Shape::Mat3 => "mat3",
        };
        f.write_str(s)
    }
}

/// A numeric value of a field at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TensorValue {
    Scalar(f64),
    Vector(Vector3<f64>),
    Matrix(Matrix3<f64>),
}

impl TensorValue {
    pub fn zero(shape: Shape) -> Self {
        match shape {
            Shape::Scalar => TensorValue::Scalar(0.0),
            Shape::Vec3 => TensorValue::Vector(Vector3::zeros()),
            Shape::Mat3 => TensorValue::Matrix(Matrix3::zeros()),
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            TensorValue::Scalar(_) => Shape::Scalar,
            TensorValue::Vector(_) => Shape::Vec3,
            TensorValue::Matrix(_) => Shape::Mat3,
        }
    }

    /// Components in row-major order (1, 3 or 9 numbers).
    pub fn components(&self) -> &[f64] {
        match self {
            TensorValue::Scalar(s) => std::slice::from_ref(s),
            TensorValue::Vector(v) => v.as_slice(),
            // nalgebra stores column-major; callers that need row-major use `row_major`.
            TensorValue::Matrix(m) => m.as_slice(),
        }
    }

    /// Components in row-major order.
    pub fn row_major(&self) -> Vec<f64> {
        match self {
            TensorValue::Matrix(m) => m.transpose().as_slice().to_vec(),
            other => other.components().to_vec(),
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            TensorValue::Scalar(s) => Some(*s),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<Vector3<f64>> {
        match self {
            TensorValue::Vector(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_matrix(&self) -> Option<Matrix3<f64>> {
        match self {
            TensorValue::Matrix(m) => Some(*m),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.components().iter().all(|c| *c == 0.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        match self {
            TensorValue::Scalar(s) => TensorValue::Scalar(k * s),
            TensorValue::Vector(v) => TensorValue::Vector(v * k),
            TensorValue::Matrix(m) => TensorValue::Matrix(m * k),
        }
    }

    /// Largest componentwise absolute difference; infinite when shapes differ.
    pub fn max_abs_diff(&self, other: &TensorValue) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.components().iter().zip(other.components()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.components().iter().map(|c| c.abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &TensorValue) -> Option<TensorValue> {
        Some(match (self, other) {
            (TensorValue::Scalar(a), TensorValue::Scalar(b)) => TensorValue::Scalar(a - b),
            (TensorValue::Vector(a), TensorValue::Vector(b)) => TensorValue::Vector(a - b),
            (TensorValue::Matrix(a), TensorValue::Matrix(b)) => TensorValue::Matrix(a - b),
            _ => return None,
        })
    }

    /// Apply the linear action of `m` according to the value's rank:
    /// scalars are untouched, vectors map to `m v`, matrices to `m A mᵀ`.
    pub fn conjugate(&self, m: &Matrix3<f64>) -> TensorValue {
        match self {
            TensorValue::Scalar(s) => TensorValue::Scalar(*s),
            TensorValue::Vector(v) => TensorValue::Vector(m * v),
            TensorValue::Matrix(a) => TensorValue::Matrix(m * a * m.transpose()),
        }
    }
}

impl From<f64> for TensorValue {
    fn from(s: f64) -> Self {
        TensorValue::Scalar(s)
    }
}

impl From<Vector3<f64>> for TensorValue {
    fn from(v: Vector3<f64>) -> Self {
        TensorValue::Vector(v)
    }
}

impl From<Matrix3<f64>> for TensorValue {
    fn from(m: Matrix3<f64>) -> Self {
        TensorValue::Matrix(m)
    }
}

impl Serialize for TensorValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TensorValue::Scalar(v) => s.serialize_f64(*v),
            TensorValue::Vector(v) => v.as_slice().serialize(s),
            TensorValue::Matrix(m) => {
                let rows: Vec<[f64; 3]> = (0..3).map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]).collect();
                rows.serialize(s)
            }
        }
    }
}

impl<'de> Deserialize<'de> for TensorValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Scalar(f64),
            Vector([f64; 3]),
            Matrix([[f64; 3]; 3]),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Scalar(s) => TensorValue::Scalar(s),
            Raw::Vector(v) => TensorValue::Vector(Vector3::from(v)),
            Raw::Matrix(r) => TensorValue::Matrix(Matrix3::from_fn(|i, j| r[i][j])),
        })
    }
}

/// A point of space-time: nondimensional time `t` and position `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub t: f64,
    #[serde(with = "vec3_serde")]
    pub x: Vector3<f64>,
}

impl SpaceTimePoint {
    pub fn new(t: f64, x: Vector3<f64>) -> Self {
        Self { t, x }
    }

    /// Construct a point, rejecting non-finite components.
    pub fn try_new(t: f64, x: Vector3<f64>) -> Option<Self> {
        (t.is_finite() && x.iter().all(|c| c.is_finite())).then_some(Self { t, x })
    }
}

pub(crate) mod vec3_serde {
    use nalgebra::Vector3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector3<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector3<f64>, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vector3::from(a))
    }
}
