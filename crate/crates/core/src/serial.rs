//! Wire conventions for reports: complex scalars as `[re, im]` pairs,
//! matrices as row-major 2×2 nested arrays of those pairs.
//!
//! `num_complex::Complex64` is foreign, so fields use the `#[serde(with)]`
//! helpers here; `CMatrix2` implements the traits directly.

use crate::linalg::CMatrix2;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// `#[serde(with = "serial::complex")]` for a `Complex64` field.
pub mod complex {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        if !re.is_finite() || !im.is_finite() {
            return Err(D::Error::custom("complex components must be finite"));
        }
        Ok(Complex64::new(re, im))
    }
}

/// `#[serde(with = "serial::complex_opt")]` for an `Option<Complex64>` field.
pub mod complex_opt {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        z.map(|z| [z.re, z.im]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Complex64>, D::Error> {
        Ok(Option::<[f64; 2]>::deserialize(d)?.map(|[re, im]| Complex64::new(re, im)))
    }
}

/// `#[serde(with = "serial::complex_vec")]` for a `Vec<Complex64>` field.
pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|z| [z.re, z.im])
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect())
    }
}

impl Serialize for CMatrix2 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: [[[f64; 2]; 2]; 2] = [
            [
                [self.e[0][0].re, self.e[0][0].im],
                [self.e[0][1].re, self.e[0][1].im],
            ],
            [
                [self.e[1][0].re, self.e[1][0].im],
                [self.e[1][1].re, self.e[1][1].im],
            ],
        ];
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = <[[[f64; 2]; 2]; 2]>::deserialize(d)?;
        let m = CMatrix2::new([
            [
                Complex64::new(rows[0][0][0], rows[0][0][1]),
                Complex64::new(rows[0][1][0], rows[0][1][1]),
            ],
            [
                Complex64::new(rows[1][0][0], rows[1][0][1]),
                Complex64::new(rows[1][1][0], rows[1][1][1]),
            ],
        ]);
        if !m.is_finite() {
            return Err(D::Error::custom("matrix entries must be finite"));
        }
        Ok(m)
    }
}
