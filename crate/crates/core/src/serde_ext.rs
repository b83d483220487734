//! Serde adapters for lengths that may legitimately be infinite.
//!
//! JSON has no infinity literal; unbounded values are written as the string
//! `"inf"` and read back as `f64::INFINITY`.

use serde::de::{self, Deserializer, Visitor};
use serde::Serializer;
use std::fmt;

const INF: &str = "inf";

pub mod extended_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() && value.is_sign_positive() {
            s.serialize_str(INF)
        } else {
            s.serialize_f64(*value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(ExtendedF64Visitor)
    }
}

struct ExtendedF64Visitor;

impl<'de> Visitor<'de> for ExtendedF64Visitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a number or \"{INF}\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        if v == INF {
            Ok(f64::INFINITY)
        } else {
            Err(E::invalid_value(de::Unexpected::Str(v), &self))
        }
    }
}
