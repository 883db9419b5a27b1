//! Canonical JSON and the decimal-string encodings used for big numbers.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Serializes `value` with sorted keys and no insignificant whitespace.
pub fn to_canonical<T: Serialize>(value: &T) -> String {
    // serde_json::Value keeps object keys in a BTreeMap, so a detour through
    // it sorts every nested object.
    let v = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string(&v).expect("json value serializes")
}

/// Parses JSON, reporting the path of the offending field on failure.
pub fn from_str_with_path<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let msg = nest_path(&path, &e.into_inner().to_string());
        Error::Parse(if msg.starts_with('`') { format!("at {msg}") } else { msg })
    })
}

/// Joins `path` with a `` `sub`: `` prefix left in `msg` by a nested
/// deserializer, giving `` `path.sub`: rest ``.
pub fn nest_path(path: &str, msg: &str) -> String {
    let inner = msg
        .strip_prefix('`')
        .and_then(|m| m.split_once("`: "));
    let (sub, rest) = match inner {
        Some((sub, rest)) => (Some(sub), rest),
        None => (None, msg),
    };
    let full = match (path, sub) {
        (".", Some(s)) | ("", Some(s)) | ("?", Some(s)) => s.to_string(),
        (".", None) | ("", None) | ("?", None) => return rest.to_string(),
        (p, Some(s)) => format!("{p}.{s}"),
        (p, None) => p.to_string(),
    };
    format!("`{full}`: {rest}")
}

/// `"num/den"` without reduction.
pub fn ratio_string(num: &BigUint, den: &BigUint) -> String {
    format!("{}/{}", num, den)
}

/// Reduced rational as `"num/den"`, or a bare integer when the denominator is one.
pub fn rational_string(q: &BigRational) -> String {
    if q.denom() == &BigInt::from(1) {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let parse = |t: &str| {
        t.trim()
            .parse::<BigInt>()
            .map_err(|_| Error::Parse(format!("not a rational: {s:?}")))
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse(d)?;
            if d == BigInt::from(0) {
                return Err(Error::Parse(format!("zero denominator: {s:?}")));
            }
            Ok(BigRational::new(parse(n)?, d))
        }
        None => Ok(BigRational::from_integer(parse(s)?)),
    }
}

/// Serde adapter: `Vec<BigUint>` as a list of decimal strings.
pub mod decimal_vec {
    use num_bigint::BigUint;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(values: &[BigUint], ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_seq(values.iter().map(|v| v.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<BigUint>, D::Error> {
        let raw = Vec::<String>::deserialize(de)?;
        raw.iter()
            .map(|s| {
                if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(D::Error::custom(format!(
                        "expected a nonnegative decimal string, got {s:?}"
                    )));
                }
                s.parse::<BigUint>().map_err(D::Error::custom)
            })
            .collect()
    }
}

/// Serde adapter: a single `BigUint` as a decimal string.
pub mod decimal {
    use num_bigint::BigUint;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &BigUint, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigUint, D::Error> {
        let raw = String::deserialize(de)?;
        raw.parse::<BigUint>().map_err(D::Error::custom)
    }
}

/// Serde adapter: a `BigInt` as a decimal string.
pub mod signed_decimal {
    use num_bigint::BigInt;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &BigInt, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigInt, D::Error> {
        let raw = String::deserialize(de)?;
        raw.parse::<BigInt>().map_err(D::Error::custom)
    }
}
