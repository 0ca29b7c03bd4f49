//! Shared report plumbing: extended-real serialization and ratio conventions.

/// Below this both sides of a ratio count as zero.
pub const ZERO_FLOOR: f64 = 1e-14;

/// `num / den` with `0 / 0 := 0`.
pub fn ratio(num: f64, den: f64) -> f64 {
    if num.abs() < ZERO_FLOOR && den.abs() < ZERO_FLOOR {
        0.0
    } else {
        num / den
    }
}

/// Largest over smallest entry of a positive series; `inf` if any entry is
/// non-finite or non-positive while others are positive.
pub fn drift(series: &[f64]) -> f64 {
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    if series.is_empty() || (max == 0.0 && min == 0.0) {
        return 1.0;
    }
    if !max.is_finite() || min <= 0.0 {
        return f64::INFINITY;
    }
    max / min
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`
/// so that reports stay valid JSON.
pub mod ext_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("expected a number or inf, got {other:?}"))),
            },
        }
    }
}

/// [`ext_f64`] for sequences.
pub mod ext_f64_vec {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(serde::Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::ext_f64")] f64);

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&Wrap(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Wrap>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}
