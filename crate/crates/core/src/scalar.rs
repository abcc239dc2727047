//! Scalar abstraction shared by every numerical module.
//!
//! All of the engine is written against [`Real`], which is implemented for
//! `f32` and `f64`. The crate root re-exports `f64` aliases for the common
//! case.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar usable by the engine (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `n` points spaced logarithmically on `[lo, hi]` (inclusive).
pub fn log_space<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    assert!(lo > T::zero() && hi >= lo, "log_space needs 0 < lo <= hi");
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let last = count::<T>(n - 1);
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * count::<T>(i) / last).exp(),
        })
        .collect()
}

/// `n` points spaced uniformly on `[lo, hi]` (inclusive).
pub fn lin_space<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let last = count::<T>(n - 1);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * count::<T>(i) / last
            }
        })
        .collect()
}

/// Serde adapter that writes non-finite values as the strings `"inf"`,
/// `"-inf"` and `"nan"` so they survive a JSON round trip.
pub mod ext {
    use super::Real;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr<T> {
        Num(T),
        Text(String),
    }

    pub fn serialize<T: Real, S: Serializer>(x: &T, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            x.serialize(s)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if x.is_sign_positive() {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        match Repr::<T>::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => parse(&t).ok_or_else(|| serde::de::Error::custom(format!("bad float `{t}`"))),
        }
    }

    pub(crate) fn parse<T: Real>(t: &str) -> Option<T> {
        match t {
            "inf" | "+inf" => Some(T::infinity()),
            "-inf" => Some(T::neg_infinity()),
            "nan" => Some(T::nan()),
            _ => None,
        }
    }

    /// Same adapter for `Vec<T>`.
    pub mod vec {
        use super::super::Real;
        use super::Repr;
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        struct Item<'a, T>(&'a T);

        impl<T: Real> serde::Serialize for Item<'_, T> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                super::serialize(self.0, s)
            }
        }

        pub fn serialize<T: Real, S: Serializer>(xs: &[T], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(xs.len()))?;
            for x in xs {
                seq.serialize_element(&Item(x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<Vec<T>, D::Error> {
            let raw = Vec::<Repr<T>>::deserialize(d)?;
            raw.into_iter()
                .map(|r| match r {
                    Repr::Num(x) => Ok(x),
                    Repr::Text(t) => super::parse(&t)
                        .ok_or_else(|| serde::de::Error::custom(format!("bad float `{t}`"))),
                })
                .collect()
        }
    }
}

/// Same adapter for string-keyed maps.
pub mod ext_map {
    use std::collections::BTreeMap;

    use super::Real;
    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    struct Item<'a, T>(&'a T);

    impl<T: Real> serde::Serialize for Item<'_, T> {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            super::ext::serialize(self.0, s)
        }
    }

    #[derive(Deserialize)]
    #[serde(transparent, bound = "T: Real")]
    struct Wrapped<T: Real>(#[serde(with = "super::ext")] T);

    pub fn serialize<T: Real, S: Serializer>(m: &BTreeMap<String, T>, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            map.serialize_entry(k, &Item(v))?;
        }
        map.end()
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, T>, D::Error> {
        let raw = BTreeMap::<String, Wrapped<T>>::deserialize(d)?;
        Ok(raw.into_iter().map(|(k, v)| (k, v.0)).collect())
    }
}

/// Formats a value with 17 significant digits (lossless for `f64`), using
/// `inf`/`-inf`/`nan` for non-finite values.
pub fn format_sig17<T: Real>(x: T) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > T::zero() { "inf".into() } else { "-inf".into() };
    }
    format!("{:.16e}", x.to_f64().unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_hits_endpoints() {
        let g = log_space(1e-2_f64, 1.0, 20);
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 1e-2);
        assert_eq!(g[19], 1.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sig17_round_trips() {
        for x in [0.1_f64, 1.0 / 3.0, 2.5066282746310002, 1e-300, 7.0e22] {
            let s = format_sig17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_sig17(f64::INFINITY), "inf");
    }

    #[test]
    fn ext_serde_handles_infinity() {
        #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
        struct W {
            #[serde(with = "ext")]
            x: f64,
            #[serde(with = "ext::vec")]
            v: Vec<f64>,
        }
        let w = W { x: f64::INFINITY, v: vec![1.5, f64::NEG_INFINITY] };
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(s, r#"{"x":"inf","v":[1.5,"-inf"]}"#);
        assert_eq!(serde_json::from_str::<W>(&s).unwrap(), w);
    }
}
