//! Serde adapters for byte fields.

macro_rules! adapter {
    ($name:ident, $engine:path) => {
        pub mod $name {
            use base64::Engine as _;
            use serde::{Deserialize, Deserializer, Serializer};

            pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&$engine.encode(bytes))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
                let raw = String::deserialize(d)?;
                $engine.decode(raw).map_err(serde::de::Error::custom)
            }
        }
    };
}

adapter!(standard, base64::engine::general_purpose::STANDARD);
adapter!(url, base64::engine::general_purpose::URL_SAFE_NO_PAD);
