//! Primitive value types shared by every layer: addresses, 256-bit words and
//! 18-decimal fixed-point amounts.

use std::fmt;
use std::str::FromStr;

use ruint::aliases::{U256, U512};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// A 256-bit storage word.
pub type Word = U256;

/// 1e18, the fixed-point unit ("one whole token").
pub const WAD: Word = U256::from_limbs([1_000_000_000_000_000_000, 0, 0, 0]);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmountParseError {
    #[error("empty amount")]
    Empty,
    #[error("invalid character in amount {0:?}")]
    InvalidChar(String),
    #[error("more than 18 fractional digits in {0:?}")]
    TooPrecise(String),
    #[error("amount {0:?} overflows 256 bits")]
    Overflow(String),
    #[error("invalid address {0:?}")]
    InvalidAddress(String),
}

/// Opaque 20-byte account identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    /// Deterministic address for a named role, so scenario worlds are reproducible.
    pub fn from_label(label: &str) -> Self {
        let digest = Sha256::new().chain_update(b"reguard/address/").chain_update(label.as_bytes()).finalize();
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest[..20]);
        Address(out)
    }

    pub fn to_word(self) -> Word {
        let mut bytes = [0u8; 32];
        bytes[12..].copy_from_slice(&self.0);
        U256::from_be_bytes(bytes)
    }

    /// Low 20 bytes of a word.
    pub fn from_word(word: Word) -> Self {
        let bytes: [u8; 32] = word.to_be_bytes();
        let mut out = [0u8; 20];
        out.copy_from_slice(&bytes[12..]);
        Address(out)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("0x")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Address {
    type Err = AmountParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix("0x").ok_or_else(|| AmountParseError::InvalidAddress(s.to_string()))?;
        if hex.len() != 40 {
            return Err(AmountParseError::InvalidAddress(s.to_string()));
        }
        let mut out = [0u8; 20];
        for (i, chunk) in hex.as_bytes().chunks(2).enumerate() {
            let pair = std::str::from_utf8(chunk).map_err(|_| AmountParseError::InvalidAddress(s.to_string()))?;
            out[i] = u8::from_str_radix(pair, 16).map_err(|_| AmountParseError::InvalidAddress(s.to_string()))?;
        }
        Ok(Address(out))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Non-negative 18-decimal fixed-point quantity. Serialized as a decimal string
/// (`"616.3996"` is 616.3996e18 base units) so files never pass through floats.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Amount(pub Word);

impl Amount {
    pub const ZERO: Amount = Amount(U256::ZERO);

    pub fn from_units(units: u64) -> Self {
        Amount(U256::from(units) * WAD)
    }

    pub fn raw(self) -> Word {
        self.0
    }

    /// Lossy conversion for reporting and tolerance checks.
    pub fn to_f64(self) -> f64 {
        word_to_f64(self.0) / 1e18
    }
}

pub fn word_to_f64(w: Word) -> f64 {
    let limbs = w.as_limbs();
    let mut out = 0f64;
    for (i, limb) in limbs.iter().enumerate() {
        out += (*limb as f64) * 2f64.powi(64 * i as i32);
    }
    out
}

impl FromStr for Amount {
    type Err = AmountParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().replace('_', "");
        if t.is_empty() {
            return Err(AmountParseError::Empty);
        }
        let (int, frac) = match t.split_once('.') {
            Some((i, f)) => (i, f),
            None => (t.as_str(), ""),
        };
        if frac.len() > 18 {
            return Err(AmountParseError::TooPrecise(s.to_string()));
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || (int.is_empty() && frac.is_empty()) {
            return Err(AmountParseError::InvalidChar(s.to_string()));
        }
        let mut digits = String::with_capacity(int.len() + 18);
        digits.push_str(int);
        digits.push_str(frac);
        digits.extend(std::iter::repeat_n('0', 18 - frac.len()));
        let digits = digits.trim_start_matches('0');
        if digits.is_empty() {
            return Ok(Amount::ZERO);
        }
        U256::from_str_radix(digits, 10).map(Amount).map_err(|_| AmountParseError::Overflow(s.to_string()))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let int = self.0 / WAD;
        let frac = self.0 % WAD;
        if frac.is_zero() {
            return write!(f, "{int}");
        }
        let frac = format!("{:0>18}", frac.to_string());
        write!(f, "{int}.{}", frac.trim_end_matches('0'))
    }
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Signed fixed-point amount, used for profit vectors.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SignedAmount {
    pub negative: bool,
    pub magnitude: Amount,
}

impl SignedAmount {
    pub fn diff(after: Word, before: Word) -> Self {
        if after >= before {
            SignedAmount { negative: false, magnitude: Amount(after - before) }
        } else {
            SignedAmount { negative: true, magnitude: Amount(before - after) }
        }
    }

    pub fn is_positive(&self) -> bool {
        !self.negative && !self.magnitude.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.negative && !self.magnitude.0.is_zero()
    }

    pub fn to_f64(self) -> f64 {
        let v = self.magnitude.to_f64();
        if self.negative {
            -v
        } else {
            v
        }
    }
}

impl fmt::Display for SignedAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_negative() {
            f.write_str("-")?;
        }
        fmt::Display::fmt(&self.magnitude, f)
    }
}

impl fmt::Debug for SignedAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for SignedAmount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SignedAmount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.as_str()),
        };
        let magnitude: Amount = body.parse().map_err(serde::de::Error::custom)?;
        Ok(SignedAmount { negative: negative && !magnitude.0.is_zero(), magnitude })
    }
}

/// `a * b / denominator`, rounded down, with a 512-bit intermediate.
pub fn mul_div(a: Word, b: Word, denominator: Word) -> Option<Word> {
    if denominator.is_zero() {
        return None;
    }
    let wide = U512::from(a) * U512::from(b) / U512::from(denominator);
    narrow(wide)
}

/// Narrows a 512-bit intermediate, `None` if it does not fit in a word.
pub fn narrow(wide: U512) -> Option<Word> {
    U256::checked_from_limbs_slice(wide.as_limbs())
}

pub fn mul_wad(a: Word, b: Word) -> Option<Word> {
    mul_div(a, b, WAD)
}

pub fn div_wad(a: Word, b: Word) -> Option<Word> {
    mul_div(a, WAD, b)
}

fn hash_words(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u32).to_be_bytes());
        h.update(p);
    }
    h.finalize().into()
}

/// Storage slot for a named scalar variable.
pub fn slot(name: &str) -> Word {
    U256::from_be_bytes(hash_words(&[b"slot", name.as_bytes()]))
}

/// Storage slot for `name[key]`.
pub fn mapping_slot(name: &str, key: &[u8]) -> Word {
    U256::from_be_bytes(hash_words(&[b"map", name.as_bytes(), key]))
}

/// Storage slot for `name[key_a][key_b]`.
pub fn mapping_slot2(name: &str, key_a: &[u8], key_b: &[u8]) -> Word {
    U256::from_be_bytes(hash_words(&[b"map2", name.as_bytes(), key_a, key_b]))
}

pub(crate) fn digest(parts: &[&[u8]]) -> [u8; 32] {
    hash_words(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amount_parses_and_prints_fixed_point() {
        let a: Amount = "616.3996".parse().unwrap();
        assert_eq!(a.0, U256::from(6_163_996u64) * U256::from(10u64).pow(U256::from(14u64)));
        assert_eq!(a.to_string(), "616.3996");
        assert_eq!("1_155_172.1668".parse::<Amount>().unwrap().to_string(), "1155172.1668");
        assert_eq!("0".parse::<Amount>().unwrap(), Amount::ZERO);
        assert_eq!(".5".parse::<Amount>().unwrap().to_string(), "0.5");
        assert_eq!("0.000000000000000001".parse::<Amount>().unwrap().0, U256::from(1u8));
    }

    #[test]
    fn amount_rejects_garbage() {
        assert!("".parse::<Amount>().is_err());
        assert!("1.2.3".parse::<Amount>().is_err());
        assert!("-1".parse::<Amount>().is_err());
        assert!("0.0000000000000000001".parse::<Amount>().is_err());
        assert!(".".parse::<Amount>().is_err());
    }

    #[test]
    fn address_word_roundtrip() {
        let a = Address::from_label("pool");
        assert_eq!(Address::from_word(a.to_word()), a);
        assert_eq!(a.to_string().parse::<Address>().unwrap(), a);
        assert_ne!(Address::from_label("pool"), Address::from_label("lending"));
    }

    #[test]
    fn signed_amount_roundtrip() {
        let s = SignedAmount::diff(U256::from(5u8) * WAD, U256::from(7u8) * WAD);
        assert_eq!(s.to_string(), "-2");
        let back: SignedAmount = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn mul_div_uses_wide_intermediate() {
        let big = U256::MAX / U256::from(2u8);
        assert_eq!(mul_div(big, U256::from(4u8), U256::from(4u8)), Some(big));
        assert_eq!(mul_div(U256::from(1u8), U256::from(1u8), U256::ZERO), None);
    }
}
