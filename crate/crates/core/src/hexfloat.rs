//! Lowercase hexadecimal float literals (`-0x1.8p+1`) for bit-exact text
//! serialization.

const MANTISSA_BITS: u32 = 52;
const EXP_BIAS: i64 = 1023;

/// Formats `v` so that [`parse`] returns the same bits. NaN payloads are
/// not preserved.
pub fn format(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    let sign = if v.is_sign_negative() { "-" } else { "" };
    if v.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = v.to_bits();
    let biased = ((bits >> MANTISSA_BITS) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << MANTISSA_BITS) - 1);
    if biased == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if biased == 0 { (0, 1 - EXP_BIAS) } else { (1, biased - EXP_BIAS) };
    let digits = format!("{mantissa:013x}");
    let frac = digits.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}0x{lead}p{exp:+}")
    } else {
        format!("{sign}0x{lead}.{frac}p{exp:+}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError(pub String);

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid hex float `{}`", self.0)
    }
}

impl std::error::Error for ParseError {}

/// Parses a hex float literal. Exact for everything [`format`] emits and
/// for any literal whose significand fits in 53 bits.
pub fn parse(s: &str) -> Result<f64, ParseError> {
    let err = || ParseError(s.to_owned());
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let signed = |v: f64| if neg { -v } else { v };
    match body {
        "inf" => return Ok(signed(f64::INFINITY)),
        "nan" => return Ok(f64::NAN),
        _ => {}
    }
    let body = body.strip_prefix("0x").ok_or_else(err)?;
    let (mant, exp) = body.split_once('p').ok_or_else(err)?;
    let exp: i64 = exp.parse().map_err(|_| err())?;
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() {
        return Err(err());
    }
    let mut significand: u64 = 0;
    let mut bits_used = 0u32;
    for c in int.chars().chain(frac.chars()) {
        let d = c.to_digit(16).ok_or_else(err)?;
        if c.is_ascii_uppercase() {
            return Err(err());
        }
        if significand != 0 || d != 0 {
            bits_used += 4;
        }
        if bits_used > 60 {
            return Err(err());
        }
        significand = (significand << 4) | u64::from(d);
    }
    if significand > (1u64 << 53) {
        return Err(err());
    }
    let shift = exp - 4 * frac.len() as i64;
    Ok(signed(scale(significand as f64, shift)))
}

/// `v * 2^k` without intermediate rounding while the result is
/// representable.
fn scale(mut v: f64, mut k: i64) -> f64 {
    let step = 2f64.powi(1000);
    let inv = 2f64.powi(-1000);
    while k > 1000 {
        v *= step;
        k -= 1000;
    }
    while k < -1000 {
        v *= inv;
        k += 1000;
    }
    v * 2f64.powi(k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_literals() {
        assert_eq!(format(1.0), "0x1p+0");
        assert_eq!(format(3.0), "0x1.8p+1");
        assert_eq!(format(-0.1), "-0x1.999999999999ap-4");
        assert_eq!(format(0.0), "0x0p+0");
        assert_eq!(format(-0.0), "-0x0p+0");
        assert_eq!(format(f64::from_bits(1)), "0x0.0000000000001p-1022");
        assert_eq!(format(f64::MAX), "0x1.fffffffffffffp+1023");
        assert_eq!(parse("0x1.8p+1").unwrap(), 3.0);
        assert_eq!(parse("-inf").unwrap(), f64::NEG_INFINITY);
        assert!(parse("nan").unwrap().is_nan());
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "1.0", "0x", "0x1p", "0xgp+0", "0x1.8", "0x1.8P+1", "0xp+0"] {
            assert!(parse(s).is_err(), "{s}");
        }
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(!v.is_nan());
            prop_assert_eq!(parse(&format(v)).unwrap().to_bits(), bits);
        }
    }
}
