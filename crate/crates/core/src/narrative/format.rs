//! Fixed-precision number rendering and numeric token extraction.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

/// Significant digits used for every number placed in a prompt or
/// description.
pub const SIGNIFICANT_DIGITS: usize = 4;

/// Render `x` with four significant digits in positional notation.
///
/// Trailing zeros are kept (`0.5` renders as `0.5000`) so that the width of
/// a value does not depend on its digits. Magnitudes of `1e4` and above are
/// rounded to four significant digits and printed as integers.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return format!("{:.*}", SIGNIFICANT_DIGITS - 1, 0.0);
    }
    // Scientific formatting does the rounding; its exponent already
    // accounts for carries such as 9.99996 -> 1.000e1.
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    let rounded: f64 = sci.parse().expect("round trip");
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
    let out = format!("{rounded:.decimals$}");
    if out.starts_with('-') && out[1..].chars().all(|c| c == '0' || c == '.') {
        out[1..].to_string()
    } else {
        out
    }
}

static WORD_OR_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z_][A-Za-z0-9_]*|[0-9]+(?:\.[0-9]+)?").expect("static regex"));

/// Unsigned numeric tokens in `text`, in order of appearance.
///
/// Digits that are part of an identifier (`p12`, `noise_3`) are not
/// numbers; a leading minus sign is dropped.
pub fn numeric_tokens(text: &str) -> Vec<&str> {
    WORD_OR_NUMBER
        .find_iter(text)
        .map(|m| m.as_str())
        .filter(|t| t.as_bytes()[0].is_ascii_digit())
        .collect()
}

pub fn numeric_token_set(text: &str) -> BTreeSet<&str> {
    numeric_tokens(text).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rendering_examples() {
        let cases = [
            (0.0, "0.000"),
            (-0.0, "0.000"),
            (0.5, "0.5000"),
            (1.0, "1.000"),
            (0.123456, "0.1235"),
            (12.3456, "12.35"),
            (9.99996, "10.00"),
            (1234.56, "1235"),
            (123456.0, "123500"),
            (-0.000123456, "-0.0001235"),
            (-0.00004, "-0.00004000"),
            (f64::NAN, "NaN"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_num(x), want, "{x}");
        }
    }

    #[test]
    fn tokens_skip_identifiers() {
        let t = numeric_tokens("node p12 has noise_3 = -0.5000 and 7 friends");
        assert_eq!(t, vec!["0.5000", "7"]);
    }

    proptest! {
        #[test]
        fn rendered_value_is_close_and_one_token(x in -1e6f64..1e6) {
            let s = fmt_num(x);
            let back: f64 = s.parse().unwrap();
            prop_assert!((back - x).abs() <= 5e-4 * x.abs().max(1e-300) + 1e-12, "{x} -> {s}");
            let toks = numeric_tokens(&s);
            prop_assert_eq!(toks.len(), 1);
            prop_assert_eq!(toks[0], s.trim_start_matches('-'));
        }
    }
}
