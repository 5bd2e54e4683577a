//! Complex literals: `a`, `a+bi`, `a-bi`, `bi`, with decimal reals and no
//! interior whitespace.

use crate::C64;

/// Formats with the shortest round-trip representation of each part.
pub fn format_complex(z: C64) -> String {
    let re = fmt_real(z.re);
    if z.im == 0.0 {
        return re;
    }
    let im = fmt_real(z.im.abs());
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    if z.re == 0.0 {
        if sign == '-' {
            format!("-{im}i")
        } else {
            format!("{im}i")
        }
    } else {
        format!("{re}{sign}{im}i")
    }
}

fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// Parses a single complex literal token.
pub fn parse_complex(tok: &str) -> Option<C64> {
    if tok.is_empty() || tok.chars().any(char::is_whitespace) {
        return None;
    }
    let Some(body) = tok.strip_suffix('i') else {
        return parse_real(tok).map(|re| C64::new(re, 0.0));
    };
    // split at the last sign that is not the leading one and not part of an exponent
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    match split {
        Some(k) => {
            let re = parse_real(&body[..k])?;
            let im = parse_imag(&body[k..])?;
            Some(C64::new(re, im))
        }
        None => parse_imag(body).map(|im| C64::new(0.0, im)),
    }
}

fn parse_imag(s: &str) -> Option<f64> {
    match s {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => parse_real(s),
    }
}

fn parse_real(s: &str) -> Option<f64> {
    let digits = s.trim_start_matches(['+', '-']);
    if digits.is_empty() || !digits.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        return None;
    }
    if digits.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}
