//! Fixed 9-significant-digit decimal text for edge weights.
//!
//! Skeleton edge weights are stored pre-rounded with [`round_sig9`] so that
//! the text written by [`format_sig9`] parses back to the identical `f64`.

use alloc::format;
use alloc::string::String;

/// Plain (non-scientific) decimal with exactly 9 significant digits.
pub fn format_sig9(w: f64) -> String {
    let sci = format!("{:.8e}", w);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let mut out = String::from(sign);
    if exp >= 0 {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            out.extend(core::iter::repeat_n('0', int_len - digits.len()));
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    } else {
        out.push_str("0.");
        out.extend(core::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&digits);
    }
    out
}

/// Round to the value that [`format_sig9`] text denotes.
pub fn round_sig9(w: f64) -> f64 {
    format_sig9(w).parse().expect("decimal text")
}
