//! Canonical number rendering shared by every text format.

/// Shortest round-trip decimal for a finite real, always marked as real
/// (`2.0`, `1.5`, `1.0e20`), so integers and reals never collide in text.
pub fn real(r: f64) -> String {
    let s = format!("{r:?}");
    if s.contains('.') || !r.is_finite() {
        return s;
    }
    match s.find('e') {
        Some(pos) => format!("{}.0{}", &s[..pos], &s[pos..]),
        None => format!("{s}.0"),
    }
}

/// True when `s` reads as a number under the grammar [`real`] emits or as an integer.
pub fn looks_numeric(s: &str) -> bool {
    !s.is_empty() && (s.parse::<i64>().is_ok() || (s.parse::<f64>().is_ok() && s.chars().any(|c| c.is_ascii_digit())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_forms() {
        assert_eq!(real(1.5), "1.5");
        assert_eq!(real(2.0), "2.0");
        assert_eq!(real(-0.25), "-0.25");
        assert_eq!(real(1e20), "1.0e20");
        assert_eq!(real(1.5e-7), "1.5e-7");
        assert_eq!(real(0.1 + 0.2), "0.30000000000000004");
    }

    #[test]
    fn round_trips() {
        for r in [1.5, 2.0, 1e20, 3.25e-9, -7.0, 123456.789] {
            assert_eq!(real(r).parse::<f64>().unwrap(), r);
        }
    }
}
