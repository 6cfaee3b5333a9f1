//! Fixed numeric formatting: 6 significant digits, printf `%g` style, so
//! repeated invocations diff cleanly.

/// Format with 6 significant digits; trailing zeros trimmed, scientific
/// notation outside [1e-4, 1e6).
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (_, exp) = sci.split_once('e').expect("{:e} always yields an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if !(-4..6).contains(&exp) {
        let (mantissa, _) = sci.split_once('e').unwrap();
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (5 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    }
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(2.409420839653208), "2.40942");
        assert_eq!(sig6(4.029666333716933), "4.02967");
        assert_eq!(sig6(3602.014808895843), "3602.01");
        assert_eq!(sig6(0.5), "0.5");
        assert_eq!(sig6(1024.0), "1024");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(10_000_000.0), "1e7");
        assert_eq!(sig6(0.0001234567), "0.000123457");
        assert_eq!(sig6(-4.2196359), "-4.21964");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(999999.5), "1e6");
    }
}
