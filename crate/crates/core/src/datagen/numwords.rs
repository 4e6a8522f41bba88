use crate::error::{Error, Result};

const ONES: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
];
const TENS: [&str; 10] = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];

/// Exclusive upper bound accepted by [`number_to_words`].
pub const LIMIT: u64 = 1_000_000;

/// English cardinal for `n < 1_000_000`: lowercase, tens hyphenated, no "and".
///
/// ```
/// use lambda_nli::datagen::number_to_words;
/// assert_eq!(number_to_words(5).unwrap(), "five");
/// assert_eq!(number_to_words(62).unwrap(), "sixty-two");
/// assert_eq!(number_to_words(1200).unwrap(), "one thousand two hundred");
/// ```
pub fn number_to_words(n: u64) -> Result<String> {
    if n >= LIMIT {
        return Err(Error::OutOfRange(n));
    }
    Ok(words(n))
}

fn words(n: u64) -> String {
    match n {
        0..=19 => ONES[n as usize].to_string(),
        20..=99 => match n % 10 {
            0 => TENS[(n / 10) as usize].to_string(),
            r => format!("{}-{}", TENS[(n / 10) as usize], ONES[r as usize]),
        },
        100..=999 => scaled(n, 100, "hundred"),
        _ => scaled(n, 1000, "thousand"),
    }
}

fn scaled(n: u64, unit: u64, name: &str) -> String {
    match n % unit {
        0 => format!("{} {name}", words(n / unit)),
        r => format!("{} {name} {}", words(n / unit), words(r)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent construction: split into thousands groups and spell each
    /// group from its digits.
    fn oracle(n: u64) -> String {
        let units = [
            "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
        ];
        let teens = [
            "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
            "nineteen",
        ];
        let tens = ["twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];
        let group = |g: u64| -> Vec<String> {
            let (h, t, u) = (g / 100, (g / 10) % 10, g % 10);
            let mut parts = Vec::new();
            if h > 0 {
                parts.push(units[h as usize].to_string());
                parts.push("hundred".to_string());
            }
            match t {
                0 if u > 0 => parts.push(units[u as usize].to_string()),
                0 => {}
                1 => parts.push(teens[u as usize].to_string()),
                _ if u == 0 => parts.push(tens[t as usize - 2].to_string()),
                _ => parts.push(format!("{}-{}", tens[t as usize - 2], units[u as usize])),
            }
            parts
        };
        if n == 0 {
            return "zero".into();
        }
        let mut parts = Vec::new();
        if n >= 1000 {
            parts.extend(group(n / 1000));
            parts.push("thousand".into());
        }
        parts.extend(group(n % 1000));
        parts.join(" ")
    }

    #[test]
    fn worked_values() {
        assert_eq!(number_to_words(5).unwrap(), "five");
        assert_eq!(number_to_words(0).unwrap(), "zero");
        assert_eq!(number_to_words(62).unwrap(), "sixty-two");
        assert_eq!(number_to_words(100).unwrap(), "one hundred");
        assert_eq!(number_to_words(999_999).unwrap(), "nine hundred ninety-nine thousand nine hundred ninety-nine");
    }

    #[test]
    fn out_of_range() {
        assert!(matches!(number_to_words(1_000_000), Err(Error::OutOfRange(1_000_000))));
    }

    #[test]
    fn agrees_with_oracle_over_whole_range() {
        for n in 0..LIMIT {
            assert_eq!(words(n), oracle(n), "n = {n}");
        }
    }
}
