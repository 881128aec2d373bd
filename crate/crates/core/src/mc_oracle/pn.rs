use crate::error::{Error, Result};

/// Primitive polynomials over GF(2) for register lengths 2..=10, as bit masks
/// (bit i = coefficient of x^i).
pub const PRIMITIVE_POLYNOMIALS: [(u32, u32); 9] = [
    (2, 0b111),          // x^2 + x + 1
    (3, 0b1011),         // x^3 + x + 1
    (4, 0b1_0011),       // x^4 + x + 1
    (5, 0b10_0101),      // x^5 + x^2 + 1
    (6, 0b100_0011),     // x^6 + x + 1
    (7, 0b1000_0011),    // x^7 + x + 1
    (8, 0b1_0001_1101),  // x^8 + x^4 + x^3 + x^2 + 1
    (9, 0b10_0001_0001), // x^9 + x^4 + 1
    (10, 0b100_0000_1001), // x^10 + x^3 + 1
];

pub fn primitive_polynomial(register_length: u32) -> Option<u32> {
    PRIMITIVE_POLYNOMIALS
        .iter()
        .find(|(n, _)| *n == register_length)
        .map(|(_, p)| *p)
}

/// Register length n with 2^n - 1 = `length`, if the length is supported.
pub fn register_length_for(length: usize) -> Option<u32> {
    (2..=10u32).find(|&n| (1usize << n) - 1 == length)
}

/// Supported spreading lengths: 1 (no spreading) and 2^n - 1 for n in 2..=10.
pub fn supported_lengths() -> Vec<usize> {
    std::iter::once(1).chain((2..=10u32).map(|n| (1usize << n) - 1)).collect()
}

/// Unit-energy pseudo-noise signature.
#[derive(Debug, Clone, PartialEq)]
pub struct PnSequence {
    /// Chips of magnitude 1/sqrt(N).
    pub chips: Vec<f64>,
    /// Register length n, N = 2^n - 1 (0 for the trivial length-1 code).
    pub register_length: u32,
    pub shift: usize,
}

impl PnSequence {
    /// Length-1 code used when there is no spreading.
    pub fn trivial() -> Self {
        Self {
            chips: vec![1.0],
            register_length: 0,
            shift: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    /// Chips rescaled to +-1, the per-PRB symbol multipliers.
    pub fn unit_chips(&self) -> Vec<f64> {
        self.chips.iter().map(|c| c.signum()).collect()
    }

    /// sum_n c[n] other[(n + lag) mod N].
    pub fn cyclic_correlation(&self, other: &PnSequence, lag: usize) -> f64 {
        let n = self.len();
        (0..n).map(|i| self.chips[i] * other.chips[(i + lag) % n]).sum()
    }
}

/// Maximal-length sequence from a Fibonacci LFSR, mapped 0 -> +1/sqrt(N),
/// 1 -> -1/sqrt(N) and cyclically shifted left by `shift`.
pub fn gen_mseq(register_length: u32, poly: u32, shift: usize) -> Result<PnSequence> {
    if !(2..=10).contains(&register_length) {
        return Err(Error::Spreading(format!(
            "register length {register_length} outside 2..=10"
        )));
    }
    let n = register_length;
    if poly >> n != 1 || poly & 1 == 0 {
        return Err(Error::NonPrimitivePolynomial {
            poly,
            register_length: n,
            period: 0,
        });
    }
    let len = (1usize << n) - 1;
    let taps = poly & ((1 << n) - 1);
    // state bit i holds s[k + i]; s[k + n] = sum over taps of s[k + i]
    let start = 1u32;
    let mut state = start;
    let mut bits = Vec::with_capacity(len);
    let mut period = 0;
    loop {
        bits.push(state & 1);
        let feedback = (state & taps).count_ones() & 1;
        state = (state >> 1) | (feedback << (n - 1));
        period += 1;
        if state == start || period > len {
            break;
        }
    }
    if period != len {
        return Err(Error::NonPrimitivePolynomial {
            poly,
            register_length: n,
            period,
        });
    }
    let amp = 1.0 / (len as f64).sqrt();
    let chips = (0..len)
        .map(|i| if bits[(i + shift) % len] == 0 { amp } else { -amp })
        .collect();
    Ok(PnSequence {
        chips,
        register_length: n,
        shift: shift % len,
    })
}

/// One signature per device: distinct cyclic shifts of one m-sequence of
/// length `spreading`, or the trivial code when `spreading == 1`.
pub fn spreading_codes(spreading: usize, num_devices: usize) -> Result<Vec<PnSequence>> {
    if spreading == 1 {
        return Ok(vec![PnSequence::trivial(); num_devices]);
    }
    let n = register_length_for(spreading).ok_or_else(|| {
        Error::Spreading(format!("N = {spreading} is not 1 or 2^n - 1 with 2 <= n <= 10"))
    })?;
    if num_devices > spreading {
        return Err(Error::Spreading(format!(
            "{num_devices} devices need distinct shifts of a length-{spreading} sequence"
        )));
    }
    let poly = primitive_polynomial(n).expect("table covers 2..=10");
    (0..num_devices).map(|d| gen_mseq(n, poly, d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_is_primitive() {
        for (n, poly) in PRIMITIVE_POLYNOMIALS {
            let s = gen_mseq(n, poly, 0).unwrap();
            assert_eq!(s.len(), (1 << n) - 1);
        }
    }

    #[test]
    fn length_seven_autocorrelation() {
        let s = gen_mseq(3, 0b1011, 0).unwrap();
        assert_eq!(s.len(), 7);
        assert_relative_eq!(s.cyclic_correlation(&s, 0), 1.0, epsilon = 1e-15);
        for lag in 1..7 {
            assert_relative_eq!(s.cyclic_correlation(&s, lag), -1.0 / 7.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_valued_autocorrelation_every_length() {
        for (n, poly) in PRIMITIVE_POLYNOMIALS {
            let s = gen_mseq(n, poly, 0).unwrap();
            let len = s.len() as f64;
            for lag in [1, 2, s.len() / 2, s.len() - 1] {
                assert_relative_eq!(s.cyclic_correlation(&s, lag), -1.0 / len, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn balance_property() {
        let s = gen_mseq(8, primitive_polynomial(8).unwrap(), 0).unwrap();
        assert_eq!(s.len(), 255);
        let ones = s.chips.iter().filter(|c| **c < 0.0).count();
        assert_eq!(ones, 128);
    }

    #[test]
    fn non_primitive_rejected() {
        // x^4 + x^3 + x^2 + x + 1 has period 5
        match gen_mseq(4, 0b1_1111, 0) {
            Err(Error::NonPrimitivePolynomial { period, .. }) => assert_eq!(period, 5),
            other => panic!("expected rejection, got {other:?}"),
        }
        // reducible x^4 + 1
        assert!(gen_mseq(4, 0b1_0001, 0).is_err());
        assert!(gen_mseq(11, 0b1, 0).is_err());
    }

    #[test]
    fn shifted_codes_cross_correlate_to_minus_one_over_n() {
        let codes = spreading_codes(15, 4).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let r = codes[a].cyclic_correlation(&codes[b], 0);
                let want = if a == b { 1.0 } else { -1.0 / 15.0 };
                assert_relative_eq!(r, want, epsilon = 1e-14);
            }
        }
        let unit = codes[0].unit_chips();
        assert!(unit.iter().all(|c| c.abs() == 1.0));
    }

    #[test]
    fn spreading_code_errors() {
        assert!(matches!(spreading_codes(16, 2), Err(Error::Spreading(_))));
        assert!(matches!(spreading_codes(7, 8), Err(Error::Spreading(_))));
        let trivial = spreading_codes(1, 5).unwrap();
        assert_eq!(trivial.len(), 5);
        assert_eq!(trivial[0].chips, vec![1.0]);
    }

    #[test]
    fn supported_length_list() {
        assert_eq!(supported_lengths(), vec![1, 3, 7, 15, 31, 63, 127, 255, 511, 1023]);
        assert_eq!(register_length_for(255), Some(8));
        assert_eq!(register_length_for(14), None);
    }
}
