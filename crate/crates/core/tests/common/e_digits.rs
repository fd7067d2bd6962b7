use num_bigint::BigUint;

/// `(P, Q)` with `P/Q = Σ_{k=a+1}^{b} a!/k!`.
pub fn split(a: u64, b: u64) -> (BigUint, BigUint) {
    if b - a == 1 {
        return (BigUint::from(1u32), BigUint::from(b));
    }
    let m = (a + b) / 2;
    let (p1, q1) = split(a, m);
    let (p2, q2) = split(m, b);
    (p1 * &q2 + p2, q1 * q2)
}

/// Binary expansion of e starting with the integer part `10`.
pub fn e_bits(count: usize) -> Vec<u8> {
    let frac_bits = count + 64;
    let mut terms = 1u64;
    let mut log2_fact = 0.0f64;
    while log2_fact < frac_bits as f64 + 64.0 {
        terms += 1;
        log2_fact += (terms as f64).log2();
    }
    let (p, q) = split(0, terms);
    // floor(e·2^frac_bits) with e = 1 + P/Q
    let scaled = (BigUint::from(1u32) << frac_bits) + ((p << frac_bits) / q);
    scaled.to_str_radix(2).bytes().take(count).map(|c| c - b'0').collect()
}
