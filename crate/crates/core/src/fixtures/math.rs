//! Equal-weight weighted-pool math in 1e18 fixed point. Every intermediate
//! is an integer, so results are reproducible bit for bit.

use ruint::aliases::U512;

use crate::types::{mul_div, narrow, Word, WAD};

/// `floor(x^(1/n))` by Newton iteration.
pub fn nth_root(x: U512, n: u32) -> U512 {
    if x.is_zero() || n == 1 {
        return x;
    }
    let nn = U512::from(n);
    // Start above the root: 2^(ceil(bits/n)).
    let bits = x.bit_len();
    let mut r = U512::from(1u8) << bits.div_ceil(n as usize);
    loop {
        let r_pow = r.pow(U512::from(n - 1));
        let next = ((nn - U512::from(1u8)) * r + x / r_pow) / nn;
        if next >= r {
            return r;
        }
        r = next;
    }
}

/// Weighted geometric mean of WAD-scaled ratios with equal weights.
pub fn geometric_mean(ratios: &[Word]) -> Option<Word> {
    if ratios.is_empty() {
        return None;
    }
    let mut product = U512::from(1u8);
    for r in ratios {
        product = product.checked_mul(U512::from(*r))?;
    }
    narrow(nth_root(product, ratios.len() as u32))
}

/// BPT minted for depositing `deposits` onto a pool holding `balances` with
/// `supply` outstanding. `fee` (WAD) is charged only on the part of each
/// deposit above the pool-wide average ratio, as a single-sided join would be.
pub fn join_mint(balances: &[Word], deposits: &[Word], supply: Word, fee: Word) -> Option<Word> {
    if balances.len() != deposits.len() || balances.is_empty() || balances.iter().any(|b| b.is_zero()) {
        return None;
    }
    if deposits.iter().all(|d| d.is_zero()) {
        return Some(Word::ZERO);
    }
    let n = Word::from(balances.len());
    let mut ratios = Vec::with_capacity(balances.len());
    for (b, d) in balances.iter().zip(deposits) {
        ratios.push(mul_div(*b + *d, WAD, *b)?);
    }
    let mut sum = Word::ZERO;
    for r in &ratios {
        sum = sum.checked_add(*r)?;
    }
    let average = sum / n;
    let mut taxed = Vec::with_capacity(balances.len());
    for ((b, d), r) in balances.iter().zip(deposits).zip(&ratios) {
        let effective = if *r > average && !fee.is_zero() {
            let non_taxable = mul_div(*b, average - WAD, WAD)?;
            let taxable = *d - non_taxable;
            non_taxable + mul_div(taxable, WAD - fee, WAD)?
        } else {
            *d
        };
        taxed.push(mul_div(*b + effective, WAD, *b)?);
    }
    let invariant_ratio = geometric_mean(&taxed)?;
    if invariant_ratio <= WAD {
        return Some(Word::ZERO);
    }
    mul_div(supply, invariant_ratio - WAD, WAD)
}

/// Σ balance_i × rate_i ÷ supply, in ETH per BPT.
pub fn pool_price(balances: &[Word], rates: &[Word], supply: Word) -> Option<Word> {
    if supply.is_zero() || balances.len() != rates.len() {
        return None;
    }
    let mut value = U512::ZERO;
    for (b, r) in balances.iter().zip(rates) {
        value += U512::from(*b) * U512::from(*r);
    }
    narrow(value / U512::from(supply))
}
