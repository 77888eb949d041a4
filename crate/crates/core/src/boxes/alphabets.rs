use crate::error::{Error, Result};

/// Largest dense table (inputs × outputs) this crate will materialize.
pub const DENSE_CAP: u128 = 1 << 24;

/// Input and output alphabet sizes of one interface for a single round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interface {
    pub inputs: usize,
    pub outputs: usize,
}

impl Interface {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs }
    }

    pub fn binary() -> Self {
        Self::new(2, 2)
    }
}

/// Per-round alphabets of the parties plus an optional Eve interface.
///
/// Parties act in every round; Eve is a single interface attached once to the
/// whole n-round box.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabets {
    parties: Vec<Interface>,
    eve: Option<Interface>,
}

impl Alphabets {
    pub fn new(parties: Vec<Interface>, eve: Option<Interface>) -> Result<Self> {
        if parties.is_empty() {
            return Err(Error::Domain("a box needs at least one party".into()));
        }
        let all = parties.iter().chain(eve.iter());
        if all.into_iter().any(|i| i.inputs == 0 || i.outputs == 0) {
            return Err(Error::Domain("alphabet sizes must be >= 1".into()));
        }
        Ok(Self { parties, eve })
    }

    /// A single lumped interface.
    pub fn single(inputs: usize, outputs: usize) -> Self {
        Self::new(vec![Interface::new(inputs, outputs)], None).expect("sizes checked by caller")
    }

    /// Alice and Bob with binary inputs and outputs.
    pub fn chsh() -> Self {
        Self::new(vec![Interface::binary(); 2], None).expect("binary sizes are valid")
    }

    pub fn with_eve(&self, eve: Interface) -> Result<Self> {
        Self::new(self.parties.clone(), Some(eve))
    }

    pub fn without_eve(&self) -> Self {
        Self {
            parties: self.parties.clone(),
            eve: None,
        }
    }

    pub fn parties(&self) -> &[Interface] {
        &self.parties
    }

    pub fn eve(&self) -> Option<Interface> {
        self.eve
    }

    pub fn interface_count(&self) -> usize {
        self.parties.len() + usize::from(self.eve.is_some())
    }

    pub fn is_chsh(&self) -> bool {
        self.parties == [Interface::binary(); 2] && self.eve.is_none()
    }

    /// Size of the lumped single-round input alphabet `X̂`.
    pub fn round_inputs(&self) -> usize {
        self.parties.iter().map(|i| i.inputs).product()
    }

    /// Size of the lumped single-round output alphabet `Â`.
    pub fn round_outputs(&self) -> usize {
        self.parties.iter().map(|i| i.outputs).product()
    }

    /// Number of entries of the dense n-round table, checked against [`DENSE_CAP`].
    pub fn dense_size(&self, n: usize) -> Result<(usize, usize)> {
        let eve = self.eve.unwrap_or(Interface::new(1, 1));
        let ins = (self.round_inputs() as u128)
            .checked_pow(n as u32)
            .map(|v| v * eve.inputs as u128);
        let outs = (self.round_outputs() as u128)
            .checked_pow(n as u32)
            .map(|v| v * eve.outputs as u128);
        match (ins, outs) {
            (Some(i), Some(o)) if i.saturating_mul(o) <= DENSE_CAP => Ok((i as usize, o as usize)),
            (i, o) => Err(Error::SizeCap {
                entries: i
                    .unwrap_or(u128::MAX)
                    .saturating_mul(o.unwrap_or(u128::MAX)),
                cap: DENSE_CAP,
            }),
        }
    }
}

/// Mixed-radix addressing of an n-round dense table.
///
/// Sites are ordered party 0 rounds 1..n, party 1 rounds 1..n, …, then Eve;
/// the first site is the most significant digit of both the input and the
/// output index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub parties: usize,
    in_radix: Vec<usize>,
    out_radix: Vec<usize>,
    in_stride: Vec<usize>,
    out_stride: Vec<usize>,
    pub num_inputs: usize,
    pub num_outputs: usize,
    has_eve: bool,
}

fn strides(radix: &[usize]) -> Vec<usize> {
    let mut s = vec![1; radix.len()];
    for i in (0..radix.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * radix[i + 1];
    }
    s
}

impl Layout {
    pub fn new(alph: &Alphabets, n: usize) -> Result<Self> {
        let (num_inputs, num_outputs) = alph.dense_size(n)?;
        let mut in_radix = Vec::new();
        let mut out_radix = Vec::new();
        for p in alph.parties() {
            for _ in 0..n {
                in_radix.push(p.inputs);
                out_radix.push(p.outputs);
            }
        }
        if let Some(e) = alph.eve() {
            in_radix.push(e.inputs);
            out_radix.push(e.outputs);
        }
        Ok(Self {
            n,
            parties: alph.parties().len(),
            in_stride: strides(&in_radix),
            out_stride: strides(&out_radix),
            in_radix,
            out_radix,
            num_inputs,
            num_outputs,
            has_eve: alph.eve().is_some(),
        })
    }

    pub fn site_count(&self) -> usize {
        self.in_radix.len()
    }

    /// Site index of party `p` in round `i` (0-based).
    pub fn site(&self, p: usize, i: usize) -> usize {
        p * self.n + i
    }

    pub fn eve_site(&self) -> Option<usize> {
        self.has_eve.then(|| self.parties * self.n)
    }

    pub fn in_radix(&self, site: usize) -> usize {
        self.in_radix[site]
    }

    pub fn out_radix(&self, site: usize) -> usize {
        self.out_radix[site]
    }

    pub fn in_digit(&self, x: usize, site: usize) -> usize {
        (x / self.in_stride[site]) % self.in_radix[site]
    }

    pub fn out_digit(&self, a: usize, site: usize) -> usize {
        (a / self.out_stride[site]) % self.out_radix[site]
    }

    pub fn in_stride(&self, site: usize) -> usize {
        self.in_stride[site]
    }

    pub fn out_stride(&self, site: usize) -> usize {
        self.out_stride[site]
    }

    /// Lumped input symbol of round `i`: party digits, party 0 most significant.
    pub fn round_input(&self, x: usize, i: usize) -> usize {
        (0..self.parties).fold(0, |acc, p| {
            let s = self.site(p, i);
            acc * self.in_radix[s] + self.in_digit(x, s)
        })
    }

    pub fn round_output(&self, a: usize, i: usize) -> usize {
        (0..self.parties).fold(0, |acc, p| {
            let s = self.site(p, i);
            acc * self.out_radix[s] + self.out_digit(a, s)
        })
    }

    pub fn round_inputs(&self, x: usize) -> Vec<usize> {
        (0..self.n).map(|i| self.round_input(x, i)).collect()
    }

    pub fn round_outputs(&self, a: usize) -> Vec<usize> {
        (0..self.n).map(|i| self.round_output(a, i)).collect()
    }

    fn encode_rounds(&self, syms: &[usize], radix: &[usize], stride: &[usize]) -> usize {
        let mut idx = 0;
        for (i, &sym) in syms.iter().enumerate() {
            let mut rest = sym;
            for p in (0..self.parties).rev() {
                let s = self.site(p, i);
                idx += (rest % radix[s]) * stride[s];
                rest /= radix[s];
            }
        }
        idx
    }

    /// Input index from lumped round symbols and Eve's input.
    pub fn encode_inputs(&self, syms: &[usize], eve: usize) -> usize {
        let base = self.encode_rounds(syms, &self.in_radix, &self.in_stride);
        base + self.eve_site().map_or(0, |s| eve * self.in_stride[s])
    }

    pub fn encode_outputs(&self, syms: &[usize], eve: usize) -> usize {
        let base = self.encode_rounds(syms, &self.out_radix, &self.out_stride);
        base + self.eve_site().map_or(0, |s| eve * self.out_stride[s])
    }

    pub fn eve_input(&self, x: usize) -> usize {
        self.eve_site().map_or(0, |s| self.in_digit(x, s))
    }

    pub fn eve_output(&self, a: usize) -> usize {
        self.eve_site().map_or(0, |s| self.out_digit(a, s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_symbols_round_trip() {
        let alph = Alphabets::new(
            vec![Interface::new(2, 3), Interface::new(3, 2)],
            Some(Interface::new(2, 2)),
        )
        .unwrap();
        let l = Layout::new(&alph, 2).unwrap();
        assert_eq!(l.num_inputs, 36 * 2);
        for x in 0..l.num_inputs {
            let syms = l.round_inputs(x);
            assert_eq!(l.encode_inputs(&syms, l.eve_input(x)), x);
        }
        for a in 0..l.num_outputs {
            let syms = l.round_outputs(a);
            assert_eq!(l.encode_outputs(&syms, l.eve_output(a)), a);
        }
    }

    #[test]
    fn chsh_round_symbol_is_two_x_plus_y() {
        let l = Layout::new(&Alphabets::chsh(), 1).unwrap();
        // x is Alice's digit (most significant), y is Bob's
        assert_eq!(l.round_input(0b10, 0), 2);
        assert_eq!(l.round_input(0b01, 0), 1);
    }

    #[test]
    fn size_cap() {
        assert!(Alphabets::chsh().dense_size(6).is_ok());
        assert!(matches!(
            Alphabets::chsh().dense_size(7),
            Err(Error::SizeCap { .. })
        ));
    }
}
