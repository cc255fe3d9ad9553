use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::scalar::Real;

/// Named parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    /// Glorot-uniform initialisation with the given fan-in/fan-out.
    pub fn glorot(
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            data: (0..n)
                .map(|_| T::lit(rng.random_range(-bound..bound)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Ordered set of tensors updated together.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamGroup<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Real> ParamGroup<T> {
    pub fn push(&mut self, t: Tensor<T>) -> usize {
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Places every tensor on the tape as a leaf.
    pub fn bind(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.leaf(t.data.clone())).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn fill(&mut self, v: T) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|x| *x = v);
        }
    }

    /// Concatenated parameter values.
    pub fn flatten(&self) -> Vec<T> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    /// Inverse of [`ParamGroup::flatten`].
    pub fn assign(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut off = 0;
        for t in &mut self.tensors {
            let n = t.len();
            t.data.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }
}

/// FNV-1a over the bit patterns of a sequence of scalars.
pub fn fingerprint<'a, T: Real>(values: impl IntoIterator<Item = &'a T>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.as_f64().to_bits().to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flatten_assign_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut g = ParamGroup::<f64>::default();
        g.push(Tensor::glorot("w", &[3, 4], 4, 3, &mut rng));
        g.push(Tensor::zeros("b", &[3]));
        let flat = g.flatten();
        assert_eq!(flat.len(), 15);
        let before = g.clone();
        g.fill(1.0);
        assert_ne!(g, before);
        g.assign(&flat);
        assert_eq!(g, before);
    }

    #[test]
    fn fingerprint_detects_single_bit_changes() {
        let a = [1.0f64, 2.0, 3.0];
        let mut b = a;
        b[1] = f64::from_bits(b[1].to_bits() ^ 1);
        assert_ne!(fingerprint(&a), fingerprint(&b));
        assert_eq!(fingerprint(&a), fingerprint(&[1.0, 2.0, 3.0]));
    }
}
