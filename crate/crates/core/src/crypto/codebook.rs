use super::CryptoError;
use num_bigint::BigUint;
use num_traits::One;

/// Maps ECG node positions to elements of the multiplicative plaintext group.
///
/// Node `i` maps to `(i + 4)^2`, the empty parent to `9`. Squares are always in
/// the quadratic-residue subgroup, and as long as `(i + 4)^2 < p` decoding is
/// an integer square root. The membership flags `2` and `2^{-1}` never collide
/// with a code because neither is a perfect square below `p` in this range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeCodebook {
    p: BigUint,
    max_nodes: usize,
}

impl NodeCodebook {
    pub fn new(p: &BigUint) -> Self {
        // Keep codes well inside the group.
        let root = p.sqrt();
        let max_nodes = usize::try_from(root.bits().min(62))
            .map(|b| (1usize << (b - 1)).saturating_sub(4))
            .unwrap_or(0);
        Self { p: p.clone(), max_nodes }
    }

    pub fn max_nodes(&self) -> usize {
        self.max_nodes
    }

    /// `2`, the "not in tree" flag.
    pub fn two(&self) -> BigUint {
        BigUint::from(2u8)
    }

    /// `2^{-1} mod p`, the "in tree" flag.
    pub fn half(&self) -> BigUint {
        (&self.p + 1u8) >> 1
    }

    pub fn one(&self) -> BigUint {
        BigUint::one()
    }

    pub fn null_parent(&self) -> BigUint {
        BigUint::from(9u8)
    }

    pub fn encode(&self, node: usize) -> Result<BigUint, CryptoError> {
        if node >= self.max_nodes {
            return Err(CryptoError::Codebook(format!("node {node} exceeds codebook capacity")));
        }
        let s = BigUint::from(node + 4);
        Ok(&s * &s)
    }

    pub fn encode_parent(&self, parent: Option<usize>) -> Result<BigUint, CryptoError> {
        match parent {
            Some(n) => self.encode(n),
            None => Ok(self.null_parent()),
        }
    }

    /// Inverse of [`encode_parent`](Self::encode_parent).
    pub fn decode(&self, elem: &BigUint) -> Result<Option<usize>, CryptoError> {
        if elem == &self.null_parent() {
            return Ok(None);
        }
        let s = elem.sqrt();
        if &(&s * &s) != elem {
            return Err(CryptoError::Codebook("element is not a node code".into()));
        }
        let s = usize::try_from(&s)
            .ok()
            .and_then(|s| s.checked_sub(4))
            .filter(|&i| i < self.max_nodes);
        s.map(Some).ok_or_else(|| CryptoError::Codebook("element is not a node code".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip_and_avoid_flags() {
        let cb = NodeCodebook::new(&BigUint::from(super::super::transparent::MUL_PRIME));
        assert!(cb.max_nodes() > 1_000_000);
        for i in 0..2000 {
            let e = cb.encode(i).unwrap();
            assert_eq!(cb.decode(&e).unwrap(), Some(i));
            assert_ne!(e, cb.two());
            assert_ne!(e, cb.half());
            assert_ne!(e, cb.null_parent());
        }
        assert_eq!(cb.decode(&cb.null_parent()).unwrap(), None);
        assert!(cb.decode(&cb.two()).is_err());
        assert!(cb.decode(&cb.half()).is_err());
        assert!(cb.decode(&BigUint::from(4u8)).is_err());
        assert!(cb.decode(&BigUint::from(15u8)).is_err());
    }
}
