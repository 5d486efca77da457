use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Architecture description. Conv nets take one square grayscale channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NetSpec {
    /// Fully connected layers of the given widths (input first, output last)
    /// with ReLU between them.
    Mlp { widths: Vec<usize> },
    /// `blocks` x (3x3 same-padded conv with `filters` outputs, ReLU, 2x2
    /// max-pool), then a linear map to `embedding_dim`.
    Conv { input_size: usize, blocks: usize, filters: usize, embedding_dim: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

impl NetSpec {
    pub fn mlp(widths: &[usize]) -> Self {
        NetSpec::Mlp { widths: widths.to_vec() }
    }

    pub fn conv(input_size: usize, blocks: usize, filters: usize, embedding_dim: usize) -> Self {
        NetSpec::Conv { input_size, blocks, filters, embedding_dim }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NetSpec::Mlp { widths } => {
                if widths.len() < 2 {
                    return Err(Error::invalid("widths", "need at least input and output width"));
                }
                if widths.contains(&0) {
                    return Err(Error::invalid("widths", "widths must be positive"));
                }
            }
            NetSpec::Conv { input_size, blocks, filters, embedding_dim } => {
                if *blocks == 0 || *filters == 0 || *embedding_dim == 0 || *input_size == 0 {
                    return Err(Error::invalid("conv", "sizes must be positive"));
                }
                if *blocks >= usize::BITS as usize || input_size % (1usize << blocks) != 0 {
                    return Err(Error::invalid(
                        "input_size",
                        format!("{input_size} is not divisible by 2^{blocks}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        match self {
            NetSpec::Mlp { widths } => widths[0],
            NetSpec::Conv { input_size, .. } => input_size * input_size,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            NetSpec::Mlp { widths } => *widths.last().expect("validated"),
            NetSpec::Conv { embedding_dim, .. } => *embedding_dim,
        }
    }

    /// Weights are stored row-major: dense `[out, in]`, conv
    /// `[filters, in_channels, 3, 3]`.
    pub fn layout(&self) -> Vec<ParamBlock> {
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>| {
            let b = ParamBlock { name, offset, shape };
            offset += b.len();
            blocks.push(b);
        };
        match self {
            NetSpec::Mlp { widths } => {
                for (i, w) in widths.windows(2).enumerate() {
                    push(format!("dense{i}.weight"), vec![w[1], w[0]]);
                    push(format!("dense{i}.bias"), vec![w[1]]);
                }
            }
            NetSpec::Conv { input_size, blocks: n, filters, embedding_dim } => {
                let mut channels = 1;
                for b in 0..*n {
                    push(format!("conv{b}.weight"), vec![*filters, channels, 3, 3]);
                    push(format!("conv{b}.bias"), vec![*filters]);
                    channels = *filters;
                }
                let side = input_size >> n;
                push("head.weight".into(), vec![*embedding_dim, filters * side * side]);
                push("head.bias".into(), vec![*embedding_dim]);
            }
        }
        blocks
    }

    pub fn param_count(&self) -> usize {
        self.layout().iter().map(ParamBlock::len).sum()
    }

    /// First 8 bytes (little endian) of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_vec(self).expect("spec serializes");
        let digest = Sha256::digest(&json);
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_param_count_matches_formula() {
        let spec = NetSpec::conv(128, 6, 64, 256);
        spec.validate().unwrap();
        let (f, b) = (64, 6);
        let side = 128 >> b;
        let expected = (f * 9 + f) + (b - 1) * (f * f * 9 + f) + 256 * f * side * side + 256;
        assert_eq!(spec.param_count(), expected);
    }

    #[test]
    fn mlp_layout() {
        let spec = NetSpec::mlp(&[2, 32, 1]);
        let l = spec.layout();
        assert_eq!(l.len(), 4);
        assert_eq!(l[2].offset, 2 * 32 + 32);
        assert_eq!(spec.param_count(), 2 * 32 + 32 + 32 + 1);
    }

    #[test]
    fn validation() {
        assert!(NetSpec::mlp(&[3]).validate().is_err());
        assert!(NetSpec::mlp(&[3, 0, 1]).validate().is_err());
        assert!(NetSpec::conv(30, 2, 4, 8).validate().is_err());
        assert!(NetSpec::conv(32, 2, 4, 8).validate().is_ok());
    }

    #[test]
    fn json_shape_and_hash() {
        let spec = NetSpec::conv(64, 4, 8, 32);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"conv","input_size":64,"blocks":4,"filters":8,"embedding_dim":32}"#);
        assert_eq!(serde_json::from_str::<NetSpec>(&json).unwrap(), spec);
        assert_ne!(spec.hash(), NetSpec::conv(64, 4, 8, 16).hash());
        assert!(serde_json::from_str::<NetSpec>(r#"{"kind":"mlp","widths":[1,1],"depth":2}"#).is_err());
    }
}
