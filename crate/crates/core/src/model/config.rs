use serde::{Deserialize, Serialize};

use crate::corpus::DEFAULT_MAX_SPAN_WIDTH;
use crate::error::{Error, Result};

/// Shape and regularization of the encoder and its classifier heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    pub ff: usize,
    /// Longest input sequence, counting the leading `[CLS]` or domain token.
    pub max_len: usize,
    pub vocab_size: usize,
    /// Rows of the span-size embedding table; also the widest enumerated span.
    pub max_span_width: usize,
    pub size_dim: usize,
    pub dropout: f64,
}

impl EncoderConfig {
    /// Desk-scale default: 2 layers, 2 heads, hidden size 64.
    pub fn desk(vocab_size: usize) -> Self {
        EncoderConfig {
            layers: 2,
            heads: 2,
            hidden: 64,
            ff: 128,
            max_len: 128,
            vocab_size,
            max_span_width: DEFAULT_MAX_SPAN_WIDTH,
            size_dim: 16,
            dropout: 0.1,
        }
    }

    /// BERT-base geometry: 12 layers, 12 heads, length 512.
    pub fn full() -> Self {
        EncoderConfig {
            layers: 12,
            heads: 12,
            hidden: 768,
            ff: 3072,
            max_len: 512,
            vocab_size: 28996,
            max_span_width: DEFAULT_MAX_SPAN_WIDTH,
            size_dim: 25,
            dropout: 0.1,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    /// Width of a span representation: max-pooled tokens, context, size.
    pub fn span_dim(&self) -> usize {
        2 * self.hidden + self.size_dim
    }

    /// Width of a pair representation: two spans plus the pooled gap.
    pub fn pair_dim(&self) -> usize {
        2 * self.span_dim() + self.hidden
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.layers == 0 || self.heads == 0 || self.hidden == 0 || self.ff == 0 {
            return fail("layers, heads, hidden and ff must be positive".into());
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return fail(format!("hidden size {} is not divisible by {} heads", self.hidden, self.heads));
        }
        if self.max_len < 2 || self.vocab_size == 0 || self.max_span_width == 0 {
            return fail("max_len, vocab_size and max_span_width must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        EncoderConfig::desk(500).validate().unwrap();
        let full = EncoderConfig::full();
        full.validate().unwrap();
        assert_eq!((full.layers, full.heads, full.max_len), (12, 12, 512));
        assert_eq!(EncoderConfig::desk(10).span_dim(), 2 * 64 + 16);
    }

    #[test]
    fn rejects_indivisible_heads() {
        let mut c = EncoderConfig::desk(10);
        c.heads = 3;
        assert!(c.validate().is_err());
    }
}
