//! One-time pad over distilled key bits.
//!
//! Key files hold a 21-byte header followed by the bits packed MSB-first:
//!
//! ```text
//! "OTPK" | version: u8 = 1 | bit length: u64 BE | consumed: u64 BE | packed bits
//! ```
//!
//! Trailing pad bits in the last byte are zero. Encryption and decryption are
//! the same XOR; each use advances the consumed offset and the offset is
//! written back so no bit is ever used twice.

use std::path::Path;

const MAGIC: &[u8; 4] = b"OTPK";
const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 8 + 8;

#[derive(Debug, thiserror::Error)]
pub enum OtpError {
    #[error("insufficient key: message needs {required_bits} bits, {available_bits} remain")]
    InsufficientKey { required_bits: u64, available_bits: u64 },
    #[error("malformed key file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OtpError + '_ {
    move |source| OtpError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A finite bit string with a consumption offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    packed: Vec<u8>,
    len: u64,
    consumed: u64,
}

impl KeyMaterial {
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut packed = vec![0u8; bits.len().div_ceil(8)];
        for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            packed[i / 8] |= 0x80 >> (i % 8);
        }
        KeyMaterial {
            packed,
            len: bits.len() as u64,
            consumed: 0,
        }
    }

    /// Uses the first `len` bits of `packed`, MSB first.
    pub fn from_packed(mut packed: Vec<u8>, len: u64) -> Result<Self, OtpError> {
        let need = len.div_ceil(8) as usize;
        if packed.len() < need {
            return Err(OtpError::Format(format!(
                "{len} bits need {need} bytes, got {}",
                packed.len()
            )));
        }
        packed.truncate(need);
        if !len.is_multiple_of(8) {
            if let Some(last) = packed.last_mut() {
                *last &= 0xffu8 << (8 - len % 8);
            }
        }
        Ok(KeyMaterial {
            packed,
            len,
            consumed: 0,
        })
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn remaining(&self) -> u64 {
        self.len - self.consumed
    }

    pub fn bit(&self, i: u64) -> bool {
        assert!(i < self.len, "bit {i} out of range for {} bits", self.len);
        self.packed[(i / 8) as usize] & (0x80 >> (i % 8)) != 0
    }

    /// Eight key bits starting at bit `offset`, first bit in the MSB.
    fn byte_at(&self, offset: u64) -> u8 {
        let idx = (offset / 8) as usize;
        let shift = (offset % 8) as u32;
        if shift == 0 {
            return self.packed[idx];
        }
        let hi = self.packed[idx] << shift;
        let lo = self.packed.get(idx + 1).copied().unwrap_or(0) >> (8 - shift);
        hi | lo
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.packed.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.len.to_be_bytes());
        out.extend_from_slice(&self.consumed.to_be_bytes());
        out.extend_from_slice(&self.packed);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, OtpError> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(OtpError::Format("missing OTPK header".into()));
        }
        if bytes[4] != VERSION {
            return Err(OtpError::Format(format!("unsupported version {}", bytes[4])));
        }
        let len = u64::from_be_bytes(bytes[5..13].try_into().unwrap());
        let consumed = u64::from_be_bytes(bytes[13..21].try_into().unwrap());
        if consumed > len {
            return Err(OtpError::Format(format!("offset {consumed} beyond {len} bits")));
        }
        let body = &bytes[HEADER_LEN..];
        if body.len() as u64 != len.div_ceil(8) {
            return Err(OtpError::Format(format!(
                "{len} bits need {} bytes, got {}",
                len.div_ceil(8),
                body.len()
            )));
        }
        let mut key = Self::from_packed(body.to_vec(), len)?;
        key.consumed = consumed;
        Ok(key)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OtpError> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(io_err(path))?)
    }

    /// Writes via a temporary file and rename.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), OtpError> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(io_err(&tmp))?;
        std::fs::rename(&tmp, path).map_err(io_err(path))
    }
}

/// XORs `message` with key bits starting at `offset`, without consuming them.
pub fn otp_xor_at(message: &[u8], key: &KeyMaterial, offset: u64) -> Result<Vec<u8>, OtpError> {
    let required_bits = 8 * message.len() as u64;
    let available_bits = key.len.saturating_sub(offset);
    if required_bits > available_bits {
        return Err(OtpError::InsufficientKey {
            required_bits,
            available_bits,
        });
    }
    Ok(message
        .iter()
        .enumerate()
        .map(|(i, m)| m ^ key.byte_at(offset + 8 * i as u64))
        .collect())
}

/// XORs `message` with the next unused key bits and marks them consumed.
/// On refusal the key is left untouched.
pub fn otp_xor(message: &[u8], key: &mut KeyMaterial) -> Result<Vec<u8>, OtpError> {
    let out = otp_xor_at(message, key, key.consumed)?;
    key.consumed += 8 * message.len() as u64;
    Ok(out)
}

/// Applies the pad to `input`, writes `output`, then persists the advanced
/// offset to `key_path`. Returns the number of key bits used.
pub fn apply_file(key_path: &Path, input: &Path, output: &Path) -> Result<u64, OtpError> {
    let mut key = KeyMaterial::load(key_path)?;
    let message = std::fs::read(input).map_err(io_err(input))?;
    let out = otp_xor(&message, &mut key)?;
    std::fs::write(output, out).map_err(io_err(output))?;
    key.save(key_path)?;
    Ok(8 * message.len() as u64)
}

pub fn encrypt_file(key_path: &Path, plaintext: &Path, ciphertext: &Path) -> Result<u64, OtpError> {
    apply_file(key_path, plaintext, ciphertext)
}

pub fn decrypt_file(key_path: &Path, ciphertext: &Path, plaintext: &Path) -> Result<u64, OtpError> {
    apply_file(key_path, ciphertext, plaintext)
}
