//! Binary codec checkpoints.
//!
//! Layout: 4-byte magic `QTCK`, u32 version, seven u32 dims
//! (n, N, K, h, height, width, classes), then every parameter block of
//! [`CodecParams`] in declaration order as little-endian f64. Integers are
//! little-endian.

use std::path::Path;

use crate::codec::{CodecDims, CodecParams};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"QTCK";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 7 * 4;

pub fn to_bytes(params: &CodecParams) -> Vec<u8> {
    let d = params.dims;
    let count: usize = params.blocks().iter().map(|b| b.len()).sum();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * count);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [d.n, d.latent, d.observables, d.hidden, d.height, d.width, d.classes] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for block in params.blocks() {
        for x in block {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<CodecParams> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Parse { offset: bytes.len(), message: "truncated checkpoint header".into() });
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Parse { offset: 0, message: "not a codec checkpoint".into() });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
    let version = word(0);
    if version != VERSION {
        return Err(Error::Parse { offset: 4, message: format!("unsupported checkpoint version {version}") });
    }
    let dims = CodecDims {
        n: word(1) as usize,
        latent: word(2) as usize,
        observables: word(3) as usize,
        hidden: word(4) as usize,
        height: word(5) as usize,
        width: word(6) as usize,
        classes: word(7) as usize,
    };
    dims.validate().map_err(|e| Error::Parse { offset: 8, message: e.to_string() })?;
    let mut params = CodecParams::zeros(dims);
    let expected: usize = HEADER_LEN + 8 * params.blocks().iter().map(|b| b.len()).sum::<usize>();
    if bytes.len() != expected {
        return Err(Error::Parse {
            offset: bytes.len().min(expected),
            message: format!("checkpoint is {} bytes, dims imply {expected}", bytes.len()),
        });
    }
    let mut offset = HEADER_LEN;
    for block in params.blocks_mut() {
        for x in block.iter_mut() {
            *x = f64::from_le_bytes(bytes[offset..offset + 8].try_into().expect("8 bytes"));
            offset += 8;
        }
    }
    if !params.is_finite() {
        return Err(Error::Parse { offset: HEADER_LEN, message: "non-finite parameter".into() });
    }
    Ok(params)
}

pub fn save(params: &CodecParams, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(params))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<CodecParams> {
    from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CodecParams {
        let dims = CodecDims { height: 4, width: 4, hidden: 6, latent: 9, n: 3, observables: 5, classes: 2 };
        CodecParams::init(dims, 17).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = params();
        let bytes = to_bytes(&p);
        assert_eq!(&bytes[..4], b"QTCK");
        assert_eq!(from_bytes(&bytes).unwrap(), p);
    }

    #[test]
    fn header_layout() {
        let bytes = to_bytes(&params());
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), VERSION);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 9);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 5);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 6);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = to_bytes(&params());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(Error::Parse { offset: 0, .. })));
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(from_bytes(&bytes[..10]).is_err());
        let mut wrong_version = bytes;
        wrong_version[4] = 9;
        assert!(matches!(from_bytes(&wrong_version), Err(Error::Parse { offset: 4, .. })));
    }
}
