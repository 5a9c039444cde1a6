//! Binary checkpoint of the actor and critic.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "ORBPPO\0\0"
//! version  u32      1
//! then for the policy network and then the value network:
//!   layers   u32        number of layer sizes L (input, hidden..., output)
//!   dims     L × u32
//!   count    u64        number of parameters
//!   params   count × f64  per layer: weights row-major (out × in), then biases
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::mlp::Mlp;
use super::policy::{PolicyNet, ValueNet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ORBPPO\0\0";
pub const VERSION: u32 = 1;

fn format_error(message: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        message: message.into(),
    }
}

fn write_mlp<W: Write>(w: &mut W, mlp: &Mlp) -> Result<()> {
    w.write_all(&(mlp.dims().len() as u32).to_le_bytes())?;
    for &d in mlp.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&(mlp.num_params() as u64).to_le_bytes())?;
    for p in mlp.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_mlp<R: Read>(r: &mut R) -> Result<Mlp> {
    let layers = read_u32(r)? as usize;
    if !(2..=64).contains(&layers) {
        return Err(format_error(format!("{layers} layer sizes")));
    }
    let dims = (0..layers)
        .map(|_| read_u32(r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let count = u64::from_le_bytes(b) as usize;
    let expected: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if count != expected {
        return Err(format_error(format!("{count} parameters for dims {dims:?}")));
    }
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b)?;
        params.push(f64::from_le_bytes(b));
    }
    Mlp::from_params(dims, params).map_err(|e| format_error(e.to_string()))
}

pub fn write_checkpoint<W: Write>(mut w: W, policy: &PolicyNet, value: &ValueNet) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    write_mlp(&mut w, &policy.mlp)?;
    write_mlp(&mut w, &value.mlp)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(PolicyNet, ValueNet)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(format_error("bad magic"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(format_error(format!("unsupported version {version}")));
    }
    let policy = PolicyNet { mlp: read_mlp(&mut r)? };
    let value = ValueNet { mlp: read_mlp(&mut r)? };
    if value.mlp.output_dim() != 1 || value.mlp.input_dim() != policy.mlp.input_dim() {
        return Err(format_error("value network does not match the policy"));
    }
    Ok((policy, value))
}

pub fn save_checkpoint(path: impl AsRef<Path>, policy: &PolicyNet, value: &ValueNet) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_checkpoint(std::io::BufWriter::new(file), policy, value)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(PolicyNet, ValueNet)> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nets() -> (PolicyNet, ValueNet) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (
            PolicyNet::new(5, &[7, 3], 4, &mut rng).unwrap(),
            ValueNet::new(5, &[6], &mut rng).unwrap(),
        )
    }

    #[test]
    fn round_trip_is_exact() {
        let (p, v) = nets();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &p, &v).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        let (p2, v2) = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(p, p2);
        assert_eq!(v, v2);
    }

    #[test]
    fn rejects_corruption() {
        let (p, v) = nets();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &p, &v).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(bad.as_slice()), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(read_checkpoint(bad.as_slice()), Err(Error::Format { .. })));
        assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    }
}
