//! Binary tensor file format for recorded data cubes.
//!
//! Layout (little-endian): magic `LSET`, u32 version = 1, u32 D,
//! u32 dims[D], then N interleaved (real, imag) f32 pairs in the tensor's
//! canonical linear order (first dimension fastest).

use std::io::{Read, Write};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::ComplexTensor;

const MAGIC: &[u8; 4] = b"LSET";
const VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Writes a tensor in the cube file format (values narrowed to f32).
pub fn write_tensor<T: Scalar, W: Write>(w: &mut W, tensor: &ComplexTensor<T>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tensor.ndim() as u32).to_le_bytes())?;
    for &d in tensor.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for z in tensor.data() {
        let re = z.re.to_f32().unwrap_or(f32::NAN);
        let im = z.im.to_f32().unwrap_or(f32::NAN);
        w.write_all(&re.to_le_bytes())?;
        w.write_all(&im.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a tensor from the cube file format.
pub fn read_tensor<T: Scalar, R: Read>(r: &mut R) -> Result<ComplexTensor<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"LSET\"",
            magic
        )));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let ndim = read_u32(r)? as usize;
    if ndim == 0 || ndim > 8 {
        return Err(Error::Format(format!("implausible dimension count {ndim}")));
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let d = read_u32(r)? as usize;
        if d == 0 {
            return Err(Error::Format("zero-sized dimension".into()));
        }
        dims.push(d);
    }
    let n: usize = dims.iter().product();
    if n > (1 << 28) {
        return Err(Error::Format(format!("tensor too large ({n} elements)")));
    }
    let mut data = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        let re = f32::from_le_bytes(buf[0..4].try_into().unwrap());
        let im = f32::from_le_bytes(buf[4..8].try_into().unwrap());
        data.push(Complex::new(
            T::from_f64c(re as f64),
            T::from_f64c(im as f64),
        ));
    }
    ComplexTensor::from_data(&dims, data)
}

/// Writes a tensor to a file path.
pub fn save_tensor<T: Scalar>(path: &std::path::Path, tensor: &ComplexTensor<T>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_tensor(&mut f, tensor)
}

/// Reads a tensor from a file path.
pub fn load_tensor<T: Scalar>(path: &std::path::Path) -> Result<ComplexTensor<T>> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_tensor(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn roundtrip_preserves_layout_and_values() {
        let dims = [3usize, 4, 2];
        let data: Vec<Complex64> = (0..24)
            .map(|i| Complex64::new(i as f64 * 0.5, -(i as f64) * 0.25))
            .collect();
        let t = ComplexTensor::from_data(&dims, data).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(&buf[0..4], b"LSET");
        // header: magic + version + D + dims
        assert_eq!(buf.len(), 4 + 4 + 4 + 12 + 24 * 8);
        let back: ComplexTensor<f64> = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(back.dims(), t.dims());
        for (a, b) in back.data().iter().zip(t.data()) {
            assert!((a - b).norm() < 1e-6); // f32 narrowing
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut buf = b"XSET".to_vec();
        buf.extend_from_slice(&1u32.to_le_bytes());
        assert!(matches!(
            read_tensor::<f64, _>(&mut buf.as_slice()),
            Err(Error::Format(_))
        ));

        let t = ComplexTensor::from_data(&[4], vec![Complex64::new(1.0, 0.0); 4]).unwrap();
        let mut good = Vec::new();
        write_tensor(&mut good, &t).unwrap();
        good.truncate(good.len() - 3);
        assert!(read_tensor::<f64, _>(&mut good.as_slice()).is_err());
    }
}
