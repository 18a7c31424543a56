//! Timestamped binary capture of an emulated link: magic `VECL`, then per
//! packet an f64 arrival/delivery time, a u32 length, and the bytes.

use std::io::{Read, Write};
use std::path::Path;

use super::WireError;

pub const CAPTURE_MAGIC: &[u8; 4] = b"VECL";

pub fn write_capture(path: &Path, packets: &[(f64, Vec<u8>)]) -> Result<(), WireError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(CAPTURE_MAGIC)?;
    for (time, bytes) in packets {
        file.write_all(&time.to_le_bytes())?;
        file.write_all(&(bytes.len() as u32).to_le_bytes())?;
        file.write_all(bytes)?;
    }
    Ok(())
}

pub fn read_capture(path: &Path) -> Result<Vec<(f64, Vec<u8>)>, WireError> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    if data.len() < 4 || &data[..4] != CAPTURE_MAGIC {
        return Err(WireError::CaptureFormat("bad magic".into()));
    }
    let mut out = Vec::new();
    let mut pos = 4;
    while pos < data.len() {
        if pos + 12 > data.len() {
            return Err(WireError::CaptureFormat(format!(
                "truncated packet header at byte {pos}"
            )));
        }
        let time = f64::from_le_bytes(data[pos..pos + 8].try_into().unwrap());
        let len = u32::from_le_bytes(data[pos + 8..pos + 12].try_into().unwrap()) as usize;
        pos += 12;
        if pos + len > data.len() {
            return Err(WireError::CaptureFormat(format!(
                "truncated packet body at byte {pos}"
            )));
        }
        out.push((time, data[pos..pos + len].to_vec()));
        pos += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capture_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("link.vecl");
        let packets = vec![
            (1.5, vec![1, 2, 3]),
            (2.75, vec![]),
            (30.0, vec![0xFF; 100]),
        ];
        write_capture(&path, &packets).unwrap();
        assert_eq!(read_capture(&path).unwrap(), packets);
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.vecl");
        std::fs::write(&path, b"XXXX").unwrap();
        assert!(matches!(
            read_capture(&path),
            Err(WireError::CaptureFormat(_))
        ));
    }

    #[test]
    fn truncated_capture_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.vecl");
        write_capture(&path, &[(1.0, vec![9; 50])]).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 10]).unwrap();
        assert!(matches!(
            read_capture(&path),
            Err(WireError::CaptureFormat(_))
        ));
    }
}
