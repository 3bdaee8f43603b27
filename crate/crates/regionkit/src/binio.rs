//! Little-endian reading helpers shared by the container formats.

pub struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

type R<T> = Result<T, String>;

impl<'a> Cursor<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> R<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            format!("truncated: need {n} bytes at offset {}, file has {}", self.pos, self.bytes.len())
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }
}

pub fn read_u32(c: &mut Cursor) -> R<u32> {
    Ok(u32::from_le_bytes(c.take(4)?.try_into().unwrap()))
}

pub fn read_u64(c: &mut Cursor) -> R<u64> {
    Ok(u64::from_le_bytes(c.take(8)?.try_into().unwrap()))
}

pub fn read_string(c: &mut Cursor) -> R<String> {
    let n = read_u32(c)? as usize;
    String::from_utf8(c.take(n)?.to_vec()).map_err(|_| "name is not valid UTF-8".to_string())
}

pub fn read_f32s(c: &mut Cursor, n: u64) -> R<Vec<f32>> {
    let bytes = n
        .checked_mul(4)
        .and_then(|b| usize::try_from(b).ok())
        .ok_or("payload size overflows")?;
    Ok(c.take(bytes)?
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect())
}
