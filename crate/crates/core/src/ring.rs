//! Arithmetic in Z_{2^w} for w up to 128, held in a `u128` container.
//!
//! Signed values use the two's-complement reading of the low `w` bits.
//! Fixed-point values carry `frac` fractional bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingConfig {
    width: u32,
    frac: u32,
}

impl RingConfig {
    pub fn new(width: u32, frac: u32) -> Result<Self> {
        if width == 0 || width > 128 {
            return Err(Error::config(format!("ring width {width} not in 1..=128")));
        }
        if frac >= width {
            return Err(Error::config(format!(
                "fractional bits {frac} must be below ring width {width}"
            )));
        }
        Ok(RingConfig { width, frac })
    }

    /// Ring without fractional bits.
    pub fn integer(width: u32) -> Result<Self> {
        Self::new(width, 0)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn frac(&self) -> u32 {
        self.frac
    }

    pub fn with_frac(&self, frac: u32) -> Result<Self> {
        Self::new(self.width, frac)
    }

    #[inline]
    pub fn mask(&self) -> u128 {
        mask(self.width)
    }

    #[inline]
    pub fn reduce(&self, x: u128) -> u128 {
        x & self.mask()
    }

    #[inline]
    pub fn add(&self, a: u128, b: u128) -> u128 {
        a.wrapping_add(b) & self.mask()
    }

    #[inline]
    pub fn sub(&self, a: u128, b: u128) -> u128 {
        a.wrapping_sub(b) & self.mask()
    }

    #[inline]
    pub fn mul(&self, a: u128, b: u128) -> u128 {
        a.wrapping_mul(b) & self.mask()
    }

    #[inline]
    pub fn neg(&self, a: u128) -> u128 {
        a.wrapping_neg() & self.mask()
    }

    /// 2^e reduced into the ring.
    #[inline]
    pub fn pow2(&self, e: u32) -> u128 {
        if e >= 128 {
            0
        } else {
            (1u128 << e) & self.mask()
        }
    }

    #[inline]
    pub fn msb(&self, a: u128) -> u128 {
        (a >> (self.width - 1)) & 1
    }

    /// Two's-complement signed value of the low `width` bits.
    #[inline]
    pub fn to_signed(&self, a: u128) -> i128 {
        let a = self.reduce(a);
        if self.width == 128 {
            a as i128
        } else if self.msb(a) == 1 {
            (a as i128) - (1i128 << self.width)
        } else {
            a as i128
        }
    }

    #[inline]
    pub fn from_signed(&self, v: i128) -> u128 {
        (v as u128) & self.mask()
    }

    pub fn element(&self, value: u128) -> RingElement {
        RingElement {
            value: self.reduce(value),
            ring: *self,
        }
    }

    /// Smallest signed value, used as the "minus infinity" sentinel.
    pub fn min_signed(&self) -> u128 {
        self.pow2(self.width - 1)
    }

    /// Bytes per serialized element.
    pub fn byte_len(&self) -> usize {
        self.width.div_ceil(8) as usize
    }
}

#[inline]
pub fn mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingElement {
    value: u128,
    ring: RingConfig,
}

impl RingElement {
    pub fn value(&self) -> u128 {
        self.value
    }

    pub fn ring(&self) -> RingConfig {
        self.ring
    }

    pub fn signed(&self) -> i128 {
        self.ring.to_signed(self.value)
    }

    fn same_ring(&self, other: &RingElement) -> Result<RingConfig> {
        if self.ring.width != other.ring.width {
            return Err(Error::RingMismatch(self.ring.width, other.ring.width));
        }
        Ok(self.ring)
    }
}

pub fn ring_add(a: RingElement, b: RingElement) -> Result<RingElement> {
    let r = a.same_ring(&b)?;
    Ok(r.element(r.add(a.value, b.value)))
}

pub fn ring_sub(a: RingElement, b: RingElement) -> Result<RingElement> {
    let r = a.same_ring(&b)?;
    Ok(r.element(r.sub(a.value, b.value)))
}

pub fn ring_mul(a: RingElement, b: RingElement) -> Result<RingElement> {
    let r = a.same_ring(&b)?;
    Ok(r.element(r.mul(a.value, b.value)))
}

/// Encodes `x` as round(x * 2^f).
pub fn fx_encode(x: f64, ring: RingConfig) -> Result<RingElement> {
    if !x.is_finite() {
        return Err(Error::range(format!("{x} is not finite")));
    }
    let scaled = (x * 2f64.powi(ring.frac as i32)).round();
    let bound = 2f64.powi(ring.width as i32 - 1);
    if scaled >= bound || scaled < -bound {
        return Err(Error::range(format!(
            "{x} does not fit a {}-bit ring with {} fractional bits",
            ring.width, ring.frac
        )));
    }
    Ok(ring.element(ring.from_signed(scaled as i128)))
}

pub fn fx_decode(e: RingElement) -> f64 {
    e.signed() as f64 / 2f64.powi(e.ring.frac as i32)
}

/// Local reduction mod 2^{target width}; keeps the low bits.
pub fn downcast(e: RingElement, target: RingConfig) -> Result<RingElement> {
    if target.width > e.ring.width {
        return Err(Error::config(format!(
            "cannot downcast {}-bit element to {} bits",
            e.ring.width, target.width
        )));
    }
    Ok(target.element(e.value))
}

/// Appends packed little-endian elements, no length prefix.
pub fn write_elements(out: &mut Vec<u8>, values: &[u128], ring: RingConfig) {
    let nb = ring.byte_len();
    out.reserve(values.len() * nb);
    for v in values {
        out.extend_from_slice(&ring.reduce(*v).to_le_bytes()[..nb]);
    }
}

/// Reads `n` packed elements from the front of `bytes`.
pub fn read_elements(bytes: &[u8], n: usize, ring: RingConfig) -> Result<Vec<u128>> {
    let nb = ring.byte_len();
    if bytes.len() < n * nb {
        return Err(Error::Decode(format!(
            "need {} bytes for {n} elements, have {}",
            n * nb,
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    for chunk in bytes[..n * nb].chunks_exact(nb) {
        let mut buf = [0u8; 16];
        buf[..nb].copy_from_slice(chunk);
        let v = u128::from_le_bytes(buf);
        if v & !ring.mask() != 0 {
            return Err(Error::Decode(format!(
                "element exceeds {} bits",
                ring.width
            )));
        }
        out.push(v);
    }
    Ok(out)
}

/// Length-prefixed vector: 4-byte little-endian count, then packed elements.
pub fn write_vec(out: &mut Vec<u8>, values: &[u128], ring: RingConfig) -> Result<()> {
    let n = u32::try_from(values.len())
        .map_err(|_| Error::range("vector longer than 2^32 elements"))?;
    out.extend_from_slice(&n.to_le_bytes());
    write_elements(out, values, ring);
    Ok(())
}

/// Inverse of [`write_vec`]. Returns the values and the number of bytes consumed.
pub fn read_vec(bytes: &[u8], ring: RingConfig) -> Result<(Vec<u128>, usize)> {
    if bytes.len() < 4 {
        return Err(Error::Decode("truncated length prefix".into()));
    }
    let n = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    let vals = read_elements(&bytes[4..], n, ring)?;
    Ok((vals, 4 + n * ring.byte_len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_like_the_spec_examples() {
        let r = RingConfig::integer(32).unwrap();
        let a = r.element(0xFFFF_FFFF);
        assert_eq!(ring_add(a, r.element(1)).unwrap().value(), 0);
        assert_eq!(ring_sub(r.element(0), r.element(1)).unwrap().value(), 0xFFFF_FFFF);
        let f = r.with_frac(16).unwrap();
        assert_eq!(fx_encode(-1.5, f).unwrap().value(), 0xFFFE_8000);
    }

    #[test]
    fn width_128_uses_the_whole_container() {
        let r = RingConfig::integer(128).unwrap();
        assert_eq!(r.to_signed(u128::MAX), -1);
        assert_eq!(r.add(u128::MAX, 2), 1);
        assert_eq!(r.min_signed(), 1u128 << 127);
    }

    #[test]
    fn rejects_mismatched_rings() {
        let a = RingConfig::integer(32).unwrap().element(1);
        let b = RingConfig::integer(128).unwrap().element(1);
        assert!(matches!(ring_add(a, b), Err(Error::RingMismatch(32, 128))));
    }

    #[test]
    fn fx_encode_range_check() {
        let r = RingConfig::new(16, 8).unwrap();
        assert!(fx_encode(127.99, r).is_ok());
        assert!(fx_encode(128.0, r).is_err());
        assert!(fx_encode(-128.0, r).is_ok());
        assert!(fx_encode(f64::NAN, r).is_err());
    }

    #[test]
    fn downcast_keeps_low_bits() {
        let l = RingConfig::integer(128).unwrap();
        let k = RingConfig::integer(32).unwrap();
        let e = l.element((7u128 << 40) | 0x1234);
        assert_eq!(downcast(e, k).unwrap().value(), 0x1234);
        assert!(downcast(k.element(1), l).is_err());
    }

    #[test]
    fn vec_roundtrip_and_decode_errors() {
        let r = RingConfig::integer(12).unwrap();
        let mut buf = Vec::new();
        write_vec(&mut buf, &[0, 1, 0xFFF, 0x800], r).unwrap();
        assert_eq!(buf.len(), 4 + 4 * 2);
        let (v, used) = read_vec(&buf, r).unwrap();
        assert_eq!(v, vec![0, 1, 0xFFF, 0x800]);
        assert_eq!(used, buf.len());
        assert!(read_vec(&buf[..7], r).is_err());
        let mut bad = buf.clone();
        bad[5] = 0xF0;
        assert!(read_vec(&bad, r).is_err());
    }
}
