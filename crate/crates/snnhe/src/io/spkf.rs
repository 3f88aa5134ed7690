//! SPKF v1 frame files.
//!
//! ```text
//! SPKF v1 <T> <c> <h> <w> <count>\n
//! count·T·c·h·w little-endian f32, sample-major then timestep then c,h,w
//! count u8 labels
//! ```

use snnhe_core::layers::Tensor;
use snnhe_core::Result;

use super::Sample;
use crate::error::format_err;

/// Decoded SPKF contents; values kept as `f32` so rewriting is bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Spkf {
    pub timesteps: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    /// `count·T·c·h·w` values.
    pub values: Vec<f32>,
    pub labels: Vec<u8>,
}

impl Spkf {
    pub fn count(&self) -> usize {
        self.labels.len()
    }

    fn frame_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn from_samples(samples: &[Sample]) -> Result<Spkf> {
        let first = samples
            .first()
            .and_then(|s| s.frames.first())
            .ok_or_else(|| format_err("SPKF needs at least one sample with one frame"))?;
        let (c, h, w) = first.shape();
        let timesteps = samples[0].frames.len();
        let mut values = Vec::with_capacity(samples.len() * timesteps * c * h * w);
        let mut labels = Vec::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if s.frames.len() != timesteps || s.frames.iter().any(|f| f.shape() != (c, h, w)) {
                return Err(format_err(format!("sample {i} differs in shape from sample 0")));
            }
            let label = s.label.unwrap_or(0);
            labels.push(u8::try_from(label).map_err(|_| format_err(format!("label {label} exceeds a byte")))?);
            values.extend(s.frames.iter().flat_map(|f| f.data.iter().map(|&v| v as f32)));
        }
        Ok(Spkf { timesteps, c, h, w, values, labels })
    }

    pub fn samples(&self) -> Vec<Sample> {
        let f = self.frame_len();
        self.values
            .chunks_exact(self.timesteps * f)
            .zip(&self.labels)
            .map(|(s, &l)| Sample {
                frames: s
                    .chunks_exact(f)
                    .map(|x| Tensor {
                        c: self.c,
                        h: self.h,
                        w: self.w,
                        data: x.iter().map(|&v| f64::from(v)).collect(),
                    })
                    .collect(),
                label: Some(usize::from(l)),
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!(
            "SPKF v1 {} {} {} {} {}\n",
            self.timesteps,
            self.c,
            self.h,
            self.w,
            self.count()
        )
        .into_bytes();
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.labels);
        out
    }
}

pub fn parse(bytes: &[u8]) -> Result<Spkf> {
    let nl = bytes
        .iter()
        .take(256)
        .position(|&b| b == b'\n')
        .ok_or_else(|| format_err("SPKF header line missing"))?;
    let line = std::str::from_utf8(&bytes[..nl]).map_err(|_| format_err("SPKF header is not ASCII"))?;
    let fields: Vec<&str> = line.split_ascii_whitespace().collect();
    if fields.len() != 7 || fields[0] != "SPKF" || fields[1] != "v1" {
        return Err(format_err(format!("bad SPKF header `{line}`")));
    }
    let nums = fields[2..]
        .iter()
        .map(|f| f.parse::<usize>().map_err(|_| format_err(format!("bad SPKF header field `{f}`"))))
        .collect::<Result<Vec<_>>>()?;
    let [timesteps, c, h, w, count] = nums[..] else { unreachable!() };
    if timesteps == 0 || c == 0 || h == 0 || w == 0 {
        return Err(format_err(format!("SPKF header `{line}` has a zero dimension")));
    }
    let n = [timesteps, c, h, w, count]
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| format_err("SPKF header dimensions overflow"))?;
    let body = &bytes[nl + 1..];
    if Some(body.len()) != n.checked_mul(4).and_then(|b| b.checked_add(count)) {
        return Err(format_err(format!(
            "SPKF body has {} bytes, header declares {} floats and {count} labels",
            body.len(),
            n
        )));
    }
    let (floats, labels) = body.split_at(4 * n);
    Ok(Spkf {
        timesteps,
        c,
        h,
        w,
        values: floats
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect(),
        labels: labels.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_nmnist_sample() {
        let mut b = b"SPKF v1 5 2 36 36 1\n".to_vec();
        b.extend(vec![0u8; 5 * 2 * 36 * 36 * 4]);
        b.push(3);
        let f = parse(&b).unwrap();
        let s = f.samples();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].frames.len(), 5);
        assert_eq!(s[0].frames[0].shape(), (2, 36, 36));
        assert!(s[0].frames.iter().all(|t| t.data.iter().all(|&v| v == 0.0)));
        assert_eq!(s[0].label, Some(3));
    }

    #[test]
    fn dvs_header_accepted() {
        let mut b = b"SPKF v1 5 2 32 32 0\n".to_vec();
        assert_eq!(parse(&b).unwrap().count(), 0);
        b.push(0);
        assert!(parse(&b).is_err());
    }

    #[test]
    fn rejects_size_mismatch_and_bad_headers() {
        let mut b = b"SPKF v1 1 1 1 2 1\n".to_vec();
        b.extend([0u8; 8]);
        assert!(parse(&b).is_err());
        b.push(1);
        assert!(parse(&b).is_ok());
        for h in ["SPKF v2 1 1 1 1 1\n", "SPKF v1 1 1 1 1\n", "SPKF v1 0 1 1 1 1\n", "SPKF v1 a 1 1 1 1\n"] {
            assert!(parse(h.as_bytes()).is_err(), "{h}");
        }
        assert!(parse(b"no newline").is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            t in 1usize..4, c in 1usize..3, h in 1usize..5, w in 1usize..5,
            seed in proptest::collection::vec(any::<u32>(), 1..60),
        ) {
            let count = seed.len() % 4;
            let n = count * t * c * h * w;
            let values: Vec<f32> = (0..n).map(|i| f32::from_bits(seed[i % seed.len()].wrapping_mul(i as u32 + 1) & 0x7f7f_ffff)).collect();
            let labels: Vec<u8> = (0..count).map(|i| (seed[i % seed.len()] % 10) as u8).collect();
            let f = Spkf { timesteps: t, c, h, w, values, labels };
            let bytes = f.to_bytes();
            let back = parse(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
            let via = Spkf::from_samples(&back.samples());
            if count > 0 {
                prop_assert_eq!(via.unwrap().to_bytes(), back.to_bytes());
            }
        }
    }
}
