//! Little-endian binary formats.
//!
//! * `GMMD` embedding files: `"GMMD"`, u32 version, u32 N, u32 D, u32 C,
//!   N×D f32 features (row-major), N i32 labels, N u8 split tags,
//!   u16 provenance length, UTF-8 provenance.
//! * `GMMP` classifier checkpoints: `"GMMP"`, u32 version, u8 family,
//!   u32 C, G, d, then prior logits, weight logits, means and covariance
//!   parameters as f64.
//! * `GMMR` reduction maps: `"GMMR"`, u32 version, u8 kind, u32 D, u32 d.
//!   PCA maps (kind 0) continue with the mean (D), the rows (d×D) and the
//!   retained eigenvalues (d). Learnable maps (kind 1) store the bias (d) in
//!   place of the mean, then the rows, and no eigenvalues.

use std::fs;
use std::path::Path;

use gmmc_core::data::{EmbeddingDataset, SplitTag};
use gmmc_core::gmm::{CovarianceFamily, GmmParams};
use gmmc_core::reduction::{ReductionKind, ReductionMap};
use gmmc_core::Matrix;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"GMMD";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GMMP";
pub const REDUCTION_MAGIC: &[u8; 4] = b"GMMR";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    Magic { expected: String, found: String },
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("length error: {0}")]
    Length(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("format error: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] gmmc_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl FormatError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Magic { .. } | Self::Version(_) | Self::Invalid(_) => "format",
            Self::Length(_) => "length",
            Self::Consistency(_) => "consistency",
            Self::Core(_) => "core",
            Self::Io { .. } => "io",
        }
    }
}

type Result<T> = std::result::Result<T, FormatError>;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            FormatError::Length(format!(
                "truncated payload reading {what}: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            ))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let m = self.take(4, "magic")?;
        if m != expected {
            return Err(FormatError::Magic {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(m).into_owned(),
            });
        }
        let v = self.u32("version")?;
        if v != FORMAT_VERSION {
            return Err(FormatError::Version(v));
        }
        Ok(())
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(checked_len(n, 8, what)?, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(FormatError::Length(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn checked_len(n: usize, width: usize, what: &str) -> Result<usize> {
    n.checked_mul(width)
        .ok_or_else(|| FormatError::Length(format!("{what} size overflows")))
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| FormatError::Invalid(format!("{what} {v} does not fit in u32")))
}

fn put_header(out: &mut Vec<u8>, magic: &[u8; 4]) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Serialises a dataset. Features are narrowed to f32.
pub fn encode_embeddings(ds: &EmbeddingDataset) -> Result<Vec<u8>> {
    let (n, d) = (ds.len(), ds.dim());
    let prov = ds.provenance().as_bytes();
    let prov_len = u16::try_from(prov.len())
        .map_err(|_| FormatError::Invalid("provenance longer than 65535 bytes".into()))?;
    let mut out = Vec::with_capacity(20 + n * (4 * d + 5) + 2 + prov.len());
    put_header(&mut out, EMBEDDING_MAGIC);
    out.extend_from_slice(&to_u32(n, "N")?.to_le_bytes());
    out.extend_from_slice(&to_u32(d, "D")?.to_le_bytes());
    out.extend_from_slice(&to_u32(ds.num_classes(), "C")?.to_le_bytes());
    for v in ds.features().as_slice() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    for &y in ds.labels() {
        let y = i32::try_from(y).map_err(|_| FormatError::Invalid(format!("label {y} exceeds i32")))?;
        out.extend_from_slice(&y.to_le_bytes());
    }
    out.extend(ds.splits().iter().map(|t| t.code()));
    out.extend_from_slice(&prov_len.to_le_bytes());
    out.extend_from_slice(prov);
    Ok(out)
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingDataset> {
    let mut r = Reader::new(bytes);
    r.magic(EMBEDDING_MAGIC)?;
    let n = r.u32("N")? as usize;
    let d = r.u32("D")? as usize;
    let c = r.u32("C")? as usize;
    if n == 0 {
        return Err(FormatError::Length("embedding file has N = 0 samples".into()));
    }
    if d == 0 {
        return Err(FormatError::Length("embedding file has D = 0".into()));
    }
    let feat_bytes = r.take(checked_len(checked_len(n, d, "features")?, 4, "features")?, "features")?;
    let features: Vec<f64> = feat_bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    if let Some(i) = features.iter().position(|v| !v.is_finite()) {
        return Err(FormatError::Invalid(format!(
            "non-finite feature at row {} column {}",
            i / d,
            i % d
        )));
    }
    let label_bytes = r.take(checked_len(n, 4, "labels")?, "labels")?;
    let mut labels = Vec::with_capacity(n);
    for (i, b) in label_bytes.chunks_exact(4).enumerate() {
        let y = i32::from_le_bytes(b.try_into().unwrap());
        if y < 0 || y as usize >= c {
            return Err(FormatError::Consistency(format!(
                "label {y} at row {i} outside [0, {c})"
            )));
        }
        labels.push(y as usize);
    }
    let tag_bytes = r.take(n, "split tags")?;
    let mut splits = Vec::with_capacity(n);
    for (i, &t) in tag_bytes.iter().enumerate() {
        splits.push(
            SplitTag::from_code(t)
                .ok_or_else(|| FormatError::Invalid(format!("split tag {t} at row {i}")))?,
        );
    }
    let plen = r.u16("provenance length")? as usize;
    let prov = r.take(plen, "provenance")?;
    let provenance = String::from_utf8(prov.to_vec())
        .map_err(|_| FormatError::Invalid("provenance is not UTF-8".into()))?;
    r.finish()?;
    Ok(EmbeddingDataset::new(
        Matrix::new(n, d, features)?,
        labels,
        c,
        splits,
        provenance,
    )?)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingDataset> {
    decode_embeddings(&read_file(path.as_ref())?)
}

pub fn write_embeddings(path: impl AsRef<Path>, ds: &EmbeddingDataset) -> Result<()> {
    write_file(path.as_ref(), &encode_embeddings(ds)?)
}

pub fn encode_checkpoint(p: &GmmParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    put_header(&mut out, CHECKPOINT_MAGIC);
    out.push(p.family().code());
    out.extend_from_slice(&to_u32(p.num_classes(), "C")?.to_le_bytes());
    out.extend_from_slice(&to_u32(p.components(), "G")?.to_le_bytes());
    out.extend_from_slice(&to_u32(p.dim(), "d")?.to_le_bytes());
    put_f64s(&mut out, p.prior_logits());
    put_f64s(&mut out, p.weight_logits());
    put_f64s(&mut out, p.means());
    put_f64s(&mut out, p.bandwidth_raw());
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<GmmParams> {
    let mut r = Reader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    let code = r.u8("family")?;
    let family = CovarianceFamily::from_code(code)
        .ok_or_else(|| FormatError::Invalid(format!("unknown covariance family code {code}")))?;
    let c = r.u32("C")? as usize;
    let g = r.u32("G")? as usize;
    let d = r.u32("d")? as usize;
    let cg = checked_len(c, g, "C×G")?;
    let prior = r.f64s(c, "prior logits")?;
    let weights = r.f64s(cg, "weight logits")?;
    let means = r.f64s(checked_len(cg, d, "means")?, "means")?;
    let cov = r.f64s(checked_len(cg, family.cov_len(d), "covariances")?, "covariances")?;
    r.finish()?;
    Ok(GmmParams::from_parts(family, c, g, d, prior, weights, means, cov)?)
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<GmmParams> {
    decode_checkpoint(&read_file(path.as_ref())?)
}

pub fn write_checkpoint(path: impl AsRef<Path>, p: &GmmParams) -> Result<()> {
    write_file(path.as_ref(), &encode_checkpoint(p)?)
}

pub fn encode_reduction(m: &ReductionMap) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    put_header(&mut out, REDUCTION_MAGIC);
    out.push(m.kind().code());
    out.extend_from_slice(&to_u32(m.in_dim(), "D")?.to_le_bytes());
    out.extend_from_slice(&to_u32(m.out_dim(), "d")?.to_le_bytes());
    match m.kind() {
        ReductionKind::PcaFixed => {
            put_f64s(&mut out, m.mean());
            put_f64s(&mut out, m.matrix().as_slice());
            put_f64s(&mut out, m.eigenvalues());
        }
        ReductionKind::Learnable => {
            put_f64s(&mut out, m.bias());
            put_f64s(&mut out, m.matrix().as_slice());
        }
    }
    Ok(out)
}

pub fn decode_reduction(bytes: &[u8]) -> Result<ReductionMap> {
    let mut r = Reader::new(bytes);
    r.magic(REDUCTION_MAGIC)?;
    let code = r.u8("kind")?;
    let kind = ReductionKind::from_code(code)
        .ok_or_else(|| FormatError::Invalid(format!("unknown reduction kind {code}")))?;
    let big_d = r.u32("D")? as usize;
    let d = r.u32("d")? as usize;
    let rows = checked_len(d, big_d, "matrix")?;
    let map = match kind {
        ReductionKind::PcaFixed => {
            let mean = r.f64s(big_d, "mean")?;
            let m = r.f64s(rows, "matrix")?;
            let eig = r.f64s(d, "eigenvalues")?;
            ReductionMap::pca(mean, Matrix::new(d, big_d, m)?, eig)?
        }
        ReductionKind::Learnable => {
            let bias = r.f64s(d, "bias")?;
            let m = r.f64s(rows, "matrix")?;
            ReductionMap::learnable(Matrix::new(d, big_d, m)?, bias)?
        }
    };
    r.finish()?;
    Ok(map)
}

pub fn read_reduction(path: impl AsRef<Path>) -> Result<ReductionMap> {
    decode_reduction(&read_file(path.as_ref())?)
}

pub fn write_reduction(path: impl AsRef<Path>, m: &ReductionMap) -> Result<()> {
    write_file(path.as_ref(), &encode_reduction(m)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_bytes() -> Vec<u8> {
        // N=2, D=3, C=2; rows [1, -2, 0.5] and [0.25, 3, -1], labels 1, 0,
        // tags train, val, provenance "ab"
        let mut b = b"GMMD".to_vec();
        for v in [1u32, 2, 3, 2] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        for v in [1.0f32, -2.0, 0.5, 0.25, 3.0, -1.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        for y in [1i32, 0] {
            b.extend_from_slice(&y.to_le_bytes());
        }
        b.extend_from_slice(&[0, 1]);
        b.extend_from_slice(&2u16.to_le_bytes());
        b.extend_from_slice(b"ab");
        b
    }

    #[test]
    fn decodes_hand_built_fixture() {
        let ds = decode_embeddings(&fixture_bytes()).unwrap();
        assert_eq!(ds.features().as_slice(), &[1.0, -2.0, 0.5, 0.25, 3.0, -1.0]);
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.splits(), &[SplitTag::Train, SplitTag::Val]);
        assert_eq!(ds.provenance(), "ab");
        assert_eq!(encode_embeddings(&ds).unwrap(), fixture_bytes());
    }

    #[test]
    fn rejects_broken_files() {
        let good = fixture_bytes();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_embeddings(&bad), Err(FormatError::Magic { .. })));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_embeddings(&bad), Err(FormatError::Version(2))));
        assert!(matches!(
            decode_embeddings(&good[..good.len() - 5]),
            Err(FormatError::Length(_))
        ));
        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(decode_embeddings(&bad), Err(FormatError::Length(_))));
        // label 1 -> 5 with C = 2
        let mut bad = good.clone();
        bad[44] = 5;
        assert!(matches!(decode_embeddings(&bad), Err(FormatError::Consistency(_))));
        // first feature -> NaN
        let mut bad = good.clone();
        bad[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_embeddings(&bad), Err(FormatError::Invalid(_))));
        let mut empty = b"GMMD".to_vec();
        for v in [1u32, 0, 3, 2] {
            empty.extend_from_slice(&v.to_le_bytes());
        }
        empty.extend_from_slice(&0u16.to_le_bytes());
        assert!(matches!(decode_embeddings(&empty), Err(FormatError::Length(_))));
    }

    #[test]
    fn checkpoint_layout() {
        let p = GmmParams::from_parts(
            CovarianceFamily::Diagonal,
            2,
            1,
            2,
            vec![0.1, -0.1],
            vec![0.0, 0.0],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.5, 0.25, 1.0, 2.0],
        )
        .unwrap();
        let b = encode_checkpoint(&p).unwrap();
        assert_eq!(&b[..4], b"GMMP");
        assert_eq!(b[8], 1);
        assert_eq!(b.len(), 4 + 4 + 1 + 12 + 8 * (2 + 2 + 4 + 4));
        assert_eq!(decode_checkpoint(&b).unwrap(), p);
        assert!(matches!(decode_checkpoint(&b[..b.len() - 1]), Err(FormatError::Length(_))));
    }

    #[test]
    fn reduction_layouts() {
        let f = Matrix::from_rows(&[&[0.0, 1.0], &[2.0, 0.0], &[1.0, 3.0]]).unwrap();
        let pca = gmmc_core::reduction::fit_pca(&f).unwrap();
        let b = encode_reduction(&pca).unwrap();
        assert_eq!(b[8], 0);
        assert_eq!(decode_reduction(&b).unwrap(), pca);
        let lin = ReductionMap::learnable_random(3, 2, 4).unwrap();
        let b = encode_reduction(&lin).unwrap();
        assert_eq!(b[8], 1);
        assert_eq!(b.len(), 17 + 8 * (2 + 6));
        assert_eq!(decode_reduction(&b).unwrap(), lin);
    }
}
