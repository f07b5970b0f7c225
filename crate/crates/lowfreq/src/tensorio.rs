//! Bit-exact file formats: binary PGM images, the LFMT tensor container,
//! and LFMC model checkpoints.
//!
//! All writers go through a temp-file-then-rename step so a failed write
//! never leaves a partial file at the destination; all parsers report the
//! byte offset of the first problem they see.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{Model, ModelSpec, ParamPair, Stage};
use crate::tensor::{ElemType, Scalar, Tensor};

const TENSOR_MAGIC: &[u8; 4] = b"LFMT";
const CHECKPOINT_MAGIC: &[u8; 4] = b"LFMC";
const FORMAT_VERSION: u32 = 1;

/// Write `bytes` to `path` atomically: a temp file in the same directory is
/// renamed over the destination only after a complete write.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::argument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let write_and_rename = (|| {
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, path)
    })();
    if write_and_rename.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    write_and_rename.map_err(Error::Io)
}

// ---------------------------------------------------------------------------
// PGM (binary, P5, maxval 255)

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format_at(
                self.bytes.len() as u64,
                format!("unexpected end of file while reading {what}"),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    /// Skip PGM whitespace and `#` comments.
    fn skip_pgm_separators(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn pgm_number(&mut self, what: &str) -> Result<usize> {
        self.skip_pgm_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::format_at(start as u64, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format_at(start as u64, format!("bad {what}")))
    }
}

/// Read a binary PGM (P5, maxval 255) into an image with values `v/255`.
pub fn read_pgm(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path)?;
    let mut cur = Cursor::new(&bytes);
    let magic = cur.take(2, "magic")?;
    if magic != b"P5" {
        return Err(Error::format_at(0, "not a binary PGM (magic must be P5)"));
    }
    let width = cur.pgm_number("width")?;
    let height = cur.pgm_number("height")?;
    let maxval = cur.pgm_number("maxval")?;
    if maxval != 255 {
        return Err(Error::format_at(cur.offset(), format!("maxval must be 255, got {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    let sep = cur.take(1, "header terminator")?;
    if !matches!(sep[0], b' ' | b'\t' | b'\r' | b'\n') {
        return Err(Error::format_at(cur.offset() - 1, "missing whitespace after maxval"));
    }
    if height == 0 || width == 0 {
        return Err(Error::format_at(2, "image dimensions must be nonzero"));
    }
    let payload = cur.take(height * width, "pixel payload")?;
    if cur.pos != bytes.len() {
        return Err(Error::format_at(cur.offset(), "trailing bytes after pixel payload"));
    }
    Image::new(height, width, payload.iter().map(|&b| b as f64 / 255.0).collect())
}

/// Write an image as binary PGM, mapping `[0, 1]` to `0..=255` with
/// round-half-up (values outside `[0, 1]` are clamped).
pub fn write_pgm(path: &Path, image: &Image) -> Result<()> {
    let mut bytes =
        format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    bytes.extend(image.data().iter().map(|&v| {
        (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
    }));
    atomic_write(path, &bytes)
}

/// All `.pgm` images in a directory, sorted by file name.
pub fn read_pgm_dir(dir: &Path) -> Result<Vec<Image>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_pgm(p)).collect()
}

// ---------------------------------------------------------------------------
// LFMT tensor container

fn elem_tag(elem: ElemType) -> u32 {
    match elem {
        ElemType::F32 => 0,
        ElemType::F64 => 1,
    }
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn read_u32(cur: &mut Cursor, what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(cur.take(4, what)?.try_into().unwrap()))
}

fn read_u64(cur: &mut Cursor, what: &str) -> Result<u64> {
    Ok(u64::from_le_bytes(cur.take(8, what)?.try_into().unwrap()))
}

/// Serialize dims + row-major payload as one LFMT blob:
/// magic, version, element tag, rank, dims (u64 little-endian each), then
/// little-endian elements.
pub fn encode_lfmt<T: Scalar>(dims: &[usize], data: &[T]) -> Result<Vec<u8>> {
    let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| {
        Error::format("dimension product overflows")
    })?;
    if count != data.len() {
        return Err(Error::dimension(format!(
            "payload has {} elements, dims {:?} require {count}",
            data.len(),
            dims
        )));
    }
    let mut out = Vec::with_capacity(16 + dims.len() * 8 + data.len() * 8);
    out.extend_from_slice(TENSOR_MAGIC);
    push_u32(&mut out, FORMAT_VERSION);
    push_u32(&mut out, elem_tag(T::ELEM));
    push_u32(&mut out, dims.len() as u32);
    for &d in dims {
        push_u64(&mut out, d as u64);
    }
    for &v in data {
        v.write_le(&mut out);
    }
    Ok(out)
}

fn decode_lfmt_from<T: Scalar>(cur: &mut Cursor) -> Result<(Vec<usize>, Vec<T>)> {
    let start = cur.offset();
    let magic = cur.take(4, "tensor magic")?;
    if magic != TENSOR_MAGIC {
        return Err(Error::format_at(start, "bad tensor magic (expected LFMT)"));
    }
    let version = read_u32(cur, "tensor version")?;
    if version != FORMAT_VERSION {
        return Err(Error::format_at(start + 4, format!("unsupported tensor version {version}")));
    }
    let tag = read_u32(cur, "element type")?;
    if tag != elem_tag(T::ELEM) {
        return Err(Error::format_at(
            start + 8,
            format!("element type tag {tag} does not match the requested scalar"),
        ));
    }
    let rank = read_u32(cur, "rank")? as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        let offset = cur.offset();
        let d = read_u64(cur, "dimension")?;
        dims.push(usize::try_from(d).map_err(|_| Error::format_at(offset, "dimension overflow"))?);
    }
    let dims_offset = cur.offset();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format_at(dims_offset, "dimension product overflows"))?;
    let byte_len = count
        .checked_mul(T::ELEM.byte_width())
        .ok_or_else(|| Error::format_at(dims_offset, "payload size overflows"))?;
    let payload = cur.take(byte_len, "tensor payload")?;
    let data = payload
        .chunks_exact(T::ELEM.byte_width())
        .map(T::read_le)
        .collect();
    Ok((dims, data))
}

/// Parse one LFMT blob (the whole buffer must be consumed).
pub fn decode_lfmt<T: Scalar>(bytes: &[u8]) -> Result<(Vec<usize>, Vec<T>)> {
    let mut cur = Cursor::new(bytes);
    let parsed = decode_lfmt_from(&mut cur)?;
    if cur.pos != bytes.len() {
        return Err(Error::format_at(cur.offset(), "trailing bytes after tensor payload"));
    }
    Ok(parsed)
}

/// Peek at the element type tag of an LFMT blob.
pub fn lfmt_elem_type(bytes: &[u8]) -> Result<ElemType> {
    let mut cur = Cursor::new(bytes);
    cur.take(4, "tensor magic")?;
    cur.take(4, "tensor version")?;
    match read_u32(&mut cur, "element type")? {
        0 => Ok(ElemType::F32),
        1 => Ok(ElemType::F64),
        other => Err(Error::format_at(8, format!("unknown element type tag {other}"))),
    }
}

/// Write an NCHW tensor to disk as LFMT.
pub fn write_tensor<T: Scalar>(path: &Path, tensor: &Tensor<T>) -> Result<()> {
    let (n, c, h, w) = tensor.shape();
    atomic_write(path, &encode_lfmt(&[n, c, h, w], tensor.data())?)
}

/// Read an NCHW tensor written by [`write_tensor`].
pub fn read_tensor<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
    let bytes = std::fs::read(path)?;
    let (dims, data) = decode_lfmt::<T>(&bytes)?;
    if dims.len() != 4 {
        return Err(Error::format(format!("expected a rank-4 tensor, got rank {}", dims.len())));
    }
    Tensor::from_data(dims[0], dims[1], dims[2], dims[3], data)
}

// ---------------------------------------------------------------------------
// LFMC checkpoints

fn param_tensor_names(spec: &ModelSpec) -> Vec<(usize, String)> {
    spec.stages
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            matches!(s, Stage::Conv3x3 { .. } | Stage::RslBlock { .. } | Stage::Linear { .. })
        })
        .map(|(i, _)| (i, format!("stage{i}")))
        .collect()
}

/// Serialize a model: magic, version, text-encoded spec (with the build
/// seed), then each parametric stage's weight and bias tensors by name.
pub fn write_checkpoint<T: Scalar>(path: &Path, model: &Model<T>) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    push_u32(&mut out, FORMAT_VERSION);
    let spec_text = format!("{}seed={}\n", model.spec.to_text(), model.rng_seed);
    push_u32(&mut out, spec_text.len() as u32);
    out.extend_from_slice(spec_text.as_bytes());

    let named = param_tensor_names(&model.spec);
    push_u32(&mut out, (named.len() * 2) as u32);
    for (stage_idx, name) in named {
        let pair = model.params[stage_idx]
            .as_ref()
            .ok_or_else(|| Error::structure(format!("stage {stage_idx} missing parameters")))?;
        for (suffix, values) in [("weight", &pair.weight), ("bias", &pair.bias)] {
            let full = format!("{name}.{suffix}");
            push_u32(&mut out, full.len() as u32);
            out.extend_from_slice(full.as_bytes());
            let blob = encode_lfmt(&[values.len()], values)?;
            push_u32(&mut out, blob.len() as u32);
            out.extend_from_slice(&blob);
        }
    }
    atomic_write(path, &out)
}

fn parse_checkpoint_header<'a>(cur: &mut Cursor<'a>) -> Result<(ModelSpec, u64)> {
    let magic = cur.take(4, "checkpoint magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::format_at(0, "bad checkpoint magic (expected LFMC)"));
    }
    let version = read_u32(cur, "checkpoint version")?;
    if version != FORMAT_VERSION {
        return Err(Error::format_at(4, format!("unsupported checkpoint version {version}")));
    }
    let spec_len = read_u32(cur, "spec length")? as usize;
    let spec_offset = cur.offset();
    let spec_bytes = cur.take(spec_len, "model description")?;
    let text = std::str::from_utf8(spec_bytes)
        .map_err(|_| Error::format_at(spec_offset, "model description is not UTF-8"))?;
    let mut seed = 0u64;
    let mut spec_lines = String::new();
    for line in text.lines() {
        if let Some(v) = line.strip_prefix("seed=") {
            seed = v
                .parse()
                .map_err(|_| Error::format_at(spec_offset, "bad seed in model description"))?;
        } else {
            spec_lines.push_str(line);
            spec_lines.push('\n');
        }
    }
    Ok((ModelSpec::from_text(&spec_lines)?, seed))
}

/// Read a checkpoint whose tensors use scalar type `T` exactly.
pub fn read_checkpoint<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let bytes = std::fs::read(path)?;
    let mut cur = Cursor::new(&bytes);
    let (spec, seed) = parse_checkpoint_header(&mut cur)?;

    let tensor_count = read_u32(&mut cur, "tensor count")? as usize;
    let mut tensors: Vec<(String, Vec<T>)> = Vec::with_capacity(tensor_count);
    for _ in 0..tensor_count {
        let name_len = read_u32(&mut cur, "tensor name length")? as usize;
        let name_offset = cur.offset();
        let name = std::str::from_utf8(cur.take(name_len, "tensor name")?)
            .map_err(|_| Error::format_at(name_offset, "tensor name is not UTF-8"))?
            .to_string();
        let blob_len = read_u32(&mut cur, "tensor length")? as usize;
        let blob = cur.take(blob_len, "tensor blob")?;
        let (_dims, data) = decode_lfmt::<T>(blob)?;
        tensors.push((name, data));
    }
    if cur.pos != bytes.len() {
        return Err(Error::format_at(cur.offset(), "trailing bytes after checkpoint payload"));
    }

    let mut params: Vec<Option<ParamPair<T>>> = vec![None; spec.stages.len()];
    for (stage_idx, name) in param_tensor_names(&spec) {
        let find = |suffix: &str| -> Result<Vec<T>> {
            tensors
                .iter()
                .find(|(n, _)| n == &format!("{name}.{suffix}"))
                .map(|(_, d)| d.clone())
                .ok_or_else(|| Error::format(format!("checkpoint missing tensor {name}.{suffix}")))
        };
        params[stage_idx] = Some(ParamPair { weight: find("weight")?, bias: find("bias")? });
    }
    let model = Model { spec, params, rng_seed: seed };
    validate_param_shapes(&model)?;
    Ok(model)
}

/// Read a checkpoint of either precision, widening `f32` parameters to
/// `f64` (exact).
pub fn read_checkpoint_any(path: &Path) -> Result<Model<f64>> {
    match read_checkpoint::<f64>(path) {
        Ok(model) => Ok(model),
        Err(Error::Format { .. }) => {
            let narrow = read_checkpoint::<f32>(path)?;
            Ok(Model {
                spec: narrow.spec,
                params: narrow
                    .params
                    .into_iter()
                    .map(|p| {
                        p.map(|pair| ParamPair {
                            weight: pair.weight.iter().map(|&v| v as f64).collect(),
                            bias: pair.bias.iter().map(|&v| v as f64).collect(),
                        })
                    })
                    .collect(),
                rng_seed: narrow.rng_seed,
            })
        }
        Err(e) => Err(e),
    }
}

fn validate_param_shapes<T: Scalar>(model: &Model<T>) -> Result<()> {
    for (stage, pair) in model.spec.stages.iter().zip(&model.params) {
        let expected = match *stage {
            Stage::Conv3x3 { c_in, c_out, .. } => Some((c_out * c_in * 9, c_out)),
            Stage::RslBlock { c_in, c_out } => Some((c_out * c_in, c_out)),
            Stage::Linear { d_in, d_out } => Some((d_out * d_in, d_out)),
            _ => None,
        };
        match (expected, pair) {
            (Some((w, b)), Some(p)) if p.weight.len() == w && p.bias.len() == b => {}
            (None, None) => {}
            _ => {
                return Err(Error::format(
                    "checkpoint tensor shapes do not match the model description",
                ))
            }
        }
    }
    Ok(())
}
