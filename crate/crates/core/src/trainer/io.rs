//! Embedding text output (word2vec format) and binary checkpoints.

use std::io::{BufRead, Read, Write};

use super::{EmbeddingModel, Embeddings, TrainError};

/// Number formatting for the text format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// `%g`-style with this many significant digits.
    Significant(usize),
    /// C99 hexadecimal float, bit-exact on read-back.
    #[default]
    Full,
}

impl Precision {
    pub const DEFAULT: Precision = Precision::Significant(6);

    pub fn format(self, x: f64) -> String {
        match self {
            Precision::Significant(p) => format_significant(x, p.max(1)),
            Precision::Full => format_hexfloat(x),
        }
    }
}

/// `%g`-style formatting with `p` significant digits.
pub fn format_significant(x: f64, p: usize) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -4 || exp >= p as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn format_hexfloat(x: f64) -> String {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0x7ff {
        return x.to_string();
    }
    let (lead, e) = match (exp, frac) {
        (0, 0) => return format!("{sign}0x0p+0"),
        (0, _) => (0, -1022),
        _ => (1, exp - 1023),
    };
    let digits = format!("{frac:013x}");
    let digits = digits.trim_end_matches('0');
    if digits.is_empty() {
        format!("{sign}0x{lead}p{e:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{e:+}")
    }
}

pub fn parse_hexfloat(s: &str) -> Option<f64> {
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let rest = rest.strip_prefix("0x").or_else(|| rest.strip_prefix("0X"))?;
    let (mant, exp) = rest.split_once(['p', 'P'])?;
    let exp: i64 = exp.parse().ok()?;
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() || int.len() + frac.len() > 15 {
        return None;
    }
    let mut m: u64 = 0;
    for c in int.chars().chain(frac.chars()) {
        m = m * 16 + c.to_digit(16)? as u64;
    }
    let mut e = exp - 4 * frac.len() as i64;
    let mut v = m as f64;
    // scale in steps that keep every intermediate exact
    while e > 0 {
        let k = e.min(1000);
        v *= 2f64.powi(k as i32);
        e -= k;
    }
    while e < 0 {
        let k = (-e).min(1000);
        v /= 2f64.powi(k as i32);
        e += k;
    }
    Some(if neg { -v } else { v })
}

fn parse_value(s: &str) -> Option<f64> {
    if s.contains(['x', 'X']) {
        parse_hexfloat(s)
    } else {
        s.parse().ok()
    }
}

/// Writes `n dim` then one line per place: `label v_1 ... v_dim`.
pub fn write_word2vec<W: Write, S: AsRef<str>>(
    vectors: &Embeddings,
    labels: &[S],
    precision: Precision,
    mut w: W,
) -> std::io::Result<()> {
    assert_eq!(labels.len(), vectors.len(), "one label per vector");
    writeln!(w, "{} {}", vectors.len(), vectors.dim)?;
    let mut line = String::new();
    for (i, label) in labels.iter().enumerate() {
        line.clear();
        line.push_str(label.as_ref());
        for &x in vectors.row(i) {
            line.push(' ');
            line.push_str(&precision.format(x));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()
}

pub fn read_word2vec<R: BufRead>(r: R) -> Result<(Vec<String>, Embeddings), TrainError> {
    let mut lines = r.lines();
    let bad = |line: usize, msg: &str| TrainError::Format(format!("line {line}: {msg}"));
    let header = lines.next().ok_or_else(|| bad(1, "empty file"))?.map_err(TrainError::Io)?;
    let mut it = header.split_whitespace();
    let n: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(1, "bad count"))?;
    let dim: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(1, "bad dimension"))?;
    if dim == 0 {
        return Err(bad(1, "dimension must be positive"));
    }
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * dim);
    for (k, line) in lines.enumerate() {
        let line = line.map_err(TrainError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split_whitespace();
        labels.push(f.next().unwrap().to_owned());
        let before = data.len();
        for tok in f {
            data.push(parse_value(tok).ok_or_else(|| bad(k + 2, &format!("bad value `{tok}`")))?);
        }
        if data.len() - before != dim {
            return Err(bad(k + 2, &format!("expected {dim} values, found {}", data.len() - before)));
        }
    }
    if labels.len() != n {
        return Err(TrainError::Format(format!("header declares {n} vectors, found {}", labels.len())));
    }
    Ok((labels, Embeddings::new(dim, data)))
}

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"PLMVCKPT";
const CHECKPOINT_VERSION: u32 = 1;

/// Both matrices plus the hash of the config that produced them.
pub fn write_checkpoint<W: Write>(model: &EmbeddingModel, config_hash: &[u8; 32], mut w: W) -> std::io::Result<()> {
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&(model.n_places() as u64).to_le_bytes())?;
    w.write_all(&(model.dim() as u64).to_le_bytes())?;
    w.write_all(config_hash)?;
    for x in model.center_matrix().iter().chain(model.context_matrix()) {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(EmbeddingModel, [u8; 32]), TrainError> {
    let mut head = [0u8; 64];
    r.read_exact(&mut head).map_err(TrainError::Io)?;
    if head[..8] != CHECKPOINT_MAGIC {
        return Err(TrainError::Format("not a checkpoint".into()));
    }
    let version = u32::from_le_bytes(head[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(TrainError::Format(format!("unsupported checkpoint version {version}")));
    }
    let n = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
    let dim = u64::from_le_bytes(head[24..32].try_into().unwrap()) as usize;
    let hash: [u8; 32] = head[32..64].try_into().unwrap();
    let mut body = Vec::new();
    r.read_to_end(&mut body).map_err(TrainError::Io)?;
    let len = n.checked_mul(dim).and_then(|x| x.checked_mul(16)).ok_or(TrainError::Shape { n, dim })?;
    if body.len() != len {
        return Err(TrainError::Format("checkpoint body has wrong length".into()));
    }
    let vals: Vec<f64> = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    let (c, u) = vals.split_at(n * dim);
    Ok((EmbeddingModel::from_parts(n, dim, c.to_vec(), u.to_vec())?, hash))
}
