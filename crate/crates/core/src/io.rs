//! On-disk formats: text and binary edge lists, seed-graph files and
//! faction files.
//!
//! Text edge list: one `u v` pair per line, decimal. Blank lines and lines
//! starting with `#` are skipped, except `# vertices: N`, which pins the
//! vertex count (written only when it differs from `1 + max endpoint`).
//!
//! Binary edge list, all little-endian:
//!
//! ```text
//! offset 0   magic    b"GGEL"
//! offset 4   version  u32 = 1
//! offset 8   |V|      u64
//! offset 16  (u64 u, u64 v) * |E|
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::graph::{EdgeList, RankId, VertexId};
use crate::pk::SeedGraph;
use crate::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"GGEL";
pub const BINARY_VERSION: u32 = 1;
pub const BINARY_HEADER_LEN: usize = 16;

const VERTICES_HEADER: &str = "# vertices:";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Binary,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "binary" => Ok(Format::Binary),
            other => Err(Error::config(format!(
                "unknown format {other:?} (expected text or binary)"
            ))),
        }
    }
}

impl Format {
    /// Guesses the format of an edge-list payload from its first bytes.
    pub fn sniff(bytes: &[u8]) -> Format {
        if bytes.starts_with(BINARY_MAGIC) {
            Format::Binary
        } else {
            Format::Text
        }
    }
}

/// Writes `g` and returns the number of bytes written.
pub fn write_edge_list<W: Write>(g: &EdgeList, format: Format, out: W) -> Result<u64> {
    match format {
        Format::Text => write_text(g, out),
        Format::Binary => write_binary(g, out),
    }
}

pub fn write_edge_list_file(g: &EdgeList, format: Format, path: &Path) -> Result<u64> {
    let file = File::create(path).map_err(|e| Error::from(e).with_path(path))?;
    let mut out = BufWriter::new(file);
    let n = write_edge_list(g, format, &mut out).map_err(|e| e.with_path(path))?;
    out.flush().map_err(|e| Error::from(e).with_path(path))?;
    Ok(n)
}

fn natural_vertex_count(edges: &[(VertexId, VertexId)]) -> u64 {
    edges
        .iter()
        .map(|&(u, v)| u.max(v).saturating_add(1))
        .max()
        .unwrap_or(0)
}

fn write_text<W: Write>(g: &EdgeList, out: W) -> Result<u64> {
    let mut out = CountingWriter::new(out);
    if g.vertex_count() != natural_vertex_count(g.edges()) {
        writeln!(out, "{VERTICES_HEADER} {}", g.vertex_count())?;
    }
    for &(u, v) in g.edges() {
        writeln!(out, "{u} {v}")?;
    }
    Ok(out.written)
}

fn write_binary<W: Write>(g: &EdgeList, out: W) -> Result<u64> {
    let mut out = CountingWriter::new(out);
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&g.vertex_count().to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * 4096);
    for chunk in g.edges().chunks(4096) {
        buf.clear();
        for &(u, v) in chunk {
            buf.extend_from_slice(&u.to_le_bytes());
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(out.written)
}

pub fn read_edge_list<R: Read>(mut source: R, format: Format) -> Result<EdgeList> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    match format {
        Format::Text => parse_text_edge_list(&bytes),
        Format::Binary => parse_binary_edge_list(&bytes),
    }
}

/// Reads an edge-list file; `None` sniffs the format from the magic bytes.
pub fn read_edge_list_file(path: &Path, format: Option<Format>) -> Result<EdgeList> {
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).with_path(path))?;
    let format = format.unwrap_or_else(|| Format::sniff(&bytes));
    let parsed = match format {
        Format::Text => parse_text_edge_list(&bytes),
        Format::Binary => parse_binary_edge_list(&bytes),
    };
    parsed.map_err(|e| match e {
        Error::Parse { offset, message } => Error::Parse {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Iterates over `(byte offset, trimmed line)` skipping blank lines.
fn content_lines(bytes: &[u8]) -> impl Iterator<Item = (u64, &[u8])> {
    let mut offset = 0u64;
    bytes.split(|&b| b == b'\n').filter_map(move |raw| {
        let start = offset;
        offset += raw.len() as u64 + 1;
        let line = raw.trim_ascii();
        (!line.is_empty()).then_some((start, line))
    })
}

fn parse_u64(token: &[u8], offset: u64) -> Result<u64> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse::<u64>().ok())
        .ok_or_else(|| {
            Error::parse(
                offset,
                format!(
                    "expected unsigned integer, found {:?}",
                    String::from_utf8_lossy(token)
                ),
            )
        })
}

/// Splits a line into exactly `N` unsigned integers.
fn parse_fields<const N: usize>(line: &[u8], offset: u64) -> Result<[u64; N]> {
    let mut out = [0u64; N];
    let mut tokens = line
        .split(|b| b.is_ascii_whitespace())
        .filter(|t| !t.is_empty());
    for slot in out.iter_mut() {
        let token = tokens
            .next()
            .ok_or_else(|| Error::parse(offset, format!("expected {N} fields")))?;
        *slot = parse_u64(token, offset)?;
    }
    if tokens.next().is_some() {
        return Err(Error::parse(
            offset,
            format!("expected {N} fields, found more"),
        ));
    }
    Ok(out)
}

pub fn parse_text_edge_list(bytes: &[u8]) -> Result<EdgeList> {
    let mut edges = Vec::new();
    let mut declared: Option<(u64, u64)> = None;
    for (offset, line) in content_lines(bytes) {
        if let Some(rest) = line.strip_prefix(b"#") {
            if let Some(count) = rest
                .trim_ascii_start()
                .strip_prefix(&VERTICES_HEADER.as_bytes()[2..])
            {
                let [n] = parse_fields::<1>(count, offset)?;
                declared = Some((n, offset));
            }
            continue;
        }
        let [u, v] = parse_fields::<2>(line, offset)?;
        edges.push((u, v));
    }
    let natural = natural_vertex_count(&edges);
    let vertex_count = match declared {
        Some((n, offset)) if n < natural => {
            return Err(Error::parse(
                offset,
                format!("declared vertex count {n} but an endpoint needs {natural}"),
            ))
        }
        Some((n, _)) => n,
        None => natural,
    };
    EdgeList::new(edges, vertex_count, false)
}

pub fn parse_binary_edge_list(bytes: &[u8]) -> Result<EdgeList> {
    if bytes.len() < BINARY_HEADER_LEN {
        return Err(Error::parse(bytes.len() as u64, "truncated header"));
    }
    if &bytes[0..4] != BINARY_MAGIC {
        return Err(Error::parse(0, "bad magic (expected GGEL)"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(Error::parse(4, format!("unsupported version {version}")));
    }
    let vertex_count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let payload = &bytes[BINARY_HEADER_LEN..];
    if !payload.len().is_multiple_of(16) {
        let whole = payload.len() - payload.len() % 16;
        let msg = if !payload.len().is_multiple_of(8) {
            "truncated u64 in payload"
        } else {
            "odd number of u64 values in payload"
        };
        return Err(Error::parse((BINARY_HEADER_LEN + whole) as u64, msg));
    }
    let mut edges = Vec::with_capacity(payload.len() / 16);
    for (i, pair) in payload.chunks_exact(16).enumerate() {
        let u = u64::from_le_bytes(pair[0..8].try_into().unwrap());
        let v = u64::from_le_bytes(pair[8..16].try_into().unwrap());
        if u >= vertex_count || v >= vertex_count {
            return Err(Error::parse(
                (BINARY_HEADER_LEN + 16 * i) as u64,
                format!("endpoint out of range for {vertex_count} vertices"),
            ));
        }
        edges.push((u, v));
    }
    EdgeList::new(edges, vertex_count, false)
}

/// Seed-graph file: first content line `n0`, then one `r c` line per nonzero.
/// Repeated entries are idempotent.
pub fn parse_seed_graph(bytes: &[u8]) -> Result<SeedGraph> {
    let mut lines = content_lines(bytes).filter(|(_, l)| !l.starts_with(b"#"));
    let (offset, first) = lines
        .next()
        .ok_or_else(|| Error::parse(0, "empty seed graph file"))?;
    let [n0] = parse_fields::<1>(first, offset)?;
    let n0 = u32::try_from(n0)
        .ok()
        .filter(|&n| n <= SeedGraph::MAX_ORDER)
        .ok_or_else(|| Error::parse(offset, format!("seed order {n0} too large")))?;
    let mut entries = Vec::new();
    for (offset, line) in lines {
        let [r, c] = parse_fields::<2>(line, offset)?;
        if r >= n0 as u64 || c >= n0 as u64 {
            return Err(Error::parse(
                offset,
                format!("entry ({r}, {c}) outside {n0}x{n0} seed"),
            ));
        }
        entries.push((r as u32, c as u32));
    }
    SeedGraph::new(n0, &entries).map_err(|e| match e {
        Error::Config(msg) => Error::parse(0, msg),
        other => other,
    })
}

pub fn read_seed_graph_file(path: &Path) -> Result<SeedGraph> {
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).with_path(path))?;
    parse_seed_graph(&bytes)
}

pub fn write_seed_graph<W: Write>(seed: &SeedGraph, mut out: W) -> Result<()> {
    writeln!(out, "{}", seed.order())?;
    for &(r, c) in seed.nonzeros() {
        writeln!(out, "{r} {c}")?;
    }
    Ok(())
}

/// Parsed faction file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FactionFile {
    pub factions: Vec<Vec<RankId>>,
    /// Explicit memberships `(rank, faction indices)`.
    pub memberships: Vec<(RankId, Vec<usize>)>,
}

/// Faction file: one faction per line, space-separated rank ids. A line
/// `rank <p>: <i> <j> ...` states explicitly which factions rank `p` belongs
/// to; ranks without such a line belong to the factions that list them.
pub fn parse_factions(bytes: &[u8]) -> Result<FactionFile> {
    let mut file = FactionFile::default();
    for (offset, line) in content_lines(bytes).filter(|(_, l)| !l.starts_with(b"#")) {
        if let Some(rest) = line.strip_prefix(b"rank") {
            let colon = rest.iter().position(|&b| b == b':').ok_or_else(|| {
                Error::parse(offset, "membership line needs `rank <p>: <factions>`")
            })?;
            let [rank] = parse_fields::<1>(&rest[..colon], offset)?;
            let rank = to_index(rank, offset)?;
            let factions = parse_list(&rest[colon + 1..], offset)?;
            file.memberships.push((rank, factions));
        } else {
            file.factions.push(parse_list(line, offset)?);
        }
    }
    Ok(file)
}

fn to_index(value: u64, offset: u64) -> Result<usize> {
    usize::try_from(value).map_err(|_| Error::parse(offset, format!("index {value} too large")))
}

fn parse_list(line: &[u8], offset: u64) -> Result<Vec<usize>> {
    line.split(|b| b.is_ascii_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| to_index(parse_u64(t, offset)?, offset))
        .collect()
}

struct CountingWriter<W> {
    inner: W,
    written: u64,
}

impl<W> CountingWriter<W> {
    fn new(inner: W) -> Self {
        CountingWriter { inner, written: 0 }
    }
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}
