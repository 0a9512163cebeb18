//! Replayable candidate streams.
//!
//! A stream hands out one candidate at a time from a single internal buffer.
//! Three backends are provided: an explicit in-memory list, a binary CSOL
//! file, and a deterministic generator family.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::family::Family;

pub const CSOL_MAGIC: &[u8; 4] = b"CSOL";
pub const CSOL_VERSION: u8 = 0x01;
pub const CSOL_HEADER_LEN: u64 = 4 + 1 + 8 + 4;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("bad candidate file: {0}")]
    Format(String),
    #[error("advance_by({requested}) overruns the stream ({remaining} remaining)")]
    Overrun { requested: u64, remaining: u64 },
    #[error("point has dimension {got}, stream has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("this stream cannot be forked")]
    NotForkable,
}

/// Monotone instrumentation counters. `reset` leaves them untouched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamCounters {
    pub next_calls: u64,
    pub advance_steps: u64,
    /// File backend: point records read.
    pub reads: u64,
    /// File backend: seek operations issued.
    pub seeks: u64,
}

impl std::ops::AddAssign for StreamCounters {
    fn add_assign(&mut self, o: Self) {
        self.next_calls += o.next_calls;
        self.advance_steps += o.advance_steps;
        self.reads += o.reads;
        self.seeks += o.seeks;
    }
}

/// Counts live candidate buffers, in points, and remembers the peak.
#[derive(Debug, Clone, Default)]
pub struct PointLedger {
    inner: Arc<LedgerInner>,
}

#[derive(Debug, Default)]
struct LedgerInner {
    live: AtomicI64,
    peak: AtomicI64,
}

impl PointLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn acquire(&self, points: usize) {
        let now = self.inner.live.fetch_add(points as i64, Ordering::SeqCst) + points as i64;
        self.inner.peak.fetch_max(now, Ordering::SeqCst);
    }

    pub fn release(&self, points: usize) {
        self.inner.live.fetch_sub(points as i64, Ordering::SeqCst);
    }

    pub fn live(&self) -> u64 {
        self.inner.live.load(Ordering::SeqCst).max(0) as u64
    }

    pub fn peak(&self) -> u64 {
        self.inner.peak.load(Ordering::SeqCst).max(0) as u64
    }

    /// Forgets the peak, keeping current live storage as the new baseline.
    pub fn reset_peak(&self) {
        self.inner
            .peak
            .store(self.inner.live.load(Ordering::SeqCst), Ordering::SeqCst);
    }
}

/// A buffer registration that is released on drop.
#[derive(Debug)]
struct BufferGuard(Option<PointLedger>);

impl BufferGuard {
    fn new(ledger: Option<PointLedger>) -> Self {
        if let Some(l) = &ledger {
            l.acquire(1);
        }
        Self(ledger)
    }
}

impl Clone for BufferGuard {
    fn clone(&self) -> Self {
        Self::new(self.0.clone())
    }
}

impl Drop for BufferGuard {
    fn drop(&mut self) {
        if let Some(l) = &self.0 {
            l.release(1);
        }
    }
}

/// Points collected in memory, each one accounted in a ledger.
#[derive(Debug, Default)]
pub struct TrackedPoints {
    points: Vec<(u64, Vec<Complex64>)>,
    ledger: Option<PointLedger>,
}

impl TrackedPoints {
    pub fn new(ledger: Option<PointLedger>) -> Self {
        Self {
            points: Vec::new(),
            ledger,
        }
    }

    pub fn push(&mut self, index: u64, p: &[Complex64]) {
        if let Some(l) = &self.ledger {
            l.acquire(1);
        }
        self.points.push((index, p.to_vec()));
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[Complex64])> {
        self.points.iter().map(|(i, p)| (*i, p.as_slice()))
    }
}

impl Drop for TrackedPoints {
    fn drop(&mut self) {
        if let Some(l) = &self.ledger {
            l.release(self.points.len());
        }
    }
}

/// The solution iterator contract.
pub trait SolutionStream: Send + Sync {
    /// Number of candidates `d`.
    fn len(&self) -> u64;
    fn dim(&self) -> usize;
    fn position(&self) -> u64;
    /// Returns the point at the cursor and advances, or `None` when exhausted.
    fn next_point(&mut self) -> Result<Option<&[Complex64]>, StreamError>;
    fn reset(&mut self) -> Result<(), StreamError>;
    /// Skips `n` candidates without producing them.
    fn advance_by(&mut self, n: u64) -> Result<(), StreamError>;
    fn counters(&self) -> StreamCounters;
    /// An independent cursor over the same candidates, with fresh counters.
    fn fork(&self) -> Result<Box<dyn SolutionStream>, StreamError>;
    /// Whether all candidates are held in memory (needed by median splits).
    fn is_in_memory(&self) -> bool {
        false
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_overrun(pos: u64, len: u64, n: u64) -> Result<(), StreamError> {
    if n > len - pos {
        return Err(StreamError::Overrun {
            requested: n,
            remaining: len - pos,
        });
    }
    Ok(())
}

/// Explicit point list.
#[derive(Debug, Clone)]
pub struct InMemoryStream {
    points: Arc<Vec<Vec<Complex64>>>,
    n: usize,
    pos: u64,
    counters: StreamCounters,
    _buffer: BufferGuard,
}

impl InMemoryStream {
    pub fn new(n: usize, points: Vec<Vec<Complex64>>) -> Result<Self, StreamError> {
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(StreamError::DimensionMismatch {
                expected: n,
                got: p.len(),
            });
        }
        Ok(Self {
            points: Arc::new(points),
            n,
            pos: 0,
            counters: StreamCounters::default(),
            _buffer: BufferGuard::new(None),
        })
    }

    pub fn with_ledger(mut self, ledger: &PointLedger) -> Self {
        self._buffer = BufferGuard::new(Some(ledger.clone()));
        self
    }

    pub fn points(&self) -> &[Vec<Complex64>] {
        &self.points
    }
}

impl SolutionStream for InMemoryStream {
    fn len(&self) -> u64 {
        self.points.len() as u64
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn position(&self) -> u64 {
        self.pos
    }

    fn next_point(&mut self) -> Result<Option<&[Complex64]>, StreamError> {
        if self.pos == self.len() {
            return Ok(None);
        }
        self.counters.next_calls += 1;
        self.pos += 1;
        Ok(Some(&self.points[self.pos as usize - 1]))
    }

    fn reset(&mut self) -> Result<(), StreamError> {
        self.pos = 0;
        Ok(())
    }

    fn advance_by(&mut self, n: u64) -> Result<(), StreamError> {
        check_overrun(self.pos, self.len(), n)?;
        self.pos += n;
        self.counters.advance_steps += n;
        Ok(())
    }

    fn counters(&self) -> StreamCounters {
        self.counters
    }

    fn fork(&self) -> Result<Box<dyn SolutionStream>, StreamError> {
        let mut s = self.clone();
        s.pos = 0;
        s.counters = StreamCounters::default();
        Ok(Box::new(s))
    }

    fn is_in_memory(&self) -> bool {
        true
    }
}

/// Header of a CSOL candidate file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsolHeader {
    pub d: u64,
    pub n: u32,
}

pub fn read_csol_header(r: &mut impl Read) -> Result<CsolHeader, StreamError> {
    let mut head = [0u8; CSOL_HEADER_LEN as usize];
    r.read_exact(&mut head).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => StreamError::Format("truncated header".into()),
        _ => StreamError::Io(e),
    })?;
    if &head[0..4] != CSOL_MAGIC {
        return Err(StreamError::Format("missing CSOL magic".into()));
    }
    if head[4] != CSOL_VERSION {
        return Err(StreamError::Format(format!("unsupported version {}", head[4])));
    }
    let d = u64::from_le_bytes(head[5..13].try_into().unwrap());
    let n = u32::from_le_bytes(head[13..17].try_into().unwrap());
    if n == 0 {
        return Err(StreamError::Format("dimension 0".into()));
    }
    Ok(CsolHeader { d, n })
}

/// Streaming CSOL writer; `finish` patches nothing, so `d` must be known.
pub struct CsolWriter<W: Write> {
    out: W,
    n: usize,
    remaining: u64,
}

impl<W: Write> CsolWriter<W> {
    pub fn new(mut out: W, d: u64, n: usize) -> Result<Self, StreamError> {
        out.write_all(CSOL_MAGIC)?;
        out.write_all(&[CSOL_VERSION])?;
        out.write_all(&d.to_le_bytes())?;
        out.write_all(&(n as u32).to_le_bytes())?;
        Ok(Self {
            out,
            n,
            remaining: d,
        })
    }

    pub fn push(&mut self, p: &[Complex64]) -> Result<(), StreamError> {
        if p.len() != self.n {
            return Err(StreamError::DimensionMismatch {
                expected: self.n,
                got: p.len(),
            });
        }
        if self.remaining == 0 {
            return Err(StreamError::Format("more points than declared".into()));
        }
        self.remaining -= 1;
        for z in p {
            self.out.write_all(&z.re.to_le_bytes())?;
            self.out.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, StreamError> {
        if self.remaining != 0 {
            return Err(StreamError::Format(format!(
                "{} declared points were never written",
                self.remaining
            )));
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Writes `points` as a CSOL file.
pub fn write_csol(path: &Path, n: usize, points: &[Vec<Complex64>]) -> Result<(), StreamError> {
    let file = BufWriter::new(File::create(path)?);
    let mut w = CsolWriter::new(file, points.len() as u64, n)?;
    for p in points {
        w.push(p)?;
    }
    w.finish()?;
    Ok(())
}

/// Copies a whole stream into a CSOL file, leaving the source reset.
pub fn spool_to_csol(src: &mut dyn SolutionStream, path: &Path) -> Result<(), StreamError> {
    src.reset()?;
    let file = BufWriter::new(File::create(path)?);
    let mut w = CsolWriter::new(file, src.len(), src.dim())?;
    while let Some(p) = src.next_point()? {
        w.push(p)?;
    }
    w.finish()?;
    src.reset()
}

/// Seekable binary candidate file.
#[derive(Debug)]
pub struct FileStream {
    path: PathBuf,
    reader: BufReader<File>,
    header: CsolHeader,
    pos: u64,
    buf: Vec<Complex64>,
    raw: Vec<u8>,
    counters: StreamCounters,
    ledger: Option<PointLedger>,
    _buffer: BufferGuard,
}

impl FileStream {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StreamError> {
        Self::open_with(path.as_ref(), None)
    }

    pub fn open_with(path: &Path, ledger: Option<&PointLedger>) -> Result<Self, StreamError> {
        let file = File::open(path)?;
        let file_len = file.metadata()?.len();
        let mut reader = BufReader::new(file);
        let header = read_csol_header(&mut reader)?;
        let expected = header
            .d
            .checked_mul(header.n as u64 * 16)
            .and_then(|b| b.checked_add(CSOL_HEADER_LEN));
        if expected != Some(file_len) {
            return Err(StreamError::Format(format!(
                "file holds {file_len} bytes, header implies {}",
                expected.map_or("overflow".to_string(), |e| e.to_string())
            )));
        }
        let n = header.n as usize;
        Ok(Self {
            path: path.to_path_buf(),
            reader,
            header,
            pos: 0,
            buf: vec![Complex64::new(0.0, 0.0); n],
            raw: vec![0; n * 16],
            counters: StreamCounters::default(),
            ledger: ledger.cloned(),
            _buffer: BufferGuard::new(ledger.cloned()),
        })
    }

    pub fn header(&self) -> CsolHeader {
        self.header
    }
}

impl SolutionStream for FileStream {
    fn len(&self) -> u64 {
        self.header.d
    }

    fn dim(&self) -> usize {
        self.header.n as usize
    }

    fn position(&self) -> u64 {
        self.pos
    }

    fn next_point(&mut self) -> Result<Option<&[Complex64]>, StreamError> {
        if self.pos == self.header.d {
            return Ok(None);
        }
        self.reader.read_exact(&mut self.raw)?;
        for (z, c) in self.buf.iter_mut().zip(self.raw.chunks_exact(16)) {
            z.re = f64::from_le_bytes(c[..8].try_into().unwrap());
            z.im = f64::from_le_bytes(c[8..].try_into().unwrap());
        }
        self.pos += 1;
        self.counters.next_calls += 1;
        self.counters.reads += 1;
        Ok(Some(&self.buf))
    }

    fn reset(&mut self) -> Result<(), StreamError> {
        self.reader.seek(SeekFrom::Start(CSOL_HEADER_LEN))?;
        self.pos = 0;
        Ok(())
    }

    fn advance_by(&mut self, n: u64) -> Result<(), StreamError> {
        check_overrun(self.pos, self.header.d, n)?;
        if n > 0 {
            let bytes = n * self.header.n as u64 * 16;
            self.reader.seek_relative(bytes as i64)?;
            self.counters.seeks += 1;
        }
        self.pos += n;
        self.counters.advance_steps += n;
        Ok(())
    }

    fn counters(&self) -> StreamCounters {
        self.counters
    }

    fn fork(&self) -> Result<Box<dyn SolutionStream>, StreamError> {
        Ok(Box::new(FileStream::open_with(
            &self.path,
            self.ledger.as_ref(),
        )?))
    }
}

/// Candidates computed on demand from an index.
#[derive(Clone)]
pub struct GeneratorStream {
    family: Arc<dyn Family>,
    pos: u64,
    buf: Vec<Complex64>,
    counters: StreamCounters,
    _buffer: BufferGuard,
}

impl std::fmt::Debug for GeneratorStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneratorStream")
            .field("family", &self.family.describe())
            .field("pos", &self.pos)
            .finish()
    }
}

impl GeneratorStream {
    pub fn new(family: Arc<dyn Family>) -> Self {
        let n = family.dim();
        Self {
            family,
            pos: 0,
            buf: vec![Complex64::new(0.0, 0.0); n],
            counters: StreamCounters::default(),
            _buffer: BufferGuard::new(None),
        }
    }

    pub fn with_ledger(mut self, ledger: &PointLedger) -> Self {
        self._buffer = BufferGuard::new(Some(ledger.clone()));
        self
    }

    pub fn family(&self) -> &Arc<dyn Family> {
        &self.family
    }
}

impl SolutionStream for GeneratorStream {
    fn len(&self) -> u64 {
        self.family.len()
    }

    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn position(&self) -> u64 {
        self.pos
    }

    fn next_point(&mut self) -> Result<Option<&[Complex64]>, StreamError> {
        if self.pos == self.family.len() {
            return Ok(None);
        }
        self.family.point(self.pos, &mut self.buf);
        self.pos += 1;
        self.counters.next_calls += 1;
        Ok(Some(&self.buf))
    }

    fn reset(&mut self) -> Result<(), StreamError> {
        self.pos = 0;
        Ok(())
    }

    fn advance_by(&mut self, n: u64) -> Result<(), StreamError> {
        check_overrun(self.pos, self.family.len(), n)?;
        self.pos += n;
        self.counters.advance_steps += n;
        Ok(())
    }

    fn counters(&self) -> StreamCounters {
        self.counters
    }

    fn fork(&self) -> Result<Box<dyn SolutionStream>, StreamError> {
        let mut s = self.clone();
        s.pos = 0;
        s.counters = StreamCounters::default();
        Ok(Box::new(s))
    }
}

/// Reads every point of a stream into memory (tests and small inputs).
pub fn collect_all(s: &mut dyn SolutionStream) -> Result<Vec<Vec<Complex64>>, StreamError> {
    s.reset()?;
    let mut out = Vec::with_capacity(s.len() as usize);
    while let Some(p) = s.next_point()? {
        out.push(p.to_vec());
    }
    s.reset()?;
    Ok(out)
}
