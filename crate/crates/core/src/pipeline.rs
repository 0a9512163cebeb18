//! Leaf-by-leaf certification and the global tallies N(ℂ), N(ℝ).

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::bsp::{
    build_tree, leaf_member_indices, BspTree, BuildConfig, BuildCounters, LeafId,
    MaskedLeafStream, TreeStats,
};
use crate::engines::{certify, distinct, Certificate, Engine, Realness};
use crate::poly::PolynomialSystem;
use crate::stream::{PointLedger, SolutionStream, TrackedPoints};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FailureReason {
    CertFailed,
    BoundaryCrossing,
    DuplicateInLeaf,
    OversizedLeafSkipped,
}

impl FailureReason {
    pub fn name(self) -> &'static str {
        match self {
            FailureReason::CertFailed => "cert_failed",
            FailureReason::BoundaryCrossing => "boundary_crossing",
            FailureReason::DuplicateInLeaf => "duplicate_in_leaf",
            FailureReason::OversizedLeafSkipped => "oversized_leaf_skipped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Failure {
    pub candidate_index: u64,
    pub reason: FailureReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeafTally {
    pub leaf: LeafId,
    pub n_complex: u64,
    pub n_real: u64,
}

/// Counters of the certification phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CertifyCounters {
    pub next_calls: u64,
    pub advance_steps: u64,
    pub bit_lookups: u64,
    /// Threshold comparisons used to route points without bitmasks.
    pub routing_comparisons: u64,
    /// Comparisons spent on slab containment of certificates.
    pub containment_comparisons: u64,
    pub successful_certificates: u64,
    /// Finite slab bounds skipped over all containment checks.
    pub skipped_infinite_bounds: u64,
}

impl std::ops::AddAssign for CertifyCounters {
    fn add_assign(&mut self, o: Self) {
        self.next_calls += o.next_calls;
        self.advance_steps += o.advance_steps;
        self.bit_lookups += o.bit_lookups;
        self.routing_comparisons += o.routing_comparisons;
        self.containment_comparisons += o.containment_comparisons;
        self.successful_certificates += o.successful_certificates;
        self.skipped_infinite_bounds += o.skipped_infinite_bounds;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally {
    pub n_complex: u64,
    pub n_real: u64,
    pub failures: Vec<Failure>,
    pub per_leaf: Vec<LeafTally>,
    pub counters: CertifyCounters,
}

impl Tally {
    pub fn failure_count(&self, reason: FailureReason) -> usize {
        self.failures.iter().filter(|f| f.reason == reason).count()
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub engine: Engine,
    /// Leaves above this count are skipped. `None` means `16·k`.
    pub oversize_cap: Option<u64>,
    /// Worker count; 1 runs sequentially, 0 uses every core.
    pub threads: usize,
    pub ledger: Option<PointLedger>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            engine: Engine::Krawczyk,
            oversize_cap: None,
            threads: 1,
            ledger: None,
        }
    }
}

impl CertifyOptions {
    pub fn new(engine: Engine) -> Self {
        Self {
            engine,
            ..Self::default()
        }
    }
}

struct LeafOutcome {
    tally: LeafTally,
    failures: Vec<Failure>,
    counters: CertifyCounters,
}

fn check_dims(stream: &dyn SolutionStream, f: &PolynomialSystem) -> Result<(), Error> {
    if stream.dim() != f.n_vars() {
        return Err(Error::DimensionMismatch {
            system: f.n_vars(),
            stream: stream.dim(),
        });
    }
    Ok(())
}

fn quick_distinct(
    a: &Certificate,
    b: &Certificate,
    sa: &[Complex64],
    sb: &[Complex64],
) -> Result<bool, Error> {
    // disjoint outward-rounded Re(x₁) projections already separate the roots
    if a.re1_range.hi() < b.re1_range.lo() || b.re1_range.hi() < a.re1_range.lo() {
        return Ok(true);
    }
    Ok(distinct(a, b, sa, sb)?)
}

/// Keeps the first certificate of every group that cannot be told apart;
/// returns the indices (into `certs`) of the others.
fn dedup(certs: &[(Certificate, Vec<Complex64>)]) -> Result<Vec<usize>, Error> {
    let mut kept: Vec<usize> = Vec::new();
    let mut dup = Vec::new();
    // candidates in index order, compared against kept ones that may overlap
    let mut by_index: Vec<usize> = (0..certs.len()).collect();
    by_index.sort_by_key(|&i| certs[i].0.candidate_index);
    for i in by_index {
        let (ci, si) = &certs[i];
        let mut is_dup = false;
        for &j in &kept {
            let (cj, sj) = &certs[j];
            if !quick_distinct(ci, cj, si, sj)? {
                is_dup = true;
                break;
            }
        }
        if is_dup {
            dup.push(i);
        } else {
            kept.push(i);
        }
    }
    Ok(dup)
}

fn certify_leaf(
    stream: &mut dyn SolutionStream,
    tree: &BspTree,
    f: &PolynomialSystem,
    leaf: LeafId,
    opts: &CertifyOptions,
) -> Result<LeafOutcome, Error> {
    let count = tree.leaf_count(leaf);
    let cap = opts
        .oversize_cap
        .unwrap_or(tree.config.k.saturating_mul(16));
    let mut counters = CertifyCounters::default();
    let mut failures = Vec::new();
    let before = stream.counters();
    let slab = tree.slab(leaf);
    let mut tally = LeafTally {
        leaf,
        n_complex: 0,
        n_real: 0,
    };

    if count > cap {
        let skipped = if tree.has_bitmasks() {
            counters.bit_lookups += tree.d * tree.path_to(leaf).len() as u64;
            leaf_member_indices(tree, leaf)?
        } else {
            let mut out = Vec::new();
            stream.reset()?;
            loop {
                let i = stream.position();
                let Some(p) = stream.next_point()? else { break };
                let (inside, cmp) = slab_filter(slab.lo, slab.hi, p[0].re);
                counters.routing_comparisons += cmp;
                if inside {
                    out.push(i);
                }
            }
            out
        };
        failures.extend(skipped.into_iter().map(|i| Failure {
            candidate_index: i,
            reason: FailureReason::OversizedLeafSkipped,
        }));
        let after = stream.counters();
        counters.next_calls = after.next_calls - before.next_calls;
        counters.advance_steps = after.advance_steps - before.advance_steps;
        return Ok(LeafOutcome {
            tally,
            failures,
            counters,
        });
    }

    // collect R_ℓ ∩ S
    let mut points = TrackedPoints::new(opts.ledger.clone());
    if tree.has_bitmasks() {
        let mut m = MaskedLeafStream::new(stream, tree, leaf)?;
        let mut j = 0;
        let members = leaf_member_indices(tree, leaf)?;
        while let Some(p) = m.next_point()? {
            points.push(members[j], p);
            j += 1;
        }
        counters.bit_lookups += m.bit_lookups;
    } else {
        stream.reset()?;
        loop {
            let i = stream.position();
            let Some(p) = stream.next_point()? else { break };
            let (inside, cmp) = slab_filter(slab.lo, slab.hi, p[0].re);
            counters.routing_comparisons += cmp;
            if inside {
                points.push(i, p);
            }
        }
    }
    let after = stream.counters();
    counters.next_calls = after.next_calls - before.next_calls;
    counters.advance_steps = after.advance_steps - before.advance_steps;

    let mut good: Vec<(Certificate, Vec<Complex64>)> = Vec::new();
    for (i, p) in points.iter() {
        let cert = certify(opts.engine, f, p)?.with_index(i);
        if !cert.success {
            failures.push(Failure {
                candidate_index: i,
                reason: FailureReason::CertFailed,
            });
            continue;
        }
        counters.successful_certificates += 1;
        let (inside, cmp) = tree.slab_contains_counted(leaf, &cert.re1_range);
        counters.containment_comparisons += cmp;
        counters.skipped_infinite_bounds +=
            [slab.lo, slab.hi].iter().filter(|b| !b.is_finite()).count() as u64;
        if !inside {
            failures.push(Failure {
                candidate_index: i,
                reason: FailureReason::BoundaryCrossing,
            });
            continue;
        }
        good.push((cert, p.to_vec()));
    }
    let dups = dedup(&good)?;
    for &j in &dups {
        failures.push(Failure {
            candidate_index: good[j].0.candidate_index,
            reason: FailureReason::DuplicateInLeaf,
        });
    }
    for (j, (c, _)) in good.iter().enumerate() {
        if dups.contains(&j) {
            continue;
        }
        tally.n_complex += 1;
        if c.real_certified == Realness::Yes {
            tally.n_real += 1;
        }
    }
    Ok(LeafOutcome {
        tally,
        failures,
        counters,
    })
}

// lo ≤ x < hi over the finite bounds
fn slab_filter(lo: f64, hi: f64, x: f64) -> (bool, u64) {
    let mut cmp = 0;
    if lo.is_finite() {
        cmp += 1;
        if !(lo <= x) {
            return (false, cmp);
        }
    }
    if hi.is_finite() {
        cmp += 1;
        if !(x < hi) {
            return (false, cmp);
        }
    }
    (true, cmp)
}

fn merge(outcomes: Vec<LeafOutcome>) -> Tally {
    let mut t = Tally::default();
    for o in outcomes {
        t.n_complex += o.tally.n_complex;
        t.n_real += o.tally.n_real;
        t.per_leaf.push(o.tally);
        t.failures.extend(o.failures);
        t.counters += o.counters;
    }
    t.failures.sort();
    t
}

/// Certifies every leaf of `tree` and sums the per-leaf counts.
///
/// With `threads == 1` (or without the `parallel` feature) leaves are
/// processed in order on `stream` itself. Otherwise each worker forks the
/// stream; counters are per leaf and summed, so the totals do not depend on
/// the schedule.
pub fn certify_leafwise(
    stream: &mut dyn SolutionStream,
    tree: &BspTree,
    f: &PolynomialSystem,
    opts: &CertifyOptions,
) -> Result<Tally, Error> {
    check_dims(stream, f)?;
    tree.check_stream(stream)?;
    let leaves: Vec<LeafId> = tree.leaf_ids().collect();

    #[cfg(feature = "parallel")]
    if opts.threads != 1 && leaves.len() > 1 {
        return par::certify_parallel(stream, tree, f, opts, &leaves).map(merge);
    }

    let mut out = Vec::with_capacity(leaves.len());
    for leaf in leaves {
        out.push(certify_leaf(stream, tree, f, leaf, opts)?);
    }
    stream.reset()?;
    Ok(merge(out))
}

#[cfg(feature = "parallel")]
mod par {
    use rayon::prelude::*;

    use super::*;

    pub(super) fn certify_parallel(
        stream: &mut dyn SolutionStream,
        tree: &BspTree,
        f: &PolynomialSystem,
        opts: &CertifyOptions,
        leaves: &[LeafId],
    ) -> Result<Vec<LeafOutcome>, Error> {
        // forks are made up front so the workers never touch `stream`
        let base: &dyn SolutionStream = stream;
        let run = || -> Result<Vec<LeafOutcome>, Error> {
            leaves
                .par_iter()
                .map_init(
                    || base.fork(),
                    |s, &leaf| match s {
                        Ok(s) => certify_leaf(s.as_mut(), tree, f, leaf, opts),
                        Err(e) => Err(Error::Invalid(format!("cannot fork stream: {e}"))),
                    },
                )
                .collect()
        };
        if opts.threads == 0 {
            run()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .map_err(|e| Error::Invalid(e.to_string()))?
                .install(run)
        }
    }
}

/// Build followed by leaf-wise certification.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub engine: Engine,
    pub bitmask: bool,
    pub d: u64,
    pub n: usize,
    pub tally: Tally,
    pub tree: TreeStats,
    pub build: BuildCounters,
    pub accounted_bits: u64,
    /// Peak live candidate points, when a ledger was supplied.
    pub peak_live_points: Option<u64>,
}

pub fn certify_main(
    stream: &mut dyn SolutionStream,
    f: &PolynomialSystem,
    cfg: &BuildConfig,
    opts: &CertifyOptions,
) -> Result<(Report, BspTree), Error> {
    check_dims(stream, f)?;
    if let Some(l) = &opts.ledger {
        l.reset_peak();
    }
    let tree = build_tree(stream, cfg)?;
    let tally = certify_leafwise(stream, &tree, f, opts)?;
    let report = Report {
        engine: opts.engine,
        bitmask: cfg.bitmask,
        d: tree.d,
        n: tree.n,
        tree: tree.stats(),
        build: tree.build,
        accounted_bits: account_memory(&tree, opts.engine),
        peak_live_points: opts.ledger.as_ref().map(PointLedger::peak),
        tally,
    };
    Ok((report, tree))
}

/// Single-part reference: certify everything, then test all pairs.
pub fn certify_naive(
    stream: &mut dyn SolutionStream,
    f: &PolynomialSystem,
    engine: Engine,
) -> Result<Tally, Error> {
    check_dims(stream, f)?;
    stream.reset()?;
    let mut failures = Vec::new();
    let mut good = Vec::new();
    let mut counters = CertifyCounters::default();
    loop {
        let i = stream.position();
        let Some(p) = stream.next_point()? else { break };
        let p = p.to_vec();
        let c = certify(engine, f, &p)?.with_index(i);
        if c.success {
            counters.successful_certificates += 1;
            good.push((c, p));
        } else {
            failures.push(Failure {
                candidate_index: i,
                reason: FailureReason::CertFailed,
            });
        }
    }
    counters.next_calls = stream.counters().next_calls;
    stream.reset()?;
    let dups = dedup(&good)?;
    for &j in &dups {
        failures.push(Failure {
            candidate_index: good[j].0.candidate_index,
            reason: FailureReason::DuplicateInLeaf,
        });
    }
    let mut t = Tally {
        counters,
        ..Tally::default()
    };
    for (j, (c, _)) in good.iter().enumerate() {
        if !dups.contains(&j) {
            t.n_complex += 1;
            t.n_real += u64::from(c.real_certified == Realness::Yes);
        }
    }
    t.per_leaf.push(LeafTally {
        leaf: LeafId(0),
        n_complex: t.n_complex,
        n_real: t.n_real,
    });
    failures.sort();
    t.failures = failures;
    Ok(t)
}

/// Bits held at the peak of a run on `tree`:
/// tree storage plus `384·n` bits per candidate and box (`+128` for β).
pub fn account_memory(tree: &BspTree, engine: Engine) -> u64 {
    let st = tree.stats();
    let k_eff = st.max_leaf_count;
    let structure = if tree.has_bitmasks() {
        st.bitmask_bits
    } else {
        64 * (st.m as u64 - 1)
    };
    let extra = match engine {
        Engine::Alpha => 128 * k_eff,
        Engine::Krawczyk => 0,
    };
    structure + 384 * tree.n as u64 * k_eff + extra
}

impl Report {
    /// `key = value` lines; `measured.*` only when `with_counters`.
    pub fn render(&self, with_counters: bool) -> String {
        let mut s = String::new();
        let t = &self.tally;
        let _ = writeln!(s, "engine = {}", self.engine.name());
        let _ = writeln!(s, "bitmask = {}", if self.bitmask { "on" } else { "off" });
        let _ = writeln!(s, "d = {}", self.d);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "n_complex = {}", t.n_complex);
        let _ = writeln!(s, "n_real = {}", t.n_real);
        let _ = writeln!(s, "failures = {}", t.failures.len());
        for (i, f) in t.failures.iter().enumerate() {
            let _ = writeln!(s, "failure[{i}] = {} {}", f.candidate_index, f.reason.name());
        }
        let _ = writeln!(s, "tree.m = {}", self.tree.m);
        let _ = writeln!(s, "tree.height = {}", self.tree.height);
        let _ = writeln!(s, "tree.bitmask_bits = {}", self.tree.bitmask_bits);
        let _ = writeln!(s, "tree.max_leaf_count = {}", self.tree.max_leaf_count);
        let _ = writeln!(s, "tree.oversized_leaves = {}", self.tree.oversized_leaves);
        let _ = writeln!(s, "accounted_bits = {}", self.accounted_bits);
        if with_counters {
            let c = &t.counters;
            let _ = writeln!(s, "measured.build_passes = {}", self.build.passes);
            let _ = writeln!(s, "measured.build_next_calls = {}", self.build.next_calls);
            let _ = writeln!(s, "measured.build_bit_lookups = {}", self.build.bit_lookups);
            let _ = writeln!(s, "measured.build_comparisons = {}", self.build.comparisons);
            let _ = writeln!(s, "measured.certify_next_calls = {}", c.next_calls);
            let _ = writeln!(s, "measured.certify_advance_steps = {}", c.advance_steps);
            let _ = writeln!(s, "measured.certify_bit_lookups = {}", c.bit_lookups);
            let _ = writeln!(s, "measured.routing_comparisons = {}", c.routing_comparisons);
            let _ = writeln!(s, "measured.containment_comparisons = {}", c.containment_comparisons);
            let _ = writeln!(s, "measured.successful_certificates = {}", c.successful_certificates);
            if let Some(p) = self.peak_live_points {
                let _ = writeln!(s, "measured.peak_live_points = {p}");
                let _ = writeln!(s, "measured.peak_candidate_bytes = {}", p * self.n as u64 * 16);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsp::SplitStrategy;
    use crate::poly::parse_system;
    use crate::stream::InMemoryStream;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mem(points: &[Complex64]) -> InMemoryStream {
        InMemoryStream::new(1, points.iter().map(|&z| vec![z]).collect()).unwrap()
    }

    #[test]
    fn two_real_roots_in_two_leaves() {
        let f = parse_system("x1^2 - 1").unwrap();
        let mut s = mem(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let cfg = BuildConfig {
            k: 1,
            root_split: Some(0.0),
            epsilon: 0.1,
            ..BuildConfig::default()
        };
        let tree = build_tree(&mut s, &cfg).unwrap();
        assert_eq!(tree.num_leaves(), 2);
        for engine in [Engine::Krawczyk, Engine::Alpha] {
            let t = certify_leafwise(&mut s, &tree, &f, &CertifyOptions::new(engine)).unwrap();
            assert_eq!((t.n_complex, t.n_real), (2, 2));
            assert!(t.failures.is_empty());
        }
    }

    #[test]
    fn conjugate_pair_in_one_leaf() {
        let f = parse_system("x1^2 + 1").unwrap();
        let mut s = mem(&[c(0.0, 1.0), c(0.0, -1.0)]);
        let (r, tree) = certify_main(
            &mut s,
            &f,
            &BuildConfig { k: 1, ..Default::default() },
            &CertifyOptions::default(),
        )
        .unwrap();
        assert_eq!(tree.num_leaves(), 1);
        assert_eq!((r.tally.n_complex, r.tally.n_real), (2, 0));
    }

    #[test]
    fn singular_root_is_a_failure() {
        let f = parse_system("x1^2 - 2*x1 + 1").unwrap();
        let mut s = mem(&[c(1.0, 0.0)]);
        let (r, _) = certify_main(&mut s, &f, &BuildConfig::default(), &CertifyOptions::default()).unwrap();
        assert_eq!(r.tally.n_complex, 0);
        assert_eq!(
            r.tally.failures,
            vec![Failure { candidate_index: 0, reason: FailureReason::CertFailed }]
        );
    }

    #[test]
    fn duplicates_are_counted_once() {
        let f = parse_system("x1^2 - 1").unwrap();
        let mut s = mem(&[c(1.0, 0.0), c(1.0 + 1e-12, 0.0), c(-1.0, 0.0)]);
        let t = certify_naive(&mut s, &f, Engine::Krawczyk).unwrap();
        assert_eq!(t.n_complex, 2);
        assert_eq!(
            t.failures,
            vec![Failure { candidate_index: 1, reason: FailureReason::DuplicateInLeaf }]
        );
    }

    #[test]
    fn boundary_crossing_is_reported() {
        let f = parse_system("x1^2 - 1").unwrap();
        let mut s = mem(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        // threshold inside the certificate box of the root at 1
        let cfg = BuildConfig {
            k: 1,
            epsilon: 1e-12,
            root_split: Some(1.0),
            ..BuildConfig::default()
        };
        let (r, _) = certify_main(&mut s, &f, &cfg, &CertifyOptions::default()).unwrap();
        assert_eq!(r.tally.n_complex, 1);
        assert_eq!(r.tally.failure_count(FailureReason::BoundaryCrossing), 1);
    }

    #[test]
    fn oversized_leaves_are_skipped() {
        let f = parse_system("x1^2 + 1").unwrap();
        let mut s = mem(&[c(0.0, 1.0), c(0.0, -1.0), c(0.0, 1.0)]);
        let opts = CertifyOptions { oversize_cap: Some(2), ..CertifyOptions::default() };
        let (r, _) = certify_main(&mut s, &f, &BuildConfig { k: 1, ..Default::default() }, &opts).unwrap();
        assert_eq!(r.tally.n_complex, 0);
        assert_eq!(r.tally.failure_count(FailureReason::OversizedLeafSkipped), 3);
        assert_eq!(r.tally.counters.next_calls, 0);
    }

    #[test]
    fn empty_stream() {
        let f = parse_system("x1^2 - 1").unwrap();
        let mut s = InMemoryStream::new(1, vec![]).unwrap();
        let (r, tree) = certify_main(&mut s, &f, &BuildConfig::default(), &CertifyOptions::default()).unwrap();
        assert_eq!((r.tally.n_complex, r.tally.n_real), (0, 0));
        assert_eq!(tree.num_leaves(), 1);
    }

    #[test]
    fn figure_one_accounting() {
        let pts = [
            c(1.8, 0.0), c(-1.2, 1.4), c(0.5, 0.0), c(-2.2, 0.0),
            c(-1.2, -1.4), c(3.2, 1.1), c(3.2, -1.1), c(-0.6, 0.0),
        ];
        let mut cfg = BuildConfig {
            k: 3,
            epsilon: 0.1,
            strategy: "prescribed:r=0,r0=1,r1=5,r01=2".parse::<SplitStrategy>().unwrap(),
            ..BuildConfig::default()
        };
        let tree = build_tree(&mut mem(&pts), &cfg).unwrap();
        assert_eq!(account_memory(&tree, Engine::Krawczyk), 1172);
        assert_eq!(account_memory(&tree, Engine::Alpha), 1556);
        cfg.bitmask = false;
        let tree = build_tree(&mut mem(&pts), &cfg).unwrap();
        assert_eq!(account_memory(&tree, Engine::Krawczyk), 1408);
    }

    #[test]
    fn dimension_mismatch() {
        let f = parse_system("x1 - 1\nx2 - 1").unwrap();
        let mut s = mem(&[c(1.0, 0.0)]);
        assert!(matches!(
            certify_naive(&mut s, &f, Engine::Krawczyk),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn report_lists_failures() {
        let f = parse_system("x1^2 - 2*x1 + 1").unwrap();
        let mut s = mem(&[c(1.0, 0.0)]);
        let (r, _) = certify_main(&mut s, &f, &BuildConfig::default(), &CertifyOptions::default()).unwrap();
        let text = r.render(false);
        assert!(text.contains("failures = 1\nfailure[0] = 0 cert_failed\n"));
        assert!(!text.contains("measured."));
        assert!(r.render(true).contains("measured.certify_next_calls = 1\n"));
    }
}
