//! Memory planner for a run of `d` candidates in `n` variables.
//!
//! Space with bitmasks is `d·log₂(m) + 384·n·k` bits (`+128·k` for α),
//! without them `64·(m−1) + 384·n·k`, where `m` leaves hold `k ≈ d/m`
//! candidates each.

use std::fmt::Write as _;

use crate::engines::Engine;

/// Bits per stored candidate: the point plus its certificate box.
pub fn per_candidate_bits(n: u64, engine: Engine) -> u64 {
    384 * n
        + match engine {
            Engine::Alpha => 128,
            Engine::Krawczyk => 0,
        }
}

/// `d·log₂(m) + c·k`.
pub fn bitmasked_bits(d: u64, m: f64, k: u64, c: u64) -> f64 {
    d as f64 * m.log2() + (c * k) as f64
}

/// `64·(m−1) + c·k`.
pub fn unmasked_bits(m: u64, k: u64, c: u64) -> u64 {
    64 * (m - 1) + c * k
}

/// Integer minimiser of a convex function on `[lo, hi]`.
fn argmin_convex(lo: u64, hi: u64, f: impl Fn(u64) -> f64) -> u64 {
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let mid = a + (b - a) / 2;
        if f(mid + 1) < f(mid) {
            a = mid + 1;
        } else {
            b = mid;
        }
    }
    a
}

/// Integer `m` minimising `d·log₂(m) + c·d/m`; close to `c·ln 2`.
pub fn bitmasked_m_star(d: u64, n: u64, engine: Engine) -> u64 {
    let c = per_candidate_bits(n, engine) as f64;
    let df = d as f64;
    argmin_convex(1, d.max(1), |m| df * (m as f64).log2() + c * df / m as f64)
}

/// Integer `k` minimising `384·n·k + 64·(d/k − 1)`; near `√(d/6n)`.
pub fn predicted_split_k_star(d: u64, n: u64, engine: Engine) -> u64 {
    let c = per_candidate_bits(n, engine) as f64;
    let df = d as f64;
    argmin_convex(1, d.max(1), |k| c * k as f64 + 64.0 * (df / k as f64 - 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub d: u64,
    pub n: u64,
    pub engine: Engine,
    pub bitmask: bool,
    pub m_star: u64,
    pub k_star: u64,
    pub memory_bits: u64,
    pub build_next_calls: u64,
    pub certify_next_calls: u64,
    pub baseline_reference_point_bits: u64,
    pub predicted_split_k_star: u64,
    pub predicted_split_bits: u64,
    /// `c·ln 2` with bitmasks, `√(d·c/64)` without.
    pub closed_form_m_star: f64,
    pub notes: Vec<String>,
}

/// Plans `(m*, k*)` and the resulting costs.
///
/// `k` is minimised over the integers with `m = d/k` taken as real, then
/// `m* = ⌈d/k*⌉`.
pub fn plan(d: u64, n: u64, engine: Engine, bitmask: bool) -> PlanReport {
    let d = d.max(1);
    let n = n.max(1);
    let c = per_candidate_bits(n, engine);
    let df = d as f64;
    let (m_star, k_star, memory_bits, closed) = if bitmask {
        let k = argmin_convex(1, d, |k| df * (df / k as f64).log2() + (c * k) as f64);
        let m = d.div_ceil(k);
        let bits = bitmasked_bits(d, m as f64, k, c).ceil() as u64;
        (m, k, bits, c as f64 * std::f64::consts::LN_2)
    } else {
        let k = predicted_split_k_star(d, n, engine);
        let m = d.div_ceil(k);
        (m, k, unmasked_bits(m, k, c), (df * c as f64 / 64.0).sqrt())
    };
    let levels = (m_star as f64).log2().ceil() as u64;
    let pk = predicted_split_k_star(d, n, engine);
    let mut notes = Vec::new();
    if bitmask {
        notes.push(format!(
            "build next calls use d*ceil(log2 m*) = {}; a figure of 10019198441 is not reproducible from this formula",
            d * levels
        ));
    }
    notes.push(format!(
        "the predicted-split optimum is {:.4} MiB; a figure of 2.61 MB is not reproducible from 128*sqrt(6nd)-64",
        unmasked_bits(d.div_ceil(pk), pk, c) as f64 / 8.0 / 1024f64.powi(2)
    ));
    PlanReport {
        d,
        n,
        engine,
        bitmask,
        m_star,
        k_star,
        memory_bits,
        build_next_calls: d * levels,
        certify_next_calls: if bitmask { d } else { d * m_star },
        baseline_reference_point_bits: 2 * d * 64,
        predicted_split_k_star: pk,
        predicted_split_bits: unmasked_bits(d.div_ceil(pk), pk, c),
        closed_form_m_star: closed,
        notes,
    }
}

/// `bits` in 1024-based units with four decimals; a unit is used from 1000
/// of the one below.
pub fn human_bits(bits: u64) -> String {
    let bytes = bits as f64 / 8.0;
    let units = ["B", "KiB", "MiB", "GiB", "TiB"];
    let mut v = bytes;
    let mut u = 0;
    while v >= 1000.0 && u + 1 < units.len() {
        v /= 1024.0;
        u += 1;
    }
    format!("{v:.4} {}", units[u])
}

impl PlanReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "d = {}", self.d);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "engine = {}", self.engine.name());
        let _ = writeln!(s, "bitmask = {}", if self.bitmask { "on" } else { "off" });
        let _ = writeln!(s, "m_star = {}", self.m_star);
        let _ = writeln!(s, "k_star = {}", self.k_star);
        let _ = writeln!(s, "memory_bits = {}", self.memory_bits);
        let _ = writeln!(s, "memory_human = {}", human_bits(self.memory_bits));
        let _ = writeln!(s, "build_next_calls = {}", self.build_next_calls);
        let _ = writeln!(s, "certify_next_calls = {}", self.certify_next_calls);
        let _ = writeln!(s, "baseline_reference_point_bits = {}", self.baseline_reference_point_bits);
        let _ = writeln!(s, "baseline_human = {}", human_bits(self.baseline_reference_point_bits));
        let _ = writeln!(s, "predicted_split.k_star = {}", self.predicted_split_k_star);
        let _ = writeln!(s, "predicted_split.bits = {}", self.predicted_split_bits);
        let _ = writeln!(s, "predicted_split.human = {}", human_bits(self.predicted_split_bits));
        let _ = writeln!(s, "closed_form.m_star = {:.3}", self.closed_form_m_star);
        for note in &self.notes {
            let _ = writeln!(s, "note = {note}");
        }
        s
    }
}
