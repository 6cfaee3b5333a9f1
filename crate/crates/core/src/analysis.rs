//! The bound formulas and their empirical probes.
//!
//! The makespan bound has the shape
//!
//! ```text
//! E[C_max] ≤ W/p + 4·λ·γ(p)·log2(W/2λ) + 3λ
//! ```
//!
//! built from the per-interval potential contraction
//! `E[φ(k+1) | F_k] ≤ h(r_k)·φ(k)` with `h(r) = 1 − q(r)/4` and
//! `q(r) = 1 − ((p−2)/(p−1))^r`, the probability that a given processor
//! receives at least one of r requests under uniform victim choice. The
//! constant `γ(p) = max_{1≤r≤p} r/(−p·log2 h(r))` converts the
//! contraction into a request-count bound; it is below
//! `1/(2 − log2(3 + 1/e)) ≈ 4.0297` for every p.
//!
//! Everything here is a pure function except [`lemma1_probe`], which
//! replays frozen engine states.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{continue_one_interval, Snapshot};
use crate::mix::stream_seed;
use crate::model::RunTrace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("p must be ≥ 2 (got {0})")]
    DomainP(u32),
    #[error("trace was produced without series instrumentation")]
    NotInstrumented,
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("probe rejects states with φ = 0")]
    ZeroPotential,
}

/// Probability that a given processor receives one or more of `r` steal
/// requests when each thief picks uniformly among the other p−1:
/// `q(r) = 1 − ((p−2)/(p−1))^r`.
pub fn q_of_r(r: u64, p: u32) -> Result<f64, AnalysisError> {
    if p < 2 {
        return Err(AnalysisError::DomainP(p));
    }
    if r == 0 {
        return Ok(0.0);
    }
    let miss = (f64::from(p) - 2.0) / (f64::from(p) - 1.0);
    Ok(1.0 - miss.powf(r as f64))
}

/// Expected one-interval potential contraction factor,
/// `h(r) = 1 − q(r)/4 ∈ [3/4, 1]`.
pub fn h_of_r(r: u64, p: u32) -> Result<f64, AnalysisError> {
    Ok(1.0 - q_of_r(r, p)? / 4.0)
}

/// `f(r) = −log2 h(r) = 2 − log2(3 + (1 − 1/(p−1))^r)`.
fn f_of_r(r: u64, p: u32) -> f64 {
    let v = 1.0 - 1.0 / (f64::from(p) - 1.0);
    2.0 - (3.0 + v.powf(r as f64)).log2()
}

/// `γ(p) = max_{1≤r≤p} r / (p·f(r))`, by exhaustive search over integer r.
///
/// g(r) = r/f(r) is numerically increasing in r, so the maximum sits at
/// r = p; the search is kept exhaustive anyway (it is cheap and does not
/// bake in the monotonicity, which [`g_monotone_on`] checks separately).
pub fn gamma(p: u32) -> Result<f64, AnalysisError> {
    if p < 2 {
        return Err(AnalysisError::DomainP(p));
    }
    let mut best = f64::NEG_INFINITY;
    for r in 1..=u64::from(p) {
        let g = r as f64 / (f64::from(p) * f_of_r(r, p));
        if g > best {
            best = g;
        }
    }
    Ok(best)
}

/// The p-independent cap `1/(2 − log2(3 + 1/e)) ≈ 4.0297`; γ(p) approaches
/// it from below.
pub fn gamma_cap() -> f64 {
    1.0 / (2.0 - (3.0 + std::f64::consts::E.recip()).log2())
}

/// Whether g(r) = r/f(r) is strictly increasing over r ∈ {1, …, p}.
pub fn g_monotone_on(p: u32) -> Result<bool, AnalysisError> {
    if p < 2 {
        return Err(AnalysisError::DomainP(p));
    }
    let mut prev = f64::NEG_INFINITY;
    for r in 1..=u64::from(p) {
        let g = r as f64 / f_of_r(r, p);
        if g <= prev {
            return Ok(false);
        }
        prev = g;
    }
    Ok(true)
}

/// A bound value plus a flag for degenerate log arguments (≤ 1), where the
/// formula's log term vanishes or would go negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    pub degenerate_log: bool,
}

/// Expected-makespan bound with an explicit γ:
/// `W/p + 4·λ·γ·log2(W/2λ) + 3λ`, falling back to `W/p + 3λ` (flagged)
/// when W ≤ 2λ.
pub fn bound_expectation_with_gamma(w: u64, p: u32, lambda: u64, gamma: f64) -> BoundValue {
    let wp = w as f64 / f64::from(p);
    let arg = w as f64 / (2.0 * lambda as f64);
    if arg <= 1.0 {
        BoundValue {
            value: wp + 3.0 * lambda as f64,
            degenerate_log: true,
        }
    } else {
        BoundValue {
            value: wp + 4.0 * lambda as f64 * gamma * arg.log2() + 3.0 * lambda as f64,
            degenerate_log: false,
        }
    }
}

/// Expected-makespan bound with the exact γ(p).
pub fn bound_expectation(w: u64, p: u32, lambda: u64) -> Result<BoundValue, AnalysisError> {
    Ok(bound_expectation_with_gamma(w, p, lambda, gamma(p)?))
}

/// Expected-request bound until τ: `E[R] ≤ 2·p·γ(p)·log2(W/λ)`, flagged
/// degenerate when W ≤ λ.
pub fn lemma2_bound_r(w: u64, p: u32, lambda: u64) -> Result<BoundValue, AnalysisError> {
    let g = gamma(p)?;
    let arg = w as f64 / lambda as f64;
    if arg <= 1.0 {
        Ok(BoundValue {
            value: 0.0,
            degenerate_log: true,
        })
    } else {
        Ok(BoundValue {
            value: 2.0 * f64::from(p) * g * arg.log2(),
            degenerate_log: false,
        })
    }
}

/// The two published forms of the makespan tail probability at slack x.
/// The theorem states 2^−x; its supporting lemma's proof derives
/// 2^{−x/(pγ)}. They disagree, so both are reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBounds {
    /// 2^−x, as stated in the theorem.
    pub prob_paper: f64,
    /// 2^{−x/(p·γ(p))}, as derived in the lemma proof.
    pub prob_proof: f64,
}

pub fn bound_tail(p: u32, x: f64) -> Result<TailBounds, AnalysisError> {
    let g = gamma(p)?;
    Ok(TailBounds {
        prob_paper: (-x).exp2(),
        prob_proof: (-x / (f64::from(p) * g)).exp2(),
    })
}

/// Everything the bound layer has to say about one (W, p, λ) point.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub gamma: f64,
    pub bound_expectation: f64,
    pub expectation_degenerate_log: bool,
    pub lemma2_bound_r: f64,
    pub lemma2_degenerate_log: bool,
    pub tail_x: Option<f64>,
    pub tail_prob_paper: Option<f64>,
    pub tail_prob_proof: Option<f64>,
}

pub fn bound_report(
    w: u64,
    p: u32,
    lambda: u64,
    x: Option<f64>,
) -> Result<BoundReport, AnalysisError> {
    let g = gamma(p)?;
    let expectation = bound_expectation_with_gamma(w, p, lambda, g);
    let lemma2 = lemma2_bound_r(w, p, lambda)?;
    let tail = x.map(|x| bound_tail(p, x)).transpose()?;
    Ok(BoundReport {
        gamma: g,
        bound_expectation: expectation.value,
        expectation_degenerate_log: expectation.degenerate_log,
        lemma2_bound_r: lemma2.value,
        lemma2_degenerate_log: lemma2.degenerate_log,
        tail_x: x,
        tail_prob_paper: tail.map(|t| t.prob_paper),
        tail_prob_proof: tail.map(|t| t.prob_proof),
    })
}

/// φ and r at one interval boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PotentialSample {
    pub k: u64,
    /// φ(k) = Σ w_i(kλ)² + 2·s_i(kλ)².
    pub phi: u128,
    /// Requests arriving in ((k−1)λ, kλ].
    pub r_k: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialSeries {
    pub samples: Vec<PotentialSample>,
    /// First k with every processor at ≤ 3λ work.
    pub tau: u64,
    /// Σ_{s=0}^{τ−1} r_s.
    pub r_until_tau: u64,
}

/// Rebuild the interval view of a run from a series-instrumented trace,
/// recomputing τ and R from the recorded series (the engine's online
/// values serve as a cross-check in tests).
pub fn extract_potential_series(
    trace: &RunTrace,
    lambda: u64,
) -> Result<PotentialSeries, AnalysisError> {
    if trace.phi_series.is_empty() {
        return Err(AnalysisError::NotInstrumented);
    }
    let n = trace.phi_series.len();
    if trace.r_series.len() != n || trace.max_w_series.len() != n {
        return Err(AnalysisError::MalformedTrace(format!(
            "series lengths differ: phi={n} r={} max_w={}",
            trace.r_series.len(),
            trace.max_w_series.len()
        )));
    }
    let samples: Vec<PotentialSample> = trace
        .phi_series
        .iter()
        .zip(&trace.r_series)
        .enumerate()
        .map(|(k, (&phi, &r_k))| PotentialSample { k: k as u64, phi, r_k })
        .collect();
    let tau = trace
        .max_w_series
        .iter()
        .position(|&m| m <= 3 * lambda)
        .ok_or_else(|| {
            AnalysisError::MalformedTrace("no boundary with all w ≤ 3λ; series truncated?".into())
        })? as u64;
    let r_until_tau = trace.r_series[..tau as usize].iter().sum();
    Ok(PotentialSeries {
        samples,
        tau,
        r_until_tau,
    })
}

/// Outcome of one Lemma-1 probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    /// Steal requests in flight in the frozen state; they all arrive
    /// within the probed interval.
    pub r_incoming: u64,
    pub phi_before: u128,
    pub ensemble: u32,
    /// Ensemble mean of φ(k+1)/φ(k).
    pub mean_ratio: f64,
    /// 1 − q(r)/4.
    pub bound: f64,
    pub std_error: f64,
    /// mean_ratio ≤ bound + 2·std_error.
    pub satisfied: bool,
}

/// Empirical check of the one-interval contraction on a frozen state.
///
/// Runs `ensemble` independent continuations of the snapshot for λ ticks.
/// Destinations of in-flight requests are part of the frozen state; the
/// fresh randomness only affects which simultaneous request a victim
/// elects (and emissions, which cannot influence φ(k+1) because anything
/// sent after kλ arrives after (k+1)λ). Continuation i draws from a
/// stream derived from (seed, i).
pub fn lemma1_probe(snapshot: &Snapshot, ensemble: u32) -> Result<ProbeReport, AnalysisError> {
    if snapshot.phi == 0 {
        return Err(AnalysisError::ZeroPotential);
    }
    let r = snapshot.in_flight_requests();
    let p = snapshot.config.processors;
    let q = if r == 0 { 0.0 } else { q_of_r(r, p)? };
    let bound = 1.0 - q / 4.0;
    let phi_before = snapshot.phi as f64;
    let n = ensemble.max(1);
    let mut ratios = Vec::with_capacity(n as usize);
    for i in 0..n {
        let rng = ChaCha8Rng::seed_from_u64(stream_seed(snapshot.config.seed, u64::from(i)));
        let phi_after = continue_one_interval(snapshot, rng);
        ratios.push(phi_after as f64 / phi_before);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let std_error = if ratios.len() > 1 {
        let var = ratios.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
            / (ratios.len() - 1) as f64;
        (var / ratios.len() as f64).sqrt()
    } else {
        0.0
    };
    Ok(ProbeReport {
        r_incoming: r,
        phi_before: snapshot.phi,
        ensemble: n,
        mean_ratio: mean,
        bound,
        std_error,
        satisfied: mean <= bound + 2.0 * std_error,
    })
}
