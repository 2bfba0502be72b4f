//! Orchestration: hyperparameter policies, the end-to-end factoring loop,
//! analytic cost and scaling models, and the comparison experiment harness.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde_json::json;
use std::collections::HashSet;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::congruence;
use crate::error::{Error, Result};
use crate::numtheory::{generate_prime_basis, generate_rsa_key, PrimeBasis, RsaKey};
use crate::rng::derive_seed;
use crate::sieve::{sieve_cvp, SieveMode, SieveParams, SrPair, TtnParams};

/// Schnorr's sublinear lattice rank: ell / log2(ell) rounded to the
/// nearest integer (the convention that reproduces the reference ranks
/// 3, 5, 6, 8, 9, 10 for ell = 10..60).
pub fn sublinear_rank(ell: u64) -> usize {
    let x = ell as f64;
    (x / x.log2()).round() as usize
}

/// How the smoothness basis size is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pi2Policy {
    /// pi2 = 2 n ell.
    TwoNEll,
    /// pi2 = 2 n^2.
    TwoPi1Squared,
    /// pi1 = pi2 = floor(ell / log2 ell); forces the rank as well.
    Sublinear,
    /// Fixed size.
    Explicit(usize),
}

impl Pi2Policy {
    pub fn pi2(&self, rank: usize, ell: u64) -> usize {
        match self {
            Pi2Policy::TwoNEll => 2 * rank * ell as usize,
            Pi2Policy::TwoPi1Squared => 2 * rank * rank,
            Pi2Policy::Sublinear => sublinear_rank(ell),
            Pi2Policy::Explicit(k) => *k,
        }
    }
}

impl FromStr for Pi2Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_n_ell" => Ok(Self::TwoNEll),
            "two_pi1_squared" => Ok(Self::TwoPi1Squared),
            "sublinear" => Ok(Self::Sublinear),
            other => {
                if let Some(k) = other.strip_prefix("explicit:") {
                    let k = k.parse().map_err(|_| {
                        Error::InvalidArgument(format!("bad explicit pi2 size {k:?}"))
                    })?;
                    Ok(Self::Explicit(k))
                } else {
                    Err(Error::InvalidArgument(format!(
                        "unknown pi2 policy {other:?} (two_n_ell | two_pi1_squared | sublinear | explicit:K)"
                    )))
                }
            }
        }
    }
}

impl std::fmt::Display for Pi2Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pi2Policy::TwoNEll => f.write_str("two_n_ell"),
            Pi2Policy::TwoPi1Squared => f.write_str("two_pi1_squared"),
            Pi2Policy::Sublinear => f.write_str("sublinear"),
            Pi2Policy::Explicit(k) => write!(f, "explicit:{k}"),
        }
    }
}

/// Full set of tunables for a factoring run.
#[derive(Debug, Clone)]
pub struct Hyperparameters {
    /// Lattice rank / qubit count n (ignored under the sublinear policy).
    pub rank: usize,
    pub pi2_policy: Pi2Policy,
    /// Sample budget exponent: ceil(ell^gamma) configurations per CVP.
    pub gamma: f64,
    /// Lattice precision values cycled across instances.
    pub c_schedule: Vec<f64>,
    pub bond_dim: usize,
    pub sweeps: usize,
    pub alpha: f64,
    /// CVP instance budget.
    pub n_cvp: usize,
    pub mode: SieveMode,
    /// Master seed; per-instance seeds are derived by counter.
    pub seed: u64,
    pub p_stop: f64,
    pub lll_delta: f64,
    /// Attempt GF(2) processing whenever this many new pairs arrived
    /// (default max(32, pi2/100)).
    pub process_stride: Option<usize>,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            rank: 8,
            pi2_policy: Pi2Policy::TwoNEll,
            gamma: 2.0,
            c_schedule: vec![1.0, 1.5, 2.0],
            bond_dim: 8,
            sweeps: 2,
            alpha: 0.1,
            n_cvp: 500,
            mode: SieveMode::ExactEnum,
            seed: 1,
            p_stop: 0.999,
            lll_delta: 0.99,
            process_stride: None,
        }
    }
}

impl Hyperparameters {
    /// Effective lattice rank for a given key size.
    pub fn effective_rank(&self, ell: u64) -> usize {
        match self.pi2_policy {
            Pi2Policy::Sublinear => sublinear_rank(ell),
            _ => self.rank,
        }
    }

    /// Per-CVP sample budget, clamped to the Hilbert-space size.
    pub fn sample_budget(&self, ell: u64, rank: usize) -> usize {
        let raw = (ell as f64).powf(self.gamma).ceil() as usize;
        if rank < 63 {
            raw.min(1usize << rank)
        } else {
            raw
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidArgument("rank must be >= 1".into()));
        }
        if self.n_cvp == 0 {
            return Err(Error::InvalidArgument("need at least one CVP".into()));
        }
        if self.c_schedule.is_empty() {
            return Err(Error::InvalidArgument("empty c schedule".into()));
        }
        if self.gamma < 0.0 || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument("gamma must be nonnegative".into()));
        }
        Ok(())
    }

    /// Apply one `key = value` setting; keys match the field names.
    pub fn set_field(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidArgument(format!("bad value for {what}: {value:?}"));
        match key {
            "rank" => self.rank = value.parse().map_err(|_| bad("rank"))?,
            "pi2_policy" => self.pi2_policy = value.parse()?,
            "gamma" => self.gamma = value.parse().map_err(|_| bad("gamma"))?,
            "c_schedule" => {
                self.c_schedule = value
                    .split(',')
                    .map(|v| v.trim().parse().map_err(|_| bad("c_schedule")))
                    .collect::<Result<_>>()?;
            }
            "bond_dim" => self.bond_dim = value.parse().map_err(|_| bad("bond_dim"))?,
            "sweeps" => self.sweeps = value.parse().map_err(|_| bad("sweeps"))?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad("alpha"))?,
            "n_cvp" => self.n_cvp = value.parse().map_err(|_| bad("n_cvp"))?,
            "mode" => self.mode = value.parse()?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "p_stop" => self.p_stop = value.parse().map_err(|_| bad("p_stop"))?,
            "lll_delta" => self.lll_delta = value.parse().map_err(|_| bad("lll_delta"))?,
            "process_stride" => {
                self.process_stride = Some(value.parse().map_err(|_| bad("process_stride"))?)
            }
            other => {
                return Err(Error::InvalidArgument(format!("unknown config key {other:?}")))
            }
        }
        Ok(())
    }

    /// Parse a plain-text `key = value` config file (# starts a comment).
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidArgument(format!(
                    "config line {}: expected key = value",
                    lineno + 1
                )));
            };
            self.set_field(key.trim(), value.trim())?;
        }
        Ok(())
    }

    fn ttn_params(&self) -> TtnParams {
        TtnParams {
            bond_dim: self.bond_dim,
            sweeps: self.sweeps,
            alpha: self.alpha,
            p_stop: self.p_stop,
            tol: 0.0,
        }
    }
}

/// Outcome of a factoring run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub factors: Option<(BigUint, BigUint)>,
    pub cvps_used: usize,
    pub sr_total: usize,
    pub sampled_total: usize,
    pub candidates_total: usize,
    pub process_attempts: usize,
    pub wall_ms: u128,
}

/// Factor `key` by repeated CVP sieving and periodic GF(2) processing.
///
/// Fully deterministic per master seed: instance seeds come from a counter
/// split, results are merged in instance order, and the JSON-lines log is
/// byte-identical across runs except for the `ms_*` timing fields.
pub fn run_factor(
    key: &RsaKey,
    hp: &Hyperparameters,
    mut log: Option<&mut dyn Write>,
) -> Result<RunReport> {
    hp.validate()?;
    let started = Instant::now();
    let ell = key.bits;
    let rank = hp.effective_rank(ell);
    if rank == 0 {
        return Err(Error::InvalidArgument(format!(
            "rank 0 for ell = {ell} under policy {}",
            hp.pi2_policy
        )));
    }
    let pi2 = hp.pi2_policy.pi2(rank, ell).max(rank);
    let p1 = generate_prime_basis(rank, false)?;
    let p2 = generate_prime_basis(pi2, true)?;
    let budget = hp.sample_budget(ell, rank);
    let stride = hp.process_stride.unwrap_or_else(|| 32.max(pi2 / 100));

    if let Some(out) = log.as_deref_mut() {
        let rec = json!({
            "v": 1,
            "event": "start",
            "N": key.n.to_string(),
            "ell": ell,
            "rank": rank,
            "pi2": pi2,
            "mode": hp.mode.to_string(),
            "gamma": hp.gamma,
            "budget": budget,
            "n_cvp": hp.n_cvp,
            "seed": hp.seed,
            "alpha": hp.alpha,
            "bond_dim": hp.bond_dim,
            "sweeps": hp.sweeps,
        });
        writeln!(out, "{rec}")?;
    }

    let mut report = RunReport {
        factors: None,
        cvps_used: 0,
        sr_total: 0,
        sampled_total: 0,
        candidates_total: 0,
        process_attempts: 0,
        wall_ms: 0,
    };
    let mut pool: Vec<SrPair> = Vec::new();
    let mut seen: HashSet<(BigUint, BigUint)> = HashSet::new();
    let mut unprocessed = 0usize;

    let batch = rayon::current_num_threads().max(1) * 2;
    let mut next = 0usize;
    'outer: while next < hp.n_cvp {
        let upto = (next + batch).min(hp.n_cvp);
        let jobs: Vec<usize> = (next..upto).collect();
        next = upto;
        let t_batch = Instant::now();
        let outcomes: Vec<(usize, crate::sieve::SieveOutcome)> = jobs
            .par_iter()
            .map(|&i| {
                let mut params = SieveParams::new(
                    hp.c_schedule[i % hp.c_schedule.len()],
                    derive_seed(hp.seed, i as u64),
                    hp.mode,
                    budget,
                );
                params.instance_id = i as u64;
                params.lll_delta = hp.lll_delta;
                params.ttn = hp.ttn_params();
                sieve_cvp(key, &p1, &p2, &params).map(|o| (i, o))
            })
            .collect::<Result<_>>()?;
        let ms_batch = t_batch.elapsed().as_millis();

        for (i, outcome) in outcomes {
            report.cvps_used += 1;
            report.sampled_total += outcome.sampled;
            report.candidates_total += outcome.candidates;
            let mut fresh = 0usize;
            for pair in outcome.sr_pairs {
                if seen.insert((pair.u.clone(), pair.v.clone())) {
                    pool.push(pair);
                    fresh += 1;
                }
            }
            report.sr_total = pool.len();
            unprocessed += fresh;

            if let Some(out) = log.as_deref_mut() {
                let rec = json!({
                    "v": 1,
                    "event": "cvp",
                    "instance": i,
                    "c": hp.c_schedule[i % hp.c_schedule.len()],
                    "seed": derive_seed(hp.seed, i as u64),
                    "sampled": outcome.sampled,
                    "candidates": outcome.candidates,
                    "oversized": outcome.oversized,
                    "sr_new": fresh,
                    "sr_total": pool.len(),
                    "ms_batch": ms_batch,
                });
                writeln!(out, "{rec}")?;
            }

            let exhausted = report.cvps_used == hp.n_cvp;
            if (unprocessed >= stride || exhausted) && !pool.is_empty() {
                unprocessed = 0;
                report.process_attempts += 1;
                let t_proc = Instant::now();
                let hit = congruence::process(&pool, &key.n, &p2)?;
                let ms_proc = t_proc.elapsed().as_millis();
                if let Some(out) = log.as_deref_mut() {
                    let rec = json!({
                        "v": 1,
                        "event": "process",
                        "after_instance": i,
                        "pairs": pool.len(),
                        "factored": hit.is_some(),
                        "ms_process": ms_proc,
                    });
                    writeln!(out, "{rec}")?;
                }
                if let Some(result) = hit {
                    // Re-verify at the driver boundary before reporting.
                    if &result.p * &result.q != key.n {
                        return Err(Error::Internal(
                            "factor result failed the p*q = N re-check".into(),
                        ));
                    }
                    report.factors = Some((result.p, result.q));
                    break 'outer;
                }
            }
        }
    }

    report.wall_ms = started.elapsed().as_millis();
    if let Some(out) = log.as_deref_mut() {
        let rec = json!({
            "v": 1,
            "event": "done",
            "factored": report.factors.is_some(),
            "p": report.factors.as_ref().map(|(p, _)| p.to_string()),
            "q": report.factors.as_ref().map(|(_, q)| q.to_string()),
            "cvps_used": report.cvps_used,
            "sr_total": report.sr_total,
            "sampled_total": report.sampled_total,
            "process_attempts": report.process_attempts,
            "ms_wall": report.wall_ms,
        });
        writeln!(out, "{rec}")?;
    }
    Ok(report)
}

/// Fitted constants of the sr-pair yield and qubit scaling laws.
#[derive(Debug, Clone, Copy)]
pub struct ScalingParams {
    pub c1: f64,
    pub c2: f64,
    pub mu: f64,
    pub omega: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self { c1: 1.0, c2: 0.013, mu: 1.61, omega: 9.3 }
    }
}

/// Predicted sr-pairs per lattice: C1 ell^gamma exp(-C2 (ell / n^(1/omega))^mu).
pub fn scaling_rho(ell: f64, n: f64, gamma: f64, sp: &ScalingParams) -> f64 {
    let ell_eff = ell / n.powf(1.0 / sp.omega);
    sp.c1 * ell.powf(gamma) * (-sp.c2 * ell_eff.powf(sp.mu)).exp()
}

/// Qubits needed for a target yield: the inverse of the yield law in n,
/// with natural logarithms.
pub fn qubits_needed(ell: f64, rho_target: f64, gamma: f64, sp: &ScalingParams) -> Result<f64> {
    let denom = sp.c1.ln() - rho_target.ln() + gamma * ell.ln();
    if denom <= 0.0 {
        return Err(Error::Domain(format!(
            "target rho = {rho_target} unreachable at ell = {ell}, gamma = {gamma}"
        )));
    }
    Ok((sp.c2 * ell.powf(sp.mu) / denom).powf(sp.omega / sp.mu))
}

/// Empirical bond-dimension growth, m(n) = 6.6 n^0.42.
pub fn bond_dim_scaling(n: f64) -> f64 {
    6.6 * n.powf(0.42)
}

/// Operation-count model with unit big-O constants; only ratios and
/// crossovers are meaningful.
#[derive(Debug, Clone, Copy)]
pub struct CostBreakdown {
    /// Babai / lattice-reduction term: n^7 ell log10(n)^3.
    pub t1: f64,
    /// Tensor-network term: n^4 ell m^4 + n^2 ell^(gamma+1) m^4.
    pub t2: f64,
    /// Smoothness-testing term (sub-leading, reported but not summed):
    /// n^4 ell + n^3 ell^(gamma+1) + n^2 ell^(gamma+2).
    pub t3: f64,
    /// T = T1 + T2.
    pub total: f64,
    pub n: f64,
    pub ell: f64,
    pub gamma: f64,
    pub m: f64,
}

pub fn cost_model(n: f64, ell: f64, gamma: f64, m: f64) -> Result<CostBreakdown> {
    if n < 1.0 || ell < 1.0 || gamma < 0.0 || m < 1.0 {
        return Err(Error::InvalidArgument(
            "cost model inputs must be >= 1 (gamma >= 0)".into(),
        ));
    }
    let t1 = n.powi(7) * ell * n.log10().powi(3);
    let m4 = m.powi(4);
    let t2 = n.powi(4) * ell * m4 + n.powi(2) * ell.powf(gamma + 1.0) * m4;
    let t3 = n.powi(4) * ell + n.powi(3) * ell.powf(gamma + 1.0) + n.powi(2) * ell.powf(gamma + 2.0);
    Ok(CostBreakdown { t1, t2, t3, total: t1 + t2, n, ell, gamma, m })
}

/// Cost-model sweep with n from the qubit scaling law and m from the bond
/// dimension law, as CSV rows (ell, n, m, T1, T2, T3, T).
pub fn cost_model_csv(
    ells: impl Iterator<Item = u64>,
    gamma: f64,
    rho: f64,
    sp: &ScalingParams,
    out: &mut impl Write,
) -> Result<()> {
    writeln!(out, "ell,n,m,T1,T2,T3,T")?;
    for ell in ells {
        let n = qubits_needed(ell as f64, rho, gamma, sp)?;
        let m = bond_dim_scaling(n);
        let cb = cost_model(n.max(1.0), ell as f64, gamma, m.max(1.0))?;
        writeln!(
            out,
            "{ell},{n},{m},{:e},{:e},{:e},{:e}",
            cb.t1, cb.t2, cb.t3, cb.total
        )?;
    }
    Ok(())
}

/// The three comparison series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareSeries {
    /// Babai-only sieving at ranks increased beyond sublinear, pi2 = 2 pi1^2.
    BabaiBeyond,
    /// Exact enumeration at the sublinear rank with pi1 = pi2.
    EnumSublinear,
    /// Exact enumeration at ranks increased beyond sublinear, pi2 = 2 pi1^2.
    EnumBeyond,
}

impl CompareSeries {
    pub fn label(&self) -> &'static str {
        match self {
            Self::BabaiBeyond => "babai-beyond",
            Self::EnumSublinear => "enum-sublinear",
            Self::EnumBeyond => "enum-beyond",
        }
    }
}

impl FromStr for CompareSeries {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "babai-beyond" => Ok(Self::BabaiBeyond),
            "enum-sublinear" => Ok(Self::EnumSublinear),
            "enum-beyond" => Ok(Self::EnumBeyond),
            other => Err(Error::InvalidArgument(format!("unknown series {other:?}"))),
        }
    }
}

/// Aggregated comparison result for one (ell, series) cell.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub ell: u64,
    pub series: CompareSeries,
    /// Mean settled rank over the keys that factored.
    pub mean_rank: f64,
    /// Mean CVPs consumed by the successful attempt.
    pub mean_ncvp: f64,
    /// Mean sr-pairs per lattice in the successful attempt.
    pub mean_rho: f64,
    pub successes: usize,
    pub keys: usize,
}

/// Cap on rank increments above the sublinear value.
const MAX_RANK_BOOST: usize = 8;

/// Replicate the comparison methodology: per key, start at the sublinear
/// rank and (for the beyond-sublinear series) raise it by one until a
/// nontrivial factorization appears.
pub fn experiment_compare(
    ells: &[u64],
    series: &[CompareSeries],
    keys_per_ell: usize,
    n_cvp: usize,
    master_seed: u64,
) -> Result<Vec<CompareRow>> {
    let mut rows = Vec::new();
    for &ell in ells {
        for &s in series {
            let mut ranks = Vec::new();
            let mut ncvps = Vec::new();
            let mut rhos = Vec::new();
            let mut successes = 0usize;
            for k in 0..keys_per_ell {
                let key = generate_rsa_key(ell, derive_seed(master_seed, ell * 1009 + k as u64))?;
                let base = sublinear_rank(ell).max(1);
                let boosts: Vec<usize> = match s {
                    CompareSeries::EnumSublinear => vec![0],
                    _ => (0..=MAX_RANK_BOOST).collect(),
                };
                let mut settled = None;
                for boost in boosts {
                    let rank = base + boost;
                    let hp = Hyperparameters {
                        rank,
                        pi2_policy: match s {
                            CompareSeries::EnumSublinear => Pi2Policy::Sublinear,
                            _ => Pi2Policy::TwoPi1Squared,
                        },
                        mode: match s {
                            CompareSeries::BabaiBeyond => SieveMode::BabaiOnly,
                            _ => SieveMode::ExactEnum,
                        },
                        n_cvp,
                        gamma: 3.0,
                        seed: derive_seed(master_seed, ell * 31 + boost as u64 * 7 + k as u64),
                        ..Hyperparameters::default()
                    };
                    let report = run_factor(&key, &hp, None)?;
                    if report.factors.is_some() {
                        settled = Some((rank, report));
                        break;
                    }
                }
                if let Some((rank, report)) = settled {
                    successes += 1;
                    ranks.push(rank as f64);
                    ncvps.push(report.cvps_used as f64);
                    rhos.push(report.sr_total as f64 / report.cvps_used.max(1) as f64);
                }
            }
            let mean = |v: &[f64]| {
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            rows.push(CompareRow {
                ell,
                series: s,
                mean_rank: mean(&ranks),
                mean_ncvp: mean(&ncvps),
                mean_rho: mean(&rhos),
                successes,
                keys: keys_per_ell,
            });
        }
    }
    Ok(rows)
}

pub fn compare_rows_csv(rows: &[CompareRow], out: &mut impl Write) -> Result<()> {
    writeln!(out, "ell,mode,n_used,n_cvp_to_success,mean_rho_sr,successes,keys")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.ell,
            r.series.label(),
            r.mean_rank,
            r.mean_ncvp,
            r.mean_rho,
            r.successes,
            r.keys
        )?;
    }
    Ok(())
}

/// Build the P1/P2 pair for a rank and policy.
pub fn bases_for(rank: usize, ell: u64, policy: Pi2Policy) -> Result<(PrimeBasis, PrimeBasis)> {
    let pi2 = policy.pi2(rank, ell).max(rank);
    Ok((generate_prime_basis(rank, false)?, generate_prime_basis(pi2, true)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn sublinear_values_match_reference_table() {
        // (ell, sublinear rank) pairs from the comparison table.
        for (ell, rank) in [(10u64, 3usize), (20, 5), (30, 6), (40, 8), (50, 9), (60, 10)] {
            assert_eq!(sublinear_rank(ell), rank, "ell = {ell}");
        }
    }

    #[test]
    fn pi2_policies() {
        assert_eq!(Pi2Policy::TwoNEll.pi2(64, 100), 12800);
        assert_eq!(Pi2Policy::TwoPi1Squared.pi2(7, 20), 98);
        assert_eq!(Pi2Policy::Sublinear.pi2(99, 60), 10);
        assert_eq!(Pi2Policy::Explicit(12800).pi2(1, 1), 12800);
        assert_eq!("two_n_ell".parse::<Pi2Policy>().unwrap(), Pi2Policy::TwoNEll);
        assert_eq!(
            "explicit:12800".parse::<Pi2Policy>().unwrap(),
            Pi2Policy::Explicit(12800)
        );
        assert!("three_n".parse::<Pi2Policy>().is_err());
    }

    #[test]
    fn cost_model_unit_point() {
        let cb = cost_model(10.0, 10.0, 1.0, 1.0).unwrap();
        assert_eq!(cb.t1, 1e8);
        assert_eq!(cb.t2, 1e5 + 1e4);
        assert_eq!(cb.t3, 3e5);
        assert_eq!(cb.total, cb.t1 + cb.t2);
    }

    #[test]
    fn scaling_rho_limits() {
        let sp = ScalingParams::default();
        // gamma = 0, n huge: the exponent vanishes and rho -> C1.
        let rho = scaling_rho(50.0, 1e30, 0.0, &sp);
        assert!((rho - sp.c1).abs() < 1e-3);
        // Rescaled value approaches C1 as ell_eff -> 0.
        let rho2 = scaling_rho(2.0, 1e28, 2.0, &sp);
        assert!((rho2 / 2.0f64.powf(2.0) - sp.c1).abs() < 1e-2);
    }

    #[test]
    fn qubits_needed_reference_point() {
        let sp = ScalingParams::default();
        let n = qubits_needed(100.0, 1.0, 2.0, &sp).unwrap();
        assert!((n - 137.0).abs() < 2.0, "n = {n}");
        // Round trip through the yield law.
        let rho = scaling_rho(100.0, n, 2.0, &sp);
        assert!((rho - 1.0).abs() < 1e-6);
    }

    #[test]
    fn qubits_needed_monotone_in_ell() {
        let sp = ScalingParams::default();
        let mut prev = 0.0;
        for ell in [50.0, 100.0, 200.0, 400.0] {
            let n = qubits_needed(ell, 1.0, 2.0, &sp).unwrap();
            assert!(n > prev);
            prev = n;
        }
    }

    #[test]
    fn qubits_needed_domain_error() {
        let sp = ScalingParams::default();
        // rho_target far above C1 ell^gamma makes the denominator negative.
        assert!(matches!(
            qubits_needed(10.0, 1e9, 0.0, &sp),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn config_text_round_trip() {
        let mut hp = Hyperparameters::default();
        hp.apply_config_text(
            "rank = 12\n# comment\nmode = babai-only\nc_schedule = 1, 2\ngamma=1.5\npi2_policy = explicit:64\n",
        )
        .unwrap();
        assert_eq!(hp.rank, 12);
        assert_eq!(hp.mode, SieveMode::BabaiOnly);
        assert_eq!(hp.c_schedule, vec![1.0, 2.0]);
        assert_eq!(hp.gamma, 1.5);
        assert_eq!(hp.pi2_policy, Pi2Policy::Explicit(64));
        assert!(hp.apply_config_text("nonsense = 1").is_err());
        assert!(hp.apply_config_text("rank").is_err());
    }

    #[test]
    fn factor_small_key_exact_enum() {
        let key = generate_rsa_key(16, 11).unwrap();
        let hp = Hyperparameters {
            rank: 6,
            pi2_policy: Pi2Policy::TwoPi1Squared,
            n_cvp: 200,
            mode: SieveMode::ExactEnum,
            gamma: 3.0,
            seed: 5,
            ..Default::default()
        };
        let report = run_factor(&key, &hp, None).unwrap();
        let (p, q) = report.factors.expect("16-bit key factors");
        assert_eq!(&p * &q, key.n);
        assert!(!p.is_one());
    }

    #[test]
    fn run_factor_log_is_deterministic() {
        let key = generate_rsa_key(14, 2).unwrap();
        let hp = Hyperparameters {
            rank: 5,
            pi2_policy: Pi2Policy::TwoPi1Squared,
            n_cvp: 12,
            mode: SieveMode::ExactEnum,
            gamma: 2.0,
            seed: 3,
            ..Default::default()
        };
        let strip_ms = |log: &[u8]| -> Vec<serde_json::Value> {
            String::from_utf8(log.to_vec())
                .unwrap()
                .lines()
                .map(|line| {
                    let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
                    if let Some(map) = v.as_object_mut() {
                        map.retain(|k, _| !k.starts_with("ms_"));
                    }
                    v
                })
                .collect()
        };
        let mut log_a = Vec::new();
        let mut log_b = Vec::new();
        let a = run_factor(&key, &hp, Some(&mut log_a)).unwrap();
        let b = run_factor(&key, &hp, Some(&mut log_b)).unwrap();
        assert_eq!(a.factors, b.factors);
        assert_eq!(strip_ms(&log_a), strip_ms(&log_b));
        // Every record carries the schema version.
        for v in strip_ms(&log_a) {
            assert_eq!(v["v"], 1);
        }
    }

    #[test]
    fn prime_modulus_never_factors() {
        // 8191 is prime; the congruence step can only produce trivial splits.
        let key = RsaKey::from_modulus(BigUint::from(8191u32)).unwrap();
        let hp = Hyperparameters {
            rank: 5,
            pi2_policy: Pi2Policy::TwoPi1Squared,
            n_cvp: 40,
            mode: SieveMode::ExactEnum,
            gamma: 2.0,
            seed: 1,
            ..Default::default()
        };
        let report = run_factor(&key, &hp, None).unwrap();
        assert!(report.factors.is_none());
        assert_eq!(report.cvps_used, 40);
    }
}
