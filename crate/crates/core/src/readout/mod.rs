//! Electron single-shot readout, repetitive nuclear readout by majority vote
//! and electron-confusion correction of joint probabilities.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::spin::{ElectronSpin, NuclearSpin, QuantumState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutContext {
    #[default]
    Zz,
    Xy,
}

/// Electron readout fidelities: P(report ↓ | ↓) and P(report ↑ | ↑).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutFidelities {
    pub f_down: f64,
    pub f_up: f64,
    #[serde(default)]
    pub context: ReadoutContext,
}

impl ReadoutFidelities {
    pub fn ideal() -> Self {
        Self {
            f_down: 1.0,
            f_up: 1.0,
            context: ReadoutContext::Zz,
        }
    }

    /// Values measured alongside the ZZ projection: 88.4% / 73.3%.
    pub fn zz() -> Self {
        Self {
            f_down: 0.884,
            f_up: 0.733,
            context: ReadoutContext::Zz,
        }
    }

    /// Values measured alongside the XX/YY projections: 80.7% / 67.4%.
    pub fn xy() -> Self {
        Self {
            f_down: 0.807,
            f_up: 0.674,
            context: ReadoutContext::Xy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("f_down", self.f_down), ("f_up", self.f_up)] {
            if !(f > 0.5 && f <= 1.0) {
                return Err(Error::param(format!("{name} must lie in (0.5, 1], got {f}")));
            }
        }
        Ok(())
    }

    /// Column-stochastic confusion matrix, entry [reported][true].
    pub fn confusion(&self) -> [[f64; 2]; 2] {
        [[self.f_down, 1.0 - self.f_up], [1.0 - self.f_down, self.f_up]]
    }
}

/// Projective electron measurement followed by a readout error. Returns the
/// reported outcome and the state collapsed onto the true outcome.
pub fn single_shot_electron<R: Rng + ?Sized>(
    state: &QuantumState,
    fidelities: &ReadoutFidelities,
    rng: &mut R,
) -> (ElectronSpin, QuantumState) {
    let p_up = state.prob_electron_up().clamp(0.0, 1.0);
    let truth = if rng.random::<f64>() < p_up {
        ElectronSpin::Up
    } else {
        ElectronSpin::Down
    };
    let correct = match truth {
        ElectronSpin::Down => fidelities.f_down,
        ElectronSpin::Up => fidelities.f_up,
    };
    let reported = if rng.random::<f64>() < correct { truth } else { truth.flipped() };
    (reported, collapse_electron(state, truth))
}

fn collapse_electron(state: &QuantumState, outcome: ElectronSpin) -> QuantumState {
    let mut rho = state.density();
    let keep = outcome.index();
    for i in 0..4 {
        for j in 0..4 {
            if i / 2 != keep || j / 2 != keep {
                rho[(i, j)] = crate::spin::ops::ZERO;
            }
        }
    }
    let tr: f64 = (0..4).map(|k| rho[(k, k)].re).sum();
    if tr > 0.0 {
        rho /= crate::spin::ops::c(tr);
    }
    QuantumState::Mixed(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Keep the previously reported nuclear state.
    #[default]
    Previous,
    Down,
    Up,
}

/// Repetitive nuclear readout: `m_shots` shots of two electron reads each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuclearReadoutConfig {
    pub m_shots: u32,
    /// Time per shot (ms).
    pub t_shot: f64,
    /// Nuclear lifetime (hours); may be infinite.
    pub t1_n: f64,
    /// Average electron readout fidelity used for every read.
    pub f_e_avg: f64,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl Default for NuclearReadoutConfig {
    /// t_shot = 8 ms, T₁ = 1 h, F = 0.76, M = 26.
    fn default() -> Self {
        Self {
            m_shots: 26,
            t_shot: 8.0,
            t1_n: 1.0,
            f_e_avg: 0.76,
            tie_break: TieBreak::Previous,
        }
    }
}

impl NuclearReadoutConfig {
    pub fn with_shots(mut self, m: u32) -> Self {
        self.m_shots = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_shots < 1 {
            return Err(Error::param("m_shots must be ≥ 1"));
        }
        if !(self.t_shot > 0.0) || !self.t_shot.is_finite() {
            return Err(Error::param(format!("t_shot must be > 0, got {}", self.t_shot)));
        }
        if !(self.t1_n > 0.0) {
            return Err(Error::param(format!("t1_n must be > 0, got {}", self.t1_n)));
        }
        if !(0.0..=1.0).contains(&self.f_e_avg) {
            return Err(Error::param(format!("f_e_avg must lie in [0, 1], got {}", self.f_e_avg)));
        }
        Ok(())
    }

    /// Expected number of nuclear flips per shot, 2·t_shot/T₁.
    pub fn flip_hazard_per_shot(&self) -> f64 {
        2.0 * self.t_shot / (self.t1_n * 3.6e6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuclearReadout {
    pub reported: NuclearSpin,
    /// Reads reporting ⇑ out of 2M.
    pub votes_up: u32,
    pub reads: u32,
    /// Nuclear state after the block.
    pub final_state: NuclearSpin,
    pub flips: u32,
}

/// Simulates one readout block starting from nuclear state `initial`.
/// Flips happen at shot boundaries with Poisson statistics; each of the
/// two reads per shot reports the current state with probability f_e_avg.
pub fn repetitive_nuclear_readout<R: Rng + ?Sized>(
    initial: NuclearSpin,
    previous: NuclearSpin,
    config: &NuclearReadoutConfig,
    rng: &mut R,
) -> Result<NuclearReadout> {
    config.validate()?;
    let hazard = config.flip_hazard_per_shot();
    let poisson = if hazard > 0.0 && hazard.is_finite() {
        Some(Poisson::new(hazard).map_err(|e| Error::Numerical(e.to_string()))?)
    } else {
        None
    };
    let mut state = initial;
    let mut flips = 0u32;
    let mut votes_up = 0u32;
    for _ in 0..config.m_shots {
        if let Some(p) = &poisson {
            let n = p.sample(rng) as u32;
            flips += n;
            if n % 2 == 1 {
                state = state.flipped();
            }
        }
        for _ in 0..2 {
            let correct = rng.random::<f64>() < config.f_e_avg;
            let seen_up = (state == NuclearSpin::Up) == correct;
            votes_up += seen_up as u32;
        }
    }
    let reads = 2 * config.m_shots;
    let reported = match (2 * votes_up).cmp(&reads) {
        std::cmp::Ordering::Greater => NuclearSpin::Up,
        std::cmp::Ordering::Less => NuclearSpin::Down,
        std::cmp::Ordering::Equal => match config.tie_break {
            TieBreak::Previous => previous,
            TieBreak::Down => NuclearSpin::Down,
            TieBreak::Up => NuclearSpin::Up,
        },
    };
    Ok(NuclearReadout {
        reported,
        votes_up,
        reads,
        final_state: state,
        flips,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuclearFidelity {
    pub m_shots: u32,
    /// exp(−2M·t_shot/T₁): probability of no flip during the block.
    pub f_t1: f64,
    /// Majority-vote success, ties counted as success.
    pub f_shot: f64,
    pub f_n: f64,
}

impl NuclearFidelity {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.f_n
    }
}

/// F_shot = Σ_{k=0}^{M} C(2M,k)(1−F)^k F^{2M−k}, summed in log space.
pub fn majority_vote_fidelity(m: u32, f: f64) -> f64 {
    if f >= 1.0 {
        return 1.0;
    }
    if f <= 0.0 {
        return 0.0;
    }
    let n = 2 * m as u64;
    let (lf, lq) = (f.ln(), (1.0 - f).ln());
    let mut log_binom = 0.0;
    let mut sum = 0.0;
    for k in 0..=m as u64 {
        if k > 0 {
            log_binom += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        sum += (log_binom + k as f64 * lq + (n - k) as f64 * lf).exp();
    }
    sum.min(1.0)
}

/// First-order repetitive-readout model. With p = 1 − F_T1 the probability
/// of a flip during the block, F_n = (1 − p)·F_shot + p·(1 − F_shot).
pub fn nuclear_fidelity_model(config: &NuclearReadoutConfig) -> Result<NuclearFidelity> {
    config.validate()?;
    let m = config.m_shots;
    let f_t1 = (-2.0 * m as f64 * config.t_shot / (config.t1_n * 3.6e6)).exp();
    let f_shot = majority_vote_fidelity(m, config.f_e_avg);
    let p = 1.0 - f_t1;
    Ok(NuclearFidelity {
        m_shots: m,
        f_t1,
        f_shot,
        f_n: (1.0 - p) * f_shot + p * (1.0 - f_shot),
    })
}

/// Model evaluated for M = 1..=m_max.
pub fn fidelity_curve(config: &NuclearReadoutConfig, m_max: u32) -> Result<Vec<NuclearFidelity>> {
    if m_max < 1 {
        return Err(Error::param("m_max must be ≥ 1"));
    }
    (1..=m_max)
        .map(|m| nuclear_fidelity_model(&config.with_shots(m)))
        .collect()
}

/// argmax of F_n over M ∈ [1, m_max]; ties go to the smallest M.
pub fn optimize_shots(config: &NuclearReadoutConfig, m_max: u32) -> Result<NuclearFidelity> {
    let curve = fidelity_curve(config, m_max)?;
    let mut best = curve[0];
    for f in &curve[1..] {
        if f.f_n > best.f_n {
            best = *f;
        }
    }
    Ok(best)
}

/// Joint probabilities in basis order |↓⇓⟩, |↓⇑⟩, |↑⇓⟩, |↑⇑⟩.
pub type JointProbs = [f64; 4];

/// Applies the electron readout confusion (nuclear readout taken as ideal).
pub fn confuse(p: &JointProbs, fidelities: &ReadoutFidelities) -> JointProbs {
    let c = fidelities.confusion();
    let mut out = [0.0; 4];
    for n in 0..2 {
        for r in 0..2 {
            out[2 * r + n] = c[r][0] * p[n] + c[r][1] * p[2 + n];
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedProbs {
    pub probs: JointProbs,
    /// Set when the inversion left [0, 1] and the result was clamped and
    /// renormalised.
    pub clamped: bool,
}

/// Direct inversion of the electron confusion matrix.
pub fn correct_readout(raw: &JointProbs, fidelities: &ReadoutFidelities) -> Result<CorrectedProbs> {
    fidelities.validate()?;
    let total: f64 = raw.iter().sum();
    if (total - 1.0).abs() > 1e-6 || raw.iter().any(|p| !p.is_finite()) {
        return Err(Error::param(format!("raw probabilities must sum to 1, got {total}")));
    }
    let c = fidelities.confusion();
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let inv = [[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]];
    let mut probs = [0.0; 4];
    for n in 0..2 {
        for e in 0..2 {
            probs[2 * e + n] = inv[e][0] * raw[n] + inv[e][1] * raw[2 + n];
        }
    }
    let clamped = probs.iter().any(|p| *p < 0.0 || *p > 1.0);
    if clamped {
        for p in probs.iter_mut() {
            *p = p.clamp(0.0, 1.0);
        }
        let s: f64 = probs.iter().sum();
        if s > 0.0 {
            for p in probs.iter_mut() {
                *p /= s;
            }
        }
    }
    Ok(CorrectedProbs { probs, clamped })
}

/// Writes (M, F_T1, F_shot, F_n) rows.
pub fn write_fidelity_csv<W: std::io::Write>(w: W, curve: &[NuclearFidelity]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["m", "f_t1", "f_shot", "f_n"])?;
    for f in curve {
        out.write_record([
            f.m_shots.to_string(),
            format!("{:e}", f.f_t1),
            format!("{:e}", f.f_shot),
            format!("{:e}", f.f_n),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use crate::spin::ops::{c, Vec4};
    use proptest::prelude::*;

    #[test]
    fn ideal_readout_of_down() {
        let mut rng = trial_rng(0, 0);
        let s = QuantumState::ground();
        for _ in 0..1000 {
            let (r, _) = single_shot_electron(&s, &ReadoutFidelities::ideal(), &mut rng);
            assert_eq!(r, ElectronSpin::Down);
        }
    }

    #[test]
    fn spin_up_readout_rate() {
        let mut rng = trial_rng(1, 0);
        let s = QuantumState::product(ElectronSpin::Up, NuclearSpin::Down);
        let n = 10_000;
        let ups = (0..n)
            .filter(|_| single_shot_electron(&s, &ReadoutFidelities::zz(), &mut rng).0 == ElectronSpin::Up)
            .count();
        let rate = ups as f64 / n as f64;
        let sigma = (0.733 * 0.267 / n as f64).sqrt();
        assert!((rate - 0.733).abs() < 0.01 && (rate - 0.733).abs() < 3.0 * sigma);
    }

    #[test]
    fn superposition_born_rule() {
        let mut rng = trial_rng(2, 0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = QuantumState::pure(Vec4::new(c(r), c(0.0), c(r), c(0.0))).unwrap();
        let n = 10_000;
        let ups = (0..n)
            .filter(|_| single_shot_electron(&s, &ReadoutFidelities::ideal(), &mut rng).0 == ElectronSpin::Up)
            .count();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((ups as f64 / n as f64 - 0.5).abs() < 3.0 * sigma);
        let (_, collapsed) = single_shot_electron(&s, &ReadoutFidelities::ideal(), &mut rng);
        collapsed.validate().unwrap();
        let pe = collapsed.prob_electron_up();
        assert!(pe == 0.0 || pe == 1.0);
    }

    #[test]
    fn perfect_readout_never_errs() {
        let cfg = NuclearReadoutConfig {
            m_shots: 5,
            t1_n: f64::INFINITY,
            f_e_avg: 1.0,
            ..NuclearReadoutConfig::default()
        };
        let mut rng = trial_rng(3, 0);
        for init in [NuclearSpin::Down, NuclearSpin::Up] {
            for _ in 0..1000 {
                let r = repetitive_nuclear_readout(init, init, &cfg, &mut rng).unwrap();
                assert_eq!(r.reported, init);
            }
        }
    }

    #[test]
    fn shot_fidelity_single_shot_enumeration() {
        // M = 1: two reads; success unless both wrong (tie counts as success).
        for f in [0.55, 0.7, 0.765, 0.9, 1.0] {
            let mut brute = 0.0;
            for a in [true, false] {
                for b in [true, false] {
                    let p = if a { f } else { 1.0 - f } * if b { f } else { 1.0 - f };
                    let correct = a as u32 + b as u32;
                    if correct >= 1 {
                        brute += p;
                    }
                }
            }
            assert!((majority_vote_fidelity(1, f) - brute).abs() < 1e-15);
        }
        for m in [1, 10, 100] {
            assert_eq!(majority_vote_fidelity(m, 1.0), 1.0);
        }
    }

    #[test]
    fn model_monotonicity() {
        let cfg = NuclearReadoutConfig::default();
        let curve = fidelity_curve(&cfg, 60).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].f_shot > w[0].f_shot);
            assert!(w[1].f_t1 < w[0].f_t1);
        }
        let best = optimize_shots(&cfg, 60).unwrap();
        assert!(best.m_shots > 1 && best.m_shots < 60);
    }

    #[test]
    fn infinite_t1_optimum_is_m_max() {
        let cfg = NuclearReadoutConfig {
            t1_n: f64::INFINITY,
            f_e_avg: 0.7,
            ..NuclearReadoutConfig::default()
        };
        assert_eq!(optimize_shots(&cfg, 40).unwrap().m_shots, 40);
    }

    #[test]
    fn optimum_matches_exhaustive_search() {
        for f in [0.6, 0.7, 0.9] {
            let cfg = NuclearReadoutConfig {
                f_e_avg: f,
                ..NuclearReadoutConfig::default()
            };
            let m_max = 200;
            let mut best_m = 1;
            let mut best = f64::NEG_INFINITY;
            for m in 1..=m_max {
                let v = nuclear_fidelity_model(&cfg.with_shots(m)).unwrap().f_n;
                if v > best {
                    best = v;
                    best_m = m;
                }
            }
            assert_eq!(optimize_shots(&cfg, m_max).unwrap().m_shots, best_m);
        }
    }

    #[test]
    fn correction_identity_for_ideal_fidelities() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let out = correct_readout(&p, &ReadoutFidelities::ideal()).unwrap();
        assert_eq!(out.probs, p);
        assert!(!out.clamped);
    }

    #[test]
    fn bell_parity_through_confusion() {
        let p = [0.5, 0.0, 0.0, 0.5];
        let raw = confuse(&p, &ReadoutFidelities::zz());
        let out = correct_readout(&raw, &ReadoutFidelities::zz()).unwrap();
        assert!((out.probs[0] + out.probs[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_is_flagged() {
        let raw = [0.0, 0.0, 0.0, 1.0];
        let out = correct_readout(&raw, &ReadoutFidelities::zz()).unwrap();
        assert!(out.clamped);
        assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_validation() {
        assert!(ReadoutFidelities { f_down: 0.5, ..ReadoutFidelities::zz() }.validate().is_err());
        assert!(ReadoutFidelities::xy().validate().is_ok());
    }

    fn distribution() -> impl Strategy<Value = JointProbs> {
        proptest::collection::vec(0.0f64..1.0, 4).prop_filter_map("nonzero", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| [v[0] / s, v[1] / s, v[2] / s, v[3] / s])
        })
    }

    proptest! {
        #[test]
        fn confusion_round_trip(p in distribution(), fd in 0.51f64..1.0, fu in 0.51f64..1.0) {
            let fid = ReadoutFidelities { f_down: fd, f_up: fu, context: ReadoutContext::Zz };
            let back = correct_readout(&confuse(&p, &fid), &fid).unwrap();
            for k in 0..4 {
                prop_assert!((back.probs[k] - p[k]).abs() < 1e-12);
            }
        }
    }
}
