//! Connection coefficients between fundamental solutions and the physics
//! problems solved with them: bound states, barrier scattering, resonances and
//! the radial Coulomb problem.
//!
//! Every coefficient is a ratio of Wronskians. A Wronskian between two sectors
//! that communicate canonically comes straight from their χ-factor and the
//! actions at the two sector starts; any other pair is reached through a
//! quartet identity.

mod bound;
mod coulomb;
mod resonance;
mod roots;
mod scatter;

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chi::{chi_factor_on, ChiFactor, ChiOptions};
use crate::contour::{loop_integral, LoopContour};
use crate::error::{Error, Result};
use crate::potential::EffectiveQ;
use crate::stokes::{plan_canonical_path_with, trace_graph_with, GraphOptions, RoutePreference, SectorLabel, StokesGraph};

pub use bound::{bound_states, bound_states_with, quantization_function};
pub use coulomb::{coulomb_chi_cancellation, coulomb_levels, coulomb_omega_near_origin, coulomb_levels_with, coulomb_phase, CoulombPhase};
pub use resonance::{resonance_function, resonances, resonances_with};
pub use scatter::{barrier_actions, barrier_amplitudes, barrier_amplitudes_with, Regime, ScatteringAmplitudes};

/// Exact connection formulas or their leading semiclassical limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    Jwkb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMethod {
    ExactCondition,
    Jwkb,
}

/// A solved energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub energy: Complex64,
    /// `|F(E)|` of the condition that was solved.
    pub residual: f64,
    pub method: SpectralMethod,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResonanceMethod {
    Perturbative,
    ComplexRoot,
    Jwkb,
}

/// A resonance `E₀ − iΓ/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceResult {
    pub e0: f64,
    pub gamma: f64,
    pub method: ResonanceMethod,
    /// Period of the classical motion between the inner turning points.
    pub classical_period: Option<f64>,
    /// `Γ / (barrier top − E₀)`; small for a well isolated resonance.
    pub width_ratio: f64,
    pub iterations: usize,
}

/// Where a connection coefficient came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// `χ_{i→k}` and `χ_{j→k}` when the pairs communicate directly.
    pub chi_ik: Option<Complex64>,
    pub chi_jk: Option<Complex64>,
    /// `ln W_ik − ln W_jk`, i.e. the logarithm of the coefficient.
    pub log_ratio: Complex64,
    /// Whether either Wronskian needed a quartet identity.
    pub composed: bool,
}

/// `α_{i/j→k} = lim_{x→z_k} Ψ_i/Ψ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionCoefficient {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: Complex64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub chi: ChiOptions,
    pub graph: GraphOptions,
    pub route: RoutePreference,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { chi: ChiOptions::default(), graph: GraphOptions::default(), route: RoutePreference::SkeletonFirst }
    }
}

#[derive(Debug, Clone)]
struct Wronskian {
    value: Complex64,
    composed: bool,
}

/// Connection machinery at one energy. χ-factors, Wronskians and loop
/// actions are cached for the lifetime of the solver.
pub struct Solver {
    graph: StokesGraph,
    options: SolverOptions,
    chis: Mutex<HashMap<(usize, usize), Option<ChiFactor>>>,
    wronskians: Mutex<HashMap<(usize, usize), Wronskian>>,
    actions: Mutex<HashMap<(u64, u64, u64, u64), Complex64>>,
}

impl Solver {
    pub fn new(q: &EffectiveQ) -> Result<Self> {
        Self::with_options(q, SolverOptions::default())
    }

    pub fn with_options(q: &EffectiveQ, options: SolverOptions) -> Result<Self> {
        let graph = trace_graph_with(q, options.graph, None)?;
        Ok(Self::from_graph(graph, options))
    }

    pub fn from_graph(graph: StokesGraph, options: SolverOptions) -> Self {
        Solver {
            graph,
            options,
            chis: Mutex::new(HashMap::new()),
            wronskians: Mutex::new(HashMap::new()),
            actions: Mutex::new(HashMap::new()),
        }
    }

    /// Solver on the same graph continued to a nearby complex energy.
    pub fn at_energy(&self, energy: Complex64) -> Result<Solver> {
        Ok(Self::from_graph(self.graph.at_energy(energy)?, self.options))
    }

    pub fn graph(&self) -> &StokesGraph {
        &self.graph
    }

    pub fn options(&self) -> SolverOptions {
        self.options
    }

    pub fn q(&self) -> &EffectiveQ {
        &self.graph.q
    }

    pub fn energy(&self) -> Complex64 {
        self.graph.q.energy
    }

    pub fn sector(&self, label: SectorLabel) -> Result<usize> {
        self.graph
            .sector_by_label(label)
            .ok_or_else(|| Error::GraphDegenerate(format!("no sector {label} at E = {}", self.energy())))
    }

    fn direct(&self, i: usize, k: usize) -> Result<Option<ChiFactor>> {
        let key = (i.min(k), i.max(k));
        if let Some(v) = self.chis.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = match plan_canonical_path_with(&self.graph, key.0, key.1, self.options.route) {
            Ok(cp) => Some(chi_factor_on(&self.graph, &cp, &self.options.chi)?),
            Err(Error::CanonicalPathNotFound { .. }) => None,
            Err(e) => return Err(e),
        };
        self.chis.lock().unwrap().insert(key, v.clone());
        Ok(v)
    }

    /// `χ_{i→k}` for two sectors that communicate canonically.
    pub fn chi(&self, i: usize, k: usize) -> Result<ChiFactor> {
        self.direct(i, k)?.ok_or_else(|| Error::CanonicalPathNotFound {
            from: self.graph.sectors[i].label.to_string(),
            to: self.graph.sectors[k].label.to_string(),
        })
    }

    /// `χ_{a→b}` by sector labels.
    pub fn chi_between(&self, a: SectorLabel, b: SectorLabel) -> Result<Complex64> {
        Ok(self.chi(self.sector(a)?, self.sector(b)?)?.chi.value)
    }

    /// `W[Ψ_i, Ψ_k]`.
    pub fn wronskian(&self, i: usize, k: usize) -> Result<Complex64> {
        Ok(self.wronskian_full(i, k)?.value)
    }

    fn wronskian_full(&self, i: usize, k: usize) -> Result<Wronskian> {
        if i == k {
            return Ok(Wronskian { value: Complex64::new(0.0, 0.0), composed: false });
        }
        let (a, b, sign) = if i < k { (i, k, 1.0) } else { (k, i, -1.0) };
        if let Some(w) = self.wronskians.lock().unwrap().get(&(a, b)) {
            return Ok(Wronskian { value: w.value * sign, composed: w.composed });
        }
        let w = match self.direct(a, b)? {
            Some(f) => Wronskian { value: f.log_wronskian.exp(), composed: false },
            None => Wronskian { value: self.compose(a, b)?, composed: true },
        };
        self.wronskians.lock().unwrap().insert((a, b), w.clone());
        Ok(Wronskian { value: w.value * sign, composed: w.composed })
    }

    /// `W_ik W_mn = W_in W_mk − W_im W_nk` for any pair `m, n` reachable from both.
    fn compose(&self, i: usize, k: usize) -> Result<Complex64> {
        let n = self.graph.sectors.len();
        let reach = |a: usize, b: usize| -> Result<Option<Complex64>> {
            Ok(self.direct(a, b)?.map(|f| if a < b { f.log_wronskian.exp() } else { -f.log_wronskian.exp() }))
        };
        for m in 0..n {
            if m == i || m == k {
                continue;
            }
            let (Some(w_im), Some(w_mk)) = (reach(i, m)?, reach(m, k)?) else { continue };
            for nn in m + 1..n {
                if nn == i || nn == k {
                    continue;
                }
                let (Some(w_in), Some(w_nk)) = (reach(i, nn)?, reach(nn, k)?) else { continue };
                let Some(w_mn) = reach(m, nn)? else { continue };
                return Ok((w_in * w_mk - w_im * w_nk) / w_mn);
            }
        }
        Err(Error::CanonicalPathNotFound {
            from: self.graph.sectors[i].label.to_string(),
            to: self.graph.sectors[k].label.to_string(),
        })
    }

    /// `α_{i/j→k} = W_ik / W_jk`.
    pub fn alpha(&self, i: usize, j: usize, k: usize) -> Result<ConnectionCoefficient> {
        let wi = self.wronskian_full(i, k)?;
        let wj = self.wronskian_full(j, k)?;
        let value = if i == j { Complex64::new(1.0, 0.0) } else { wi.value / wj.value };
        let chi_of = |a: usize| -> Result<Option<Complex64>> {
            if a == k {
                return Ok(None);
            }
            Ok(self.direct(a, k)?.map(|f| f.chi.value))
        };
        let provenance = Provenance {
            chi_ik: chi_of(i)?,
            chi_jk: chi_of(j)?,
            log_ratio: value.ln(),
            composed: wi.composed || wj.composed,
        };
        Ok(ConnectionCoefficient { i, j, k, value, provenance })
    }

    /// `α` by sector labels.
    pub fn alpha_labels(&self, i: SectorLabel, j: SectorLabel, k: SectorLabel) -> Result<Complex64> {
        Ok(self.alpha(self.sector(i)?, self.sector(j)?, self.sector(k)?)?.value)
    }

    /// `∮ √q̃` around the two turning points `a`, `b`, on the branch fixed by
    /// the principal root at the first loop vertex. Cached.
    pub fn pair_action(&self, a: Complex64, b: Complex64) -> Result<Complex64> {
        let key = (a.re.to_bits(), a.im.to_bits(), b.re.to_bits(), b.im.to_bits());
        if let Some(v) = self.actions.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = pair_loop(&self.graph.q, a, b)?;
        self.actions.lock().unwrap().insert(key, v);
        Ok(v)
    }
}

/// `α_{i/j→k}` on a traced graph.
pub fn alpha(graph: &StokesGraph, i: usize, j: usize, k: usize) -> Result<ConnectionCoefficient> {
    Solver::from_graph(graph.clone(), SolverOptions::default()).alpha(i, j, k)
}

/// Counter-clockwise `∮ √q` around the segment `[a, b]` (principal root at
/// the first vertex). The loop keeps clear of every singular point outside the
/// segment.
pub fn pair_loop(q: &EffectiveQ, a: Complex64, b: Complex64) -> Result<Complex64> {
    let mut others: Vec<Complex64> = q.poles().iter().map(|p| p.location).collect();
    others.extend(q.find_turning_points()?.iter().map(|t| t.location));
    let len = (b - a).norm();
    let d = others
        .iter()
        .filter(|&&p| (p - a).norm() > 1e-9 * (1.0 + len) && (p - b).norm() > 1e-9 * (1.0 + len))
        .map(|&p| seg_dist(a, b, p))
        .fold(f64::INFINITY, f64::min);
    let radius = (0.3 * len).min(0.5 * d);
    let lp = LoopContour::capsule(q, a, b, radius, 1)?;
    loop_integral(q, &lp)
}

fn seg_dist(a: Complex64, b: Complex64, z: Complex64) -> f64 {
    let e = b - a;
    let t = (((z - a) * e.conj()).re / e.norm_sqr()).clamp(0.0, 1.0);
    (a + e * t - z).norm()
}

/// Turning points on (or, for complex `E`, next to) the real axis, sorted by
/// real part.
pub(crate) fn real_turning_points(q: &EffectiveQ) -> Result<Vec<Complex64>> {
    let mut v: Vec<Complex64> = q
        .find_turning_points()?
        .iter()
        .filter(|t| t.location.im.abs() <= 1e-4 * (1.0 + t.location.re.abs()))
        .map(|t| t.location)
        .collect();
    v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    Ok(v)
}
