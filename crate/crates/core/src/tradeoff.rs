//! Communication metrics and the radar/communication trade-off.
//!
//! Each `(rho, split)` design point maps to a pair of log-scale costs:
//! `log10 NMSE` for radar and `log2 DMSE_eff` for communication. Only the
//! lower-left convex envelope of that cloud is worth operating on; a weighted
//! sum of min-max normalized costs picks one of its vertices.

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TradeoffError {
    #[error("waveform budget violated: {0}")]
    Budget(String),
    #[error("split must lie in (0, 1], got {0}")]
    InvalidSplit(f64),
    #[error("lattice is empty")]
    EmptyLattice,
    #[error("weights must be non-negative and not both zero, got radar={radar} comm={comm}")]
    InvalidWeights { radar: f64, comm: f64 },
    #[error("NMSE at rho={rho}, split={split} is not a positive finite number: {value}")]
    InvalidNmse { rho: u32, split: f64, value: f64 },
}

/// Frame timing of one CPI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformBudget {
    /// CPI length `T`, seconds.
    pub cpi: f64,
    pub frames: usize,
    /// Symbol period `T_s = 1/W`, seconds.
    pub symbol_period: f64,
    /// Inter-frame spacing, seconds.
    pub ifs: f64,
    /// Symbols per preamble building block.
    pub block_len: u32,
    /// Largest admissible preamble length in blocks.
    pub max_blocks: u32,
    /// Frame spacing `T_D`, seconds.
    pub doppler_interval: f64,
}

impl WaveformBudget {
    /// IEEE 802.11ad-like numbers: 5 ms CPI, 1.76 GHz symbol rate, 512-symbol blocks, no IFS.
    pub fn ieee_80211ad(frames: usize, max_blocks: u32) -> Self {
        let cpi = 5e-3;
        Self {
            cpi,
            frames,
            symbol_period: 1.0 / 1.76e9,
            ifs: 0.0,
            block_len: 512,
            max_blocks,
            doppler_interval: cpi / frames as f64,
        }
    }

    /// Symbols per frame, `(T_D - T_IFS) / T_s`.
    pub fn frame_symbols(&self) -> f64 {
        (self.doppler_interval - self.ifs) / self.symbol_period
    }

    pub fn validate(&self) -> Result<(), TradeoffError> {
        let positive = [
            ("cpi", self.cpi),
            ("symbol_period", self.symbol_period),
            ("doppler_interval", self.doppler_interval),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TradeoffError::Budget(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.ifs >= 0.0) {
            return Err(TradeoffError::Budget(format!(
                "ifs must be non-negative, got {}",
                self.ifs
            )));
        }
        if self.frames == 0 || self.block_len == 0 {
            return Err(TradeoffError::Budget(
                "frames and block_len must be positive".into(),
            ));
        }
        if self.frames as f64 * self.doppler_interval > self.cpi * (1.0 + 1e-12) {
            return Err(TradeoffError::Budget(format!(
                "{} frames of {} s exceed the {} s CPI",
                self.frames, self.doppler_interval, self.cpi
            )));
        }
        let need = self.max_blocks as f64 * self.block_len as f64;
        if self.frame_symbols() < need {
            return Err(TradeoffError::Budget(format!(
                "frame holds {:.1} symbols, {} blocks of {} need {need}",
                self.frame_symbols(),
                self.max_blocks,
                self.block_len
            )));
        }
        Ok(())
    }

    /// `T_D <= lambda / (4 v_max)` for unambiguous Doppler.
    pub fn check_unambiguous_doppler(&self, wavelength: f64, max_speed: f64) -> Result<(), TradeoffError> {
        let limit = wavelength / (4.0 * max_speed);
        if self.doppler_interval > limit {
            return Err(TradeoffError::Budget(format!(
                "frame spacing {} s exceeds the unambiguous limit {limit} s",
                self.doppler_interval
            )));
        }
        Ok(())
    }
}

/// Payload fraction of the CPI, `1 - M (rho L_BLK T_s + T_IFS) / T`.
pub fn alpha(budget: &WaveformBudget, rho: u32) -> Result<f64, TradeoffError> {
    if rho > budget.max_blocks {
        return Err(TradeoffError::Budget(format!(
            "rho={rho} exceeds the maximum of {} blocks",
            budget.max_blocks
        )));
    }
    let preamble = rho as f64 * budget.block_len as f64 * budget.symbol_period;
    let a = 1.0 - budget.frames as f64 * (preamble + budget.ifs) / budget.cpi;
    if !(0.0..=1.0).contains(&a) {
        return Err(TradeoffError::Budget(format!(
            "alpha={a} at rho={rho} is outside [0, 1]"
        )));
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommLink {
    /// Full-array communication SNR at split 1, dB.
    pub zeta_c_db: f64,
}

impl CommLink {
    pub fn zeta_c(&self) -> f64 {
        10f64.powf(self.zeta_c_db / 10.0)
    }

    /// `log2(1 + split zeta_c)`.
    pub fn rate(&self, split: f64) -> f64 {
        (split * self.zeta_c()).ln_1p() / std::f64::consts::LN_2
    }

    /// `1 / (1 + split zeta_c)`.
    pub fn mmse(&self, split: f64) -> f64 {
        1.0 / (1.0 + split * self.zeta_c())
    }
}

fn check_split(split: f64) -> Result<(), TradeoffError> {
    if split > 0.0 && split <= 1.0 {
        Ok(())
    } else {
        Err(TradeoffError::InvalidSplit(split))
    }
}

/// Effective spectral efficiency `alpha log2(1 + split zeta_c)`, bits/s/Hz.
pub fn spectral_efficiency(link: &CommLink, split: f64, alpha: f64) -> Result<f64, TradeoffError> {
    check_split(split)?;
    Ok(alpha * link.rate(split))
}

/// `2^{-r_eff} = MMSE(split)^alpha`.
pub fn dmse_eff(link: &CommLink, split: f64, alpha: f64) -> Result<f64, TradeoffError> {
    Ok((-spectral_efficiency(link, split, alpha)?).exp2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub rho: u32,
    pub delta: f64,
    /// `log10` of radar NMSE.
    pub log_nmse: f64,
    /// `log2` of the effective DMSE.
    pub log_dmse: f64,
}

impl OperatingPoint {
    pub fn nmse_db(&self) -> f64 {
        10.0 * self.log_nmse
    }

    /// Both costs no larger and at least one strictly smaller.
    pub fn dominates(&self, other: &OperatingPoint) -> bool {
        self.log_nmse <= other.log_nmse
            && self.log_dmse <= other.log_dmse
            && (self.log_nmse < other.log_nmse || self.log_dmse < other.log_dmse)
    }
}

#[derive(Debug, Clone)]
pub struct TradeoffRegion {
    pub points: Vec<OperatingPoint>,
    /// Indices of points on the lower-left envelope, ordered by increasing `log_nmse`.
    hull: Vec<usize>,
    /// Subset of `hull` that are corners of the envelope.
    vertices: Vec<usize>,
}

impl TradeoffRegion {
    pub fn from_points(points: Vec<OperatingPoint>) -> Result<Self, TradeoffError> {
        if points.is_empty() {
            return Err(TradeoffError::EmptyLattice);
        }
        let (hull, vertices) = lower_left_hull(&points);
        Ok(Self {
            points,
            hull,
            vertices,
        })
    }

    pub fn hull(&self) -> &[usize] {
        &self.hull
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn on_hull(&self, index: usize) -> bool {
        self.hull.contains(&index)
    }

    pub fn is_vertex(&self, index: usize) -> bool {
        self.vertices.contains(&index)
    }

    pub fn is_dominated(&self, index: usize) -> bool {
        let p = &self.points[index];
        self.points.iter().any(|q| q.dominates(p))
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn coord(p: &OperatingPoint) -> (f64, f64) {
    (p.log_nmse, p.log_dmse)
}

/// Monotone-chain lower hull, cut at its lowest point.
fn lower_left_hull(points: &[OperatingPoint]) -> (Vec<usize>, Vec<usize>) {
    let scale = points
        .iter()
        .map(|p| p.log_nmse.abs().max(p.log_dmse.abs()))
        .fold(1.0, f64::max);
    let eps = 1e-9 * scale * scale;

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (coord(&points[a]), coord(&points[b]));
        pa.0.total_cmp(&pb.0).then(pa.1.total_cmp(&pb.1)).then(a.cmp(&b))
    });

    let mut chain: Vec<usize> = Vec::new();
    for &i in &order {
        let c = coord(&points[i]);
        if let Some(&last) = chain.last() {
            if coord(&points[last]) == c {
                continue;
            }
        }
        while chain.len() >= 2 {
            let o = coord(&points[chain[chain.len() - 2]]);
            let a = coord(&points[chain[chain.len() - 1]]);
            if cross(o, a, c) <= eps {
                chain.pop();
            } else {
                break;
            }
        }
        chain.push(i);
    }

    // Keep the descending part: from the leftmost point to the lowest one.
    let lowest = chain
        .iter()
        .enumerate()
        .min_by(|(ia, &a), (ib, &b)| points[a].log_dmse.total_cmp(&points[b].log_dmse).then(ia.cmp(ib)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let vertices: Vec<usize> = chain[..=lowest].to_vec();

    let mut hull: Vec<usize> = Vec::new();
    for &i in &order {
        let c = coord(&points[i]);
        let on = if vertices.len() == 1 {
            c == coord(&points[vertices[0]])
        } else {
            vertices.windows(2).any(|w| {
                let (a, b) = (coord(&points[w[0]]), coord(&points[w[1]]));
                let within =
                    c.0 >= a.0 - 1e-12 && c.0 <= b.0 + 1e-12 && c.1 <= a.1 + 1e-12 && c.1 >= b.1 - 1e-12;
                within && cross(a, b, c).abs() <= eps
            })
        };
        if on {
            hull.push(i);
        }
    }
    (hull, vertices)
}

/// Default split lattice `{0.05, 0.10, ..., 0.95, 0.99}`.
pub fn default_delta_lattice() -> Vec<f64> {
    let mut v: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    v.push(0.99);
    v
}

/// Odd preamble lengths `1, 3, ..., <= max_blocks`.
pub fn default_rho_lattice(max_blocks: u32) -> Vec<u32> {
    (1..=max_blocks).step_by(2).collect()
}

/// Evaluates every `(rho, split)` node and builds the region.
///
/// `nmse(rho, split)` supplies the radar NMSE (linear scale) of a node.
pub fn build_region<F>(
    budget: &WaveformBudget,
    link: &CommLink,
    rhos: &[u32],
    deltas: &[f64],
    nmse: F,
) -> Result<TradeoffRegion, TradeoffError>
where
    F: Fn(u32, f64) -> f64 + Sync,
{
    if rhos.is_empty() || deltas.is_empty() {
        return Err(TradeoffError::EmptyLattice);
    }
    let nodes: Vec<(u32, f64)> = rhos
        .iter()
        .flat_map(|&r| deltas.iter().map(move |&d| (r, d)))
        .collect();
    let points = nodes
        .par_iter()
        .map(|&(rho, delta)| {
            let a = alpha(budget, rho)?;
            let dmse = dmse_eff(link, delta, a)?;
            let value = nmse(rho, delta);
            if !(value > 0.0 && value.is_finite()) {
                return Err(TradeoffError::InvalidNmse {
                    rho,
                    split: delta,
                    value,
                });
            }
            Ok(OperatingPoint {
                rho,
                delta,
                log_nmse: value.log10(),
                log_dmse: dmse.log2(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    TradeoffRegion::from_points(points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub radar: f64,
    pub comm: f64,
}

impl Weights {
    /// `radar = 1 - comm`.
    pub fn comm_share(comm: f64) -> Self {
        Self {
            radar: 1.0 - comm,
            comm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Map each log cost affinely onto `[0, 1]` over the lattice.
    #[default]
    MinMax,
    /// Use the log costs as they are.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    /// Index into `region.points`.
    pub index: usize,
    pub point: OperatingPoint,
    pub objective: f64,
    /// Adjacent vertex with the same objective: the continuous optimum is the
    /// whole edge between the two, reachable only by time sharing.
    pub tied_with: Option<usize>,
}

pub fn weighted_optimum(
    region: &TradeoffRegion,
    weights: Weights,
    normalization: Normalization,
) -> Result<Selection, TradeoffError> {
    let Weights { radar, comm } = weights;
    if !(radar >= 0.0 && comm >= 0.0) || radar + comm <= 0.0 {
        return Err(TradeoffError::InvalidWeights { radar, comm });
    }
    if region.vertices.is_empty() {
        return Err(TradeoffError::EmptyLattice);
    }
    let (to_r, to_c) = match normalization {
        Normalization::Raw => ((0.0, 1.0), (0.0, 1.0)),
        Normalization::MinMax => {
            let span = |f: fn(&OperatingPoint) -> f64| {
                let lo = region.points.iter().map(f).fold(f64::INFINITY, f64::min);
                let hi = region.points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
                let width = hi - lo;
                (lo, if width > 0.0 { 1.0 / width } else { 0.0 })
            };
            (span(|p| p.log_nmse), span(|p| p.log_dmse))
        }
    };
    let objective = |i: usize| {
        let p = &region.points[i];
        radar * (p.log_nmse - to_r.0) * to_r.1 + comm * (p.log_dmse - to_c.0) * to_c.1
    };
    let tol = 1e-12 * (radar + comm);
    let mut best = region.vertices[0];
    for &i in &region.vertices[1..] {
        let (oi, ob) = (objective(i), objective(best));
        let (pi, pb) = (&region.points[i], &region.points[best]);
        let better = if (oi - ob).abs() <= tol {
            pi.rho < pb.rho || (pi.rho == pb.rho && pi.delta > pb.delta)
        } else {
            oi < ob
        };
        if better {
            best = i;
        }
    }
    let pos = region
        .vertices
        .iter()
        .position(|&v| v == best)
        .expect("best is a vertex");
    let neighbours = [pos.checked_sub(1), Some(pos + 1)];
    let tied_with = neighbours
        .into_iter()
        .flatten()
        .filter_map(|j| region.vertices.get(j).copied())
        .find(|&j| (objective(j) - objective(best)).abs() <= tol);
    Ok(Selection {
        index: best,
        point: region.points[best],
        objective: objective(best),
        tied_with,
    })
}

/// Weighted optimum for each communication weight, radar weight `1 - w_c`.
pub fn weights_sweep(
    region: &TradeoffRegion,
    comm_weights: &[f64],
    normalization: Normalization,
) -> Result<Vec<Selection>, TradeoffError> {
    comm_weights
        .iter()
        .map(|&wc| weighted_optimum(region, Weights::comm_share(wc), normalization))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(rho: u32, delta: f64, x: f64, y: f64) -> OperatingPoint {
        OperatingPoint {
            rho,
            delta,
            log_nmse: x,
            log_dmse: y,
        }
    }

    #[test]
    fn alpha_examples() {
        let mut b = WaveformBudget::ieee_80211ad(257, 53);
        assert_eq!(alpha(&b, 0).unwrap(), 1.0);
        let expected = 1.0 - 257.0 * (53.0 * 512.0) / 1.76e9 / 5e-3;
        assert!((alpha(&b, 53).unwrap() - expected).abs() < 1e-12);
        let seq: Vec<f64> = (0..=53).map(|r| alpha(&b, r).unwrap()).collect();
        assert!(seq.windows(2).all(|w| w[1] < w[0]));
        assert!(alpha(&b, 54).is_err());
        b.max_blocks = 100;
        assert!(alpha(&b, 80).is_err(), "alpha goes negative");
    }

    #[test]
    fn budget_validation() {
        assert!(WaveformBudget::ieee_80211ad(257, 53).validate().is_ok());
        assert!(WaveformBudget::ieee_80211ad(31, 53).validate().is_ok());
        assert!(WaveformBudget::ieee_80211ad(257, 70).validate().is_err());
        let mut b = WaveformBudget::ieee_80211ad(31, 53);
        b.doppler_interval *= 2.0;
        assert!(b.validate().is_err());
        // 60 GHz, 5 mm wavelength: T_D = 161 us needs v_max <= 7.7 m/s.
        let b = WaveformBudget::ieee_80211ad(31, 53);
        assert!(b.check_unambiguous_doppler(5e-3, 5.0).is_ok());
        assert!(b.check_unambiguous_doppler(5e-3, 30.0).is_err());
    }

    #[test]
    fn comm_examples() {
        let link = CommLink { zeta_c_db: 20.0 };
        let r = spectral_efficiency(&link, 1.0, 1.0).unwrap();
        assert!((r - 101f64.log2()).abs() < 1e-12);
        assert!((r - 6.658_211_482_751_795).abs() < 1e-9);
        assert_eq!(spectral_efficiency(&link, 1.0, 0.0).unwrap(), 0.0);
        let r2 = spectral_efficiency(&link, 0.3, 0.8).unwrap();
        let r1 = spectral_efficiency(&link, 0.3, 0.4).unwrap();
        assert!((r2 - 2.0 * r1).abs() < 1e-12);
        assert!((dmse_eff(&link, 1.0, 1.0).unwrap() - 1.0 / 101.0).abs() < 1e-15);
        assert_eq!(dmse_eff(&link, 1.0, 0.0).unwrap(), 1.0);
        assert!(spectral_efficiency(&link, 0.0, 1.0).is_err());
    }

    #[test]
    fn dominated_point_is_dropped() {
        let r = TradeoffRegion::from_points(vec![pt(1, 0.5, 0.0, 0.0), pt(3, 0.5, 1.0, 1.0)]).unwrap();
        assert_eq!(r.vertices(), &[0]);
        assert_eq!(r.hull(), &[0]);
    }

    #[test]
    fn collinear_middle_point_is_on_hull_but_not_a_vertex() {
        let r = TradeoffRegion::from_points(vec![
            pt(1, 0.1, 0.0, 2.0),
            pt(3, 0.2, 1.0, 1.0),
            pt(5, 0.3, 2.0, 0.0),
        ])
        .unwrap();
        assert_eq!(r.vertices(), &[0, 2]);
        assert_eq!(r.hull(), &[0, 1, 2]);
        assert!(r.on_hull(1) && !r.is_vertex(1));
    }

    #[test]
    fn hull_excludes_interior_and_upper_points() {
        let r = TradeoffRegion::from_points(vec![
            pt(1, 0.1, 0.0, 3.0),
            pt(1, 0.2, 1.0, 0.5),
            pt(1, 0.3, 3.0, 0.0),
            pt(1, 0.4, 1.5, 2.5),
            pt(1, 0.5, 4.0, 1.0),
        ])
        .unwrap();
        assert_eq!(r.vertices(), &[0, 1, 2]);
        for &v in r.vertices() {
            assert!(!r.is_dominated(v));
        }
    }

    #[test]
    fn weighted_optimum_extremes_and_scaling() {
        let r = TradeoffRegion::from_points(vec![
            pt(1, 0.9, 2.0, 0.0),
            pt(3, 0.5, 1.0, 0.4),
            pt(5, 0.1, 0.0, 2.0),
        ])
        .unwrap();
        let comm = weighted_optimum(
            &r,
            Weights {
                radar: 0.0,
                comm: 1.0,
            },
            Normalization::MinMax,
        )
        .unwrap();
        assert_eq!(comm.index, 0);
        let radar = weighted_optimum(
            &r,
            Weights {
                radar: 1.0,
                comm: 0.0,
            },
            Normalization::MinMax,
        )
        .unwrap();
        assert_eq!(radar.index, 2);
        let a = weighted_optimum(
            &r,
            Weights {
                radar: 0.3,
                comm: 0.7,
            },
            Normalization::MinMax,
        )
        .unwrap();
        let b = weighted_optimum(
            &r,
            Weights {
                radar: 3.0,
                comm: 7.0,
            },
            Normalization::MinMax,
        )
        .unwrap();
        assert_eq!(a.index, b.index);
        assert!(weighted_optimum(
            &r,
            Weights {
                radar: 0.0,
                comm: 0.0
            },
            Normalization::Raw
        )
        .is_err());
        assert!(weighted_optimum(
            &r,
            Weights {
                radar: -1.0,
                comm: 1.0
            },
            Normalization::Raw
        )
        .is_err());
    }

    #[test]
    fn edge_tie_is_reported() {
        let r = TradeoffRegion::from_points(vec![pt(1, 0.9, 1.0, 0.0), pt(3, 0.1, 0.0, 1.0)]).unwrap();
        let s = weighted_optimum(
            &r,
            Weights {
                radar: 1.0,
                comm: 1.0,
            },
            Normalization::Raw,
        )
        .unwrap();
        // Tie: smaller rho wins, the other end of the edge is reported.
        assert_eq!(s.index, 0);
        assert_eq!(s.tied_with, Some(1));
    }

    #[test]
    fn default_lattices() {
        let d = default_delta_lattice();
        assert_eq!(d.len(), 20);
        assert!((d[0] - 0.05).abs() < 1e-15 && d[19] == 0.99);
        let r = default_rho_lattice(53);
        assert_eq!(r.len(), 27);
        assert_eq!((r[0], r[26]), (1, 53));
    }
}
