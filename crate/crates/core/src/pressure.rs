//! Multi-hop upstream link importance, potentials, and pressure.
//!
//! With **P** the transition matrix and **Q** the queue vector:
//!
//! * link importance `w_jl(h) = (Pʰ)_jl`, the probability that a vehicle
//!   released from `j` is on `l` after `h` transitions;
//! * upstream potential `Φ(h) = (Pʰ)ᵀ Q`;
//! * pressure `p(0) = Q − PQ` and `p(h) = p(h−1) + Φ(h)`, or equivalently
//!   `p(h) = Σ_{h'≤h} Φ(h') − PQ`.
//!
//! The free functions work from **P** directly by repeated matrix-vector
//! products. [`MatrixPowers`] caches dense powers once per graph for the
//! controller hot path.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{LinkId, QueueSnapshot, TransitionMatrix, DENSE_LIMIT};

#[derive(Debug, Error, PartialEq)]
pub enum PressureError {
    #[error("dimension mismatch: matrix has {expected} rows, vector has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
    #[error("hop {hop} exceeds the cached maximum {max}")]
    HopOutOfRange { hop: usize, max: usize },
}

/// `p(h)` for every extended link, in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureVector {
    pub hop: usize,
    pub values: Vec<f64>,
}

impl PressureVector {
    pub fn get(&self, l: LinkId) -> Result<f64, PressureError> {
        self.values.get(l.0).copied().ok_or(PressureError::UnknownLink(l))
    }
}

/// `Φ(h) = (Pʰ)ᵀ Q` for every extended link.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialVector {
    pub hop: usize,
    pub values: Vec<f64>,
}

/// Links that receive green together at one intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub intersection: String,
    pub label: String,
    pub incoming: Vec<LinkId>,
    pub min_green_s: f64,
}

/// Which hops a potential sum covers: `0..=H` or `1..=H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopRange {
    #[default]
    FromZero,
    FromOne,
}

impl HopRange {
    fn first(self) -> usize {
        match self {
            HopRange::FromZero => 0,
            HopRange::FromOne => 1,
        }
    }
}

fn check_dims(p: &TransitionMatrix, q: &QueueSnapshot) -> Result<(), PressureError> {
    if p.dim() != q.len() {
        return Err(PressureError::DimensionMismatch { expected: p.dim(), got: q.len() });
    }
    Ok(())
}

fn check_link(p: &TransitionMatrix, l: LinkId) -> Result<(), PressureError> {
    if l.0 >= p.dim() {
        return Err(PressureError::UnknownLink(l));
    }
    Ok(())
}

/// Every potential `Φ(0)..=Φ(h)`; `Φ(0)` is **Q** itself.
pub fn upstream_potentials(
    p: &TransitionMatrix,
    q: &QueueSnapshot,
    h: usize,
) -> Result<Vec<PotentialVector>, PressureError> {
    check_dims(p, q)?;
    let mut out = Vec::with_capacity(h + 1);
    let mut v = q.values().to_vec();
    out.push(PotentialVector { hop: 0, values: v.clone() });
    for hop in 1..=h {
        v = p.tmul_vec(&v);
        out.push(PotentialVector { hop, values: v.clone() });
    }
    Ok(out)
}

pub fn upstream_potential(
    p: &TransitionMatrix,
    q: &QueueSnapshot,
    h: usize,
) -> Result<PotentialVector, PressureError> {
    Ok(upstream_potentials(p, q, h)?.pop().expect("hop 0 always present"))
}

/// `(Pʰ)_jl`.
pub fn link_importance(p: &TransitionMatrix, j: LinkId, l: LinkId, h: usize) -> Result<f64, PressureError> {
    check_link(p, j)?;
    check_link(p, l)?;
    let mut row = vec![0.0; p.dim()];
    row[j.0] = 1.0;
    for _ in 0..h {
        row = p.tmul_vec(&row);
    }
    Ok(row[l.0])
}

/// Pressure vectors for every hop `0..=h` by the recursive form.
pub fn pressure_vectors(
    p: &TransitionMatrix,
    q: &QueueSnapshot,
    h: usize,
) -> Result<Vec<PressureVector>, PressureError> {
    check_dims(p, q)?;
    let pq = p.mul_vec(q.values());
    let mut current: Vec<f64> = q.values().iter().zip(&pq).map(|(a, b)| a - b).collect();
    let mut out = Vec::with_capacity(h + 1);
    out.push(PressureVector { hop: 0, values: current.clone() });
    let mut potential = q.values().to_vec();
    for hop in 1..=h {
        potential = p.tmul_vec(&potential);
        for (c, phi) in current.iter_mut().zip(&potential) {
            *c += phi;
        }
        out.push(PressureVector { hop, values: current.clone() });
    }
    Ok(out)
}

/// `p(h)` by the recursive form.
pub fn pressure_vector(p: &TransitionMatrix, q: &QueueSnapshot, h: usize) -> Result<PressureVector, PressureError> {
    Ok(pressure_vectors(p, q, h)?.pop().expect("hop 0 always present"))
}

/// `p(h)` by the unrolled form, summing explicit dense matrix powers.
pub fn pressure_vector_unrolled(
    p: &TransitionMatrix,
    q: &QueueSnapshot,
    h: usize,
) -> Result<PressureVector, PressureError> {
    check_dims(p, q)?;
    let n = p.dim();
    let dense = p.to_dense();
    let qv = DVector::from_column_slice(q.values());
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut sum = DMatrix::<f64>::identity(n, n);
    for _ in 1..=h {
        power = &power * &dense;
        sum += &power;
    }
    let values = sum.transpose() * &qv - &dense * &qv;
    Ok(PressureVector { hop: h, values: values.as_slice().to_vec() })
}

/// `p(l, h)` from columns of the powers only, without the full vector.
pub fn link_pressure(p: &TransitionMatrix, q: &QueueSnapshot, l: LinkId, h: usize) -> Result<f64, PressureError> {
    check_dims(p, q)?;
    check_link(p, l)?;
    let qs = q.values();
    let mut column = vec![0.0; p.dim()];
    column[l.0] = 1.0;
    // Hop 0 potential is Q(l); downstream term is row l of P against Q.
    let downstream: f64 = (0..p.dim()).map(|j| p.get(l.0, j) * qs[j]).sum();
    let mut total = qs[l.0] - downstream;
    for _ in 1..=h {
        column = p.mul_vec(&column);
        total += column.iter().zip(qs).map(|(c, q)| c * q).sum::<f64>();
    }
    Ok(total)
}

/// Sum of link pressures over the phase's incoming links.
pub fn phase_pressure(pressures: &PressureVector, phase: &Phase) -> Result<f64, PressureError> {
    phase.incoming.iter().map(|&l| pressures.get(l)).sum()
}

/// `Σ_{l∈links} Σ_{h'} Φ(l, h')` over the hop range ending at `max_hop`.
pub fn potential_sum(
    p: &TransitionMatrix,
    q: &QueueSnapshot,
    links: &[LinkId],
    max_hop: usize,
    range: HopRange,
) -> Result<f64, PressureError> {
    for &l in links {
        check_link(p, l)?;
    }
    let potentials = upstream_potentials(p, q, max_hop)?;
    Ok(potentials
        .iter()
        .skip(range.first())
        .map(|phi| links.iter().map(|l| phi.values[l.0]).sum::<f64>())
        .sum())
}

/// Dense powers `P⁰..=P^max_hop` built once per graph and shared read-only.
///
/// Above [`DENSE_LIMIT`] vertices no powers are stored and every query
/// falls back to matrix-vector iteration.
#[derive(Debug, Clone)]
pub struct MatrixPowers {
    matrix: TransitionMatrix,
    powers: Vec<DMatrix<f64>>,
    max_hop: usize,
}

impl MatrixPowers {
    pub fn new(matrix: TransitionMatrix, max_hop: usize) -> Self {
        let powers = if matrix.dim() <= DENSE_LIMIT {
            let dense = matrix.to_dense();
            let mut out = Vec::with_capacity(max_hop + 1);
            let mut acc = DMatrix::identity(matrix.dim(), matrix.dim());
            out.push(acc.clone());
            for _ in 0..max_hop {
                acc = &acc * &dense;
                out.push(acc.clone());
            }
            out
        } else {
            Vec::new()
        };
        Self { matrix, powers, max_hop }
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }

    pub fn max_hop(&self) -> usize {
        self.max_hop
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn check_hop(&self, h: usize) -> Result<(), PressureError> {
        if h > self.max_hop {
            return Err(PressureError::HopOutOfRange { hop: h, max: self.max_hop });
        }
        Ok(())
    }

    /// `Φ(l, h)`: column `l` of `Pʰ` against **Q**.
    pub fn link_potential(&self, q: &QueueSnapshot, l: LinkId, h: usize) -> Result<f64, PressureError> {
        check_dims(&self.matrix, q)?;
        check_link(&self.matrix, l)?;
        self.check_hop(h)?;
        if self.powers.is_empty() {
            return Ok(upstream_potential(&self.matrix, q, h)?.values[l.0]);
        }
        let col = self.powers[h].column(l.0);
        Ok(col.iter().zip(q.values()).map(|(a, b)| a * b).sum())
    }

    pub fn link_pressure(&self, q: &QueueSnapshot, l: LinkId, h: usize) -> Result<f64, PressureError> {
        check_dims(&self.matrix, q)?;
        check_link(&self.matrix, l)?;
        self.check_hop(h)?;
        if self.powers.is_empty() {
            return link_pressure(&self.matrix, q, l, h);
        }
        let qs = q.values();
        let downstream: f64 = (0..self.dim()).map(|j| self.matrix.get(l.0, j) * qs[j]).sum();
        let mut total = -downstream;
        for hop in 0..=h {
            total += self.link_potential(q, l, hop)?;
        }
        Ok(total)
    }

    pub fn phase_pressure(&self, q: &QueueSnapshot, phase: &Phase, h: usize) -> Result<f64, PressureError> {
        phase.incoming.iter().map(|&l| self.link_pressure(q, l, h)).sum()
    }

    pub fn link_importance(&self, j: LinkId, l: LinkId, h: usize) -> Result<f64, PressureError> {
        check_link(&self.matrix, j)?;
        check_link(&self.matrix, l)?;
        self.check_hop(h)?;
        if self.powers.is_empty() {
            return link_importance(&self.matrix, j, l, h);
        }
        Ok(self.powers[h][(j.0, l.0)])
    }

    pub fn potential_sum(
        &self,
        q: &QueueSnapshot,
        links: &[LinkId],
        max_hop: usize,
        range: HopRange,
    ) -> Result<f64, PressureError> {
        self.check_hop(max_hop)?;
        let mut total = 0.0;
        for hop in range.first()..=max_hop {
            for &l in links {
                total += self.link_potential(q, l, hop)?;
            }
        }
        Ok(total)
    }
}
