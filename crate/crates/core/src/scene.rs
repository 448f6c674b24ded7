//! Planar radar/IRS/target geometry and the channel matrices derived from it.
//!
//! Every array is a ULA laid along the x-axis. Angles are measured from array
//! broadside (the +y axis) as `atan2(Δx, Δy)`, so the steering phase of element
//! `k` is `(2π/λ)·spacing·k·sin θ`. Platforms are treated as points when
//! computing link angles (far field).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, UnitVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn translate(self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrsConfig {
    /// Location of the first reflecting element.
    pub position: Point,
    pub n_elements: usize,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub radar_position: Point,
    pub target_position: Point,
    pub wavelength: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub radar_spacing: f64,
    /// Slow-time samples per coherent interval (columns of the waveform).
    pub n_samples: usize,
    pub irs: Vec<IrsConfig>,
    pub noise_variance: f64,
    pub seed: u64,
    /// Sampling interval, seconds. Metadata only.
    pub sampling_interval: f64,
    /// Propagation speed, m/s. Metadata only.
    pub speed_of_light: f64,
}

pub const DEFAULT_WAVELENGTH: f64 = 0.1;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

impl SceneConfig {
    /// The three-platform benchmark geometry: radar at the origin, target at
    /// (5000, 5000) m, IRS platforms at (500, 500), (500, −800) and
    /// (300, 1300) m, eight-element arrays at half-wavelength spacing.
    /// `n_irs` keeps a prefix of the platform list.
    pub fn reference(n_irs: usize) -> Self {
        let wavelength = DEFAULT_WAVELENGTH;
        let half = wavelength / 2.0;
        let sites = [
            Point::new(500.0, 500.0),
            Point::new(500.0, -800.0),
            Point::new(300.0, 1300.0),
        ];
        Self {
            radar_position: Point::new(0.0, 0.0),
            target_position: Point::new(5000.0, 5000.0),
            wavelength,
            n_tx: 8,
            n_rx: 8,
            radar_spacing: half,
            n_samples: 16,
            irs: sites
                .iter()
                .take(n_irs)
                .map(|&position| IrsConfig {
                    position,
                    n_elements: 8,
                    spacing: half,
                })
                .collect(),
            noise_variance: 0.1,
            seed: 0,
            sampling_interval: 1e-6,
            speed_of_light: SPEED_OF_LIGHT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScene(msg));
        let finite = [
            self.radar_position.x,
            self.radar_position.y,
            self.target_position.x,
            self.target_position.y,
            self.wavelength,
            self.radar_spacing,
            self.noise_variance,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite scene parameter".into());
        }
        if self.wavelength <= 0.0 {
            return bad(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            ));
        }
        if self.noise_variance <= 0.0 {
            return bad(format!(
                "noise variance must be positive, got {}",
                self.noise_variance
            ));
        }
        if self.radar_spacing <= 0.0 {
            return bad("radar element spacing must be positive".into());
        }
        if self.n_tx == 0 || self.n_rx == 0 || self.n_samples == 0 {
            return bad("antenna and sample counts must be at least 1".into());
        }
        if self.n_tx != self.n_rx {
            return Err(Error::ReciprocityRequired {
                n_tx: self.n_tx,
                n_rx: self.n_rx,
            });
        }
        if self.irs.is_empty() {
            return bad("at least one IRS platform is required".into());
        }
        if self.radar_position == self.target_position {
            return bad("target coincides with the radar".into());
        }
        for (m, irs) in self.irs.iter().enumerate() {
            if irs.n_elements == 0 {
                return bad(format!("IRS {m} has no elements"));
            }
            if !irs.spacing.is_finite() || irs.spacing <= 0.0 {
                return bad(format!("IRS {m} spacing must be positive"));
            }
            if irs.position == self.target_position {
                return bad(format!("target coincides with IRS {m}"));
            }
            if irs.position == self.radar_position {
                return bad(format!("IRS {m} coincides with the radar"));
            }
        }
        Ok(())
    }

    /// Round-trip delay of the range cell under test, `2·d_tr / c`.
    pub fn round_trip_delay(&self) -> f64 {
        let dx = self.target_position.x - self.radar_position.x;
        let dy = self.target_position.y - self.radar_position.y;
        2.0 * dx.hypot(dy) / self.speed_of_light
    }

    /// Same scene restricted to the first `m` platforms.
    pub fn with_irs_count(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.irs.len() {
            return Err(Error::InvalidScene(format!(
                "requested {m} IRS platforms, scene has {}",
                self.irs.len()
            )));
        }
        let mut out = self.clone();
        out.irs.truncate(m);
        Ok(out)
    }

    pub fn n_irs(&self) -> usize {
        self.irs.len()
    }
}

/// Angle of `target` seen from `reference`, measured from +y towards +x.
pub fn angle_from(reference: Point, target: Point) -> Result<f64> {
    let dx = target.x - reference.x;
    let dy = target.y - reference.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::CoincidentPoints {
            x: reference.x,
            y: reference.y,
        });
    }
    Ok(dx.atan2(dy))
}

/// ULA response: entry `k` is `exp(j·(2π/λ)·spacing·k·sin θ)`.
pub fn steering(n: usize, spacing: f64, wavelength: f64, theta: f64) -> UnitVector {
    let step = 2.0 * PI / wavelength * spacing * theta.sin();
    UnitVector::from_phases(&(0..n).map(|k| step * k as f64).collect::<Vec<_>>())
}

#[derive(Debug, Clone)]
pub struct IrsChannel {
    pub angle_radar: f64,
    pub angle_target: f64,
    /// `θ_ti,m − θ_tr`, fixed by the geometry.
    pub offset: f64,
    pub n_elements: usize,
    pub spacing: f64,
    /// `b_m(θ_ti,m)`.
    pub b_target: UnitVector,
    /// `b_m(θ_ri,m)`.
    pub b_radar: UnitVector,
    /// `a_t(θ_ri,m)`.
    pub a_radar: UnitVector,
    /// Radar → IRS channel, `N_m × N_t`.
    pub h_ri: CMatrix,
    /// IRS → radar channel, `N_r × N_m`, the transpose of `h_ri`.
    pub h_ir: CMatrix,
}

impl IrsChannel {
    /// IRS → target row channel `b_m(θ_ti,m)ᵀ`.
    pub fn h_it(&self) -> CMatrix {
        CMatrix::from_row_slice(1, self.n_elements, self.b_target.as_vector().as_slice())
    }

    /// Target → IRS column channel `b_m(θ_ti,m)`.
    pub fn h_ti(&self) -> CMatrix {
        CMatrix::from_column_slice(self.n_elements, 1, self.b_target.as_vector().as_slice())
    }

    /// `∂θ_ti,m` chain-rule factor `j(2π d_m/λ) cos θ_ti,m`.
    pub fn derivative_scale(&self, wavelength: f64) -> Complex64 {
        Complex64::new(
            0.0,
            2.0 * PI * self.spacing / wavelength * self.angle_target.cos(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub wavelength: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub radar_spacing: f64,
    /// LoS direction of arrival.
    pub theta: f64,
    pub a_t: UnitVector,
    pub a_r: UnitVector,
    pub irs: Vec<IrsChannel>,
}

impl ChannelSet {
    pub fn n_irs(&self) -> usize {
        self.irs.len()
    }

    pub fn irs_sizes(&self) -> Vec<usize> {
        self.irs.iter().map(|c| c.n_elements).collect()
    }

    /// Channels for a target whose DoA is shifted by `delta` while the
    /// radar–IRS links stay put; every `θ_ti,m` moves by the same `delta`.
    pub fn with_doa_shift(&self, delta: f64) -> Self {
        let theta = self.theta + delta;
        let mut out = self.clone();
        out.theta = theta;
        out.a_t = steering(self.n_tx, self.radar_spacing, self.wavelength, theta);
        out.a_r = steering(self.n_rx, self.radar_spacing, self.wavelength, theta);
        for ch in &mut out.irs {
            ch.angle_target = theta + ch.offset;
            ch.b_target = steering(ch.n_elements, ch.spacing, self.wavelength, ch.angle_target);
        }
        out
    }

    pub fn truncated(&self, m: usize) -> Self {
        let mut out = self.clone();
        out.irs.truncate(m);
        out
    }
}

/// Computes link angles, steering vectors and the reciprocal NLoS channels.
pub fn build_channels(cfg: &SceneConfig) -> Result<ChannelSet> {
    cfg.validate()?;
    let lambda = cfg.wavelength;
    let theta = angle_from(cfg.radar_position, cfg.target_position)?;
    let mut irs = Vec::with_capacity(cfg.irs.len());
    for p in &cfg.irs {
        let angle_radar = angle_from(cfg.radar_position, p.position)?;
        let angle_target = angle_from(p.position, cfg.target_position)?;
        let b_target = steering(p.n_elements, p.spacing, lambda, angle_target);
        let b_radar = steering(p.n_elements, p.spacing, lambda, angle_radar);
        let a_radar = steering(cfg.n_tx, cfg.radar_spacing, lambda, angle_radar);
        let h_ri = b_radar.as_vector() * a_radar.as_vector().transpose();
        let h_ir = h_ri.transpose();
        irs.push(IrsChannel {
            angle_radar,
            angle_target,
            offset: angle_target - theta,
            n_elements: p.n_elements,
            spacing: p.spacing,
            b_target,
            b_radar,
            a_radar,
            h_ri,
            h_ir,
        });
    }
    Ok(ChannelSet {
        wavelength: lambda,
        n_tx: cfg.n_tx,
        n_rx: cfg.n_rx,
        radar_spacing: cfg.radar_spacing,
        theta,
        a_t: steering(cfg.n_tx, cfg.radar_spacing, lambda, theta),
        a_r: steering(cfg.n_rx, cfg.radar_spacing, lambda, theta),
        irs,
    })
}

/// Target reflectivities, one per IRS path.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflectivities(pub CVector);

impl Reflectivities {
    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn truncated(&self, m: usize) -> Self {
        Self(self.0.rows(0, m.min(self.0.len())).into_owned())
    }
}

/// Seeded generator used for every random draw: ChaCha with 8 rounds
/// (`rand_chacha::ChaCha8Rng`) keyed by `seed_from_u64`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const REFLECTIVITY_STREAM: u64 = 0;
pub const WAVEFORM_STREAM: u64 = 1;

/// Standard circular complex Gaussian sample, `(g1 + j·g2)/√2`.
pub fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let g1: f64 = StandardNormal.sample(rng);
    let g2: f64 = StandardNormal.sample(rng);
    Complex64::new(g1, g2) / std::f64::consts::SQRT_2
}

/// Draws `m_count` reflectivities from CN(0, 1). Draws are sequential, so a
/// shorter draw is a prefix of a longer one with the same seed.
pub fn draw_reflectivities(m_count: usize, seed: u64) -> Reflectivities {
    let mut rng = seeded_rng(seed, REFLECTIVITY_STREAM);
    Reflectivities(CVector::from_iterator(
        m_count,
        (0..m_count).map(|_| complex_normal(&mut rng)),
    ))
}
