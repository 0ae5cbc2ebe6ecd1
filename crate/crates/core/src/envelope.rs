//! Lumped resistance-capacitance envelope used to synthesize state-space
//! matrices for the default building.
//!
//! Each node `i` obeys `C_i·dT_i/dt = Σ_j H_ij (T_j − T_i) + H_out,i (T_out − T_i)
//! + H_gnd,i (T_gnd − T_i) + Q_i`. Discretization is implicit Euler, which keeps
//! `A` and `B` elementwise nonnegative and `A` stable for any step length.

use nalgebra::DMatrix;

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct RcNode {
    pub name: &'static str,
    /// kWh/°C
    pub capacity: f64,
    /// kW/°C to outdoor air
    pub ua_outdoor: f64,
    /// kW/°C to the ground
    pub ua_ground: f64,
    /// Comfort zone whose bounds apply to this node.
    pub comfort_zone: Option<usize>,
    /// Zone whose space-heating input is injected into this node.
    pub heated_zone: Option<usize>,
    /// Peak solar gain reaching this node (kW).
    pub solar_peak: f64,
    /// Internal gain while occupied (kW).
    pub occupied_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcEnvelope {
    pub nodes: Vec<RcNode>,
    /// `(i, j, H_ij)` conductances between nodes (kW/°C).
    pub couplings: Vec<(usize, usize, f64)>,
    pub t_ground: f64,
    pub n_zones: usize,
}

/// Discrete-time form of an [`RcEnvelope`] for a fixed step.
#[derive(Debug, Clone)]
pub struct DiscreteEnvelope {
    pub a: Matrix,
    pub b: Matrix,
    /// Maps node heat injections (kW) to `E` (°C per step).
    pub injection: Matrix,
    pub dt_hours: f64,
}

impl RcEnvelope {
    /// Two zones (day, night), each an air node coupled to a floor-heating slab.
    pub fn two_zone_floor_heating() -> Self {
        Self {
            nodes: vec![
                RcNode {
                    name: "day_air",
                    capacity: 1.5,
                    ua_outdoor: 0.085,
                    ua_ground: 0.0,
                    comfort_zone: Some(0),
                    heated_zone: None,
                    solar_peak: 0.9,
                    occupied_gain: 0.30,
                },
                RcNode {
                    name: "day_floor",
                    capacity: 9.0,
                    ua_outdoor: 0.0,
                    ua_ground: 0.015,
                    comfort_zone: None,
                    heated_zone: Some(0),
                    solar_peak: 0.0,
                    occupied_gain: 0.0,
                },
                RcNode {
                    name: "night_air",
                    capacity: 1.2,
                    ua_outdoor: 0.075,
                    ua_ground: 0.0,
                    comfort_zone: Some(1),
                    heated_zone: None,
                    solar_peak: 0.3,
                    occupied_gain: 0.10,
                },
                RcNode {
                    name: "night_floor",
                    capacity: 7.0,
                    ua_outdoor: 0.0,
                    ua_ground: 0.010,
                    comfort_zone: None,
                    heated_zone: Some(1),
                    solar_peak: 0.0,
                    occupied_gain: 0.0,
                },
            ],
            couplings: vec![(0, 1, 0.9), (2, 3, 0.8), (0, 2, 0.08)],
            t_ground: 10.0,
            n_zones: 2,
        }
    }

    pub fn n_states(&self) -> usize {
        self.nodes.len()
    }

    fn conductance_matrix(&self) -> DMatrix<f64> {
        let n = self.n_states();
        let mut l = DMatrix::zeros(n, n);
        for (i, node) in self.nodes.iter().enumerate() {
            l[(i, i)] += node.ua_outdoor + node.ua_ground;
        }
        for &(i, j, h) in &self.couplings {
            l[(i, i)] += h;
            l[(j, j)] += h;
            l[(i, j)] -= h;
            l[(j, i)] -= h;
        }
        l
    }

    pub fn discretize(&self, dt_hours: f64) -> DiscreteEnvelope {
        let n = self.n_states();
        let c_over_dt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            self.nodes.iter().map(|node| node.capacity / dt_hours),
        ));
        let m = &c_over_dt + self.conductance_matrix();
        let m_inv = m.try_inverse().expect("RC system matrix is an M-matrix");
        let a = &m_inv * &c_over_dt;
        let mut heat_in = DMatrix::zeros(n, self.n_zones);
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(z) = node.heated_zone {
                heat_in[(i, z)] = 1.0;
            }
        }
        let b = &m_inv * heat_in;
        DiscreteEnvelope {
            a: Matrix::from_nalgebra(&a),
            b: Matrix::from_nalgebra(&b),
            injection: Matrix::from_nalgebra(&m_inv),
            dt_hours,
        }
    }

    /// Node heat injections (kW) from weather, excluding occupancy.
    pub fn weather_injection(&self, ambient: f64, solar_fraction: f64) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|node| node.ua_outdoor * ambient + node.ua_ground * self.t_ground + node.solar_peak * solar_fraction)
            .collect()
    }

    pub fn occupancy_injection(&self) -> Vec<f64> {
        self.nodes.iter().map(|node| node.occupied_gain).collect()
    }

    pub fn zone_of_state(&self) -> Vec<Option<usize>> {
        self.nodes.iter().map(|node| node.comfort_zone).collect()
    }
}
