use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::candidate::GraspCandidate;

/// Metres per radian of grasp-angle difference in the diversity metric.
pub const ANGLE_WEIGHT: f64 = 0.05;

/// Angle difference on the π-periodic grasp circle, in `[0, π/2]`.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

pub fn grasp_distance(a: &GraspCandidate, b: &GraspCandidate, lambda: f64) -> f64 {
    let dx = a.center[0] - b.center[0];
    let dy = a.center[1] - b.center[1];
    let da = lambda * angle_gap(a.angle, b.angle);
    (dx * dx + dy * dy + da * da).sqrt()
}

/// Candidate indices by descending q; ties keep input order.
pub fn q_order(candidates: &[GraspCandidate]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[b].q.total_cmp(&candidates[a].q));
    order
}

/// Greedy ε-separated subset of at most `k`, best q first.
pub fn select_diverse(candidates: &[GraspCandidate], eps: f64, k: usize) -> Vec<GraspCandidate> {
    select_diverse_with(candidates, eps, k, ANGLE_WEIGHT)
}

pub fn select_diverse_with(candidates: &[GraspCandidate], eps: f64, k: usize, lambda: f64) -> Vec<GraspCandidate> {
    let mut chosen: Vec<GraspCandidate> = Vec::with_capacity(k);
    for i in q_order(candidates) {
        if chosen.len() == k {
            break;
        }
        let c = &candidates[i];
        if chosen.iter().all(|s| grasp_distance(s, c, lambda) >= eps) {
            chosen.push(*c);
        }
    }
    chosen
}

/// One line of an operator menu, numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MenuEntry {
    pub index: usize,
    pub center: [f64; 2],
    pub depth: f64,
    pub angle: f64,
    pub width: f64,
    pub q: f64,
}

impl MenuEntry {
    pub fn candidate(&self) -> GraspCandidate {
        GraspCandidate {
            center: self.center,
            depth: self.depth,
            angle: self.angle,
            width: self.width,
            q: self.q,
        }
    }
}

pub fn menu(selected: &[GraspCandidate]) -> Vec<MenuEntry> {
    selected
        .iter()
        .enumerate()
        .map(|(i, c)| MenuEntry {
            index: i + 1,
            center: c.center,
            depth: c.depth,
            angle: c.angle,
            width: c.width,
            q: c.q,
        })
        .collect()
}
