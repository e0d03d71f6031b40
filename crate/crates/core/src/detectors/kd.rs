use super::Decision;
use crate::model::Packet;

/// One-dimensional two-means clustering with ties assigned to cluster 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMeans {
    pub means: [f64; 2],
    /// `true` for members of cluster 1.
    pub members: Vec<bool>,
}

impl TwoMeans {
    /// Starts from `means = [min, max]` of `values`; all members in cluster 0.
    pub fn init(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            means: [lo, hi],
            members: vec![false; values.len()],
        }
    }

    /// Reassign every value to its nearest mean. Returns whether any membership changed.
    pub fn assign(&mut self, values: &[f64]) -> bool {
        let mut changed = false;
        for (m, &v) in self.members.iter_mut().zip(values) {
            let d0 = (v - self.means[0]).powi(2);
            let d1 = (v - self.means[1]).powi(2);
            let one = d1 < d0;
            changed |= one != *m;
            *m = one;
        }
        changed
    }

    /// Move each mean to the centroid of its members; empty clusters keep their mean.
    pub fn update(&mut self, values: &[f64]) {
        let mut sum = [0.0; 2];
        let mut count = [0usize; 2];
        for (&m, &v) in self.members.iter().zip(values) {
            sum[m as usize] += v;
            count[m as usize] += 1;
        }
        for c in 0..2 {
            if count[c] > 0 {
                self.means[c] = sum[c] / count[c] as f64;
            }
        }
    }

    /// Within-cluster sum of squared distances.
    pub fn objective(&self, values: &[f64]) -> f64 {
        self.members
            .iter()
            .zip(values)
            .map(|(&m, &v)| (v - self.means[m as usize]).powi(2))
            .sum()
    }

    /// Alternate assignment and update until memberships stop changing.
    /// Returns the number of assignment passes.
    pub fn run(&mut self, values: &[f64]) -> usize {
        let mut iterations = 0;
        loop {
            iterations += 1;
            let changed = self.assign(values);
            if !changed && iterations > 1 {
                break;
            }
            self.update(values);
            if !changed {
                break;
            }
        }
        iterations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdOutcome {
    pub decision: Decision,
    /// Indices decided as `s = 0`, ascending.
    pub i0: Vec<usize>,
    /// Indices decided as `s = 1`, ascending.
    pub i1: Vec<usize>,
    pub iterations: usize,
    /// Set when the clustering left `i1` empty and the fallback partition was used.
    pub flagged: bool,
}

/// Cluster `min(mag1, mag2)` into two groups; the high group is `s = 1`.
///
/// Needs neither gains nor noise power. If no symbol lands in the high group, the
/// `ceil(N/4)` largest values are moved there and the outcome is flagged.
pub fn kd_detect(packet: &Packet) -> KdOutcome {
    let values: Vec<f64> = packet.observations.iter().map(|o| o.min_mag()).collect();
    let mut km = TwoMeans::init(&values);
    let iterations = km.run(&values);
    let mut members = km.members;
    let mut flagged = false;
    if !values.is_empty() && !members.iter().any(|&m| m) {
        flagged = true;
        let mut order: Vec<usize> = (0..values.len()).collect();
        // stable sort: among equal values the earlier index is promoted first
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        for &n in order.iter().take(values.len().div_ceil(4)) {
            members[n] = true;
        }
    }
    let (mut i0, mut i1) = (Vec::new(), Vec::new());
    for (n, &m) in members.iter().enumerate() {
        if m {
            i1.push(n)
        } else {
            i0.push(n)
        }
    }
    KdOutcome {
        decision: Decision::hard(members.iter().map(|&m| u8::from(m)).collect()),
        i0,
        i1,
        iterations,
        flagged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Observation;

    fn packet(values: &[f64]) -> Packet {
        Packet::from_observations(
            values
                .iter()
                .map(|&v| Observation::new(v, v + 1.0).unwrap())
                .collect(),
        )
    }

    #[test]
    fn separated_clusters() {
        let out = kd_detect(&packet(&[0.1, 0.1, 2.0, 2.0]));
        assert_eq!(out.i0, vec![0, 1]);
        assert_eq!(out.i1, vec![2, 3]);
        assert!(!out.flagged);
        assert_eq!(out.decision.xor_bits, vec![0, 0, 1, 1]);
    }

    #[test]
    fn equal_values_fall_back() {
        let out = kd_detect(&packet(&[0.5; 6]));
        assert!(out.flagged);
        assert_eq!(out.i1, vec![0, 1]);
        assert_eq!(out.i0, vec![2, 3, 4, 5]);
    }

    #[test]
    fn ties_go_to_cluster_zero() {
        let mut km = TwoMeans {
            means: [0.0, 2.0],
            members: vec![true],
        };
        assert!(km.assign(&[1.0]));
        assert_eq!(km.members, vec![false]);
    }

    #[test]
    fn fixed_point_reached() {
        let v = [0.2, 0.3, 0.25, 1.4, 1.6, 0.9, 1.0, 0.1];
        let mut km = TwoMeans::init(&v);
        let it = km.run(&v);
        assert!(it < 1000);
        let mut again = km.clone();
        assert!(!again.assign(&v));
    }
}
