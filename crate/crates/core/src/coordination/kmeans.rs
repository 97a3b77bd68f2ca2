use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KMeansResult {
    pub centers: Vec<[f64; 2]>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances after each assignment step.
    pub objective: Vec<f64>,
    pub converged: bool,
}

impl KMeansResult {
    pub fn to_csv(&self) -> String {
        let mut sizes = vec![0usize; self.centers.len()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        let mut out = String::from("cluster,h_deg,v_deg,size\n");
        for (i, c) in self.centers.iter().enumerate() {
            out.push_str(&format!("{i},{},{},{}\n", c[0], c[1], sizes[i]));
        }
        out
    }
}

fn d2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn seed_plus_plus(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut best: Vec<f64> = points.iter().map(|&p| d2(p, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = best.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, w) in best.iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next];
        centers.push(c);
        for (b, &p) in best.iter_mut().zip(points) {
            *b = b.min(d2(p, c));
        }
    }
    centers
}

fn assign(points: &[[f64; 2]], centers: &[[f64; 2]], out: &mut [usize]) -> f64 {
    let mut obj = 0.0;
    for (a, &p) in out.iter_mut().zip(points) {
        let (mut bi, mut bd) = (0, f64::INFINITY);
        for (i, &c) in centers.iter().enumerate() {
            let d = d2(p, c);
            if d < bd {
                bi = i;
                bd = d;
            }
        }
        *a = bi;
        obj += bd;
    }
    obj
}

/// Lloyd's algorithm with k-means++ seeding. An empty cluster is moved to
/// the point currently farthest from its own center.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    if k == 0 || points.len() < k {
        return Err(Error::Parameter(format!(
            "k-means needs 1 ≤ k ≤ #points, got k={k} with {} points",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| !(p[0].is_finite() && p[1].is_finite()))
    {
        return Err(Error::Parameter("k-means: non-finite point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_plus_plus(points, k, &mut rng);
    let mut assignments = vec![usize::MAX; points.len()];
    let mut next = vec![0; points.len()];
    let mut objective = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter.max(1) {
        objective.push(assign(points, &centers, &mut next));
        if next == assignments {
            converged = true;
            break;
        }
        std::mem::swap(&mut assignments, &mut next);
        let mut sums = vec![[0.0, 0.0]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignments.iter().zip(points) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        for i in 0..k {
            if counts[i] > 0 {
                centers[i] = [sums[i][0] / counts[i] as f64, sums[i][1] / counts[i] as f64];
            }
        }
        for i in 0..k {
            if counts[i] == 0 {
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        d2(points[a], centers[assignments[a]])
                            .total_cmp(&d2(points[b], centers[assignments[b]]))
                    })
                    .expect("non-empty");
                centers[i] = points[far];
                assignments[far] = i;
            }
        }
    }
    if !converged {
        assign(points, &centers, &mut assignments);
    }
    Ok(KMeansResult {
        centers,
        assignments,
        objective,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]];
        let r = kmeans(&pts, 1, 4, 100).unwrap();
        assert_eq!(r.centers[0], [1.0, 1.0]);
        assert!(r.converged);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            kmeans(&[[0.0, 0.0]], 2, 0, 10),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let pts: Vec<[f64; 2]> = (0..300)
            .map(|i| [((i * 37) % 101) as f64, ((i * 53) % 97) as f64])
            .collect();
        let a = kmeans(&pts, 8, 1, 100).unwrap();
        assert_eq!(a, kmeans(&pts, 8, 1, 100).unwrap());
        for w in a.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }
}
