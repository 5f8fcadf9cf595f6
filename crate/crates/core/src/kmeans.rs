//! Lloyd-style k-means in two geometries.
//!
//! [`spherical_kmeans`] clusters unit vectors by cosine similarity and is used to
//! place the initial topic directions. [`kmeans`] is plain Euclidean k-means,
//! used to cluster latent document embeddings for evaluation.
//!
//! Both iterate until the assignment reaches a fixpoint or `max_iters` runs out.
//! A cluster that ends up empty is reseeded with the point that fits its
//! current cluster worst.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::NumericError;

pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// `K × dim`; unit rows for the spherical variant.
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every iteration: total cosine similarity to the assigned
    /// centroid (spherical) or total squared distance (Euclidean).
    pub objective: Vec<f64>,
}

fn check_input(points: ArrayView2<'_, f64>, k: usize) -> Result<(), NumericError> {
    if k == 0 {
        return Err(NumericError::Parameter("k must be at least 1".into()));
    }
    if points.nrows() < k {
        return Err(NumericError::Parameter(format!(
            "need at least k = {k} points, got {}",
            points.nrows()
        )));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(NumericError::Parameter("points must be finite".into()));
    }
    Ok(())
}

fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

fn normalized(v: ArrayView1<'_, f64>) -> Option<Array1<f64>> {
    let norm = v.dot(&v).sqrt();
    (norm > 1e-12).then(|| &v / norm)
}

/// Spherical k-means with greedy farthest-point seeding from a random first
/// centroid.
pub fn spherical_kmeans(
    points: ArrayView2<'_, f64>,
    k: usize,
    rng: &mut impl Rng,
    max_iters: usize,
) -> Result<Clustering, NumericError> {
    check_input(points, k)?;
    let n = points.nrows();
    let mut unit = points.to_owned();
    for (i, mut row) in unit.axis_iter_mut(Axis(0)).enumerate() {
        let v = normalized(row.view()).ok_or_else(|| {
            NumericError::Parameter(format!("point {i} has zero norm"))
        })?;
        row.assign(&v);
    }

    // Farthest-point seeding: each new centroid minimizes its best cosine to
    // the ones already chosen.
    let mut chosen = vec![rng.random_range(0..n)];
    let mut best_cos = unit.dot(&unit.row(chosen[0]));
    while chosen.len() < k {
        let mut next = None;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            if next.is_none_or(|j: usize| best_cos[i] < best_cos[j]) {
                next = Some(i);
            }
        }
        let next = next.expect("n ≥ k");
        chosen.push(next);
        let c = unit.dot(&unit.row(next));
        best_cos.zip_mut_with(&c, |b, &x| *b = b.max(x));
    }
    let mut centroids = unit.select(Axis(0), &chosen);

    let mut assignments: Vec<usize> = Vec::new();
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        let sims = unit.dot(&centroids.t());
        let next: Vec<usize> = sims.axis_iter(Axis(0)).map(argmax).collect();
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        iterations += 1;

        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            sums.row_mut(a).scaled_add(1.0, &unit.row(i));
            counts[a] += 1;
        }
        let mut reseeded = Vec::new();
        for c in 0..k {
            if counts[c] == 0 {
                // Worst-fitting point among those not already moved this round.
                let worst = (0..n)
                    .filter(|i| !reseeded.contains(i))
                    .min_by(|&i, &j| {
                        sims[[i, assignments[i]]]
                            .total_cmp(&sims[[j, assignments[j]]])
                            .then(i.cmp(&j))
                    })
                    .expect("n ≥ k");
                let from = assignments[worst];
                sums.row_mut(from).scaled_add(-1.0, &unit.row(worst));
                counts[from] -= 1;
                sums.row_mut(c).assign(&unit.row(worst));
                counts[c] = 1;
                assignments[worst] = c;
                reseeded.push(worst);
            }
        }
        for c in 0..k {
            if let Some(mean) = normalized(sums.row(c)) {
                centroids.row_mut(c).assign(&mean);
            }
            // A cancelling cluster keeps its previous direction.
        }
        let total: f64 = assignments
            .iter()
            .enumerate()
            .map(|(i, &a)| unit.row(i).dot(&centroids.row(a)))
            .sum();
        objective.push(total);
    }
    Ok(Clustering {
        centroids,
        assignments,
        iterations,
        converged,
        objective,
    })
}

fn squared_distances(points: ArrayView2<'_, f64>, c: ArrayView1<'_, f64>) -> Array1<f64> {
    points.map_axis(Axis(1), |p| {
        p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
    })
}

/// Euclidean k-means with k-means++ seeding.
pub fn kmeans(
    points: ArrayView2<'_, f64>,
    k: usize,
    rng: &mut impl Rng,
    max_iters: usize,
) -> Result<Clustering, NumericError> {
    check_input(points, k)?;
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2 = squared_distances(points, points.row(chosen[0]));
    while chosen.len() < k {
        let total: f64 = d2.sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total")
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("n ≥ k")
        };
        chosen.push(next);
        let dn = squared_distances(points, points.row(next));
        d2.zip_mut_with(&dn, |a, &b| *a = a.min(b));
    }
    let mut centroids = points.select(Axis(0), &chosen);

    let mut assignments: Vec<usize> = Vec::new();
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        let dist: Vec<Array1<f64>> = centroids
            .axis_iter(Axis(0))
            .map(|c| squared_distances(points, c))
            .collect();
        let next: Vec<usize> = (0..n)
            .map(|i| {
                let mut best = 0;
                for c in 1..k {
                    if dist[c][i] < dist[best][i] {
                        best = c;
                    }
                }
                best
            })
            .collect();
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        iterations += 1;

        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            sums.row_mut(a).scaled_add(1.0, &points.row(i));
            counts[a] += 1;
        }
        let mut reseeded = Vec::new();
        for c in 0..k {
            if counts[c] == 0 {
                let worst = (0..n)
                    .filter(|i| !reseeded.contains(i))
                    .max_by(|&i, &j| {
                        dist[assignments[i]][i]
                            .total_cmp(&dist[assignments[j]][j])
                            .then(j.cmp(&i))
                    })
                    .expect("n ≥ k");
                let from = assignments[worst];
                sums.row_mut(from).scaled_add(-1.0, &points.row(worst));
                counts[from] -= 1;
                sums.row_mut(c).assign(&points.row(worst));
                counts[c] = 1;
                assignments[worst] = c;
                reseeded.push(worst);
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            let mean = &sums.row(c) / count as f64;
            centroids.row_mut(c).assign(&mean);
        }
        let total: f64 = assignments
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                points
                    .row(i)
                    .iter()
                    .zip(centroids.row(a))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
            })
            .sum();
        objective.push(total);
    }
    Ok(Clustering {
        centroids,
        assignments,
        iterations,
        converged,
        objective,
    })
}
