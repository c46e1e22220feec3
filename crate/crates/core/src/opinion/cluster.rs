use crate::error::{Error, Result};

/// Number of single-linkage clusters: opinions are sorted and a new cluster
/// starts wherever the gap to the previous opinion exceeds `tol`.
pub fn count_clusters(profile: &[f64], tol: f64) -> Result<usize> {
    Ok(cluster_labels(profile, tol)?
        .into_iter()
        .max()
        .map_or(0, |m| m + 1))
}

/// Cluster label per agent (same order as `profile`). Labels are numbered
/// from the left pole upwards.
pub fn cluster_labels(profile: &[f64], tol: f64) -> Result<Vec<usize>> {
    if profile.is_empty() {
        return Err(Error::validation(
            "cannot count clusters of an empty profile",
        ));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::validation(format!(
            "cluster tolerance {tol} must be >= 0"
        )));
    }
    let mut order: Vec<usize> = (0..profile.len()).collect();
    order.sort_by(|&a, &b| profile[a].total_cmp(&profile[b]));

    let mut labels = vec![0; profile.len()];
    let mut label = 0;
    for w in order.windows(2) {
        if profile[w[1]] - profile[w[0]] > tol {
            label += 1;
        }
        labels[w[1]] = label;
    }
    Ok(labels)
}
