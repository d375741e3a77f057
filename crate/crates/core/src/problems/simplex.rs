//! Euclidean projection onto the unit simplex.

/// Projects `v` onto `{u >= 0 : sum(u) = 1}`.
///
/// Sort-based exact method: the threshold `theta` is located from the sorted
/// coordinates and the result is `max(v - theta, 0)`. Inputs that are already
/// feasible up to rounding are returned unchanged, which keeps the map
/// idempotent bit for bit.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let d = v.len();
    assert!(d > 0, "cannot project an empty vector");
    if is_feasible(v) {
        return v.to_vec();
    }

    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }

    let mut out: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();

    // One correction pass removes cancellation error when |v| is large.
    let support = out.iter().filter(|&&x| x > 0.0).count();
    let total: f64 = out.iter().sum();
    if support > 0 && total != 1.0 {
        let shift = (total - 1.0) / support as f64;
        for x in out.iter_mut().filter(|x| **x > 0.0) {
            *x = (*x - shift).max(0.0);
        }
    }
    out
}

fn is_feasible(v: &[f64]) -> bool {
    let tol = 4.0 * v.len() as f64 * f64::EPSILON;
    v.iter().all(|&x| x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= tol
}
