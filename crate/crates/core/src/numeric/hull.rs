//! Upper concave hull of a point set, i.e. the smallest concave majorant of
//! piecewise-linear data.

/// Indices (into `xs`) of the vertices of the upper hull of `(xs, ys)`.
/// `xs` must be strictly increasing.
pub fn upper_hull(xs: &[f64], ys: &[f64]) -> Vec<usize> {
    debug_assert_eq!(xs.len(), ys.len());
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b if it lies on or below the chord a -> i
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Evaluates the piecewise-linear majorant defined by hull vertices at `x`.
pub fn eval_hull(xs: &[f64], ys: &[f64], hull: &[usize], x: f64) -> f64 {
    let k = hull.partition_point(|&i| xs[i] <= x);
    if k == 0 {
        return ys[hull[0]];
    }
    if k == hull.len() {
        return ys[hull[hull.len() - 1]];
    }
    let (a, b) = (hull[k - 1], hull[k]);
    let w = (x - xs[a]) / (xs[b] - xs[a]);
    ys[a] + w * (ys[b] - ys[a])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_convex_bump() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -(x - 5.0) * (x - 5.0) + if *x == 2.0 { 20.0 } else { 0.0 }).collect();
        let h = upper_hull(&xs, &ys);
        assert!(h.contains(&2));
        for (i, x) in xs.iter().enumerate() {
            assert!(eval_hull(&xs, &ys, &h, *x) >= ys[i] - 1e-12);
        }
    }
}
