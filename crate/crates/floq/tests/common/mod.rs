#![allow(dead_code)]

use floq::spectral::circle_dist;

/// Multiset equality on the circle: every value of `a` pairs with a distinct
/// value of `b` within `tol`.
pub fn same_on_circle(a: &[f64], b: &[f64], tol: f64) -> bool {
    matches(a, b, tol, circle_dist)
}

pub fn same_on_line(a: &[f64], b: &[f64], tol: f64) -> bool {
    matches(a, b, tol, |x, y| (x - y).abs())
}

fn matches(a: &[f64], b: &[f64], tol: f64, d: impl Fn(f64, f64) -> f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|&x| match (0..b.len()).find(|&j| !used[j] && d(x, b[j]) < tol) {
        Some(j) => {
            used[j] = true;
            true
        }
        None => false,
    })
}

pub fn count_near(values: &[f64], target: f64, tol: f64) -> usize {
    values.iter().filter(|&&e| circle_dist(e, target) < tol).count()
}
