use std::cmp::Ordering;

use crate::track::Point4;

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

/// Groups of exactly `group_size` indices around each center.
///
/// Each group starts with the center itself, followed by the other points
/// within `radius` ordered by `(distance, index)`, and is padded by repeating
/// the center. Groups are concatenated in center order.
pub fn ball_query(coords: &[[f64; 3]], centers: &[usize], radius: f64, group_size: usize) -> Vec<usize> {
    let r2 = radius * radius;
    let mut out = Vec::with_capacity(centers.len() * group_size);
    let mut near: Vec<(f64, usize)> = Vec::new();
    for &c in centers {
        near.clear();
        let cc = coords[c];
        near.extend(
            coords
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != c)
                .map(|(i, p)| (sq_dist(p, &cc), i))
                .filter(|&(d, _)| d <= r2),
        );
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.push(c);
        out.extend(near.iter().take(group_size.saturating_sub(1)).map(|&(_, i)| i));
        out.resize(out.len() + group_size - 1 - near.len().min(group_size - 1), c);
    }
    out
}

fn cmp_points(a: &Point4, b: &Point4) -> Ordering {
    a[2].total_cmp(&b[2])
        .then(a[0].total_cmp(&b[0]))
        .then(a[1].total_cmp(&b[1]))
        .then(a[3].total_cmp(&b[3]))
}

/// Indices that sort points by `(t, x, y, p)`. Any permutation of the same
/// points yields the same sorted sequence.
pub fn canonical_order(points: &[Point4]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| cmp_points(&points[a], &points[b]).then(a.cmp(&b)));
    idx
}
