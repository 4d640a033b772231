use crate::frames::PixelPoint;
use crate::scalar::Real;

/// Greedy farthest-point thinning on endpoint pixels.
///
/// Returns indices in selection order. When `points.len() <= k` and
/// `delta_px == 0` every index is returned in input order. Otherwise the seed is
/// the most isolated point, then the point farthest from the selected set is
/// appended until `k` are chosen, the pool is empty, or (with `delta_px > 0`)
/// the best remaining squared distance drops below `delta_px²`. Ties go to the
/// lowest index.
pub fn farthest_point_thin<T: Real>(points: &[PixelPoint<T>], k: usize, delta_px: T) -> Vec<usize> {
    let n = points.len();
    if n == 0 || k == 0 {
        return Vec::new();
    }
    if n <= k && delta_px == T::zero() {
        return (0..n).collect();
    }

    let d2 = |i: usize, j: usize| points[i].distance_sq(&points[j]);

    let mut seed = 0;
    let mut seed_iso = T::neg_infinity();
    for i in 0..n {
        let iso = (0..n).filter(|&j| j != i).map(|j| d2(i, j)).fold(T::infinity(), T::min);
        if iso > seed_iso {
            seed_iso = iso;
            seed = i;
        }
    }

    let mut selected = vec![seed];
    let mut in_pool = vec![true; n];
    in_pool[seed] = false;
    // distance² from each point to the selected set
    let mut nearest: Vec<T> = (0..n).map(|i| d2(i, seed)).collect();
    let delta_sq = delta_px * delta_px;

    while selected.len() < k {
        let best = (0..n)
            .filter(|&i| in_pool[i])
            .fold(None::<(usize, T)>, |acc, i| match acc {
                Some((_, m)) if nearest[i] <= m => acc,
                _ => Some((i, nearest[i])),
            });
        let Some((pick, m)) = best else { break };
        if delta_px > T::zero() && m < delta_sq {
            break;
        }
        selected.push(pick);
        in_pool[pick] = false;
        for i in 0..n {
            if in_pool[i] {
                nearest[i] = nearest[i].min(d2(i, pick));
            }
        }
    }
    selected
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(u: f64, v: f64) -> PixelPoint {
        PixelPoint::new(u, v)
    }

    #[test]
    fn small_input_returned_whole() {
        let pts: Vec<_> = (0..5).map(|i| px(i as f64 * 3.0, 1.0)).collect();
        assert_eq!(farthest_point_thin(&pts, 8, 0.0), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn collinear_trace() {
        let pts = [px(0.0, 0.0), px(1.0, 0.0), px(2.0, 0.0), px(10.0, 0.0)];
        assert_eq!(farthest_point_thin(&pts, 2, 0.0), vec![3, 0]);
    }

    #[test]
    fn separation_stops_early() {
        let pts = [px(0.0, 0.0), px(1.0, 0.0), px(2.0, 0.0), px(10.0, 0.0)];
        // after {10, 0} the best remaining is x=2 at distance 2 < 5
        assert_eq!(farthest_point_thin(&pts, 4, 5.0), vec![3, 0]);
    }

    #[test]
    fn single_point() {
        assert_eq!(farthest_point_thin(&[px(3.0, 3.0)], 1, 0.0), vec![0]);
        assert_eq!(farthest_point_thin(&[px(3.0, 3.0)], 1, 2.0), vec![0]);
    }
}
