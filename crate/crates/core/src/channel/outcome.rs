use super::Outcome;

/// Classify transmissions by overlap alone, with no capture effect. Intervals are
/// half-open `[start, end)`: a frame is delivered iff it intersects no other,
/// and every frame in an overlap is lost.
pub fn detect_outcomes(intervals: &[(f64, f64)]) -> Vec<Outcome> {
    let mut order: Vec<usize> = (0..intervals.len()).collect();
    order.sort_by(|&a, &b| intervals[a].0.total_cmp(&intervals[b].0).then(a.cmp(&b)));

    let mut outcomes = vec![Outcome::Delivered; intervals.len()];
    let mut max_end_before = f64::NEG_INFINITY;
    for (pos, &i) in order.iter().enumerate() {
        let (start, end) = intervals[i];
        let hit_earlier = start < max_end_before;
        let hit_later = order
            .get(pos + 1)
            .is_some_and(|&next| intervals[next].0 < end);
        if hit_earlier || hit_later {
            outcomes[i] = Outcome::Collided;
        }
        max_end_before = max_end_before.max(end);
    }
    outcomes
}
