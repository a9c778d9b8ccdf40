//! Upper envelope of the lines `γ ↦ intercept + γ·slope`, one per hypothesis.

/// Half-open interval `[start, end)` of step sizes on which `hypothesis` wins.
/// The first interval starts at `-inf` and the last ends at `+inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeInterval {
    pub start: f64,
    pub end: f64,
    pub hypothesis: usize,
}

/// Computes the upper envelope of the given lines.
///
/// Identical lines resolve to the lowest index; at a breakpoint the line with
/// the greater slope owns the point (it wins to the right). Panics on empty input.
pub fn upper_envelope(intercepts: &[f64], slopes: &[f64]) -> Vec<EnvelopeInterval> {
    assert!(!intercepts.is_empty(), "envelope of an empty line set");
    assert_eq!(intercepts.len(), slopes.len());

    let mut order: Vec<usize> = (0..slopes.len()).collect();
    order.sort_by(|&a, &b| {
        slopes[a]
            .total_cmp(&slopes[b])
            .then(intercepts[b].total_cmp(&intercepts[a]))
            .then(a.cmp(&b))
    });
    // Keep only the best line of each slope.
    order.dedup_by(|later, kept| slopes[*later] == slopes[*kept]);

    // (line index, start of the interval where it wins)
    let mut hull: Vec<(usize, f64)> = Vec::with_capacity(order.len());
    for &line in &order {
        let mut start = f64::NEG_INFINITY;
        while let Some(&(top, top_start)) = hull.last() {
            let x = (intercepts[top] - intercepts[line]) / (slopes[line] - slopes[top]);
            if x <= top_start {
                hull.pop();
            } else {
                start = x;
                break;
            }
        }
        hull.push((line, start));
    }

    hull.iter()
        .enumerate()
        .map(|(k, &(hypothesis, start))| EnvelopeInterval {
            start,
            end: hull.get(k + 1).map_or(f64::INFINITY, |next| next.1),
            hypothesis,
        })
        .collect()
}
