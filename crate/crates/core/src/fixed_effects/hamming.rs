//! Enumeration of Hamming balls over state vectors.

/// All vectors in `0..z_max` per coordinate within Hamming distance `m` of
/// `center`, flattened with stride `center.len()`. The centre comes first and
/// the order is deterministic.
pub fn hamming_ball(center: &[u8], m: usize, z_max: usize) -> Vec<u8> {
    let n = center.len();
    let mut out = center.to_vec();
    let mut positions = Vec::with_capacity(m);
    for r in 1..=m.min(n) {
        choose(n, r, 0, &mut positions, &mut |pos| {
            let mut v = center.to_vec();
            fill(&mut v, center, pos, 0, z_max, &mut out);
        });
    }
    out
}

fn choose(n: usize, r: usize, start: usize, acc: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if acc.len() == r {
        f(acc);
        return;
    }
    for i in start..n {
        acc.push(i);
        choose(n, r, i + 1, acc, f);
        acc.pop();
    }
}

fn fill(v: &mut [u8], center: &[u8], pos: &[usize], j: usize, z_max: usize, out: &mut Vec<u8>) {
    if j == pos.len() {
        out.extend_from_slice(v);
        return;
    }
    let p = pos[j];
    for z in 0..z_max as u8 {
        if z != center[p] {
            v[p] = z;
            fill(v, center, pos, j + 1, z_max, out);
        }
    }
    v[p] = center[p];
}

/// Number of vectors in a Hamming ball of radius `m` in dimension `n`.
pub fn ball_size(n: usize, m: usize, z_max: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for r in 0..=m.min(n) {
        if r > 0 {
            binom = binom * (n - r + 1) / r;
        }
        total += binom * (z_max - 1).pow(r as u32);
    }
    total
}

pub fn hamming_distance(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn sizes() {
        let ball = hamming_ball(&[0, 3, 5, 7], 1, 8);
        assert_eq!(ball.len() / 4, 29);
        assert_eq!(ball_size(4, 1, 8), 29);
        assert_eq!(hamming_ball(&[2, 1], 0, 3), vec![2, 1]);
    }

    #[test]
    fn full_radius_enumerates_everything() {
        let ball = hamming_ball(&[1, 2], 2, 3);
        let got: HashSet<Vec<u8>> = ball.chunks(2).map(|c| c.to_vec()).collect();
        assert_eq!(got.len(), ball.len() / 2);
        let mut all = HashSet::new();
        for a in 0..3u8 {
            for b in 0..3u8 {
                all.insert(vec![a, b]);
            }
        }
        assert_eq!(got, all);
    }

    proptest! {
        #[test]
        fn ball_is_exact_and_symmetric(
            center in proptest::collection::vec(0u8..4, 1..5),
            other in proptest::collection::vec(0u8..4, 5),
            m in 0usize..4,
        ) {
            let n = center.len();
            let ball = hamming_ball(&center, m, 4);
            let set: HashSet<Vec<u8>> = ball.chunks(n).map(|c| c.to_vec()).collect();
            prop_assert_eq!(set.len(), ball.len() / n);
            prop_assert_eq!(set.len(), ball_size(n, m, 4));
            prop_assert!(set.iter().all(|v| hamming_distance(v, &center) <= m));
            let v = &other[..n];
            let in_ball = set.contains(v);
            prop_assert_eq!(in_ball, hamming_distance(v, &center) <= m);
            let reverse: HashSet<Vec<u8>> = hamming_ball(v, m, 4).chunks(n).map(|c| c.to_vec()).collect();
            prop_assert_eq!(in_ball, reverse.contains(&center));
        }
    }
}
