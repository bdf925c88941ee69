//! The lowest horizontal plus crossing of a rectangle and its geometry.
//!
//! Among all plus crossings of a rectangle the *lowest* one is the crossing
//! whose below-region — the sites star-reachable from the bottom row without
//! touching the path — is contained in every other crossing's below-region.
//! It is extracted constructively: grow the minus-star region `W` from the
//! bottom row, collect the plus sites exposed to `W` (or sitting in the
//! bottom row), and walk that frontier from the left column with a
//! depth-first search whose stack is the path and whose neighbor order is
//! the planar leftmost-walk rule — right turn first relative to the entry
//! heading, then straight, then left, keeping the below-region on the right
//! hand. Dead-end spurs of the frontier are pruned by backtracking; the
//! rotational order hugs the coast around overhangs, entering every detour —
//! downward or sideways — before considering a shortcut above it. The walk
//! does not stop at first touch of the right column, since the lowest
//! crossing may keep descending there or leave the column to wrap one more
//! blob; instead a right-column site ends the walk once its rotation
//! exhausts. The exhaustive small-rectangle comparisons against every
//! enumerated simple crossing pin the construction down.

use std::collections::VecDeque;

use crate::clusters::SpinField;
use crate::gibbs::Spin;
use crate::lattice::{Coord, Rect, Site, SiteSet};

/// The highest interior site of a crossing path: a path site whose two
/// horizontal neighbors are also on the path, of maximal height.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CentralHighestPoint {
    /// Exactly one candidate attains the top height.
    Unique(Site),
    /// Several candidates share the top height (reported here); consumers
    /// that need a unique point filter these configurations out.
    Tied(Coord),
    /// No path site has both horizontal neighbors on the path.
    NoCandidate,
}

/// Sites of `rect` strictly below the crossing `path`: star-reachable from
/// the bottom row without stepping on the path. Pure geometry of the path;
/// spins play no role.
pub fn below_region(rect: Rect, path: &[Site]) -> SiteSet {
    let mut on_path = SiteSet::empty(rect);
    for &s in path {
        on_path.insert(s);
    }
    let mut below = SiteSet::empty(rect);
    let mut queue: VecDeque<Site> = VecDeque::new();
    for x in rect.x0()..=rect.x1() {
        let s = Site::new(x, rect.y0());
        if !on_path.contains(s) {
            below.insert(s);
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        for nb in s.linf_neighbors() {
            if rect.contains(nb) && !on_path.contains(nb) && !below.contains(nb) {
                below.insert(nb);
                queue.push_back(nb);
            }
        }
    }
    below
}

/// The central highest point of a simple crossing path.
pub fn central_highest_point(path: &[Site]) -> CentralHighestPoint {
    let Some(&first) = path.first() else {
        return CentralHighestPoint::NoCandidate;
    };
    let single = |s: Site| Rect::new(s.x, s.x, s.y, s.y).expect("single-site rect");
    let hull = path.iter().fold(single(first), |h, &s| h.hull(&single(s)));
    let mut on_path = SiteSet::empty(hull);
    for &s in path {
        on_path.insert(s);
    }
    let mut best: Option<(Site, usize)> = None;
    for &s in path {
        if !(on_path.contains(s.offset(-1, 0)) && on_path.contains(s.offset(1, 0))) {
            continue;
        }
        best = Some(match best {
            None => (s, 1),
            Some((b, _)) if s.y > b.y => (s, 1),
            Some((b, k)) if s.y == b.y => (b, k + 1),
            Some(kept) => kept,
        });
    }
    match best {
        None => CentralHighestPoint::NoCandidate,
        Some((v, 1)) => CentralHighestPoint::Unique(v),
        Some((v, _)) => CentralHighestPoint::Tied(v.y),
    }
}

/// The lowest horizontal plus crossing of `rect`, left to right, or `None`
/// when no plus crossing exists.
pub fn lowest_crossing<F: SpinField + ?Sized>(field: &mut F, rect: Rect) -> Option<Vec<Site>> {
    let n = rect.len();
    // Spin cache: +1 plus, -1 minus, 0 outside the configuration's region
    // (absent sites block both colors).
    let mut cell = vec![0i8; n];
    for (i, s) in rect.sites().enumerate() {
        cell[i] = match field.spin_at(s) {
            Some(Spin::Plus) => 1,
            Some(Spin::Minus) => -1,
            None => 0,
        };
    }

    // Existence: plain plus connectivity from the left column to the right.
    let mut seen = vec![false; n];
    let mut queue: VecDeque<Site> = VecDeque::new();
    let mut exists = false;
    for y in rect.y0()..=rect.y1() {
        let s = Site::new(rect.x0(), y);
        let i = rect.index_unchecked(s);
        if cell[i] == 1 {
            seen[i] = true;
            exists |= s.x == rect.x1();
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        for nb in s.l1_neighbors() {
            if !rect.contains(nb) {
                continue;
            }
            let j = rect.index_unchecked(nb);
            if !seen[j] && cell[j] == 1 {
                seen[j] = true;
                exists |= nb.x == rect.x1();
                queue.push_back(nb);
            }
        }
    }
    if !exists {
        return None;
    }

    // W: the minus-star region grown from the bottom row. Everything the
    // lowest crossing can see from below lives here.
    let mut in_w = vec![false; n];
    queue.clear();
    for x in rect.x0()..=rect.x1() {
        let s = Site::new(x, rect.y0());
        let i = rect.index_unchecked(s);
        if cell[i] == -1 {
            in_w[i] = true;
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        for nb in s.linf_neighbors() {
            if !rect.contains(nb) {
                continue;
            }
            let j = rect.index_unchecked(nb);
            if !in_w[j] && cell[j] == -1 {
                in_w[j] = true;
                queue.push_back(nb);
            }
        }
    }

    // The frontier: plus sites exposed to W or sitting in the bottom row.
    let mut frontier = vec![false; n];
    for (i, s) in rect.sites().enumerate() {
        if cell[i] != 1 {
            continue;
        }
        frontier[i] = s.y == rect.y0()
            || s
                .linf_neighbors()
                .into_iter()
                .any(|nb| rect.contains(nb) && in_w[rect.index_unchecked(nb)]);
    }

    // Preference walk over the frontier: a depth-first search whose stack is
    // the path and whose neighbor order is rotational relative to the entry
    // heading — right turn, straight, left turn, back — keeping the
    // below-region on the right hand. This is the planar leftmost-walk rule;
    // a fixed order like down-right-up-left fails around overhangs, where
    // the minimal crossing must turn away from the wall to swallow a blob
    // the below-region would otherwise keep. Dead-end spurs pop off the
    // stack; extending a path never grows its below-region, so detours cost
    // nothing when they tie and win when they swallow. The walk does not end
    // at first touch of the right column: the lowest crossing may keep
    // descending there, or even leave the column to wrap a blob and come
    // back lower. Instead a right-column site never pops — once its rotation
    // exhausts, the stack from the start to it is the answer.
    const DIRS: [(i32, i32); 4] = [(1, 0), (0, -1), (-1, 0), (0, 1)]; // E S W N
    const TURNS: [u8; 4] = [1, 0, 3, 2]; // right of heading, straight, left, back
    let mut visited = vec![false; n];
    // Stack entries: (site, heading we entered with, turns tried so far).
    let mut stack: Vec<(Site, u8, u8)> = Vec::new();
    for y in rect.y0()..=rect.y1() {
        let start = Site::new(rect.x0(), y);
        let si = rect.index_unchecked(start);
        if !frontier[si] || visited[si] {
            continue;
        }
        visited[si] = true;
        stack.push((start, 0, 0)); // entered heading east, off the left edge
        while let Some(top) = stack.last_mut() {
            let (s, heading, tried) = *top;
            if tried >= 4 {
                if s.x == rect.x1() {
                    return Some(stack.iter().map(|&(site, _, _)| site).collect());
                }
                stack.pop();
                continue;
            }
            top.2 += 1;
            let dir = (heading + TURNS[tried as usize]) % 4;
            let (dx, dy) = DIRS[dir as usize];
            let nb = s.offset(dx, dy);
            if !rect.contains(nb) {
                continue;
            }
            let j = rect.index_unchecked(nb);
            if visited[j] || !frontier[j] {
                continue;
            }
            visited[j] = true;
            stack.push((nb, dir, 0));
        }
    }
    unreachable!("a plus crossing exists but the frontier walk did not extract one");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{sample_rng, Boundary, Region, SpinConfig};
    use rand::Rng;

    fn config_from_mask(rect: Rect, mask: u32) -> SpinConfig {
        let mut cfg = SpinConfig::new(Region::Window(rect), Boundary::Free);
        for (i, s) in rect.sites().enumerate() {
            if mask >> i & 1 == 1 {
                cfg.set_spin(s, Spin::Plus).unwrap();
            }
        }
        cfg
    }

    /// Every simple plus path from the left column whose tip is in the right
    /// column, by full backtracking enumeration.
    fn all_crossings(rect: Rect, plus: &[bool]) -> Vec<Vec<Site>> {
        fn extend(
            rect: Rect,
            plus: &[bool],
            path: &mut Vec<Site>,
            used: &mut [bool],
            out: &mut Vec<Vec<Site>>,
        ) {
            let tip = *path.last().unwrap();
            if tip.x == rect.x1() {
                out.push(path.clone());
            }
            for nb in tip.l1_neighbors() {
                if !rect.contains(nb) {
                    continue;
                }
                let j = rect.index_unchecked(nb);
                if plus[j] && !used[j] {
                    used[j] = true;
                    path.push(nb);
                    extend(rect, plus, path, used, out);
                    path.pop();
                    used[j] = false;
                }
            }
        }
        let mut out = Vec::new();
        let mut used = vec![false; rect.len()];
        for y in rect.y0()..=rect.y1() {
            let s = Site::new(rect.x0(), y);
            let i = rect.index_unchecked(s);
            if plus[i] {
                used[i] = true;
                let mut path = vec![s];
                extend(rect, plus, &mut path, &mut used, &mut out);
                used[i] = false;
            }
        }
        out
    }

    fn is_simple_plus_crossing(cfg: &SpinConfig, rect: Rect, path: &[Site]) -> bool {
        let endpoints_ok = path
            .first()
            .is_some_and(|s| s.x == rect.x0())
            && path.last().is_some_and(|s| s.x == rect.x1());
        let all_plus = path
            .iter()
            .all(|&s| rect.contains(s) && cfg.spin(s) == Some(Spin::Plus));
        let chained = path
            .windows(2)
            .all(|w| (w[0].x - w[1].x).abs() + (w[0].y - w[1].y).abs() == 1);
        let mut sorted: Vec<Site> = path.to_vec();
        sorted.sort_by_key(|s| (s.y, s.x));
        sorted.dedup();
        endpoints_ok && all_plus && chained && sorted.len() == path.len()
    }

    fn subset(a: &SiteSet, b: &SiteSet) -> bool {
        a.iter().all(|s| b.contains(s))
    }

    #[test]
    fn single_plus_row_is_its_own_lowest_crossing() {
        let rect = Rect::new(-2, 2, -2, 2).unwrap();
        let mut cfg = SpinConfig::new(Region::Window(rect), Boundary::Free);
        for x in -2..=2 {
            cfg.set_spin(Site::new(x, -1), Spin::Plus).unwrap();
        }
        let path = lowest_crossing(&mut &cfg, rect).unwrap();
        let row: Vec<Site> = (-2..=2).map(|x| Site::new(x, -1)).collect();
        assert_eq!(path, row);
        // The region below the row is exactly the bottom row of the square.
        let below = below_region(rect, &path);
        assert_eq!(below.len(), 5);
        assert!((-2..=2).all(|x| below.contains(Site::new(x, -2))));
    }

    #[test]
    fn lower_of_two_disjoint_rows_wins() {
        let rect = Rect::new(-2, 2, -2, 2).unwrap();
        let mut cfg = SpinConfig::new(Region::Window(rect), Boundary::Free);
        for x in -2..=2 {
            cfg.set_spin(Site::new(x, 0), Spin::Plus).unwrap();
            cfg.set_spin(Site::new(x, -2), Spin::Plus).unwrap();
        }
        let path = lowest_crossing(&mut &cfg, rect).unwrap();
        let bottom: Vec<Site> = (-2..=2).map(|x| Site::new(x, -2)).collect();
        assert_eq!(path, bottom);
        assert_eq!(below_region(rect, &path).len(), 0);
    }

    #[test]
    fn all_minus_has_no_crossing() {
        let rect = Rect::new(-2, 2, -2, 2).unwrap();
        let cfg = SpinConfig::new(Region::Window(rect), Boundary::Free);
        assert_eq!(lowest_crossing(&mut &cfg, rect), None);
    }

    #[test]
    fn width_one_rect_returns_the_lowest_plus_site() {
        let rect = Rect::new(0, 0, 0, 3).unwrap();
        let mut cfg = SpinConfig::new(Region::Window(rect), Boundary::Free);
        cfg.set_spin(Site::new(0, 1), Spin::Plus).unwrap();
        cfg.set_spin(Site::new(0, 3), Spin::Plus).unwrap();
        assert_eq!(lowest_crossing(&mut &cfg, rect), Some(vec![Site::new(0, 1)]));
    }

    fn exhaustive_minimality_on(rect: Rect) {
        let n = rect.len();
        assert!(n <= 16, "mask width");
        for mask in 0u32..1 << n {
            let cfg = config_from_mask(rect, mask);
            let plus: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let enumerated = all_crossings(rect, &plus);
            let got = lowest_crossing(&mut &cfg, rect);
            match got {
                None => assert!(enumerated.is_empty(), "missed a crossing, mask {mask:#x}"),
                Some(path) => {
                    assert!(!enumerated.is_empty(), "phantom crossing, mask {mask:#x}");
                    assert!(
                        is_simple_plus_crossing(&cfg, rect, &path),
                        "malformed path, mask {mask:#x}"
                    );
                    assert!(enumerated.contains(&path), "unenumerated path, mask {mask:#x}");
                    let ours = below_region(rect, &path);
                    for other in &enumerated {
                        let theirs = below_region(rect, other);
                        assert!(
                            subset(&ours, &theirs),
                            "crossing with smaller below-region, mask {mask:#x}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn lowest_crossing_is_minimal_on_all_3x3_configurations() {
        exhaustive_minimality_on(Rect::new(0, 2, 0, 2).unwrap());
    }

    #[test]
    fn lowest_crossing_is_minimal_on_all_4x3_configurations() {
        exhaustive_minimality_on(Rect::new(0, 3, 0, 2).unwrap());
    }

    #[test]
    fn lowest_crossing_is_minimal_on_all_4x4_configurations() {
        exhaustive_minimality_on(Rect::new(0, 3, 0, 3).unwrap());
    }

    // Three pinned geometries that defeat simpler walks. The first must
    // keep dropping down the right column after first touching it. The
    // second needs the rotational neighbor order: the minimal crossing
    // turns left at (2,1) to swallow the blob {(1,1),(1,0)} before
    // returning, which no fixed preference order finds. The third must
    // leave the right column again after descending it, wrap the blob
    // {(2,1),(2,0)}, and end back on the column at (3,0).
    #[test]
    fn pinned_descent_and_overhang_geometries() {
        let check = |rect: Rect, mask: u32, expect: &[(Coord, Coord)]| {
            let cfg = config_from_mask(rect, mask);
            let path = lowest_crossing(&mut &cfg, rect).expect("crossing exists");
            let expect: Vec<Site> = expect.iter().map(|&(x, y)| Site::new(x, y)).collect();
            assert_eq!(path, expect, "mask {mask:#x}");
        };
        check(
            Rect::new(0, 3, 0, 2).unwrap(),
            0xeb,
            &[(0, 0), (1, 0), (1, 1), (2, 1), (3, 1), (3, 0)],
        );
        check(
            Rect::new(0, 3, 0, 3).unwrap(),
            0x746e,
            &[
                (0, 3),
                (1, 3),
                (2, 3),
                (2, 2),
                (2, 1),
                (1, 1),
                (1, 0),
                (2, 0),
                (3, 0),
            ],
        );
        check(
            Rect::new(0, 3, 0, 3).unwrap(),
            0xebcc,
            &[
                (0, 2),
                (1, 2),
                (1, 3),
                (2, 3),
                (3, 3),
                (3, 2),
                (3, 1),
                (2, 1),
                (2, 0),
                (3, 0),
            ],
        );
    }

    // The lowest crossing is determined by the spins at and below it: any
    // flip strictly above the path leaves it unchanged; removing plus sites
    // strictly below leaves it unchanged; adding plus sites below can only
    // shrink the below-region; removing a path site can only grow it.
    #[test]
    fn flip_probes_respect_the_below_order() {
        let rect = Rect::new(0, 8, 0, 6).unwrap();
        for round in 0..40u64 {
            let mut cfg = SpinConfig::new(Region::Window(rect), Boundary::Free);
            let mut rng = sample_rng(0x10e5, round);
            cfg.fill_bernoulli(0.55, &mut rng);
            let Some(path) = lowest_crossing(&mut &cfg, rect) else {
                continue;
            };
            let below = below_region(rect, &path);
            let mut on_path = SiteSet::empty(rect);
            for &s in &path {
                on_path.insert(s);
            }
            for s in rect.sites() {
                let old = cfg.spin(s).unwrap();
                let mut probe = cfg.clone();
                probe.set_spin(s, old.flipped()).unwrap();
                let new = lowest_crossing(&mut &probe, rect);
                if on_path.contains(s) {
                    if let Some(ref p) = new {
                        assert!(
                            subset(&below, &below_region(rect, p)),
                            "removing a path site lowered the crossing at {s:?}"
                        );
                    }
                } else if below.contains(s) {
                    match old {
                        Spin::Plus => assert_eq!(new.as_ref(), Some(&path), "junk removal at {s:?}"),
                        Spin::Minus => {
                            let p = new.expect("crossing survives an added plus");
                            assert!(
                                subset(&below_region(rect, &p), &below),
                                "plus added below raised the crossing at {s:?}"
                            );
                        }
                    }
                } else {
                    assert_eq!(new.as_ref(), Some(&path), "flip above the path at {s:?}");
                }
            }
        }
    }

    #[test]
    fn random_large_rect_output_is_a_crossing() {
        let rect = Rect::new(-10, 10, -7, 7).unwrap();
        let mut hits = 0;
        for round in 0..30u64 {
            let mut cfg = SpinConfig::new(Region::Window(rect), Boundary::Free);
            let mut rng = sample_rng(0xc055, round);
            let p = rng.random_range(0.45..0.75);
            cfg.fill_bernoulli(p, &mut rng);
            if let Some(path) = lowest_crossing(&mut &cfg, rect) {
                hits += 1;
                assert!(is_simple_plus_crossing(&cfg, rect, &path));
            }
        }
        assert!(hits > 0, "no crossing in any sample");
    }

    #[test]
    fn central_highest_point_cases() {
        // A single peak: unique candidate at its top.
        let peak = vec![
            Site::new(-2, 0),
            Site::new(-1, 0),
            Site::new(-1, 1),
            Site::new(0, 1),
            Site::new(1, 1),
            Site::new(1, 0),
            Site::new(2, 0),
        ];
        assert_eq!(
            central_highest_point(&peak),
            CentralHighestPoint::Unique(Site::new(0, 1))
        );
        // A flat row: every interior site ties at the same height.
        let row: Vec<Site> = (-2..=2).map(|x| Site::new(x, -1)).collect();
        assert_eq!(central_highest_point(&row), CentralHighestPoint::Tied(-1));
        // Too short to have an interior site.
        let pair = vec![Site::new(0, 0), Site::new(1, 0)];
        assert_eq!(central_highest_point(&pair), CentralHighestPoint::NoCandidate);
        assert_eq!(central_highest_point(&[]), CentralHighestPoint::NoCandidate);
    }
}
