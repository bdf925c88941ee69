//! Circuit detection in annuli.
//!
//! A monochromatic circuit inside an annulus surrounds the hole exactly when
//! some cluster of that color, restricted to the annulus, contains a closed
//! walk winding around the hole. Winding is detected with a height function:
//! breadth-first search assigns each cluster site an integer height that
//! changes by the winding contribution of each step, and the cluster winds if
//! and only if two different heights collide at one site.
//!
//! The winding contribution counts signed crossings of a cut ray running
//! rightward from the hole along `y = -1/2`, `x >= 1/2`. A step between
//! adjacent sites `s -> t` crosses it iff the step straddles the line
//! (`s.y + t.y == -1`) with crossing abscissa `(s.x + t.x) / 2 >= 1/2`; the sign
//! is the direction of the `y` move. For closed walks over sites of
//! `|.|_inf >= 1` this crossing count equals the winding number around the
//! hole: no lattice step between such sites passes between the ray origin and
//! the hole. The detector is exercised against the dual characterization
//! (no opposite-color path joins inner ring to outer ring) in tests and in
//! the acceptance battery.

use std::collections::VecDeque;

use crate::clusters::{Color, SpinField};
use crate::lattice::{Annulus, Site};

/// Signed cut-crossing contribution of one adjacency step (`|Δy| <= 1`).
#[inline]
fn winding_step(s: Site, t: Site) -> i32 {
    if s.y + t.y == -1 && s.x + t.x >= 1 {
        t.y - s.y // +1 crossing upward, -1 downward
    } else {
        0
    }
}

/// Is there a `color` circuit inside `annulus` surrounding its hole?
pub fn has_circuit<F: SpinField + ?Sized>(field: &mut F, annulus: Annulus, color: Color) -> bool {
    let rect = annulus.rect();
    // 0 = unvisited, 1 = blocked (wrong color or outside domain), 2 = heighted.
    let mut state = vec![0u8; rect.len()];
    let mut height = vec![0i32; rect.len()];
    let mut queue: VecDeque<Site> = VecDeque::new();

    for start in annulus.sites() {
        let si = rect.index_unchecked(start);
        if state[si] != 0 {
            continue;
        }
        match field.spin_at(start) {
            Some(sp) if color.occupies(sp) => {}
            _ => {
                state[si] = 1;
                continue;
            }
        }
        state[si] = 2;
        height[si] = 0;
        queue.push_back(start);
        while let Some(s) = queue.pop_front() {
            let h = height[rect.index_unchecked(s)];
            let l1;
            let linf;
            let neighbors: &[Site] = match color {
                Color::Plus => {
                    l1 = s.l1_neighbors();
                    &l1
                }
                Color::MinusStar => {
                    linf = s.linf_neighbors();
                    &linf
                }
            };
            for &nb in neighbors {
                if !annulus.contains(nb) {
                    continue;
                }
                let j = rect.index_unchecked(nb);
                let hn = h + winding_step(s, nb);
                match state[j] {
                    1 => {}
                    2 => {
                        if height[j] != hn {
                            // Two walks from the root to nb disagree: the
                            // cluster contains a closed walk of nonzero
                            // winding, i.e. a circuit around the hole.
                            return true;
                        }
                    }
                    _ => match field.spin_at(nb) {
                        Some(sp) if color.occupies(sp) => {
                            state[j] = 2;
                            height[j] = hn;
                            queue.push_back(nb);
                        }
                        _ => state[j] = 1,
                    },
                }
            }
        }
    }
    false
}
