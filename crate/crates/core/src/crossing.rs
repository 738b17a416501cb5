//! Open crossings of integer rectangles in `Z^2`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive rectangle `[a, b] × [c, d]`. The first coordinate ranges over
/// `[a, b]`, the second over `[c, d]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rectangle2D {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

/// Which coordinate a crossing has to span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    First,
    Second,
}

impl Rectangle2D {
    /// Degenerate sides (`a = b` or `c = d`) are allowed; a crossing along a
    /// side of length one is a single open site.
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        if a > b || c > d {
            return Err(Error::invalid(format!(
                "empty rectangle [{a},{b}]x[{c},{d}]"
            )));
        }
        Ok(Rectangle2D { a, b, c, d })
    }

    pub fn width(&self) -> usize {
        (self.b - self.a + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.d - self.c + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, u: i64, v: i64) -> bool {
        self.a <= u && u <= self.b && self.c <= v && v <= self.d
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (self.a..=self.b).flat_map(move |u| (self.c..=self.d).map(move |v| (u, v)))
    }
}

/// Open path inside `r` from the side where `along` is minimal to the side
/// where it is maximal.
pub fn crossing_along(r: &Rectangle2D, along: Axis, open: impl Fn(i64, i64) -> bool) -> bool {
    crossing_path(r, along, open).is_some()
}

/// Shortest open crossing, found by breadth-first search in a fixed order.
pub fn crossing_path(
    r: &Rectangle2D,
    along: Axis,
    open: impl Fn(i64, i64) -> bool,
) -> Option<Vec<(i64, i64)>> {
    let (w, h) = (r.width(), r.height());
    let idx = |u: i64, v: i64| (u - r.a) as usize * h + (v - r.c) as usize;
    let mut state = vec![0u8; w * h]; // 0 unknown, 1 closed, 2 visited
    let mut parent = vec![usize::MAX; w * h];
    let mut queue = VecDeque::new();
    let start: Vec<(i64, i64)> = match along {
        Axis::First => (r.c..=r.d).map(|v| (r.a, v)).collect(),
        Axis::Second => (r.a..=r.b).map(|u| (u, r.c)).collect(),
    };
    let reached = |u: i64, v: i64| match along {
        Axis::First => u == r.b,
        Axis::Second => v == r.d,
    };
    for (u, v) in start {
        if open(u, v) {
            state[idx(u, v)] = 2;
            queue.push_back((u, v));
        } else {
            state[idx(u, v)] = 1;
        }
    }
    while let Some((u, v)) = queue.pop_front() {
        if reached(u, v) {
            let mut path = vec![(u, v)];
            let mut cur = idx(u, v);
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push((r.a + (cur / h) as i64, r.c + (cur % h) as i64));
            }
            path.reverse();
            return Some(path);
        }
        for (du, dv) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (x, y) = (u + du, v + dv);
            if !r.contains(x, y) {
                continue;
            }
            let j = idx(x, y);
            if state[j] != 0 {
                continue;
            }
            if open(x, y) {
                state[j] = 2;
                parent[j] = idx(u, v);
                queue.push_back((x, y));
            } else {
                state[j] = 1;
            }
        }
    }
    None
}

/// Bottom-to-top crossing: spans the second coordinate from `c` to `d`.
pub fn crossing_bt(r: &Rectangle2D, open: impl Fn(i64, i64) -> bool) -> bool {
    crossing_along(r, Axis::Second, open)
}

/// Left-to-right crossing: spans the first coordinate from `a` to `b`.
pub fn crossing_lr(r: &Rectangle2D, open: impl Fn(i64, i64) -> bool) -> bool {
    crossing_along(r, Axis::First, open)
}
