//! Orbit distances `d(o, w·o)` over balls of reduced words.
//!
//! A [`WordGeometry`] builds the orbit point of `a·w` from that of `w`; the
//! table builder walks the word tree depth first, one task per suffix of length
//! two, and concatenates task outputs in a fixed order so results do not depend
//! on the thread count.

use rayon::prelude::*;

use crate::words::{alphabet, Letter, ReducedWord};

pub trait WordGeometry: Sync {
    type State: Clone + Send + Sync;

    fn rank(&self) -> usize;

    /// State of the empty word.
    fn root(&self) -> Self::State;

    /// State of `a·w` given the state of `w`.
    fn extend_left(&self, a: Letter, s: &Self::State) -> Self::State;

    /// `d(o, w·o)` from the state of `w`.
    fn distance(&self, s: &Self::State) -> f64;

    fn word_state(&self, w: &ReducedWord) -> Self::State {
        let mut s = self.root();
        for &a in w.letters().iter().rev() {
            s = self.extend_left(a, &s);
        }
        s
    }

    fn word_distance(&self, w: &ReducedWord) -> f64 {
        self.distance(&self.word_state(w))
    }
}

/// `levels[n]` holds `d(o, w·o)` for every reduced word of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    pub rank: usize,
    pub levels: Vec<Vec<f64>>,
}

impl DistanceTable {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn min_at(&self, n: usize) -> f64 {
        self.levels[n].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn dfs<G: WordGeometry>(g: &G, s: &G::State, first: Letter, level: usize, max: usize, letters: &[Letter], out: &mut [Vec<f64>]) {
    out[level].push(g.distance(s));
    if level == max {
        return;
    }
    for &a in letters {
        if a != -first {
            let t = g.extend_left(a, s);
            dfs(g, &t, a, level + 1, max, letters, out);
        }
    }
}

pub fn distance_table<G: WordGeometry>(g: &G, depth: usize) -> DistanceTable {
    let r = g.rank();
    let letters = alphabet(r);
    let root = g.root();
    let mut levels: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    levels[0].push(g.distance(&root));
    if depth == 0 || r == 0 {
        return DistanceTable { rank: r, levels };
    }
    let level1: Vec<(Letter, G::State)> = letters.iter().map(|&a| (a, g.extend_left(a, &root))).collect();
    levels[1] = level1.iter().map(|(_, s)| g.distance(s)).collect();
    if depth == 1 {
        return DistanceTable { rank: r, levels };
    }
    // Tasks: words of length 2, i.e. a·b with b the last letter.
    let mut tasks: Vec<(Letter, G::State)> = Vec::new();
    for (b, sb) in &level1 {
        for &a in &letters {
            if a != -*b {
                tasks.push((a, g.extend_left(a, sb)));
            }
        }
    }
    let parts: Vec<Vec<Vec<f64>>> = tasks
        .par_iter()
        .map(|(a, s)| {
            let mut out = vec![Vec::new(); depth + 1];
            dfs(g, s, *a, 2, depth, &letters, &mut out);
            out
        })
        .collect();
    for n in 2..=depth {
        let total: usize = parts.iter().map(|p| p[n].len()).sum();
        let mut v = Vec::with_capacity(total);
        for p in &parts {
            v.extend_from_slice(&p[n]);
        }
        levels[n] = v;
    }
    DistanceTable { rank: r, levels }
}

/// A synthetic geometry with `d(o, w·o) = c·|w|` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStub {
    pub rank: usize,
    pub c: f64,
}

impl WordGeometry for MetricStub {
    type State = usize;

    fn rank(&self) -> usize {
        self.rank
    }

    fn root(&self) -> usize {
        0
    }

    fn extend_left(&self, _a: Letter, s: &usize) -> usize {
        s + 1
    }

    fn distance(&self, s: &usize) -> f64 {
        self.c * *s as f64
    }
}
