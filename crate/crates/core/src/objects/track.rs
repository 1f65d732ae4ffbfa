//! Frame-to-frame association by feature cosine similarity.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkMode {
    /// Per-object argmax; several objects may share a successor.
    #[default]
    Literal,
    /// Greedy by descending similarity; each successor used at most once.
    Exclusive,
}

/// Cosine similarity in f64; 0 when either vector has zero norm.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (*x as f64, *y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Links each present object of one frame to an object of the next.
/// Absent objects (`None`) neither link nor receive links. Ties resolve to
/// the lowest index; links below `min_sim` are dropped.
pub fn link_transition(
    cur: &[Option<&[f32]>],
    next: &[Option<&[f32]>],
    min_sim: f64,
    mode: LinkMode,
) -> Vec<Option<usize>> {
    let sims: Vec<Vec<Option<f64>>> = cur
        .iter()
        .map(|a| {
            next.iter()
                .map(|b| match (a, b) {
                    (Some(a), Some(b)) => Some(cosine(a, b)),
                    _ => None,
                })
                .collect()
        })
        .collect();
    match mode {
        LinkMode::Literal => sims
            .iter()
            .map(|row| {
                let mut best: Option<(usize, f64)> = None;
                for (j, s) in row.iter().enumerate() {
                    if let Some(s) = *s {
                        if best.is_none_or(|(_, b)| s > b) {
                            best = Some((j, s));
                        }
                    }
                }
                best.filter(|(_, s)| *s >= min_sim).map(|(j, _)| j)
            })
            .collect(),
        LinkMode::Exclusive => {
            let mut cand: Vec<(f64, usize, usize)> = sims
                .iter()
                .enumerate()
                .flat_map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .filter_map(move |(j, s)| s.filter(|s| *s >= min_sim).map(|s| (s, i, j)))
                })
                .collect();
            cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut links = vec![None; cur.len()];
            let mut used = vec![false; next.len()];
            for (_, i, j) in cand {
                if links[i].is_none() && !used[j] {
                    links[i] = Some(j);
                    used[j] = true;
                }
            }
            links
        }
    }
}

/// Links for every consecutive frame pair. A transition where either frame
/// has no present objects yields no links.
pub fn link_frames(frames: &[Vec<Option<&[f32]>>], min_sim: f64, mode: LinkMode) -> Vec<Vec<Option<usize>>> {
    frames
        .windows(2)
        .map(|w| {
            if w[0].iter().all(Option::is_none) || w[1].iter().all(Option::is_none) {
                vec![None; w[0].len()]
            } else {
                link_transition(&w[0], &w[1], min_sim, mode)
            }
        })
        .collect()
}
