/// Frame indices `round(k * fps / target_fps)` for k = 0, 1, ... below
/// `num_frames`, deduplicated. Always contains frame 0.
pub fn sample_frames(num_frames: usize, fps: f64, target_fps: f64) -> Vec<usize> {
    assert!(fps > 0.0 && target_fps > 0.0, "rates must be positive");
    let step = fps / target_fps;
    let mut out: Vec<usize> = Vec::new();
    let mut k = 0u64;
    loop {
        let idx = (k as f64 * step).round();
        if idx >= num_frames as f64 {
            break;
        }
        let idx = idx as usize;
        if out.last() != Some(&idx) {
            out.push(idx);
        }
        k += 1;
    }
    if out.is_empty() {
        out.push(0);
    }
    out
}

/// `count` indices `floor(k * num_frames / count)` for k = 0..count.
pub fn uniform_indices(num_frames: usize, count: usize) -> Vec<usize> {
    (0..count).map(|k| k * num_frames / count).collect()
}
