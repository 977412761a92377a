use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Core windows `(i)` tiling the variants and their flanks `(i)⁺`.
///
/// All ranges are half-open variant-index ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub windows: Vec<(usize, usize)>,
    pub flanks: Vec<(usize, usize)>,
    pub window_span: u64,
    pub flank_span: u64,
}

impl WindowPlan {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Splits the coordinate range into `window_span` chunks and attaches to each
/// chunk every variant within `flank_span` base pairs of the chunk.
///
/// A trailing chunk shorter than half a window is merged into its
/// predecessor. Chunks that contain no variant are skipped. Flanks are
/// truncated at the ends of the data.
pub fn plan_windows(positions: &[u64], window_span: u64, flank_span: u64) -> Result<WindowPlan> {
    if positions.is_empty() {
        return Err(Error::EmptyInput("no variant positions".into()));
    }
    if window_span == 0 {
        return Err(Error::InvalidArgument("window_span must be positive".into()));
    }
    if positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("positions not strictly increasing".into()));
    }
    let first = positions[0];
    let last = *positions.last().unwrap();
    let extent = last - first + 1;
    let mut chunks = extent.div_ceil(window_span).max(1);
    if chunks > 1 {
        let tail = extent - (chunks - 1) * window_span;
        if 2 * tail < window_span {
            chunks -= 1;
        }
    }
    let index_at = |pos: u64| positions.partition_point(|&p| p < pos);

    let mut windows = Vec::new();
    let mut flanks = Vec::new();
    for k in 0..chunks {
        let lo = first + k * window_span;
        let hi = if k + 1 == chunks { last + 1 } else { lo + window_span };
        let core = (index_at(lo), index_at(hi));
        if core.0 == core.1 {
            continue;
        }
        let flank = (
            index_at(lo.saturating_sub(flank_span)),
            index_at(hi.saturating_add(flank_span)),
        );
        windows.push(core);
        flanks.push(flank);
    }
    Ok(WindowPlan {
        windows,
        flanks,
        window_span,
        flank_span,
    })
}
