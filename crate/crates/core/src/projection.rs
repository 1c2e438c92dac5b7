//! Column-sum projection of differences between consecutive available frames.

use std::io::Write;

use thiserror::Error;

use crate::ingest::FrameSequence;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("need at least 2 available frames to difference, got {0}")]
    TooFewFrames(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProjectionOptions {
    /// Divide each difference by the number of grid steps it spans.
    pub normalize_gaps: bool,
}

/// x-profiles of the difference images, one column per consecutive pair of
/// available frames, stamped at the earlier frame of the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSignal {
    width: usize,
    n_total: usize,
    columns: Vec<Vec<f64>>,
    pair_times: Vec<usize>,
    pair_gaps: Vec<usize>,
}

impl ProjectionSignal {
    /// Builds a signal from raw columns. Mostly useful in tests.
    pub fn from_columns(n_total: usize, pair_times: Vec<usize>, columns: Vec<Vec<f64>>) -> Self {
        assert_eq!(pair_times.len(), columns.len());
        assert!(pair_times.windows(2).all(|w| w[0] < w[1]));
        assert!(pair_times.last().is_none_or(|&t| t < n_total));
        let width = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == width));
        let pair_gaps = pair_times
            .windows(2)
            .map(|w| w[1] - w[0])
            .chain(std::iter::once(1))
            .collect();
        Self {
            width,
            n_total,
            columns,
            pair_times,
            pair_gaps,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_pairs(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, pair: usize) -> &[f64] {
        &self.columns[pair]
    }

    pub fn pair_times(&self) -> &[usize] {
        &self.pair_times
    }

    /// Grid distance spanned by each pair.
    pub fn pair_gaps(&self) -> &[usize] {
        &self.pair_gaps
    }

    /// CSV dump, rows = x, columns = pair index.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let header: Vec<String> = self.pair_times.iter().map(|t| format!("t{t}")).collect();
        writeln!(w, "x,{}", header.join(","))?;
        for x in 0..self.width {
            write!(w, "{x}")?;
            for col in &self.columns {
                write!(w, ",{}", col[x])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn project(seq: &FrameSequence) -> Result<ProjectionSignal, ProjectionError> {
    project_with(seq, ProjectionOptions::default())
}

pub fn project_with(
    seq: &FrameSequence,
    opts: ProjectionOptions,
) -> Result<ProjectionSignal, ProjectionError> {
    let m = seq.len_available();
    if m < 2 {
        return Err(ProjectionError::TooFewFrames(m));
    }
    let (w, h) = (seq.width(), seq.height());
    let avail = seq.available();
    let frames = seq.frames();

    let mut columns = Vec::with_capacity(m - 1);
    let mut pair_gaps = Vec::with_capacity(m - 1);
    for k in 0..m - 1 {
        let (a, b) = (&frames[k], &frames[k + 1]);
        let gap = avail[k + 1] - avail[k];
        let mut col = vec![0.0f64; w];
        for y in 0..h {
            for ((acc, &pa), &pb) in col.iter_mut().zip(a.row(y)).zip(b.row(y)) {
                *acc += pb - pa;
            }
        }
        if opts.normalize_gaps && gap > 1 {
            let g = gap as f64;
            col.iter_mut().for_each(|v| *v /= g);
        }
        columns.push(col);
        pair_gaps.push(gap);
    }

    Ok(ProjectionSignal {
        width: w,
        n_total: seq.n_total(),
        columns,
        pair_times: avail[..m - 1].to_vec(),
        pair_gaps,
    })
}
