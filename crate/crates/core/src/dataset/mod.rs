//! Ingestion, alignment, gap filling, feature selection, scaling, splitting
//! and windowing of daily price series.

mod correlation;
mod frame;
mod scaler;
mod series;
mod split;
mod window;

pub use correlation::{
    average_ranks, correlate_candidates, select_features, spearman, FeatureCorrelation,
};
pub use frame::{
    fill_gaps, interpolate, left_join, AlignedDataset, Column, ColumnRole, GappedColumn,
    JoinedFrame, RESIDUAL,
};
pub use scaler::{fit_scaler, ColumnScale, NamedScale, Scaler};
pub use series::{ingest_csv, TimeSeries};
pub use split::{SplitRanges, SplitSpec};
pub use window::{make_windows, windows_in_range, WindowSpec, WindowedSample, WindowedSplits};
