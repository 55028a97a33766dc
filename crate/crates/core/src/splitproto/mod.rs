//! The two-party protocol: cut-layer messages, their wire format, the
//! training loop, and the host's passive tap over everything it receives.

mod codec;
mod message;
mod tap;
mod timing;
mod training;

pub use codec::{
    decode_frame, decode_stream, encode_frame, read_trace, write_trace, CodecError, FRAME_MAGIC,
    FRAME_VERSION, HEADER_LEN, PREFIX_LEN, TRACE_EXTENSION,
};
pub use message::{CutLayerMessage, Frame, GradientMessage};
pub use tap::{EpochWindow, GradientTap, Observations, TapSource};
pub use timing::TimingReport;
pub use training::{evaluate, fit, run_training, SplitModel, TrainConfig, TrainOutcome, UtilityReport};
