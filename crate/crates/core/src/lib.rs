//! Grammar-coaching engine over typed feature structures: a grammar loader,
//! morphology, a chart parser with learner mal-rules, MRS-lite semantics, the
//! feedback layer, a supertagger and a profiler.

pub mod chart;
pub mod coach;
pub mod fixtures;
pub mod grammar;
pub mod morph;
pub mod profiler;
pub mod semantics;
pub mod supertag;
pub mod tdl;
pub mod tfs;
