//! Runs every `rust` block of the guide under `book/src` as a doc-test.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub struct Introduction;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/frames.md")]
pub struct Frames;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/background.md")]
pub struct Background;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/lif.md")]
pub struct Lif;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/network.md")]
pub struct Network;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/postfilter.md")]
pub struct Postfilter;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/metrics.md")]
pub struct Metrics;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/benchmark.md")]
pub struct Benchmark;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub struct Cli;
