//! File formats, experiment sweeps and the `fairslot` command line.

pub mod cli;
pub mod io;
pub mod sweep;
