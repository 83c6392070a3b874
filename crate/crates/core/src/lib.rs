pub mod bp;
pub mod decimation;
pub mod instance;
pub mod io;
pub mod localsearch;
pub mod oracle;
pub mod rng;
pub mod sp;
pub mod spy;
pub mod rsp;
pub mod solve;
