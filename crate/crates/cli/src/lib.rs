//! Command implementations and the HTTP session service behind the
//! `multiprior` binary.

pub mod commands;
pub mod http;
