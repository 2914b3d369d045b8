//! `landsig` command-line tool and HTTP service.

pub mod api;
pub mod commands;
pub mod config;
pub mod files;
pub mod server;
