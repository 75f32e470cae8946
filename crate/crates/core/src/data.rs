//! Characterization data shipped with the crate.

use crate::charlib::{self, Application, ModuleLibrary, Platform};

pub const LIBRARY: &str = include_str!("../data/ultra96.lib");
pub const PLATFORM: &str = include_str!("../data/ultra96.platform");
pub const PLATFORM_PCAP: &str = include_str!("../data/ultra96_pcap.platform");
pub const ACTIVITY: &str = include_str!("../data/activity.app");
pub const DEPTH: &str = include_str!("../data/depth.app");
pub const FACIAL: &str = include_str!("../data/facial.app");

pub const APPLICATIONS: [&str; 3] = ["activity", "depth", "facial"];

pub fn library() -> ModuleLibrary {
    charlib::parse_library(LIBRARY).expect("shipped library parses")
}

/// Calibrated platform: 12 ms full-region PR time.
pub fn platform() -> Platform {
    charlib::parse_platform(PLATFORM).expect("shipped platform parses")
}

/// Nominal 5.5 MB bitstream platform.
pub fn platform_pcap() -> Platform {
    charlib::parse_platform(PLATFORM_PCAP).expect("shipped platform parses")
}

/// Source text of a shipped application by name.
pub fn application_text(name: &str) -> Option<&'static str> {
    match name {
        "activity" => Some(ACTIVITY),
        "depth" => Some(DEPTH),
        "facial" => Some(FACIAL),
        _ => None,
    }
}

pub fn application(name: &str) -> Option<Application> {
    application_text(name).map(|t| charlib::parse_application(t).expect("shipped application parses"))
}
