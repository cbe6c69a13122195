//! Example models shipped with the compiler.

pub const PENDULUM: &str = include_str!("../corpus/pendulum.cdl");
pub const PENDULUM_PD: &str = include_str!("../corpus/pendulum_pd.cdl");
pub const CAM: &str = include_str!("../corpus/cam.cdl");
pub const BIPED: &str = include_str!("../corpus/biped.cdl");

/// Every corpus model by file stem.
pub const ALL: [(&str, &str); 4] = [("pendulum", PENDULUM), ("pendulum_pd", PENDULUM_PD), ("cam", CAM), ("biped", BIPED)];
