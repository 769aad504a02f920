//! Software twin of a palm-mounted RFID glove that lets a visually impaired
//! user attach spoken labels to tagged objects and hear them back later.
//!
//! The crate is split along the device's own boundaries:
//!
//! - [`tagdb`]: the onboard tag → audio clip database and its on-disk layout
//! - [`device`]: the detect / notify / record / playback control loop
//! - [`rfmodel`]: the 13.56 MHz reader's geometric read model
//! - [`scene`]: tabletop scenes for the four trial setups
//! - [`agent`]: a seeded synthetic participant that runs the trials
//! - [`metrics`]: trial scoring and the statistics used to analyse them
//! - [`energy`]: duty-cycle power and battery-life arithmetic

pub mod agent;
pub mod device;
pub mod energy;
pub mod metrics;
pub mod rfmodel;
pub mod scene;
pub mod tagdb;

pub use device::{DeviceAction, DeviceConfig, DeviceEvent, DeviceState};
pub use rfmodel::{HandPose, Material, ReadResult, RfParams, TagPlacement};
pub use scene::Scene;
pub use tagdb::{AudioClip, ClipId, TagDatabase, TagUid};
