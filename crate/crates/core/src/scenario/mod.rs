//! Deployments: geometry, large-scale fading, AP association and pilots.

mod config;
mod deployment;

pub use config::{dbm_to_watt, watt_to_dbm, ConfigFile, ScenarioConfig};
pub use deployment::{
    assign_pilots, associate, generate_deployment, generate_deployment_indexed, path_loss_db,
    Deployment, Position,
};
