//! The concrete model families.

pub mod gmm;
pub mod rbm;
pub mod tabular;
pub mod vae;

pub use gmm::{gmm_fit_em, gmm_fit_em_source, gmm_init_cover_standard_normal, GmmInit, GmmModel, GmmParams};
pub use rbm::{rbm_log_partition_exact, rbm_train_cd, rbm_train_cd_source, RbmModel, RbmParams};
pub use tabular::TabularModel;
pub use vae::{vae_train, vae_train_source, Mlp, VaeModel};
