//! Stochastic recurrent network (STORN) with a trending prior, trained by
//! stochastic variational inference and used for off-line and on-line
//! anomaly detection in multivariate time series.

pub mod autodiff;
pub mod seqmodel;
pub mod trainer;
pub mod synthdata;
pub mod evaluation;
pub mod scoring;
pub mod pipeline;
