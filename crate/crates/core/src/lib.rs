pub mod density;
pub mod dispatch;
pub mod evaluation;
pub mod load;
pub mod optim;
pub mod postproc;
pub mod simulate;
pub mod timeseries;
