//! Behavioral simulator for an in-pixel, switched-capacitor patch projector.
//!
//! The signal path runs photons to digital features:
//!
//! ```text
//! RgbImage --antialias/mosaic--> BayerFrame --expose/CDS--> AnalogPixelArray
//!   --charge dump + per-patch PWM multiply + charge sharing--> AnalogFeatureFrame
//!   --edge ADC + digital correction--> DigitalFeatureFrame
//! ```
//!
//! [`perf_model`] is a separate closed-form model of frame timing, power,
//! pixel area and output data reduction.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analog_compute;
pub mod config;
pub mod error;
pub mod io;
pub mod patch_engine;
pub mod perf_model;
pub mod pipeline;
pub mod readout;
pub mod reference;
pub mod rng;
pub mod sensor_frontend;
pub mod synthetic;

pub use analog_compute::{
    activation, charge_share_sum, pwm_multiply, qth_quantize, quantized_divide, series_combine,
    ActivationKind, CapCharge, HardwareProfile, Polarity, SumMode, SumVariant,
};
pub use config::{RunConfig, TilingConfig};
pub use error::{Error, Result};
pub use patch_engine::{
    attention_layer, build_tiling, project_connected, project_patch, project_patch_signal,
    run_frame, strike_columns, AnalogFeatureFrame, Fidelity, Neighborhood, PatchTiling,
    SelectionMask, WeightBank,
};
pub use perf_model::{
    area_estimate, data_reduction, frame_time, perf_report, power_estimate, throughput,
    AreaTable, PerfReport, PowerConfig, TimingConfig,
};
pub use readout::{adc_convert, assemble_features, digital_out, AdcConfig, DigitalFeatureFrame};
pub use rng::{Domain, NoiseKey};
pub use sensor_frontend::{
    cds_sample, charge_dump, expose, gaussian_antialias, mosaic_bayer, AnalogPixelArray,
    BayerFrame, BayerPattern, ExposureConfig, RgbImage,
};
