//! Time-domain toolkit: waveforms, the component models an injected
//! disturbance passes through, and designers for the attack signals.

pub mod adc;
pub mod attack;
pub mod spectrum;
pub mod stages;
pub mod waveform;

pub use adc::{sample_adc, AdcSampler, Jitter};
pub use attack::{
    design_ac_attack, design_dc_attack, design_pulse_attack, predict_alias, AliasPrediction,
    DcAttack,
};
pub use stages::{
    apply_nonlinear_amp, comparator_pulses, lowpass_ideal, ComparatorState, HysteresisComparator,
    NonlinearAmp,
};
pub use waveform::{population_std, synth_tone, Tone, Waveform};
