//! RF speed bump simulator.
//!
//! A roadside unit broadcasts a small beacon carrying the bump speed and
//! zone length. A vehicle's in-vehicle unit ranges on the received signal
//! strength, anchors a braking profile when the filtered RSSI rises through
//! a reference level, and drives the speed limiter down to the bump speed
//! for the length of the zone.
//!
//! - [`propagation`]: free-space link budget and shadowing
//! - [`kinematics`]: stopping distance, braking profile, vehicle stepping
//! - [`beacon`]: frame codec and RSU transmission schedule
//! - [`ivu`]: RSSI window, FIR trend filter and the limiter protocol
//! - [`simengine`]: scenario files, the fixed-step run loop and CSV traces
//! - [`cli`]: the `speedbump` command line

// `!(x > 0.0)` is how parameter checks reject NaN along with bad values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beacon;
pub mod cli;
pub mod ivu;
pub mod kinematics;
pub mod propagation;
pub mod simengine;
