//! Worst-case latency and reliability analysis for industrial networks that
//! combine cyclic master/slave units with a switched backbone.
//!
//! Curve and cycle models are generic over [`Scalar`] (`f32`, `f64` or exact
//! [`num_rational::BigRational`]); the scenario-level analysis and the
//! simulators work in `f64`.

pub mod curves;
pub mod cyclic;
pub mod e2e;
pub mod oracle;
pub mod scalar;
pub mod scenario;
pub mod sim;

pub use curves::{CurveError, PiecewiseAffineCurve, RateLatency, Segment, TokenBucket};
pub use cyclic::{ArrivalModel, CycleSpec, CyclicError, FrameCount, SliceScheme};
pub use e2e::{analyze, sweep_latency, sweep_reliability, AnalysisOptions, E2eError, PathResult};
pub use scalar::Scalar;
pub use scenario::{case_study, parse_scenario, write_scenario, Scenario, ScenarioError};
pub use sim::{simulate_cycles, simulate_queues, SimConfig, SimReport, TrafficPattern};

pub type Curve = PiecewiseAffineCurve<f64>;
pub type ExactCurve = PiecewiseAffineCurve<num_rational::BigRational>;
pub type Bucket = TokenBucket<f64>;
pub type Server = RateLatency<f64>;
pub type Arrival = ArrivalModel<f64>;
pub type ExactArrival = ArrivalModel<num_rational::BigRational>;
