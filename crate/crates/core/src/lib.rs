//! Simulation-based root-cause attribution for a modular driving pipeline.
//!
//! A scenario is simulated through a pub/sub pipeline of five components.
//! When the run violates a driving specification, idealized substitutes are
//! swapped in per component (and then per message suffix) to find the
//! component and the first message responsible.

pub mod ads;
pub mod bench;
pub mod dvca;
pub mod error;
pub mod geom;
pub mod middleware;
pub mod num;
pub mod oracles;
pub mod scenario;
pub mod substitutes;
pub mod time;
pub mod world;

pub type Vec2 = geom::Vec2<f64>;
pub type OrientedBox = geom::OrientedBox<f64>;
pub type Polyline = geom::Polyline<f64>;

pub use error::{DvcaError, Result};
pub use middleware::trace::{RunConfig, Trace};
pub use middleware::ComponentId;
pub use oracles::{OracleConfig, Verdict, ViolationKind};
pub use scenario::Scenario;
pub use time::SimTime;
