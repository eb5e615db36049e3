//! Positive definite binary quadratic forms that represent almost the same primes.

pub mod arith;
pub mod classgrp;
pub mod compose;
pub mod equiv;
pub mod error;
pub mod genus;
pub mod oracle;
pub mod qform;
pub mod registry;
pub mod report;
pub mod search;

pub use classgrp::{ClassGroup, GroupCache, GroupType};
pub use compose::Composer;
pub use equiv::{Classifier, EquivClass, Member};
pub use error::{Error, Result};
pub use genus::{GenusBasis, Signature, Span};
pub use qform::{Flavor, Form, PrimeSet, ReducedForm};
pub use registry::Registry;
pub use report::TableRun;
pub use search::{Hit, SearchConfig, SearchResult};
