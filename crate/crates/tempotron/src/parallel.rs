//! Worker pool and order-preserving parallel maps over pulses and patterns.
//!
//! Results never depend on the thread count: every map collects in input
//! order and reports the lowest failing index.

use rayon::prelude::*;
use rayon::ThreadPool;

use tempotron_core::encoding::{EncodeError, Encoder};
use tempotron_core::neuron::{NeuronError, TempotronModel};
use tempotron_core::{Label, Pulse, SpikePattern};

use crate::error::Error;

pub const THREADS_ENV: &str = "TEMPOTRON_THREADS";

/// Pool sized by `TEMPOTRON_THREADS` when set, otherwise by the machine.
pub fn pool_from_env() -> Result<ThreadPool, Error> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => {
                return Err(Error::config(format!(
                    "{THREADS_ENV} = {v:?}: expected a positive integer"
                )))
            }
        },
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(Error::config)
}

fn first_error<T, E>(results: Vec<Result<T, E>>) -> Result<Vec<T>, E> {
    results.into_iter().collect()
}

/// Same output as [`Encoder::encode_all`], computed in parallel.
pub fn encode_all(encoder: &Encoder, pulses: &[Pulse]) -> Result<Vec<SpikePattern>, EncodeError> {
    let results: Vec<_> = pulses
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            encoder.encode(p).map_err(|e| EncodeError::AtPulse {
                index,
                source: Box::new(e),
            })
        })
        .collect();
    first_error(results)
}

/// Same output as [`TempotronModel::classify_batch`], computed in parallel.
pub fn classify_all(
    model: &TempotronModel,
    patterns: &[SpikePattern],
) -> Result<Vec<Label>, NeuronError> {
    let results: Vec<_> = patterns
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            model.classify(p).map_err(|e| NeuronError::AtPattern {
                index,
                source: Box::new(e),
            })
        })
        .collect();
    first_error(results)
}
