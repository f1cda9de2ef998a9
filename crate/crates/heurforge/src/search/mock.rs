//! Network-free generator: evolutionary operators over the exemplars stand
//! in for a language model. Mix per candidate: 70% mutation of a random
//! exemplar, 20% crossover of an exemplar pair, 10% fresh grammar samples.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::dsl::{crossover, mutate, parse, sample_program, Diagnostic, Mode, Program};
use crate::util::derive_seed;

use super::{Generator, GeneratorError};

#[derive(Debug)]
pub struct MockGenerator {
    mode: Mode,
    run_seed: u64,
}

impl MockGenerator {
    pub fn new(mode: Mode, run_seed: u64) -> Self {
        MockGenerator { mode, run_seed }
    }

    fn fresh(&self, seed: u64) -> Program {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_program(&mut rng, self.mode)
    }

    fn parsed_exemplars(&self, exemplars: &[(String, f64)]) -> Vec<Program> {
        exemplars
            .iter()
            .filter_map(|(src, _)| parse(src, self.mode).ok())
            .collect()
    }
}

impl Generator for MockGenerator {
    fn label(&self) -> &str {
        "mock"
    }

    fn generate(
        &mut self,
        exemplars: &[(String, f64)],
        k: usize,
        round: u32,
    ) -> Result<Vec<String>, GeneratorError> {
        let pool = self.parsed_exemplars(exemplars);
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let seed = derive_seed(self.run_seed, round as u64, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let program = if pool.is_empty() {
                self.fresh(seed)
            } else {
                match rng.random_range(0..10u32) {
                    0..=6 => {
                        let p = &pool[rng.random_range(0..pool.len())];
                        mutate(p, rng.random(), 1 + rng.random_range(0..2))
                    }
                    7 | 8 => {
                        let a = &pool[rng.random_range(0..pool.len())];
                        let b = &pool[rng.random_range(0..pool.len())];
                        crossover(a, b, rng.random())
                    }
                    _ => self.fresh(rng.random()),
                }
            };
            out.push(program.source);
        }
        Ok(out)
    }

    fn repair(
        &mut self,
        _source: &str,
        _diagnostics: &[Diagnostic],
        exemplars: &[(String, f64)],
        attempt_seed: u64,
    ) -> Result<String, GeneratorError> {
        // The evolutionary operators are construct-correct, so repair is only
        // reached for externally supplied sources; answer with a mutation of
        // the best exemplar, or a fresh sample if none parse.
        let pool = self.parsed_exemplars(exemplars);
        let program = match pool.first() {
            Some(p) => mutate(p, attempt_seed, 1),
            None => self.fresh(attempt_seed),
        };
        Ok(program.source)
    }
}
