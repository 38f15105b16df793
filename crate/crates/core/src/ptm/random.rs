use rand::Rng;

use super::program::{Dir, Instruction, Program, Tape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomProgramConfig {
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that an instruction is a conditional goto.
    pub goto_prob: f64,
    /// Probability that an interior instruction is `#`.
    pub halt_prob: f64,
}

impl Default for RandomProgramConfig {
    fn default() -> Self {
        RandomProgramConfig { min_len: 2, max_len: 40, goto_prob: 0.25, halt_prob: 0.03 }
    }
}

fn random_tape<R: Rng>(rng: &mut R) -> Tape {
    if rng.gen() {
        Tape::A
    } else {
        Tape::B
    }
}

/// A valid program ending in `#` whose control-flow graph reaches a `#`
/// from instruction 0. Termination on any given input is not guaranteed.
pub fn random_program<R: Rng>(rng: &mut R, config: &RandomProgramConfig) -> Program {
    let min_len = config.min_len.max(2);
    loop {
        let len = rng.gen_range(min_len..=config.max_len.max(min_len));
        let mut ins = Vec::with_capacity(len);
        for j in 0..len - 1 {
            let x: f64 = rng.gen();
            let i = if x < config.halt_prob {
                Instruction::Halt
            } else if x < config.halt_prob + config.goto_prob {
                let mut k = rng.gen_range(0..len - 1);
                if k >= j {
                    k += 1;
                }
                if rng.gen() {
                    Instruction::GotoIfZero(random_tape(rng), k)
                } else {
                    Instruction::GotoIfOne(random_tape(rng), k)
                }
            } else if rng.gen_bool(0.5) {
                Instruction::Move(random_tape(rng), if rng.gen() { Dir::L } else { Dir::R })
            } else {
                Instruction::Write(random_tape(rng), rng.gen())
            };
            ins.push(i);
        }
        ins.push(Instruction::Halt);
        if reaches_halt(&ins) {
            return Program::new(ins).expect("generated program is valid");
        }
    }
}

fn reaches_halt(ins: &[Instruction]) -> bool {
    let mut seen = vec![false; ins.len()];
    let mut stack = vec![0usize];
    while let Some(j) = stack.pop() {
        if j >= ins.len() || seen[j] {
            continue;
        }
        seen[j] = true;
        match ins[j] {
            Instruction::Halt => return true,
            i => {
                stack.push(j + 1);
                if let Some(k) = i.target() {
                    stack.push(k);
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn generated_programs_are_valid_and_end_in_halt() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = random_program(&mut rng, &RandomProgramConfig::default());
            assert_eq!(p.instructions().last(), Some(&Instruction::Halt));
            assert!(reaches_halt(p.instructions()));
        }
    }
}
