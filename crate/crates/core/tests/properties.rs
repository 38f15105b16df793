use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use promptvm::codec::{build_prompt, cot_oracle, detokenize, parse_prompt, readout, tokenize, TokenStream};
use promptvm::numerics::ExactBackend;
use promptvm::ptm::{random_program, run_quiet, Program, RandomProgramConfig};
use promptvm::tm::{ptm_to_tm2, tm2_to_ptm, tm_run};
use promptvm::transformer::Transformer;

fn program(seed: u64, max_len: usize) -> Program {
    let cfg = RandomProgramConfig { max_len, ..RandomProgramConfig::default() };
    random_program(&mut ChaCha8Rng::seed_from_u64(seed), &cfg)
}

fn input() -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), 0..8)
}

proptest! {
    #[test]
    fn tokenize_round_trips(x in prop::collection::vec(any::<bool>(), 0..64)) {
        prop_assert_eq!(detokenize(tokenize(&x).tokens()).unwrap(), x);
    }

    #[test]
    fn prompt_round_trips(seed in any::<u64>()) {
        let p = program(seed, 40);
        let prompt = build_prompt(&p);
        let (q, len) = parse_prompt(prompt.tokens()).unwrap();
        prop_assert_eq!(q, p.clone());
        prop_assert_eq!(len, prompt.len());
        prop_assert_eq!(Program::parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn token_ids_round_trip(seed in any::<u64>(), x in input()) {
        let s = build_prompt(&program(seed, 20)).concat(&tokenize(&x));
        prop_assert_eq!(TokenStream::from_ids(&s.ids()).unwrap(), s.clone());
        prop_assert_eq!(s.to_string().parse::<TokenStream>().unwrap(), s);
    }

    #[test]
    fn readout_of_the_oracle_is_the_output(seed in any::<u64>(), x in input()) {
        let p = program(seed, 30);
        if let Ok((out, _)) = run_quiet(&p, &x, 2000) {
            prop_assert_eq!(readout(cot_oracle(&p, &x, 2000).unwrap().tokens()).unwrap(), out);
        }
    }

    #[test]
    fn compiled_machines_agree(seed in any::<u64>(), x in input()) {
        let p = program(seed, 30);
        if let Ok((out, _)) = run_quiet(&p, &x, 2000) {
            let m = ptm_to_tm2(&p);
            prop_assert_eq!(&tm_run(&m, &x, 20_000).unwrap().0, &out);
            let back = tm2_to_ptm(&m).unwrap();
            prop_assert_eq!(run_quiet(&back, &x, 100_000).unwrap().0, out);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transformer_matches_the_oracle(seed in any::<u64>(), x in prop::collection::vec(any::<bool>(), 0..6)) {
        let p = program(seed, 24);
        if let Ok(cot) = cot_oracle(&p, &x, 600) {
            let context = build_prompt(&p).concat(&tokenize(&x));
            let got = Transformer::new().generate(ExactBackend, context.tokens(), 600).unwrap();
            prop_assert_eq!(got, cot);
        }
    }
}
