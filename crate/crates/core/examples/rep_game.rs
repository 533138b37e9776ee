//! The reproducibility game against a seeded random adversary, followed by
//! the transcript check and a replay of the same moves.

use stoptime::game::{run_rep_game, verify_transcript, RandomAdversary, ReplayAdversary};
use stoptime::spaces::SpaceTag;
use stoptime::BaseNorm;

fn main() {
    let space = SpaceTag::S { base: BaseNorm::l1() };
    let mut adversary = RandomAdversary::new(0.1, 3);
    let tr = run_rep_game(&mut adversary, 2, 10, &space).unwrap();
    for turn in &tr.turns {
        println!(
            "'{}' -> '{}'  distances {:.2e} / {:.2e}  failed {}",
            turn.node, turn.response.nodes[0], turn.primal_distance, turn.dual_distance, turn.failed
        );
    }

    let report = verify_transcript(&tr, 1.0, None).unwrap();
    for item in &report.items {
        println!("item {} passed {}: {}", item.item, item.passed, item.detail);
    }

    let mut replay = ReplayAdversary::from_transcript(&tr);
    let again = run_rep_game(&mut replay, 2, 10, &space).unwrap();
    println!("replay reproduces images: {}", again.images() == tr.images());
}
