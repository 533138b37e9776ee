//! Stopping-time Banach spaces on truncated dyadic trees.
//!
//! The crate evaluates the norms of `S^E`, `B^E` and their duals on the
//! finite truncations `2^{≤n}` of the binary tree, builds the operators
//! induced by linearly order-isomorphic subtrees, searches monochromatic
//! subtrees in two-colourings, plays the reproducibility game and factors
//! the identity through operators with large diagonal.
//!
//! Every capability has a runnable program under `examples/`:
//!
//! ```text
//! cargo run --release --example norms
//! cargo run --release --example dual_norms
//! cargo run --release --example embeddings
//! cargo run --release --example ramsey
//! cargo run --release --example rep_game
//! cargo run --release --example sign_selection
//! cargo run --release --example max_ideal
//! cargo run --release --example factorize
//! ```
//!
//! A small session:
//!
//! ```
//! use stoptime::{norm_s, BaseNorm, CoeffVector};
//!
//! let x = CoeffVector::ones(1);
//! assert_eq!(norm_s(&x, &BaseNorm::l1()).unwrap(), 2.0);
//! ```

pub mod base_norm;
pub mod factorization;
pub mod game;
pub mod lp;
pub mod operators;
pub mod ramsey;
pub mod spaces;
pub mod tree;
pub mod verify;

pub use base_norm::{BaseNorm, CustomNorm};
pub use factorization::{diagonalize_d, FactorOptions, FactorisationCertificate};
pub use game::{run_rep_game, select_signs, verify_transcript, Adversary, GameTranscript, SignMode};
pub use operators::{build_b_q, distance_to_annihilator, OperatorMatrix};
pub use ramsey::{find_monochromatic_subtree, Coloring};
pub use spaces::{dual_norm_b, dual_norm_d, norm_b, norm_s, CoeffVector, SpaceTag};
pub use tree::{Node, SubtreeEmbedding, Truncation};
