//! Norms of `S^E` and `B^E` for a few base norms, with their witnesses.

use stoptime::spaces::{norm_b_report, norm_s_report, CoeffVector};
use stoptime::tree::Node;
use stoptime::BaseNorm;

fn main() {
    let x = CoeffVector::from_fn(3, |t: Node| if t.len() % 2 == 0 { 1.0 } else { -0.5 });
    for base in [BaseNorm::l1(), BaseNorm::lp(1.5).unwrap(), BaseNorm::l2(), BaseNorm::linf()] {
        let s = norm_s_report(&x, &base).unwrap();
        let b = norm_b_report(&x, &base);
        let show = |w: &[Node]| w.iter().map(|t| format!("'{t}'")).collect::<Vec<_>>().join(" ");
        println!("{:>7}  S = {:.6}  on {}", base.label(), s.value, show(&s.witness));
        println!("{:>7}  B = {:.6}  on {}", "", b.value, show(&b.witness));
    }
}
