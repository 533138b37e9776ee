//! Dual norms: `D^E` by column generation, `(B^E)*` directly, and the
//! pairing attaining each value.

use stoptime::spaces::{dual_norm_b, dual_norm_d, dual_norm_d_full_lp, norm_b, norm_s, pairing, CoeffVector};
use stoptime::BaseNorm;

fn main() {
    let f = CoeffVector::from_dense(2, vec![0.5, -1.0, 0.25, 2.0, 0.0, -0.75, 1.0]);
    let l1 = BaseNorm::l1();

    let d = dual_norm_d(&f, &l1).unwrap();
    let full = dual_norm_d_full_lp(&f, 2).unwrap();
    let x = d.maximizer.clone().unwrap();
    println!("D[lp:1]      = {:.9}  (all antichains as constraints: {full:.9})", d.value);
    println!("  maximizer x has S-norm {:.3} and <x, f> = {:.9}", norm_s(&x, &l1).unwrap(), pairing(&x, &f).unwrap());

    for base in [BaseNorm::l1(), BaseNorm::l2(), BaseNorm::linf()] {
        let r = dual_norm_b(&f, &base).unwrap();
        let y = r.maximizer.unwrap();
        println!(
            "B*[{}] = {:.9} (gap {:.1e})  attained by y with B-norm {:.3}, <y, f> = {:.9}",
            base.label(),
            r.value,
            r.gap,
            norm_b(&y, &base),
            pairing(&y, &f).unwrap()
        );
    }
}
