//! Height jumps along test curves t -> (t^m1, ..., t^mk).
use normlike::heightjump::{height_jump, jump_is_effective, pullback_orders, TestCurve};
use normlike::normlike::NormlikeInstance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = NormlikeInstance::scalar_example();
    for m in [vec![1, 1], vec![1, 2], vec![3, 1], vec![0, 1]] {
        let curve = TestCurve::new(m.clone())?;
        let v = jump_is_effective(&inst, &curve, 1e-9)?;
        println!(
            "m = {m:?}  jump = {:.6}  (linear {:.3} - recession {:.6})  effective {}",
            v.jump, v.linear_part, v.recession_value, v.effective
        );
    }
    let curve = TestCurve::new(vec![2, 1])?;
    let base = height_jump(&inst, &curve)?;
    println!(
        "jump(3m) / jump(m) = {:.6}",
        height_jump(&inst, &curve.scaled(3)?)? / base
    );
    for nu in [[0.0, 0.0], [1.5, -2.0]] {
        let o = pullback_orders(&inst, &curve, &nu)?;
        println!(
            "nu = {nu:?}  pullback of Lear {:.6}  Lear of pullback {:.6}  jump {:.6}",
            o.pullback_of_lear, o.lear_of_pullback, o.jump
        );
    }
    Ok(())
}
