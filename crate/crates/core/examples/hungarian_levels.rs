//! The three matching scopes on a two-video toy where one cluster means a
//! different action in each video.

use cad::matching::{hungarian_solve, match_at_level, EvalVideo, Scope};

fn video(id: &str, activity: usize, pred: &[usize], gt: &[usize]) -> EvalVideo {
    EvalVideo {
        id: id.into(),
        activity,
        pred: pred.iter().map(|&p| Some(p)).collect(),
        gt: gt.iter().map(|&g| Some(g)).collect(),
    }
}

fn main() -> cad::Result<()> {
    let counts = vec![vec![3, 1, 0], vec![0, 2, 2], vec![1, 0, 4]];
    println!("assignment of {counts:?}: {:?}", hungarian_solve(&counts));

    let videos = [
        video("pour", 0, &[0, 0, 0, 1, 1, 1], &[0, 0, 0, 1, 1, 1]),
        video("stir", 0, &[1, 1, 1, 0, 0, 0], &[0, 0, 0, 1, 1, 1]),
        video("fry", 1, &[0, 0, 2, 2, 2, 2], &[2, 2, 3, 3, 3, 3]),
    ];
    for scope in [Scope::Video, Scope::Activity, Scope::Global] {
        let r = match_at_level(&videos, scope)?;
        println!("{scope:<8} MoF {:.3}  MoP {:.3}  MoC {:.3}", r.mof, r.mop, r.moc);
        for u in &r.units {
            println!("    {:<12} {:?}", u.unit, u.assignment);
        }
    }
    Ok(())
}
