//! Maximal function of the unit lattice and of a small delta measure.
use cubemax::maxfun::{default_r_max, eval_max, eval_max_lattice};
use cubemax::measures::{DeltaMeasure, LatticeWindow};

fn main() -> cubemax::Result<()> {
    let lattice = LatticeWindow::infinite(1)?;
    let r = eval_max_lattice(&[0.25], &lattice, default_r_max(1))?;
    println!("Z, x = 0.25: M = {} at r = {:?}", r.value, r.best_radius);

    let d = 3;
    let cube = LatticeWindow::infinite(d)?;
    for x in [[0.5, 0.5, 0.5], [0.1, 0.9, 0.5]] {
        let r = eval_max_lattice(&x, &cube, default_r_max(d))?;
        println!("Z^3, x = {x:?}: M = {:.6} at r = {:?}", r.value, r.best_radius);
    }

    let nu = DeltaMeasure::unit(2, [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]])?;
    let r = eval_max(&nu, &[0.4, 0.3], 5.0)?;
    println!("three deltas, x = (0.4, 0.3): M = {:.6} at r = {:?}", r.value, r.best_radius);
    Ok(())
}
