use srtrack::cost::{cost_from_image, CostParams};
use srtrack::eikonal::{solve, EikonalProblem, SolveMode, SolveOptions};
use srtrack::fields::ScalarField3;
use srtrack::phantom::{phantom, PhantomKind, PhantomParams};
use std::time::Instant;

fn main() {
    let img = phantom(PhantomKind::Scurve, &PhantomParams::default()).unwrap();
    let prm = CostParams::default();
    let cost_pt = cost_from_image(&img, &prm, 1e-3).unwrap();
    let cost_2pi = cost_pt.unfold_to_se2().unwrap();
    let seed = (18.5, 63.5, 0.35);
    let anti = (18.5, 63.5, 0.35 + std::f64::consts::PI);
    let opts = SolveOptions::default();

    for round in 0..3 {
        let t = Instant::now();
        let prob_pt = EikonalProblem::new(&cost_pt, 0.01, 0.1, &[seed], SolveMode::Pt).unwrap();
        let (_w, rp) = solve(&prob_pt, &opts).unwrap();
        let pt_time = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let prob2 = EikonalProblem::new(&cost_2pi, 0.01, 0.1, &[seed, anti], SolveMode::Se2).unwrap();
        let (w2, r2) = solve(&prob2, &opts).unwrap();
        let _ = w2.fold_to_projective().unwrap();
        let se2_time = t.elapsed().as_secs_f64();
        println!(
            "round {round}: pt {pt_time:.2}s ({} cyc, {:.2} us/node-cycle) se2 {se2_time:.2}s ({} cyc, {:.2} us/node-cycle) ratio {:.3}",
            rp.iterations,
            pt_time * 1e6 / (524288.0 * rp.iterations as f64 * 8.0),
            r2.iterations,
            se2_time * 1e6 / (1048576.0 * r2.iterations as f64 * 8.0),
            pt_time / se2_time
        );
    }
}
