use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use verbalarm::grasp::{menu, plan_grasps, GraspConfig};
use verbalarm::sim::{synth_cloud, World};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let object = std::env::args().nth(1).unwrap_or_else(|| "bottle".into());
    let world = World::shipped();
    let at = world.object(&object)?.position();
    let cloud = synth_cloud(&world, &world.camera, &mut ChaCha8Rng::seed_from_u64(1))?;

    let config = GraspConfig::default();
    let plan = plan_grasps(&cloud, Some([at.x, at.y]), &config, 1)?;
    let r = &plan.refinement;
    println!(
        "{} clusters, target #{}, CEM scored {} candidates, best q {:.3}",
        plan.clusters.len(),
        plan.target,
        r.evaluated.len(),
        r.best.q
    );
    println!("best q per iteration: {:.3?}", r.history);
    for m in menu(&plan.menu) {
        println!(
            "{}: centre ({:.3}, {:.3}) depth {:.3} angle {:5.1}° width {:.3} q {:.3}",
            m.index,
            m.center[0],
            m.center[1],
            m.depth,
            m.angle.to_degrees(),
            m.width,
            m.q
        );
    }
    Ok(())
}
