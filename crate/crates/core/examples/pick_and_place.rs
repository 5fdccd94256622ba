//! Picks every object with its top-ranked grasp and drops it in the bin,
//! printing the gripper events as they happen.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use verbalarm::grasp::{plan_grasps, GraspConfig};
use verbalarm::sim::{synth_cloud, task_pick_place, StopHandle, TickEvent, World};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut world = World::shipped();
    let stop = StopHandle::new();
    let ids: Vec<String> = world.objects.iter().map(|o| o.id.clone()).collect();
    for (n, id) in ids.iter().enumerate() {
        let cloud = synth_cloud(&world, &world.camera, &mut ChaCha8Rng::seed_from_u64(n as u64))?;
        let at = world.object(id)?.position();
        let plan = plan_grasps(&cloud, Some([at.x, at.y]), &GraspConfig::default(), n as u64)?;
        let grasp = plan.menu[0];
        let ticks = task_pick_place(&mut world, id, &grasp, "bin", 50.0, &stop, |t| {
            for e in &t.events {
                if !matches!(e, TickEvent::Completed) {
                    println!("{:7.2} s  {e:?}", t.t);
                }
            }
        })?;
        let p = world.object(id)?.position();
        println!(
            "{id}: {} ticks, now at ({:.3}, {:.3}, {:.3})",
            ticks.len(),
            p.x,
            p.y,
            p.z
        );
    }
    let bin = &world.bin("bin")?.region;
    let inside = world.objects.iter().filter(|o| bin.contains(&o.position())).count();
    println!("{inside}/{} objects in the bin", world.objects.len());
    Ok(())
}
