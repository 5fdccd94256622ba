//! Synthetic tabletop scene, RANSAC table removal and Euclidean clustering.
//!
//! `cargo run --example segmentation -- <seed> <objects>`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use verbalarm::controller::KinematicChain;
use verbalarm::grasp::{cluster, remove_plane_indexed};
use verbalarm::sim::{random_scene, synth_labeled, World};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let count: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4);

    let world = World::new(random_scene(seed, count), KinematicChain::shipped())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cloud, labels) = synth_labeled(&world, &world.camera, &mut rng)?;
    let removal = remove_plane_indexed(&cloud, 0.005, 500, &mut rng)?;
    let p = removal.plane;
    println!(
        "{} points, plane {:.3}x + {:.3}y + {:.3}z + {:.4} = 0",
        cloud.len(),
        p.a,
        p.b,
        p.c,
        p.d
    );

    let table_left = removal.kept.iter().filter(|&&i| labels[i].is_none()).count();
    println!("{} kept, {} of them table", removal.kept.len(), table_left);

    let above = cloud.select(&removal.kept);
    let clusters = cluster(&above, 0.02, 30, 1_000_000);
    println!("{} clusters for {} objects", clusters.len(), world.objects.len());
    for c in &clusters {
        let source = labels[removal.kept[c.indices[0]]].as_deref().unwrap_or("table");
        println!(
            "  {:>5} points at ({:.3}, {:.3}, {:.3}) from {source}",
            c.points.len(),
            c.centroid.x,
            c.centroid.y,
            c.centroid.z
        );
    }
    Ok(())
}
