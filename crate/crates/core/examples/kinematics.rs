use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use verbalarm::controller::{fk, ik, jacobian, JointVector, KinematicChain};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let chain = KinematicChain::shipped();
    let home = chain.home_joints();
    let pose = fk(&chain, &home)?;
    println!("home q   = {:.3?}", home.as_slice());
    println!("home ee  = {:.4?}", pose.position.as_slice());
    println!("reach    = {:.3} m", chain.reach());

    let j = jacobian(&chain, &home);
    let sv = j.svd(false, false).singular_values;
    println!("J singular values {:.4?}", sv.as_slice());

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut solved = 0;
    let trials = 200;
    for _ in 0..trials {
        let q = JointVector::from_fn(|i, _| rng.random_range(chain.lower()[i] + 0.2..chain.upper()[i] - 0.2));
        let target = fk(&chain, &q)?;
        let seed =
            JointVector::from_fn(|i, _| (q[i] + rng.random_range(-0.2..0.2)).clamp(chain.lower()[i], chain.upper()[i]));
        if ik(&chain, &target, &seed).is_ok() {
            solved += 1;
        }
    }
    println!("IK from perturbed seeds: {solved}/{trials}");
    Ok(())
}
