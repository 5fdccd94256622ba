//! One sentence through the whole language pipeline: parse, extract,
//! classify, plan and execute.

use verbalarm::controller::{classify, translate};
use verbalarm::deptree::parse_command;
use verbalarm::lexicon::Lexicon;
use verbalarm::sdc::extract;
use verbalarm::sim::{run, StopHandle, World};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "Move forward by 30 centimetres".into());
    let lex = Lexicon::shipped();
    let mut world = World::shipped();

    let tree = parse_command(&text, &lex)?;
    print!("{}", tree.to_conllu());

    for item in extract(&tree, &lex)? {
        let Some(sdc) = item.as_sdc() else {
            println!("trigger: {item:?}");
            continue;
        };
        let level = classify(sdc, &world.chain.defaults)?;
        println!("{sdc}  ->  {level}");

        let before = world.ee_pose().position;
        let traj = translate(&world.chain, &world.robot, sdc, &world.view([]))?;
        println!("{} samples over {:.2} s", traj.len(), traj.duration());
        let ticks = run(&mut world, traj, 50.0, &StopHandle::new(), |_| {})?;
        let moved = world.ee_pose().position - before;
        println!(
            "{} ticks, tool moved ({:+.4}, {:+.4}, {:+.4}) m",
            ticks.len(),
            moved.x,
            moved.y,
            moved.z
        );
    }
    Ok(())
}
