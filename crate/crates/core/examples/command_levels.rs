//! One command per level, classified and planned from the home pose.

use verbalarm::controller::{classify, plan};
use verbalarm::deptree::parse_command;
use verbalarm::grasp::GraspCandidate;
use verbalarm::lexicon::Lexicon;
use verbalarm::sdc::extract;
use verbalarm::sim::World;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lex = Lexicon::shipped();
    let world = World::shipped();
    let teddy = world.object("teddy")?.position();
    let grasp = GraspCandidate {
        center: [teddy.x, teddy.y],
        depth: 0.17,
        angle: 0.0,
        width: 0.08,
        q: 1.0,
    };
    let view = world.view([("TeddyBear".to_string(), grasp.pose())]);

    for text in [
        "grab the teddy bear",
        "move left by 10 centimetres",
        "move down",
        "rotate joint 4 by -20 degrees",
        "move joint 3",
        "stop",
        "resume",
    ] {
        let tree = parse_command(text, &lex)?;
        for item in extract(&tree, &lex)? {
            let Some(sdc) = item.as_sdc() else {
                println!("{text:<32} trigger {item:?}");
                continue;
            };
            let level = classify(sdc, &world.chain.defaults)?;
            match plan(&world.chain, &world.robot, &level, &view) {
                Ok(t) if !t.is_empty() => println!("{text:<32} {level}: {} samples, {:.2} s", t.len(), t.duration()),
                Ok(_) => println!("{text:<32} {level}: no motion"),
                Err(e) => println!("{text:<32} {level}: {e}"),
            }
        }
    }
    Ok(())
}
