//! Starts a server on an ephemeral port and drives it with two clients.

use verbalarm::server::protocol::{Done, GraspMenu, StopAck};
use verbalarm::server::{serve, Client, Envelope, Hub, Kind};

fn show(who: &str, msgs: &[Envelope]) {
    let ticks = msgs.iter().filter(|m| m.kind == Kind::Tick).count();
    for m in msgs.iter().filter(|m| m.kind != Kind::Tick) {
        let note = match m.kind {
            Kind::GraspMenu => m
                .payload_as::<GraspMenu>()
                .map(|g| format!("{} grasps for {}", g.candidates.len(), g.object))
                .unwrap_or_default(),
            Kind::Done => m
                .payload_as::<Done>()
                .map(|d| format!("{:?} ({ticks} ticks)", d.outcome))
                .unwrap_or_default(),
            Kind::Stop => m
                .payload_as::<StopAck>()
                .map(|a| format!("interrupted: {}", a.interrupted))
                .unwrap_or_default(),
            _ => m.payload.to_string().chars().take(90).collect(),
        };
        println!("[{who}] #{:<4} {:<14} {note}", m.seq, format!("{:?}", m.kind));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = serve(Hub::shipped(), "127.0.0.1:0")?;
    println!("listening on {}", server.addr());
    let mut a = Client::connect(server.addr())?;
    let mut b = Client::connect(server.addr())?;
    println!("sessions {} and {}", a.session(), b.session());

    let s = a.command("grab the teddy bear")?;
    show("a", &a.until_done(s)?);
    let s = b.command("rotate joint 1 by 10 degrees")?;
    show("b", &b.until_done(s)?);
    let s = a.select(1)?;
    show("a", &a.until_done(s)?);
    let s = b.command("grab the bottle")?;
    show("b", &b.until_done(s)?);

    drop((a, b));
    server.shutdown();
    Ok(())
}
