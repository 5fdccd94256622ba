use verbalarm::deptree::parse_command;
use verbalarm::lexicon::{Category, Lexicon};
use verbalarm::sdc::{extract, Extracted, TriggerAction};

fn analyze(text: &str, lex: &Lexicon) -> Vec<Extracted> {
    match parse_command(text, lex)
        .map_err(|e| e.to_string())
        .and_then(|t| extract(&t, lex).map_err(|e| e.to_string()))
    {
        Ok(x) => x,
        Err(e) => {
            println!("  {text:?}: {e}");
            Vec::new()
        }
    }
}

fn main() {
    let mut lex = Lexicon::shipped();
    for (name, entry) in lex.entries(Category::Verbs) {
        println!("{name:>8}: {}", entry.synonyms.join(", "));
    }

    println!("before learning:");
    analyze("scoot up by 5 centimetres", &lex);

    // a learn sentence only yields a trigger; applying it is up to the caller
    for item in analyze("scoot means move", &lex) {
        if let Extracted::Trigger(TriggerAction::Learn { new_word, target }) = item {
            let delta = lex.learn(&new_word, &target).expect("target is known");
            println!("learned {} as {} ({})", delta.synonym, delta.high_level, delta.category);
        }
    }

    println!("after learning:");
    for item in analyze("scoot up by 5 centimetres", &lex) {
        match item.as_sdc() {
            Some(sdc) => println!("  {sdc}"),
            None => println!("  {item:?}"),
        }
    }

    for line in Lexicon::shipped().diff(&lex) {
        println!("{line}");
    }
}
