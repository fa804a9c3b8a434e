//! Prints the system prompt each persona of the bundled scenario would use.

use vishsim::prompt::render_prompt;
use vishsim::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Config::bundled("innovatech")?;
    let victim = std::env::args().nth(1).unwrap_or_else(|| "Erika".into());
    for persona in &config.scenario.personas {
        println!("== {} ({:?})", persona.id, persona.intent);
        println!("{}\n", render_prompt(persona, &victim)?);
    }
    Ok(())
}
