//! The experiment runner as a library: a shrunken fig3 preset through two commands.

use slope_core::harness::{run, Command, ExperimentConfig, Preset};

fn main() -> slope_core::Result<()> {
    let mut cfg = ExperimentConfig::preset(Preset::Fig3);
    cfg.sweep.p = 256;
    cfg.sweep.trials = 5;
    cfg.design.alphas = vec![0.05, 0.1];
    for command in [Command::SeVsEmpirical, Command::FdrCurve] {
        print!("{}", run(command, &cfg)?.render());
    }
    Ok(())
}
