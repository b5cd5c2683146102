//! Regenerates the bundled fixtures: `cargo run -p downwash-cli --example make_fixtures`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use downwash::pipeline::{synthesize_log, write_log, FlightPlan, NoiseModel};
use downwash::{presets, Environment, JetParameters};

const RESOLUTION: f64 = 0.33;
const NOISE: NoiseModel = NoiseModel {
    relative_std: 0.02,
    ambient: 0.08,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    fs::create_dir_all(root.join("logs"))?;

    let drones = presets::all();
    fs::write(
        root.join("presets.json"),
        serde_json::to_string_pretty(&drones)? + "\n",
    )?;

    let depths: Vec<f64> = (8..18).map(|k| k as f64 * RESOLUTION).collect();
    let plan = FlightPlan::star(1.65, RESOLUTION, &depths).with_hover_samples(3);
    let env = Environment::default();
    for (seed, drone) in drones.iter().enumerate() {
        let log = synthesize_log(
            drone,
            &env,
            &JetParameters::UNIFIED,
            &plan,
            &NOISE,
            seed as u64,
        )?;
        let path = root
            .join("logs")
            .join(format!("{}.csv", presets::slug(&drone.name)));
        let comments = [format!(
            "synthetic {} log, unified jet parameters, relative noise {}, ambient {} m/s, seed {seed}",
            drone.name, NOISE.relative_std, NOISE.ambient
        )];
        write_log(BufWriter::new(File::create(&path)?), &log, &comments)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
