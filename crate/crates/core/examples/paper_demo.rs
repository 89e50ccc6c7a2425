use airborne_core::infometrics::received_from;
use airborne_core::{load_scenario_file, run_simulation_with_threads, Scenario};

fn main() -> airborne_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut s = match args.next() {
        Some(path) => load_scenario_file(path)?,
        None => Scenario::paper_demo(),
    };
    s.seed = seed;
    let t = std::time::Instant::now();
    let r = run_simulation_with_threads(&s, 1)?;
    println!("elapsed {:?} counters {:?}", t.elapsed(), r.counters);
    for (e, rcv) in [(0, 1), (0, 2), (2, 0), (2, 1)] {
        println!("{e}->{rcv}: {:?}", received_from(&r, e, rcv));
    }
    Ok(())
}
