//! Runs every method on one built-in scenario and prints the episode metrics.
//!
//! `cargo run --release -p mpcom --example compare -- corridor 0.5 [repeats]`

use mpcom::planner::{make_baseline, BaselineKind, PlannerConfig};
use mpcom::scenarios;
use mpcom::sim::run_episode;

fn main() {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "wide_open".into());
    let rho: f64 = args.next().map_or(0.5, |r| r.parse().expect("rho"));
    let repeats: u64 = args.next().map_or(1, |r| r.parse().expect("repeats"));
    let scenario = scenarios::by_name(&name).expect("unknown scenario");
    let base_prepared = scenario.prepare().expect("scenario");
    let prepared = &base_prepared;
    let s = &prepared.sensors[0];
    println!(
        "fit: multizone {:.2} dB, distance {:.2} dB ({:?})",
        s.multizone.rmse_db, s.distance_rmse_db, s.distance
    );
    let base = PlannerConfig {
        rho,
        ..PlannerConfig::default()
    };
    for r in 0..repeats {
        let prepared = prepared.with_seed(scenario.seed + r);
        println!("seed {}", scenario.seed + r);
        for kind in BaselineKind::ALL {
            match run_episode(&prepared, &make_baseline(kind, &base)) {
            Ok(r) => println!(
                "{kind:7} eff {:.4} MB/s  time {:5.1} s  data {:.3} MB  goal {} collided {} success {}  clearance {:.3}  fails {}  latency {:.1}/{:.1} ms  iters {:.1}",
                r.rdg_efficiency,
                r.navigation_time,
                r.total_megabytes,
                r.reached_goal,
                r.collided,
                r.success,
                r.min_clearance,
                r.planner_failures,
                r.planner_latency_stats.median * 1e3,
                r.planner_latency_stats.p95 * 1e3,
                r.mean_mm_iterations,
            ),
            Err(e) => println!("{kind:7} error: {e}"),
        }
        }
    }
}
