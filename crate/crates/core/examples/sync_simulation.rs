//! Several clients edit one board over links that reorder traffic between
//! clients. Every replica must end up byte-identical to the server.
//!
//!     cargo run --example sync_simulation -- 5 200 42

use board_engine::sync::sim::{simulate, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let config = SimConfig {
        clients: args.first().copied().unwrap_or(3) as usize,
        ops_per_client: args.get(1).copied().unwrap_or(100) as usize,
        seed: args.get(2).copied().unwrap_or(1),
    };
    let report = simulate(config)?;
    println!(
        "{} clients x {} ops (seed {}): revision {}, {} acked, {} rejected",
        config.clients, config.ops_per_client, config.seed, report.final_revision, report.acked, report.rejected
    );
    println!("state size: {} bytes", report.server_json.len());
    println!("converged: {}", report.converged());
    Ok(())
}
