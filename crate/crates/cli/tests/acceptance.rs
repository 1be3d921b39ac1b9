//! Runs every acceptance criterion at full scale and prints one line per
//! criterion. Exits non-zero if any criterion fails.
//!
//! `ACCEPT_ONLY=4,5` restricts the run; `ACCEPT_SCALE=quick` shrinks it.

use intermittent_runner::acceptance::{Scale, Suite, CRITERIA};

fn main() {
    let scale = match std::env::var("ACCEPT_SCALE").as_deref() {
        Ok("quick") => Scale::Quick,
        _ => Scale::Full,
    };
    let ids: Vec<u32> = match std::env::var("ACCEPT_ONLY") {
        Ok(list) => list.split(',').map(|s| s.trim().parse().expect("criterion id")).collect(),
        Err(_) => CRITERIA.iter().map(|c| c.0).collect(),
    };
    println!("acceptance suite ({scale:?} scale, {} criteria)", ids.len());
    let mut suite = Suite::new(scale, 1);
    let mut failed = 0;
    for id in ids {
        let r = suite.run(id);
        println!("{}", r.line());
        for c in &r.checks {
            println!(
                "       {} {}: {} (want {})",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.value,
                c.bound
            );
        }
        if let Some(e) = &r.error {
            println!("       error: {e}");
        }
        failed += usize::from(!r.passed);
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
