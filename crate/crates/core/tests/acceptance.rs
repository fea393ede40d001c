//! Runs every acceptance check, printing one line per check.

use std::time::Instant;

use selfshrink::verify;

#[test]
fn acceptance_suite() {
    let mut failing = Vec::new();
    for (k, run) in verify::ALL.iter().enumerate() {
        let start = Instant::now();
        let check = run();
        println!(
            "[{}] {:>2} {:<26} margin {:>+.3e}  {:>7.2} s  ({})",
            if check.pass { "PASS" } else { "FAIL" },
            k + 1,
            check.name,
            check.margin,
            start.elapsed().as_secs_f64(),
            check.citation
        );
        println!("       {}", check.detail);
        if !check.pass {
            failing.push(check.name);
        }
    }
    assert!(failing.is_empty(), "failing checks: {failing:?}");
}
