//! The reasoning toggle: rendering memories with and without the think
//! segments, leaving plans, actions, and observations untouched.
//!
//! ```bash
//! cargo run -p legomem --example reasoning_toggle
//! ```

use legomem::memory::render_memory_units;
use legomem::scenario::fixture_memory_units;

fn main() {
    let unit = fixture_memory_units().remove(0);
    let with = render_memory_units(std::slice::from_ref(&unit), true).unwrap();
    let without = render_memory_units(std::slice::from_ref(&unit), false).unwrap();

    println!("=== with reasoning ===\n{with}");
    println!("=== without reasoning ===\n{without}");
    println!(
        "characters: {} with, {} without; think lines removed: {}",
        with.len(),
        without.len(),
        with.lines().filter(|l| l.trim_start().starts_with("Think:")).count()
    );
}
