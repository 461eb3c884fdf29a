//! Sector persistence of a two-type run from a split disc.

use slfv_core::experiments::{sector_survival, SectorConfig};
use slfv_core::simulator::SplitRule;
use slfv_core::{Context, RadiusMeasure};

#[test]
fn both_halves_of_a_split_disc_survive_to_time_fifty() {
    let m = RadiusMeasure::unit();
    let cfg = SectorConfig {
        seed_radius: 5.0,
        rule: SplitRule::LeftRight,
        t: 50.0,
        n_dir: 64,
        reps: 100,
    };
    let res = sector_survival(&cfg, &Context::new(&m, 31)).unwrap();
    println!(
        "sector survival {:.2}, mean right-type share {:.3}",
        res.summary.survival_rate, res.summary.mean_type1_share
    );
    assert_eq!(res.summary.incomplete, 0);
    assert!(res.summary.survival_rate >= 0.9, "survival {}", res.summary.survival_rate);
}
