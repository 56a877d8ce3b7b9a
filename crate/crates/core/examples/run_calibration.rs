//! Regenerate the shipped calibrated constants (see bm::calibration).

use suptail::bm::calibration::{calibrate, CalibrationConfig};

fn main() {
    let report = calibrate(&CalibrationConfig::default()).expect("calibration failed");
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
