//! Finite-difference check of every parameter of a tiny imaging system
//! under the end-to-end and distillation losses, in both aperture modes.

use spckd::sensing::ApertureMode;
use spckd::verify::{gradient_suite, tiny_config, GRADCHECK_EPS, GRADCHECK_TOL};

fn main() -> spckd::Result<()> {
    let report = gradient_suite(&tiny_config(ApertureMode::Binary), 0, GRADCHECK_EPS)?;
    for case in &report.cases {
        println!(
            "{:<26} {:.2e}  ({} parameters, {} kinked entries skipped)",
            case.label,
            case.report.max_rel_error(),
            case.report.params.len(),
            case.report.kinked()
        );
    }
    println!(
        "worst {:.2e} vs tolerance {GRADCHECK_TOL:e}: {}",
        report.max_rel_error(),
        if report.passed(GRADCHECK_TOL) { "ok" } else { "FAILED" }
    );
    Ok(())
}
