//! The bundled study cases with their file names and provenance notes,
//! shared by the fixture-regeneration binary and the test suite.

use crate::schema::{CaseFile, CaseMeta};
use gridflow_core::fixtures;

/// All bundled cases as `(file_name, case)` pairs.
pub fn bundled_cases() -> Vec<(&'static str, CaseFile)> {
    vec![
        (
            "twobus.json",
            CaseFile::SinglePhase {
                meta: CaseMeta {
                    name: "twobus".into(),
                    source: Some(
                        "constructed: slack at 1.0 p.u. feeding a 1.0 p.u. load over x = 0.1 p.u.; \
                         the solution has a quadratic closed form"
                            .into(),
                    ),
                    synth: None,
                },
                network: fixtures::two_bus(),
            },
        ),
        (
            "ieee30.json",
            CaseFile::SinglePhase {
                meta: CaseMeta {
                    name: "ieee30".into(),
                    source: Some(
                        "transcribed from the public 30-bus test-system bus/branch tables \
                         (100 MVA base); off-nominal transformer taps treated as nominal"
                            .into(),
                    ),
                    synth: None,
                },
                network: fixtures::ieee30(),
            },
        ),
        (
            "feeder2.json",
            CaseFile::ThreePhase {
                meta: CaseMeta {
                    name: "feeder2".into(),
                    source: Some(
                        "constructed: balanced three-phase analog of twobus (three decoupled \
                         x = 0.1 phases, 1.0 p.u. constant-power load each)"
                            .into(),
                    ),
                    synth: None,
                },
                network: fixtures::feeder2(),
            },
        ),
        (
            "lv906.json",
            CaseFile::ThreePhase {
                meta: CaseMeta {
                    name: "lv906".into(),
                    source: Some(
                        "deterministic stand-in generated from a fixed seed: 906-bus radial \
                         low-voltage feeder with mutually coupled trunk lines and 55 \
                         single-phase ZIP service drops; dimensions match the public 906-bus \
                         LV test feeder, but per-conductor line data is NOT transcribed from it"
                            .into(),
                    ),
                    synth: None,
                },
                network: fixtures::lv906(),
            },
        ),
    ]
}
