//! Compiles and runs a small C program against the generated header and the
//! static library, exercising the handle lifecycle end to end.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#include "smoothing_lab.h"
#include <math.h>
#include <stdio.h>

int main(void) {
    double s = 0.0;
    if (sl_validate_params(2, 2.0, 2.0, 1.0, &s) != SL_STATUS_OK) return 1;
    if (s != 0.0) return 2;
    if (sl_validate_params(3, 2.0, 2.0, 1.0, &s) != SL_STATUS_INVALID_ARGUMENT) return 3;

    SlWeight *w = NULL;
    if (sl_weight_parse("indicator:lo=0,side=1", 1, &w) != SL_STATUS_OK) return 4;
    double ks = 0.0;
    if (sl_ks_norm(w, 1, 2.0, 0.5, 0.05, 128, &ks) != SL_STATUS_OK) return 5;
    if (fabs(ks - 8.0 / 3.0) / (8.0 / 3.0) > 0.02) return 6;
    sl_weight_free(w);

    double v = 0.0;
    if (sl_surface_measure_ft(3, 0.0, &v) != SL_STATUS_OK) return 7;
    if (fabs(v - 4.0 * M_PI) > 1e-12) return 8;
    printf("ks=%.9f sigma0=%.9f\n", ks, v);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    // The static library lands next to the test binary's parent directory.
    let mut lib_dir = std::env::current_exe().unwrap();
    lib_dir.pop(); // test binary
    lib_dir.pop(); // deps/
    let lib = lib_dir.join("libsmoothing_lab_ffi.a");
    if !lib.exists() {
        // Static lib not built in this invocation profile; nothing to link.
        eprintln!("skipping: {} not present", lib.display());
        return;
    }
    let Ok(cc) = which_cc() else {
        eprintln!("skipping: no C compiler available");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = dir.path().join("smoke");
    let out = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .arg("-lm")
        .arg("-lpthread")
        .arg("-ldl")
        .arg("-o")
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "cc failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "smoke test exited with {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout)
    );
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.contains("ks="), "{text}");
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc)
            .arg("--version")
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
        {
            return Ok(cc);
        }
    }
    Err(())
}
