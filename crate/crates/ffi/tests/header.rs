//! Compiles and runs a C program against the generated header and the
//! static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "kfpide.h"

int main(void) {
    KfModel *model = NULL;
    KfContract *call = NULL;
    double price = 0.0;
    if (kf_model_new(100.0, 0.05, 0.2, 1.0, "normal:-0.1:0.15", "exp_minus_one", &model) != KF_STATUS_OK) return 10;
    if (kf_contract_new(KF_CONTRACT_KIND_CALL, 100.0, 1.0, 0.0, 0.0, &call) != KF_STATUS_OK) return 11;
    if (kf_price(model, call, KF_ROUTE_SERIES, &price) != KF_STATUS_OK) return 12;
    if (fabs(price - 12.761288593628754) > 1e-8) return 13;
    if (kf_model_new(100.0, 0.05, 0.2, 1.0, "poisson:-1", "identity", &model) != KF_STATUS_VALIDATION) return 14;
    printf("%s %.6f %s\n", kf_version(), price, kf_last_error_message());
    kf_contract_free(call);
    kf_model_free(model);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().expect("test executable path");
    exe.parent()
        .and_then(Path::parent)
        .expect("profile directory")
        .to_path_buf()
}

#[test]
fn header_is_current_and_complete() {
    let header =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/kfpide.h"))
            .unwrap();
    for symbol in [
        "kf_model_new",
        "kf_model_free",
        "kf_contract_new",
        "kf_contract_free",
        "kf_price",
        "kf_simulate",
        "kf_density",
        "kf_last_error_message",
        "kf_version",
        "KF_STATUS_OK",
        "typedef struct KfModel KfModel",
    ] {
        assert!(header.contains(symbol), "{symbol} missing from header");
    }
}

#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let lib = target_dir().join("libkfpide_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(
        out.status.success(),
        "C program exited with {:?}",
        out.status.code()
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with(env!("CARGO_PKG_VERSION")));
    assert!(stdout.contains("12.761289"));
    assert!(stdout.contains("model.law"));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
        {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
