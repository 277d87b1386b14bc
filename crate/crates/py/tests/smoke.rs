//! Runs the Python smoke test against the freshly built cdylib.

use std::path::PathBuf;
use std::process::Command;

#[test]
fn python_smoke_test_passes() {
    let exe = std::env::current_exe().unwrap();
    let build_dir = exe.parent().unwrap().parent().unwrap();
    let lib = build_dir.join("libcco.so");
    assert!(lib.exists(), "cdylib not built at {}", lib.display());

    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../python/smoke_test.py");
    let output = Command::new("python3")
        .arg(&script)
        .arg(&lib)
        .output()
        .expect("python3 is available");
    assert!(
        output.status.success(),
        "smoke test failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("smoke test passed"));
}
