//! Builds a small C program against the generated header and the static
//! library, then runs it.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "cpre.h"

int main(void) {
    CpreEnv *env = NULL;
    if (cpre_env_new("point(0.0)", 1, &env) != CPRE_STATUS_OK) return 10;
    CpreRep *rep = NULL;
    if (cpre_rep_sample(env, 0, 0, 3, 1, 4.0, 9, &rep) != CPRE_STATUS_OK) return 11;
    CpreSite a[1] = {{1, 1}};
    CpreTrajectory *t = NULL;
    if (cpre_evolve(rep, a, 1, 4.0, &t) != CPRE_STATUS_OK) return 12;
    CpreSite out[4];
    size_t n = 0;
    if (cpre_trajectory_sites_at(t, 0.0, out, 4, &n) != CPRE_STATUS_OK || n != 1) return 13;
    if (out[0].re != 1 || out[0].im != 1) return 14;
    CpreEnv *bad = NULL;
    if (cpre_env_new("nonsense", 1, &bad) != CPRE_STATUS_INVALID_ARGUMENT) return 15;
    char msg[256];
    size_t len = 0;
    if (cpre_last_error(msg, sizeof msg, &len) != CPRE_STATUS_OK || len == 0) return 16;
    cpre_trajectory_free(t);
    cpre_rep_free(rep);
    cpre_env_free(env);
    printf("ok %s\n", cpre_version());
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    // target/<profile>/deps/<test> -> target/<profile>
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libcpre_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let bin = dir.path().join("client");
    std::fs::write(&src, PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
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
        .unwrap_or_else(|e| panic!("cannot run {cc}: {e}"));
    assert!(status.success(), "C build failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "client exited with {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), format!("ok {}", env!("CARGO_PKG_VERSION")));
}
