use std::path::Path;
use std::process::Command;

#[test]
fn header_is_generated_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/critwell.h");
    let text = std::fs::read_to_string(&header).expect("header written by the build script");
    for name in [
        "critwell_solve",
        "critwell_last_error",
        "CritwellStatus",
        "typedef struct CritwellProfile",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"critwell.h\"\nint main(void) { CritwellProfile *p = 0; \
         return critwell_profile_new(CRITWELL_PROFILE_KIND_SINE, 2.5, 1.0, &p) == CRITWELL_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let Ok(status) = Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler; skipped the compile check");
        return;
    };
    assert!(status.success());
}
