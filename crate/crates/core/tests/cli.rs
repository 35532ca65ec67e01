use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_idp-euler"));
    c.env("RUST_LOG", "error").env_remove("IDP_EULER_OUTPUT_DIR");
    c
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("short");
    let status = bin()
        .args(["case", "gamm", "--nx", "12", "--ny", "4", "--max-steps", "2", "--output"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2), "stopped before convergence");
    assert!(out.join("mcl_convergence.csv").exists());

    let status = bin().args(["case", "gamm", "--nx", "12", "--ny", "4", "--omega", "1.5"]).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let status = bin().args(["case", "no_such_case"]).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let status = bin().args(["check", "--count", "200"]).status().unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn run_from_config_file_and_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[case]\nname = \"gamm\"\nnx = 12\nny = 4\n[solver]\nsteady_tol = 1e-6\n[output]\ndir = \"unused\"\ndeterministic = true\n",
    )
    .unwrap();
    let out = dir.path().join("from_env");
    let status = bin().env("IDP_EULER_OUTPUT_DIR", &out).arg("run").arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("solution.vtk").exists());
    assert!(out.join("run.toml").exists());

    std::fs::write(&cfg, "[solver]\nomega = 0\n").unwrap();
    let o = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("omega"));
}

#[test]
fn mesh_info_reads_gmsh() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.msh");
    let mesh = idp_euler::mesh::generate_channel(4, 2, (0.0, 1.0), &idp_euler::mesh::GeometryMap::unit_strip()).unwrap();
    std::fs::write(&path, idp_euler::mesh::write_gmsh(&mesh)).unwrap();
    let o = bin().arg("mesh-info").arg(&path).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("vertices   15"), "{text}");
    assert!(text.contains("triangles  16"), "{text}");
}
