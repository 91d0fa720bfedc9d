use std::path::Path;
use std::process::{Command, Output};

use csda_transport::output::read_table;

const BIN: &str = env!("CARGO_BIN_EXE_csda-transport");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let o = run(&["validate", "--config", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
        n += 1;
    }
    assert_eq!(n, 6);
}

#[test]
fn validate_echo_is_a_valid_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "a.toml",
        "experiment = \"carbon\"\ncarbon.w_n = \"gaussian\"\n",
    );
    let o = run(&["validate", "-c", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = String::from_utf8(o.stdout).unwrap();
    assert!(echo.contains("carbon.w_n_mean = 15"));
    let again = write(dir.path(), "b.toml", &echo);
    let o2 = run(&["validate", "-c", &again]);
    assert!(o2.status.success(), "{}", stderr(&o2));
    assert_eq!(echo, String::from_utf8(o2.stdout).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.toml",
        "experiment = \"bench\"\nangular.Q = -3\n",
    );
    let o = run(&["bench", "-c", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("angular.Q"));

    let typo = write(
        dir.path(),
        "typo.toml",
        "experiment = \"bench\"\n[grid]\nnxx = 3\n",
    );
    let o = run(&["validate", "-c", &typo]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid.nxx"));

    let missing = dir.path().join("missing.toml");
    let o = run(&["bench", "-c", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("missing.toml"));

    let other = write(dir.path(), "hg.toml", "experiment = \"hg\"\n");
    let o = run(&["bench", "-c", &other]);
    assert_eq!(o.status.code(), Some(1));

    let runaway = write(
        dir.path(),
        "runaway.toml",
        "experiment = \"iterate\"\ngrid.nx = 5\ngrid.ny = 5\ngrid.ne = 3\nangular.Q = 3\nphysics.sigma_el = 50\nphysics.sigma_t = 0\n",
    );
    let o = run(&[
        "iterate",
        "-c",
        &runaway,
        "-o",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn small_runs_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &str, &[(&str, &[&str])]); 3] = [
        (
            "bench",
            "bench.levels = [[5, 5, 3], [9, 9, 5]]\n",
            &[(
                "benchmark_grid_study.csv",
                &["Nx", "Ny", "Ne", "max_rel_to_peak"],
            )],
        ),
        (
            "iterate",
            "grid.nx = 9\ngrid.ny = 9\ngrid.ne = 5\nangular.Q = 5\n",
            &[
                ("benchmark_finest_iter_history.csv", &["iter", "diff_inf"]),
                (
                    "iteration_history_full.csv",
                    &["iter", "diff_inf", "diff_wl2", "seconds"],
                ),
            ],
        ),
        (
            "coupling",
            "grid.nx = 9\ngrid.ny = 9\ngrid.ne = 5\nangular.Q = 5\ncoupling.gammas = [0.0, 0.5]\n",
            &[
                (
                    "SI_gamma_counts.csv",
                    &["gamma", "n_iter", "last_Delta_inf"],
                ),
                ("SI_gamma_history_0.50.csv", &["iter", "Delta_inf"]),
            ],
        ),
    ];
    for (exp, extra, tables) in cases {
        let cfg = write(
            dir.path(),
            &format!("{exp}.toml"),
            &format!("experiment = \"{exp}\"\n{extra}"),
        );
        let out = dir.path().join(exp);
        let o = run(&[
            exp,
            "-c",
            &cfg,
            "-o",
            out.to_str().unwrap(),
            "--threads",
            "2",
        ]);
        assert!(o.status.success(), "{exp}: {}", stderr(&o));
        for (name, header) in tables {
            let t = read_table(&out.join(name)).unwrap();
            assert_eq!(&t.header, header, "{name}");
            assert!(!t.rows.is_empty());
            assert!(t.rows.iter().flatten().all(|v| v.is_finite()));
        }
        let meta = std::fs::read_to_string(out.join("run_metadata.txt")).unwrap();
        assert!(meta.contains(&format!("experiment = \"{exp}\"")));
        assert!(meta.contains("threads = 2"));
        assert!(meta.contains("run.threads = 2"));
    }
}
