use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn formprime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formprime"))
        .args(args)
        .env_remove("FORMPRIME_JOBS")
        .output()
        .expect("run formprime")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("formprime-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn reduce_prints_decomposition() {
    let o = formprime(&["reduce", "12,10,3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "<3,2,4>\tD=-44\td=-11\tf=2\n");
    let o = formprime(&["reduce", "--gl2", "<3,-2,4>"]);
    assert_eq!(stdout(&o), "<3,2,4>\tD=-44\td=-11\tf=2\n");
}

#[test]
fn classgroup_of_1056() {
    let neg = formprime(&["classgroup", "--", "-1056"]);
    let abs = formprime(&["classgroup", "1056"]);
    assert!(neg.status.success());
    assert_eq!(stdout(&neg), stdout(&abs));
    let text = stdout(&neg);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "D=-1056\th=16\ttype=(2,2,4)");
    assert_eq!(lines.count(), 16);
}

#[test]
fn genus_and_signature() {
    let o = formprime(&["genus", "1056", "--form", "5,2,53"]);
    let text = stdout(&o);
    assert!(text.contains("Q[-1, 2, -3, -11]"), "{text}");
    assert!(
        text.contains("signature=(1,-1,-1,1)\tfixed=Q[-1, 6, -11]"),
        "{text}"
    );
}

#[test]
fn lifts() {
    assert_eq!(stdout(&formprime(&["lift", "1,0,6"])), "<1,0,24>\tD=-96\n");
    assert_eq!(stdout(&formprime(&["lift", "1,1,2"])), "<1,0,7>\tD=-28\n");
}

#[test]
fn pairs_of_worked_example() {
    let o = formprime(&["pairs", "1056", "2112"]);
    assert_eq!(
        stdout(&o),
        "Q[-1, 2, -3, -11] <7,6,39> (D=-1056) ~ <7,4,76> (D=-2112)\tE={}\n"
    );
}

#[test]
fn exit_codes() {
    assert_eq!(formprime(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(formprime(&["reduce", "1,2"]).status.code(), Some(64));
    assert_eq!(
        formprime(&["search", "--no-such-flag"]).status.code(),
        Some(64)
    );
    assert_eq!(formprime(&["classgroup", "5"]).status.code(), Some(2));
    assert_eq!(formprime(&["reduce", "1,0,-1"]).status.code(), Some(2));
    assert_eq!(
        formprime(&["--composer", "gauss", "classgroup", "4"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        formprime(&["density", "1,0,1", "--limit", "1000000000"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(formprime(&["--help"]).status.code(), Some(0));
    assert_eq!(formprime(&["--version"]).status.code(), Some(0));
}

#[test]
fn tables_match_goldens_for_every_composer() {
    for composer in ["dirichlet", "shanks", "nucomp"] {
        let out = scratch(composer);
        let o = formprime(&[
            "--composer",
            composer,
            "tables",
            "--f-max",
            "30",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{composer}");
        assert!(stdout(&o)
            .starts_with("67 classes with #delta >= 2 (61 with #delta = 2, 6 with #delta = 3"));
        for t in 1..=16 {
            let name = format!("table{t:02}.tsv");
            let mine = std::fs::read(out.join(&name)).unwrap();
            let want = std::fs::read(golden_dir().join(&name)).unwrap();
            assert!(mine == want, "{composer}: {name} differs");
        }
        std::fs::remove_dir_all(&out).unwrap();
    }
}

#[test]
fn pretty_tables_align() {
    let out = scratch("pretty");
    let o = formprime(&["--pretty", "tables", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let t = std::fs::read_to_string(out.join("table06.tsv")).unwrap();
    assert!(!t.contains('\t'));
    assert!(t.lines().nth(1).unwrap().starts_with("1      <1,1,1>"));
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn search_output_and_checkpoint() {
    let out = scratch("search");
    std::fs::create_dir_all(&out).unwrap();
    let ckpt = out.join("ckpt.tsv");
    let args = [
        "search",
        "--bound",
        "600000",
        "--f-max",
        "30",
        "--jobs",
        "3",
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ];
    let first = formprime(&args);
    assert!(first.status.success());
    let text = stdout(&first);
    assert!(text.starts_with("d\tf\tD\ttype\n-3\t1\t-3\t(1)\n"));
    assert_eq!(text.lines().count(), 1 + 425);
    assert!(text.contains("\n-7\t24\t-4032\t(2,2,4)\n"));
    assert!(text.contains("\n-7035\t1\t-7035\t(2,2,4)\n"));
    // a resumed run reuses every finished range and prints the same hits
    let before = std::fs::read_to_string(&ckpt).unwrap();
    let again = formprime(&args);
    assert_eq!(stdout(&again), text);
    assert_eq!(std::fs::read_to_string(&ckpt).unwrap(), before);
    let plain = formprime(&[
        "search", "--bound", "600000", "--f-max", "30", "--jobs", "1",
    ]);
    assert_eq!(stdout(&plain), text);
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn verify_by_id_and_file() {
    let o = formprime(&["verify", "--class", "1.10", "--limit", "100000"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(
        text.starts_with("Q[-1, 2, -3, 5] <3,0,40> (D=-480) ~ <27,12,28> (D=-2880)"),
        "{text}"
    );
    assert!(text.contains("vs <27,12,28>: {3}"));
    assert!(text.ends_with("PASS\n"));

    let out = scratch("verify");
    std::fs::create_dir_all(&out).unwrap();
    let file = out.join("class.txt");
    std::fs::write(&file, "# worked example\n7,6,39\n<7,4,76>\n").unwrap();
    let o = formprime(&[
        "verify",
        "--class",
        file.to_str().unwrap(),
        "--limit",
        "100000",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).ends_with("PASS\n"));
    assert_eq!(
        formprime(&["verify", "--class", "1.99"]).status.code(),
        Some(2)
    );
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn falsify_and_density() {
    let o = formprime(&["falsify", "1,0,5", "1,0,6", "--limit", "10000"]);
    assert_eq!(stdout(&o).lines().count(), 10);
    let o = formprime(&["falsify", "1,0,9", "1,0,12", "--limit", "100000"]);
    assert_eq!(stdout(&o), "no distinguishing prime up to 100000\n");
    let o = formprime(&["density", "1,0,1"]);
    assert!(stdout(&o).contains("expected=0.500000"));
}
