use std::process::Command;

fn rrg(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rrg"))
        .args(args)
        .output()
        .expect("spawn rrg");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    let (code, _, _) = rrg(&[]);
    assert_eq!(code, 2);
    let (code, _, _) = rrg(&["no-such-command"]);
    assert_eq!(code, 2);
    let (code, _, _) = rrg(&["--help"]);
    assert_eq!(code, 0);
}

#[test]
fn complexity_prints_published_ratios() {
    let (code, stdout, _) = rrg(&["complexity", "--lens", "3586,607", "--baseline", "6407"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("0.313"), "{stdout}");
    assert!(stdout.contains("68.7%"), "{stdout}");
    assert!(stdout.contains("0.009"), "{stdout}");
    assert!(stdout.contains("99.1%"), "{stdout}");
}

#[test]
fn binom_prints_published_p() {
    let (code, stdout, _) = rrg(&["stats", "binom", "--k", "161", "--n", "360", "--p0", "0.5"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("0.051"), "{stdout}");
}

#[test]
fn domain_errors_exit_one() {
    let (code, _, stderr) = rrg(&["stats", "binom", "--k", "10", "--n", "5", "--p0", "0.5"]);
    assert_eq!(code, 1, "{stderr}");
    assert!(stderr.contains("error"), "{stderr}");
}

#[test]
fn kappa_and_glm_consume_ratings_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ratings.tsv");
    // two raters over sixteen studies; mixed enough that the GLM is not
    // separated in any factor
    let lines = "a\ts0\tradiologist\tprecision\tNo Finding\nb\ts0\tgenerated\trecall\tNo Finding\n\
a\ts1\tradiologist\tprecision\tAtelectasis\nb\ts1\tradiologist\treadability\tAtelectasis\n\
a\ts2\tradiologist\tprecision\tAtelectasis\nb\ts2\tradiologist\treadability\tNo Finding\n\
a\ts3\tradiologist\tprecision\tNo Finding\nb\ts3\tradiologist\treadability\tNo Finding\n\
a\ts4\tradiologist\trecall\tAtelectasis\nb\ts4\tgenerated\tprecision\tNo Finding\n\
a\ts5\tgenerated\trecall\tNo Finding\nb\ts5\tradiologist\tprecision\tAtelectasis\n\
a\ts6\tradiologist\treadability\tNo Finding\nb\ts6\tradiologist\treadability\tAtelectasis\n\
a\ts7\tradiologist\treadability\tAtelectasis\nb\ts7\tradiologist\treadability\tNo Finding\n\
a\ts8\tgenerated\tprecision\tAtelectasis\nb\ts8\tradiologist\tprecision\tNo Finding\n\
a\ts9\tgenerated\treadability\tAtelectasis\nb\ts9\tradiologist\tprecision\tNo Finding\n\
a\ts10\tradiologist\trecall\tNo Finding\nb\ts10\tradiologist\tprecision\tNo Finding\n\
a\ts11\tgenerated\trecall\tAtelectasis\nb\ts11\tgenerated\treadability\tAtelectasis\n\
a\ts12\tgenerated\tprecision\tAtelectasis\nb\ts12\tradiologist\trecall\tNo Finding\n\
a\ts13\tradiologist\trecall\tNo Finding\nb\ts13\tgenerated\tprecision\tNo Finding\n\
a\ts14\tgenerated\treadability\tAtelectasis\nb\ts14\tgenerated\treadability\tNo Finding\n\
a\ts15\tgenerated\treadability\tNo Finding\nb\ts15\tgenerated\tprecision\tAtelectasis\n";
    std::fs::write(&path, lines).unwrap();

    let (code, stdout, stderr) = rrg(&["stats", "kappa", "--ratings", path.to_str().unwrap(), "--pairwise"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("fleiss kappa"), "{stdout}");
    assert!(stdout.contains("a vs b"), "{stdout}");

    let (code, stdout, stderr) = rrg(&["stats", "glm", "--ratings", path.to_str().unwrap(), "--anova"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("intercept"), "{stdout}");
    assert!(stdout.contains("delta deviance"), "{stdout}");
}

#[test]
fn gen_data_writes_all_three_splits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let (code, stdout, stderr) = rrg(&[
        "gen-data",
        "--out",
        out.to_str().unwrap(),
        "--studies",
        "30",
        "--seed",
        "5",
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("test studies"), "{stdout}");
    for split in ["train", "validation", "test"] {
        assert!(out.join(format!("{split}.jsonl")).exists());
        assert!(out.join(format!("{split}.manifest.json")).exists());
    }
}
