use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn data(name: &str) -> PathBuf {
    let root = std::env::var_os("RESCASCADE_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    let p = root.join("mnist").join(name);
    assert!(
        p.exists(),
        "{} is missing (run scripts/fetch_data.sh)",
        p.display()
    );
    p
}

fn percent_after(text: &str, marker: &str) -> f64 {
    let start = text
        .find(marker)
        .unwrap_or_else(|| panic!("`{marker}` not in {text}"))
        + marker.len();
    text[start..]
        .split('%')
        .next()
        .unwrap()
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn mnist_train_eval_sweep_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mnist.txt");
    fs::write(
        &cfg,
        format!(
            "dataset.train_images = {}\ndataset.train_labels = {}\n\
             dataset.test_images = {}\ndataset.test_labels = {}\noutput.dir = {}\n",
            data("train-images-idx3-ubyte").display(),
            data("train-labels-idx1-ubyte").display(),
            data("t10k-images-idx3-ubyte").display(),
            data("t10k-labels-idx1-ubyte").display(),
            dir.path().join("out").display(),
        ),
    )
    .unwrap();
    let run = |args: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_rescascade"))
            .args(args)
            .arg("--config")
            .arg(&cfg)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };

    let out = run(&["train"]);
    let train_acc = percent_after(&out, "training accuracy:");
    assert!((train_acc - 91.2).abs() <= 2.5, "{out}");

    run(&["eval"]);
    let eval = fs::read_to_string(dir.path().join("out/eval.csv")).unwrap();
    let acc: Vec<f64> = eval
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    for (got, expected) in acc.iter().zip([91.5, 91.0, 78.4, 47.8, 14.9]) {
        assert!((100.0 * got - expected).abs() <= 2.5, "{eval}");
    }

    run(&["sweep"]);
    let sweep = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = sweep
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[6][..3], ["benchmark", "0.9148", "784"]);
    let bytes: Vec<f64> = rows[..6].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(bytes.windows(2).all(|w| w[0] <= w[1]), "{sweep}");

    let out = run(&["analyze", "--factors", "1,14"]);
    let corr = fs::read_to_string(dir.path().join("out/correlation.csv")).unwrap();
    let r: Vec<f64> = corr
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(
        (0.30..=0.65).contains(&r[0]) && r[1] < r[0],
        "{out}\n{corr}"
    );
}
