//! End-to-end smoke test of the `delmu` binary: generate a tiny
//! dataset, train briefly, solve, evaluate and replay.

use std::path::PathBuf;
use std::process::Command;

fn delmu() -> Command {
    Command::new(env!("CARGO_BIN_EXE_delmu"))
}

fn temp_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "delmu-cli-{}-{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap()
            .as_nanos()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn capacity_subcommand_prints_waterfilling_capacity() {
    let out = delmu()
        .args([
            "capacity",
            "--gains",
            "4,1",
            "--noise",
            "1",
            "--pmax",
            "1",
            "--bandwidth",
            "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let value: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((value - 2.3399).abs() < 1e-3, "got {value}");
}

#[test]
fn solve_subcommand_prints_a_rate_row() {
    let dir = temp_dir();
    let instance = dir.join("instance.json");
    std::fs::write(
        &instance,
        r#"{
            "min_rate_mbps": [[10, 0, 0], [0, 0, 0], [0, 0, 0], [0, 0, 0]],
            "max_demand_mbps": [[400, 100, 0], [400, 0, 0], [200, 200, 200], [50, 50, 50]]
        }"#,
    )
    .unwrap();
    let out = delmu()
        .args(["solve", "--solver", "greedy", "--topology", "1"])
        .arg("--instance")
        .arg(&instance)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let rates: Vec<f64> = stdout
        .trim()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(rates.len(), 12);
    assert!(rates[0] >= 10.0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("utility:"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn pipeline_gen_train_eval_replay() {
    let dir = temp_dir();
    let dataset = dir.join("t1.csv");
    let model = dir.join("model.json");

    let out = delmu()
        .args(["gen-data", "--topology", "1", "--count", "12", "--starts", "2", "--seed", "5"])
        .arg("--out")
        .arg(&dataset)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&dataset).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert!(csv.starts_with("topo,seed,row,delta_0"));

    // Resume with the same settings is a no-op solve-wise.
    let out = delmu()
        .args(["gen-data", "--topology", "1", "--count", "12", "--starts", "2", "--seed", "5"])
        .arg("--out")
        .arg(&dataset)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("resuming"));
    assert_eq!(std::fs::read_to_string(&dataset).unwrap(), csv);

    // Refuse to resume under different settings.
    let out = delmu()
        .args(["gen-data", "--topology", "1", "--count", "12", "--starts", "2", "--seed", "6"])
        .arg("--out")
        .arg(&dataset)
        .output()
        .unwrap();
    assert!(!out.status.success());

    let out = delmu()
        .args(["train", "--epochs", "4", "--seed", "5"])
        .arg("--data")
        .arg(&dataset)
        .arg("--out")
        .arg(&model)
        .arg("--loss-out")
        .arg(dir.join("loss.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(model.exists());
    let loss = std::fs::read_to_string(dir.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 5); // header + 4 epochs

    let out = delmu()
        .args(["eval", "--topology", "1", "--seed", "5"])
        .arg("--data")
        .arg(&dataset)
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(dir.join("reports"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["utility_dist.csv", "runtimes.csv", "per_slice.csv"] {
        assert!(dir.join("reports").join(file).exists(), "{file}");
    }

    // Replay needs a topology-3 script; train a throwaway model there.
    let dataset3 = dir.join("t3.csv");
    let model3 = dir.join("model3.json");
    let out = delmu()
        .args(["gen-data", "--topology", "3", "--count", "8", "--starts", "2", "--seed", "5"])
        .arg("--out")
        .arg(&dataset3)
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = delmu()
        .args(["train", "--epochs", "2", "--seed", "5"])
        .arg("--data")
        .arg(&dataset3)
        .arg("--out")
        .arg(&model3)
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = delmu()
        .args(["replay", "--topology", "3"])
        .arg("--model")
        .arg(&model3)
        .arg("--out")
        .arg(dir.join("replay-reports"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let replay = std::fs::read_to_string(dir.join("replay-reports").join("replay.csv")).unwrap();
    assert!(replay.starts_with("t_ms,slice,path,rate_mbps,solve_seconds"));
    assert_eq!(replay.lines().count(), 1 + 4 * 12);

    std::fs::remove_dir_all(&dir).unwrap();
}
