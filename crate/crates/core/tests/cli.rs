//! The command-line front end, driven through the built binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use radar_height::geometry::project_point;
use radar_height::ground_truth::build_height_map;
use radar_height::io::{load_dataset, load_report, load_train_log, save_checkpoint, Checkpoint, OutputLayout};
use radar_height::pipeline::{EvalReport, TrainReport};
use radar_height::radar::ExtensionMethod;
use radar_height::render::{ASSOCIATED, UNASSOCIATED};

const SMALL: &str = "[scene]\nn_frames = 16\n\n[train]\nepochs = 2\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radar-height"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn setup(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), config).unwrap();
    let out = run(dir.path(), &["gen", "-c", "c.toml", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let layout = dir.path().join("o");
    (dir, layout)
}

#[test]
fn default_config_prints_and_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["config"]);
    assert_eq!(code(&out), 0);
    fs::write(dir.path().join("d.toml"), &out.stdout).unwrap();
    let again = run(dir.path(), &["gen", "-c", "d.toml", "--frames", "3", "--out", "o"]);
    assert_eq!(code(&again), 0, "{}", stderr(&again));
}

#[test]
fn gen_refuses_to_overwrite_without_force() {
    let (dir, _) = setup(SMALL);
    let again = run(dir.path(), &["gen", "-c", "c.toml", "--out", "o"]);
    assert_eq!(code(&again), 3);
    assert!(stderr(&again).contains("already exists"), "{}", stderr(&again));
    let forced = run(dir.path(), &["gen", "-c", "c.toml", "--out", "o", "--force"]);
    assert_eq!(code(&forced), 0);
    assert!(stdout(&forced).contains("16 frames"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("typo.toml", "[train]\nepochz = 3\n"),
        ("sigma.toml", "[train.loss]\nsigma = -1.0\n"),
        ("dims.toml", "[scene.camera]\nwidth = 95\n"),
        ("syntax.toml", "[scene\n"),
    ] {
        fs::write(dir.path().join(name), text).unwrap();
        let out = run(dir.path(), &["gen", "-c", name, "--out", "o"]);
        assert_eq!(code(&out), 2, "{name}: {}", stderr(&out));
        assert!(stderr(&out).starts_with("error: "));
    }
    let bad_loss = run(dir.path(), &["train", "--loss", "l3", "--out", "o"]);
    assert_eq!(code(&bad_loss), 2);
}

#[test]
fn io_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing_config = run(dir.path(), &["gen", "-c", "nope.toml"]);
    assert_eq!(code(&missing_config), 3);
    let missing_dataset = run(dir.path(), &["train", "--out", "empty", "-q"]);
    assert_eq!(code(&missing_dataset), 3, "{}", stderr(&missing_dataset));
}

#[test]
fn non_finite_training_exits_with_four() {
    let config = format!("{SMALL}\n[train.model]\nradar_scale = [1e308, 1e308, 1e308, 1e308]\n");
    let (dir, _) = setup(&config);
    let r = run(dir.path(), &["train", "-c", "c.toml", "--out", "o", "-q"]);
    assert_eq!(code(&r), 4, "{}", stderr(&r));
    assert!(stderr(&r).contains("non-finite"));
}

#[test]
fn train_writes_checkpoint_log_and_report() {
    let (dir, out) = setup(SMALL);
    let r = run(dir.path(), &["train", "-c", "c.toml", "--out", "o"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stdout(&r).contains("validation RHE"));
    assert_eq!(stderr(&r).lines().filter(|l| l.starts_with("epoch")).count(), 2);
    let layout = OutputLayout::new(&out);
    assert_eq!(load_train_log(&layout.train_log("ehl")).unwrap().len(), 2);
    let report = load_report::<TrainReport>(&layout.report("ehl-val")).unwrap();
    assert!(report.report.validation.errors.mean.rhe.is_some());

    // Single-task ablation gets its own name and still reports RHE.
    let ablation = run(dir.path(), &["train", "-c", "c.toml", "--out", "o", "--no-seg-branch", "-q"]);
    assert_eq!(code(&ablation), 0, "{}", stderr(&ablation));
    assert!(stdout(&ablation).contains("validation RHE"));
    let ablated = load_report::<TrainReport>(&layout.report("ehl-noseg-val")).unwrap();
    assert!(ablated.report.validation.errors.mean.rhe.is_some());
}

#[test]
fn eval_compares_methods_and_matches_oracles() {
    let (dir, out) = setup(SMALL);
    let layout = OutputLayout::new(&out);
    save_checkpoint(&layout.checkpoint("oracle"), &Checkpoint::Oracle, "x").unwrap();
    let r = run(
        dir.path(),
        &["eval", "-c", "c.toml", "--out", "o", "--checkpoint", "o/checkpoints/oracle.json", "--render", "2"],
    );
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let table = stdout(&r);
    assert!(table.contains("fixed 2 m") && table.contains("direct") && table.contains("filter 0.5 m"), "{table}");

    let report = load_report::<EvalReport>(&layout.report("oracle-test-eval")).unwrap().report;
    assert_eq!(report.dense.errors.mean.rhe, Some(0.0));
    let direct = report.methods.iter().find(|m| m.method == ExtensionMethod::Direct).unwrap();
    assert_eq!(direct.errors.rhe, Some(0.0));
    let filter = report.methods.iter().find(|m| m.method == ExtensionMethod::Filter).unwrap();
    assert!(filter.surviving_points.unwrap() <= filter.points);

    // Fixed 2.0 m against mean |GT - 2| at RAD pixels, frame-mean then dataset-mean.
    let d = load_dataset(&layout.dataset()).unwrap();
    let mut per_frame = vec![];
    for f in d.frames_of(&d.split.test).unwrap() {
        let (gt, part) = build_height_map(f).unwrap();
        if part.radar_pixels.is_empty() {
            continue;
        }
        let errs: Vec<f64> = part.radar_pixels.iter().map(|rp| (gt.at(rp.pixel) - 2.0).abs()).collect();
        per_frame.push(errs.iter().sum::<f64>() / errs.len() as f64);
    }
    let want = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
    let fixed = report.methods.iter().find(|m| m.fixed_height == Some(2.0)).unwrap();
    assert!((fixed.errors.rhe.unwrap() - want).abs() <= 1e-12 * want);

    let renders = fs::read_dir(layout.renders()).unwrap().count();
    assert_eq!(renders, 2 * 3);

    let ah = run(
        dir.path(),
        &["eval", "-c", "c.toml", "--out", "o", "--checkpoint", "o/checkpoints/oracle.json", "--method", "ah", "--force"],
    );
    assert_eq!(code(&ah), 2);
    assert!(stderr(&ah).contains("not implemented"), "{}", stderr(&ah));
}

fn read_ppm(path: &Path) -> (usize, usize, Vec<u8>) {
    let bytes = fs::read(path).unwrap();
    let header: Vec<&[u8]> = bytes.splitn(4, |b| b.is_ascii_whitespace()).collect();
    assert_eq!(header[0], b"P6");
    let w: usize = std::str::from_utf8(header[1]).unwrap().parse().unwrap();
    let h: usize = std::str::from_utf8(header[2]).unwrap().parse().unwrap();
    let rest = header[3];
    let body = rest[rest.len() - 3 * w * h..].to_vec();
    (h, w, body)
}

#[test]
fn render_colors_lines_by_association() {
    let (dir, out) = setup(SMALL);
    let layout = OutputLayout::new(&out);
    let d = load_dataset(&layout.dataset()).unwrap();
    let frame = d
        .frames
        .iter()
        .find(|f| f.associations.as_ref().is_some_and(|a| !a.is_empty()))
        .unwrap();
    let id = frame.id.to_string();
    let r = run(dir.path(), &["render", "-c", "c.toml", "--out", "o", "--frame", &id, "--method", "fixed"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let (_, w, px) = read_ppm(&layout.renders().join(format!("frame{:04}-fixed.ppm", frame.id)));
    let rgb = |row: usize, col: usize| [px[3 * (row * w + col)], px[3 * (row * w + col) + 1], px[3 * (row * w + col) + 2]];
    let colors: Vec<[u8; 3]> = frame
        .radar
        .iter()
        .filter_map(|p| project_point(&frame.camera, &p.position))
        .map(|q| rgb(q.row, q.col))
        .collect();
    assert!(colors.contains(&ASSOCIATED));
    assert!(colors.iter().all(|c| *c == ASSOCIATED || *c == UNASSOCIATED));

    let unknown = run(dir.path(), &["render", "-c", "c.toml", "--out", "o", "--frame", "9999"]);
    assert_eq!(code(&unknown), 1);
    let needs_store = run(dir.path(), &["render", "-c", "c.toml", "--out", "o", "--frame", &id, "--method", "direct"]);
    assert_eq!(code(&needs_store), 2);
}

#[test]
fn depth_command_reproduces_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("gt.txt"), "10 10 10\n10 10 10\n").unwrap();
    fs::write(dir.path().join("pred.txt"), "11 11 11\n11 11 11\n").unwrap();
    let r = run(dir.path(), &["depth", "--pred", "pred.txt", "--gt", "gt.txt", "--report", "r.json"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stdout(&r).starts_with("MAE 1.0000  RMSE 1.0000  AbsRel 0.1000  d1 1.0000"), "{}", stdout(&r));
    let report = load_report::<radar_height::metrics::DepthErrorReport>(&dir.path().join("r.json")).unwrap();
    assert_eq!(report.report.absrel, 0.1);

    fs::write(dir.path().join("small.txt"), "1 2\n").unwrap();
    let mismatch = run(dir.path(), &["depth", "--pred", "small.txt", "--gt", "gt.txt"]);
    assert_ne!(code(&mismatch), 0);
}
