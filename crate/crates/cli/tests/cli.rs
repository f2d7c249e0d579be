use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn treeaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treeaug"))
        .args(args)
        .env("TREEAUG_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn row(id: usize, form: &str, upos: &str, head: usize, rel: &str) -> String {
    format!("{id}\t{form}\t_\t{upos}\t_\t_\t{head}\t{rel}\t_\t_\n")
}

const TINY: &str = "1\tthe\t_\tDET\t_\t_\t2\tdet\t_\t_\n2\tdog\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_\n3\truns\t_\tVERB\t_\t_\t0\troot\t_\t_\n\n\
1\ta\t_\tDET\t_\t_\t2\tdet\t_\t_\n2\tcat\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_\n3\tsleeps\t_\tVERB\t_\t_\t0\troot\t_\t_\n\n";

const SMALL_TAGGER: [&str; 10] = [
    "--char-embed-dim", "4", "--char-hidden-dim", "4", "--word-embed-dim", "4", "--word-hidden-dim", "4",
    "--max-epochs", "3",
];

#[test]
fn augment_crops_figure() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out.conllu");
    let o = treeaug(&["augment", "--op", "crop", "--p", "1", "--seed", "7", p(&core_fixture("figure.conllu")), p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("crops=3"));
    let text = std::fs::read_to_string(&out).unwrap();
    let sentences = treeaug::conllu::parse_conllu(&text).unwrap();
    assert_eq!(sentences.len(), 4);
    let texts: Vec<String> = sentences[1..].iter().map(|s| s.text()).collect();
    assert_eq!(texts, ["Babası yazdı", "ona yazdı", "bir mektup yazdı"]);
}

#[test]
fn augment_with_zero_probability_copies_input() {
    let dir = TempDir::new().unwrap();
    for fixture in ["figure.conllu", "mixed.conllu", "multiword.conllu"] {
        let out = dir.path().join(fixture);
        let o = treeaug(&["augment", "--p", "0", p(&core_fixture(fixture)), p(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(core_fixture(fixture)).unwrap());
    }
}

#[test]
fn augment_rotates_single_chunk_once() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.conllu", &(row(1, "o", "PRON", 2, "nsubj") + &row(2, "geldi", "VERB", 0, "root") + "\n"));
    let out = dir.path().join("out.conllu");
    let o = treeaug(&["augment", "--op", "rotate", "--p", "1", &input, p(&out)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("rotations=1"));
    let sentences = treeaug::conllu::parse_conllu(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(sentences.len(), 2);
    assert_eq!(sentences[1].text(), "geldi o");
}

#[test]
fn augment_flags() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out.conllu");
    let fig = core_fixture("figure.conllu");
    let o = treeaug(&["augment", "--op", "crop", "--loi", "nsubj", "--include-originals", "false", p(&fig), p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("originals=0 crops=1"));

    let config = write(&dir, "labels.cfg", "# only subjects\nloi = nsubj, iobj\n");
    let o = treeaug(&["augment", "--op", "crop", "--label-config", &config, p(&fig), p(&out)]);
    assert!(stdout(&o).contains("crops=2"));

    let o = treeaug(&["augment", "--op", "rotate", "--max-rot", "2", p(&fig), p(&out)]);
    assert!(stdout(&o).contains("rotations=2"));

    let o = treeaug(&["augment", "--loi", "obj", "--root-phrase", "obj", p(&fig), p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERR_USAGE: "));
}

#[test]
fn error_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out.conllu");

    let cyclic = write(&dir, "cycle.conllu", &(row(1, "a", "X", 2, "dep") + &row(2, "b", "X", 1, "dep") + "\n"));
    let o = treeaug(&["augment", &cyclic, p(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("ERR_VALIDATION: "));
    assert!(stderr(&o).contains("cycle"));

    let malformed = write(&dir, "bad.conllu", "1\tonly\tthree\n\n");
    for args in [vec!["augment", malformed.as_str(), p(&out)], vec!["stats", malformed.as_str()]] {
        let o = treeaug(&args);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).starts_with("ERR_PARSE: "));
        assert!(stderr(&o).contains(": line 1: expected 10"), "{}", stderr(&o));
    }

    let o = treeaug(&["stats", "/nonexistent/file.conllu"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERR_IO: "));

    let o = treeaug(&["augment", "--op", "shuffle"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERR_USAGE: "));

    let empty = write(&dir, "empty.conllu", "");
    let model = dir.path().join("m.ckpt");
    let o = treeaug(&["train", "--train", &empty, "--model", p(&model)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("ERR_TRAINING: "));

    let not_ckpt = write(&dir, "not.ckpt", "hello\n");
    let o = treeaug(&["eval", "--model", &not_ckpt, "--test", &empty]);
    assert_eq!(o.status.code(), Some(2));

    for o in [treeaug(&["augment", &cyclic, p(&out)]), treeaug(&["stats", "/nonexistent"])] {
        assert_eq!(stderr(&o).lines().count(), 1);
    }
}

fn sized_file(dir: &TempDir, tokens: usize) -> String {
    let mut text = String::new();
    let per_sentence = 100;
    let mut left = tokens;
    while left > 0 {
        let n = left.min(per_sentence);
        for id in 1..=n {
            let (head, rel) = if id == 1 { (0, "root") } else { (1, "dep") };
            text.push_str(&row(id, "w", "X", head, rel));
        }
        text.push('\n');
        left -= n;
    }
    write(dir, &format!("size{tokens}.conllu"), &text)
}

#[test]
fn stats_report() {
    let dir = TempDir::new().unwrap();
    let o = treeaug(&["stats", &sized_file(&dir, 4_999)]);
    assert!(stdout(&o).contains("tokens: 4999\n"));
    assert!(stdout(&o).contains("verdict: ignored (<5K)"));

    let o = treeaug(&["stats", &sized_file(&dir, 119_999)]);
    assert!(stdout(&o).contains("verdict: eligible\nbucket: <120K\n"), "{}", stdout(&o));

    let o = treeaug(&["stats", p(&core_fixture("figure.conllu"))]);
    let out = stdout(&o);
    assert!(out.contains("tokens: 5\n") && out.contains("loi_histogram: {3: 1}"), "{out}");

    let o = treeaug(&["stats", "--loi", "nsubj", p(&core_fixture("figure.conllu"))]);
    assert!(stdout(&o).contains("loi_histogram: {1: 1}"));
}

#[test]
fn train_and_eval() {
    let dir = TempDir::new().unwrap();
    let train = write(&dir, "train.conllu", TINY);
    let run = |seed: &str, name: &str| {
        let model = dir.path().join(name);
        let mut args = vec!["train", "--train", &train, "--dev", &train, "--model", p(&model), "--seed", seed];
        args.extend(SMALL_TAGGER);
        let o = treeaug(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        let history = std::fs::read_to_string(format!("{}.history.tsv", model.display())).unwrap();
        assert!(history.starts_with("epoch\ttrain_loss\tdev_acc\tlr\n"));
        let o = treeaug(&["eval", "--model", p(&model), "--test", &train]);
        assert!(o.status.success(), "{}", stderr(&o));
        let acc = stdout(&o).lines().next().unwrap().to_owned();
        assert!(acc.starts_with("accuracy: ") && acc.len() == "accuracy: 0.0000".len(), "{acc}");
        (acc, history)
    };
    assert_eq!(run("5", "a.ckpt"), run("5", "b.ckpt"));

    let odd = write(&dir, "odd.conllu", &(row(1, "the", "ADJ", 0, "root") + "\n"));
    let o = treeaug(&["eval", "--model", p(&dir.path().join("a.ckpt")), "--test", &odd]);
    assert!(o.status.success());
    assert!(stderr(&o).starts_with("warning: 1 gold tokens"));
    assert!(stdout(&o).contains("accuracy: 0.0000"));

    let history = dir.path().join("h.tsv");
    let model = dir.path().join("c.ckpt");
    let mut args = vec!["train", "--train", &train, "--model", p(&model), "--history", p(&history), "--unk-strategy", "none"];
    args.extend(SMALL_TAGGER);
    assert!(treeaug(&args).status.success());
    assert!(history.exists());

    let o = treeaug(&["train", "--train", &train, "--model", p(&dir.path().join("d.ckpt")), "--dropout", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn correlate_pairs() {
    let dir = TempDir::new().unwrap();
    let up = write(&dir, "up.tsv", "size\tgain\n1\t2\n2\t4\n3\t6\n");
    let o = treeaug(&["correlate", &up]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("pearson_r: 1.0000\n"));
    let plot = std::fs::read_to_string(dir.path().join("up.plot.tsv")).unwrap();
    assert_eq!(plot, "size\timprovement\n1\t2\n2\t4\n3\t6\n");

    let down = write(&dir, "down.txt", "1 6\n2 4\n3 2\n");
    let out = dir.path().join("fig.tsv");
    let o = treeaug(&["correlate", &down, "--out", p(&out)]);
    assert!(stdout(&o).starts_with("pearson_r: -1.0000\n"));
    assert!(out.exists());

    let flat = write(&dir, "flat.txt", "1 5\n2 5\n3 5\n");
    let o = treeaug(&["correlate", &flat]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("undefined correlation"));

    let bad = write(&dir, "bad.txt", "1 5\n2 x\n");
    assert_eq!(treeaug(&["correlate", &bad]).status.code(), Some(2));
}

#[test]
fn experiment_org_only() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.conllu", TINY);
    let report = dir.path().join("r.tsv");
    let mut args = vec!["experiment", "--train", &data, "--dev", &data, "--test", &data, "--org-only", "--format", "tsv", "--out", p(&report)];
    args.extend(SMALL_TAGGER);
    let o = treeaug(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let tsv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(tsv, stdout(&o));
    let rows: Vec<&str> = tsv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("org\tnone\t-\t2\t6\t"));
    assert!(tsv.contains("# improvement_pct = 0.0000\n"));

    let mut args = vec!["experiment", "--train", &data, "--dev", &data, "--test", &data, "--op", "crop", "--ps", "0.5,1", "--runs", "2", "--limit-train", "1"];
    args.extend(SMALL_TAGGER);
    let o = treeaug(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    for name in ["org", "crop@0.5", "crop@1"] {
        assert!(table.lines().any(|l| l.starts_with(&format!("{name} "))), "{table}");
    }
    assert!(table.contains("Imp%: "));

    let mut args = vec!["experiment", "--train", &data, "--dev", &data, "--test", &data, "--ps", "1.5"];
    args.extend(SMALL_TAGGER);
    assert_eq!(treeaug(&args).status.code(), Some(1));
}
